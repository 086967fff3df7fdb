"""Exception types raised across the toolkit."""


class FoodcalError(Exception):
    """Base class for all toolkit errors."""


class EmptyComponent(FoodcalError):
    """A mask operation received a component with no foreground pixels."""


class NoReferenceObject(FoodcalError):
    """No coin instance among the detections."""


class InvalidDimension(FoodcalError):
    """Non-positive pixel dimension passed to the scaling computation."""


class UnknownDensity(FoodcalError):
    """No calorie density available for the requested class."""


class CoinNotEncodable(FoodcalError):
    """The coin class has no one-hot slot in the regression feature layout."""


class EmptyDataset(FoodcalError):
    """An operation that fits parameters received zero rows."""


class TooFewRows(FoodcalError):
    """Outlier filtering needs at least two rows."""


class ShapeMismatch(FoodcalError):
    """Tensor or parameter shapes are inconsistent."""


class DimensionMismatch(FoodcalError):
    """Feature vector length does not match the trained layout."""


class SingularSystem(FoodcalError):
    """Normal equations unsolvable even with the ridge fallback."""


class ZeroTotalWeight(FoodcalError):
    """Weighted median of weights that sum to zero."""


class LengthMismatch(FoodcalError):
    """Prediction and truth vectors differ in length."""


class DegenerateTarget(FoodcalError):
    """R^2 undefined because the truth vector has zero variance."""


class NoGroundTruth(FoodcalError):
    """Average precision requested with zero ground-truth instances."""


class PlacementFailure(FoodcalError):
    """Could not place all scene items without overlap within the retry budget."""


class DataError(FoodcalError):
    """Malformed input file (mask, manifest, CSV, or model)."""
