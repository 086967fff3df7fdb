"""Seeded synthetic scenes with analytic ground truth.

Food items are physical objects described in millimetres (shape family,
extent, aspect, weight); a scene renders items next to a reference coin and
the coin's pixel diameter fixes the scene's true mm/px scale. The dataset
generator mirrors the multi-view protocol: each item appears in
``views_per_item`` scenes with a fresh rotation, placement, coin, and
boundary jitter, so its calorie label stays constant while the measured
features vary view to view.

The coin renders with an even pixel diameter centered on the half-integer
grid, making its rasterized bounding box exactly the nominal diameter, so
true mm/px = 25.5 / diameter_px. Weight model: weight_g = nominal area_mm2
* class thickness (g/mm^2) * (1 + u), u uniform in +-weight_noise, drawn
once per item; calories = weight * class density.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from foodcal import measurement
from foodcal.errors import PlacementFailure
from foodcal.measurement import (
    COIN_DIAMETER_MM,
    CalorieDensityTable,
    ClassLabel,
    DetectionInstance,
    FeatureRecord,
    FOOD_CLASSES,
)

SHAPE_FAMILIES = {
    ClassLabel.SINGARA: "triangle",
    ClassLabel.SOMUSA: "triangle",
    ClassLabel.PURI: "ellipse",
    ClassLabel.PEAJU: "ellipse",
    ClassLabel.BEGUNI: "rectangle",
}

# Portion calibration. Per-class top-view area bands tile [600, 1200] mm^2
# geometrically (constant band ratio), and the calorie bands tile [30, 60]
# kcal in the reverse class order, which pins each class's kcal-per-mm2
# rate. Geometric tiling keeps both pooled distributions compact (max |z|
# below the filtering threshold of 2 for everything except measurement
# error), while the reversed assignment yields a ~3x rate spread: the
# class-area interaction that separates the ensemble models from a single
# global linear fit.
_AREA_TOTAL_MM2 = (600.0, 1200.0)
_CAL_TOTAL_KCAL = (30.0, 60.0)
_AREA_ORDER = (
    ClassLabel.PEAJU,
    ClassLabel.BEGUNI,
    ClassLabel.SOMUSA,
    ClassLabel.SINGARA,
    ClassLabel.PURI,
)


def _geometric_bands(lo, hi, n=5):
    ratio = (hi / lo) ** (1.0 / n)
    return [(lo * ratio**k, lo * ratio ** (k + 1)) for k in range(n)]


_AREA_BANDS_MM2 = dict(zip(_AREA_ORDER, _geometric_bands(*_AREA_TOTAL_MM2)))
_CAL_BANDS_KCAL = dict(zip(reversed(_AREA_ORDER), _geometric_bands(*_CAL_TOTAL_KCAL)))
_CAL_RATE_PER_MM2 = {
    label: _CAL_BANDS_KCAL[label][0] / _AREA_BANDS_MM2[label][0] for label in _AREA_ORDER
}

# grams per square millimetre, derived so weight * density hits the class's
# calorie band
THICKNESS_G_PER_MM2 = {
    label: _CAL_RATE_PER_MM2[label] / measurement.DEFAULT_DENSITIES[label]
    for label in FOOD_CLASSES
}


def _default_area_ranges():
    return dict(_AREA_BANDS_MM2)


@dataclass(frozen=True)
class SceneConfig:
    width: int = 320
    height: int = 320
    coin_radius_range: tuple[float, float] = (20.0, 30.0)  # px; diameter forced even
    items_per_scene: int = 3
    area_ranges_mm2: dict = field(default_factory=_default_area_ranges)
    views_per_item: int = 10
    boundary_noise: float = 0.02  # radial perturbation, fraction of radius
    weight_noise: float = 0.05
    seed: int = 0
    max_placement_tries: int = 200


@dataclass(frozen=True)
class FoodItem:
    """A physical item: fixed mm geometry and a fixed calorie content."""

    label: ClassLabel
    extent_mm: float
    aspect: float
    height_ratio: float  # triangles: height / base
    weight_g: float
    calories_kcal: float
    area_mm2: float
    perimeter_mm: float


@dataclass(frozen=True)
class InstanceTruth:
    """Per-view analytic geometry in pixels (unperturbed shape) plus the
    item's physical label data."""

    label: ClassLabel
    area_px: float
    perimeter_px: float
    bbox_w_px: float
    bbox_h_px: float
    weight_g: float | None = None
    calories_kcal: float | None = None


@dataclass(frozen=True)
class SceneTruth:
    mm_per_px: float
    instances: list[InstanceTruth]


@dataclass
class Scene:
    width: int
    height: int
    seed: int
    instances: list[DetectionInstance]  # coin first, then foods, masks attached
    truth: SceneTruth


# ---------------------------------------------------------------------------
# shape machinery


class _Shape:
    """Star-convex shape centered at (cx, cy) with an exact inside test on
    centered offsets; ``truth`` gives the analytic geometry of the nominal
    (unjittered) boundary."""

    def __init__(self, cx, cy, rotation=0.0):
        self.cx = cx
        self.cy = cy
        self.rotation = rotation

    def contains(self, dx, dy):
        raise NotImplementedError

    def max_radius(self) -> float:
        raise NotImplementedError

    def truth(self) -> tuple[float, float, float, float]:
        """(area, perimeter, bbox_w, bbox_h) of the nominal shape."""
        raise NotImplementedError


class _Disk(_Shape):
    def __init__(self, cx, cy, radius):
        super().__init__(cx, cy)
        self.radius = radius

    def contains(self, dx, dy):
        return dx * dx + dy * dy <= self.radius * self.radius

    def max_radius(self):
        return self.radius

    def truth(self):
        r = self.radius
        return math.pi * r * r, 2 * math.pi * r, 2 * r, 2 * r


class _Ellipse(_Shape):
    def __init__(self, cx, cy, a, b, rotation):
        super().__init__(cx, cy, rotation)
        self.a = a
        self.b = b

    def contains(self, dx, dy):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0

    def max_radius(self):
        return max(self.a, self.b)

    def truth(self):
        a, b = self.a, self.b
        area = math.pi * a * b
        perimeter = math.pi * (3 * (a + b) - math.sqrt((3 * a + b) * (a + 3 * b)))  # Ramanujan
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        w = 2 * math.sqrt((a * c) ** 2 + (b * s) ** 2)
        h = 2 * math.sqrt((a * s) ** 2 + (b * c) ** 2)
        return area, perimeter, w, h


class _Rectangle(_Shape):
    def __init__(self, cx, cy, half_w, half_h):
        super().__init__(cx, cy)
        self.half_w = half_w
        self.half_h = half_h

    def contains(self, dx, dy):
        return (np.abs(dx) <= self.half_w) & (np.abs(dy) <= self.half_h)

    def max_radius(self):
        return math.hypot(self.half_w, self.half_h)

    def truth(self):
        w, h = 2 * self.half_w, 2 * self.half_h
        return w * h, 2 * (w + h), w, h


class _Triangle(_Shape):
    """Isoceles triangle, apex up before rotation, centroid at the origin."""

    def __init__(self, cx, cy, base, height, rotation):
        super().__init__(cx, cy, rotation)
        self.base = base
        self.height = height
        c, s = math.cos(rotation), math.sin(rotation)
        local = [
            (0.0, -2.0 * height / 3.0),
            (base / 2.0, height / 3.0),
            (-base / 2.0, height / 3.0),
        ]
        self.vertices = [(x * c - y * s, x * s + y * c) for x, y in local]

    def contains(self, dx, dy):
        inside = np.ones(np.broadcast(dx, dy).shape, dtype=bool)
        v = self.vertices
        for i in range(3):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % 3]
            cross = (x2 - x1) * (dy - y1) - (y2 - y1) * (dx - x1)
            inside &= cross >= 0.0
        return inside

    def max_radius(self):
        return max(math.hypot(x, y) for x, y in self.vertices)

    def truth(self):
        v = self.vertices
        area = 0.0
        perimeter = 0.0
        for i in range(3):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % 3]
            area += x1 * y2 - x2 * y1
            perimeter += math.hypot(x2 - x1, y2 - y1)
        xs = [x for x, _ in v]
        ys = [y for _, y in v]
        return abs(area) / 2.0, perimeter, max(xs) - min(xs), max(ys) - min(ys)


def _shape_for(label, extent, aspect, height_ratio, rotation, cx, cy) -> _Shape:
    family = SHAPE_FAMILIES[label]
    if family == "ellipse":
        return _Ellipse(cx, cy, extent / 2.0, extent / 2.0 * aspect, rotation)
    if family == "rectangle":
        return _Rectangle(cx, cy, extent / 2.0, extent / 2.0 * aspect)
    return _Triangle(cx, cy, extent, extent * height_ratio, rotation)


def _extent_for_area(label, area, aspect, height_ratio) -> float:
    family = SHAPE_FAMILIES[label]
    if family == "ellipse":
        return math.sqrt(4.0 * area / (math.pi * aspect))
    if family == "rectangle":
        return math.sqrt(area / aspect)
    return math.sqrt(2.0 * area / height_ratio)


def draw_item(rng, label: ClassLabel, cfg: SceneConfig) -> FoodItem:
    """Sample one physical item: mm geometry plus its fixed calorie label.

    The top-view area is uniform over the class's band and the extent is
    derived from it, so the pooled size distribution stays light-tailed."""
    lo, hi = cfg.area_ranges_mm2[label]
    target_area = float(rng.uniform(lo, hi))
    aspect = float(rng.uniform(0.55, 0.9))
    height_ratio = float(rng.uniform(0.75, 1.0))
    extent = _extent_for_area(label, target_area, aspect, height_ratio)
    nominal = _shape_for(label, extent, aspect, height_ratio, 0.0, 0.0, 0.0)
    area_mm2, perimeter_mm, _, _ = nominal.truth()
    weight = (
        area_mm2
        * THICKNESS_G_PER_MM2[label]
        * (1.0 + float(rng.uniform(-cfg.weight_noise, cfg.weight_noise)))
    )
    return FoodItem(
        label=label,
        extent_mm=extent,
        aspect=aspect,
        height_ratio=height_ratio,
        weight_g=weight,
        calories_kcal=measurement.calorie_label(weight, label, CalorieDensityTable()),
        area_mm2=area_mm2,
        perimeter_mm=perimeter_mm,
    )


def _jitter_field(rng, amplitude):
    """Radial perturbation r(phi) *= 1 + amplitude * f(phi) with f a unit-
    bounded two-harmonic wave; None when the amplitude is zero."""
    if amplitude <= 0:
        return None
    weights = rng.uniform(0.3, 1.0, size=2)
    weights = weights / weights.sum()
    phases = rng.uniform(0.0, 2.0 * math.pi, size=2)

    def f(phi):
        return amplitude * (
            weights[0] * np.sin(2 * phi + phases[0]) + weights[1] * np.sin(3 * phi + phases[1])
        )

    return f


def _rasterize(shape: _Shape, height, width, jitter=None) -> np.ndarray:
    mask = np.zeros((height, width), dtype=np.uint8)
    reach = shape.max_radius() * 1.2 + 2.0
    x0 = max(0, int(math.floor(shape.cx - reach)))
    x1 = min(width - 1, int(math.ceil(shape.cx + reach)))
    y0 = max(0, int(math.floor(shape.cy - reach)))
    y1 = min(height - 1, int(math.ceil(shape.cy + reach)))
    if x1 < x0 or y1 < y0:
        return mask
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    dx = xs - shape.cx
    dy = ys - shape.cy
    if jitter is not None:
        phi = np.arctan2(dy, dx)
        scale = 1.0 / (1.0 + jitter(phi))
        dx = dx * scale
        dy = dy * scale
    mask[y0 : y1 + 1, x0 : x1 + 1] = shape.contains(dx, dy).astype(np.uint8)
    return mask


def _mask_bbox(mask) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(mask)
    x0, y0 = int(xs.min()), int(ys.min())
    return (x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1)


# ---------------------------------------------------------------------------
# scenes


def generate_scene(
    cfg: SceneConfig, seed: int, items: list[FoodItem] | None = None
) -> Scene:
    """One scene: a coin plus food items, deterministic in (cfg.seed, seed).

    ``items`` pins the physical items (multi-view datasets); otherwise
    ``items_per_scene`` items are drawn from the scene's own stream.
    """
    rng = np.random.default_rng((cfg.seed, seed))

    occupancy = np.zeros((cfg.height, cfg.width), dtype=bool)

    def place(build_shape, reach_hint):
        for _ in range(cfg.max_placement_tries):
            margin = min(reach_hint + 2.0, (min(cfg.width, cfg.height) - 2) / 2.0)
            cx = float(rng.uniform(margin, cfg.width - margin))
            cy = float(rng.uniform(margin, cfg.height - margin))
            shape, jitter = build_shape(cx, cy)
            mask = _rasterize(shape, cfg.height, cfg.width, jitter)
            if not mask.any():
                continue
            ys, xs = np.nonzero(mask)
            touches_edge = (
                ys.min() == 0 or xs.min() == 0 or ys.max() == cfg.height - 1 or xs.max() == cfg.width - 1
            )
            if touches_edge or (occupancy & (mask != 0)).any():
                continue
            occupancy[mask != 0] = True
            return shape, mask
        raise PlacementFailure(
            f"could not place an item of reach {reach_hint:.0f}px in a "
            f"{cfg.width}x{cfg.height} scene after {cfg.max_placement_tries} tries"
        )

    # coin first: even diameter, half-integer center, no boundary noise
    lo, hi = cfg.coin_radius_range
    diameter = 2 * int(rng.integers(int(math.ceil(lo)), int(hi) + 1))
    radius = diameter / 2.0
    mm_per_px = COIN_DIAMETER_MM / diameter

    def build_coin(cx, cy):
        return _Disk(math.floor(cx) + 0.5, math.floor(cy) + 0.5, radius), None

    _, coin_mask = place(build_coin, radius)

    instances = [
        DetectionInstance(
            label=ClassLabel.COIN,
            bbox=_mask_bbox(coin_mask),
            confidence=round(float(rng.uniform(0.9, 1.0)), 6),
            mask=coin_mask,
        )
    ]
    truths = [
        InstanceTruth(
            label=ClassLabel.COIN,
            area_px=math.pi * radius * radius,
            perimeter_px=2 * math.pi * radius,
            bbox_w_px=float(diameter),
            bbox_h_px=float(diameter),
        )
    ]

    if items is None:
        labels = [FOOD_CLASSES[i] for i in rng.integers(0, len(FOOD_CLASSES), cfg.items_per_scene)]
        items = [draw_item(rng, label, cfg) for label in labels]

    for item in items:
        rotation = float(rng.uniform(0.0, math.pi))
        extent_px = item.extent_mm / mm_per_px

        def build_food(cx, cy, item=item, rotation=rotation, extent_px=extent_px):
            shape = _shape_for(
                item.label, extent_px, item.aspect, item.height_ratio, rotation, cx, cy
            )
            return shape, _jitter_field(rng, cfg.boundary_noise)

        shape, mask = place(build_food, extent_px / 2.0 * 1.2)
        area_px, perim_px, bw, bh = shape.truth()
        instances.append(
            DetectionInstance(
                label=item.label,
                bbox=_mask_bbox(mask),
                confidence=round(float(rng.uniform(0.75, 1.0)), 6),
                mask=mask,
            )
        )
        truths.append(
            InstanceTruth(
                label=item.label,
                area_px=area_px,
                perimeter_px=perim_px,
                bbox_w_px=bw,
                bbox_h_px=bh,
                weight_g=item.weight_g,
                calories_kcal=item.calories_kcal,
            )
        )

    return Scene(
        width=cfg.width,
        height=cfg.height,
        seed=seed,
        instances=instances,
        truth=SceneTruth(mm_per_px=mm_per_px, instances=truths),
    )


def _scene_with_retries(cfg: SceneConfig, seed: int, items, attempts: int = 20) -> Scene:
    """Crowded draws can fail placement; retry under derived sub-seeds so the
    result stays a pure function of (cfg, seed, items)."""
    for attempt in range(attempts):
        try:
            return generate_scene(replace(cfg, seed=(cfg.seed + 7919 * attempt)), seed, items)
        except PlacementFailure:
            if attempt == attempts - 1:
                raise
    raise AssertionError("unreachable")


def generate_regression_dataset(
    cfg: SceneConfig, n_records: int, seed: int
) -> tuple[list[FeatureRecord], list[Scene]]:
    """Multi-view feature records with calorie labels from analytic truth.

    Items are drawn first (classes cycling through seeded permutations for
    near-uniform balance), then rendered in ``views_per_item`` scenes each,
    ``items_per_scene`` items at a time. One record per item view, truncated
    to ``n_records``. Deterministic per (cfg, n_records, seed), including
    the bytes of any files written from the result.
    """
    if n_records < 1:
        raise ValueError("n_records must be >= 1")
    cfg = replace(cfg, seed=seed)
    views = max(1, cfg.views_per_item)
    group_size = max(1, cfg.items_per_scene)
    n_items = -(-n_records // views)  # ceil
    item_rng = np.random.default_rng((seed, 0x17E6))
    cycle: list[ClassLabel] = []
    items: list[FoodItem] = []
    for _ in range(n_items):
        if not cycle:
            cycle = [FOOD_CLASSES[j] for j in item_rng.permutation(len(FOOD_CLASSES))]
        items.append(draw_item(item_rng, cycle.pop(0), cfg))

    groups = [items[i : i + group_size] for i in range(0, len(items), group_size)]
    records: list[FeatureRecord] = []
    scenes: list[Scene] = []
    scene_idx = 0
    for view in range(views):
        for group in groups:
            if len(records) >= n_records:
                break
            scene = _scene_with_retries(cfg, scene_idx, group)
            scene_idx += 1
            scenes.append(scene)
            scale = measurement.scale_from_detections(scene.instances)
            recs = measurement.extract_features(scene.instances, scale)
            food_truths = [t for t in scene.truth.instances if t.label is not ClassLabel.COIN]
            for rec, truth in zip(recs, food_truths):
                rec.calories_kcal = truth.calories_kcal
                records.append(rec)
    return records[:n_records], scenes
