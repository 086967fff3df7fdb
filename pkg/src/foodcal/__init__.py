"""foodcal: coin-referenced food measurement and calorie regression toolkit."""

__version__ = "0.1.0"
