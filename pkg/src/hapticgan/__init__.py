"""Semi-supervised material recognition from haptic time series."""

__version__ = "0.1.0"
