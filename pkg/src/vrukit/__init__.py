"""Tools for unifying RGB and thermal road-user datasets, weighting rare
classes, augmenting images, scoring detectors and fusing two-sensor output."""

__version__ = "0.1.0"
