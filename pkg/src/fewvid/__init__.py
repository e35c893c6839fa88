"""Few-shot image-to-video action animation on synthetic parametric data."""

__version__ = "0.1.0"
