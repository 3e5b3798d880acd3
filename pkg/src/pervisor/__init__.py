"""Object recognition engine with a network service, plus POI proximity
filtering and morphing-sequence tools."""

from .imagecore import GrayImage, IntegralImage, box_sum, integral, load_pgm, save_pgm

__version__ = "0.1.0"

__all__ = [
    "GrayImage",
    "IntegralImage",
    "box_sum",
    "integral",
    "load_pgm",
    "save_pgm",
    "__version__",
]
