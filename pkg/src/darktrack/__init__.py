"""Low-light correlation-filter tracking with global-adaptation enhancement."""

from .enhance import LowLightEnhancer
from .features import FeatureExtractor
from .filter import DualCorrelationFilter
from .imgproc import BBox
from .tracker import DarkTracker

__version__ = "0.1.0"

__all__ = ["BBox", "DarkTracker", "DualCorrelationFilter", "FeatureExtractor",
           "LowLightEnhancer", "__version__"]
