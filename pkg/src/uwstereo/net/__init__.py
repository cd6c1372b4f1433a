"""Iterative stereo network with cross-view enhancement."""

from .config import ConfigError, ModelConfig
from .cost import build_cost_volume, groupwise_correlation, soft_argmin
from .cve import CrossViewEnhancement
from .features import FeatureExtractor, ShapeError
from .model import BackboneFeatures, DisparityEstimate, StereoNet
