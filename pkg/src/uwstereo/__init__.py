"""Synthetic underwater stereo data and a masked-pretrained iterative stereo network."""

__version__ = "0.1.0"
