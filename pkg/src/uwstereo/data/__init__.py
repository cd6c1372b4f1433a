"""Dataset storage, cleaning and analysis."""

from .manifest import DatasetManifest, FrameRecord, ManifestError
from .pfm import PFMError, PFMFormatError, PFMTruncatedError, decode_pfm, encode_pfm, read_pfm, write_pfm
from .processing import (
    CleaningConfig, DisparityHistogram, apply_cleaning_rules, disparity_histogram, disparity_stats,
    select_low_disparity_drops, split_dataset,
)
