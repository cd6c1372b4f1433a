"""Supervised training, metrics and evaluation."""

from .data import BatchSampler, StereoSample, load_samples, samples_from_frames
from .evaluate import CrossDomainReport, EvalReport, EvalRow, cross_domain_eval, evaluate_model, predict_disparity
from .loop import (
    IncompatibleCheckpointError, TrainConfig, TransferReport, load_stereo_model, train_model,
    transfer_pretrained_weights,
)
from .losses import iteration_weights, stereo_loss
from .metrics import compute_bad_pixel_rate, compute_epe
