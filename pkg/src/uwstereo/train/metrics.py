"""End-point error and thresholded bad-pixel rate."""

from __future__ import annotations

import numpy as np


def _as_array(x) -> np.ndarray:
    if hasattr(x, "detach"):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def _abs_error(pred, gt, valid_mask):
    pred, gt = _as_array(pred), _as_array(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    err = np.abs(pred - gt)
    if valid_mask is not None:
        valid = np.asarray(_as_array(valid_mask), dtype=bool)
        if valid.shape != err.shape:
            raise ValueError(f"valid mask shape {valid.shape} does not match {err.shape}")
        err = err[valid]
    if err.size == 0:
        raise ValueError("valid mask is empty")
    return err.ravel()


def compute_epe(pred, gt, valid_mask=None) -> float:
    """Mean absolute disparity error over valid pixels (all pixels when no mask is given)."""
    return float(_abs_error(pred, gt, valid_mask).mean())


def compute_bad_pixel_rate(pred, gt, tau: float = 3.0, valid_mask=None) -> float:
    """Percentage of valid pixels whose absolute error exceeds `tau`."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    err = _abs_error(pred, gt, valid_mask)
    return float(100.0 * np.count_nonzero(err > tau) / err.size)


def error_sums(pred, gt, tau: float = 3.0, valid_mask=None) -> tuple[float, int, int]:
    """(sum of abs error, bad pixel count, pixel count) for order-independent reduction."""
    err = _abs_error(pred, gt, valid_mask)
    return float(err.sum()), int(np.count_nonzero(err > tau)), int(err.size)
