"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import numpy as np


def check_images(images, name: str = "images") -> np.ndarray:
    """(N, H, W, 3) float32 in [0, 1]; a single (H, W, 3) image gets a batch axis; uint8 is rescaled."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ValueError(f"{name} must have shape (N, H, W, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    arr = arr.astype(np.float32)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1] (or be uint8)")
    return arr


def check_stereo_pairs(X) -> tuple[np.ndarray, np.ndarray]:
    """Accept (left, right) or an (N, 2, H, W, 3) array; return matched image stacks."""
    if isinstance(X, (tuple, list)) and len(X) == 2:
        left, right = check_images(X[0], "left"), check_images(X[1], "right")
    else:
        arr = np.asarray(X)
        if arr.ndim != 5 or arr.shape[1] != 2:
            raise ValueError(f"stereo input must be (left, right) or shape (N, 2, H, W, 3), got {arr.shape}")
        left, right = check_images(arr[:, 0], "left"), check_images(arr[:, 1], "right")
    if left.shape != right.shape:
        raise ValueError(f"left {left.shape} and right {right.shape} differ in shape")
    return left, right


def check_disparity(y, shape: tuple[int, int, int]) -> np.ndarray:
    """(N, H, W) finite, non-negative float32 disparities matching `shape`."""
    d = np.asarray(y, dtype=np.float32)
    if d.ndim == 2:
        d = d[None]
    if d.shape != tuple(shape):
        raise ValueError(f"disparity shape {d.shape} does not match images {tuple(shape)}")
    if not np.isfinite(d).all() or (d < 0).any():
        raise ValueError("disparity must be finite and non-negative")
    return d


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
