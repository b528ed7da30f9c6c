"""Blind noise-level estimation from the patch covariance spectrum.

The eigenvalues of the patch covariance split into a signal part (top) and a
noise floor (tail).  Scanning from the top, the first tail whose mean and
median agree marks the floor; the mean of that tail estimates the noise
variance.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import SgpsError, Signal


@dataclass(frozen=True)
class PatchConfig:
    patch_size: int = 7
    stride: int = 1
    rel_tol: float = 1e-3

    def __post_init__(self):
        if self.patch_size < 1:
            raise SgpsError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.stride < 1:
            raise SgpsError(f"stride must be >= 1, got {self.stride}")
        if self.rel_tol < 0:
            raise SgpsError(f"rel_tol must be >= 0, got {self.rel_tol}")


def extract_patches(x: Signal, cfg: PatchConfig = PatchConfig()) -> np.ndarray:
    """All patches as rows of an (s, r) matrix.

    2D signals yield p x p windows (r = p^2), 1D signals length-p windows
    (r = p), both swept at the configured stride.  A signal smaller than one
    patch is an error.
    """
    p, stride = cfg.patch_size, cfg.stride
    arr = x.as_nd()
    if any(dim < p for dim in arr.shape):
        raise SgpsError(f"signal shape {x.shape} smaller than patch size {p}")
    if arr.ndim == 1:
        win = np.lib.stride_tricks.sliding_window_view(arr, p)[::stride]
        return win.reshape(-1, p).astype(np.float64)
    win = np.lib.stride_tricks.sliding_window_view(arr, (p, p))[::stride, ::stride]
    return win.reshape(-1, p * p).astype(np.float64)


def tail_eigenvalues(patches: np.ndarray) -> np.ndarray:
    """Eigenvalues of the patch covariance, descending, clamped at zero."""
    s = patches.shape[0]
    mu = patches.mean(axis=0)
    centered = patches - mu
    cov = centered.T @ centered / s
    lam = np.linalg.eigvalsh(cov)[::-1]
    return np.maximum(lam, 0.0)


def estimate_sigma(x: Signal, cfg: PatchConfig = PatchConfig()) -> float:
    """Estimated noise standard deviation of x.

    Needs at least 2 patches; fewer patches than patch dimensions is allowed
    but warned about, since the covariance is then rank-deficient.  If no
    tail balances, the smallest eigenvalue is the fallback.
    """
    patches = extract_patches(x, cfg)
    s, r = patches.shape
    if s < 2:
        raise SgpsError(f"need at least 2 patches, got {s}")
    if s <= r:
        warnings.warn(
            f"only {s} patches for {r} dimensions; covariance is rank-deficient",
            stacklevel=2,
        )
    lam = tail_eigenvalues(patches)
    for i in range(r):
        tail = lam[i:]
        mean = float(tail.mean())
        med = float(np.median(tail))
        if mean <= med or abs(mean - med) <= cfg.rel_tol * med:
            return float(np.sqrt(max(mean, 0.0)))
    return float(np.sqrt(lam[-1]))
