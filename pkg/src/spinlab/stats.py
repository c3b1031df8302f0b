"""Batch-means error bars for correlated Monte Carlo series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples

DEFAULT_BATCHES = 32
MIN_BATCHES = 16


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_samples: int

    def __str__(self) -> str:
        return f"{self.mean:.6g} +/- {self.stderr:.2g}"

    def contains(self, value: float, k: float = 4.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr


def batch_means(series: np.ndarray, batches: int = DEFAULT_BATCHES) -> np.ndarray:
    """Split ``series`` (time along axis 0) into contiguous batches and average each.

    Trailing samples that do not fill a batch are dropped.
    """
    series = np.asarray(series, dtype=float)
    T = series.shape[0]
    if T < MIN_BATCHES:
        raise InsufficientSamples(f"need at least {MIN_BATCHES} samples, got {T}")
    batches = min(batches, T)
    size = T // batches
    trimmed = series[: size * batches]
    return trimmed.reshape((batches, size) + series.shape[1:]).mean(axis=1)


def estimate_from_batches(means: np.ndarray, n_samples: int) -> Estimate:
    means = np.asarray(means, dtype=float)
    B = means.shape[0]
    if B < MIN_BATCHES:
        raise InsufficientSamples(f"need at least {MIN_BATCHES} batches, got {B}")
    mu = float(means.mean())
    se = float(means.std(ddof=1) / np.sqrt(B))
    return Estimate(mu, se, int(n_samples))


def estimate(series: np.ndarray, batches: int = DEFAULT_BATCHES) -> Estimate:
    """Batch-means estimate of the mean of a scalar series."""
    series = np.asarray(series, dtype=float)
    return estimate_from_batches(batch_means(series, batches), series.shape[0])


def pooled(batch_sets: list[np.ndarray], n_samples: int) -> Estimate:
    """Merge replicas by pooling their batch means."""
    return estimate_from_batches(np.concatenate(batch_sets), n_samples)


def effective_sample_size(series: np.ndarray, batches: int = DEFAULT_BATCHES) -> float:
    """Crude ESS: sample variance over squared batch-means standard error."""
    series = np.asarray(series, dtype=float)
    est = estimate(series, batches)
    var = series.var(ddof=1)
    if est.stderr == 0.0:
        return float(series.shape[0])
    return float(var / est.stderr**2)
