"""Estimation and detection quality metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricRecord:
    """One aggregated campaign cell: a method at one SNR (and block, if any)."""

    method: str
    snr_db: float
    block: int | None
    nmse: float | None
    ser: float | None
    trials: int
    seed: int

    def __post_init__(self):
        if self.nmse is None and self.ser is None:
            raise ValueError("a metric record needs at least one of nmse/ser")


def nmse(reference: np.ndarray, estimate: np.ndarray) -> float:
    """Normalized mean square error ||ref - est||^2 / ||ref||^2."""
    reference = np.asarray(reference)
    estimate = np.asarray(estimate)
    if reference.shape != estimate.shape:
        raise ValueError(f"shapes differ: {reference.shape} vs {estimate.shape}")
    denom = float(np.sum(np.abs(reference) ** 2))
    if denom == 0.0:
        raise ValueError("reference is identically zero; NMSE undefined")
    return float(np.sum(np.abs(reference - estimate) ** 2)) / denom


def ser(truth: np.ndarray, detected: np.ndarray) -> float:
    """Symbol error rate by exact comparison of constellation points."""
    truth = np.asarray(truth)
    detected = np.asarray(detected)
    if truth.shape != detected.shape:
        raise ValueError(f"shapes differ: {truth.shape} vs {detected.shape}")
    if truth.size == 0:
        raise ValueError("empty symbol arrays; SER undefined")
    return float(np.count_nonzero(truth != detected)) / truth.size


def empirical_snr(noiseless: np.ndarray, sigma2: float) -> float:
    """Realized SNR in dB: per-entry signal energy over noise variance."""
    if sigma2 <= 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    power = float(np.mean(np.abs(np.asarray(noiseless)) ** 2))
    if power == 0.0:
        raise ValueError("noiseless signal is identically zero")
    return 10.0 * np.log10(power / sigma2)
