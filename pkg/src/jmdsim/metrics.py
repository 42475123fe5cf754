"""BER, MER, rate fraction and QPSK slicing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionError

SQRT_HALF = np.sqrt(0.5)


def hard_slice(S_soft) -> np.ndarray:
    """Nearest QPSK point per entry, with ``sign(0) = +1``."""
    S_soft = np.asarray(S_soft)
    re = np.where(S_soft.real >= 0, SQRT_HALF, -SQRT_HALF)
    im = np.where(S_soft.imag >= 0, SQRT_HALF, -SQRT_HALF)
    return re + 1j * im


def ber(S_hard: np.ndarray, S_true: np.ndarray) -> tuple[int, int]:
    """Bit errors and bit count for Gray-mapped QPSK (bit0 = sign Re, bit1 = sign Im)."""
    if S_hard.shape != S_true.shape:
        raise DimensionError(f"shape mismatch {S_hard.shape} vs {S_true.shape}")
    errors = (np.count_nonzero((S_hard.real >= 0) != (S_true.real >= 0))
              + np.count_nonzero((S_hard.imag >= 0) != (S_true.imag >= 0)))
    return int(errors), 2 * S_true.size


@dataclass
class TrialMetrics:
    bit_errors: int = 0
    bits_total: int = 0
    mer_num: float = 0.0
    mer_den: float = 0.0
    principal_angle_max: float | None = None
    detector_seconds: float = 0.0


@dataclass
class MerAccumulator:
    """Running sums for ``E||S_hat - S||_F / E||S||_F`` (ratio of means)."""

    num: float = 0.0
    den: float = 0.0
    count: int = 0

    def value(self) -> float:
        if self.den == 0:
            return math.nan
        return self.num / self.den


def mer(S_soft: np.ndarray, S_true: np.ndarray,
        acc: MerAccumulator | None = None) -> MerAccumulator:
    if acc is None:
        acc = MerAccumulator()
    if S_soft.shape != S_true.shape:
        raise DimensionError(f"shape mismatch {S_soft.shape} vs {S_true.shape}")
    acc.num += float(np.linalg.norm(S_soft - S_true))
    acc.den += float(np.linalg.norm(S_true))
    acc.count += 1
    return acc


def rate_fraction(K: int, U: int, L: int) -> Fraction:
    """Fraction ``(K-U-L)/(K-U)`` of the coherence interval left for data."""
    if K - U - L <= 0:
        raise ValueError(f"no data slots: K={K}, U={U}, L={L}")
    return Fraction(K - U - L, K - U)
