"""Smoothing-weight and learning-rate schedules as pure functions of the epoch."""

from __future__ import annotations

import math
from dataclasses import dataclass

# The cosine schedule never returns less than base_lr * LR_FLOOR_FRACTION
# so the final epoch still takes a step.
LR_FLOOR_FRACTION = 1e-4


@dataclass(frozen=True)
class AlphaSchedule:
    """Smoothing weight over time: constant, or alpha0 + alpha1 * t / T."""

    kind: str
    alpha0: float
    alpha1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "linear"):
            raise ValueError(f"unknown alpha schedule kind {self.kind!r}")
        if not (math.isfinite(self.alpha0) and math.isfinite(self.alpha1)):
            raise ValueError("alpha schedule coefficients must be finite")


@dataclass(frozen=True)
class LrSchedule:
    """Learning rate over time: constant, cosine decay, or stepwise decay."""

    kind: str
    base_lr: float
    step_size: int = 30
    gamma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("constant", "cosine", "step"):
            raise ValueError(f"unknown lr schedule kind {self.kind!r}")
        if self.base_lr <= 0.0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if self.kind == "step":
            if self.step_size < 1:
                raise ValueError(f"step_size must be >= 1, got {self.step_size}")
            if not 0.0 < self.gamma <= 1.0:
                raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


def _check_time(t: int, total: int) -> None:
    if total < 1:
        raise ValueError(f"total epochs must be >= 1, got {total}")
    if not 0 <= t <= total:
        raise ValueError(f"epoch {t} out of range [0, {total}]")


def alpha_at(s: AlphaSchedule, t: int, total: int) -> float:
    """Smoothing weight at epoch t of total, clamped to [0, 1]."""
    _check_time(t, total)
    if s.kind == "constant":
        value = s.alpha0
    else:
        value = s.alpha0 + s.alpha1 * t / total
    return min(1.0, max(0.0, value))


def lr_at(s: LrSchedule, t: int, total: int) -> float:
    """Learning rate at epoch t of total; always strictly positive."""
    _check_time(t, total)
    if s.kind == "constant":
        return s.base_lr
    if s.kind == "cosine":
        value = s.base_lr * 0.5 * (1.0 + math.cos(math.pi * t / total))
        return max(value, s.base_lr * LR_FLOOR_FRACTION)
    return s.base_lr * s.gamma ** (t // s.step_size)
