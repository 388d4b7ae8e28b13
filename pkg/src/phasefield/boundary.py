"""Exterior temperature presets ``g(x, y, t)`` on the outer container boundary."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ConstantBoundary:
    value: float = 0.0

    def __call__(self, x, y, t):
        return np.full(np.shape(x), self.value, dtype=float)


@dataclass(frozen=True)
class RampBoundary:
    """``start + rate * t``, optionally clipped from below at ``floor``.

    A cooling ramp of one degree per second is ``rate = -1`` (scaled units).
    """

    start: float = 0.0
    rate: float = -1.0
    floor: float | None = None

    def __call__(self, x, y, t):
        v = self.start + self.rate * t
        if self.floor is not None:
            v = max(v, self.floor)
        return np.full(np.shape(x), v, dtype=float)


@dataclass(frozen=True)
class TableBoundary:
    """Piecewise-linear in time, constant outside the table range."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) == 0:
            raise ValueError("boundary table needs matching, non-empty times and values")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("boundary table times must be strictly increasing")

    def __call__(self, x, y, t):
        return np.full(np.shape(x), float(np.interp(t, self.times, self.values)), dtype=float)


@dataclass(frozen=True)
class PerturbedBoundary:
    """``base(x, y, t) + amplitude * profile(x, y)``."""

    base: Callable
    profile: Callable
    amplitude: float

    def __call__(self, x, y, t):
        return np.asarray(self.base(x, y, t), float) + self.amplitude * np.asarray(self.profile(x, y), float)
