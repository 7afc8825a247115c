"""Uniform 1D axes shared by scans and phase-space grids."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        for name in ("lo", "hi", "step"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"axis {name} must be finite")
            object.__setattr__(self, name, val)
        if self.hi < self.lo:
            raise ValueError("axis max must be >= min")
        if not self.step > 0:
            raise ValueError("axis step must be positive")

    @property
    def count(self) -> int:
        return int(round((self.hi - self.lo) / self.step)) + 1

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        # generated from integer multiples so repeated runs agree bit for bit
        return self.lo + self.step * np.arange(self.count)

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """Parse ``min:max:step``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected min:max:step, got {text!r}")
        return cls(*(float(p) for p in parts))

    @classmethod
    def centered(cls, half_width: float, points: int) -> "Axis":
        if points < 2:
            raise ValueError("need at least two points")
        return cls(-half_width, half_width, 2.0 * half_width / (points - 1))

    def as_list(self) -> list:
        return [self.lo, self.hi, self.step]
