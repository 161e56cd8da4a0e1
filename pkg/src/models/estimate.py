from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Sequence

import numpy as np


class EstimateMethod(str, Enum):
    DENSE_MC = "dense-mc"
    REDUCED_MC = "reduced-mc"
    EXACT_SMALL = "exact-small"
    LIMIT_FORMULA = "limit-formula"
    FINITE_N_FORMULA = "finite-n-formula"

    @property
    def is_exact(self) -> bool:
        return self in (EstimateMethod.EXACT_SMALL, EstimateMethod.LIMIT_FORMULA)


@dataclass(frozen=True)
class MomentEstimate:
    """
    A moment value with its uncertainty.
    - stderr is 0 for exact methods
    - samples counts Monte Carlo draws (0 for formulas)
    - details carries method-specific diagnostics (partition count, residues, ...)
    """

    value: float
    stderr: float
    samples: int
    method: EstimateMethod
    details: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.stderr >= 0.0:
            raise ValueError(f"stderr must be non-negative, got {self.stderr}")
        if self.method.is_exact and self.stderr != 0.0:
            raise ValueError(f"Exact method {self.method.value} cannot carry stderr {self.stderr}")

    @classmethod
    def exact(cls, value: float, method: EstimateMethod, **details: Any) -> "MomentEstimate":
        return cls(float(value), 0.0, 0, method, dict(details))

    @classmethod
    def from_samples(cls, values: Sequence[float] | np.ndarray, method: EstimateMethod, **details: Any) -> "MomentEstimate":
        """Mean and standard error; np.sum's pairwise reduction keeps the result order-stable."""
        arr = np.asarray(values, dtype=float)
        n = arr.size
        if n == 0:
            raise ValueError("Cannot form an estimate from zero samples")
        mean = float(np.sum(arr) / n)
        if n > 1:
            variance = float(np.sum((arr - mean) ** 2) / (n - 1))
            stderr = math.sqrt(variance / n)
        else:
            stderr = 0.0
        return cls(mean, stderr, n, method, dict(details))

    def within(self, target: float, sigmas: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr + slack

    def as_row(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "value": self.value,
            "stderr": self.stderr,
            "samples": self.samples,
        }
