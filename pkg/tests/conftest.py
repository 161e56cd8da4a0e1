from __future__ import annotations

from typing import Callable

import numpy as np
import pytest

from src.models.estimate import MomentEstimate


def within_stderr_twice(estimate: Callable[[int], MomentEstimate], target: float, *, sigmas: float = 3.0, slack: float = 0.0) -> bool:
    """
    A statistical check that may be rerun once with a fresh seed: passes when the
    first or the second estimate lies within ``sigmas`` standard errors of target.
    """
    for seed in (20240611, 777):
        if estimate(seed).within(target, sigmas=sigmas, slack=slack):
            return True
    return False


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def stderr_check() -> Callable[..., bool]:
    return within_stderr_twice
