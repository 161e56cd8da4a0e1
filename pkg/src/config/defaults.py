from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Any, Optional

TOOL_NAME = "qgauss-syk"
TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class CapDefaults:
    """Resource caps shared by the library and the CLI."""

    max_qubits: int = 14
    max_subsets: int = 10**6
    max_exact_terms: int = 10**7
    max_pair_partition_size: int = 24
    fock_depth: int = 8
    max_polynomial_degree: int = 8
    max_epsilon_word: int = 8
    max_falling_factorial_order: int = 8
    max_symbolic_terms: int = 5_000_000
    max_brute_force_pairs: int = 2_000_000


@dataclass(frozen=True)
class SamplingDefaults:
    """Default Monte Carlo settings."""

    seed: int = 0
    threads: int = 1
    chunk_size: int = 1000
    samples: int = 2000


@dataclass(frozen=True)
class OutputDefaults:
    format: str = "csv"
    out: Optional[str] = None
    log_format: str = "text"


@dataclass(frozen=True)
class RuntimeLimits:
    caps: CapDefaults
    sampling: SamplingDefaults


DEFAULT_CAPS = CapDefaults()
DEFAULT_SAMPLING = SamplingDefaults()


def make_runtime_limits(**overrides: Any) -> RuntimeLimits:
    """
    Merge keyword overrides into the default caps and sampling settings.
    Each key must name a field of CapDefaults or SamplingDefaults.
    """
    cap_names = {f.name for f in fields(CapDefaults)}
    sampling_names = {f.name for f in fields(SamplingDefaults)}
    cap_updates = {k: v for k, v in overrides.items() if k in cap_names}
    sampling_updates = {k: v for k, v in overrides.items() if k in sampling_names}
    unknown = set(overrides) - cap_names - sampling_names
    if unknown:
        available = ", ".join(sorted(cap_names | sampling_names))
        raise ValueError(f"Unknown runtime limit(s) {sorted(unknown)}. Available: {available}")
    for name, value in {**cap_updates, **sampling_updates}.items():
        if value is None or value < (0 if name == "seed" else 1):
            raise ValueError(f"Runtime limit '{name}' must be positive, got {value}")
    return RuntimeLimits(
        caps=replace(DEFAULT_CAPS, **cap_updates),
        sampling=replace(DEFAULT_SAMPLING, **sampling_updates),
    )
