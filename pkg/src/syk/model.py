from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.algebra.dense import ModeLayout
from src.combinatorics.partitions import Label, QMatrix
from src.util.errors import ConfigError, UnknownLabelError

logger = logging.getLogger(__name__)


# ----------------------------
# Coupling laws
# ----------------------------


class CouplingLaw(ABC):
    """Mean-zero, variance-one distribution of the couplings J_R."""

    name: str = ""

    @abstractmethod
    def draw(self, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
        """Independent draws with the given shape."""

    @abstractmethod
    def moment(self, p: int) -> int:
        """E[J^p] as an exact integer."""


class GaussianLaw(CouplingLaw):
    name = "gaussian"

    def draw(self, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
        return rng.standard_normal(shape)

    def moment(self, p: int) -> int:
        if p % 2:
            return 0
        return math.prod(range(p - 1, 0, -2))


class RademacherLaw(CouplingLaw):
    name = "rademacher"

    def draw(self, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
        return (2 * rng.integers(0, 2, size=shape) - 1).astype(float)

    def moment(self, p: int) -> int:
        return 0 if p % 2 else 1


CouplingLawFactory = Callable[[], CouplingLaw]

_LAWS: Dict[str, CouplingLawFactory] = {}


def register_coupling_law(name: str, factory: CouplingLawFactory) -> None:
    """Registers a coupling law factory under the given name."""
    _LAWS[name.lower()] = factory


def get_coupling_law(name: str) -> CouplingLaw:
    normalized = name.lower()
    if normalized not in _LAWS:
        available = ", ".join(sorted(_LAWS)) or "<none>"
        raise ConfigError(f"Unknown coupling law '{name}'. Available: {available}")
    return _LAWS[normalized]()


def available_coupling_laws() -> List[str]:
    return sorted(_LAWS)


register_coupling_law("gaussian", GaussianLaw)
register_coupling_law("rademacher", RademacherLaw)


# ----------------------------
# Model specs and families
# ----------------------------


@dataclass(frozen=True)
class SykModelSpec:
    """
    One SYK model: H = i^floor(r/2) binom(n, r)^(-1/2) sum_R J_R Psi_R over the
    increasing r-subsets R of the domain.
    """

    label: Label
    domain: Tuple[int, ...]
    interaction_length: int
    coupling_law: str = "gaussian"

    def __post_init__(self) -> None:
        domain = tuple(sorted(set(self.domain)))
        if len(domain) != len(tuple(self.domain)):
            raise ConfigError(f"Domain of model {self.label!r} has repeated indices")
        if domain and domain[0] < 1:
            raise ConfigError(f"Domain of model {self.label!r} must contain positive indices only")
        if not 0 <= self.interaction_length <= len(domain):
            raise ConfigError(
                f"Interaction length r={self.interaction_length} of model {self.label!r} "
                f"must lie in 0..{len(domain)}"
            )
        get_coupling_law(self.coupling_law)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "coupling_law", self.coupling_law.lower())

    @property
    def n(self) -> int:
        return len(self.domain)

    @property
    def r(self) -> int:
        return self.interaction_length

    @property
    def parity(self) -> int:
        return self.interaction_length % 2

    @property
    def term_count(self) -> int:
        return math.comb(self.n, self.r)

    @property
    def max_index(self) -> int:
        return self.domain[-1] if self.domain else 0

    def law(self) -> CouplingLaw:
        return get_coupling_law(self.coupling_law)


@dataclass(frozen=True)
class SykFamily:
    """
    Models on overlapping domains.
    - asymptotic_lambdas: optional declared limits lambda_ij (may be inf), keyed by label pairs
    - declared_parities: optional parity of r_k along the sequence the family belongs to
    """

    specs: Tuple[SykModelSpec, ...]
    asymptotic_lambdas: Mapping[Tuple[Label, Label], float] = field(default_factory=dict)
    declared_parities: Mapping[Label, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        specs = tuple(self.specs)
        if not specs:
            raise ConfigError("A family needs at least one model")
        labels = [s.label for s in specs]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"Duplicate model labels in {labels}")
        object.__setattr__(self, "specs", specs)
        lambdas: Dict[Tuple[Label, Label], float] = {}
        for (a, b), value in dict(self.asymptotic_lambdas).items():
            for x in (a, b):
                if x not in labels:
                    raise UnknownLabelError(x, labels)
            if value < 0:
                raise ConfigError(f"Asymptotic lambda for ({a!r}, {b!r}) must be >= 0, got {value}")
            lambdas[(a, b)] = lambdas[(b, a)] = float(value)
        object.__setattr__(self, "asymptotic_lambdas", lambdas)
        for label, parity in dict(self.declared_parities).items():
            if label not in labels:
                raise UnknownLabelError(label, labels)
            if parity not in (0, 1):
                raise ConfigError(f"Declared parity for {label!r} must be 0 or 1, got {parity}")

    @property
    def labels(self) -> Tuple[Label, ...]:
        return tuple(s.label for s in self.specs)

    @property
    def parity(self) -> Dict[Label, int]:
        return {s.label: s.parity for s in self.specs}

    def spec(self, label: Label) -> SykModelSpec:
        for s in self.specs:
            if s.label == label:
                return s
        raise UnknownLabelError(label, list(self.labels))

    def require(self, labels: Iterable[Label]) -> None:
        for label in labels:
            self.spec(label)

    def overlap(self, i: Label, j: Label) -> int:
        return len(set(self.spec(i).domain) & set(self.spec(j).domain))

    def lambda_hat(self, i: Label, j: Label) -> float:
        """r_i r_j |A_i n A_j| / (|A_i| |A_j|), the finite-n proxy for lambda_ij."""
        si, sj = self.spec(i), self.spec(j)
        if si.n == 0 or sj.n == 0:
            return 0.0
        return si.r * sj.r * self.overlap(i, j) / (si.n * sj.n)

    def lambda_for(self, i: Label, j: Label, *, asymptotic: bool = False) -> float:
        if asymptotic and (i, j) in self.asymptotic_lambdas:
            return self.asymptotic_lambdas[(i, j)]
        return self.lambda_hat(i, j)

    def check_parities(self) -> None:
        """A declared sequence parity must match every model's r_k mod 2."""
        for label, parity in self.declared_parities.items():
            actual = self.spec(label).parity
            if actual != parity:
                raise ConfigError(
                    f"Model {label!r} has r={self.spec(label).r} (parity {actual}) "
                    f"but the family declares parity {parity}"
                )

    def q_entry(self, i: Label, j: Label, *, asymptotic: bool = False) -> float:
        """(-1)^(r_i r_j) exp(-2 lambda_ij), with exp(-inf) = 0."""
        lam = self.lambda_for(i, j, asymptotic=asymptotic)
        sign = -1.0 if (self.spec(i).r * self.spec(j).r) % 2 else 1.0
        return 0.0 if math.isinf(lam) else sign * math.exp(-2.0 * lam)

    def q_hat(self, i: Label, j: Label) -> float:
        return self.q_entry(i, j)

    def q_limit(self, i: Label, j: Label) -> float:
        """q_ij from the declared asymptotic lambdas, falling back to lambda_hat."""
        return self.q_entry(i, j, asymptotic=True)

    def q_matrix(self, *, asymptotic: bool = False) -> QMatrix:
        labels = self.labels
        entries = np.array([[self.q_entry(i, j, asymptotic=asymptotic) for j in labels] for i in labels])
        return QMatrix(labels, entries)

    def layout(self, labels: Optional[Sequence[Label]] = None) -> ModeLayout:
        chosen = self.labels if labels is None else labels
        return ModeLayout.from_domains(self.spec(label).domain for label in chosen)


def check_parity_consistency(families: Sequence[SykFamily]) -> None:
    """Every label must keep the same r_k parity along a sequence of families."""
    seen: Dict[Label, Tuple[int, int]] = {}
    for position, family in enumerate(families):
        for spec in family.specs:
            if spec.label in seen and seen[spec.label][0] != spec.parity:
                first = seen[spec.label][1]
                raise ConfigError(
                    f"Model {spec.label!r} changes parity of r between sweep entries {first} and {position}"
                )
            seen.setdefault(spec.label, (spec.parity, position))
