from __future__ import annotations

import hashlib
import json
import math
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.combinatorics.partitions import QMatrix
from src.config.defaults import DEFAULT_CAPS, DEFAULT_SAMPLING, CapDefaults, OutputDefaults, RuntimeLimits, make_runtime_limits
from src.graph.epsilon import Graph, build_overlap_sets
from src.graph.overlap_design import build_weighted_overlap_sets, check_sign_realizability, overlaps_for_q
from src.stats.overlap import OverlapConfig, half_interaction_config, single_edge_config
from src.syk.model import SykFamily, SykModelSpec
from src.util.errors import ConfigError

LabelValue = Union[int, str]
Command = Literal["moments", "converge", "epsilon-check", "stats"]
MomentMethod = Literal["dense-mc", "reduced-mc", "exact-small", "limit", "finite-n"]
SECTION_FOR_COMMAND = {
    "moments": "moments",
    "converge": "converge",
    "epsilon-check": "epsilon_check",
    "stats": "stats",
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ----------------------------
# Families
# ----------------------------


class ModelDefinition(_Section):
    """One model: its label, index set (explicit list or inclusive interval) and interaction length."""

    label: LabelValue
    domain: Optional[List[int]] = None
    interval: Optional[Tuple[int, int]] = None
    r: int = Field(ge=0)
    coupling_law: str = "gaussian"

    @model_validator(mode="after")
    def _check_domain(self) -> "ModelDefinition":
        if (self.domain is None) == (self.interval is None):
            raise ValueError(f"Model {self.label!r}: give exactly one of 'domain' or 'interval'")
        n = len(self.indices())
        if self.r > n:
            raise ValueError(f"Model {self.label!r}: interaction length r={self.r} exceeds domain size n={n}")
        return self

    def indices(self) -> Tuple[int, ...]:
        if self.interval is not None:
            first, last = self.interval
            return tuple(range(first, last + 1))
        return tuple(self.domain or ())

    def to_spec(self) -> SykModelSpec:
        return SykModelSpec(self.label, self.indices(), self.r, self.coupling_law)


class GraphDefinition(_Section):
    d: int = Field(ge=1)
    edges: List[Tuple[int, int]] = Field(default_factory=list)

    def build(self) -> Graph:
        return Graph.from_edges(self.d, [tuple(e) for e in self.edges])


class LambdaEntry(_Section):
    pair: Tuple[LabelValue, LabelValue]
    value: float = Field(ge=0)


class ParityEntry(_Section):
    label: LabelValue
    parity: int = Field(ge=0, le=1)


class QEntry(_Section):
    pair: Tuple[LabelValue, LabelValue]
    value: float = Field(ge=-1, le=1)


FamilyKind = Literal["explicit", "graph", "shared", "disjoint", "single_edge", "half_interaction", "q_matrix"]


class FamilyDefinition(_Section):
    """
    A family, either explicit or a template evaluated at a size n:
    - explicit: the listed models
    - graph: overlap sets of a graph, n = d^2 m
    - shared: every label on {1..n} with fixed r
    - disjoint: label k on {(k-1)n+1..kn} with fixed r
    - single_edge: two labels on {1..n} and a shifted copy, r = round(n^r_exponent),
      overlap chosen so that r^2 a / n^2 is close to lambda_target
    - half_interaction: {1..n} and {n..2n-1} with r = n/2
    - q_matrix: domains of size n realising the off-diagonal target q, r close to
      n^r_exponent with the parities the signs of q require
    """

    kind: FamilyKind = "explicit"
    models: List[ModelDefinition] = Field(default_factory=list)
    asymptotic_lambdas: List[LambdaEntry] = Field(default_factory=list)
    declared_parities: List[ParityEntry] = Field(default_factory=list)
    graph: Optional[GraphDefinition] = None
    q: List[QEntry] = Field(default_factory=list)
    labels: List[LabelValue] = Field(default_factory=lambda: ["i", "j"])
    r: List[int] = Field(default_factory=list)
    lambda_target: float = Field(default=1.0, ge=0)
    r_exponent: float = Field(default=0.6, gt=0, le=1)
    r_parity: int = Field(default=0, ge=0, le=1)
    coupling_law: str = "gaussian"

    @model_validator(mode="after")
    def _check_kind(self) -> "FamilyDefinition":
        if self.kind == "explicit" and not self.models:
            raise ValueError("An explicit family needs at least one model")
        if self.kind == "graph" and self.graph is None:
            raise ValueError("A graph family needs a 'graph' section")
        if self.kind in ("shared", "disjoint") and len(self.r) != len(self.labels):
            raise ValueError(f"Expected one interaction length per label {self.labels}, got {self.r}")
        if self.kind in ("single_edge", "half_interaction") and len(self.labels) != 2:
            raise ValueError(f"A {self.kind} family has exactly two labels, got {self.labels}")
        if self.kind == "q_matrix":
            if not self.q:
                raise ValueError("A q_matrix family needs at least one 'q' entry")
            if any(e.pair[0] == e.pair[1] for e in self.q):
                raise ValueError("q_matrix entries must pair two different labels")
        return self

    @property
    def is_template(self) -> bool:
        return self.kind != "explicit"

    def build(self, n: Optional[int] = None) -> SykFamily:
        if self.kind == "explicit":
            return SykFamily(
                tuple(m.to_spec() for m in self.models),
                asymptotic_lambdas={tuple(e.pair): e.value for e in self.asymptotic_lambdas},
                declared_parities={e.label: e.parity for e in self.declared_parities},
            )
        if n is None or n < 1:
            raise ConfigError(f"Family kind '{self.kind}' needs a positive size n")
        builder = getattr(self, f"_build_{self.kind}")
        return builder(n)

    def _build_graph(self, n: int) -> SykFamily:
        g = self.graph.build()
        if n % (g.d * g.d):
            raise ConfigError(f"Graph family size n={n} is not a multiple of d^2={g.d * g.d}")
        return build_overlap_sets(g, n // (g.d * g.d), coupling_law=self.coupling_law)

    def _fixed_r_family(self, domains: List[Tuple[int, ...]], n: int) -> SykFamily:
        specs = tuple(
            SykModelSpec(label, domain, r, self.coupling_law) for label, domain, r in zip(self.labels, domains, self.r)
        )
        # r_i r_j |A_i n A_j| / n^2 <= r_i r_j / n vanishes for fixed r
        lambdas = {(i, j): 0.0 for i in self.labels for j in self.labels}
        return SykFamily(specs, lambdas, {label: r % 2 for label, r in zip(self.labels, self.r)})

    def _build_shared(self, n: int) -> SykFamily:
        return self._fixed_r_family([tuple(range(1, n + 1))] * len(self.labels), n)

    def _build_disjoint(self, n: int) -> SykFamily:
        return self._fixed_r_family([tuple(range(k * n + 1, (k + 1) * n + 1)) for k in range(len(self.labels))], n)

    def _diagonal_lambda(self) -> float:
        # r^2 / n grows, stays at 1 or vanishes with the sign of 2 r_exponent - 1
        growth = 2 * self.r_exponent - 1
        return math.inf if growth > 0 else (1.0 if growth == 0 else 0.0)

    def _build_single_edge(self, n: int) -> SykFamily:
        r = max(1, round(n**self.r_exponent))
        if r % 2 != self.r_parity:
            r += 1
        if r > n:
            raise ConfigError(f"Single-edge family: r={r} exceeds n={n}")
        a = round(self.lambda_target * n * n / (r * r))
        if a > n:
            raise ConfigError(
                f"Single-edge family: lambda_target={self.lambda_target} needs overlap {a} > n={n}; raise r_exponent"
            )
        cfg = single_edge_config(n, n, a, r, r)
        first, second = self.labels
        diagonal = self._diagonal_lambda()
        lambdas = {(first, second): self.lambda_target, (first, first): diagonal, (second, second): diagonal}
        specs = tuple(SykModelSpec(label, domain, r, self.coupling_law) for label, domain in zip(self.labels, cfg.domains))
        return SykFamily(specs, lambdas, {first: self.r_parity, second: self.r_parity})

    def _build_half_interaction(self, n: int) -> SykFamily:
        cfg = half_interaction_config(n)
        first, second = self.labels
        lambdas = {(first, second): 0.25, (first, first): math.inf, (second, second): math.inf}
        specs = tuple(
            SykModelSpec(label, domain, r, self.coupling_law) for label, domain, r in zip(self.labels, cfg.domains, cfg.sizes)
        )
        return SykFamily(specs, lambdas)

    def target_q(self) -> QMatrix:
        """Off-diagonal target; unlisted pairs are 0 and the diagonal is ignored."""
        return QMatrix.from_pairs(self.labels, {tuple(e.pair): e.value for e in self.q})

    def _build_q_matrix(self, n: int) -> SykFamily:
        target = self.target_q()
        parities = check_sign_realizability(target)
        base = max(1, round(n**self.r_exponent))
        r = [base + (base % 2 != parities[label]) for label in self.labels]
        if max(r) > n:
            raise ConfigError(f"q_matrix family: r={max(r)} exceeds n={n}")
        overlaps = overlaps_for_q(target, n, r)
        realised = build_weighted_overlap_sets(overlaps, n, r, labels=self.labels, coupling_law=self.coupling_law)
        lambdas: Dict[Tuple[LabelValue, LabelValue], float] = {}
        for x, i in enumerate(self.labels):
            lambdas[(i, i)] = self._diagonal_lambda()
            for j in self.labels[x + 1:]:
                q = abs(target.q(i, j))
                lambdas[(i, j)] = math.inf if q == 0.0 else -math.log(q) / 2
        return SykFamily(realised.specs, lambdas, parities)


# ----------------------------
# Command sections
# ----------------------------


class MomentsSection(_Section):
    family: FamilyDefinition
    n: Optional[int] = Field(default=None, ge=1)
    words: List[List[LabelValue]] = Field(min_length=1)
    methods: List[MomentMethod] = Field(default_factory=lambda: ["limit"], min_length=1)
    samples: int = Field(default=DEFAULT_SAMPLING.samples, ge=1)
    asymptotic_limit: bool = False


class ConvergeSection(_Section):
    family: FamilyDefinition
    n_values: List[int] = Field(min_length=1)
    words: List[List[LabelValue]] = Field(min_length=1)
    estimator: Literal["finite-n", "dense-mc", "reduced-mc", "exact-small"] = "finite-n"
    samples: int = Field(default=DEFAULT_SAMPLING.samples, ge=1)

    @model_validator(mode="after")
    def _check_template(self) -> "ConvergeSection":
        if not self.family.is_template:
            raise ValueError("converge needs a family template (kind other than 'explicit')")
        if any(n < 1 for n in self.n_values):
            raise ValueError(f"n_values must be positive, got {self.n_values}")
        return self


class EpsilonSection(_Section):
    graph: Optional[GraphDefinition] = None
    all_graphs_up_to: Optional[int] = Field(default=None, ge=1, le=5)
    q_diag: Optional[List[float]] = None
    max_len: int = Field(default=6, ge=1, le=DEFAULT_CAPS.max_epsilon_word)
    mutation_control: bool = True

    @model_validator(mode="after")
    def _check_target(self) -> "EpsilonSection":
        if (self.graph is None) == (self.all_graphs_up_to is None):
            raise ValueError("Give exactly one of 'graph' or 'all_graphs_up_to'")
        if self.q_diag is not None:
            if self.graph is None or len(self.q_diag) != self.graph.d:
                raise ValueError("q_diag needs a single graph and one value per vertex")
            if any(not -1.0 <= q <= 1.0 for q in self.q_diag):
                raise ValueError(f"q_diag entries must lie in [-1, 1], got {self.q_diag}")
        return self


StatsQuantity = Literal["sign", "exact-sign", "falling-factorial", "series"]


class StatsSection(_Section):
    geometry: Literal["single_edge", "half_interaction", "explicit"] = "single_edge"
    n1: Optional[int] = Field(default=None, ge=1)
    n2: Optional[int] = Field(default=None, ge=1)
    a: Optional[int] = Field(default=None, ge=0)
    r1: Optional[int] = Field(default=None, ge=0)
    r2: Optional[int] = Field(default=None, ge=0)
    n: Optional[int] = Field(default=None, ge=2)
    domains: List[List[int]] = Field(default_factory=list)
    sizes: List[int] = Field(default_factory=list)
    edges: List[Tuple[int, int]] = Field(default_factory=list)
    quantities: List[StatsQuantity] = Field(default_factory=lambda: ["sign"], min_length=1)
    max_k: int = Field(default=2, ge=0, le=DEFAULT_CAPS.max_falling_factorial_order)
    samples: int = Field(default=10_000, ge=1)

    @model_validator(mode="after")
    def _check_geometry(self) -> "StatsSection":
        if self.geometry == "single_edge" and None in (self.n1, self.n2, self.a, self.r1, self.r2):
            raise ValueError("single_edge geometry needs n1, n2, a, r1 and r2")
        if self.geometry == "half_interaction" and self.n is None:
            raise ValueError("half_interaction geometry needs n")
        if self.geometry == "explicit" and not self.domains:
            raise ValueError("explicit geometry needs domains, sizes and edges")
        return self

    def build(self) -> OverlapConfig:
        if self.geometry == "single_edge":
            return single_edge_config(self.n1, self.n2, self.a, self.r1, self.r2)
        if self.geometry == "half_interaction":
            return half_interaction_config(self.n)
        return OverlapConfig(tuple(tuple(d) for d in self.domains), tuple(self.sizes), tuple(tuple(e) for e in self.edges))


# ----------------------------
# Experiment document
# ----------------------------


class ExperimentConfig(_Section):
    seed: int = Field(default=DEFAULT_SAMPLING.seed, ge=0, lt=2**64)
    threads: int = Field(default=DEFAULT_SAMPLING.threads, ge=1)
    chunk_size: int = Field(default=DEFAULT_SAMPLING.chunk_size, ge=1)
    out: Optional[str] = OutputDefaults.out
    format: Literal["csv", "json"] = OutputDefaults.format
    record_timing: bool = False
    caps: Dict[str, int] = Field(default_factory=dict)
    moments: Optional[MomentsSection] = None
    converge: Optional[ConvergeSection] = None
    epsilon_check: Optional[EpsilonSection] = None
    stats: Optional[StatsSection] = None

    @model_validator(mode="after")
    def _check_caps(self) -> "ExperimentConfig":
        known = {f.name for f in fields(CapDefaults)}
        unknown = sorted(set(self.caps) - known)
        if unknown:
            raise ValueError(f"Unknown cap(s) {unknown}. Available: {', '.join(sorted(known))}")
        self.runtime_limits()
        return self

    def runtime_limits(self) -> RuntimeLimits:
        """Default caps with this document's 'caps' overrides, plus its sampling settings."""
        return make_runtime_limits(**self.caps, seed=self.seed, threads=self.threads, chunk_size=self.chunk_size)

    def section(self, command: Command) -> BaseModel:
        name = SECTION_FOR_COMMAND[command]
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"Config has no '{name}' section for command '{command}'")
        return value

    def canonical_json(self) -> str:
        """Sorted keys, compact separators; the hashed form of the resolved config."""
        return json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"), default=str)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _validation_message(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(x) for x in item.get("loc", ()))
        parts.append(f"{location}: {item.get('msg')}" if location else str(item.get("msg")))
    return "; ".join(parts)


def parse_experiment_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Validate a config document, applying non-None overrides (CLI flags) first."""
    merged = dict(data)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(f"Invalid config: {_validation_message(exc)}") from exc


def load_experiment_config(path: str | Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    source = Path(path)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file not found: {source}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {source} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {source} must hold a JSON object")
    return parse_experiment_config(data, overrides)
