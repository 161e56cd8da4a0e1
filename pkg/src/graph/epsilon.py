from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.combinatorics.partitions import QMatrix, Tensor, Word, polynomial_word_moment, qgaussian_moment
from src.config.defaults import DEFAULT_CAPS
from src.syk.model import SykFamily, SykModelSpec
from src.util.errors import CapExceededError, ConfigError

logger = logging.getLogger(__name__)

CENTERED_TOLERANCE = 1e-10
MAX_REPORTED_FAILURES = 20


# ----------------------------
# Graphs
# ----------------------------


@dataclass(frozen=True)
class Graph:
    """Symmetric 0/1 adjacency on vertices 1..d; eps_ij = 1 marks commuting (classically independent) pairs."""

    d: int
    adjacency: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        adjacency = tuple(tuple(int(x) for x in row) for row in self.adjacency)
        if self.d < 1 or len(adjacency) != self.d or any(len(row) != self.d for row in adjacency):
            raise ConfigError(f"Adjacency must be a {self.d}x{self.d} matrix")
        for i in range(self.d):
            if adjacency[i][i] != 0:
                raise ConfigError(f"Vertex {i + 1} must not be adjacent to itself")
            for j in range(self.d):
                if adjacency[i][j] not in (0, 1) or adjacency[i][j] != adjacency[j][i]:
                    raise ConfigError("Adjacency must be a symmetric 0/1 matrix")
        object.__setattr__(self, "adjacency", adjacency)

    @classmethod
    def from_edges(cls, d: int, edges: Sequence[Tuple[int, int]]) -> "Graph":
        rows = [[0] * d for _ in range(d)]
        for i, j in edges:
            if not (1 <= i <= d and 1 <= j <= d):
                raise ConfigError(f"Edge ({i}, {j}) outside vertices 1..{d}")
            rows[i - 1][j - 1] = rows[j - 1][i - 1] = 1
        return cls(d, tuple(tuple(r) for r in rows))

    @classmethod
    def complete(cls, d: int) -> "Graph":
        return cls.from_edges(d, list(combinations(range(1, d + 1), 2)))

    @classmethod
    def empty(cls, d: int) -> "Graph":
        return cls.from_edges(d, [])

    @classmethod
    def path(cls, d: int) -> "Graph":
        return cls.from_edges(d, [(k, k + 1) for k in range(1, d)])

    @property
    def vertices(self) -> Tuple[int, ...]:
        return tuple(range(1, self.d + 1))

    def eps(self, i: int, j: int) -> int:
        return self.adjacency[i - 1][j - 1]

    def edges(self) -> List[Tuple[int, int]]:
        return [(i, j) for i, j in combinations(self.vertices, 2) if self.eps(i, j)]


def all_graphs(d: int) -> Iterator[Graph]:
    """Every labelled graph on d vertices."""
    pairs = list(combinations(range(1, d + 1), 2))
    for mask in range(1 << len(pairs)):
        yield Graph.from_edges(d, [p for k, p in enumerate(pairs) if mask >> k & 1])


# ----------------------------
# Overlap-set construction
# ----------------------------


def interaction_length_for(n: int) -> int:
    """2 * floor(n^(2/3) / 4), evaluated in integers: the largest k with (4k)^3 <= n^2."""
    k = 0
    while (4 * (k + 1)) ** 3 <= n * n:
        k += 1
    return 2 * k


def block(i: int, j: int, d: int, m: int) -> range:
    """B_ij = {(i-1)dm + (j-1)m + k : k = 1..m}."""
    start = (i - 1) * d * m + (j - 1) * m
    return range(start + 1, start + m + 1)


def build_overlap_sets(g: Graph, m: int, *, coupling_law: str = "gaussian") -> SykFamily:
    """
    Domains of size n = d^2 m whose pairwise overlaps are 2m for eps_ij = 0 and
    empty for eps_ij = 1, padded with private indices from {kn+1, ..., (k+1)n}.
    All interaction lengths are even, so the limit has q_ij = 1 - [eps_ij = 0] off
    the diagonal and q_kk = 0.
    """
    if m < 1:
        raise ConfigError(f"Block size m must be >= 1, got {m}")
    d = g.d
    n = d * d * m
    r = interaction_length_for(n)
    specs = []
    for k in g.vertices:
        shared: set[int] = set()
        for j in g.vertices:
            if g.eps(k, j) == 0:
                shared.update(block(k, j, d, m))
                shared.update(block(j, k, d, m))
        padding = range(k * n + 1, k * n + 1 + (n - len(shared)))
        specs.append(SykModelSpec(k, tuple(sorted(shared)) + tuple(padding), r, coupling_law))
    lambdas = {(i, j): (0.0 if g.eps(i, j) else float("inf")) for i in g.vertices for j in g.vertices}
    logger.debug("Overlap sets | d=%d m=%d n=%d r=%d", d, m, n, r)
    return SykFamily(tuple(specs), asymptotic_lambdas=lambdas, declared_parities={k: 0 for k in g.vertices})


# ----------------------------
# Admissible words
# ----------------------------


def _check_length(max_len: int) -> None:
    if max_len > DEFAULT_CAPS.max_epsilon_word:
        raise CapExceededError("epsilon word length", max_len, DEFAULT_CAPS.max_epsilon_word)


def _extends_admissibly(g: Graph, prefix: Tensor, letter: int) -> bool:
    """The new letter needs a non-commuting separator after its previous occurrence."""
    for p in range(len(prefix) - 1, -1, -1):
        if prefix[p] == letter:
            return False
        if g.eps(prefix[p], letter) == 0:
            return True
    return True


def admissible_words(g: Graph, max_len: int) -> Iterator[Word]:
    """Words over the vertices, length 1..max_len, where repeated letters are separated by a non-adjacent letter."""
    _check_length(max_len)

    def extend(prefix: Tensor) -> Iterator[Tensor]:
        if prefix:
            yield prefix
        if len(prefix) == max_len:
            return
        for letter in g.vertices:
            if _extends_admissibly(g, prefix, letter):
                yield from extend((*prefix, letter))

    for letters in extend(()):
        yield Word(letters)


def is_admissible(g: Graph, word: Word) -> bool:
    letters = word.letters
    return all(_extends_admissibly(g, letters[:k], letters[k]) for k in range(len(letters)))


# ----------------------------
# Formula-level verification
# ----------------------------


def epsilon_q_matrix(g: Graph, q_diag: Sequence[float]) -> QMatrix:
    if len(q_diag) != g.d:
        raise ConfigError(f"Expected {g.d} diagonal values, got {len(q_diag)}")
    entries = np.array(g.adjacency, dtype=float)
    np.fill_diagonal(entries, q_diag)
    return QMatrix(g.vertices, entries)


def centered_basis(q_kk: float) -> List[Tuple[str, Tuple[float, ...]]]:
    """x, x^2 - 1 and x^3 - (2 + q_kk) x, each with zero vacuum expectation."""
    return [
        ("x", (0.0, 1.0)),
        ("x^2-1", (-1.0, 0.0, 1.0)),
        ("x^3-(2+q)x", (0.0, -(2.0 + q_kk), 0.0, 1.0)),
    ]


@dataclass
class EpsilonReport:
    passed: bool
    commutation_checks: int
    centered_checks: int
    failure_count: int = 0
    failures: List[Dict[str, Any]] = field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "commutation_checks": self.commutation_checks,
            "centered_checks": self.centered_checks,
            "failures": self.failure_count,
        }


def check_epsilon_freeness(
    g: Graph,
    q_diag: Sequence[float],
    max_len: int,
    *,
    q_matrix: Optional[QMatrix] = None,
) -> EpsilonReport:
    """
    (i) moments are unchanged by swapping adjacent letters i, j with eps_ij = 1;
    (ii) products of centered one-letter polynomials along admissible patterns,
    of total degree at most max_len, have zero moment.
    ``q_matrix`` replaces the graph's matrix, e.g. to test a corrupted one.
    """
    _check_length(max_len)
    Q = q_matrix if q_matrix is not None else epsilon_q_matrix(g, q_diag)
    cache: Dict[Tensor, float] = {}
    failures: List[Dict[str, Any]] = []
    failure_count = 0

    def moment(letters: Tensor) -> float:
        if letters not in cache:
            cache[letters] = qgaussian_moment(Word(letters), Q)
        return cache[letters]

    def record(entry: Dict[str, Any]) -> None:
        nonlocal failure_count
        failure_count += 1
        if len(failures) < MAX_REPORTED_FAILURES:
            failures.append(entry)

    commutation_checks = 0
    for length in range(2, max_len + 1):
        for letters in product(g.vertices, repeat=length):
            for k in range(length - 1):
                a, b = letters[k], letters[k + 1]
                if a == b or not g.eps(a, b):
                    continue
                swapped = letters[:k] + (b, a) + letters[k + 2:]
                commutation_checks += 1
                before, after = moment(letters), moment(swapped)
                if abs(before - after) > CENTERED_TOLERANCE:
                    record({"kind": "commutation", "word": list(letters), "swapped": list(swapped), "values": [before, after]})

    centered_checks = 0
    bases = {k: centered_basis(Q.q(k, k)) for k in g.vertices}
    for pattern in admissible_words(g, max_len):
        letters = pattern.letters
        for choice in product(range(3), repeat=len(letters)):
            if sum(c + 1 for c in choice) > max_len:
                continue
            factors = [(letter, bases[letter][c][1]) for letter, c in zip(letters, choice)]
            value = polynomial_word_moment(factors, Q, cache=cache)
            centered_checks += 1
            if abs(value) > CENTERED_TOLERANCE:
                record({
                    "kind": "centered",
                    "pattern": list(letters),
                    "polynomials": [bases[letter][c][0] for letter, c in zip(letters, choice)],
                    "value": value,
                })

    report = EpsilonReport(failure_count == 0, commutation_checks, centered_checks, failure_count, failures)
    logger.info(
        "Epsilon check | d=%d max_len=%d passed=%s commutation=%d centered=%d failures=%d",
        g.d,
        max_len,
        report.passed,
        commutation_checks,
        centered_checks,
        failure_count,
    )
    return report
