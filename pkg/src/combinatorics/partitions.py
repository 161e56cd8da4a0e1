from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, product
from math import prod
from typing import Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.config.defaults import DEFAULT_CAPS
from src.util.errors import CapExceededError, KernelViolationError, UnknownLabelError

logger = logging.getLogger(__name__)

Label = Hashable
Pair = Tuple[int, int]
Tensor = Tuple[Label, ...]


def double_factorial(k: int) -> int:
    """k!! with (-1)!! = 0!! = 1."""
    return prod(range(k, 0, -2)) if k > 0 else 1


# ----------------------------
# Domain types
# ----------------------------


@dataclass(frozen=True)
class Word:
    """A finite word epsilon: [d] -> labels; position k (1-based) carries letters[k-1]."""

    letters: Tuple[Label, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "letters", tuple(self.letters))
        if not self.letters:
            raise ValueError("A word needs at least one letter")

    @classmethod
    def of(cls, *letters: Label) -> "Word":
        return cls(tuple(letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Label]:
        return iter(self.letters)

    def __getitem__(self, position: int) -> Label:
        """1-based access, matching pair-partition positions."""
        return self.letters[position - 1]

    def labels(self) -> set:
        return set(self.letters)

    def kernel(self) -> List[Tuple[int, ...]]:
        """Blocks of positions carrying equal letters, in order of first appearance."""
        blocks: Dict[Label, List[int]] = {}
        for pos, letter in enumerate(self.letters, start=1):
            blocks.setdefault(letter, []).append(pos)
        return [tuple(b) for b in blocks.values()]

    def __str__(self) -> str:
        return ",".join(str(x) for x in self.letters)


@dataclass(frozen=True)
class PairPartition:
    """Perfect matching of [2d]; pairs are (e, z) with e < z, sorted by e."""

    pairs: Tuple[Pair, ...]

    def __post_init__(self) -> None:
        pairs = tuple(sorted((min(e, z), max(e, z)) for e, z in self.pairs))
        points = sorted(x for pair in pairs for x in pair)
        if points != list(range(1, 2 * len(pairs) + 1)):
            raise ValueError(f"{pairs} is not a pair partition of [{2 * len(pairs)}]")
        object.__setattr__(self, "pairs", pairs)

    @property
    def size(self) -> int:
        return 2 * len(self.pairs)

    @staticmethod
    def cross(first: Pair, second: Pair) -> bool:
        (e1, z1), (e2, z2) = sorted((first, second))
        return e1 < e2 < z1 < z2

    def crossing_pairs(self) -> Iterator[Tuple[Pair, Pair]]:
        """Crossing blocks (v1, v2) with v1 opening first."""
        for v1, v2 in combinations(self.pairs, 2):
            if v1[0] < v2[0] < v1[1] < v2[1]:
                yield v1, v2

    def crossing_number(self) -> int:
        return sum(1 for _ in self.crossing_pairs())

    def is_noncrossing(self) -> bool:
        return next(self.crossing_pairs(), None) is None

    def is_below(self, w: Word) -> bool:
        if len(w) != self.size:
            return False
        return all(w[e] == w[z] for e, z in self.pairs)


@dataclass
class QMatrix:
    """Symmetric matrix (q_ij) with |q_ij| <= 1, indexed by model labels."""

    labels: Tuple[Label, ...]
    entries: np.ndarray
    _index: Dict[Label, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.labels = tuple(self.labels)
        self.entries = np.array(self.entries, dtype=float)
        k = len(self.labels)
        if len(set(self.labels)) != k:
            raise ValueError(f"Duplicate labels in {self.labels}")
        if self.entries.shape != (k, k):
            raise ValueError(f"QMatrix entries must be {k}x{k}, got {self.entries.shape}")
        if not np.array_equal(self.entries, self.entries.T):
            raise ValueError("QMatrix entries must be symmetric")
        if np.any(np.abs(self.entries) > 1.0) or np.any(np.isnan(self.entries)):
            raise ValueError("QMatrix entries must lie in [-1, 1]")
        self._index = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def from_pairs(
        cls,
        labels: Sequence[Label],
        values: Mapping[Tuple[Label, Label], float],
        default: float = 0.0,
    ) -> "QMatrix":
        """Build from {(i, j): q}; the symmetric entry is filled in, missing pairs take ``default``."""
        labels = tuple(labels)
        index = {label: i for i, label in enumerate(labels)}
        entries = np.full((len(labels), len(labels)), float(default))
        for (a, b), value in values.items():
            for x in (a, b):
                if x not in index:
                    raise UnknownLabelError(x, list(labels))
            entries[index[a], index[b]] = entries[index[b], index[a]] = value
        return cls(labels, entries)

    @classmethod
    def constant(cls, labels: Sequence[Label], q: float) -> "QMatrix":
        labels = tuple(labels)
        return cls(labels, np.full((len(labels), len(labels)), float(q)))

    def index(self, label: Label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabelError(label, list(self.labels)) from None

    def q(self, i: Label, j: Label) -> float:
        return float(self.entries[self.index(i), self.index(j)])

    def require(self, w: Iterable[Label]) -> None:
        for label in w:
            self.index(label)

    def with_entry(self, i: Label, j: Label, value: float) -> "QMatrix":
        entries = self.entries.copy()
        a, b = self.index(i), self.index(j)
        entries[a, b] = entries[b, a] = value
        return QMatrix(self.labels, entries)


@dataclass(frozen=True)
class MixedPartition:
    """Pair blocks over V together with the singletons [d] \\ V."""

    pairs: Tuple[Pair, ...]
    singletons: Tuple[int, ...]

    def __post_init__(self) -> None:
        points = sorted([x for p in self.pairs for x in p] + list(self.singletons))
        if points != list(range(1, len(points) + 1)):
            raise ValueError(f"Pairs {self.pairs} and singletons {self.singletons} do not partition [d]")

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(sorted(x for p in self.pairs for x in p))


# ----------------------------
# Enumeration
# ----------------------------


def _check_size(d2: int, cap: Optional[int]) -> None:
    limit = DEFAULT_CAPS.max_pair_partition_size if cap is None else cap
    if d2 > limit:
        raise CapExceededError("pair partition size", d2, limit)


def _matchings(points: Tuple[int, ...], letters: Optional[Mapping[int, Label]]) -> Iterator[List[Pair]]:
    """Pair the smallest unmatched point first; recurse over its admissible partners."""
    if not points:
        yield []
        return
    head, rest = points[0], points[1:]
    for k, partner in enumerate(rest):
        if letters is not None and letters[partner] != letters[head]:
            continue
        remaining = rest[:k] + rest[k + 1:]
        for tail in _matchings(remaining, letters):
            yield [(head, partner), *tail]


def enumerate_pair_partitions(d2: int, *, cap: Optional[int] = None) -> Iterator[PairPartition]:
    if d2 < 0 or d2 % 2:
        raise ValueError(f"Pair partitions need an even size, got {d2}")
    _check_size(d2, cap)
    for pairs in _matchings(tuple(range(1, d2 + 1)), None):
        yield PairPartition(tuple(pairs))


def _letter_counts_even(w: Word) -> bool:
    return all(c % 2 == 0 for c in Counter(w.letters).values())


def pair_partitions_below_kernel(w: Word, *, cap: Optional[int] = None) -> Iterator[PairPartition]:
    if len(w) % 2 or not _letter_counts_even(w):
        return
    _check_size(len(w), cap)
    letters = dict(enumerate(w.letters, start=1))
    for pairs in _matchings(tuple(range(1, len(w) + 1)), letters):
        yield PairPartition(tuple(pairs))


def enumerate_mixed_partitions(w: Word) -> Iterator[MixedPartition]:
    """Every sigma in P12([d], V) with sigma <= ker w, over all even V, smallest V first."""
    d = len(w)
    positions = tuple(range(1, d + 1))
    letters = dict(enumerate(w.letters, start=1))
    for size in range(0, d + 1, 2):
        for support in combinations(positions, size):
            singletons = tuple(p for p in positions if p not in support)
            for pairs in _matchings(support, letters):
                yield MixedPartition(tuple(pairs), singletons)


# ----------------------------
# Crossing statistics and moments
# ----------------------------


def crossing_counts(p: PairPartition, w: Word) -> Counter:
    """cr(pi, w; i, j), keyed by (label of the earlier block, label of the later block)."""
    if len(w) != p.size:
        raise KernelViolationError(f"Partition of [{p.size}] does not fit a word of length {len(w)}")
    for e, z in p.pairs:
        if w[e] != w[z]:
            raise KernelViolationError(f"Pair ({e}, {z}) joins letters {w[e]!r} and {w[z]!r}")
    counts: Counter = Counter()
    for v1, v2 in p.crossing_pairs():
        counts[(w[v1[0]], w[v2[0]])] += 1
    return counts


def partition_weight(counts: Mapping[Tuple[Label, Label], int], Q: QMatrix) -> float:
    return prod((Q.q(i, j) ** c for (i, j), c in counts.items()), start=1.0)


def qgaussian_moment(w: Word, Q: QMatrix) -> float:
    """tau(s_w(1) ... s_w(d)) = sum over pi <= ker w of prod q_ij ** cr(pi, w; i, j)."""
    Q.require(w)
    if len(w) % 2:
        return 0.0
    return float(sum(partition_weight(crossing_counts(p, w), Q) for p in pair_partitions_below_kernel(w)))


def mixed_partition_exponents(sigma: MixedPartition, w: Word) -> Counter:
    """
    C1 + C2 for a mixed partition: crossings between pair blocks plus, for every
    singleton nested inside a pair, one factor of q(singleton label, pair label).
    """
    counts: Counter = Counter()
    blocks = sorted(sigma.pairs)
    for v1, v2 in combinations(blocks, 2):
        if v1[0] < v2[0] < v1[1] < v2[1]:
            counts[(w[v1[0]], w[v2[0]])] += 1
    for s in sigma.singletons:
        for e, z in blocks:
            if e < s < z:
                counts[(w[s], w[e])] += 1
    return counts


def wick_vector_expansion(w: Word, Q: QMatrix, *, depth: Optional[int] = None) -> Dict[Tensor, float]:
    """
    s_w(1) ... s_w(d) Omega as {basis tensor: coefficient}; the empty tuple is Omega.
    The surviving tensor of sigma lists the singleton letters in position order.
    """
    limit = DEFAULT_CAPS.fock_depth if depth is None else depth
    if len(w) > limit:
        raise CapExceededError("word length for vector expansion", len(w), limit)
    Q.require(w)
    out: Dict[Tensor, float] = {}
    for sigma in enumerate_mixed_partitions(w):
        tensor = tuple(w[s] for s in sigma.singletons)
        out[tensor] = out.get(tensor, 0.0) + partition_weight(mixed_partition_exponents(sigma, w), Q)
    return {t: c for t, c in out.items() if c != 0.0}


# ----------------------------
# Polynomial words
# ----------------------------

Polynomial = Tuple[float, ...]


def polynomial_degree(coefficients: Sequence[float]) -> int:
    degree = len(coefficients) - 1
    while degree > 0 and coefficients[degree] == 0:
        degree -= 1
    return degree


def polynomial_word_moment(
    factors: Sequence[Tuple[Label, Sequence[float]]],
    Q: QMatrix,
    *,
    max_degree: Optional[int] = None,
    cache: Optional[Dict[Tensor, float]] = None,
) -> float:
    """
    tau(p_1(s_l1) ... p_m(s_lm)); each polynomial is given by ascending coefficients.
    Expands by linearity into plain words.
    """
    limit = DEFAULT_CAPS.max_polynomial_degree if max_degree is None else max_degree
    if not factors:
        raise ValueError("polynomial_word_moment expects at least one factor")
    expanded: List[List[Tuple[int, float]]] = []
    for label, coefficients in factors:
        Q.index(label)
        degree = polynomial_degree(coefficients)
        if degree > limit:
            raise CapExceededError(f"polynomial degree for label {label!r}", degree, limit)
        expanded.append([(k, float(c)) for k, c in enumerate(coefficients[: degree + 1]) if c != 0])
    memo = cache if cache is not None else {}
    total = 0.0
    for choice in product(*expanded):
        coefficient = prod((c for _, c in choice), start=1.0)
        letters = tuple(label for (label, _), (k, _) in zip(factors, choice) for _ in range(k))
        if not letters:
            total += coefficient
            continue
        if letters not in memo:
            memo[letters] = qgaussian_moment(Word(letters), Q)
        total += coefficient * memo[letters]
    return total
