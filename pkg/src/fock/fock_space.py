from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.combinatorics.partitions import Label, QMatrix, Tensor, Word
from src.config.defaults import DEFAULT_CAPS
from src.util.errors import CapExceededError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FockVector:
    """
    Finite combination of basis tensors in the algebraic full Fock space.
    The empty tuple is the vacuum Omega; no term is longer than ``depth``.
    """

    terms: Mapping[Tensor, float] = field(default_factory=dict)
    depth: int = DEFAULT_CAPS.fock_depth
    truncated: bool = False

    def __post_init__(self) -> None:
        cleaned = {tuple(k): float(v) for k, v in self.terms.items() if v != 0.0}
        too_long = [k for k in cleaned if len(k) > self.depth]
        if too_long:
            raise ValueError(f"Terms {too_long[:3]} exceed depth {self.depth}")
        object.__setattr__(self, "terms", cleaned)

    @classmethod
    def vacuum(cls, depth: int = DEFAULT_CAPS.fock_depth) -> "FockVector":
        return cls({(): 1.0}, depth)

    @classmethod
    def basis(cls, letters: Iterable[Label], depth: int = DEFAULT_CAPS.fock_depth) -> "FockVector":
        return cls({tuple(letters): 1.0}, depth)

    def coefficient(self, tensor: Sequence[Label] = ()) -> float:
        return self.terms.get(tuple(tensor), 0.0)

    def is_zero(self) -> bool:
        return not self.terms

    def _combine(self, other: "FockVector", sign: float) -> "FockVector":
        if other.depth != self.depth:
            raise ValueError(f"Depth mismatch: {self.depth} vs {other.depth}")
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + sign * v
        return FockVector(out, self.depth, self.truncated or other.truncated)

    def __add__(self, other: "FockVector") -> "FockVector":
        return self._combine(other, 1.0)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self._combine(other, -1.0)

    def scale(self, factor: float) -> "FockVector":
        return FockVector({k: factor * v for k, v in self.terms.items()}, self.depth, self.truncated)


def _basis_inner(a: Tensor, b: Tensor, Q: QMatrix, memo: Dict[Tuple[Tensor, Tensor], float]) -> float:
    """<e_a, e_b>_Q by expanding the first letter of a against every matching letter of b."""
    if len(a) != len(b):
        return 0.0
    if not a:
        return 1.0
    key = (a, b)
    if key in memo:
        return memo[key]
    head, rest = a[0], a[1:]
    total = 0.0
    weight = 1.0
    for k, letter in enumerate(b):
        if letter == head:
            total += weight * _basis_inner(rest, b[:k] + b[k + 1:], Q, memo)
        weight *= Q.q(head, letter)
        if weight == 0.0:
            break
    memo[key] = total
    return total


def twisted_inner_product(u: FockVector, v: FockVector, Q: QMatrix) -> float:
    memo: Dict[Tuple[Tensor, Tensor], float] = {}
    total = 0.0
    for a, ca in u.terms.items():
        for b, cb in v.terms.items():
            if len(a) == len(b):
                total += ca * cb * _basis_inner(a, b, Q, memo)
    return total


def apply_creation(i: Label, v: FockVector) -> FockVector:
    """Left creation l_i: prepend i; terms that would exceed the depth are dropped and flagged."""
    out: Dict[Tensor, float] = {}
    truncated = v.truncated
    for k, c in v.terms.items():
        if len(k) + 1 > v.depth:
            truncated = True
            continue
        out[(i, *k)] = out.get((i, *k), 0.0) + c
    if truncated and not v.truncated:
        logger.debug("Creation l_%s truncated terms at depth %d", i, v.depth)
    return FockVector(out, v.depth, truncated)


def apply_annihilation(i: Label, v: FockVector, Q: QMatrix) -> FockVector:
    """l_i^*(e_j1 x ... x e_jn) = sum_k delta(i, j_k) q(i, j_1) ... q(i, j_k-1) e_j1 x ..^k.. x e_jn."""
    Q.index(i)
    out: Dict[Tensor, float] = {}
    for tensor, c in v.terms.items():
        weight = c
        for k, letter in enumerate(tensor):
            if letter == i:
                reduced = tensor[:k] + tensor[k + 1:]
                out[reduced] = out.get(reduced, 0.0) + weight
            weight *= Q.q(i, letter)
            if weight == 0.0:
                break
    return FockVector(out, v.depth, v.truncated)


def apply_field(i: Label, v: FockVector, Q: QMatrix) -> FockVector:
    """s_i = l_i + l_i^*."""
    return apply_creation(i, v) + apply_annihilation(i, v, Q)


def vacuum_moment(w: Word, Q: QMatrix, *, depth: Optional[int] = None) -> float:
    """<s_w(1) ... s_w(d) Omega, Omega>_Q, applying the fields right to left."""
    limit = DEFAULT_CAPS.fock_depth if depth is None else depth
    if len(w) > 2 * limit:
        raise CapExceededError("word length for vacuum moment", len(w), 2 * limit)
    Q.require(w)
    letters = w.letters
    v = FockVector.vacuum(limit)
    for step, letter in enumerate(reversed(letters), start=1):
        v = apply_field(letter, v, Q)
        remaining = len(letters) - step
        # a term longer than the remaining steps can no longer reach the vacuum
        v = FockVector({k: c for k, c in v.terms.items() if len(k) <= remaining}, v.depth, v.truncated)
    return v.coefficient(())


def basis_words(labels: Sequence[Label], max_length: int) -> Iterator[Tensor]:
    """All tensors over ``labels`` of length 0..max_length, shortest first."""
    for length in range(max_length + 1):
        yield from product(labels, repeat=length)


def gram_matrix(words: Sequence[Tensor], Q: QMatrix) -> np.ndarray:
    memo: Dict[Tuple[Tensor, Tensor], float] = {}
    n = len(words)
    gram = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            gram[a, b] = gram[b, a] = _basis_inner(tuple(words[a]), tuple(words[b]), Q, memo)
    return gram


def equal_modulo_null(u: FockVector, v: FockVector, Q: QMatrix, *, tol: float = 1e-12) -> bool:
    """
    u and v agree in the quotient by the null space of the pre-inner product:
    their difference is orthogonal to every basis tensor up to the depth.
    """
    diff = u - v
    labels: List[Label] = list(Q.labels)
    for tensor in basis_words(labels, u.depth):
        if abs(twisted_inner_product(diff, FockVector.basis(tensor, u.depth), Q)) > tol:
            return False
    return True
