from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.algebra.clifford_sum import CliffordSum, block_count, pack_supports
from src.algebra.dense import DenseOperator, DenseTermTable, ModeLayout, check_qubit_cap
from src.algebra.majorana import i_power
from src.config.defaults import DEFAULT_CAPS
from src.syk.model import SykModelSpec
from src.util.errors import CapExceededError, ConfigError

logger = logging.getLogger(__name__)


# ----------------------------
# Colexicographic subset ranking
# ----------------------------


def colex_subsets(n: int, r: int) -> Iterator[Tuple[int, ...]]:
    """r-subsets of range(n) in colexicographic order (ordered by their largest element first)."""
    if r == 0:
        yield ()
        return
    for top in range(r - 1, n):
        for rest in colex_subsets(top, r - 1):
            yield (*rest, top)


def colex_rank(subset: Sequence[int]) -> int:
    """sum_i C(c_i, i + 1) over the increasing elements c_0 < c_1 < ..."""
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(subset)))


def colex_unrank(rank: int, r: int) -> Tuple[int, ...]:
    if rank < 0:
        raise ValueError(f"rank must be non-negative, got {rank}")
    out: List[int] = []
    for i in range(r, 0, -1):
        c = i - 1
        while math.comb(c + 1, i) <= rank:
            c += 1
        out.append(c)
        rank -= math.comb(c, i)
    return tuple(reversed(out))


# ----------------------------
# Coupling draws
# ----------------------------


def check_enumerable(spec: SykModelSpec, cap: Optional[int] = None) -> None:
    limit = DEFAULT_CAPS.max_subsets if cap is None else cap
    if spec.r == 0:
        raise ConfigError(f"Model {spec.label!r} has interaction length 0; its Hamiltonian is degenerate")
    if spec.term_count > limit:
        raise CapExceededError(f"subset count binom({spec.n}, {spec.r}) for model {spec.label!r}", spec.term_count, limit)


@lru_cache(maxsize=64)
def coupling_supports(spec: SykModelSpec) -> Tuple[Tuple[int, ...], ...]:
    """Index tuples R of the domain, in colex rank order of their positions."""
    domain = spec.domain
    return tuple(tuple(domain[p] for p in positions) for positions in colex_subsets(spec.n, spec.r))


def hamiltonian_prefactor(spec: SykModelSpec) -> complex:
    """i^floor(r/2) / sqrt(binom(n, r)); makes H self-adjoint with E tr(H^2) = 1."""
    return i_power(spec.r // 2) / math.sqrt(spec.term_count)


def draw_couplings(
    spec: SykModelSpec,
    rng: np.random.Generator,
    count: Optional[int] = None,
    *,
    cap: Optional[int] = None,
) -> np.ndarray:
    """Couplings indexed by colex rank: shape (T,), or (count, T) for a batch of samples."""
    check_enumerable(spec, cap)
    shape = (spec.term_count,) if count is None else (count, spec.term_count)
    return spec.law().draw(rng, shape)


# ----------------------------
# Dense Hamiltonians
# ----------------------------


@lru_cache(maxsize=16)
def dense_term_table(spec: SykModelSpec, layout: ModeLayout, max_qubits: int) -> DenseTermTable:
    supports = [layout.positions(R) for R in coupling_supports(spec)]
    return DenseTermTable(supports, layout.n_qubits, cap=max_qubits)


def _resolve_layout(spec: SykModelSpec, layout: Optional[ModeLayout]) -> ModeLayout:
    return layout if layout is not None else ModeLayout.identity(spec.max_index)


def hamiltonian_from_couplings(
    spec: SykModelSpec,
    couplings: Sequence[float] | np.ndarray,
    layout: Optional[ModeLayout] = None,
    *,
    max_qubits: Optional[int] = None,
    max_subsets: Optional[int] = None,
) -> DenseOperator:
    check_enumerable(spec, max_subsets)
    layout = _resolve_layout(spec, layout)
    cap = DEFAULT_CAPS.max_qubits if max_qubits is None else max_qubits
    check_qubit_cap(layout.n_qubits, cap)
    table = dense_term_table(spec, layout, cap)
    couplings = np.asarray(couplings, dtype=float)
    return table.assemble(hamiltonian_prefactor(spec) * couplings)


def sample_hamiltonian(
    spec: SykModelSpec,
    rng: np.random.Generator,
    *,
    layout: Optional[ModeLayout] = None,
    max_qubits: Optional[int] = None,
    max_subsets: Optional[int] = None,
) -> DenseOperator:
    """One draw of the dense Hamiltonian; the default layout places index k on generator k."""
    layout = _resolve_layout(spec, layout)
    check_qubit_cap(layout.n_qubits, DEFAULT_CAPS.max_qubits if max_qubits is None else max_qubits)
    couplings = draw_couplings(spec, rng, cap=max_subsets)
    return hamiltonian_from_couplings(spec, couplings, layout, max_qubits=max_qubits, max_subsets=max_subsets)


# ----------------------------
# Symbolic Hamiltonians
# ----------------------------


@lru_cache(maxsize=16)
def packed_supports(spec: SykModelSpec, layout: ModeLayout) -> np.ndarray:
    supports = [layout.positions(R) for R in coupling_supports(spec)]
    masks = pack_supports(supports, block_count(layout.size))
    masks.setflags(write=False)
    return masks


def symbolic_hamiltonian(
    spec: SykModelSpec,
    couplings: Sequence[float] | np.ndarray,
    layout: ModeLayout,
) -> CliffordSum:
    """The same Hamiltonian as a sum of Majorana monomials over the layout's positions."""
    masks = packed_supports(spec, layout)
    coeffs = hamiltonian_prefactor(spec) * np.asarray(couplings, dtype=np.complex128)
    if coeffs.shape != (masks.shape[0],):
        raise ValueError(f"Expected {masks.shape[0]} couplings, got shape {coeffs.shape}")
    return CliffordSum(masks, coeffs)
