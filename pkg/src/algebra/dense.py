from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.algebra.majorana import MajoranaMonomial, i_power
from src.config.defaults import DEFAULT_CAPS
from src.util.errors import CapExceededError

logger = logging.getLogger(__name__)

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY_2 = np.eye(2, dtype=np.complex128)


# ----------------------------
# Mode layout
# ----------------------------


@dataclass(frozen=True)
class ModeLayout:
    """
    Order-preserving relabelling of Majorana indices onto generator positions 1..N.
    Products of monomials only depend on the relative order of their indices,
    so a family whose domains live far out on the integer line can still be
    realised on ceil(N/2) qubits.
    """

    indices: Tuple[int, ...]

    def __post_init__(self) -> None:
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("ModeLayout indices must be strictly increasing")
        if self.indices and self.indices[0] < 1:
            raise ValueError("ModeLayout indices must be positive")

    @classmethod
    def identity(cls, max_index: int) -> "ModeLayout":
        return cls(tuple(range(1, max_index + 1)))

    @classmethod
    def from_domains(cls, domains: Iterable[Iterable[int]]) -> "ModeLayout":
        union: set[int] = set()
        for domain in domains:
            union.update(domain)
        return cls(tuple(sorted(union)))

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def n_qubits(self) -> int:
        return (self.size + 1) // 2

    def position_map(self) -> Dict[int, int]:
        return {index: pos for pos, index in enumerate(self.indices, start=1)}

    def positions(self, indices: Iterable[int]) -> Tuple[int, ...]:
        mapping = self.position_map()
        try:
            return tuple(mapping[i] for i in indices)
        except KeyError as exc:
            raise ValueError(f"Index {exc.args[0]} is not part of the mode layout") from exc


# ----------------------------
# Dense operators
# ----------------------------


@dataclass(frozen=True)
class DenseOperator:
    """Complex matrix acting on n_qubits qubits."""

    n_qubits: int
    matrix: np.ndarray

    @property
    def dimension(self) -> int:
        return 1 << self.n_qubits

    def normalized_trace(self) -> complex:
        return complex(np.trace(self.matrix)) / self.dimension

    def adjoint(self) -> "DenseOperator":
        return DenseOperator(self.n_qubits, self.matrix.conj().T)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_self_adjoint(self, tol: float = 1e-10) -> bool:
        return self.hermiticity_defect() <= tol

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        if other.n_qubits != self.n_qubits:
            raise ValueError(f"Qubit mismatch: {self.n_qubits} vs {other.n_qubits}")
        return DenseOperator(self.n_qubits, self.matrix @ other.matrix)


def check_qubit_cap(n_qubits: int, cap: Optional[int] = None) -> None:
    limit = DEFAULT_CAPS.max_qubits if cap is None else cap
    if n_qubits > limit:
        raise CapExceededError("dense qubit count", n_qubits, limit)


def _generator_letters(k: int, n_qubits: int) -> Dict[int, np.ndarray]:
    """Non-identity tensor factors of psi_k, keyed by qubit (0 is the most significant)."""
    if not 1 <= k <= 2 * n_qubits:
        raise ValueError(f"Generator index {k} outside 1..{2 * n_qubits}")
    if k <= n_qubits:
        slot, letter = k - 1, SIGMA_1
    else:
        slot, letter = k - n_qubits - 1, SIGMA_2
    factors = {q: SIGMA_3 for q in range(slot)}
    factors[slot] = letter
    return factors


def majorana_generator(k: int, n_qubits: int, *, cap: Optional[int] = None) -> DenseOperator:
    """psi_k = sigma3^(k-1) x sigma1 x I... for k <= N, sigma3^(k-N-1) x sigma2 x I... above."""
    check_qubit_cap(n_qubits, cap)
    factors = _generator_letters(k, n_qubits)
    matrix = np.ones((1, 1), dtype=np.complex128)
    for q in range(n_qubits):
        matrix = np.kron(matrix, factors.get(q, IDENTITY_2))
    return DenseOperator(n_qubits, matrix)


def monomial_structure(positions: Sequence[int], n_qubits: int) -> Tuple[int, np.ndarray]:
    """
    (xmask, values) of the ordered generator product over ``positions``.

    Every generator is a tensor product of Paulis, so the product is a
    monomial matrix: row b has its single nonzero entry in column b ^ xmask.
    """
    local = [IDENTITY_2.copy() for _ in range(n_qubits)]
    for k in positions:
        for q, letter in _generator_letters(k, n_qubits).items():
            local[q] = local[q] @ letter
    xmask = 0
    values = np.ones(1, dtype=np.complex128)
    for q, block in enumerate(local):
        flip = 1 if block[0, 0] == 0 and block[1, 1] == 0 else 0
        xmask |= flip << (n_qubits - 1 - q)
        values = np.kron(values, np.array([block[0, flip], block[1, 1 - flip]]))
    return xmask, values


def dense_monomial(
    m: MajoranaMonomial,
    n_qubits: int,
    *,
    layout: Optional[ModeLayout] = None,
    cap: Optional[int] = None,
) -> DenseOperator:
    check_qubit_cap(n_qubits, cap)
    support = m.support
    positions = layout.positions(support) if layout is not None else support
    if positions and max(positions) > 2 * n_qubits:
        raise ValueError(f"Support {support} needs more than {n_qubits} qubits")
    xmask, values = monomial_structure(positions, n_qubits)
    dim = 1 << n_qubits
    rows = np.arange(dim)
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    matrix[rows, rows ^ xmask] = values * i_power(m.phase)
    return DenseOperator(n_qubits, matrix)


class DenseTermTable:
    """
    Precomputed monomial matrices for a fixed list of supports, so that
    sum_t c_t * Psi_{R_t} can be assembled per sample with one matmul per
    distinct off-diagonal pattern.
    """

    def __init__(self, supports: Sequence[Tuple[int, ...]], n_qubits: int, *, cap: Optional[int] = None) -> None:
        check_qubit_cap(n_qubits, cap)
        self.n_qubits = n_qubits
        self.dimension = 1 << n_qubits
        self.rows = np.arange(self.dimension)
        xmasks = np.empty(len(supports), dtype=np.int64)
        values = np.empty((len(supports), self.dimension), dtype=np.complex128)
        for t, positions in enumerate(supports):
            xmasks[t], values[t] = monomial_structure(positions, n_qubits)
        self.values = values
        self._groups: Mapping[int, np.ndarray] = {
            int(x): np.flatnonzero(xmasks == x) for x in np.unique(xmasks)
        }
        logger.debug(
            "Dense term table | terms=%d qubits=%d patterns=%d",
            len(supports),
            n_qubits,
            len(self._groups),
        )

    def __len__(self) -> int:
        return self.values.shape[0]

    def assemble(self, coefficients: np.ndarray) -> DenseOperator:
        coefficients = np.asarray(coefficients, dtype=np.complex128)
        if coefficients.shape != (len(self),):
            raise ValueError(f"Expected {len(self)} coefficients, got shape {coefficients.shape}")
        matrix = np.zeros((self.dimension, self.dimension), dtype=np.complex128)
        for xmask, idx in self._groups.items():
            matrix[self.rows, self.rows ^ xmask] = coefficients[idx] @ self.values[idx]
        return DenseOperator(self.n_qubits, matrix)


def trace_of_dense_product(ops: Sequence[DenseOperator]) -> complex:
    """Normalized trace of an ordered product, splitting it so only one elementwise contraction remains."""
    if not ops:
        raise ValueError("trace_of_dense_product expects at least one operator")
    if len(ops) == 1:
        return ops[0].normalized_trace()
    half = (len(ops) + 1) // 2
    left = ops[0].matrix
    for op in ops[1:half]:
        left = left @ op.matrix
    right = ops[half].matrix
    for op in ops[half + 1:]:
        right = right @ op.matrix
    return complex(np.sum(left * right.T)) / ops[0].dimension
