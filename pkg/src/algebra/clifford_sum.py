from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from src.config.defaults import DEFAULT_CAPS
from src.util.errors import CapExceededError

logger = logging.getLogger(__name__)

BLOCK_BITS = 64
_ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


def block_count(max_position: int) -> int:
    return max(1, (max_position + BLOCK_BITS - 1) // BLOCK_BITS)


def pack_supports(supports: Sequence[Iterable[int]], width: int) -> np.ndarray:
    """Pack 1-based generator positions into a (T, width) uint64 bitmask array."""
    masks = np.zeros((len(supports), width), dtype=np.uint64)
    for t, positions in enumerate(supports):
        for p in positions:
            block, bit = divmod(p - 1, BLOCK_BITS)
            if block >= width:
                raise ValueError(f"Position {p} does not fit in {width} mask blocks")
            masks[t, block] |= np.uint64(1) << np.uint64(bit)
    return masks


def exclusive_prefix_parity(masks: np.ndarray) -> np.ndarray:
    """Blockwise version of the scalar prefix parity; lower blocks carry into higher ones."""
    prefix = masks.copy()
    for shift in (1, 2, 4, 8, 16, 32):
        prefix ^= prefix << np.uint64(shift)
    exclusive = prefix << np.uint64(1)
    if masks.shape[-1] > 1:
        block_parity = (np.bitwise_count(masks).astype(np.int64) & 1)
        carry = np.cumsum(block_parity, axis=-1) - block_parity
        exclusive ^= np.where(carry & 1, _ALL_ONES, np.uint64(0))
    return exclusive


def _unique_rows(masks: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(first occurrence per distinct row, inverse index); 1-D fast path for single-block masks."""
    if masks.shape[1] == 1:
        _, first, inverse = np.unique(masks[:, 0], return_index=True, return_inverse=True)
    else:
        _, first, inverse = np.unique(masks, axis=0, return_index=True, return_inverse=True)
    return first, inverse.reshape(-1)


def _popcount_rows(masks: np.ndarray) -> np.ndarray:
    return np.bitwise_count(masks).sum(axis=-1, dtype=np.int64)


@dataclass(frozen=True)
class CliffordSum:
    """
    Finite linear combination sum_t c_t * Psi_{S_t} with distinct supports.
    - masks: (T, W) uint64 support bitmasks, generator position p at bit p-1
    - coeffs: (T,) complex128
    """

    masks: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.masks.ndim != 2 or self.masks.dtype != np.uint64:
            raise ValueError("masks must be a 2-D uint64 array")
        if self.coeffs.shape != (self.masks.shape[0],):
            raise ValueError("coeffs must have one entry per mask row")

    @classmethod
    def from_supports(
        cls,
        supports: Sequence[Iterable[int]],
        coeffs: Sequence[complex] | np.ndarray,
        *,
        width: Optional[int] = None,
    ) -> "CliffordSum":
        supports = [tuple(s) for s in supports]
        if width is None:
            width = block_count(max((max(s) for s in supports if s), default=1))
        masks = pack_supports(supports, width)
        return cls(masks, np.asarray(coeffs, dtype=np.complex128)).merged()

    @classmethod
    def identity(cls, width: int = 1) -> "CliffordSum":
        return cls(np.zeros((1, width), dtype=np.uint64), np.ones(1, dtype=np.complex128))

    @property
    def width(self) -> int:
        return self.masks.shape[1]

    def __len__(self) -> int:
        return self.masks.shape[0]

    def merged(self, prune: float = 0.0) -> "CliffordSum":
        """Combine duplicate supports and drop coefficients with |c| <= prune."""
        if len(self) == 0:
            return self
        first, inverse = _unique_rows(self.masks)
        real = np.bincount(inverse, weights=self.coeffs.real, minlength=len(first))
        imag = np.bincount(inverse, weights=self.coeffs.imag, minlength=len(first))
        coeffs = real + 1j * imag
        keep = np.abs(coeffs) > prune
        return CliffordSum(self.masks[first][keep], coeffs[keep])

    def multiply(self, other: "CliffordSum", *, max_terms: Optional[int] = None) -> "CliffordSum":
        """Product self * other, merged."""
        limit = DEFAULT_CAPS.max_symbolic_terms if max_terms is None else max_terms
        if self.width != other.width:
            raise ValueError(f"Mask width mismatch: {self.width} vs {other.width}")
        raw = len(self) * len(other)
        if raw > limit:
            raise CapExceededError("symbolic product terms", raw, limit)
        left = self.masks[:, None, :]
        right = other.masks[None, :, :]
        swaps = np.bitwise_count(left & exclusive_prefix_parity(other.masks)[None, :, :]).sum(axis=-1, dtype=np.int64)
        sign = 1.0 - 2.0 * (swaps & 1)
        masks = (left ^ right).reshape(-1, self.width)
        coeffs = (np.outer(self.coeffs, other.coeffs) * sign).reshape(-1)
        return CliffordSum(masks, coeffs).merged()

    def __matmul__(self, other: "CliffordSum") -> "CliffordSum":
        return self.multiply(other)

    def normalized_trace(self) -> complex:
        empty = ~self.masks.any(axis=1)
        return complex(self.coeffs[empty].sum())

    def degrees(self) -> np.ndarray:
        return _popcount_rows(self.masks)


def trace_pair(left: CliffordSum, right: CliffordSum) -> complex:
    """
    tr(L R) = sum_S L_S R_S tr(Psi_S Psi_S), with tr(Psi_S Psi_S) = (-1)**(|S|(|S|-1)/2).
    Only supports present in both halves contribute.
    """
    if left.width != right.width:
        raise ValueError(f"Mask width mismatch: {left.width} vs {right.width}")
    if len(left) == 0 or len(right) == 0:
        return 0j
    first, inverse = _unique_rows(np.concatenate([left.masks, right.masks]))
    slot = np.full(len(first), -1, dtype=np.int64)
    slot[inverse[: len(left)]] = np.arange(len(left))
    match = slot[inverse[len(left):]]
    ri = np.flatnonzero(match >= 0)
    if ri.size == 0:
        return 0j
    li = match[ri]
    r = left.degrees()[li]
    signs = np.where(((r * (r - 1)) // 2) & 1, -1.0, 1.0)
    return complex(np.sum(left.coeffs[li] * right.coeffs[ri] * signs))


def trace_of_sum_product(factors: Sequence[CliffordSum], *, max_terms: Optional[int] = None) -> complex:
    """Normalized trace of an ordered product, expanding each half separately."""
    if not factors:
        raise ValueError("trace_of_sum_product expects at least one factor")
    if len(factors) == 1:
        return factors[0].normalized_trace()
    half = (len(factors) + 1) // 2
    left, right = _expand(factors[:half], max_terms), _expand(factors[half:], max_terms)
    return trace_pair(left, right)


def _expand(factors: Sequence[CliffordSum], max_terms: Optional[int]) -> CliffordSum:
    acc = factors[0]
    for factor in factors[1:]:
        acc = acc.multiply(factor, max_terms=max_terms)
    return acc


def unpack_support(mask_row: np.ndarray) -> Tuple[int, ...]:
    positions = []
    for block, word in enumerate(mask_row.tolist()):
        while word:
            low = word & -word
            positions.append(block * BLOCK_BITS + low.bit_length())
            word ^= low
    return tuple(positions)
