from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Tuple

# i**phase for phase in 0..3
_I_POWERS: Tuple[complex, ...] = (1 + 0j, 1j, -1 + 0j, -1j)


def i_power(phase: int) -> complex:
    return _I_POWERS[phase % 4]


def support_to_bits(indices: Iterable[int]) -> int:
    """Encode positive Majorana indices as a bitmask (index i -> bit i-1)."""
    bits = 0
    for index in indices:
        if index < 1:
            raise ValueError(f"Majorana indices must be positive, got {index}")
        bit = 1 << (index - 1)
        if bits & bit:
            raise ValueError(f"Duplicate Majorana index {index}")
        bits |= bit
    return bits


def bits_to_support(bits: int) -> Tuple[int, ...]:
    out = []
    while bits:
        low = bits & -bits
        out.append(low.bit_length())
        bits ^= low
    return tuple(out)


def exclusive_prefix_parity(bits: int, width: int) -> int:
    """
    Bit j of the result is the parity of the set bits of ``bits`` strictly below j,
    for j < width. Computed with log2(width) shift-xor rounds.
    """
    if width <= 0:
        return 0
    mask = (1 << width) - 1
    prefix = bits & mask
    shift = 1
    while shift < width:
        prefix ^= (prefix << shift) & mask
        shift <<= 1
    return (prefix << 1) & mask


def inversion_parity(a_bits: int, b_bits: int) -> int:
    """Parity of #{(a, b) in A x B : a > b}, the swaps needed to sort Psi_A Psi_B."""
    width = max(a_bits.bit_length(), b_bits.bit_length())
    return (a_bits & exclusive_prefix_parity(b_bits, width)).bit_count() & 1


@dataclass(frozen=True)
class MajoranaMonomial:
    """
    i**phase * psi_{i1} ... psi_{ir} with i1 < ... < ir.
    - bits: support bitmask, index i stored at bit i-1
    - phase: exponent of the imaginary unit, kept in 0..3
    """

    bits: int = 0
    phase: int = 0

    def __post_init__(self) -> None:
        if self.bits < 0:
            raise ValueError(f"Support bitmask must be non-negative, got {self.bits}")
        if not 0 <= self.phase < 4:
            object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_support(cls, indices: Iterable[int], phase: int = 0) -> "MajoranaMonomial":
        return cls(support_to_bits(indices), phase % 4)

    @classmethod
    def identity(cls) -> "MajoranaMonomial":
        return cls(0, 0)

    @property
    def support(self) -> Tuple[int, ...]:
        return bits_to_support(self.bits)

    @property
    def degree(self) -> int:
        return self.bits.bit_count()

    @property
    def max_index(self) -> int:
        return self.bits.bit_length()

    @property
    def coefficient(self) -> complex:
        return i_power(self.phase)

    def __mul__(self, other: "MajoranaMonomial") -> "MajoranaMonomial":
        return multiply(self, other)

    def __repr__(self) -> str:
        return f"MajoranaMonomial(support={self.support}, phase={self.phase})"


def multiply(a: MajoranaMonomial, b: MajoranaMonomial) -> MajoranaMonomial:
    """
    Product of two monomials. The support is the symmetric difference; every
    swap while merging the index sequences contributes -1, repeated
    generators square to the identity.
    """
    sign_phase = 2 * inversion_parity(a.bits, b.bits)
    return MajoranaMonomial(a.bits ^ b.bits, (a.phase + b.phase + sign_phase) % 4)


def commutation_sign(a: MajoranaMonomial, b: MajoranaMonomial) -> int:
    """The sign s with Psi_A Psi_B = s * Psi_B Psi_A."""
    exponent = a.degree * b.degree + (a.bits & b.bits).bit_count()
    return -1 if exponent & 1 else 1


def adjoint(m: MajoranaMonomial) -> MajoranaMonomial:
    """Hermitian adjoint: conjugate the phase and reverse the generator order."""
    r = m.degree
    return MajoranaMonomial(m.bits, (-m.phase + r * (r - 1)) % 4)


def normalized_trace(m: MajoranaMonomial) -> complex:
    if m.bits:
        return 0j
    return i_power(m.phase)


def word_product(ms: Sequence[MajoranaMonomial]) -> MajoranaMonomial:
    return reduce(multiply, ms, MajoranaMonomial.identity())


def trace_of_word(ms: Sequence[MajoranaMonomial]) -> complex:
    if not ms:
        raise ValueError("trace_of_word expects a nonempty list of monomials")
    return normalized_trace(word_product(ms))


def half_degree_phase(ms: Sequence[MajoranaMonomial]) -> int:
    """Sum of floor(r_k / 2) over the word, the exponent of i that makes tr real and signed."""
    return sum(m.degree // 2 for m in ms)


def pair_partition_sign(
    supports: Sequence[MajoranaMonomial],
    pairs: Sequence[Tuple[int, int]],
) -> int:
    """
    Closed-form sign of i**(sum floor(r/2)) * tr(Psi_R1 ... Psi_R2d) when the
    positions are matched by ``pairs`` (1-based, each pair carrying equal supports):
    the product over crossing block pairs of (-1)**(|R n R'| + |R||R'|).
    """
    blocks = sorted(pairs)
    for e, z in blocks:
        if supports[e - 1].bits != supports[z - 1].bits:
            raise ValueError(f"Positions {e} and {z} do not carry the same support")
    exponent = 0
    for x, (e1, z1) in enumerate(blocks):
        r1 = supports[e1 - 1]
        for e2, z2 in blocks[x + 1:]:
            if e1 < e2 < z1 < z2:
                r2 = supports[e2 - 1]
                exponent += (r1.bits & r2.bits).bit_count() + r1.degree * r2.degree
    return -1 if exponent & 1 else 1
