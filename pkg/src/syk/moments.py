from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.algebra.clifford_sum import trace_of_sum_product
from src.algebra.dense import check_qubit_cap, trace_of_dense_product
from src.algebra.majorana import MajoranaMonomial, multiply, support_to_bits
from src.combinatorics.partitions import Label, PairPartition, Word, pair_partitions_below_kernel, qgaussian_moment
from src.config.defaults import DEFAULT_CAPS, DEFAULT_SAMPLING
from src.models.estimate import EstimateMethod, MomentEstimate
from src.stats.overlap import OverlapConfig, exact_or_mc_sign_expectation
from src.syk.model import SykFamily
from src.syk.sampling import (
    check_enumerable,
    coupling_supports,
    dense_term_table,
    draw_couplings,
    hamiltonian_prefactor,
    symbolic_hamiltonian,
)
from src.util.errors import CapExceededError, NumericalResidueError
from src.util.rng import derive_generator, resolve_seed
from src.util.scheduler import sample_in_chunks

logger = logging.getLogger(__name__)

IMAGINARY_TOLERANCE = 1e-8
BACKENDS = ("dense", "reduced")


def _word(word: Word | Sequence[Label]) -> Word:
    return word if isinstance(word, Word) else Word(tuple(word))


def trace_is_real(word: Word) -> bool:
    """tr(H_w1 ... H_wd) is real for self-adjoint H when the reversed word is a rotation of the word."""
    letters = word.letters
    reversed_letters = letters[::-1]
    return any(letters[k:] + letters[:k] == reversed_letters for k in range(len(letters)))


# ----------------------------
# Monte Carlo
# ----------------------------


def mc_joint_moment(
    family: SykFamily,
    word: Word | Sequence[Label],
    samples: int,
    rng: np.random.Generator | int,
    *,
    backend: str = "dense",
    threads: int = 1,
    chunk_size: Optional[int] = None,
    max_qubits: Optional[int] = None,
    max_subsets: Optional[int] = None,
    max_symbolic_terms: Optional[int] = None,
) -> MomentEstimate:
    """
    Monte Carlo estimate of E[tr(H_w(1) ... H_w(d))] over independent coupling draws.
    Each chunk of samples reads couplings from its own counter-based stream per label,
    so the estimate does not depend on the thread count.
    """
    word = _word(word)
    family.require(word)
    if backend not in BACKENDS:
        raise ValueError(f"Unknown backend '{backend}'. Available: {', '.join(BACKENDS)}")
    labels = sorted(set(word.letters), key=family.labels.index)
    specs = {label: family.spec(label) for label in labels}
    for spec in specs.values():
        check_enumerable(spec, max_subsets)
    layout = family.layout(labels)
    qubit_cap = DEFAULT_CAPS.max_qubits if max_qubits is None else max_qubits
    if backend == "dense":
        check_qubit_cap(layout.n_qubits, qubit_cap)
        tables = {label: dense_term_table(specs[label], layout, qubit_cap) for label in labels}
    seed = resolve_seed(rng)
    stream = {label: family.labels.index(label) for label in labels}

    def draw(chunk_id: int, count: int) -> np.ndarray:
        couplings = {
            label: draw_couplings(specs[label], derive_generator(seed, "couplings", chunk_id, stream[label]), count, cap=max_subsets)
            for label in labels
        }
        out = np.empty(count, dtype=np.complex128)
        for s in range(count):
            if backend == "dense":
                ops = {
                    label: tables[label].assemble(hamiltonian_prefactor(specs[label]) * couplings[label][s])
                    for label in labels
                }
                out[s] = trace_of_dense_product([ops[x] for x in word.letters])
            else:
                sums = {label: symbolic_hamiltonian(specs[label], couplings[label][s], layout) for label in labels}
                out[s] = trace_of_sum_product([sums[x] for x in word.letters], max_terms=max_symbolic_terms)
        return out

    traces = sample_in_chunks(
        samples,
        draw,
        chunk_size=chunk_size or DEFAULT_SAMPLING.chunk_size,
        threads=threads,
    )
    residue = float(np.max(np.abs(traces.imag), initial=0.0))
    if trace_is_real(word) and residue > IMAGINARY_TOLERANCE:
        raise NumericalResidueError(f"Trace of word {word} has imaginary part {residue:.3e} > {IMAGINARY_TOLERANCE}")
    if residue > IMAGINARY_TOLERANCE:
        logger.debug("Discarding imaginary parts up to %.3e for word %s", residue, word)
    method = EstimateMethod.DENSE_MC if backend == "dense" else EstimateMethod.REDUCED_MC
    estimate = MomentEstimate.from_samples(
        traces.real,
        method,
        n=max(specs[label].n for label in labels),
        max_imaginary=residue,
        modes=layout.size,
    )
    logger.info(
        "Monte Carlo moment | word=%s backend=%s samples=%d value=%.6f stderr=%.6f",
        word,
        backend,
        samples,
        estimate.value,
        estimate.stderr,
    )
    return estimate


# ----------------------------
# Exact enumeration
# ----------------------------


def exact_joint_moment_small(
    family: SykFamily,
    word: Word | Sequence[Label],
    *,
    max_terms: Optional[int] = None,
) -> MomentEstimate:
    """
    E[tr(H_w(1) ... H_w(d))] summed exactly over all subset tuples with a
    nonzero coupling expectation: every (label, R) variable must occur an even
    number of times, and E[J^p] comes from the coupling law.
    """
    word = _word(word)
    family.require(word)
    limit = DEFAULT_CAPS.max_exact_terms if max_terms is None else max_terms
    d = len(word)
    specs = {label: family.spec(label) for label in set(word.letters)}
    for spec in specs.values():
        check_enumerable(spec)
    largest = max(spec.term_count for spec in specs.values())
    if largest ** (d / 2) > limit:
        raise CapExceededError(f"exact enumeration binom(n, r)^(d/2) for word {word}", math.ceil(largest ** (d / 2)), limit)
    if d % 2:
        return MomentEstimate.exact(0.0, EstimateMethod.EXACT_SMALL, leaves=0)

    monomials = {
        label: [MajoranaMonomial(support_to_bits(R)) for R in coupling_supports(spec)]
        for label, spec in specs.items()
    }
    laws = {label: spec.law() for label, spec in specs.items()}
    letters = word.letters
    # Gaussian-integer accumulator for sum of weight * i^phase
    acc = [0, 0, 0, 0]
    leaves = 0
    variables: List[Tuple[Label, int]] = []
    counts: List[int] = []
    index_of: Dict[Tuple[Label, int], int] = {}

    def visit(position: int, product: MajoranaMonomial) -> None:
        nonlocal leaves
        remaining = d - position
        odd = sum(c & 1 for c in counts)
        if odd > remaining:
            return
        if position == d:
            if product.bits:
                return
            weight = math.prod(laws[label].moment(c) for (label, _), c in zip(variables, counts))
            acc[product.phase] += weight
            leaves += 1
            return
        label = letters[position]
        if odd == remaining:
            # every remaining letter has to close an odd variable
            candidates = [t for (lab, t), c in zip(variables, counts) if lab == label and c & 1]
        else:
            candidates = range(len(monomials[label]))
        for t in candidates:
            m = monomials[label][t]
            key = (label, t)
            slot = index_of.get(key)
            if slot is None:
                index_of[key] = len(variables)
                variables.append(key)
                counts.append(1)
                visit(position + 1, multiply(product, m))
                counts.pop()
                variables.pop()
                del index_of[key]
            else:
                counts[slot] += 1
                visit(position + 1, multiply(product, m))
                counts[slot] -= 1

    visit(0, MajoranaMonomial.identity())
    total = complex(acc[0] - acc[2], acc[1] - acc[3])
    prefactor = math.prod(hamiltonian_prefactor(specs[x]) for x in letters)
    value = prefactor * total
    if abs(value.imag) > 1e-12:
        logger.warning("Exact moment for word %s has imaginary part %.3e", word, value.imag)
    logger.debug("Exact moment | word=%s leaves=%d value=%.12f", word, leaves, value.real)
    return MomentEstimate.exact(value.real, EstimateMethod.EXACT_SMALL, leaves=leaves, imaginary=value.imag)


# ----------------------------
# Pair-partition formula and limits
# ----------------------------


def partition_overlap_config(family: SykFamily, word: Word, p: PairPartition) -> Tuple[OverlapConfig, int]:
    """
    One independent uniform subset per block of ``p``, drawn from its label's
    domain, with an edge for every crossing pair of blocks; also returns
    sum over crossings of r_i r_j.
    """
    blocks = list(p.pairs)
    block_index = {block: k for k, block in enumerate(blocks)}
    specs = [family.spec(word[e]) for e, _ in blocks]
    edges = []
    sign_exponent = 0
    for v1, v2 in p.crossing_pairs():
        a, b = block_index[v1], block_index[v2]
        edges.append((a, b))
        sign_exponent += specs[a].r * specs[b].r
    cfg = OverlapConfig(tuple(s.domain for s in specs), tuple(s.r for s in specs), tuple(edges))
    return cfg, sign_exponent


def finite_n_pair_moment(
    family: SykFamily,
    word: Word | Sequence[Label],
    rng: np.random.Generator | int | None = None,
    *,
    samples: Optional[int] = None,
    threads: int = 1,
) -> MomentEstimate:
    """
    sum over pi <= ker w of (-1)^(sum_E r_i r_j) E[(-1)^(sum_E |R_u n R_v|)], E the
    crossing block pairs of pi; no matrices are built.
    """
    word = _word(word)
    family.require(word)
    seed = None if rng is None else resolve_seed(rng)
    total = 0.0
    variance = 0.0
    sampled = 0
    partitions = 0
    for k, p in enumerate(pair_partitions_below_kernel(word)):
        partitions += 1
        cfg, sign_exponent = partition_overlap_config(family, word, p)
        sign = -1.0 if sign_exponent % 2 else 1.0
        estimate = exact_or_mc_sign_expectation(
            cfg,
            None if seed is None else derive_generator(seed, "pair-partition", k),
            samples=samples,
            threads=threads,
        )
        total += sign * estimate.value
        variance += estimate.stderr**2
        sampled = max(sampled, estimate.samples)
    return MomentEstimate(
        total,
        math.sqrt(variance),
        sampled,
        EstimateMethod.FINITE_N_FORMULA,
        {"partitions": partitions},
    )


def limit_moment(family: SykFamily, word: Word | Sequence[Label], *, asymptotic: bool = False) -> float:
    """Mixed q-Gaussian moment with q_ij = (-1)^(r_i r_j) exp(-2 lambda_ij)."""
    word = _word(word)
    family.require(word)
    family.check_parities()
    return qgaussian_moment(word, family.q_matrix(asymptotic=asymptotic))


def limit_estimate(family: SykFamily, word: Word | Sequence[Label], *, asymptotic: bool = False) -> MomentEstimate:
    return MomentEstimate.exact(limit_moment(family, word, asymptotic=asymptotic), EstimateMethod.LIMIT_FORMULA)
