from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb as sp_comb
from scipy.stats import hypergeom

from src.config.defaults import DEFAULT_CAPS, DEFAULT_SAMPLING
from src.models.estimate import EstimateMethod, MomentEstimate
from src.util.errors import CapExceededError, ConfigError
from src.util.rng import derive_generator, resolve_seed
from src.util.scheduler import sample_in_chunks

logger = logging.getLogger(__name__)

# rational arithmetic is used up to this population size
EXACT_POPULATION_LIMIT = 64

Edge = Tuple[int, int]


# ----------------------------
# Configuration
# ----------------------------


@dataclass(frozen=True)
class OverlapConfig:
    """
    Independent uniform subsets R_i of size sizes[i] drawn from domains[i];
    the statistic of interest is sum over (i, j) in edges of |R_i n R_j|.
    """

    domains: Tuple[Tuple[int, ...], ...]
    sizes: Tuple[int, ...]
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self) -> None:
        domains = tuple(tuple(sorted(set(d))) for d in self.domains)
        object.__setattr__(self, "domains", domains)
        object.__setattr__(self, "sizes", tuple(int(r) for r in self.sizes))
        object.__setattr__(self, "edges", tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges)))
        if len(self.sizes) != len(domains):
            raise ConfigError(f"Got {len(domains)} domains but {len(self.sizes)} subset sizes")
        for i, (domain, r) in enumerate(zip(domains, self.sizes)):
            if not 0 <= r <= len(domain):
                raise ConfigError(f"Subset size {r} for domain {i} outside 0..{len(domain)}")
        for i, j in self.edges:
            if i == j or not (0 <= i < len(domains) and 0 <= j < len(domains)):
                raise ConfigError(f"Edge ({i}, {j}) does not join two distinct domains")
        if len(set(self.edges)) != len(self.edges):
            raise ConfigError(f"Duplicate edges in {self.edges}")

    def overlap(self, i: int, j: int) -> int:
        return len(set(self.domains[i]) & set(self.domains[j]))

    def lambda_hat(self, i: int, j: int) -> float:
        """r_i r_j |A_i n A_j| / (|A_i| |A_j|)."""
        denominator = len(self.domains[i]) * len(self.domains[j])
        if denominator == 0:
            return 0.0
        return self.sizes[i] * self.sizes[j] * self.overlap(i, j) / denominator

    def edge_lambdas(self) -> List[float]:
        return [self.lambda_hat(i, j) for i, j in self.edges]

    def edges_vertex_disjoint(self) -> bool:
        seen: set[int] = set()
        for i, j in self.edges:
            if i in seen or j in seen:
                return False
            seen.update((i, j))
        return True


def single_edge_config(n1: int, n2: int, a: int, r1: int, r2: int) -> OverlapConfig:
    """A_1 = {1..n1}, A_2 the n2 indices starting a below the end of A_1."""
    if not 0 <= a <= min(n1, n2):
        raise ConfigError(f"Overlap {a} outside 0..{min(n1, n2)}")
    first = tuple(range(1, n1 + 1))
    start = n1 - a + 1
    second = tuple(range(start, start + n2))
    return OverlapConfig((first, second), (r1, r2), ((0, 1),))


def half_interaction_config(n: int) -> OverlapConfig:
    """A_1 = {1..n}, A_2 = {n..2n-1}, r = n/2: domains meeting in a single index."""
    if n < 2 or n % 2:
        raise ConfigError(f"The half-interaction configuration needs an even n >= 2, got {n}")
    return OverlapConfig((tuple(range(1, n + 1)), tuple(range(n, 2 * n))), (n // 2, n // 2), ((0, 1),))


# ----------------------------
# Subset sampling
# ----------------------------


def sample_uniform_subset(domain: Sequence[int], r: int, rng: np.random.Generator) -> Tuple[int, ...]:
    """Uniform r-subset by a partial Fisher-Yates shuffle; swaps are kept in a sparse map."""
    items = sorted(domain)
    n = len(items)
    if not 0 <= r <= n:
        raise ValueError(f"Cannot draw {r} elements from a domain of size {n}")
    swaps: Dict[int, int] = {}
    chosen: List[int] = []
    for k in range(r):
        j = int(rng.integers(k, n))
        at_j = swaps.get(j, j)
        swaps[j] = swaps.get(k, k)
        chosen.append(items[at_j])
    return tuple(sorted(chosen))


def sample_subset_positions(n: int, r: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    ``count`` independent uniform r-subsets of range(n) as a (count, r) array.
    Sparse draws use rejection on iid positions; dense draws take the r smallest
    of n iid uniform keys, in row batches to bound memory.
    """
    if not 0 <= r <= n:
        raise ValueError(f"Cannot draw {r} elements from a domain of size {n}")
    if r == 0:
        return np.empty((count, 0), dtype=np.int64)
    if r == n:
        return np.broadcast_to(np.arange(n, dtype=np.int64), (count, n)).copy()
    if r * (r - 1) <= 3 * n:
        out = np.sort(rng.integers(0, n, size=(count, r)), axis=1)
        bad = np.flatnonzero(np.any(np.diff(out, axis=1) == 0, axis=1))
        while bad.size:
            redraw = np.sort(rng.integers(0, n, size=(bad.size, r)), axis=1)
            out[bad] = redraw
            bad = bad[np.any(np.diff(redraw, axis=1) == 0, axis=1)]
        return out
    rows_per_batch = max(1, 4_000_000 // n)
    parts = []
    for start in range(0, count, rows_per_batch):
        rows = min(rows_per_batch, count - start)
        keys = rng.random((rows, n))
        parts.append(np.argpartition(keys, r - 1, axis=1)[:, :r])
    return np.concatenate(parts)


def intersection_sizes(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Row-wise |R_1 n R_2| for arrays of distinct-per-row indices."""
    if first.shape[1] == 0 or second.shape[1] == 0:
        return np.zeros(first.shape[0], dtype=np.int64)
    merged = np.sort(np.concatenate([first, second], axis=1), axis=1)
    return np.count_nonzero(merged[:, 1:] == merged[:, :-1], axis=1)


def common_element_present(subsets: Sequence[np.ndarray]) -> np.ndarray:
    """Row-wise flag: some index lies in every one of the subsets."""
    k = len(subsets)
    merged = np.sort(np.concatenate(subsets, axis=1), axis=1)
    if merged.shape[1] < k:
        return np.zeros(merged.shape[0], dtype=bool)
    return np.any(merged[:, k - 1:] == merged[:, : merged.shape[1] - k + 1], axis=1)


def _draw_subsets(cfg: OverlapConfig, count: int, rng: np.random.Generator) -> List[np.ndarray]:
    out = []
    for domain, r in zip(cfg.domains, cfg.sizes):
        positions = sample_subset_positions(len(domain), r, count, rng)
        out.append(np.asarray(domain, dtype=np.int64)[positions])
    return out


def _edge_counts(cfg: OverlapConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, |E|) intersection sizes per sample and edge."""
    subsets = _draw_subsets(cfg, count, rng)
    if not cfg.edges:
        return np.zeros((count, 0), dtype=np.int64)
    return np.stack([intersection_sizes(subsets[i], subsets[j]) for i, j in cfg.edges], axis=1)


def _sampled(
    cfg: OverlapConfig,
    samples: int,
    rng: np.random.Generator | int,
    stream: str,
    statistic: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    chunk_size: Optional[int],
    threads: int,
) -> np.ndarray:
    seed = resolve_seed(rng)

    def draw(chunk_id: int, count: int) -> np.ndarray:
        gen = derive_generator(seed, stream, chunk_id)
        return statistic(_edge_counts(cfg, count, gen), gen)

    return sample_in_chunks(
        samples,
        draw,
        chunk_size=chunk_size or DEFAULT_SAMPLING.chunk_size,
        threads=threads,
    )


# ----------------------------
# Monte Carlo estimators
# ----------------------------


def sign_expectation_mc(
    cfg: OverlapConfig,
    samples: int,
    rng: np.random.Generator | int,
    *,
    chunk_size: Optional[int] = None,
    threads: int = 1,
) -> MomentEstimate:
    """Estimate E[(-1)^(sum over edges of |R_i n R_j|)]."""
    if not cfg.edges:
        return MomentEstimate(1.0, 0.0, samples, EstimateMethod.REDUCED_MC, {"edges": 0})
    values = _sampled(
        cfg,
        samples,
        rng,
        "overlap-sign",
        lambda counts, _: 1.0 - 2.0 * (counts.sum(axis=1) & 1),
        chunk_size,
        threads,
    )
    estimate = MomentEstimate.from_samples(values, EstimateMethod.REDUCED_MC, edges=len(cfg.edges))
    logger.debug("Sign expectation | edges=%d samples=%d value=%.6f", len(cfg.edges), samples, estimate.value)
    return estimate


def _check_order(k: int, cap: Optional[int]) -> None:
    limit = DEFAULT_CAPS.max_falling_factorial_order if cap is None else cap
    if not 0 <= k <= limit:
        raise CapExceededError("falling factorial order", k, limit)


def falling_factorial_moment_mc(
    cfg: OverlapConfig,
    k: int,
    samples: int,
    rng: np.random.Generator | int,
    *,
    cap: Optional[int] = None,
    chunk_size: Optional[int] = None,
    threads: int = 1,
) -> MomentEstimate:
    """Estimate E[binom(X, k)] for X = sum over edges of |R_i n R_j|, i.e. E[(X)_k] / k!."""
    _check_order(k, cap)
    if k == 0:
        return MomentEstimate(1.0, 0.0, samples, EstimateMethod.REDUCED_MC, {"k": 0})
    values = _sampled(
        cfg,
        samples,
        rng,
        "overlap-falling-factorial",
        lambda counts, _: sp_comb(counts.sum(axis=1), k),
        chunk_size,
        threads,
    )
    return MomentEstimate.from_samples(values, EstimateMethod.REDUCED_MC, k=k)


def falling_factorial_moments_mc(
    cfg: OverlapConfig,
    max_k: int,
    samples: int,
    rng: np.random.Generator | int,
    *,
    cap: Optional[int] = None,
    chunk_size: Optional[int] = None,
    threads: int = 1,
) -> List[MomentEstimate]:
    """E[binom(X, k)] for k = 0..max_k from one shared set of draws."""
    _check_order(max_k, cap)
    values = _sampled(
        cfg,
        samples,
        rng,
        "overlap-falling-factorial",
        lambda counts, _: np.stack([sp_comb(counts.sum(axis=1), k) for k in range(max_k + 1)], axis=1),
        chunk_size,
        threads,
    )
    return [MomentEstimate.from_samples(values[:, k], EstimateMethod.REDUCED_MC, k=k) for k in range(max_k + 1)]


def sign_from_falling_factorials(estimates: Sequence[MomentEstimate]) -> MomentEstimate:
    """
    (-1)^X = sum_k (-2)^k binom(X, k); the truncated series of binomial-moment
    estimates, with the errors combined as if independent.
    """
    value = math.fsum((-2.0) ** k * e.value for k, e in enumerate(estimates))
    stderr = math.sqrt(math.fsum((2.0**k * e.stderr) ** 2 for k, e in enumerate(estimates)))
    samples = max((e.samples for e in estimates), default=0)
    return MomentEstimate(value, stderr, samples, EstimateMethod.REDUCED_MC, {"orders": len(estimates)})


def pair_disjointness_probability_mc(
    cfg: OverlapConfig,
    edge_pair: Tuple[Edge, Edge],
    samples: int,
    rng: np.random.Generator | int,
    *,
    chunk_size: Optional[int] = None,
    threads: int = 1,
) -> MomentEstimate:
    """Estimate P(X_e1 n X_e2 != empty) for two distinct edges, X_ij = R_i n R_j."""
    first, second = (tuple(sorted(e)) for e in edge_pair)
    if first == second:
        raise ValueError(f"Edges must be distinct, got {first} twice")
    labels = sorted(set(first) | set(second))
    for label in labels:
        if not 0 <= label < len(cfg.domains):
            raise ConfigError(f"Edge label {label} does not name a domain")
    common = set.intersection(*(set(cfg.domains[i]) for i in labels))
    if not common:
        return MomentEstimate(0.0, 0.0, samples, EstimateMethod.REDUCED_MC, {"shared_indices": 0})
    seed = resolve_seed(rng)

    def draw(chunk_id: int, count: int) -> np.ndarray:
        gen = derive_generator(seed, "overlap-collision", chunk_id)
        subsets = _draw_subsets(cfg, count, gen)
        return common_element_present([subsets[i] for i in labels]).astype(float)

    values = sample_in_chunks(
        samples,
        draw,
        chunk_size=chunk_size or DEFAULT_SAMPLING.chunk_size,
        threads=threads,
    )
    return MomentEstimate.from_samples(values, EstimateMethod.REDUCED_MC, shared_indices=len(common))


# ----------------------------
# Exact values
# ----------------------------


def _check_domain(p: int, q: int, m: int) -> None:
    if m < 0 or not (0 <= p <= m and 0 <= q <= m):
        raise ValueError(f"F(p, q, m) needs 0 <= p, q <= m, got p={p}, q={q}, m={m}")


def F_exact(p: int, q: int, m: int) -> Fraction:
    """sum_k (-1)^k C(p, k) C(m-p, q-k) / C(m, q) as an exact rational."""
    _check_domain(p, q, m)
    total = sum((-1) ** k * math.comb(p, k) * math.comb(m - p, q - k) for k in range(0, min(p, q) + 1))
    return Fraction(total, math.comb(m, q))


def F(p: int, q: int, m: int) -> float:
    """E[(-1)^|V_1 n V_2|] for uniform subsets of sizes p and q of an m-set."""
    _check_domain(p, q, m)
    if m <= EXACT_POPULATION_LIMIT:
        return float(F_exact(p, q, m))
    lo, hi = max(0, p + q - m), min(p, q)
    ks = np.arange(lo, hi + 1)
    weights = hypergeom.pmf(ks, m, p, q)
    return math.fsum(np.where(ks % 2 == 0, weights, -weights).tolist())


def F_bound(p: int, q: int, m: int) -> float:
    """exp(-a_p a_q / (2m)) with a_x = min(x, m - x)."""
    _check_domain(p, q, m)
    if m == 0:
        return 1.0
    a_p, a_q = min(p, m - p), min(q, m - q)
    return math.exp(-a_p * a_q / (2 * m))


def F_bound_holds(p: int, q: int, m: int) -> bool:
    """Exact comparison of the rational F against the float bound."""
    return F_exact(p, q, m) <= Fraction(F_bound(p, q, m))


def hypergeom_pmf_exact(t: int, population: int, successes: int, draws: int) -> Fraction:
    if t < 0 or t > successes or draws - t > population - successes or t > draws:
        return Fraction(0)
    return Fraction(
        math.comb(successes, t) * math.comb(population - successes, draws - t),
        math.comb(population, draws),
    )


def _check_pair(n1: int, n2: int, a: int, r1: int, r2: int) -> None:
    if not 0 <= a <= min(n1, n2):
        raise ValueError(f"Overlap a={a} outside 0..min(n1, n2)={min(n1, n2)}")
    if not (0 <= r1 <= n1 and 0 <= r2 <= n2):
        raise ValueError(f"Subset sizes r1={r1}, r2={r2} must not exceed n1={n1}, n2={n2}")


def exact_pair_sign_expectation_fraction(n1: int, n2: int, a: int, r1: int, r2: int) -> Fraction:
    """
    E[(-1)^|R_1 n R_2|] conditioning on t = |R_1 n A_1 n A_2| ~ Hypergeom(n1, a, r1):
    sum_t P(t) F(t, r2, n2).
    """
    _check_pair(n1, n2, a, r1, r2)
    return sum(
        (hypergeom_pmf_exact(t, n1, a, r1) * F_exact(t, r2, n2) for t in range(0, min(a, r1) + 1)),
        Fraction(0),
    )


def exact_pair_sign_expectation(n1: int, n2: int, a: int, r1: int, r2: int) -> float:
    _check_pair(n1, n2, a, r1, r2)
    if a == 0 or r1 == 0 or r2 == 0:
        return 1.0
    if max(n1, n2) <= EXACT_POPULATION_LIMIT:
        return float(exact_pair_sign_expectation_fraction(n1, n2, a, r1, r2))
    ts = np.arange(max(0, r1 - (n1 - a)), min(a, r1) + 1)
    weights = hypergeom.pmf(ts, n1, a, r1)
    terms = [float(w) * F(int(t), r2, n2) for t, w in zip(ts, weights)]
    return math.fsum(terms)


def _subset_masks(domain: Sequence[int], r: int, position: Dict[int, int]) -> List[int]:
    return [sum(1 << position[x] for x in subset) for subset in combinations(domain, r)]


def _enumeration_size(cfg: OverlapConfig) -> int:
    return math.prod(math.comb(len(d), r) for d, r in zip(cfg.domains, cfg.sizes))


def brute_force_sign_expectation(cfg: OverlapConfig, *, cap: Optional[int] = None) -> Fraction:
    """Exhaustive E[(-1)^(sum over edges |R_i n R_j|)] over every tuple of subsets."""
    limit = DEFAULT_CAPS.max_brute_force_pairs if cap is None else cap
    total_tuples = _enumeration_size(cfg)
    if total_tuples > limit:
        raise CapExceededError("brute-force subset tuples", total_tuples, limit)
    if not cfg.edges:
        return Fraction(1)
    union = sorted(set().union(*map(set, cfg.domains)))
    position = {x: k for k, x in enumerate(union)}
    masks = [_subset_masks(d, r, position) for d, r in zip(cfg.domains, cfg.sizes)]
    if len(union) <= 64:
        grids = np.meshgrid(*(np.array(m, dtype=np.uint64) for m in masks), indexing="ij")
        flat = [g.ravel() for g in grids]
        parity = np.zeros(flat[0].shape, dtype=np.int64)
        for i, j in cfg.edges:
            parity ^= np.bitwise_count(flat[i] & flat[j]).astype(np.int64) & 1
        odd = int(parity.sum())
    else:
        odd = sum(_tuple_parity(choice, cfg.edges) for choice in product(*masks))
    return Fraction(total_tuples - 2 * odd, total_tuples)


def _tuple_parity(choice: Tuple[int, ...], edges: Sequence[Edge]) -> int:
    return sum((choice[i] & choice[j]).bit_count() for i, j in edges) & 1


def brute_force_pair_sign_expectation(n1: int, n2: int, a: int, r1: int, r2: int, *, cap: Optional[int] = None) -> Fraction:
    _check_pair(n1, n2, a, r1, r2)
    return brute_force_sign_expectation(single_edge_config(n1, n2, a, r1, r2), cap=cap)


def exact_or_mc_sign_expectation(
    cfg: OverlapConfig,
    rng: np.random.Generator | int | None = None,
    *,
    samples: Optional[int] = None,
    brute_force_cap: Optional[int] = None,
    chunk_size: Optional[int] = None,
    threads: int = 1,
) -> MomentEstimate:
    """
    Exact value when one is available: 1 without edges, the conditioning formula
    for one edge or for edges sharing no domain, exhaustive enumeration when it
    fits the cap. Monte Carlo otherwise.
    """
    if not cfg.edges:
        return MomentEstimate.exact(1.0, EstimateMethod.EXACT_SMALL, route="empty")
    if cfg.edges_vertex_disjoint():
        value = 1.0
        for i, j in cfg.edges:
            value *= exact_pair_sign_expectation(
                len(cfg.domains[i]), len(cfg.domains[j]), cfg.overlap(i, j), cfg.sizes[i], cfg.sizes[j]
            )
        return MomentEstimate.exact(value, EstimateMethod.EXACT_SMALL, route="closed-form")
    limit = DEFAULT_CAPS.max_brute_force_pairs if brute_force_cap is None else brute_force_cap
    if _enumeration_size(cfg) <= limit:
        return MomentEstimate.exact(float(brute_force_sign_expectation(cfg, cap=limit)), EstimateMethod.EXACT_SMALL, route="enumeration")
    if rng is None:
        raise ValueError("A random generator or seed is required when no exact route applies")
    count = samples or DEFAULT_SAMPLING.samples
    logger.info("Sign expectation falls back to Monte Carlo | edges=%d samples=%d", len(cfg.edges), count)
    return sign_expectation_mc(cfg, count, rng, chunk_size=chunk_size, threads=threads)


# ----------------------------
# Limits
# ----------------------------


def compositions(k: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Weak compositions of k into ``parts`` non-negative parts."""
    if parts == 0:
        if k == 0:
            yield ()
        return
    if parts == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in compositions(k - first, parts - 1):
            yield (first, *rest)


def poisson_binomial_moment_limit(lambdas: Sequence[float], k: int) -> float:
    """sum over k_1 + ... + k_E = k of prod lambda_e^k_e / k_e!, the binomial moment of a Poisson sum."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return math.fsum(
        math.prod(lam**ke / math.factorial(ke) for lam, ke in zip(lambdas, ks))
        for ks in compositions(k, len(lambdas))
    )


def sign_limit(lambdas: Sequence[float]) -> float:
    """prod exp(-2 lambda_e), with exp(-inf) = 0."""
    total = math.fsum(lambdas) if all(math.isfinite(x) for x in lambdas) else math.inf
    return 0.0 if math.isinf(total) else math.exp(-2.0 * total)
