from __future__ import annotations

import asyncio
import logging
import time
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.cli.writer import ResultTable
from src.combinatorics.partitions import Word
from src.config.schema import (
    Command,
    ConvergeSection,
    EpsilonSection,
    ExperimentConfig,
    MomentsSection,
    StatsSection,
)
from src.graph.epsilon import EpsilonReport, Graph, all_graphs, check_epsilon_freeness, epsilon_q_matrix
from src.models.estimate import MomentEstimate
from src.stats.overlap import (
    exact_or_mc_sign_expectation,
    falling_factorial_moments_mc,
    poisson_binomial_moment_limit,
    sign_expectation_mc,
    sign_from_falling_factorials,
    sign_limit,
)
from src.syk.model import SykFamily, check_parity_consistency
from src.syk.moments import exact_joint_moment_small, finite_n_pair_moment, limit_estimate, limit_moment, mc_joint_moment
from src.util.rng import derive_generator

if TYPE_CHECKING:
    from src.cli.main import CLIClient

logger = logging.getLogger(__name__)

MOMENT_COLUMNS = ["word", "method", "value", "stderr", "samples", "n"]
CONVERGE_COLUMNS = ["n", "word", "method", "value", "stderr", "samples", "limit", "gap"]
EPSILON_COLUMNS = ["d", "edges", "passed", "commutation_checks", "centered_checks", "failures", "control_failed"]
STATS_COLUMNS = ["quantity", "k", "value", "stderr", "samples", "method", "reference"]


def _timed(columns: List[str], record_timing: bool) -> List[str]:
    return [*columns, "wall_time"] if record_timing else columns


def _estimate(
    method: str,
    family: SykFamily,
    word: Word,
    config: ExperimentConfig,
    samples: int,
    rng: np.random.Generator,
    *,
    asymptotic: bool = False,
) -> MomentEstimate:
    caps = config.runtime_limits().caps
    if method in ("dense-mc", "reduced-mc"):
        return mc_joint_moment(
            family,
            word,
            samples,
            rng,
            backend="dense" if method == "dense-mc" else "reduced",
            threads=config.threads,
            chunk_size=config.chunk_size,
            max_qubits=caps.max_qubits,
            max_subsets=caps.max_subsets,
            max_symbolic_terms=caps.max_symbolic_terms,
        )
    if method == "exact-small":
        return exact_joint_moment_small(family, word, max_terms=caps.max_exact_terms)
    if method == "limit":
        return limit_estimate(family, word, asymptotic=asymptotic)
    if method == "finite-n":
        return finite_n_pair_moment(family, word, rng, samples=samples, threads=config.threads)
    raise ValueError(f"Unknown method '{method}'")


def _word_n(family: SykFamily, word: Word) -> int:
    return max(family.spec(label).n for label in word.labels())


def _edge_text(g: Graph) -> str:
    return ";".join(f"{i}-{j}" for i, j in g.edges())


def mutation_control(g: Graph, q_diag: Sequence[float], max_len: int) -> Optional[bool]:
    """Whether the check fails once q_12 is corrupted to 0.5; None for a single vertex."""
    if g.d < 2:
        return None
    corrupted = epsilon_q_matrix(g, q_diag).with_entry(1, 2, 0.5)
    return not check_epsilon_freeness(g, q_diag, max_len, q_matrix=corrupted).passed


class CLICommands:
    """Runs the four experiment commands and turns their results into tables."""

    def __init__(self, client: Optional["CLIClient"] = None, progress: Optional[Callable[[str], None]] = None) -> None:
        self.client = client
        self.progress = progress or (lambda message: None)

    async def handle(self, command: Command, config: ExperimentConfig) -> ResultTable:
        handlers = {
            "moments": self.cmd_moments,
            "converge": self.cmd_converge,
            "epsilon-check": self.cmd_epsilon_check,
            "stats": self.cmd_stats,
        }
        if command not in handlers:
            raise ValueError(f"Unknown command '{command}'. Available: {', '.join(handlers)}")
        logger.info("Running %s | seed=%d threads=%d config=%s", command, config.seed, config.threads, config.config_hash()[:12])
        table = await asyncio.to_thread(handlers[command], config)
        logger.info("Finished %s | rows=%d", command, len(table.rows))
        return table

    # ----------------------------
    # moments
    # ----------------------------

    def cmd_moments(self, config: ExperimentConfig) -> ResultTable:
        section: MomentsSection = config.section("moments")
        family = section.family.build(section.n)
        table = ResultTable("moments", _timed(MOMENT_COLUMNS, config.record_timing))
        for w_index, letters in enumerate(section.words):
            word = Word(tuple(letters))
            family.require(word)
            for method in section.methods:
                started = time.perf_counter()
                rng = derive_generator(config.seed, "moments", w_index, method)
                estimate = _estimate(method, family, word, config, section.samples, rng, asymptotic=section.asymptotic_limit)
                row = {
                    "word": list(word.letters),
                    "method": estimate.method.value,
                    "value": estimate.value,
                    "stderr": estimate.stderr,
                    "samples": estimate.samples,
                    "n": _word_n(family, word),
                }
                if config.record_timing:
                    row["wall_time"] = time.perf_counter() - started
                table.add(**row)
                self.progress(f"{word} {method}: {estimate.value:.6f} +/- {estimate.stderr:.6f}")
        return table

    # ----------------------------
    # converge
    # ----------------------------

    def cmd_converge(self, config: ExperimentConfig) -> ResultTable:
        section: ConvergeSection = config.section("converge")
        families = [section.family.build(n) for n in section.n_values]
        check_parity_consistency(families)
        table = ResultTable("converge", _timed(CONVERGE_COLUMNS, config.record_timing))
        gaps: Dict[str, List[float]] = {}
        for n, family in zip(section.n_values, families):
            for w_index, letters in enumerate(section.words):
                word = Word(tuple(letters))
                family.require(word)
                started = time.perf_counter()
                rng = derive_generator(config.seed, "converge", n, w_index)
                estimate = _estimate(section.estimator, family, word, config, section.samples, rng)
                limit = limit_moment(family, word, asymptotic=True)
                gap = abs(estimate.value - limit)
                gaps.setdefault(str(word), []).append(gap)
                row = {
                    "n": n,
                    "word": list(word.letters),
                    "method": estimate.method.value,
                    "value": estimate.value,
                    "stderr": estimate.stderr,
                    "samples": estimate.samples,
                    "limit": limit,
                    "gap": gap,
                }
                if config.record_timing:
                    row["wall_time"] = time.perf_counter() - started
                table.add(**row)
                self.progress(f"n={n} {word}: gap {gap:.6f}")
        table.summary = {"final_gap": {w: g[-1] for w, g in gaps.items()}}
        return table

    # ----------------------------
    # epsilon-check
    # ----------------------------

    def cmd_epsilon_check(self, config: ExperimentConfig) -> ResultTable:
        section: EpsilonSection = config.section("epsilon-check")
        if section.graph is not None:
            graphs = [section.graph.build()]
        else:
            graphs = [g for d in range(1, section.all_graphs_up_to + 1) for g in all_graphs(d)]
        table = ResultTable("epsilon-check", _timed(EPSILON_COLUMNS, config.record_timing))
        all_passed = True
        controls_failed = True
        for g in graphs:
            started = time.perf_counter()
            q_diag = section.q_diag if section.q_diag is not None else [0.0] * g.d
            report: EpsilonReport = check_epsilon_freeness(g, q_diag, section.max_len)
            control = mutation_control(g, q_diag, section.max_len) if section.mutation_control else None
            all_passed &= report.passed
            if control is False:
                controls_failed = False
            row = {
                "d": g.d,
                "edges": _edge_text(g),
                "passed": report.passed,
                "commutation_checks": report.commutation_checks,
                "centered_checks": report.centered_checks,
                "failures": report.failure_count,
                "control_failed": "" if control is None else control,
            }
            if config.record_timing:
                row["wall_time"] = time.perf_counter() - started
            table.add(**row)
            self.progress(f"d={g.d} edges=[{_edge_text(g)}] passed={report.passed}")
        table.summary = {"passed": all_passed, "graphs": len(graphs)}
        if section.mutation_control:
            table.summary["mutation_controls_failed"] = controls_failed
        return table

    # ----------------------------
    # stats
    # ----------------------------

    def cmd_stats(self, config: ExperimentConfig) -> ResultTable:
        section: StatsSection = config.section("stats")
        cfg = section.build()
        caps = config.runtime_limits().caps
        lambdas = cfg.edge_lambdas()
        table = ResultTable("stats", STATS_COLUMNS)
        moments: Optional[List[MomentEstimate]] = None

        def add(quantity: str, k: Optional[int], estimate: MomentEstimate, reference: float) -> None:
            table.add(
                quantity=quantity,
                k="" if k is None else k,
                value=estimate.value,
                stderr=estimate.stderr,
                samples=estimate.samples,
                method=estimate.method.value,
                reference=reference,
            )

        for quantity in section.quantities:
            rng = derive_generator(config.seed, "stats", quantity)
            if quantity == "sign":
                estimate = sign_expectation_mc(cfg, section.samples, rng, chunk_size=config.chunk_size, threads=config.threads)
                add(quantity, None, estimate, sign_limit(lambdas))
            elif quantity == "exact-sign":
                estimate = exact_or_mc_sign_expectation(
                    cfg,
                    rng,
                    samples=section.samples,
                    brute_force_cap=caps.max_brute_force_pairs,
                    chunk_size=config.chunk_size,
                    threads=config.threads,
                )
                add(quantity, None, estimate, sign_limit(lambdas))
            else:
                if moments is None:
                    moments = falling_factorial_moments_mc(
                        cfg,
                        section.max_k,
                        section.samples,
                        derive_generator(config.seed, "stats", "falling-factorial"),
                        cap=caps.max_falling_factorial_order,
                        chunk_size=config.chunk_size,
                        threads=config.threads,
                    )
                if quantity == "falling-factorial":
                    for k, estimate in enumerate(moments):
                        add(quantity, k, estimate, poisson_binomial_moment_limit(lambdas, k))
                else:
                    add(quantity, section.max_k, sign_from_falling_factorials(moments), sign_limit(lambdas))
            self.progress(f"{quantity} done")
        table.summary = {"lambda_hat": lambdas}
        return table
