from __future__ import annotations

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from src.combinatorics.partitions import Label, QMatrix
from src.syk.model import SykFamily, SykModelSpec
from src.util.errors import ConfigError

logger = logging.getLogger(__name__)


def _default_labels(k: int, labels: Optional[Sequence[Label]]) -> List[Label]:
    chosen = list(range(1, k + 1)) if labels is None else list(labels)
    if len(chosen) != k:
        raise ConfigError(f"Expected {k} labels, got {len(chosen)}")
    return chosen


def build_weighted_overlap_sets(
    a: Sequence[Sequence[int]] | np.ndarray,
    n: int,
    r: Sequence[int],
    *,
    labels: Optional[Sequence[Label]] = None,
    coupling_law: str = "gaussian",
) -> SykFamily:
    """
    Domains of size n with |A_i n A_j| = a_ij: each pair i < j gets its own block
    of a_ij fresh indices, then every domain is padded with private indices.
    Requires sum over j != i of a_ij <= n.
    """
    overlaps = np.asarray(a, dtype=np.int64)
    k = overlaps.shape[0]
    if overlaps.shape != (k, k) or not np.array_equal(overlaps, overlaps.T):
        raise ConfigError("Overlap matrix must be square and symmetric")
    if len(r) != k:
        raise ConfigError(f"Expected {k} interaction lengths, got {len(r)}")
    names = _default_labels(k, labels)
    off_diagonal = overlaps.copy()
    np.fill_diagonal(off_diagonal, 0)
    if (off_diagonal < 0).any():
        raise ConfigError("Overlap sizes must be non-negative")
    for i, load in enumerate(off_diagonal.sum(axis=1)):
        if load > n:
            raise ConfigError(f"Model {names[i]!r} would share {load} indices but its domain has only {n}")

    domains: List[List[int]] = [[] for _ in range(k)]
    next_index = 1
    for i in range(k):
        for j in range(i + 1, k):
            shared = range(next_index, next_index + int(off_diagonal[i, j]))
            domains[i].extend(shared)
            domains[j].extend(shared)
            next_index += len(shared)
    for i in range(k):
        padding = n - len(domains[i])
        domains[i].extend(range(next_index, next_index + padding))
        next_index += padding
    specs = tuple(SykModelSpec(names[i], tuple(domains[i]), int(r[i]), coupling_law) for i in range(k))
    logger.debug("Weighted overlap sets | k=%d n=%d indices=%d", k, n, next_index - 1)
    return SykFamily(specs)


def check_sign_realizability(Q: QMatrix, parities: Optional[Mapping[Label, int]] = None) -> Dict[Label, int]:
    """
    Parities of r_k compatible with the signs of Q: q_ij < 0 needs r_i, r_j odd,
    q_ij > 0 needs one of them even, q = 0 constrains nothing. Returns the given
    parities after checking them, or the assignment making every free label even.
    """
    labels = Q.labels
    forced: Dict[Label, int] = {}

    def force(label: Label, parity: int, reason: str) -> None:
        if forced.get(label, parity) != parity:
            raise ConfigError(f"Label {label!r} cannot have r both even and odd ({reason})")
        forced[label] = parity

    for i in labels:
        diag = Q.q(i, i)
        if diag < 0:
            force(i, 1, f"q[{i!r},{i!r}] < 0")
        elif diag > 0:
            force(i, 0, f"q[{i!r},{i!r}] > 0")
    for x, i in enumerate(labels):
        for j in labels[x + 1:]:
            if Q.q(i, j) < 0:
                force(i, 1, f"q[{i!r},{j!r}] < 0")
                force(j, 1, f"q[{i!r},{j!r}] < 0")
    assignment = {label: forced.get(label, 0) for label in labels}
    if parities is not None:
        for label in labels:
            if label not in parities:
                raise ConfigError(f"No parity given for label {label!r}")
            if label in forced and parities[label] % 2 != forced[label]:
                raise ConfigError(f"Parity {parities[label] % 2} of label {label!r} contradicts the signs of Q")
        assignment = {label: parities[label] % 2 for label in labels}
    for x, i in enumerate(labels):
        for j in labels[x + 1:]:
            if Q.q(i, j) > 0 and assignment[i] == assignment[j] == 1:
                raise ConfigError(f"q[{i!r},{j!r}] > 0 but both r are odd")
    return assignment


def overlaps_for_q(Q: QMatrix, n: int, r: Sequence[int]) -> np.ndarray:
    """
    Overlap sizes giving q_ij = (-1)^(r_i r_j) exp(-2 r_i r_j a_ij / n^2):
    a_ij = round(-ln|q_ij| n^2 / (2 r_i r_j)). Pairs with q_ij = 0 share an equal
    split of what the other pairs leave free. Diagonal entries are ignored.
    """
    labels = Q.labels
    k = len(labels)
    if len(r) != k:
        raise ConfigError(f"Expected {k} interaction lengths, got {len(r)}")
    check_sign_realizability(Q, {label: int(r[x]) for x, label in enumerate(labels)})
    a = np.zeros((k, k), dtype=np.int64)
    zero_pairs = []
    for i in range(k):
        for j in range(i + 1, k):
            q = abs(Q.q(labels[i], labels[j]))
            if q == 0.0:
                zero_pairs.append((i, j))
                continue
            if r[i] == 0 or r[j] == 0:
                if q != 1.0:
                    raise ConfigError(f"|q[{labels[i]!r},{labels[j]!r}]| must be 1 when an interaction length is 0")
                continue
            a[i, j] = a[j, i] = round(-math.log(q) * n * n / (2 * r[i] * r[j]))
    free = n - a.sum(axis=1)
    degree = np.zeros(k, dtype=np.int64)
    for i, j in zero_pairs:
        degree[i] += 1
        degree[j] += 1
    for i, j in zero_pairs:
        a[i, j] = a[j, i] = max(0, min(free[i] // degree[i], free[j] // degree[j]))
    for i in range(k):
        if a[i].sum() - a[i, i] > n:
            raise ConfigError(f"Label {labels[i]!r} needs {a[i].sum() - a[i, i]} shared indices but n={n}")
    return a
