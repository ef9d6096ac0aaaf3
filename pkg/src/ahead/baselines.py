"""Comparison estimators: a complete hierarchy (HIO), Haar coefficients (DHT)
and the uniform guess."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fo
from .data import partition_users
from .errors import ConfigurationError, InputError
from .regions import Box, Interval, Region
from .tree import exact_log, norm_sub, pad_domain


def _check_values(values, side: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise InputError("expected a 1-d vector of values")
    if arr.size and (arr.min() < 0 or arr.max() >= side):
        raise InputError(f"values must lie in [0, {side})")
    return arr


def _estimate(labels: np.ndarray, cfg: fo.OracleConfig, rng: np.random.Generator,
              per_user: bool, seed: int | None, user_ids: np.ndarray) -> fo.FrequencyEstimate:
    if per_user:
        return fo.aggregate(np.asarray(fo.perturb_users(labels, cfg, seed, user_ids)), cfg)
    return fo.simulate(np.bincount(labels, minlength=cfg.domain_size), cfg, rng)


def _groups(n: int, c: int, rng: np.random.Generator) -> np.ndarray:
    assignment = partition_users(n, c, rng)
    sizes = np.bincount(assignment, minlength=c)
    if (sizes == 0).any():
        raise ConfigurationError(f"user group {int(np.argmin(sizes))} is empty")
    return assignment


def _check_query(query: Interval, side: int) -> None:
    if not Interval(0, side - 1).contains(query):
        raise InputError(f"query {query} outside domain [0, {side - 1}]")


# ------------------------------------------------------------------- HIO


@dataclass(eq=False)
class HioTree:
    """Per-level estimates of a complete B-ary tree; ``levels[l - 1]`` has B^l entries."""

    fanout: int
    domain_size: int
    levels: list[np.ndarray]
    variances: list[float]
    n_reports: list[int]

    @property
    def height(self) -> int:
        return len(self.levels)


def hio_build(user_values, epsilon: float, domain_size: int, rng: np.random.Generator,
              fanout: int = 5, *, per_user: bool = False, seed: int | None = None) -> HioTree:
    side = pad_domain(domain_size, fanout)
    h = exact_log(side, fanout)
    values = _check_values(user_values, side)
    assignment = _groups(len(values), h, rng)
    if per_user and seed is None:
        seed = int(rng.integers(2**63))
    levels, variances, reports = [], [], []
    for lvl in range(1, h + 1):
        members = np.flatnonzero(assignment == lvl - 1)
        cfg = fo.OracleConfig(epsilon, fanout ** lvl, fo.Mechanism.OUE)
        labels = values[members] // (side // fanout ** lvl)
        est = _estimate(labels, cfg, rng, per_user, seed, members)
        levels.append(norm_sub(est.values))
        variances.append(est.variance)
        reports.append(est.n_reports)
    return HioTree(fanout, side, levels, variances, reports)


def hio_cover(tree: HioTree, query: Interval) -> list[tuple[int, int]]:
    """(level, index) pairs of the fewest B-adic intervals tiling ``query``."""
    _check_query(query, tree.domain_size)
    b, side = tree.fanout, tree.domain_size
    out: list[tuple[int, int]] = []

    def visit(lvl: int, idx: int) -> None:
        w = side // b ** lvl
        node = Interval(idx * w, (idx + 1) * w - 1)
        if query.contains(node):
            out.append((lvl, idx))
        elif node.overlaps(query):
            for k in range(b):
                visit(lvl + 1, idx * b + k)

    for k in range(b):
        visit(1, k)
    return out


def hio_answer(tree: HioTree, query: Interval) -> float:
    total = sum(tree.levels[lvl - 1][idx] for lvl, idx in hio_cover(tree, query))
    return min(1.0, max(0.0, float(total)))


# ------------------------------------------------------------------- DHT


def haar_forward(freqs) -> tuple[float, list[np.ndarray]]:
    """Averaging Haar transform of a length-2^h vector.

    Returns the mean and, for levels 0..h-1, one detail per node equal to
    (left-half sum - right-half sum) / node length.
    """
    f = np.asarray(freqs, dtype=float)
    h = exact_log(len(f), 2)
    if h is None or h < 1:
        raise InputError("Haar transform needs a length that is a power of 2")
    details: list[np.ndarray] = []
    means = f
    for _ in range(h):
        left, right = means[0::2], means[1::2]
        details.append((left - right) / 2)
        means = (left + right) / 2
    details.reverse()
    return float(means[0]), details


def haar_inverse(average: float, details: list[np.ndarray]) -> np.ndarray:
    means = np.array([average])
    for d in details:
        means = np.column_stack([means + d, means - d]).ravel()
    return means


@dataclass(eq=False)
class HaarEstimate:
    domain_size: int
    average: float
    details: list[np.ndarray]
    variances: list[float]
    n_reports: list[int]

    def histogram(self) -> np.ndarray:
        return haar_inverse(self.average, self.details)


def dht_build(user_values, epsilon: float, domain_size: int, rng: np.random.Generator, *,
              per_user: bool = False, seed: int | None = None) -> HaarEstimate:
    """One group for the average and one per detail level.

    A level-l user reports, through OUE, which (node, sign) pair its value
    touches: node ``x // L`` and sign + for the left half, where L is the node
    length.  The detail is then (f(node,+) - f(node,-)) / L.  The average group
    reports which top-level half holds its value.
    """
    side = pad_domain(domain_size, 2)
    h = exact_log(side, 2)
    values = _check_values(user_values, side)
    assignment = _groups(len(values), h + 1, rng)
    if per_user and seed is None:
        seed = int(rng.integers(2**63))

    members = np.flatnonzero(assignment == 0)
    cfg = fo.OracleConfig(epsilon, 2, fo.Mechanism.OUE)
    est = _estimate(values[members] // (side // 2), cfg, rng, per_user, seed, members)
    average = float(est.values.sum()) / side
    variances, reports = [est.variance], [est.n_reports]

    details = []
    for lvl in range(h):
        members = np.flatnonzero(assignment == lvl + 1)
        length = side >> lvl
        v = values[members]
        labels = 2 * (v // length) + ((v % length) >= length // 2)
        cfg = fo.OracleConfig(epsilon, 2 << lvl, fo.Mechanism.OUE)
        est = _estimate(labels, cfg, rng, per_user, seed, members)
        details.append((est.values[0::2] - est.values[1::2]) / length)
        variances.append(est.variance)
        reports.append(est.n_reports)
    return HaarEstimate(side, average, details, variances, reports)


def dht_coefficients_used(est: HaarEstimate, query: Interval) -> list[tuple[int, int]]:
    """(level, node) details that contribute to the range sum of ``query``."""
    _check_query(query, est.domain_size)
    used = []
    for lvl in range(len(est.details)):
        length = est.domain_size >> lvl
        for node in {query.lo // length, query.hi // length}:
            span = Interval(node * length, (node + 1) * length - 1)
            if span.overlaps(query) and not query.contains(span):
                used.append((lvl, node))
    return used


def dht_answer(est: HaarEstimate, query: Interval) -> float:
    """Range sum from the average and at most two details per level."""
    total = query.length * est.average
    for lvl, node in dht_coefficients_used(est, query):
        length = est.domain_size >> lvl
        mid = node * length + length // 2
        left = Interval(node * length, mid - 1).overlap_length(query)
        right = Interval(mid, (node + 1) * length - 1).overlap_length(query)
        total += est.details[lvl][node] * (left - right)
    return min(1.0, max(0.0, float(total)))


# --------------------------------------------------------------- uniform


def uniform_answer(query: Region, domain_side: int) -> float:
    """Fraction of the domain covered by ``query`` (one side length per axis)."""
    full = Box.full(domain_side, query.dims) if isinstance(query, Box) else \
        Interval(0, domain_side - 1)
    if not full.contains(query):
        raise InputError(f"query {query} outside domain")
    return query.cells / domain_side ** query.dims
