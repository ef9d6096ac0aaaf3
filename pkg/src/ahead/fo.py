"""Frequency oracles: generalized randomized response (GRR) and optimized
unary encoding (OUE).

Each oracle has a per-user path (``*_perturb`` then ``*_aggregate``) and a
count-level simulation path (``simulate_*``) that draws the aggregated counts
directly from their exact sampling distribution.  The simulation path is what
the tree builders use at N = 10^6; the per-user path is kept for small runs and
for checking the simulation against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError


class Mechanism(str, enum.Enum):
    GRR = "GRR"
    OUE = "OUE"


@dataclass(frozen=True)
class OracleConfig:
    epsilon: float
    domain_size: int
    mechanism: Mechanism = Mechanism.OUE

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.domain_size) != self.domain_size or self.domain_size < 2:
            raise InputError(f"domain_size must be an integer >= 2, got {self.domain_size}")
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))

    @property
    def p(self) -> float:
        """Probability that the true category (or the true bit) is reported."""
        if self.mechanism is Mechanism.GRR:
            e = math.exp(self.epsilon)
            return e / (e + self.domain_size - 1)
        return 0.5

    @property
    def q(self) -> float:
        """Probability of reporting one specific wrong category (or a 0-bit as 1)."""
        if self.mechanism is Mechanism.GRR:
            return 1.0 / (math.exp(self.epsilon) + self.domain_size - 1)
        return 1.0 / (math.exp(self.epsilon) + 1.0)


@dataclass(frozen=True, eq=False)
class FrequencyEstimate:
    """Unbiased per-cell frequency estimates sharing one per-entry variance."""

    values: np.ndarray
    variance: float
    n_reports: int

    def __post_init__(self):
        if self.variance < 0:
            raise InputError("variance must be nonnegative")

    def __len__(self) -> int:
        return len(self.values)


def user_rng(seed: int, user_index: int) -> np.random.Generator:
    """Independent stream for one user, derived from (global seed, user index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(user_index)]))


def _check_value(value: int, cfg: OracleConfig) -> int:
    v = int(value)
    if v != value or not 0 <= v < cfg.domain_size:
        raise InputError(f"value {value!r} outside domain [0, {cfg.domain_size})")
    return v


def _debias(counts: np.ndarray, n: int, cfg: OracleConfig) -> np.ndarray:
    p, q = cfg.p, cfg.q
    return (np.asarray(counts, dtype=float) - n * q) / (n * (p - q))


# --------------------------------------------------------------------- GRR


def grr_perturb(value: int, cfg: OracleConfig, rng: np.random.Generator) -> int:
    v = _check_value(value, cfg)
    if rng.random() < cfg.p:
        return v
    other = int(rng.integers(cfg.domain_size - 1))
    return other + 1 if other >= v else other


def grr_aggregate(reports: Iterable[int], cfg: OracleConfig) -> FrequencyEstimate:
    reports = np.asarray(list(reports) if not isinstance(reports, np.ndarray) else reports)
    n = len(reports)
    if n == 0:
        raise InputError("cannot aggregate an empty report list")
    if reports.min() < 0 or reports.max() >= cfg.domain_size:
        raise InputError("GRR report outside domain")
    counts = np.bincount(reports.astype(np.int64), minlength=cfg.domain_size)
    return FrequencyEstimate(_debias(counts, n, cfg), oracle_variance(cfg, n), n)


def simulate_grr(true_counts: Sequence[int], cfg: OracleConfig,
                 rng: np.random.Generator) -> FrequencyEstimate:
    """Draw GRR aggregate counts for users whose true histogram is ``true_counts``."""
    true_counts = np.asarray(true_counts, dtype=np.int64)
    d = cfg.domain_size
    if true_counts.shape != (d,):
        raise InputError(f"expected {d} counts, got shape {true_counts.shape}")
    n = int(true_counts.sum())
    if n == 0:
        raise InputError("cannot aggregate zero users")
    kept = rng.binomial(true_counts, cfg.p)
    counts = kept.astype(np.int64)
    moved = true_counts - kept
    uniform = np.full(d - 1, 1.0 / (d - 1))
    for v in np.flatnonzero(moved):
        spread = rng.multinomial(moved[v], uniform)
        counts[:v] += spread[:v]
        counts[v + 1:] += spread[v:]
    return FrequencyEstimate(_debias(counts, n, cfg), oracle_variance(cfg, n), n)


# --------------------------------------------------------------------- OUE


def oue_perturb(value: int, cfg: OracleConfig, rng: np.random.Generator) -> np.ndarray:
    v = _check_value(value, cfg)
    bits = (rng.random(cfg.domain_size) < cfg.q).astype(np.uint8)
    bits[v] = rng.random() < cfg.p
    return bits


def oue_aggregate(reports, cfg: OracleConfig) -> FrequencyEstimate:
    if isinstance(reports, np.ndarray) and reports.ndim == 2:
        matrix = reports
    else:
        reports = list(reports)
        if any(len(r) != cfg.domain_size for r in reports):
            raise InputError(f"every OUE report must have length {cfg.domain_size}")
        matrix = np.asarray(reports).reshape(len(reports), cfg.domain_size)
    n = matrix.shape[0]
    if n == 0:
        raise InputError("cannot aggregate an empty report list")
    if matrix.shape[1] != cfg.domain_size:
        raise InputError(f"every OUE report must have length {cfg.domain_size}")
    counts = matrix.sum(axis=0, dtype=np.int64)
    return FrequencyEstimate(_debias(counts, n, cfg), oracle_variance(cfg, n), n)


def simulate_oue(true_counts: Sequence[int], cfg: OracleConfig,
                 rng: np.random.Generator) -> FrequencyEstimate:
    """Draw OUE aggregate counts for users whose true histogram is ``true_counts``.

    Bits are independent given the inputs, so the count of 1s at cell v is
    Binomial(n_v, p) + Binomial(N - n_v, q), which is exactly what summing N
    perturbed one-hot vectors produces.
    """
    true_counts = np.asarray(true_counts, dtype=np.int64)
    if true_counts.shape != (cfg.domain_size,):
        raise InputError(f"expected {cfg.domain_size} counts, got shape {true_counts.shape}")
    n = int(true_counts.sum())
    if n == 0:
        raise InputError("cannot aggregate zero users")
    counts = rng.binomial(true_counts, cfg.p) + rng.binomial(n - true_counts, cfg.q)
    return FrequencyEstimate(_debias(counts, n, cfg), oracle_variance(cfg, n), n)


def perturb_users(values: Sequence[int], cfg: OracleConfig, seed: int,
                  user_ids: Sequence[int] | None = None) -> list:
    """Perturb every user's value with its own derived stream."""
    if user_ids is None:
        user_ids = range(len(values))
    perturb = grr_perturb if cfg.mechanism is Mechanism.GRR else oue_perturb
    return [perturb(v, cfg, user_rng(seed, uid)) for v, uid in zip(values, user_ids)]


def aggregate(reports, cfg: OracleConfig) -> FrequencyEstimate:
    if cfg.mechanism is Mechanism.GRR:
        return grr_aggregate(reports, cfg)
    return oue_aggregate(reports, cfg)


def simulate(true_counts, cfg: OracleConfig, rng: np.random.Generator) -> FrequencyEstimate:
    if cfg.mechanism is Mechanism.GRR:
        return simulate_grr(true_counts, cfg, rng)
    return simulate_oue(true_counts, cfg, rng)


# ------------------------------------------------------------ analytics


def oracle_variance(cfg: OracleConfig, n: int) -> float:
    """Closed-form per-entry variance of the debiased estimate from ``n`` reports."""
    if n < 1:
        raise InputError("n must be at least 1")
    e = math.exp(cfg.epsilon)
    if cfg.mechanism is Mechanism.GRR:
        return (cfg.domain_size - 2 + e) / (n * (e - 1) ** 2)
    return 4 * e / (n * (e - 1) ** 2)


def select_oracle(epsilon: float, domain_size: int) -> Mechanism:
    """GRR when |D| - 2 < 3 e^eps, otherwise OUE."""
    if domain_size < 2:
        raise InputError("domain_size must be at least 2")
    return Mechanism.GRR if domain_size - 2 < 3 * math.exp(epsilon) else Mechanism.OUE


def budget_strategy_variances(epsilon: float, c: int, n: int) -> tuple[float, float]:
    """Per-node OUE variance when splitting the budget vs. partitioning users.

    Returns ``(var_split, var_partition)``: all ``n`` users answering each of
    ``c`` layers at ``epsilon / c``, against ``n / c`` users per layer at the
    full ``epsilon``.
    """
    if c < 1 or n < c:
        raise InputError("need c >= 1 and n >= c")
    es = math.exp(epsilon / c)
    e = math.exp(epsilon)
    var_split = 4 * es / (n * (es - 1) ** 2)
    var_partition = (c / n) * 4 * e / (e - 1) ** 2
    return var_split, var_partition


def privacy_ratio_check(cfg: OracleConfig) -> float:
    """Worst-case output-probability ratio of OUE between two inputs."""
    if cfg.mechanism is not Mechanism.OUE:
        raise InputError("privacy_ratio_check applies to OUE only")
    p, q = cfg.p, cfg.q
    return (p / q) * ((1 - q) / (1 - p))
