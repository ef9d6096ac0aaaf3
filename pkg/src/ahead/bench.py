"""Benchmark harness: query workloads, MSE statistics, sweeps and export."""

from __future__ import annotations

import csv
import enum
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import baselines, grid2d, highdim, tree
from .data import Dataset, SyntheticSpec, gen_synthetic, load_cache
from .errors import ConfigurationError, InputError
from .regions import Box, Interval, Region


class Method(str, enum.Enum):
    AHEAD_1D = "AHEAD-1d"
    AHEAD_2D = "AHEAD-2d"
    AHEAD_DE = "AHEAD-DE"
    AHEAD_LLE = "AHEAD-LLE"
    HIO = "HIO"
    DHT = "DHT"
    UNIFORM = "Uniform"


_DIMS_OK: dict[Method, Callable[[int], bool]] = {
    Method.AHEAD_1D: lambda m: m == 1,
    Method.AHEAD_2D: lambda m: m == 2,
    Method.AHEAD_DE: lambda m: 2 <= m <= highdim.MAX_DE_DIMS,
    Method.AHEAD_LLE: lambda m: m >= 2,
    Method.HIO: lambda m: m == 1,
    Method.DHT: lambda m: m == 1,
    Method.UNIFORM: lambda m: m >= 1,
}


# -------------------------------------------------------------- queries


def gen_queries(domain_side: int, dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Array of shape (count, dim, 2): two uniform endpoints per axis, sorted."""
    if count < 1 or dim < 1:
        raise InputError("count and dim must be at least 1")
    ends = rng.integers(0, domain_side, size=(count, dim, 2))
    return np.sort(ends, axis=2)


def to_region(bounds) -> Region:
    b = np.asarray(bounds)
    if len(b) == 1:
        return Interval(int(b[0, 0]), int(b[0, 1]))
    return Box(*[Interval(int(lo), int(hi)) for lo, hi in b])


def exact_answers(dataset: Dataset, queries: np.ndarray) -> np.ndarray:
    """Fraction of records inside each query, by direct counting."""
    rec = dataset.records
    n = len(dataset)
    if dataset.m <= 3 and math.prod(dataset.sides) <= 2**24:
        hist = np.zeros(dataset.sides, dtype=np.int64)
        np.add.at(hist, tuple(rec.T), 1)
        regions = [to_region(q) for q in queries]
        return tree.region_counts(tree.prefix_table(hist), regions) / n
    out = np.empty(len(queries))
    for k, q in enumerate(queries):
        inside = np.ones(n, dtype=bool)
        for j, (lo, hi) in enumerate(q):
            inside &= (rec[:, j] >= lo) & (rec[:, j] <= hi)
        out[k] = inside.mean()
    return out


def mse(true_answers, est_answers) -> float:
    t = np.asarray(true_answers, dtype=float)
    e = np.asarray(est_answers, dtype=float)
    if t.shape != e.shape or t.size == 0:
        raise InputError(f"answer vectors differ in shape: {t.shape} vs {e.shape}")
    return float(np.mean((t - e) ** 2))


# --------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    method: Method
    data: SyntheticSpec | str
    epsilons: tuple[float, ...] = (1.0,)
    n_queries: int = 200
    n_repetitions: int = 20
    seed: int = 0
    fanout: int | None = None
    theta: float | None = None
    theta_scale: float | None = None  # theta as a multiple of the derived threshold
    fuse: bool = True  # False keeps raw node estimates (AHEAD methods only)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if self.n_queries < 1 or self.n_repetitions < 1:
            raise ConfigurationError("n_queries and n_repetitions must be at least 1")
        if not self.epsilons or min(self.epsilons) <= 0:
            raise ConfigurationError("epsilons must be a non-empty list of positive values")
        if self.theta is not None and self.theta_scale is not None:
            raise ConfigurationError("give theta or theta_scale, not both")

    @property
    def label(self) -> str:
        tags = [] if self.fuse else ["raw"]
        if self.theta is not None:
            tags.append(f"theta={self.theta:g}")
        elif self.theta_scale is not None:
            tags.append(f"theta={self.theta_scale:g}x")
        return self.method.value + (f"({','.join(tags)})" if tags else "")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["epsilons"] = list(self.epsilons)
        if isinstance(self.data, SyntheticSpec):
            d["data"] = {**asdict(self.data), "distribution": self.data.distribution.value}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "data" not in d or "method" not in d:
            raise ConfigurationError("config needs 'method' and 'data'")
        if isinstance(d["data"], dict):
            d["data"] = SyntheticSpec(**d["data"])
        return cls(**d)


def load_dataset(source: SyntheticSpec | str | Dataset) -> Dataset:
    if isinstance(source, Dataset):
        return source
    if isinstance(source, SyntheticSpec):
        return gen_synthetic(source)
    return load_cache(source)


# -------------------------------------------------------------- reports


@dataclass(frozen=True)
class MseRow:
    method: str
    epsilon: float
    n: int
    domain: str
    mean_mse: float
    std_mse: float
    ci_lo: float
    ci_hi: float
    seconds: float


COLUMNS = [f.name for f in fields(MseRow)]


@dataclass
class MseReport:
    rows: list[MseRow] = field(default_factory=list)
    # per-row repetition MSEs, kept in memory only
    samples: list[np.ndarray] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def extend(self, other: MseReport) -> None:
        self.rows.extend(other.rows)
        self.samples.extend(other.samples)

    def row(self, method: str, epsilon: float) -> MseRow:
        for r in self.rows:
            if r.method == method and r.epsilon == epsilon:
                return r
        raise KeyError((method, epsilon))


def summarize(method: str, epsilon: float, n: int, domain: str, mses: Sequence[float],
              seconds: float) -> MseRow:
    """Mean, sample std and a normal 95% interval for the mean."""
    arr = np.asarray(mses, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    half = 1.96 * std / math.sqrt(arr.size)
    return MseRow(method, float(epsilon), int(n), domain, mean, std, mean - half, mean + half,
                  float(seconds))


# ------------------------------------------------------------ estimators


def _ahead_params(cfg: ExperimentConfig, params: tree.AheadParams) -> tree.AheadParams:
    if cfg.theta is not None:
        return params.with_theta(cfg.theta)
    if cfg.theta_scale is not None:
        return params.with_theta(cfg.theta_scale * params.theta)
    return params


def build_estimator(cfg: ExperimentConfig, dataset: Dataset, epsilon: float,
                    rng: np.random.Generator) -> Callable[[Region], float]:
    """Fit the configured method once and return its query function."""
    method, side, n = cfg.method, dataset.sides[0], len(dataset)
    if not _DIMS_OK[method](dataset.m):
        raise ConfigurationError(f"{method.value} cannot run on {dataset.m}-attribute data")
    if len(set(dataset.sides)) != 1:
        raise ConfigurationError("all attributes must share one domain side")
    rec = dataset.records
    if method is Method.UNIFORM:
        return lambda q: baselines.uniform_answer(q, side)
    if method is Method.AHEAD_1D:
        params = _ahead_params(cfg, tree.compute_params(epsilon, n, side, cfg.fanout or 2))
        root = tree.post_process(tree.build_tree(rec[:, 0], params, rng), params, fuse=cfg.fuse)
        return lambda q: tree.answer_range(root, q)
    if method is Method.AHEAD_2D:
        params = _ahead_params(cfg, grid2d.compute_params_2d(epsilon, n, side, cfg.fanout or 4))
        root = tree.post_process(grid2d.build_tree_2d(rec, params, rng), params,
                                 fuse=cfg.fuse)
        return lambda q: grid2d.answer_range_2d(root, q)
    if method is Method.AHEAD_DE:
        if cfg.fanout not in (None, 2 ** dataset.m):
            raise ConfigurationError("direct estimation fixes the fanout at 2^m")
        params = _ahead_params(cfg, highdim.compute_params_de(epsilon, n, side, dataset.m))
        root = tree.post_process(highdim.build_de_tree(rec, params, rng), params,
                                 fuse=cfg.fuse)
        return lambda q: highdim.answer_box(root, q)
    if method is Method.AHEAD_LLE:
        if cfg.theta is not None or cfg.theta_scale is not None:
            raise ConfigurationError("theta overrides are not supported for AHEAD-LLE")
        forest = highdim.build_lle_forest(rec, epsilon, side, rng, fanout=cfg.fanout or 4)
        return lambda q: highdim.answer_md_query(forest, q)
    if method is Method.HIO:
        hio = baselines.hio_build(rec[:, 0], epsilon, side, rng, cfg.fanout or 5)
        return lambda q: baselines.hio_answer(hio, q)
    if method is Method.DHT:
        est = baselines.dht_build(rec[:, 0], epsilon, side, rng)
        return lambda q: baselines.dht_answer(est, q)
    raise ConfigurationError(f"unknown method {method}")


# --------------------------------------------------------------- runner


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> MseReport:
    """Repeat build-and-answer ``n_repetitions`` times per epsilon.

    The query workload is drawn once; every (epsilon, repetition) gets its own
    seed spawned from ``cfg.seed``.
    """
    dataset = load_dataset(cfg.data if dataset is None else dataset)
    if not _DIMS_OK[cfg.method](dataset.m):
        raise ConfigurationError(f"{cfg.method.value} cannot run on {dataset.m}-attribute data")
    query_seq, *eps_seqs = np.random.SeedSequence(cfg.seed).spawn(1 + len(cfg.epsilons))
    queries = gen_queries(dataset.sides[0], dataset.m, cfg.n_queries,
                          np.random.default_rng(query_seq))
    regions = [to_region(q) for q in queries]
    truth = exact_answers(dataset, queries)
    domain = "x".join(str(s) for s in dataset.sides)
    report = MseReport()
    for epsilon, eps_seq in zip(cfg.epsilons, eps_seqs):
        mses = []
        start = time.perf_counter()
        for rep_seq in eps_seq.spawn(cfg.n_repetitions):
            answer = build_estimator(cfg, dataset, epsilon, np.random.default_rng(rep_seq))
            mses.append(mse(truth, [answer(q) for q in regions]))
        elapsed = time.perf_counter() - start
        report.rows.append(summarize(cfg.label, epsilon, len(dataset), domain, mses, elapsed))
        report.samples.append(np.asarray(mses))
    return report


def run_sweep(base: ExperimentConfig, *, methods: Sequence[str] | None = None,
              epsilons: Sequence[float] | None = None, ns: Sequence[int] | None = None,
              domain_sides: Sequence[int] | None = None,
              thetas: Sequence[float] | None = None,
              theta_scales: Sequence[float] | None = None) -> MseReport:
    """Cartesian grid over methods, N, domain side and theta overrides.

    N and domain side can only vary for synthetic data.
    """
    if (ns or domain_sides) and not isinstance(base.data, SyntheticSpec):
        raise ConfigurationError("N and domain size sweeps need synthetic data")
    overrides = ([{"theta": t, "theta_scale": None} for t in thetas or []]
                 + [{"theta": None, "theta_scale": s} for s in theta_scales or []]) or [{}]
    report = MseReport()
    for method, n, side, over in itertools.product(
            methods or [base.method], ns or [None], domain_sides or [None], overrides):
        data = base.data
        if isinstance(data, SyntheticSpec):
            data = replace(data, n=n or data.n, domain_side=side or data.domain_side)
        cfg = replace(base, method=Method(method), data=data,
                      epsilons=tuple(epsilons or base.epsilons), **over)
        report.extend(run_experiment(cfg))
    return report


# --------------------------------------------------------------- export


def export_report(report: MseReport, path, fmt: str | None = None) -> None:
    """Write CSV or JSON; the format defaults to the file suffix."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    rows = [asdict(r) for r in report.rows]
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=COLUMNS)
            writer.writeheader()
            for r in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    elif fmt == "json":
        path.write_text(json.dumps({"columns": COLUMNS, "rows": rows}, indent=2))
    else:
        raise ConfigurationError(f"unknown report format {fmt!r}")


def read_report(path) -> MseReport:
    path = Path(path)
    if path.suffix.lower() == ".json":
        rows = json.loads(path.read_text())["rows"]
    else:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    out = MseReport()
    for r in rows:
        out.rows.append(MseRow(
            method=str(r["method"]), epsilon=float(r["epsilon"]), n=int(r["n"]),
            domain=str(r["domain"]), mean_mse=float(r["mean_mse"]),
            std_mse=float(r["std_mse"]), ci_lo=float(r["ci_lo"]), ci_hi=float(r["ci_hi"]),
            seconds=float(r["seconds"])))
    return out
