"""Synthetic data, CSV ingestion, bucketization and the binary dataset cache."""

from __future__ import annotations

import csv
import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import ConfigurationError, IngestionError, InputError


class Distribution(str, enum.Enum):
    ZIPF = "zipf"
    CAUCHY = "cauchy"
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"


@dataclass(frozen=True)
class SyntheticSpec:
    distribution: Distribution = Distribution.ZIPF
    n: int = 100_000
    domain_side: int = 256
    m: int = 1
    correlation: float = 0.0
    skewness: float = 0.0
    seed: int = 0
    alpha: float = 1.1    # Zipf exponent
    loc: float = 0.0      # x0 for Cauchy, mu otherwise
    scale: float = 1.0    # gamma for Cauchy, standard deviation otherwise

    def __post_init__(self):
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if not 0.0 <= self.correlation < 1.0:
            raise InputError(f"correlation must lie in [0, 1), got {self.correlation}")
        if self.skewness < 0:
            raise InputError(f"skewness must be nonnegative, got {self.skewness}")
        if self.n < 1 or self.m < 1 or self.domain_side < 2:
            raise InputError("need n >= 1, m >= 1 and domain_side >= 2")
        if self.scale <= 0 or self.alpha <= 0:
            raise InputError("scale and alpha must be positive")


@dataclass(eq=False)
class Dataset:
    """Records of category indices, one column per attribute."""

    records: np.ndarray
    sides: tuple[int, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        rec = np.asarray(self.records)
        if rec.ndim == 1:
            rec = rec[:, None]
        if rec.ndim != 2 or rec.shape[1] != len(self.sides):
            raise InputError(f"records of shape {rec.shape} do not match {len(self.sides)} sides")
        if rec.size and ((rec < 0).any() or (rec >= np.asarray(self.sides)).any()):
            raise InputError("record coordinate outside its domain")
        self.records = rec.astype(np.int32)
        self.sides = tuple(int(s) for s in self.sides)

    def __len__(self) -> int:
        return self.records.shape[0]

    @property
    def m(self) -> int:
        return len(self.sides)

    def column(self, j: int = 0) -> np.ndarray:
        return self.records[:, j]


# ----------------------------------------------------------- generation


def bucketize(values, lo: float, hi: float, side: int) -> np.ndarray:
    """Equal-width buckets over [lo, hi]; values outside are clipped first."""
    if not hi > lo:
        raise InputError("bucketize needs hi > lo")
    x = np.clip(np.asarray(values, dtype=float), lo, hi)
    idx = np.floor((x - lo) / (hi - lo) * side).astype(np.int64)
    return np.minimum(idx, side - 1)


def _zipf_ppf(u: np.ndarray, side: int, alpha: float) -> np.ndarray:
    pmf = np.arange(1, side + 1, dtype=float) ** -alpha
    cdf = np.cumsum(pmf / pmf.sum())
    return np.minimum(np.searchsorted(cdf, u, side="right"), side - 1)


def _continuous_ppf(u: np.ndarray, spec: SyntheticSpec) -> tuple[np.ndarray, float]:
    """Standardized draws and their clipping radius in scale units."""
    dist, skew = spec.distribution, spec.skewness
    if dist is Distribution.CAUCHY:
        return stats.cauchy.ppf(u), 20.0
    if dist is Distribution.GAUSSIAN:
        law = stats.skewnorm(skew) if skew else stats.norm()
    else:
        law = stats.laplace_asymmetric(1.0 / (1.0 + skew)) if skew else stats.laplace()
    return (law.ppf(u) - law.mean()) / law.std(), 4.0


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw ``spec.n`` records through an equi-correlated Gaussian copula."""
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal((spec.n, spec.m))
    if spec.m > 1 and spec.correlation > 0:
        cov = np.full((spec.m, spec.m), spec.correlation)
        np.fill_diagonal(cov, 1.0)
        z = z @ np.linalg.cholesky(cov).T
    u = stats.norm.cdf(z)
    if spec.distribution is Distribution.ZIPF:
        records = _zipf_ppf(u, spec.domain_side, spec.alpha)
    else:
        x, radius = _continuous_ppf(u, spec)
        records = bucketize(x, -radius, radius, spec.domain_side)
    return Dataset(records, (spec.domain_side,) * spec.m,
                   {"source": "synthetic", "distribution": spec.distribution.value,
                    "seed": spec.seed, "correlation": spec.correlation,
                    "skewness": spec.skewness})


# ------------------------------------------------------------ ingestion


def ingest_csv(path, columns: str | Sequence[str], domain_side: int,
               truncation: float | None = None) -> Dataset:
    """Read numeric columns, drop rows above ``truncation``, bucketize.

    Each column is bucketized over [0, truncation] when a truncation bound is
    given and over its observed [min, max] otherwise.
    """
    cols = [columns] if isinstance(columns, str) else list(columns)
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    rows: list[list[float]] = []
    total = 0
    with handle:
        reader = csv.DictReader(handle)
        missing = [c for c in cols if c not in (reader.fieldnames or [])]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {missing}")
        for lineno, row in enumerate(reader, start=2):
            total += 1
            try:
                vals = [float(row[c]) for c in cols]
            except (TypeError, ValueError):
                bad = {c: row.get(c) for c in cols}
                raise IngestionError(f"{path}:{lineno}: non-numeric value in {bad}") from None
            if any(math.isnan(v) for v in vals):
                raise IngestionError(f"{path}:{lineno}: NaN in {cols}")
            if truncation is not None and any(v > truncation for v in vals):
                continue
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path}: no rows left after truncation")
    values = np.asarray(rows)
    out = np.empty(values.shape, dtype=np.int64)
    for j in range(values.shape[1]):
        col = values[:, j]
        lo, hi = (0.0, float(truncation)) if truncation is not None else (col.min(), col.max())
        if hi <= lo:
            hi = lo + 1.0
        out[:, j] = bucketize(col, lo, hi, domain_side)
    return Dataset(out, (domain_side,) * len(cols),
                   {"source": str(path), "columns": cols, "rows_read": total,
                    "rows_retained": len(rows), "retained_fraction": len(rows) / total})


# ---------------------------------------------------------------- cache

_MAGIC = b"AHD1"


def save_cache(dataset: Dataset, path) -> None:
    """Header (magic, m, n, sides) then one little-endian int32 column per attribute."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQ", dataset.m, len(dataset)))
        fh.write(struct.pack(f"<{dataset.m}I", *dataset.sides))
        for j in range(dataset.m):
            fh.write(np.ascontiguousarray(dataset.column(j), dtype="<i4").tobytes())


def load_cache(path) -> Dataset:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    if blob[:4] != _MAGIC:
        raise IngestionError(f"{path}: not a dataset cache file")
    m, n = struct.unpack_from("<IQ", blob, 4)
    off = 4 + struct.calcsize("<IQ")
    sides = struct.unpack_from(f"<{m}I", blob, off)
    off += 4 * m
    if len(blob) - off != 4 * m * n:
        raise IngestionError(f"{path}: truncated cache file")
    cols = np.frombuffer(blob, dtype="<i4", offset=off).reshape(m, n)
    return Dataset(cols.T.copy(), sides, {"source": str(path)})


# ------------------------------------------------------------ partition


def partition_users(n: int, c: int, rng: np.random.Generator) -> np.ndarray:
    """Independent uniform group index in ``range(c)`` for each of ``n`` users."""
    if c < 1:
        raise ConfigurationError("need at least one group")
    if n < c:
        raise ConfigurationError(f"{n} users cannot fill {c} groups")
    return rng.integers(0, c, size=n)
