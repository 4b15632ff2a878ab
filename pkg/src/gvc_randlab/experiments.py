"""Monte Carlo ensembles of random economies.

Each instance ``k`` of an ensemble is generated from its own stream
``(seed, k)`` and reduced to the four numbers tracked for one sector: U1,
D1 and the rank-1 estimators.  Instances are farmed out to worker
processes in contiguous chunks and reassembled in instance order, so the
records do not depend on the number of workers.

Sector indices are 0-based in code; reports print them 1-based.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context

import numpy as np
from threadpoolctl import threadpool_limits

from .analytics import covariance_exact
from .measures import MeasureError, MeasureKind, rank1_estimators, true_measures
from .model import Disorder, ModelParams, ViolationPolicy, sample_instance

log = logging.getLogger(__name__)

RECORD_KINDS = (MeasureKind.U1, MeasureKind.D1, MeasureKind.U_TILDE, MeasureKind.D_TILDE)


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    params: ModelParams
    instances: int
    sector_index: int = 6
    policy: ViolationPolicy = ViolationPolicy.FLAG
    skip_failures: bool = False

    def __post_init__(self):
        object.__setattr__(self, "policy", ViolationPolicy(self.policy))
        if self.instances < 2:
            raise ValueError(f"need at least 2 instances, got {self.instances}")
        if not 0 <= self.sector_index < self.params.n_sectors:
            raise ValueError(
                f"sector index {self.sector_index} (0-based) outside 0..{self.params.n_sectors - 1}"
            )


@dataclass(frozen=True, eq=False)
class EnsembleRecords:
    """Per-instance values for the tracked sector.

    ``failed`` lists instance indices excluded because the Leontief system
    could not be solved (only populated when the spec skips failures).
    """

    instance: np.ndarray
    u1: np.ndarray
    d1: np.ndarray
    u_tilde: np.ndarray
    d_tilde: np.ndarray
    violations: np.ndarray
    rejections: int = 0
    failed: tuple[int, ...] = field(default_factory=tuple)

    def column(self, kind: MeasureKind | str) -> np.ndarray:
        kind = MeasureKind(kind)
        return {
            MeasureKind.U1: self.u1,
            MeasureKind.D1: self.d1,
            MeasureKind.U_TILDE: self.u_tilde,
            MeasureKind.D_TILDE: self.d_tilde,
        }[kind]

    def __len__(self):
        return self.instance.size


def _run_chunk(spec: EnsembleSpec, start: int, stop: int):
    rows, failed, rejections = [], [], 0
    i = spec.sector_index
    # single-threaded BLAS keeps each instance's rounding independent of the pool
    with threadpool_limits(limits=1):
        for k in range(start, stop):
            table, pair, rej = sample_instance(spec.params, k, spec.policy)
            rejections += rej
            try:
                u1, d1 = true_measures(table, pair)
                ut, dt = rank1_estimators(pair)
            except MeasureError as exc:
                if not spec.skip_failures:
                    raise ExperimentError(f"instance {k}: {exc}") from exc
                failed.append(k)
                continue
            rows.append((k, u1[i], d1[i], ut[i], dt[i], pair.d_rowsum_violations))
    return rows, failed, rejections


def _chunks(n, parts):
    bounds = np.linspace(0, n, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_ensemble(spec: EnsembleSpec, workers: int = 1) -> EnsembleRecords:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        results = [_run_chunk(spec, 0, spec.instances)]
    else:
        chunks = _chunks(spec.instances, 4 * workers)
        with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
            futures = [pool.submit(_run_chunk, spec, a, b) for a, b in chunks]
            results = [f.result() for f in futures]
    rows = [r for res in results for r in res[0]]
    failed = tuple(k for res in results for k in res[1])
    rejections = sum(res[2] for res in results)
    if failed:
        log.warning("%d of %d instances excluded: singular Leontief system", len(failed), spec.instances)
    if len(rows) < 2:
        raise ExperimentError("fewer than two usable instances")
    arr = np.array([r[:5] for r in rows], dtype=np.float64)
    return EnsembleRecords(
        instance=np.array([r[0] for r in rows], dtype=np.int64),
        u1=arr[:, 1],
        d1=arr[:, 2],
        u_tilde=arr[:, 3],
        d_tilde=arr[:, 4],
        violations=np.array([r[5] for r in rows], dtype=np.int64),
        rejections=rejections,
        failed=failed,
    )


@dataclass(frozen=True)
class ScatterResult:
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    ols_slope: float
    ols_intercept: float
    pearson_r: float
    sample_covariance: float

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def summary(self) -> dict:
        return {
            "slope": self.ols_slope,
            "intercept": self.ols_intercept,
            "pearson_r": self.pearson_r,
            "covariance": self.sample_covariance,
            "points": int(self.x.size),
        }


def fit_scatter(x, y) -> ScatterResult:
    """OLS of y on x with free intercept, plus Pearson r and sample covariance (ddof=1)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equally long samples of at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx <= 0.0:
        raise ExperimentError("degenerate scatter: x has zero variance")
    sxy = float(dx @ dy)
    slope = sxy / sxx
    r = sxy / math.sqrt(sxx * syy) if syy > 0 else math.nan
    return ScatterResult(
        x=x,
        y=y,
        ols_slope=slope,
        ols_intercept=float(y.mean() - slope * x.mean()),
        pearson_r=r,
        sample_covariance=sxy / (x.size - 1),
    )


def scatter_uv(spec: EnsembleSpec, x_kind, y_kind, workers: int = 1, records: EnsembleRecords | None = None):
    if records is None:
        records = run_ensemble(spec, workers)
    return fit_scatter(records.column(x_kind), records.column(y_kind))


def bootstrap_cov_se(x, y, n_boot: int = 1000, seed: int = 0) -> float:
    """Bootstrap standard error of the sample covariance, resampling instances."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(seed)
    covs = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, x.size, x.size)
        xb, yb = x[idx], y[idx]
        covs[b] = np.dot(xb - xb.mean(), yb - yb.mean()) / (x.size - 1)
    return float(covs.std(ddof=1))


@dataclass(frozen=True)
class CovarianceRow:
    mu: float
    mu_f: float
    n: int
    sample_cov: float
    bootstrap_se: float
    analytic: float
    violating_instances: int

    @property
    def z_score(self) -> float:
        return (self.sample_cov - self.analytic) / self.bootstrap_se


TABLE1_ROWS = ((1.0, 0.001, 200), (2.0, 0.005, 400), (3.0, 0.001, 300), (1.2, 0.001, 500), (1.5, 0.003, 350))
TABLE1_ANALYTIC = (0.10385, 0.29494, 0.06158, 0.17260, 0.23955)
CURVE_PAIRS = ((1.0, 0.1), (2.0, 0.1), (2.0, 0.05), (2.0, 0.01))


def covariance_table(rows, m: int = 10_000, i: int = 6, seed: int = 0, workers: int = 1, n_boot: int = 1000):
    """Sample Cov(U1_i, D1_i) over ``m`` instances next to the analytic C_N, per (mu, mu_f, n) row."""
    if m < 1000:
        raise ValueError("covariance_table needs m >= 1000")
    out = []
    for mu, mu_f, n in rows:
        spec = EnsembleSpec(ModelParams(int(n), mu, mu_f, seed=seed), m, i)
        rec = run_ensemble(spec, workers)
        cov = fit_scatter(rec.u1, rec.d1).sample_covariance
        out.append(
            CovarianceRow(
                mu=mu,
                mu_f=mu_f,
                n=int(n),
                sample_cov=cov,
                bootstrap_se=bootstrap_cov_se(rec.u1, rec.d1, n_boot, seed),
                analytic=covariance_exact(int(n), mu, mu_f),
                violating_instances=int(np.count_nonzero(rec.violations)),
            )
        )
    return out


@dataclass(frozen=True)
class SparsityPoint:
    sparsity: float
    scatter: ScatterResult
    excluded: int


def sparsity_sweep(base: EnsembleSpec, sparsities, workers: int = 1) -> list[SparsityPoint]:
    """(U1, D1) scatter at each sparsity level; unsolvable instances are dropped with a warning."""
    out = []
    for s in sparsities:
        if not 0.0 <= s <= 0.5:
            raise ValueError(f"sparsity {s} outside [0, 0.5]")
        spec = replace(base, params=replace(base.params, sparsity=float(s)), skip_failures=True)
        rec = run_ensemble(spec, workers)
        if rec.failed:
            warnings.warn(f"sparsity {s}: excluded {len(rec.failed)} singular instances", stacklevel=2)
        out.append(SparsityPoint(float(s), fit_scatter(rec.u1, rec.d1), len(rec.failed)))
    return out


# Named reference configurations (sector 7 in 1-based reporting).
PRESETS = {
    "fig2": EnsembleSpec(ModelParams(100, 1.0, 0.1), 1000, 6),
    "fig3": EnsembleSpec(ModelParams(100, 1.0, 0.01), 1000, 6),
    "fig4": EnsembleSpec(ModelParams(200, 1.0, 0.005), 1000, 6),
    "fig6": EnsembleSpec(ModelParams(400, disorder=Disorder.LOGNORMAL, mu_prime=1.0, mu_f_prime=6.67), 1000, 6),
    "fig7": EnsembleSpec(ModelParams(400, 1.0, 0.05, disorder=Disorder.UNIFORM), 1000, 6),
}
