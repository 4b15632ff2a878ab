"""Random input-output economies.

An economy is an N x N matrix of non-negative intermediate flows ``a``
(``a[i, j]`` = sales of sector i to sector j) plus a vector of final
demands ``f``.  Gross output and value added follow from the two
accounting identities::

    y_i = sum_j a_ij + f_i = sum_j a_ji + v_i

Every instance in an ensemble gets its own counter-based random stream
(Philox keyed by ``(seed, instance index)``), so an instance is
reproducible no matter how the ensemble is split across workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray


class ModelError(ValueError):
    """Invalid model parameters or an inconsistent I-O table."""


class Disorder(str, enum.Enum):
    EXPONENTIAL = "exp"
    LOGNORMAL = "lognormal"
    UNIFORM = "uniform"


class ViolationPolicy(str, enum.Enum):
    FLAG = "flag"
    REJECT = "reject"


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the random economy.

    ``mu`` and ``mu_f`` are rates: flows have mean ``1/mu`` and final
    demands mean ``1/mu_f`` for the exponential and uniform families.  The
    uniform family draws flows on ``[0, 2/mu]`` and demands on
    ``[0, 2/mu_f]``.

    The log-normal family ignores the rates.  Flows are ``exp(N(mu_prime,
    sigma^2))`` and final demands ``exp(N(mu_f_prime, sigma_f^2))``.

    ``sparsity`` is the probability that a flow entry is forced to zero
    (final demands are never masked).
    """

    n_sectors: int
    mu: float = 1.0
    mu_f: float = 0.1
    disorder: Disorder = Disorder.EXPONENTIAL
    mu_prime: float = 1.0
    sigma: float = 1.0
    mu_f_prime: float = 6.67
    sigma_f: float = 1.0
    sparsity: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "disorder", Disorder(self.disorder))
        if int(self.n_sectors) != self.n_sectors or self.n_sectors < 1:
            raise ModelError(f"n_sectors must be a positive integer, got {self.n_sectors!r}")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise ModelError(f"mu must be a positive finite rate, got {self.mu!r}")
        if not (self.mu_f > 0 and np.isfinite(self.mu_f)):
            raise ModelError(f"mu_f must be a positive finite rate, got {self.mu_f!r}")
        if not (self.sigma > 0 and self.sigma_f > 0):
            raise ModelError("log-normal sigma and sigma_f must be positive")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ModelError(f"sparsity must lie in [0, 1], got {self.sparsity!r}")
        if not 0 <= self.seed < 2**64:
            raise ModelError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @property
    def phi(self) -> float:
        return 1.0 - self.mu_f / self.mu


@dataclass(frozen=True, eq=False)
class IoTable:
    """One economy: flows, final demand, gross output and value added."""

    a: NDArray[np.float64]
    f: NDArray[np.float64]
    y: NDArray[np.float64]
    v: NDArray[np.float64]

    @classmethod
    def from_flows(cls, a, f) -> IoTable:
        """Build a table from flows and final demand, deriving ``y`` and ``v``."""
        a = np.array(a, dtype=np.float64, ndmin=2)
        f = np.array(f, dtype=np.float64, ndmin=1)
        n = a.shape[0]
        if a.shape != (n, n) or f.shape != (n,):
            raise ModelError(f"flow matrix {a.shape} and final demand {f.shape} do not match")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(f))):
            raise ModelError("flows and final demand must be finite")
        bad = np.argwhere(a < 0)
        if bad.size:
            i, j = bad[0]
            raise ModelError(f"negative flow a[{i}, {j}] = {a[i, j]!r}")
        bad = np.flatnonzero(f < 0)
        if bad.size:
            raise ModelError(f"negative final demand f[{bad[0]}] = {f[bad[0]]!r}")
        y = a.sum(axis=1) + f
        bad = np.flatnonzero(y <= 0)
        if bad.size:
            raise ModelError(f"sector {bad[0]} has zero gross output (no sales, no final demand)")
        v = y - a.sum(axis=0)
        for arr in (a, f, y, v):
            arr.flags.writeable = False
        return cls(a, f, y, v)

    @property
    def n(self) -> int:
        return self.f.shape[0]


@dataclass(frozen=True, eq=False)
class SubstochasticPair:
    """Output-share matrix ``a_u`` and input-share matrix ``a_d``.

    ``d_rowsum_violations`` counts rows of ``a_d`` summing above one,
    i.e. sectors with negative value added.
    """

    a_u: NDArray[np.float64]
    a_d: NDArray[np.float64]
    d_rowsum_violations: int = field(default=0)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for instance ``index`` of a run."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def draw_flows(params: ModelParams, rng: np.random.Generator, shape) -> NDArray[np.float64]:
    """I.i.d. flow entries of the chosen family, with the sparsity mask applied."""
    if params.disorder is Disorder.EXPONENTIAL:
        a = rng.exponential(1.0 / params.mu, size=shape)
    elif params.disorder is Disorder.UNIFORM:
        a = rng.uniform(0.0, 2.0 / params.mu, size=shape)
    else:
        a = rng.lognormal(params.mu_prime, params.sigma, size=shape)
    if params.sparsity > 0:
        a[rng.random(shape) < params.sparsity] = 0.0
    return a


def draw_demand(params: ModelParams, rng: np.random.Generator, size) -> NDArray[np.float64]:
    if params.disorder is Disorder.EXPONENTIAL:
        return rng.exponential(1.0 / params.mu_f, size=size)
    if params.disorder is Disorder.UNIFORM:
        return rng.uniform(0.0, 2.0 / params.mu_f, size=size)
    return rng.lognormal(params.mu_f_prime, params.sigma_f, size=size)


def sample_table(params: ModelParams, rng: np.random.Generator) -> IoTable:
    n = params.n_sectors
    a = draw_flows(params, rng, (n, n))
    f = draw_demand(params, rng, n)
    return IoTable.from_flows(a, f)


def build_pair(table: IoTable) -> SubstochasticPair:
    y = table.y
    if np.any(y <= 0):
        raise ModelError("gross output must be strictly positive to form share matrices")
    a_u = table.a / y[:, None]
    a_d = table.a.T / y[:, None]
    violations = int(np.count_nonzero(a_d.sum(axis=1) > 1.0))
    return SubstochasticPair(a_u, a_d, violations)


def sample_instance(
    params: ModelParams,
    index: int,
    policy: ViolationPolicy | str = ViolationPolicy.FLAG,
    max_tries: int = 10_000,
) -> tuple[IoTable, SubstochasticPair, int]:
    """Sample instance ``index`` of an ensemble.

    Returns ``(table, pair, rejections)``.  Under the ``reject`` policy,
    draws whose ``a_d`` has a row sum above one are discarded and redrawn
    from the same instance stream; ``rejections`` counts the discards.
    """
    policy = ViolationPolicy(policy)
    rng = instance_rng(params.seed, index)
    for rejections in range(max_tries):
        table = sample_table(params, rng)
        pair = build_pair(table)
        if policy is ViolationPolicy.FLAG or pair.d_rowsum_violations == 0:
            return table, pair, rejections
    raise ModelError(
        f"instance {index}: no draw without negative value added after {max_tries} tries; "
        "mu_f is probably too large relative to mu"
    )
