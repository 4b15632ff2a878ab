"""Independent reference computations.

Nothing here calls into :mod:`gvc_randlab.analytics` or the LU-based
measures: integrals are done by adaptive quadrature of their defining
integrands, Leontief vectors by explicit partial sums, and moments by
sampling row sums of simulated economies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytics import MomentSet
from .model import ModelParams, draw_demand, draw_flows, instance_rng

# Gauss-Kronrod 7/15 rule on [-1, 1] (QUADPACK qk15 abscissae and weights).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GK_GAUSS_WEIGHTS = np.zeros(15)
GK_GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GK_GAUSS_WEIGHTS[[13, 11, 9]] = _WG[:3]
GK_GAUSS_WEIGHTS[7] = _WG[3]

DEFAULT_TOL = 1e-12
_EPS = float(np.finfo(np.float64).eps)


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    x = (0.5 * (hi + lo))[:, None] + half[:, None] * GK_NODES[None, :]
    fx = f(x)
    k15 = half * (fx @ GK_KRONROD_WEIGHTS)
    g7 = half * (fx @ GK_GAUSS_WEIGHTS)
    return k15, np.abs(k15 - g7)


def integrate_unit(f, tol: float = DEFAULT_TOL, max_evaluations: int = 2_000_000) -> QuadratureResult:
    """Globally adaptive G7/K15 integration of a vectorised ``f`` over [0, 1].

    Each round bisects every interval whose |K15 - G7| exceeds its fair
    share of the error budget, until the summed estimate is below
    ``tol * |value|``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo = np.array([0.0])
    hi = np.array([1.0])
    val, err = _gk15(f, lo, hi)
    evaluations = 15
    while True:
        value = math.fsum(val)
        total_err = math.fsum(err)
        if not (math.isfinite(value) and math.isfinite(total_err)):
            raise QuadratureError("integrand produced non-finite values")
        budget = tol * abs(value)
        if total_err <= budget:
            rounding = 50.0 * _EPS * math.fsum(np.abs(val))
            return QuadratureResult(value, max(total_err, rounding), evaluations)
        if evaluations >= max_evaluations:
            raise QuadratureError(
                f"no convergence after {evaluations} evaluations: error {total_err:.3e} vs target {budget:.3e}"
            )
        split = err > budget / err.size
        if not np.any(split):
            split = err >= err.max()
        mid = 0.5 * (lo[split] + hi[split])
        if np.any(mid - lo[split] < 1e-15):
            raise QuadratureError(
                f"interval width underflow at error {total_err:.3e} vs target {budget:.3e}; "
                "tolerance below the rounding floor?"
            )
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_val, new_err = _gk15(f, new_lo, new_hi)
        evaluations += 15 * new_lo.size
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], new_val])
        err = np.concatenate([err[keep], new_err])


def _check(k, mu, mu_f, kmin):
    if int(k) != k or k < kmin:
        raise ValueError(f"k must be an integer >= {kmin}")
    if not (mu > 0 and mu_f > 0):
        raise ValueError("rates must be positive")


def _rescale(res, log_scale):
    # exp() of a large argument carries relative rounding ~ eps * |argument|
    scale = math.exp(log_scale)
    value = res.value * scale
    err = res.abs_error_estimate * scale + 2.0 * _EPS * (1.0 + abs(log_scale)) * abs(value)
    return QuadratureResult(value, err, res.evaluations)


def quad_j(k: int, mu: float, mu_f: float, tol: float = DEFAULT_TOL) -> QuadratureResult:
    """int_0^inf ds (mu + s)^-k (mu_f + s)^-1, mapped to [0, 1) by s = mu t / (1 - t)."""
    _check(k, mu, mu_f, 1)

    def integrand(t):
        return (1.0 - t) ** (k - 1) / (mu_f * (1.0 - t) + mu * t)

    res = integrate_unit(integrand, tol)
    return _rescale(res, (1 - k) * math.log(mu))


def quad_l(k: int, mu: float, mu_f: float, tol: float = DEFAULT_TOL) -> QuadratureResult:
    """Double integral over s, t >= 0 of (mu_f + s + t)^-1 (mu + s + t)^-k.

    With u = s + t (Jacobian u) it becomes int_0^inf u (mu_f + u)^-1 (mu + u)^-k du,
    which is then mapped to [0, 1) like :func:`quad_j`.
    """
    _check(k, mu, mu_f, 2)

    def integrand(t):
        return t * (1.0 - t) ** (k - 2) / (mu_f * (1.0 - t) + mu * t)

    res = integrate_unit(integrand, tol)
    return _rescale(res, (2 - k) * math.log(mu))


def quad_kernel(k: int, phi: float, tol: float = DEFAULT_TOL) -> QuadratureResult:
    """int_0^1 t^(k-1) / (1 - phi t) dt, the integral form of B(1,k) 2F1(k,1;k+1;phi)."""
    if int(k) != k or k < 1 or not phi < 1:
        raise ValueError("need integer k >= 1 and phi < 1")
    return integrate_unit(lambda t: t ** (k - 1) / (1.0 - phi * t), tol)


def neumann_measure(m, terms: int) -> np.ndarray:
    """sum_{k=0}^{terms} M^k 1, by repeated matrix-vector products."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if np.any(m < 0):
        raise ValueError("matrix must be non-negative")
    if int(terms) != terms or terms < 0:
        raise ValueError("terms must be a non-negative integer")
    term = np.ones(m.shape[0])
    total = term.copy()
    for _ in range(int(terms)):
        term = m @ term
        total += term
    return total


def moments_bruteforce(params: ModelParams, samples: int, chunk: int = 100_000) -> MomentSet:
    """Monte Carlo E[r], E[r'], E[r r'], E[r^2] from simulated first rows.

    Only row 1 and column 1 of the flow matrix plus F_1 enter r and r', so
    each sample draws 2N - 1 flows and one demand.  Chunk ``c`` uses the
    stream ``(params.seed, c)``.
    """
    if samples < 10_000:
        raise ValueError("need at least 10^4 samples")
    n = params.n_sectors
    stats = []
    done = 0
    c = 0
    while done < samples:
        size = min(chunk, samples - done)
        rng = instance_rng(params.seed, c)
        row = draw_flows(params, rng, (size, n))  # a_{1j}, j = 1..N
        col = draw_flows(params, rng, (size, n - 1))  # a_{j1}, j = 2..N
        f = draw_demand(params, rng, size)
        row_sum = row.sum(axis=1)
        y = row_sum + f
        r = row_sum / y
        rp = (row[:, 0] + col.sum(axis=1)) / y
        stats.append(np.stack([r, rp, r * rp, r * r], axis=1))
        done += size
        c += 1
    x = np.concatenate(stats)
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(samples)
    return MomentSet(*map(float, mean), source="montecarlo", std_errors=tuple(map(float, se)))
