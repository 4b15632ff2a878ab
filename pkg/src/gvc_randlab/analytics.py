"""Closed-form moments and covariance for the exponential random model.

Everything reduces to the kernel

    G(k, phi) = B(1, k) 2F1(k, 1; k + 1; phi) = sum_{n >= 0} phi^n / (n + k),

with ``phi = 1 - mu_f / mu``.  The auxiliary integrals are
``J(k) = mu^-k G(k)`` and ``L(k) = mu^(1-k) [1/(k-1) - (1 - phi) G(k)]``,
and all the large powers ``mu^N`` appearing in the raw moment formulas
cancel against these, so the moments are evaluated directly in terms of
``G`` and never overflow.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np

SERIES_RTOL = 1e-15
CROSS_CHECK_RTOL = 1e-8
LOG_FORM_RTOL = 1e-9
_EPS = np.finfo(np.float64).eps


class AnalyticsError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MomentSet:
    """E[r], E[r'], E[r r'], E[r^2] for row sums r of A_U and r' of A_D.

    ``std_errors`` is set only for Monte Carlo estimates, in the same order.
    """

    e_r: float
    e_rp: float
    e_rrp: float
    e_r2: float
    source: str = "analytic"
    std_errors: tuple[float, float, float, float] | None = None

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.e_r, self.e_rp, self.e_rrp, self.e_r2)


def phi_from_rates(mu: float, mu_f: float) -> float:
    _check_rates(mu, mu_f)
    return 1.0 - mu_f / mu


def _check_rates(mu, mu_f):
    if not (mu > 0 and mu_f > 0 and math.isfinite(mu) and math.isfinite(mu_f)):
        raise ValueError(f"rates must be positive and finite, got mu={mu!r}, mu_f={mu_f!r}")


def _check_k(k, minimum=1):
    if int(k) != k or k < minimum:
        raise ValueError(f"k must be an integer >= {minimum}, got {k!r}")
    return int(k)


def lerch_series(k: int, phi: float) -> float:
    """sum_n phi^n / (n + k) for 0 <= phi < 1, with exact (fsum) accumulation.

    Blocks of terms are added until the geometric tail bound
    ``phi^(n+1) / ((n + k)(1 - phi))`` drops below ``SERIES_RTOL`` times
    the partial sum.
    """
    if phi == 0.0:
        return 1.0 / k
    log_phi = math.log(phi)
    parts: list[float] = []
    total = 0.0
    start, block = 0, 1024
    while True:
        n = np.arange(start, start + block, dtype=np.float64)
        parts.append(math.fsum(np.exp(n * log_phi) / (n + k)))
        total = math.fsum(parts)
        nxt = start + block
        tail = math.exp(nxt * log_phi) / ((nxt - 1 + k) * (1.0 - phi))
        if tail < SERIES_RTOL * total:
            return total
        start = nxt
        block = min(2 * block, 1 << 20)


def _pfaff_series(k: int, phi: float) -> float:
    # phi < 0: 2F1(k,1;k+1;phi) = (1-phi)^-1 2F1(1,1;k+1;w), w = phi/(phi-1) in (0,1).
    w = phi / (phi - 1.0)
    term, terms, n = 1.0, [1.0], 0
    while True:
        term *= (n + 1) / (n + k + 1) * w
        terms.append(term)
        n += 1
        if term / (1.0 - w) < SERIES_RTOL * terms[0]:
            break
    return math.fsum(terms) / (k * (1.0 - phi))


def log_form(k: int, phi: float) -> tuple[float, float]:
    """phi^-k [-ln(1 - phi) - sum_{m<k} phi^m / m] and its rounding-error bound.

    The bracket cancels badly once phi^k is small; the returned bound is the
    estimated relative error of the value, from which callers decide
    whether the form is usable.
    """
    if not 0.0 < phi < 1.0:
        raise ValueError("log form needs 0 < phi < 1")
    m = np.arange(1, k, dtype=np.float64)
    head = math.fsum(np.exp(m * math.log(phi)) / m) if k > 1 else 0.0
    lead = -math.log1p(-phi)
    bracket = lead - head
    scale = -k * math.log(phi)
    # phi^k below e^-700 leaves nothing of the bracket but rounding
    if bracket <= 0.0 or scale > 700.0:
        return math.nan, math.inf
    err = 4.0 * _EPS * (lead + head) / bracket
    return bracket * math.exp(scale), err


@functools.lru_cache(maxsize=65536)
def hyp2f1_special(k: int, phi: float) -> float:
    """B(1, k) * 2F1(k, 1; k + 1; phi) for integer k >= 1 and phi < 1.

    Evaluated as the Lerch series; when the logarithmic closed form is
    numerically safe it is computed too and must agree.
    """
    k = _check_k(k)
    phi = float(phi)
    if not phi < 1.0:
        raise ValueError(f"series diverges for phi >= 1 (got {phi!r})")
    if phi < 0.0:
        return _pfaff_series(k, phi)
    value = lerch_series(k, phi)
    if phi > 0.0:
        closed, err = log_form(k, phi)
        if err < 1e-11:
            rel = abs(closed - value) / value
            if rel > LOG_FORM_RTOL:
                raise AnalyticsError(f"series and log form disagree for k={k}, phi={phi!r}: rel diff {rel:.3e}")
    return value


def _power(log_scale, k, mu):
    try:
        return math.exp(log_scale)
    except OverflowError:
        raise AnalyticsError(f"mu^{k} scale factor overflows at mu={mu}") from None


def j_integral(k: int, mu: float, mu_f: float) -> float:
    """J(k) = int_0^inf ds (mu + s)^-k (mu_f + s)^-1."""
    k = _check_k(k)
    phi = phi_from_rates(mu, mu_f)
    return _power(-k * math.log(mu), -k, mu) * hyp2f1_special(k, phi)


def _scaled_l(k: int, phi: float) -> float:
    # mu^(k-1) L(k)
    return 1.0 / (k - 1) - (1.0 - phi) * hyp2f1_special(k, phi)


def l_integral(k: int, mu: float, mu_f: float) -> float:
    """L(k) = mu^(1-k)/(k-1) - mu_f J(k), the double integral of
    (mu_f + s + t)^-1 (mu + s + t)^-k over the positive quadrant."""
    k = _check_k(k, minimum=2)
    phi = phi_from_rates(mu, mu_f)
    scaled = _scaled_l(k, phi)
    if not scaled > 0.0:
        raise AnalyticsError(f"L({k}) evaluated non-positive ({scaled!r}) at mu={mu}, mu_f={mu_f}")
    return _power((1 - k) * math.log(mu), 1 - k, mu) * scaled


def _moments_phi(n: int, phi: float) -> tuple[float, float, float, float]:
    eps = 1.0 - phi  # mu_f / mu
    g_n = hyp2f1_special(n, phi)
    g_n1 = hyp2f1_special(n + 1, phi)
    l_n1 = 1.0 / n - eps * g_n1
    l_n2 = _scaled_l(n + 2, phi)
    e_r = eps * n * g_n1
    e_rp = eps * (g_n1 + (n - 1) * g_n)
    e_rrp = eps * ((n + 1) * l_n2 + n * (n - 1) * l_n1)
    e_r2 = eps * (n * n + n) * l_n2
    return e_r, e_rp, e_rrp, e_r2


def moments_analytic(n: int, mu: float, mu_f: float) -> MomentSet:
    n = _check_k(n)
    phi = phi_from_rates(mu, mu_f)
    if mu_f >= mu:
        warnings.warn(f"mu_f={mu_f} >= mu={mu}: outside the regime where A_D is substochastic", stacklevel=2)
    values = _moments_phi(n, phi)
    if not all(math.isfinite(v) for v in values):
        raise AnalyticsError(f"non-finite moments at n={n}, mu={mu}, mu_f={mu_f}")
    return MomentSet(*values)


def covariance_from_moments(m: MomentSet) -> float:
    if m.e_r >= 1.0 or m.e_rp >= 1.0:
        raise AnalyticsError(f"E[r]={m.e_r:.6g}, E[r']={m.e_rp:.6g}: need both < 1")
    return (m.e_rrp - m.e_r * m.e_rp) / ((1.0 - m.e_r) * (1.0 - m.e_rp))


def covariance_closed_form(n: int, phi: float) -> float:
    """-Num_N(phi) / Den_N(phi), transcribed term by term in B(1,.) 2F1 blocks."""
    b_n = hyp2f1_special(n, phi)  # B(1,N) 2F1(1,N;N+1;phi)
    b_n1 = hyp2f1_special(n + 1, phi)
    b_n2 = hyp2f1_special(n + 2, phi)
    p = phi - 1.0
    num = p * (
        n * p * b_n1**2
        + (n - 1) * n * p * b_n1 * (b_n + 1.0)
        + (n + 1) * p * b_n2
        + n
    )
    den = ((n - 1) * p * b_n + p * b_n1 + 1.0) * (n * p * b_n1 + 1.0)
    return -num / den


def covariance_exact(n: int, mu: float, mu_f: float) -> float:
    """Simplified covariance C_N(mu, mu_f), checked by two independent routes."""
    n = _check_k(n)
    phi = phi_from_rates(mu, mu_f)
    via_moments = covariance_from_moments(MomentSet(*_moments_phi(n, phi)))
    via_closed = covariance_closed_form(n, phi)
    rel = abs(via_moments - via_closed) / abs(via_closed)
    if rel > CROSS_CHECK_RTOL:
        raise AnalyticsError(
            f"covariance routes disagree at N={n}, mu={mu}, mu_f={mu_f}: "
            f"{via_moments!r} vs {via_closed!r} (rel {rel:.3e})"
        )
    return via_moments


def slope_exact(n: int, mu: float, mu_f: float) -> float:
    """Approximate scatter slope C_N (1 - E[r])^2 / Var[r]."""
    cov = covariance_exact(n, mu, mu_f)
    m = MomentSet(*_moments_phi(int(n), phi_from_rates(mu, mu_f)))
    var = m.e_r2 - m.e_r**2
    if not var > 0.0:
        raise AnalyticsError(f"Var[r] = {var!r} is not positive at N={n}, mu={mu}, mu_f={mu_f}")
    return cov * (1.0 - m.e_r) ** 2 / var


def covariance_curve(n_max: int, mu: float, mu_f: float) -> list[tuple[int, float]]:
    n_max = _check_k(n_max)
    return [(n, covariance_exact(n, mu, mu_f)) for n in range(1, n_max + 1)]
