"""Upstreamness and downstreamness of sectors.

The "true" measures solve ``(I - M) x = 1`` with ``M = A_U`` (upstreamness)
or ``M = A_D`` (downstreamness).  The Fally variants reach the same vector
by fixed-point iteration on the defining recursions, and the rank-1
estimators only need row sums.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .model import IoTable, SubstochasticPair

RESIDUAL_TOL = 1e-10
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 1_000_000


class MeasureError(ArithmeticError):
    """A measure could not be computed (singular system, divergence, ...)."""


class MeasureKind(str, enum.Enum):
    U1 = "U1"
    D1 = "D1"
    U2 = "U2"
    D2 = "D2"
    U_TILDE = "U_tilde"
    D_TILDE = "D_tilde"


@dataclass(frozen=True, eq=False)
class MeasureVector:
    values: NDArray[np.float64]
    kind: MeasureKind

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def _check_solution(m, x, kind, residual):
    # Any matrix similar to a row-substochastic one has spectral radius < 1,
    # so the Neumann series makes every component >= 1.  A component below
    # one (or a large residual) means the system is outside that regime.
    worst_row = int(np.argmax(m.sum(axis=1)))
    if not np.all(np.isfinite(x)):
        raise MeasureError(f"{kind.value}: non-finite solution; row {worst_row} has the largest row sum")
    res = float(np.max(np.abs(residual)))
    if res > RESIDUAL_TOL * max(1.0, float(np.max(np.abs(x)))):
        raise MeasureError(
            f"{kind.value}: ill-conditioned system, residual {res:.3e}; "
            f"row {worst_row} has row sum {m[worst_row].sum():.17g}"
        )
    if np.min(x) < 1.0 - 1e-9:
        raise MeasureError(
            f"{kind.value}: component {int(np.argmin(x))} below 1 ({np.min(x):.6g}); spectral radius >= 1, "
            f"row {worst_row} has row sum {m[worst_row].sum():.17g}"
        )


def _leontief(m: NDArray[np.float64], kind: MeasureKind) -> MeasureVector:
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    if m.ndim != 2 or m.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if np.any(m < 0):
        raise ValueError(f"{kind.value}: share matrix has negative entries")
    ones = np.ones(n)
    lhs = np.eye(n) - m
    try:
        x = scipy.linalg.solve(lhs, ones, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        worst_row = int(np.argmax(m.sum(axis=1)))
        raise MeasureError(f"{kind.value}: singular system; row {worst_row} has the largest row sum") from exc
    _check_solution(m, x, kind, lhs @ x - ones)
    return MeasureVector(x, kind)


def upstreamness_true(a_u) -> MeasureVector:
    """U1 = (I - A_U)^-1 1, by LU solve."""
    return _leontief(a_u, MeasureKind.U1)


def downstreamness_true(a_d) -> MeasureVector:
    """D1 = (I - A_D)^-1 1, by LU solve."""
    return _leontief(a_d, MeasureKind.D1)


def true_measures(table: IoTable, pair: SubstochasticPair) -> tuple[MeasureVector, MeasureVector]:
    """U1 and D1 from a single LU factorisation.

    ``I - A_D = Y^-1 (I - A_U)^T Y``, so ``D1 = Y^-1 (I - A_U)^-T y``.
    Residuals of both systems are checked against the original matrices.
    """
    n = table.n
    ones = np.ones(n)
    lhs = np.eye(n) - pair.a_u
    try:
        lu = scipy.linalg.lu_factor(lhs, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        worst_row = int(np.argmax(pair.a_u.sum(axis=1)))
        raise MeasureError(f"U1: singular system; row {worst_row} has the largest row sum") from exc
    u = scipy.linalg.lu_solve(lu, ones, check_finite=False)
    d = scipy.linalg.lu_solve(lu, table.y, trans=1, check_finite=False) / table.y
    _check_solution(pair.a_u, u, MeasureKind.U1, lhs @ u - ones)
    _check_solution(pair.a_d, d, MeasureKind.D1, d - pair.a_d @ d - ones)
    return MeasureVector(u, MeasureKind.U1), MeasureVector(d, MeasureKind.D1)


def _fixed_point(step, n, kind, tol, max_iter):
    x = np.ones(n)
    for _ in range(max_iter):
        x_new = step(x)
        if not np.all(np.isfinite(x_new)):
            break
        if np.max(np.abs(x_new - x)) < tol:
            return MeasureVector(x_new, kind)
        x = x_new
    raise MeasureError(f"{kind.value}: fixed-point iteration did not converge in {max_iter} steps (spectral radius >= 1?)")


def upstreamness_fally(table: IoTable, tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_MAX_ITER) -> MeasureVector:
    """Iterate U_i = 1 + sum_j (d_ij Y_j / Y_i) U_j from the all-ones vector."""
    y = table.y
    d = table.a / y[None, :]  # dollars of i per dollar of j's output
    w = d * y[None, :] / y[:, None]
    return _fixed_point(lambda u: 1.0 + w @ u, table.n, MeasureKind.U2, tol, max_iter)


def downstreamness_fally(table: IoTable, tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_MAX_ITER) -> MeasureVector:
    """Iterate D_i = 1 + sum_j d_ji D_j, with d_ji = a_ji / Y_i."""
    d = table.a / table.y[None, :]
    return _fixed_point(lambda x: 1.0 + d.T @ x, table.n, MeasureKind.D2, tol, max_iter)


def _rank1(m, kind):
    r = np.asarray(m, dtype=np.float64).sum(axis=1)
    mean = r.mean()
    if mean >= 1.0:
        raise MeasureError(f"{kind.value}: mean row sum {mean:.17g} >= 1")
    return MeasureVector(1.0 + r / (1.0 - mean), kind)


def rank1_estimators(pair: SubstochasticPair) -> tuple[MeasureVector, MeasureVector]:
    """U~_i = 1 + r_i / (1 - mean(r)), and D~ likewise from the rows of A_D."""
    return _rank1(pair.a_u, MeasureKind.U_TILDE), _rank1(pair.a_d, MeasureKind.D_TILDE)
