"""Closed-form transform of the cascade and its minimizing exponent.

The moment transform phi(Q, theta) = cosh(beta * theta) / cos(pi * theta) is
finite on the open interval (3/2, 5/2).  Its normalized logarithm
velocity(theta) = log(phi) / theta attains a positive minimum mu_Q at a
unique interior point theta_star, characterized by a strictly increasing
first-order residual.  Everything here is deterministic scalar numerics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence, TextIO

from .weights import beta_from_charge

THETA_DOMAIN = (1.5, 2.5)
RESIDUAL_TOL = 1e-10
_EDGE = 1e-9  # offset from the domain endpoints when bracketing


class PhiEval(NamedTuple):
    """Transform value with its analytic derivative.

    ``is_infinite`` flags evaluation outside the finiteness interval; callers
    should branch on it rather than doing arithmetic with ``math.inf``.  For
    large beta the value can overflow float range while remaining
    mathematically finite; ``log_value`` stays accurate in that regime.
    """

    value: float
    derivative: float
    is_infinite: bool
    log_value: float


def _log_cosh(x: float) -> float:
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def _in_domain(theta: float) -> bool:
    return THETA_DOMAIN[0] < theta < THETA_DOMAIN[1]


def log_phi(Q: float, theta: float) -> float:
    """log of the moment transform; +inf outside the finiteness interval."""
    if not _in_domain(theta):
        return math.inf
    beta = beta_from_charge(Q)
    c = math.cos(math.pi * theta)
    if c <= 0.0:
        return math.inf
    return _log_cosh(beta * theta) - math.log(c)


def dlog_phi(Q: float, theta: float) -> float:
    """Derivative of log_phi: beta*tanh(beta*theta) + pi*tan(pi*theta)."""
    beta = beta_from_charge(Q)
    return beta * math.tanh(beta * theta) + math.pi * math.tan(math.pi * theta)


def phi(Q: float, theta: float) -> PhiEval:
    """Moment transform cosh(beta*theta)/cos(pi*theta) on (3/2, 5/2).

    Outside the interval the transform diverges; the result carries an
    ``is_infinite`` sentinel flag instead of relying on IEEE infinities.
    """
    lp = log_phi(Q, theta)
    if math.isinf(lp):
        return PhiEval(math.inf, math.nan, True, math.inf)
    value = math.exp(lp) if lp < 709.0 else math.inf
    derivative = value * dlog_phi(Q, theta)
    return PhiEval(value, derivative, False, lp)


def velocity(Q: float, theta: float) -> float:
    """Normalized log-transform log(phi)/theta; +inf outside the domain."""
    lp = log_phi(Q, theta)
    return lp / theta if math.isfinite(lp) else math.inf


def _residual(Q: float, theta: float) -> float:
    """First-order condition for the velocity minimum, strictly increasing.

    residual = d/dtheta log(phi) - velocity; it runs from -inf at the left
    endpoint to +inf at the right one, so bisection is certifiably safe.
    """
    return dlog_phi(Q, theta) - velocity(Q, theta)


def theta_star(Q: float, tol: float = RESIDUAL_TOL) -> float:
    """Unique minimizing exponent in (3/2, 5/2), by bisection on the residual."""
    lo = THETA_DOMAIN[0] + _EDGE
    hi = THETA_DOMAIN[1] - _EDGE
    r_lo = _residual(Q, lo)
    r_hi = _residual(Q, hi)
    if not (r_lo < 0.0 < r_hi):
        raise ArithmeticError(
            f"residual not bracketed at domain edges: {r_lo:.3e}, {r_hi:.3e}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _residual(Q, mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 4.0 * math.ulp(mid):
            break
    root = 0.5 * (lo + hi)
    if abs(_residual(Q, root)) > tol:
        raise ArithmeticError(f"residual {abs(_residual(Q, root)):.3e} above {tol}")
    return root


def velocity_mu(Q: float) -> float:
    """Minimum of velocity over (3/2, 5/2): golden-section, then polishing.

    The golden-section stage localizes the minimum of the convex-shaped
    velocity; the polish bisects the derivative condition (same residual as
    ``theta_star``) inside the localized bracket.  Always positive.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a = THETA_DOMAIN[0] + _EDGE
    b = THETA_DOMAIN[1] - _EDGE
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    vc, vd = velocity(Q, c), velocity(Q, d)
    for _ in range(100):
        if vc <= vd:
            b, d, vd = d, c, vc
            c = b - invphi * (b - a)
            vc = velocity(Q, c)
        else:
            a, c, vc = c, d, vd
            d = a + invphi * (b - a)
            vd = velocity(Q, d)
        if b - a < 1e-6:
            break
    # Polish: bisect the increasing residual inside [a, b] (pad if one-sided).
    lo = max(THETA_DOMAIN[0] + _EDGE, a - 1e-5)
    hi = min(THETA_DOMAIN[1] - _EDGE, b + 1e-5)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _residual(Q, mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 4.0 * math.ulp(mid):
            break
    return velocity(Q, 0.5 * (lo + hi))


@dataclass(frozen=True)
class BigginsProfile:
    """Solved minimizing exponent and velocity for one charge value."""

    Q: float
    beta: float
    theta_domain: tuple[float, float]
    mu_Q: float
    theta_star: float

    def __post_init__(self):
        if not self.theta_domain[0] < self.theta_star < self.theta_domain[1]:
            raise ValueError("minimizing exponent must be interior")
        lp = log_phi(self.Q, self.theta_star)
        if abs(lp / self.theta_star - self.mu_Q) > 1e-9:
            raise ValueError("velocity and exponent are inconsistent")
        if self.mu_Q <= 0.0:
            raise ValueError("velocity must be positive")

    @classmethod
    def for_charge(cls, Q: float) -> "BigginsProfile":
        ts = theta_star(Q)
        return cls(
            Q=Q,
            beta=beta_from_charge(Q),
            theta_domain=THETA_DOMAIN,
            mu_Q=velocity(Q, ts),
            theta_star=ts,
        )


def figure_theta_star(grid: Sequence[float]) -> list[tuple[float, float, float]]:
    """Rows (Q, theta_star, mu_Q) for each charge in the grid."""
    rows = []
    for Q in grid:
        ts = theta_star(Q)
        rows.append((Q, ts, velocity(Q, ts)))
    return rows


def write_figure_csv(rows: Iterable[tuple[float, float, float]], out: TextIO) -> None:
    """Write figure rows as RFC-4180 CSV with 12 significant digits."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Q", "theta_star", "mu_Q"])
    for Q, ts, mu in rows:
        writer.writerow([f"{Q:.12g}", f"{ts:.12g}", f"{mu:.12g}"])
