"""Boltzmann weight sequences and their offspring distributions.

Constructs, classifies, and transforms the weight sequences that drive the
map samplers: the default critical power-tail offspring law, the partition
point Z of a weight sequence, the subcritical tilt by a finiteness table,
and size-biasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

import numpy as np
from scipy.special import zeta

MASS_TOL = 1e-12
MEAN_TOL = 1e-8
ROOT_RESIDUAL_TOL = 1e-10

# Alias tables cover values below this cutoff directly; an analytic power
# tail (when present) is sampled by exact discrete inversion above it.
DEFAULT_ALIAS_CUTOFF = 1 << 15
_TILT_HORIZON_CAP = 10_000_000


class AdmissibilityError(ValueError):
    """Raised when a weight sequence has no partition point."""


class DegenerateDistributionError(ValueError):
    """Raised when an operation needs a nondegenerate distribution."""


class CoverageError(ValueError):
    """Raised when a lookup table does not cover a requested range."""


class FeasibilityError(RuntimeError):
    """Raised when a sampler exhausts its attempt budget without success."""


def _tail_sum(coeff: float, power: float, start: int, moment: int = 0) -> float:
    """Sum of coeff * k^(moment - power) over k >= start (+inf if divergent)."""
    if coeff == 0.0 or start <= 0:
        return 0.0
    exponent = power - moment
    if exponent <= 1.0:
        return math.inf
    return coeff * float(zeta(exponent, start))


@dataclass(frozen=True)
class PowerTail:
    """Analytic tail descriptor: mass coeff * k^(-power) for k >= start."""

    coeff: float
    power: float
    start: int

    def mass(self, k: int) -> float:
        return self.coeff * k ** (-self.power)


@dataclass(frozen=True)
class SamplerTables:
    """Alias table plus optional tail-inversion data, shared by both backends.

    Cells 0..n_direct-1 map to the integer values 0..n_direct-1.  When a tail
    is present there is one extra cell whose hit triggers exact discrete
    inversion of the conditional tail law coeff * k^(-power), k >= n_direct.
    """

    prob: np.ndarray  # float64, acceptance probability per cell
    alias: np.ndarray  # int64, alias cell index
    n_direct: int
    tail_coeff: float = 0.0
    tail_power: float = 0.0
    tail_mass: float = 0.0

    @property
    def n_cells(self) -> int:
        return self.prob.size

    @property
    def has_tail(self) -> bool:
        return self.tail_mass > 0.0


def _build_alias(masses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias construction for a probability vector summing to 1."""
    n = masses.size
    prob = np.zeros(n, dtype=np.float64)
    alias = np.arange(n, dtype=np.int64)
    scaled = (masses * n).astype(np.float64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    for i in large:
        prob[i] = 1.0
    for i in small:
        prob[i] = 1.0  # numerical leftovers from the subtraction above
    return prob, alias


@dataclass(frozen=True)
class OffspringDistribution:
    """Probability measure on the nonnegative integers.

    Finite atoms are stored explicitly; an optional analytic power tail
    coeff * k^(-power) for k >= tail.start represents infinite support
    exactly (moments use Hurwitz-zeta tail sums rather than truncation).
    """

    atoms: dict[int, float]
    tail: Optional[PowerTail] = None
    alias_cutoff: int = DEFAULT_ALIAS_CUTOFF

    def __post_init__(self):
        if any(k < 0 for k in self.atoms):
            raise ValueError("support must be nonnegative")
        if any(m < 0 for m in self.atoms.values()):
            raise ValueError("all masses must be nonnegative")
        if self.tail is not None:
            if self.tail.coeff < 0 or self.tail.start <= 0:
                raise ValueError("invalid tail descriptor")
            if any(k >= self.tail.start for k in self.atoms):
                raise ValueError("explicit atoms must lie below the tail start")
            if self.tail.power <= 1.0:
                raise ValueError("tail power must exceed 1 for summability")
        total = self.total_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")

    # -- moments -----------------------------------------------------------

    @cached_property
    def total_mass(self) -> float:
        total = math.fsum(self.atoms.values())
        if self.tail is not None:
            total += _tail_sum(self.tail.coeff, self.tail.power, self.tail.start)
        return total

    @cached_property
    def mean(self) -> float:
        m = math.fsum(k * v for k, v in self.atoms.items())
        if self.tail is not None:
            m += _tail_sum(self.tail.coeff, self.tail.power, self.tail.start, moment=1)
        return m

    @cached_property
    def variance(self) -> float:
        if not math.isfinite(self.mean):
            return math.inf
        second = math.fsum(k * k * v for k, v in self.atoms.items())
        if self.tail is not None:
            second += _tail_sum(self.tail.coeff, self.tail.power, self.tail.start, moment=2)
        if not math.isfinite(second):
            return math.inf
        return second - self.mean**2

    @property
    def tail_exponent(self) -> Optional[float]:
        return self.tail.power if self.tail is not None else None

    def mass(self, k: int) -> float:
        if k in self.atoms:
            return self.atoms[k]
        if self.tail is not None and k >= self.tail.start:
            return self.tail.mass(k)
        return 0.0

    @property
    def max_atom(self) -> int:
        """Largest point of explicit support (a tail extends beyond it)."""
        return max(self.atoms) if self.atoms else 0

    # -- sampling support ----------------------------------------------------

    @cached_property
    def sampler_tables(self) -> SamplerTables:
        if self.tail is None:
            n_direct = self.max_atom + 1
            masses = np.zeros(n_direct, dtype=np.float64)
            for k, v in self.atoms.items():
                masses[k] = v
            prob, alias = _build_alias(masses / masses.sum())
            return SamplerTables(prob, alias, n_direct)
        n_direct = max(self.alias_cutoff, self.tail.start)
        masses = np.zeros(n_direct + 1, dtype=np.float64)
        for k, v in self.atoms.items():
            masses[k] = v
        ks = np.arange(self.tail.start, n_direct, dtype=np.float64)
        masses[self.tail.start : n_direct] = self.tail.coeff * ks ** (-self.tail.power)
        tail_mass = _tail_sum(self.tail.coeff, self.tail.power, n_direct)
        masses[n_direct] = tail_mass
        prob, alias = _build_alias(masses / masses.sum())
        return SamplerTables(
            prob, alias, n_direct, self.tail.coeff, self.tail.power, tail_mass
        )

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        out = {
            "probs": sorted([int(k), v] for k, v in self.atoms.items()),
            "mean": self.mean,
            "variance": None if math.isinf(self.variance) else self.variance,
        }
        if self.tail is not None:
            out["tail"] = {
                "coeff": self.tail.coeff,
                "power": self.tail.power,
                "start": self.tail.start,
            }
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "OffspringDistribution":
        tail = None
        if data.get("tail"):
            t = data["tail"]
            tail = PowerTail(t["coeff"], t["power"], int(t["start"]))
        atoms = {int(k): float(v) for k, v in data["probs"]}
        return cls(atoms, tail)


@dataclass(frozen=True)
class WeightSequence:
    """Face-weight sequence with its partition point and classification.

    ``mu_tail`` carries the analytic tail of the derived offspring law when
    the sequence was produced from a power-tail distribution, so that
    ``mu_from_weights(weights_from_mu(mu))`` is exact.
    """

    q: dict[int, float]
    Z: float
    classification: str
    mu_tail: Optional[PowerTail] = None

    def __post_init__(self):
        if self.Z <= 1.0:
            raise ValueError("partition point must exceed 1")
        if any(k < 1 for k in self.q) or any(w < 0 for w in self.q.values()):
            raise ValueError("weights must be nonnegative and indexed by k >= 1")

    def weight(self, k: int) -> float:
        """q_k, reconstructing implicit tail weights when present."""
        if k in self.q:
            return self.q[k]
        if self.mu_tail is not None and k >= self.mu_tail.start:
            return math.exp(
                math.log(self.mu_tail.mass(k))
                - (k - 1) * math.log(self.Z)
                - log_binom_central(k)
            )
        return 0.0

    def to_json_dict(self) -> dict:
        out = {
            "q": sorted([int(k), w] for k, w in self.q.items()),
            "Z": self.Z,
            "classification": self.classification,
        }
        if self.mu_tail is not None:
            out["mu_tail"] = {
                "coeff": self.mu_tail.coeff,
                "power": self.mu_tail.power,
                "start": self.mu_tail.start,
            }
        return out


@dataclass(frozen=True)
class ModelConfig:
    """Model parameters: charge Q, default-law tail coefficient, budgets."""

    Q: float
    c_tail: float = 0.5
    p_max: int = 64
    step_budget: int = 10**9
    perimeter_budget: int = 10**7
    max_generations: int = 1000

    def __post_init__(self):
        if not 0.0 < self.Q < 2.0:
            raise ValueError("Q must lie strictly inside (0, 2)")
        if self.c_tail <= 0.0:
            raise ValueError("c_tail must be positive")
        if self.p_max < 1:
            raise ValueError("p_max must be at least 1")

    @property
    def beta(self) -> float:
        """Ring log-ratio scale pi * sqrt(4 - Q^2) / Q."""
        return beta_from_charge(self.Q)

    @property
    def central_charge(self) -> float:
        return 1.0 + 6.0 * self.Q**2

    @cached_property
    def mu(self) -> OffspringDistribution:
        return make_default_critical_mu(self.c_tail)


def beta_from_charge(Q: float) -> float:
    """Log-ratio scale pi * sqrt(4 - Q^2) / Q, finite and positive on (0, 2)."""
    if not 0.0 < Q <= 2.0:
        raise ValueError("Q must lie in (0, 2]")
    return math.pi * math.sqrt(4.0 - Q * Q) / Q


def binom_central(k: int) -> float:
    """binom(2k-1, k-1), exact for small k, lgamma beyond."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k <= 32:
        return float(math.comb(2 * k - 1, k - 1))
    return math.exp(log_binom_central(k))


def log_binom_central(k: int) -> float:
    if k <= 32:
        return math.log(math.comb(2 * k - 1, k - 1))
    return math.lgamma(2 * k) - math.lgamma(k + 1) - math.lgamma(k) - math.log(2.0)


def c_tail_max() -> float:
    """Largest tail coefficient keeping the default law's mass at 1 nonnegative."""
    return 1.0 / (float(zeta(1.5, 1)) - 1.0)


def make_default_critical_mu(c_tail: float) -> OffspringDistribution:
    """Critical offspring law with pure power tail c_tail * k^(-5/2) for k >= 2.

    The masses at 1 and 0 are fixed by total mass 1 and mean exactly 1, which
    pins the law in the infinite-variance (tail exponent 5/2) critical class.
    """
    c_max = c_tail_max()
    if not 0.0 < c_tail <= c_max:
        raise ValueError(
            f"c_tail={c_tail} outside the admissible interval (0, {c_max:.6f}]"
        )
    zeta_32 = float(zeta(1.5, 1))
    zeta_52 = float(zeta(2.5, 1))
    mu1 = 1.0 - c_tail * (zeta_32 - 1.0)
    mu0 = c_tail * (zeta_32 - zeta_52)
    return OffspringDistribution(atoms={0: mu0, 1: mu1}, tail=PowerTail(c_tail, 2.5, 2))


class _SeriesEvaluator:
    """Vectorized log-space evaluation of f_q(x) = sum binom(2k-1,k-1) q_k x^(k-1)."""

    def __init__(self, q: dict[int, float]):
        ks = np.array(sorted(k for k, w in q.items() if w > 0.0), dtype=np.int64)
        self.ks = ks
        self.log_terms = np.array(
            [log_binom_central(int(k)) + math.log(q[int(k)]) for k in ks]
        )

    def __call__(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        exponents = self.log_terms + (self.ks - 1) * math.log(x)
        if exponents.max(initial=-math.inf) > 700.0:
            return math.inf
        return float(np.exp(exponents).sum())


def solve_partition_point(q: dict[int, float], tol: float = ROOT_RESIDUAL_TOL) -> float:
    """Smallest positive root of f_q(x) = 1 - 1/x, by bracketing and bisection.

    The gap g(x) = f_q(x) - 1 + 1/x is convex with g(0+) = +inf, so the
    smallest root is bracketed between a point with g > 0 and the convex
    minimum; a tangent minimum (critical sequence) is accepted when the
    residual there is below tolerance.
    """
    if not q or all(w == 0.0 for w in q.values()):
        # f_q = 0: the root of 0 = 1 - 1/x is x = 1 (all mass on steps down).
        return 1.0
    f = _SeriesEvaluator(q)

    def g(x: float) -> float:
        fx = f(x)
        return fx if math.isinf(fx) else fx - 1.0 + 1.0 / x

    # Expand hi past the convex minimum (g eventually grows or blows up).
    lo = 1e-9
    hi, g_hi = 1.0, g(1.0)
    for _ in range(100):
        nxt = g(hi * 2.0)
        if math.isinf(nxt) or nxt >= g_hi:
            hi *= 2.0
            break
        hi *= 2.0
        g_hi = nxt
    else:
        raise AdmissibilityError("series keeps decreasing; no minimum found")

    # Golden-section search for the minimum of g on [lo, hi].
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(300):
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
        if b - a < 1e-13 * max(1.0, b):
            break
    x_min = (a + b) / 2.0
    g_min = g(x_min)
    if g_min > tol:
        raise AdmissibilityError(f"no root: minimal residual {g_min:.3e} at x = {x_min:.6g}")
    if abs(g_min) <= tol:
        return x_min
    # Strictly negative minimum: bisect the decreasing branch on [lo, x_min]
    # for the smallest root.
    left, right = lo, x_min
    if g(left) <= 0.0:
        raise AdmissibilityError("no positive residual near 0; malformed series")
    for _ in range(200):
        mid = (left + right) / 2.0
        if g(mid) > 0.0:
            left = mid
        else:
            right = mid
    root = right
    if abs(g(root)) > 10.0 * tol:
        raise AdmissibilityError(f"bisection stalled, residual {g(root):.3e}")
    return root


def classify(mu: OffspringDistribution) -> str:
    """Classify a weight sequence by its derived offspring mean and tail."""
    if mu.mean < 1.0 - MEAN_TOL:
        return "subcritical"
    if abs(mu.mean - 1.0) <= MEAN_TOL:
        if mu.tail is not None and not math.isfinite(mu.variance):
            a = mu.tail.power - 0.5
            return f"non-generic-critical({a:g})"
        return "generic-critical"
    raise AdmissibilityError(f"offspring mean {mu.mean} exceeds 1")


def mu_from_weights(q: WeightSequence | dict[int, float]) -> OffspringDistribution:
    """Offspring law mu(k) = Z^(k-1) binom(2k-1, k-1) q_k for k >= 1, mu(0) = 1/Z."""
    if isinstance(q, WeightSequence):
        weights, Z, mu_tail = q.q, q.Z, q.mu_tail
    else:
        weights = {k: w for k, w in q.items() if w > 0.0}
        mu_tail = None
        Z = solve_partition_point(weights)
    atoms = {0: 1.0 / Z}
    for k, w in weights.items():
        if w == 0.0:
            continue
        atoms[k] = math.exp(math.log(w) + log_binom_central(k) + (k - 1) * math.log(Z))
    return OffspringDistribution(atoms=atoms, tail=mu_tail)


def weights_from_mu(mu: OffspringDistribution) -> WeightSequence:
    """Inverse of mu_from_weights: q_k = mu(k) Z^(1-k) / binom(2k-1, k-1).

    The partition point is Z = 1/mu(0); a power tail on mu is carried as a
    descriptor so the round trip is exact.
    """
    mu0 = mu.mass(0)
    if mu0 <= 0.0:
        raise DegenerateDistributionError("mu(0) must be positive")
    Z = 1.0 / mu0
    q = {}
    for k, v in mu.atoms.items():
        if k >= 1 and v > 0.0:
            q[k] = math.exp(math.log(v) - (k - 1) * math.log(Z) - log_binom_central(k))
    return WeightSequence(q=q, Z=Z, classification=classify(mu), mu_tail=mu.tail)


def from_weights(q: dict[int, float]) -> WeightSequence:
    """Solve the partition point for explicit weights and classify."""
    weights = {k: w for k, w in q.items() if w > 0.0}
    Z = solve_partition_point(weights)
    mu = mu_from_weights(weights)
    return WeightSequence(q=weights, Z=Z, classification=classify(mu))


def tilt_subcritical(q: WeightSequence, F, ring) -> WeightSequence:
    """Reweight q_k by the expected finiteness of the ring inner perimeter.

    q'_k = E_ring^(k)[F(inner)] * q_k.  With the convention F(m) = 0 beyond
    the table horizon, the tilt vanishes exactly once every ring atom of k
    exceeds F.p_max; for the default ring law that happens past
    k = (p_max + 1) * exp(beta).  The result is admissible and strictly
    subcritical whenever F is nontrivial.
    """
    from .rings import CUSTOM_TABLE, tilted_inner_expectation

    p_max = F.p_max
    if ring.variant == CUSTOM_TABLE:
        candidates: Iterable[int] = sorted(ring.tables)
        open_ended = False
    else:
        # Largest k whose down atom floor(k * exp(-beta)) can still be <= p_max.
        k_cap = math.ceil((p_max + 1) * math.exp(beta_from_charge(ring.Q))) - 1
        candidates = range(1, min(k_cap, _TILT_HORIZON_CAP) + 1)
        open_ended = True
    max_explicit = max(q.q, default=0)
    q_new: dict[int, float] = {}
    for k in candidates:
        w = q.weight(k)
        if w <= 0.0:
            # Beyond the explicit atoms the weights decay like (4Z)^-k, so a
            # floating-point underflow there means every later term is zero.
            if open_ended and k > max_explicit:
                break
            continue
        e_k = tilted_inner_expectation(ring, k, F)
        if e_k > 0.0:
            q_new[k] = w * e_k
    if not q_new:
        raise CoverageError("tilt produced an empty weight sequence")
    return from_weights(q_new)


def size_bias(nu: OffspringDistribution) -> OffspringDistribution:
    """Size-biased law nu*(i) = i nu(i) / mean(nu); nu*(0) = 0."""
    if not math.isfinite(nu.mean) or nu.mean <= 0.0:
        raise DegenerateDistributionError("size-biasing needs a finite nonzero mean")
    atoms = {k: k * v / nu.mean for k, v in nu.atoms.items() if k >= 1 and v > 0.0}
    tail = None
    if nu.tail is not None:
        tail = PowerTail(nu.tail.coeff / nu.mean, nu.tail.power - 1.0, nu.tail.start)
    return OffspringDistribution(atoms=atoms, tail=tail)
