"""Multiplicative perimeter cascade driven by 3/2-stable jumps.

The scaling limit of the perimeter process is a spectrally positive
3/2-stable Lévy process with jump density ``LEVY_COEFF * x**-5/2``.  Run
until it first hits ``-1``, the law of its jump sizes reweighted by the
inverse hitting time is the one-generation offspring law of the continuum
cascade; tilting each child by an independent symmetric sign ``Y`` through
``exp(beta * Y)`` produces the charged cascade whose node values feed the
additive and derivative martingales.

Simulation truncates jumps below ``eps`` and replaces them by their
compensating drift, so the simulated process is centered like the target.
Jumps below the reporting threshold ``delta`` are omitted from outputs;
moment estimators add the analytic correction for the omitted range, which
otherwise biases theta-moments near the lower domain edge far above Monte
Carlo noise.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from ._dispatch import impl as _impl
from .weights import beta_from_charge

# Jump density coefficient: with overall scale C = 1 the density is
# C / Gamma(-3/2) * x**-5/2 and Gamma(-3/2) = 4*sqrt(pi)/3.
LEVY_COEFF = 3.0 / (4.0 * math.sqrt(math.pi))
DEFAULT_EPS = 1e-4
DEFAULT_DELTA = 1e-3
DEFAULT_CHILDREN_CAP = 10**4
DEFAULT_TIME_BUDGET = 100.0
DEFAULT_POOL_SIZE = 512

# Defaults for the adaptive truncation used by the direct moment estimators:
# the cutoff rescales with the current height (relative resolution
# DEFAULT_MOMENT_EPS, refreshed whenever the height drifts a factor
# DEFAULT_BAND away from the last anchor), so deep excursions cost
# logarithmically rather than linearly in their hitting time and the time
# budget can sit far beyond any reachable hitting time instead of censoring
# the heavy tail.
DEFAULT_MOMENT_EPS = 2e-3
DEFAULT_BAND = 4.0
DEFAULT_SCALE_CAP = 1e9
DEFAULT_ADAPTIVE_BUDGET = 1e9

UlamNode = tuple[int, ...]

__all__ = [
    "LEVY_COEFF",
    "DEFAULT_EPS",
    "DEFAULT_DELTA",
    "DEFAULT_CHILDREN_CAP",
    "DEFAULT_TIME_BUDGET",
    "DEFAULT_POOL_SIZE",
    "DEFAULT_MOMENT_EPS",
    "DEFAULT_BAND",
    "DEFAULT_SCALE_CAP",
    "DEFAULT_ADAPTIVE_BUDGET",
    "UlamNode",
    "StableExcursion",
    "CascadeTree",
    "jump_rate",
    "drift_rate",
    "small_jump_variance",
    "small_jump_moment",
    "sample_rho1",
    "rho1_moment_estimate",
    "rho1_moment_direct",
    "stable_hitting_times",
    "tilted_generation_moments",
    "sample_cascade",
    "count_exceedances",
    "additive_martingale",
    "derivative_martingale",
    "cascade_measure_weights",
    "cascade_to_json_lines",
    "write_cascade_jsonl",
    "write_moment_csv",
]


def jump_rate(eps: float) -> float:
    """Poisson rate of jumps larger than ``eps``."""
    return (2.0 / 3.0) * LEVY_COEFF * eps**-1.5


def drift_rate(eps: float) -> float:
    """Drift compensating the mean of jumps larger than ``eps``."""
    return 2.0 * LEVY_COEFF * eps**-0.5


def small_jump_variance(eps: float) -> float:
    """Variance rate of the omitted jumps below ``eps``."""
    return 2.0 * LEVY_COEFF * math.sqrt(eps)


def small_jump_moment(theta: float, cutoff: float) -> float:
    """Per-unit-time theta-moment of jumps below ``cutoff``.

    Equals ``integral_0^cutoff x**theta * LEVY_COEFF * x**-5/2 dx``; finite
    only for ``theta > 3/2``.  Multiplied by the hitting time this corrects
    moment estimators for jumps that were truncated or left unreported.
    """
    if theta <= 1.5:
        raise ValueError(f"theta must exceed 3/2 for a finite correction, got {theta}")
    return LEVY_COEFF * cutoff ** (theta - 1.5) / (theta - 1.5)


@dataclass(frozen=True)
class StableExcursion:
    """One run of the truncated stable process to its first hit of -1.

    ``jumps`` holds the jump sizes above the reporting threshold ``delta``
    in non-increasing order; ``tau`` is the hitting time and ``weight`` the
    importance weight ``1/tau`` used to target the inverse-time-reweighted
    law.  A censored excursion ran out of time budget before hitting; its
    ``tau`` equals the budget and is a lower bound.
    """

    jumps: np.ndarray = field(repr=False)
    tau: float
    weight: float
    censored: bool
    eps: float
    delta: float

    def __post_init__(self):
        assert self.tau > 0.0
        if __debug__ and self.jumps.size:
            assert float(self.jumps.min()) >= self.delta
            assert (np.diff(self.jumps) <= 0.0).all()


def _gaussian_refined_hit(
    rng: np.random.Generator,
    eps: float,
    delta: float,
    time_budget: float,
) -> tuple[float, np.ndarray, bool]:
    """Path with the omitted small jumps re-added as Brownian noise.

    Crossing times are located by linear interpolation on each inter-jump
    segment, so they are approximate; the default path (no refinement)
    keeps hitting times exact on its piecewise-linear paths instead.
    """
    rate = jump_rate(eps)
    drift = drift_rate(eps)
    sigma = math.sqrt(small_jump_variance(eps))
    t = 0.0
    x = 0.0
    jumps: list[float] = []
    while True:
        dt = rng.exponential(1.0 / rate)
        if t + dt > time_budget:
            return time_budget, np.array(jumps, dtype=np.float64), True
        x_end = x - drift * dt + sigma * math.sqrt(dt) * rng.standard_normal()
        if x_end <= -1.0:
            frac = (x + 1.0) / (x - x_end)
            return t + frac * dt, np.array(jumps, dtype=np.float64), False
        jump = eps * rng.random() ** (-2.0 / 3.0)
        if jump >= delta:
            jumps.append(jump)
        x = x_end + jump
        t += dt


def sample_rho1(
    eps: float,
    delta: float,
    n_raw: int,
    rng: np.random.Generator,
    *,
    time_budget: float = DEFAULT_TIME_BUDGET,
    gaussian_refinement: bool = False,
) -> list[StableExcursion]:
    """Draw ``n_raw`` excursions carrying inverse-hitting-time weights.

    Self-normalized averages of ``weight * statistic`` over the returned
    collection estimate expectations under the inverse-time-reweighted jump
    law.  ``eps`` is the simulation truncation, ``delta >= eps`` the
    reporting threshold for the jump lists.
    """
    if not 0.0 < eps <= delta:
        raise ValueError(f"need 0 < eps <= delta, got eps={eps}, delta={delta}")
    if n_raw < 1:
        raise ValueError("n_raw must be >= 1")
    rate = jump_rate(eps)
    drift = drift_rate(eps)
    out = []
    for _ in range(n_raw):
        if gaussian_refinement:
            tau, jumps, censored = _gaussian_refined_hit(rng, eps, delta, time_budget)
        else:
            tau, jumps, censored = _impl.stable_hit_jumps(
                rng.bit_generator, eps, delta, rate, drift, time_budget
            )
        jumps = np.sort(jumps)[::-1].copy()
        out.append(
            StableExcursion(
                jumps=jumps,
                tau=tau,
                weight=1.0 / tau,
                censored=censored,
                eps=eps,
                delta=delta,
            )
        )
    return out


def rho1_moment_estimate(
    excursions: list[StableExcursion],
    theta: float,
    *,
    compensate: bool = True,
) -> tuple[float, float]:
    """Self-normalized estimate of the reweighted-law moment sum(J**theta).

    With ``compensate`` the analytic correction for jumps below each
    excursion's reporting threshold is added, removing the truncation bias.
    Returns ``(estimate, std_error)`` with a delta-method standard error.

    Censored excursions are excluded, and that exclusion is *not* harmless
    here: although each censored path carries a small weight, its statistic
    grows with the hitting time fast enough that the discarded product does
    not vanish.  The resulting downward bias decays only like a small power
    of the time budget (cube root at theta = 2), so no affordable budget
    removes it.  Use this function for diagnostics on collected excursion
    sets; for accurate moments use :func:`rho1_moment_direct`, whose
    adaptive truncation makes censoring astronomically rare.
    """
    if not 1.5 < theta < 2.5:
        raise ValueError(f"theta must lie in (3/2, 5/2), got {theta}")
    kept = [e for e in excursions if not e.censored]
    if not kept:
        raise ValueError("every excursion was censored")
    w = np.array([e.weight for e in kept])
    stat = np.empty(len(kept))
    for i, e in enumerate(kept):
        s = float(np.sum(e.jumps**theta))
        if compensate:
            s += e.tau * small_jump_moment(theta, e.delta)
        stat[i] = s
    return _self_normalized(w, stat)


def _self_normalized(w: np.ndarray, stat: np.ndarray) -> tuple[float, float]:
    n = len(w)
    norm = float(w.mean())
    est = float((w * stat).mean()) / norm
    if n == 1:
        return est, 0.0
    resid = w * (stat - est)
    se = float(resid.std(ddof=1)) / (norm * math.sqrt(n))
    return est, se


def _adaptive_powersums(
    n_excursions: int,
    rng: np.random.Generator,
    exps: np.ndarray,
    eps: float,
    band: float,
    scale_cap: float,
    time_budget: float,
    gaussian_refinement: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the adaptive-truncation kernel; returns (taus, stats, censored).

    ``stats[i, j]`` is the power sum over the recorded jumps of excursion
    ``i`` at exponent ``exps[j]`` plus the analytic compensation for the
    jumps below the (height-dependent) cutoff, accumulated segment by
    segment, so it is conditionally unbiased for the full-process power sum
    given the coarse path.
    """
    if not 0.0 < eps:
        raise ValueError("eps must be positive")
    if not band > 1.0:
        raise ValueError("band must exceed 1")
    if not scale_cap >= 1.0:
        raise ValueError("scale_cap must be >= 1")
    if n_excursions < 1:
        raise ValueError("n_excursions must be >= 1")
    kernel = (
        _impl.stable_hit_powersums_adaptive_gauss
        if gaussian_refinement
        else _impl.stable_hit_powersums_adaptive
    )
    taus = np.empty(n_excursions)
    stats = np.empty((n_excursions, len(exps)))
    censored = np.empty(n_excursions, dtype=bool)
    for i in range(n_excursions):
        tau, sums, comp, _, cen = kernel(
            rng.bit_generator, eps, band, scale_cap, time_budget, exps
        )
        taus[i] = tau
        stats[i] = sums + comp
        censored[i] = cen
    return taus, stats, censored


def stable_hitting_times(
    n_samples: int,
    rng: np.random.Generator,
    *,
    eps: float = DEFAULT_MOMENT_EPS,
    band: float = DEFAULT_BAND,
    scale_cap: float = DEFAULT_SCALE_CAP,
    time_budget: float = DEFAULT_ADAPTIVE_BUDGET,
    gaussian_refinement: bool = True,
) -> np.ndarray:
    """Sample hitting times of -1 with the adaptive-truncation kernel.

    The default budget sits nine orders of magnitude past the median, and
    the adaptive cutoff makes the cost of reaching it logarithmic, so
    censoring is practically impossible; if it does occur the returned
    value equals ``time_budget``.  With ``gaussian_refinement`` the jumps
    below the cutoff are re-added as their matching Gaussian component,
    removing the leading truncation bias of the hitting-time law.
    """
    exps = np.empty(0)
    taus, _, _ = _adaptive_powersums(
        n_samples, rng, exps, eps, band, scale_cap, time_budget,
        gaussian_refinement,
    )
    return taus


def rho1_moment_direct(
    thetas: list[float],
    n_excursions: int,
    rng: np.random.Generator,
    *,
    eps: float = DEFAULT_MOMENT_EPS,
    band: float = DEFAULT_BAND,
    scale_cap: float = DEFAULT_SCALE_CAP,
    time_budget: float = DEFAULT_ADAPTIVE_BUDGET,
    gaussian_refinement: bool = True,
) -> list[tuple[float, float]]:
    """Estimate the reweighted-law moments E[sum(J**theta)] per theta.

    One kernel pass per excursion accumulates all requested power sums plus
    the analytic small-jump compensation, then each moment is estimated by
    self-normalized importance sampling with the inverse hitting time as
    weight.  Unlike :func:`rho1_moment_estimate` on collected excursions,
    no jump list is materialized and no heavy-tail mass is censored, so the
    estimate is unbiased up to the truncation resolution ``eps``.  Returns
    ``(estimate, std_error)`` pairs aligned with ``thetas``.
    """
    for theta in thetas:
        if not 1.5 < theta < 2.5:
            raise ValueError(f"theta must lie in (3/2, 5/2), got {theta}")
    exps = np.asarray(thetas, dtype=np.float64)
    taus, stats, censored = _adaptive_powersums(
        n_excursions, rng, exps, eps, band, scale_cap, time_budget,
        gaussian_refinement,
    )
    keep = ~censored
    if not keep.any():
        raise ValueError("every excursion was censored")
    taus = taus[keep]
    stats = stats[keep]
    w = 1.0 / taus
    return [_self_normalized(w, stats[:, j]) for j in range(len(thetas))]


def tilted_generation_moments(
    Q: float,
    thetas: list[float],
    n_excursions: int,
    rng: np.random.Generator,
    *,
    eps: float = DEFAULT_MOMENT_EPS,
    band: float = DEFAULT_BAND,
    scale_cap: float = DEFAULT_SCALE_CAP,
    time_budget: float = DEFAULT_ADAPTIVE_BUDGET,
    gaussian_refinement: bool = True,
) -> list[tuple[float, float]]:
    """Estimate E[sum over first-generation u of Z_Q(u)**theta] per theta.

    The sign tilts integrate out analytically — each child contributes an
    independent factor with mean ``cosh(beta * theta)`` — so the jump part
    reduces to :func:`rho1_moment_direct` and one excursion set serves
    every charge.  Returns ``(estimate, std_error)`` pairs aligned with
    ``thetas``.
    """
    beta = beta_from_charge(Q)
    raw = rho1_moment_direct(
        thetas, n_excursions, rng,
        eps=eps, band=band, scale_cap=scale_cap, time_budget=time_budget,
        gaussian_refinement=gaussian_refinement,
    )
    out = []
    for theta, (est, se) in zip(thetas, raw):
        factor = math.cosh(beta * theta)
        out.append((factor * est, factor * se))
    return out


@dataclass
class CascadeTree:
    """Charged cascade values on a finite Ulam tree.

    Node values are stored in log scale — ``log_nodes[u] = (log Z, log Z_Q,
    Y)`` — because the sign tilts compound geometrically and overflow the
    float range for small charges.  The ``nodes`` view exposes the plain
    ``(Z, Z_Q, Y)`` triples (values past the float range appear as ``inf``).
    The root ``()`` has ``Z = Z_Q = 1`` and carries no tilt (``Y = 0``).
    ``subtree_tau[u]`` records the hitting time of the excursion whose
    jumps generated ``u``'s children.
    """

    Q: float
    beta: float
    depth: int
    log_nodes: dict[UlamNode, tuple[float, float, int]]
    subtree_tau: dict[UlamNode, float] = field(default_factory=dict, repr=False)

    @property
    def nodes(self) -> dict[UlamNode, tuple[float, float, int]]:
        return {
            u: (math.exp(min(lz, 709.0)) if lz < 709.0 else math.inf,
                math.exp(min(lzq, 709.0)) if lzq < 709.0 else math.inf,
                y)
            for u, (lz, lzq, y) in self.log_nodes.items()
        }

    def generation(self, n: int) -> list[UlamNode]:
        if n < 0 or n > self.depth:
            raise ValueError(f"generation {n} outside tree of depth {self.depth}")
        return sorted(u for u in self.log_nodes if len(u) == n)

    def children(self, u: UlamNode) -> list[UlamNode]:
        k = 1
        out = []
        while u + (k,) in self.log_nodes:
            out.append(u + (k,))
            k += 1
        return out

    def validate_multiplicative_consistency(self) -> None:
        """Assert Z_Q(u) = Z_Q(parent) * (Z ratio) * exp(beta * Y) exactly.

        Exact in log scale: the stored increments are literally additive.
        """
        for u, (lz, lzq, y) in self.log_nodes.items():
            if not u:
                assert lz == 0.0 and lzq == 0.0 and y == 0
                continue
            plz, plzq, _ = self.log_nodes[u[:-1]]
            assert lzq == plzq + (lz - plz) + self.beta * y


def sample_cascade(
    Q: float,
    depth: int,
    children_cap: int = DEFAULT_CHILDREN_CAP,
    eps: float = DEFAULT_EPS,
    delta: float = DEFAULT_DELTA,
    rng: np.random.Generator | None = None,
    *,
    n_pool: int = DEFAULT_POOL_SIZE,
    time_budget: float = DEFAULT_TIME_BUDGET,
) -> CascadeTree:
    """Grow a cascade tree of the given depth.

    Each node's children come from one excursion resampled from a shared
    weighted pool (multinomial, with replacement), which turns the
    inverse-time importance weights into unweighted child sets at the cost
    of some correlation between nodes; enlarge ``n_pool`` to reduce it.
    Child values scale the parent's by the jump sizes; every child gets an
    independent symmetric sign tilt.  ``children_cap`` keeps only the
    largest jumps of each excursion.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if rng is None:
        raise ValueError("an explicit random generator is required")
    beta = beta_from_charge(Q)
    pool = [e for e in sample_rho1(eps, delta, n_pool, rng, time_budget=time_budget)
            if not e.censored]
    if not pool:
        raise RuntimeError("the excursion pool was entirely censored")
    cum_weights = np.cumsum([e.weight for e in pool])
    total = float(cum_weights[-1])

    log_nodes: dict[UlamNode, tuple[float, float, int]] = {(): (0.0, 0.0, 0)}
    subtree_tau: dict[UlamNode, float] = {}
    frontier: list[UlamNode] = [()]
    for _ in range(depth):
        next_frontier: list[UlamNode] = []
        for u in frontier:
            lz, lzq, _ = log_nodes[u]
            idx = int(np.searchsorted(cum_weights, rng.random() * total, side="right"))
            idx = min(idx, len(pool) - 1)
            excursion = pool[idx]
            subtree_tau[u] = excursion.tau
            for k, jump in enumerate(excursion.jumps[:children_cap], start=1):
                y = 1 if rng.random() < 0.5 else -1
                log_jump = math.log(jump)
                child = u + (k,)
                log_nodes[child] = (lz + log_jump, lzq + log_jump + beta * y, y)
                next_frontier.append(child)
        frontier = next_frontier
    return CascadeTree(
        Q=Q, beta=beta, depth=depth, log_nodes=log_nodes, subtree_tau=subtree_tau
    )


def count_exceedances(
    tree: CascadeTree, n: int, interval: tuple[float, float]
) -> int:
    """Number of generation-``n`` nodes with Z_Q inside the open interval."""
    a, b = interval
    if a >= b:
        return 0
    log_a = math.log(a) if a > 0.0 else -math.inf
    log_b = math.log(b) if b > 0.0 else -math.inf
    count = 0
    for u in tree.generation(n):
        lzq = tree.log_nodes[u][1]
        if log_a < lzq < log_b:
            count += 1
    return count


def additive_martingale(tree: CascadeTree, theta: float, n: int) -> float:
    """phi(theta)**-n times the generation-``n`` sum of Z_Q**theta."""
    if not analytic.THETA_DOMAIN[0] < theta < analytic.THETA_DOMAIN[1]:
        raise ValueError(
            f"theta must lie in {analytic.THETA_DOMAIN} where the mean kernel "
            f"is finite, got {theta}"
        )
    lp = analytic.log_phi(tree.Q, theta)
    return math.fsum(
        math.exp(theta * tree.log_nodes[u][1] - n * lp) for u in tree.generation(n)
    )


def derivative_martingale(
    tree: CascadeTree, n: int, profile: analytic.BigginsProfile
) -> float:
    """Negative theta-derivative of the additive martingale at theta*."""
    theta = profile.theta_star
    lp = analytic.log_phi(tree.Q, theta)
    dlp = analytic.dlog_phi(tree.Q, theta)
    return math.fsum(
        math.exp(theta * lzq - n * lp) * (n * dlp - lzq)
        for lzq in (tree.log_nodes[u][1] for u in tree.generation(n))
    )


def cascade_measure_weights(
    tree: CascadeTree,
    mode: float | str,
    n_trunc: int,
) -> dict[UlamNode, float]:
    """Truncated cascade-measure weights on all nodes up to ``n_trunc``.

    ``mode`` is either a numeric theta (additive-martingale weights, the
    uniformly integrable regime being theta < theta*) or the string
    ``"star"`` (derivative-martingale weights at theta*, which can be
    negative at finite truncation).  Parents are computed as the plain sum
    of their children in index order, so the additivity
    ``W[u] == sum(W[child])`` is exact, not approximate.
    """
    if n_trunc < 0 or n_trunc > tree.depth:
        raise ValueError(f"n_trunc must lie in [0, {tree.depth}], got {n_trunc}")
    if mode == "star":
        # The full traveling-wave profile is only needed here; numeric
        # thetas avoid it so boundary charges with zero velocity still
        # support plain martingale weights.
        profile = analytic.BigginsProfile.for_charge(tree.Q)
        theta = profile.theta_star
        dlp = analytic.dlog_phi(tree.Q, theta)

        def term(lzq: float) -> float:
            return math.exp(theta * lzq - n_trunc * lp) * (n_trunc * dlp - lzq)

    else:
        theta = float(mode)
        if not analytic.THETA_DOMAIN[0] < theta < analytic.THETA_DOMAIN[1]:
            raise ValueError(
                f"theta must lie in {analytic.THETA_DOMAIN}, got {theta}"
            )
        star = analytic.theta_star(tree.Q)
        if theta >= star:
            warnings.warn(
                f"theta={theta} is at or beyond theta*={star:.6f}; "
                "the untruncated limit degenerates to zero there",
                RuntimeWarning,
                stacklevel=2,
            )

        def term(lzq: float) -> float:
            return math.exp(theta * lzq - n_trunc * lp)

    lp = analytic.log_phi(tree.Q, theta)
    weights: dict[UlamNode, float] = {}
    for u in tree.generation(n_trunc):
        weights[u] = term(tree.log_nodes[u][1])
    for level in range(n_trunc - 1, -1, -1):
        for u in tree.generation(level):
            weights[u] = sum(weights[v] for v in tree.children(u))
    return weights


def cascade_to_json_lines(tree: CascadeTree) -> list[str]:
    """One JSON object per node: {"u": dotted word, "Z":, "ZQ":, "Y":}."""
    nodes = tree.nodes
    lines = []
    for u in sorted(nodes, key=lambda w: (len(w), w)):
        z, zq, y = nodes[u]
        lines.append(
            json.dumps(
                {"u": ".".join(str(k) for k in u), "Z": z, "ZQ": zq, "Y": y}
            )
        )
    return lines


def write_cascade_jsonl(tree: CascadeTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in cascade_to_json_lines(tree):
            fh.write(line + "\n")


def write_moment_csv(path, rows: list[tuple]) -> None:
    """Write (Q, theta, estimate, std_error, target) rows."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["Q", "theta", "estimate", "std_error", "target"])
        for row in rows:
            writer.writerow([repr(float(x)) for x in row])
