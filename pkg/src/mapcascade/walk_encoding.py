"""Random-walk encoding of gasket-face half-perimeters.

A face multiset of a random planar map with boundary length ``2p`` is
encoded by a left-continuous random walk: each step is ``J - 1`` where
``J`` follows the offspring law, a ``-1`` step crosses an edge and a step
``J - 1 >= 0`` opens a face of half-perimeter ``J``.  Stopping the walk at
the first hit of ``-p`` and reweighting by ``(L + 1)^{-1}`` (``L`` = number
of down-steps) turns i.i.d. steps into an exact sample of the face
half-perimeter multiset; the reweighting is realised by rejection so that
downstream consumers receive plain unweighted samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._dispatch import impl as _impl
from .weights import DegenerateDistributionError, OffspringDistribution

DEFAULT_STEP_BUDGET = 10**9
DEFAULT_COLLECT_CAP = 1 << 24
_TAIL_SCAN_CAP = 1 << 30

__all__ = [
    "DEFAULT_STEP_BUDGET",
    "DEFAULT_COLLECT_CAP",
    "StepBudgetExceeded",
    "WalkExcursion",
    "InverseCdfSampler",
    "sample_excursion",
    "sample_excursion_summary",
    "sample_boltzmann_perimeters",
    "estimate_inv_L_mean",
    "sample_monotone_coupled_pair",
]


class StepBudgetExceeded(RuntimeError):
    """The walk consumed its step budget before hitting ``-p``.

    Hitting times are almost surely finite but heavy-tailed, so a very long
    excursion is a censoring event, not a bug; callers may catch this and
    treat the sample as censored.  ``steps_consumed`` and ``downs`` describe
    the partial walk.
    """

    def __init__(self, p: int, steps_consumed: int, downs: int):
        super().__init__(
            f"walk toward -{p} exceeded its step budget after "
            f"{steps_consumed} steps ({downs} down-steps)"
        )
        self.p = p
        self.steps_consumed = steps_consumed
        self.downs = downs


@dataclass(frozen=True)
class WalkExcursion:
    """A walk stopped at its first hit of ``-p``.

    ``steps`` holds the increments (each ``>= -1``), ``T`` the hitting time,
    ``L`` the number of ``-1`` steps.  ``jump_multiset`` is the
    non-increasing multiset of ``step + 1`` values, zero-padded to length
    ``T`` (the positive entries are the face half-perimeters).
    """

    p: int
    steps: np.ndarray = field(repr=False)
    T: int
    L: int

    @property
    def jump_multiset(self) -> np.ndarray:
        return np.sort(self.steps + 1)[::-1]

    def validate(self) -> None:
        """Assert every structural invariant; cheap enough for debug use."""
        assert self.steps.shape == (self.T,)
        assert int(self.steps.min(initial=0)) >= -1
        partial = np.cumsum(self.steps)
        assert partial[-1] == -self.p
        assert self.T == 1 or int(partial[:-1].min()) > -self.p
        assert self.L == int(np.count_nonzero(self.steps == -1))
        assert self.L >= self.p and self.T >= self.p


def _require_walk_inputs(mu: OffspringDistribution, p: int) -> None:
    if p < 1:
        raise ValueError(f"boundary half-perimeter p must be >= 1, got {p}")
    if mu.mass(0) <= 0.0:
        raise DegenerateDistributionError(
            "offspring law has no mass at 0: the walk can never step down, "
            "so the hitting time is infinite"
        )


def _table_args(mu: OffspringDistribution) -> tuple:
    t = mu.sampler_tables
    return (t.prob, t.alias, t.n_direct, t.tail_coeff, t.tail_power, t.tail_mass)


def sample_excursion(
    mu: OffspringDistribution,
    p: int,
    rng: np.random.Generator,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
    step_cap: int = DEFAULT_COLLECT_CAP,
) -> WalkExcursion:
    """Run i.i.d. steps ``J - 1`` until the walk first hits ``-p``.

    ``step_cap`` bounds the materialized step array; longer walks raise
    :class:`StepBudgetExceeded` just like a step-budget hit, keeping memory
    bounded on runaway excursions.
    """
    _require_walk_inputs(mu, p)
    T, L, steps, censored = _impl.walk_hit_steps(
        rng.bit_generator, *_table_args(mu), p, step_budget, step_cap
    )
    if censored:
        raise StepBudgetExceeded(p, T, L)
    excursion = WalkExcursion(p=p, steps=steps, T=T, L=L)
    if __debug__:
        excursion.validate()
    return excursion


def sample_excursion_summary(
    mu: OffspringDistribution,
    p: int,
    rng: np.random.Generator,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> tuple[int, int, bool]:
    """Return ``(T, L, censored)`` without materialising the step array.

    A censored draw reports the partial counts at the budget; since the walk
    was still above ``-p``, the true ``T`` and ``L`` are at least as large.
    """
    _require_walk_inputs(mu, p)
    T, L, censored = _impl.walk_hit_summary(
        rng.bit_generator, *_table_args(mu), p, step_budget
    )
    return T, L, censored


def sample_boltzmann_perimeters(
    mu: OffspringDistribution,
    p: int,
    rng: np.random.Generator,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
    face_cap: int = DEFAULT_COLLECT_CAP,
) -> np.ndarray:
    """Draw the face half-perimeter multiset of a map with boundary ``2p``.

    Rejection sampling: draw an excursion, accept with probability
    ``(p + 1) / (L + 1)`` (always in ``(0, 1]`` because ``L >= p``), repeat.
    Accepted samples follow the size-reweighted law exactly.  Returns the
    positive jumps sorted non-increasing; an empty array means a face-free
    (tree-like) map.

    Each proposal draws its acceptance uniform before walking and aborts as
    soon as rejection is certain: the final down-step count is exactly ``p``
    plus the jump excess ``sum(J - 1)``, which only grows, so doomed
    proposals stop at the excess where acceptance becomes impossible instead
    of walking out a heavy-tailed hitting time.  The accepted law is
    unchanged.

    ``face_cap`` bounds the materialized jump array; walks that would exceed
    it raise :class:`StepBudgetExceeded`, keeping memory bounded on runaway
    excursions.
    """
    _require_walk_inputs(mu, p)
    table_args = _table_args(mu)
    while True:
        status, T, L, jumps = _impl.walk_boltzmann_faces(
            rng.bit_generator, *table_args, p, step_budget, face_cap
        )
        if status == 0:
            return np.sort(jumps)[::-1].copy()
        if status == 3:
            raise StepBudgetExceeded(p, T, L)


def estimate_inv_L_mean(
    mu: OffspringDistribution,
    p: int,
    n_samples: int,
    rng: np.random.Generator,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> tuple[float, float]:
    """Monte Carlo mean of ``(L + 1)^{-1}`` over unconditioned excursions.

    This is the acceptance probability of the rejection sampler divided by
    ``p + 1``.  Censored draws contribute their partial ``(L + 1)^{-1}``,
    which upper-bounds the true weight by less than the censoring
    probability times the weight itself (negligible at any sane budget).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    _require_walk_inputs(mu, p)
    table_args = _table_args(mu)
    weights = np.empty(n_samples, dtype=np.float64)
    for i in range(n_samples):
        _, L, _ = _impl.walk_hit_summary(
            rng.bit_generator, *table_args, p, step_budget
        )
        weights[i] = 1.0 / (L + 1.0)
    w_min, w_max = float(weights.min()), float(weights.max())
    if n_samples == 1 or w_min == w_max:
        # Degenerate sample; report the common value exactly.
        return w_max, 0.0
    mean = float(weights.mean())
    return mean, float(weights.std(ddof=1) / np.sqrt(n_samples))


class InverseCdfSampler:
    """Quantile-function sampler for an offspring law.

    Monotone in the driving uniform, which is what the coupled-pair sampler
    needs; the alias table used by the kernels is faster but scrambles the
    order.  Explicit table up to the alias cutoff, exact linear tail scan
    beyond it.
    """

    def __init__(self, mu: OffspringDistribution):
        self._mu = mu
        cutoff = max(mu.alias_cutoff, mu.max_atom + 1)
        masses = np.array([mu.mass(k) for k in range(cutoff)], dtype=np.float64)
        self._cdf = np.cumsum(masses)
        self._cutoff = cutoff

    def __call__(self, u: float) -> int:
        """Smallest ``k`` with ``P(J <= k) >= u``."""
        if not 0.0 <= u <= 1.0:
            raise ValueError("u must lie in [0, 1]")
        idx = int(np.searchsorted(self._cdf, u, side="left"))
        if idx < self._cutoff:
            return idx
        acc = float(self._cdf[-1])
        k = self._cutoff
        while acc < u and k - self._cutoff < _TAIL_SCAN_CAP:
            acc += self._mu.mass(k)
            if acc >= u:
                return k
            k += 1
        return k


def sample_monotone_coupled_pair(
    mu: OffspringDistribution,
    p: int,
    rng: np.random.Generator,
    *,
    damping: float = 0.9,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> tuple[WalkExcursion, WalkExcursion]:
    """Couple two walks so the lower one has pointwise smaller steps.

    Both walks read the same uniforms through the quantile function; the
    lower walk sees them damped by ``damping < 1``, so its step sequence is
    dominated entry by entry.  Its marginal law is therefore stochastically
    below ``mu`` (it equals ``mu`` only at ``damping = 1``).  Domination
    forces ``lower.T <= upper.T`` and ``lower.L <= upper.L`` exactly, which
    is the monotonicity property the positive-correlation smoke test
    asserts sample by sample.

    Returns ``(upper, lower)``.
    """
    _require_walk_inputs(mu, p)
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    quantile = InverseCdfSampler(mu)
    upper_steps: list[int] = []
    lower_steps: list[int] = []
    upper_pos = lower_pos = 0
    consumed = 0
    # Domination means the lower walk always hits first, so the upper
    # position is the one that can still be above -p in both phases.
    while upper_pos != -p:
        if consumed >= step_budget:
            raise StepBudgetExceeded(p, consumed, upper_steps.count(-1))
        u = rng.random()
        consumed += 1
        step = quantile(u) - 1
        upper_steps.append(step)
        upper_pos += step
        if lower_pos != -p:
            step = quantile(damping * u) - 1
            lower_steps.append(step)
            lower_pos += step

    def finish(steps_list: list[int]) -> WalkExcursion:
        steps = np.array(steps_list, dtype=np.int64)
        excursion = WalkExcursion(
            p=p,
            steps=steps,
            T=len(steps),
            L=int(np.count_nonzero(steps == -1)),
        )
        if __debug__:
            excursion.validate()
        return excursion

    return finish(upper_steps), finish(lower_steps)
