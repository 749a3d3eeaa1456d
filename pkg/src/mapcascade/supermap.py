"""Iterative supercritical construction at the perimeter level.

Each generation replaces every active face by the faces of a Boltzmann
gasket drawn at its perimeter, then threads an annular ring through each
new face to produce the next inner perimeter.  Zero inner perimeters
terminate their branch; the construction is *finite* when the active set
empties.  The finiteness probability ``F(p)``, its log-rate ``alpha``, and
exactly conditioned finite samples are all estimated from this one step
primitive, which works purely on perimeters — the glued geometry never
influences which perimeters appear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .rings import (
    FinitenessValues,
    RingLaw,
    ring_atoms,
    sample_inner_perimeters_batch,
    sample_inner_perimeters_tilted_batch,
)
from .walk_encoding import StepBudgetExceeded, sample_boltzmann_perimeters
from .weights import (
    FeasibilityError,
    ModelConfig,
    OffspringDistribution,
    mu_from_weights,
    tilt_subcritical,
    weights_from_mu,
)

DEFAULT_PERIMETER_BUDGET = 10**7
DEFAULT_MAX_GENERATIONS = 10**3
MIN_MC_RUNS = 100
MIN_ALPHA_HORIZON = 20
REJECTION_FLOOR = 1e-4

UlamNode = tuple[int, ...]

__all__ = [
    "DEFAULT_PERIMETER_BUDGET",
    "DEFAULT_MAX_GENERATIONS",
    "MIN_MC_RUNS",
    "MIN_ALPHA_HORIZON",
    "REJECTION_FLOOR",
    "UlamNode",
    "PerimeterBudgetExceeded",
    "FeasibilityError",
    "UndefinedTotalError",
    "GenerationState",
    "FTable",
    "CascadeRecord",
    "step_generation",
    "sample_unconditioned",
    "estimate_F_monte_carlo",
    "estimate_F_fixed_point",
    "estimate_alpha",
    "sample_conditioned_finite",
    "compute_tperm",
    "record_to_json_dict",
    "write_records_jsonl",
    "write_ftable_csv",
]


class PerimeterBudgetExceeded(RuntimeError):
    """Total active perimeter crossed the cap — the run is classified infinite."""


class UndefinedTotalError(ValueError):
    """Total perimeter is undefined for a run classified infinite."""


@dataclass
class GenerationState:
    """Active faces of one construction generation.

    ``active`` holds ``(node, inner_half_perimeter)`` pairs; zero
    perimeters are terminal and never stored.
    """

    generation: int
    active: list[tuple[UlamNode, int]]

    def __post_init__(self):
        if self.generation < 0:
            raise ValueError("generation must be >= 0")
        for node, m in self.active:
            if m < 1:
                raise ValueError(f"active perimeter must be >= 1, got {m} at {node}")

    @property
    def total_perimeter(self) -> int:
        return sum(m for _, m in self.active)


@dataclass
class FTable:
    """Estimated finiteness probabilities F(p) for p = 0..p_max.

    ``values[0] = 1`` always (an empty boundary is trivially finite) and
    ``value(p)`` returns 0 beyond the horizon, which makes the table usable
    wherever a finiteness functional is consumed (ring tilting, weight
    tilting).  ``h`` is the −log view; ``metadata`` records the caps that
    bias Monte Carlo estimates downward.
    """

    values: np.ndarray
    std_errors: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.std_errors = np.asarray(self.std_errors, dtype=np.float64)
        if self.values.ndim != 1 or self.values.shape != self.std_errors.shape:
            raise ValueError("values and std_errors must be 1-d and aligned")
        if self.values[0] != 1.0:
            raise ValueError("F(0) must be 1")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValueError("F values must lie in [0, 1]")

    @property
    def p_max(self) -> int:
        return len(self.values) - 1

    def value(self, p: int) -> float:
        if p < 0:
            raise ValueError("perimeter must be >= 0")
        if p > self.p_max:
            return 0.0
        return float(self.values[p])

    @property
    def h(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log(self.values)

    def lower_bound_margins(self, mu0: float, n_sigma: float = 3.0) -> np.ndarray:
        """Margins of F(p) over the product bound mu0**p minus noise slack."""
        p = np.arange(len(self.values))
        return self.values - (mu0**p - n_sigma * self.std_errors)


@dataclass
class CascadeRecord:
    """One realized perimeter cascade.

    ``nodes`` maps each face (Ulam word) to its ``(outer, inner)``
    half-perimeters; terminal faces carry inner 0.  ``tperm`` is defined
    only for finite runs.
    """

    p: int
    nodes: dict[UlamNode, tuple[int, int]]
    finite: bool
    generations_used: int
    tperm: Optional[int] = None

    def __post_init__(self):
        if self.finite:
            expected = self.p + sum(o + i for o, i in self.nodes.values())
            if self.tperm is None:
                self.tperm = expected
            elif self.tperm != expected:
                raise ValueError("tperm inconsistent with node map")
        else:
            self.tperm = None


def compute_tperm(record: CascadeRecord) -> int:
    """Re-sum the total perimeter p + sum(outer + inner) over all faces."""
    if not record.finite:
        raise UndefinedTotalError("total perimeter undefined for an infinite run")
    return record.p + sum(o + i for o, i in record.nodes.values())


def step_generation(
    state: GenerationState,
    mu: OffspringDistribution,
    ring: RingLaw,
    rng: np.random.Generator,
    tilt: Optional[FinitenessValues] = None,
    *,
    perimeter_budget: int = DEFAULT_PERIMETER_BUDGET,
    step_budget: int = 10**9,
    record: Optional[dict[UlamNode, tuple[int, int]]] = None,
) -> GenerationState:
    """Advance the construction by one generation.

    Every active face draws a gasket at its perimeter (children indexed by
    decreasing face perimeter), then a ring through each gasket face sets
    the next inner perimeter — tilted by the finiteness functional when
    ``tilt`` is given.  Faces with inner perimeter zero terminate; the rest
    form the returned state.  When ``record`` is supplied every drawn face
    (terminal ones included) is written into it as word -> (outer, inner).
    Raises :class:`PerimeterBudgetExceeded` when the total active perimeter
    (incoming or produced) crosses the cap, which callers interpret as a
    blow-up, i.e. an infinite run.
    """
    if not state.active:
        raise ValueError("state has no active faces")
    if state.total_perimeter > perimeter_budget:
        raise PerimeterBudgetExceeded(
            f"active perimeter {state.total_perimeter} exceeds cap {perimeter_budget}"
        )
    new_active: list[tuple[UlamNode, int]] = []
    new_total = 0
    for node, m in state.active:
        faces = sample_boltzmann_perimeters(mu, m, rng, step_budget=step_budget)
        if faces.size == 0:
            continue
        if tilt is None:
            inners = sample_inner_perimeters_batch(ring, faces, rng)
        else:
            inners = sample_inner_perimeters_tilted_batch(ring, faces, tilt, rng)
        if record is not None:
            for k, (outer, inner) in enumerate(
                zip(faces.tolist(), inners.tolist()), start=1
            ):
                record[node + (k,)] = (outer, inner)
        alive = np.flatnonzero(inners > 0)
        new_total += int(inners[alive].sum())
        for k in alive.tolist():
            new_active.append((node + (k + 1,), int(inners[k])))
        if new_total > perimeter_budget:
            raise PerimeterBudgetExceeded(
                f"produced perimeter {new_total} exceeds cap {perimeter_budget}"
            )
    return GenerationState(generation=state.generation + 1, active=new_active)


def _effective_budget(config: ModelConfig, infinity_threshold: Optional[int]) -> int:
    if infinity_threshold is None:
        return config.perimeter_budget
    threshold = int(infinity_threshold)
    if threshold < 1:
        raise ValueError("infinity_threshold must be >= 1")
    return threshold


def sample_unconditioned(
    config: ModelConfig,
    p: int,
    max_generations: int,
    rng: np.random.Generator,
    *,
    ring: Optional[RingLaw] = None,
    mu: Optional[OffspringDistribution] = None,
    infinity_threshold: Optional[int] = None,
) -> CascadeRecord:
    """Run one full cascade from boundary half-perimeter ``p``.

    The run is finite when the active set empties before the generation cap
    or the perimeter budget intervenes; capped runs are recorded as
    infinite (the classification bias is downward on finiteness and is
    quantified by re-running with larger caps).  ``infinity_threshold``
    overrides the config's perimeter budget: a run whose active perimeter
    crosses it is classified infinite on the spot, which trades an
    exponentially small one-sided bias for not having to walk out huge
    excursions that essentially never die.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    ring = ring if ring is not None else RingLaw(Q=config.Q)
    mu = mu if mu is not None else config.mu
    budget = _effective_budget(config, infinity_threshold)
    nodes: dict[UlamNode, tuple[int, int]] = {}
    state = GenerationState(generation=0, active=[((), p)])
    finite = False
    try:
        while state.generation < max_generations:
            state = step_generation(
                state,
                mu,
                ring,
                rng,
                perimeter_budget=budget,
                step_budget=config.step_budget,
                record=nodes,
            )
            if not state.active:
                finite = True
                break
    except (PerimeterBudgetExceeded, StepBudgetExceeded):
        finite = False
    return CascadeRecord(
        p=p,
        nodes=nodes,
        finite=finite,
        generations_used=state.generation,
    )


def _run_finiteness(
    mu: OffspringDistribution,
    ring: RingLaw,
    p: int,
    max_generations: int,
    perimeter_budget: int,
    step_budget: int,
    rng: np.random.Generator,
) -> bool:
    """Classify one cascade run as finite without building node records.

    Same classification as :func:`sample_unconditioned` — the active set
    empties before the generation cap, the perimeter budget, or the walk
    step budget intervenes — but carried on flat perimeter arrays, which is
    what a Monte Carlo finiteness estimate actually consumes.
    """
    active = np.array([p], dtype=np.int64)
    total = p
    try:
        for _ in range(max_generations):
            if total > perimeter_budget:
                return False
            produced: list[np.ndarray] = []
            total = 0
            for m in active.tolist():
                faces = sample_boltzmann_perimeters(mu, m, rng, step_budget=step_budget)
                if faces.size == 0:
                    continue
                inners = sample_inner_perimeters_batch(ring, faces, rng)
                inners = inners[inners > 0]
                if inners.size:
                    produced.append(inners)
                    total += int(inners.sum())
                    if total > perimeter_budget:
                        return False
            if not produced:
                return True
            active = np.concatenate(produced)
    except StepBudgetExceeded:
        return False
    return False


def estimate_F_monte_carlo(
    config: ModelConfig,
    p_range: Iterable[int],
    n_runs: int,
    max_generations: int,
    rng: np.random.Generator,
    *,
    ring: Optional[RingLaw] = None,
    infinity_threshold: Optional[int] = None,
) -> FTable:
    """Estimate F(p) as the finite fraction of independent runs per p.

    Returns a table over 0..max(p_range) with binomial standard errors.
    The generation and perimeter caps classify censored runs as infinite,
    so the estimator is a lower bound up to that censoring, which the
    metadata records.  ``infinity_threshold`` overrides the config's
    perimeter budget as the classification cap: runs whose active perimeter
    crosses it count as infinite immediately, keeping the walk cost bounded
    at the price of a one-sided bias that decays exponentially in the
    threshold (a cascade at total perimeter W dies with probability on the
    order of F's value there).
    """
    ps = sorted(set(int(p) for p in p_range))
    if not ps or ps[0] < 1:
        raise ValueError("p_range must contain perimeters >= 1")
    if ps != list(range(1, ps[-1] + 1)):
        raise ValueError("p_range must cover 1..p_max without gaps")
    if n_runs < MIN_MC_RUNS:
        raise ValueError(f"n_runs must be >= {MIN_MC_RUNS}")
    ring = ring if ring is not None else RingLaw(Q=config.Q)
    mu = config.mu
    budget = _effective_budget(config, infinity_threshold)
    p_max = ps[-1]
    values = np.ones(p_max + 1)
    errors = np.zeros(p_max + 1)
    for p in ps:
        finite = 0
        for _ in range(n_runs):
            finite += _run_finiteness(
                mu, ring, p, max_generations, budget, config.step_budget, rng
            )
        f_hat = finite / n_runs
        values[p] = f_hat
        errors[p] = math.sqrt(f_hat * (1.0 - f_hat) / n_runs)
    return FTable(
        values=values,
        std_errors=errors,
        method="monte-carlo",
        metadata={
            "n_runs": n_runs,
            "max_generations": max_generations,
            "perimeter_budget": budget,
            "censoring": "runs hitting caps are classified infinite; bias on F is downward",
        },
    )


def estimate_F_fixed_point(
    config: ModelConfig,
    p_max: int,
    n_sweeps: int,
    n_mc_per_sweep: int,
    rng: np.random.Generator,
    *,
    ring: Optional[RingLaw] = None,
) -> FTable:
    """Iterate the one-generation recursion for F on a frozen sample set.

    ``F_{n+1}(p)`` averages, over ``n_mc_per_sweep`` pre-drawn gaskets at
    perimeter ``p``, the product over gasket faces of the ring-averaged
    current table (0 past the horizon, so every iterate is a lower bound).
    The start ``F_0(p)`` is the empirical no-face fraction of the same
    sample set — the exact one-generation termination probability — and
    freezing the samples across sweeps (common random numbers) makes the
    iterates monotone non-decreasing exactly, not merely in expectation.

    The frozen multisets are stored as one flat face array per perimeter
    with offsets bracketing each sample, so a sweep is a gather plus a
    segmented product rather than a Python loop over faces.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if n_sweeps < 1:
        raise ValueError("n_sweeps must be >= 1")
    if n_mc_per_sweep < 1:
        raise ValueError("n_mc_per_sweep must be >= 1")
    ring = ring if ring is not None else RingLaw(Q=config.Q)
    mu = config.mu
    faces_flat: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * (p_max + 1)
    offsets: list[np.ndarray] = [np.zeros(1, dtype=np.intp)] * (p_max + 1)
    for p in range(1, p_max + 1):
        draws = [
            sample_boltzmann_perimeters(mu, p, rng, step_budget=config.step_budget)
            for _ in range(n_mc_per_sweep)
        ]
        lengths = np.array([d.size for d in draws], dtype=np.intp)
        offsets[p] = np.concatenate((np.zeros(1, dtype=np.intp), np.cumsum(lengths)))
        if int(lengths.sum()):
            faces_flat[p] = np.concatenate(draws)
    # Ring atoms per distinct outer perimeter, shared across sweeps; atoms
    # past the table horizon contribute 0 to every iterate and drop out.
    uniq = np.unique(np.concatenate(faces_flat[1:])) if p_max >= 1 else np.empty(0)
    atom_index: list[np.ndarray] = []
    atom_weight: list[np.ndarray] = []
    for outer in uniq.tolist():
        atoms = ring_atoms(ring, int(outer))
        ms = np.array([m for m, _ in atoms], dtype=np.int64)
        ws = np.array([w for _, w in atoms], dtype=np.float64)
        keep = ms <= p_max
        atom_index.append(ms[keep])
        atom_weight.append(ws[keep])
    face_slot = [np.searchsorted(uniq, faces_flat[p]) for p in range(p_max + 1)]

    def ring_averaged(values: np.ndarray) -> np.ndarray:
        g = np.empty(uniq.shape[0])
        for i in range(uniq.shape[0]):
            g[i] = float(np.dot(atom_weight[i], values[atom_index[i]]))
        return g

    def sample_products(p: int, g: np.ndarray) -> np.ndarray:
        # A trailing 1.0 keeps every reduceat start index in range; empty
        # samples (no faces) get their product forced to the empty value 1.
        padded = np.concatenate((g[face_slot[p]], np.ones(1)))
        prods = np.multiply.reduceat(padded, offsets[p][:-1])
        prods[offsets[p][1:] == offsets[p][:-1]] = 1.0
        return prods

    values = np.ones(p_max + 1)
    for p in range(1, p_max + 1):
        no_faces = int(np.count_nonzero(offsets[p][1:] == offsets[p][:-1]))
        values[p] = no_faces / n_mc_per_sweep
    sweep_history = [values[1:].tolist()]
    for _ in range(n_sweeps):
        g = ring_averaged(values)
        new_values = np.ones(p_max + 1)
        for p in range(1, p_max + 1):
            new_values[p] = float(sample_products(p, g).mean())
        values = new_values
        sweep_history.append(values[1:].tolist())
    errors = np.zeros(p_max + 1)
    g = ring_averaged(values)
    for p in range(1, p_max + 1):
        prods = sample_products(p, g)
        if n_mc_per_sweep > 1:
            errors[p] = prods.std(ddof=1) / math.sqrt(n_mc_per_sweep)
    return FTable(
        values=values,
        std_errors=errors,
        method="fixed-point",
        metadata={
            "n_sweeps": n_sweeps,
            "n_mc_per_sweep": n_mc_per_sweep,
            "horizon": "F treated as 0 past p_max, so the table is a lower bound",
            "sweep_history": sweep_history,
        },
    )


def estimate_alpha(F: FTable) -> tuple[float, dict]:
    """Least-squares exponential rate of F's decay, with diagnostics.

    Fits the slope of −log F(p) against p over the upper half of the table
    (the early-p transient carries a log-sized correction), and reports the
    per-p ratios −log F(p)/p together with their minimum, which brackets
    the rate from above by subadditivity.
    """
    if F.p_max < MIN_ALPHA_HORIZON:
        raise ValueError(f"alpha fit needs a table horizon >= {MIN_ALPHA_HORIZON}")
    lo = F.p_max // 2
    ps = np.arange(lo, F.p_max + 1)
    vals = F.values[lo:]
    if np.any(vals <= 0.0):
        raise ValueError("alpha fit range contains zero estimates; raise n or lower p_max")
    h = -np.log(vals)
    slope, intercept = np.polyfit(ps, h, 1)
    all_p = np.arange(1, F.p_max + 1)
    positive = F.values[1:] > 0.0
    ratios = np.full(F.p_max, np.inf)
    ratios[positive] = -np.log(F.values[1:][positive]) / all_p[positive]
    diagnostics = {
        "ratios": ratios,
        "upper_bracket": float(ratios.min()),
        "fit_range": (int(lo), int(F.p_max)),
        "intercept": float(intercept),
    }
    return float(slope), diagnostics


def _sample_conditioned_tilt(
    config: ModelConfig,
    p: int,
    F: FinitenessValues,
    rng: np.random.Generator,
    ring: RingLaw,
) -> CascadeRecord:
    tilted_weights = tilt_subcritical(weights_from_mu(config.mu), F, ring)
    mu_tilted = mu_from_weights(tilted_weights)
    nodes: dict[UlamNode, tuple[int, int]] = {}
    state = GenerationState(generation=0, active=[((), p)])
    while state.active:
        if state.generation >= config.max_generations:
            raise RuntimeError(
                "tilted sampler exceeded the generation cap; the tilted law "
                "should die out — check the finiteness table"
            )
        state = step_generation(
            state,
            mu_tilted,
            ring,
            rng,
            tilt=F,
            perimeter_budget=config.perimeter_budget,
            step_budget=config.step_budget,
            record=nodes,
        )
    return CascadeRecord(
        p=p,
        nodes=nodes,
        finite=True,
        generations_used=state.generation,
    )


def sample_conditioned_finite(
    config: ModelConfig,
    p: int,
    F: FinitenessValues,
    rng: np.random.Generator,
    method: str = "rejection",
    *,
    max_generations: Optional[int] = None,
    rejection_cap: int = 10**6,
    infinity_threshold: Optional[int] = None,
) -> CascadeRecord:
    """Sample a cascade conditioned to be finite.

    ``rejection`` re-runs the unconditioned sampler until a finite run
    appears — exact, but infeasible once F(p) is small, in which case a
    feasibility error points at the tilt method.  ``tilt`` draws gasket
    faces from the finiteness-tilted weight law and inner perimeters from
    the finiteness-tilted ring, recursing independently per face; this is
    exact when F is exact and inherits only the estimation error of F
    otherwise.  ``infinity_threshold`` tightens the perimeter cap used to
    abandon rejection attempts; finite runs essentially never cross it, so
    the accepted law is unchanged up to that exponentially small exclusion.
    """
    if method not in ("rejection", "tilt"):
        raise ValueError(f"unknown method {method!r}")
    ring = RingLaw(Q=config.Q)
    if method == "tilt":
        return _sample_conditioned_tilt(config, p, F, rng, ring)
    f_p = F.value(p)
    attempts = min(rejection_cap, max(100, int(math.ceil(20.0 / max(f_p, REJECTION_FLOOR)))))
    gens = max_generations if max_generations is not None else config.max_generations
    for _ in range(attempts):
        rec = sample_unconditioned(
            config, p, gens, rng, ring=ring, infinity_threshold=infinity_threshold
        )
        if rec.finite:
            return rec
    raise FeasibilityError(
        f"no finite run in {attempts} attempts at p={p} (F estimate {f_p:.3g}); "
        "use method='tilt'"
    )


def record_to_json_dict(record: CascadeRecord) -> dict:
    """Plain-JSON form of a record; node words are dotted strings."""
    items = sorted(record.nodes.items(), key=lambda kv: (len(kv[0]), kv[0]))
    return {
        "p": record.p,
        "finite": record.finite,
        "generations": record.generations_used,
        "tperm": record.tperm,
        "nodes": [
            [".".join(str(k) for k in word), outer, inner]
            for word, (outer, inner) in items
        ],
    }


def write_records_jsonl(path, records: Iterable[CascadeRecord]) -> None:
    """Write one JSON record per line."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json_dict(rec)) + "\n")


def write_ftable_csv(path, table: FTable) -> None:
    """Write the table as CSV columns p, F, stderr, h."""
    import csv

    h = table.h
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "F", "stderr", "h"])
        for p in range(table.p_max + 1):
            writer.writerow(
                [p, repr(float(table.values[p])), repr(float(table.std_errors[p])), repr(float(h[p]))]
            )
