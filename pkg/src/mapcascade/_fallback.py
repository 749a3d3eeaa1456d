"""Pure-Python reference implementations of the sampling kernels.

Each function here has a compiled twin in ``_kernel`` with the same name,
signature, and — critically — the same random-stream consumption: both
backends draw the same number of uniforms in the same order and apply the
same IEEE-754 double operations, so outputs are bit-identical.  The compiled
module is built with FMA contraction disabled to preserve that guarantee.

All functions take a numpy ``BitGenerator`` (not a ``Generator``) so the two
backends can share raw-stream access.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "walk_hit_summary",
    "walk_hit_jumps",
    "walk_hit_steps",
    "walk_boltzmann_faces",
    "stable_hit_tau",
    "stable_hit_jumps",
    "stable_hit_powersums",
    "stable_hit_powersums_adaptive",
    "stable_hit_powersums_adaptive_gauss",
]

_TAIL_SCAN_CAP = 1 << 30


def _next_double(bit_generator):
    """One uniform in [0,1) from the raw stream, matching bitgen next_double."""
    return np.random.Generator(bit_generator).random


def _draw_step(rand, prob, alias, n_cells, n_direct, tail_coeff, tail_power, tail_mass):
    """One offspring value: alias table plus exact discrete tail inversion.

    Consumes one uniform, plus one more when the tail cell is hit.  The
    single uniform drives both the cell choice and the accept/alias branch
    (classic one-uniform alias method).
    """
    u = rand()
    scaled = u * n_cells
    cell = int(scaled)
    if cell >= n_cells:
        cell = n_cells - 1
    j = cell if (scaled - cell) < prob[cell] else int(alias[cell])
    if tail_mass > 0.0 and j == n_direct:
        target = rand() * tail_mass
        k = n_direct
        acc = tail_coeff * math.pow(k, -tail_power)
        while acc < target:
            k += 1
            inc = tail_coeff * math.pow(k, -tail_power)
            acc += inc
            if inc <= 0.0 or k - n_direct > _TAIL_SCAN_CAP:
                break
        j = k
    return j


def _walk_hit(bit_generator, prob, alias, n_direct, tail_coeff, tail_power,
              tail_mass, p, step_budget, collect, collect_cap=None):
    """Shared walk loop; ``collect`` is None, 'jumps', or 'steps'.

    ``collect_cap`` bounds the number of stored items; a walk that would
    exceed it aborts as censored (same classification as a step-budget hit),
    which keeps memory bounded on runaway excursions.
    """
    rand = _next_double(bit_generator)
    n_cells = len(prob)
    out = [] if collect is not None else None
    position = 0
    downs = 0
    steps = 0
    while steps < step_budget:
        j = _draw_step(rand, prob, alias, n_cells, n_direct,
                       tail_coeff, tail_power, tail_mass)
        steps += 1
        if collect == "steps":
            if collect_cap is not None and len(out) >= collect_cap:
                return steps, downs, np.array(out, dtype=np.int64), True
            out.append(j - 1)
        elif collect == "jumps" and j > 0:
            if collect_cap is not None and len(out) >= collect_cap:
                return steps, downs, np.array(out, dtype=np.int64), True
            out.append(j)
        if j == 0:
            downs += 1
            position -= 1
            if position == -p:
                arr = None if out is None else np.array(out, dtype=np.int64)
                return steps, downs, arr, False
        else:
            position += j - 1
    arr = None if out is None else np.array(out, dtype=np.int64)
    return steps, downs, arr, True


def walk_hit_summary(bit_generator, prob, alias, n_direct, tail_coeff,
                     tail_power, tail_mass, p, step_budget):
    """Run the walk to its first hit of -p; return (T, L, censored)."""
    T, L, _, censored = _walk_hit(bit_generator, prob, alias, n_direct,
                                  tail_coeff, tail_power, tail_mass,
                                  p, step_budget, None)
    return T, L, censored


def walk_hit_jumps(bit_generator, prob, alias, n_direct, tail_coeff,
                   tail_power, tail_mass, p, step_budget, collect_cap):
    """As summary, also returning positive jump values in occurrence order."""
    T, L, arr, censored = _walk_hit(bit_generator, prob, alias, n_direct,
                                    tail_coeff, tail_power, tail_mass,
                                    p, step_budget, "jumps", collect_cap)
    return T, L, arr, censored


def walk_hit_steps(bit_generator, prob, alias, n_direct, tail_coeff,
                   tail_power, tail_mass, p, step_budget, collect_cap):
    """As summary, also returning every step (value - 1) in order."""
    T, L, arr, censored = _walk_hit(bit_generator, prob, alias, n_direct,
                                    tail_coeff, tail_power, tail_mass,
                                    p, step_budget, "steps", collect_cap)
    return T, L, arr, censored


def walk_boltzmann_faces(bit_generator, prob, alias, n_direct, tail_coeff,
                         tail_power, tail_mass, p, step_budget, collect_cap):
    """One rejection-sampler proposal with the acceptance uniform drawn first.

    The accepted law weights an excursion by ``(p + 1) / (L + 1)`` and the
    final down-step count is exactly ``p`` plus the jump excess
    ``sum(J - 1)``, which only grows along the walk — so once
    ``u * (p + excess + 1) >= p + 1`` the proposal is certain to be rejected
    and the walk aborts immediately.  Returns ``(status, steps, downs,
    jumps)`` with status 0 = accepted (jumps in occurrence order), 1 =
    rejected early, 3 = censored by the step budget or the collect cap
    while still viable.
    """
    rand = _next_double(bit_generator)
    n_cells = len(prob)
    u = rand()
    p_plus_1 = float(p + 1)
    out = []
    position = 0
    downs = 0
    steps = 0
    excess = 0
    status = 3
    while steps < step_budget:
        j = _draw_step(rand, prob, alias, n_cells, n_direct,
                       tail_coeff, tail_power, tail_mass)
        steps += 1
        if j == 0:
            downs += 1
            position -= 1
            if position == -p:
                status = 0
                break
        else:
            excess += j - 1
            if u * float(p + excess + 1) >= p_plus_1:
                status = 1
                break
            if len(out) >= collect_cap:
                break
            out.append(j)
            position += j - 1
    if status != 0:
        out = []
    return status, steps, downs, np.array(out, dtype=np.int64)


def _stable_hit(bit_generator, eps, jump_rate, drift, budget, collect_min,
                exponents):
    """Shared drifted compound-Poisson loop, hitting level -1 exactly.

    Between jumps the path declines linearly at ``drift``; the crossing of
    -1 is located on the segment.  ``collect_min`` (a float) enables jump
    collection at or above that threshold; ``exponents`` (array or None)
    enables power-sum accumulation sum_j J^theta_i instead.
    """
    rand = _next_double(bit_generator)
    log_eps = math.log(eps)
    x = 0.0
    t = 0.0
    n_jumps = 0
    jumps = [] if collect_min is not None else None
    sums = [0.0] * len(exponents) if exponents is not None else None
    while True:
        time_to_hit = (x + 1.0) / drift
        u1 = rand()
        if u1 == 0.0:
            u1 = 1.0
        dt = -math.log(u1) / jump_rate
        if time_to_hit <= dt:
            tau = t + time_to_hit
            if tau > budget:
                return budget, jumps, sums, n_jumps, True
            return tau, jumps, sums, n_jumps, False
        t += dt
        if t > budget:
            return budget, jumps, sums, n_jumps, True
        x -= drift * dt
        u2 = rand()
        if u2 == 0.0:
            u2 = 1.0
        log_u2 = math.log(u2)
        jump = eps * math.exp((-2.0 / 3.0) * log_u2)
        x += jump
        n_jumps += 1
        if collect_min is not None and jump >= collect_min:
            jumps.append(jump)
        if sums is not None:
            log_jump = log_eps + (-2.0 / 3.0) * log_u2
            for i in range(len(exponents)):
                sums[i] += math.exp(exponents[i] * log_jump)


def stable_hit_tau(bit_generator, eps, jump_rate, drift, budget):
    """First-passage time of the truncated driven process below -1."""
    tau, _, _, _, censored = _stable_hit(bit_generator, eps, jump_rate,
                                         drift, budget, None, None)
    return tau, censored


def stable_hit_jumps(bit_generator, eps, delta, jump_rate, drift, budget):
    """First passage plus the jumps >= delta, in occurrence order."""
    tau, jumps, _, _, censored = _stable_hit(bit_generator, eps, jump_rate,
                                             drift, budget, delta, None)
    return tau, np.array(jumps, dtype=np.float64), censored


def stable_hit_powersums(bit_generator, eps, jump_rate, drift, budget,
                         exponents):
    """First passage plus sum_j J^theta_i for each requested exponent."""
    exps = np.asarray(exponents, dtype=np.float64)
    tau, _, sums, n_jumps, censored = _stable_hit(bit_generator, eps,
                                                  jump_rate, drift, budget,
                                                  None, exps)
    return tau, np.array(sums, dtype=np.float64), n_jumps, censored


def stable_hit_powersums_adaptive(bit_generator, eps, band, s_cap, budget,
                                  exponents):
    """Power sums with a jump truncation that rescales with the height.

    Far from the absorbing level the truncation is ``eps`` times the current
    height (updated whenever the height leaves the ``[s/band, s*band]``
    window), so the cost of an excursion grows only logarithmically with its
    duration and essentially no path is censored.  ``comp[i]`` accumulates
    the per-segment analytic theta-moment of the jumps below the local
    truncation, making ``sums[i] + comp[i]`` an unbiased path-conditional
    estimate of the full jump power sum.  Returns
    ``(tau, sums, comp, n_jumps, censored)``.
    """
    rand = _next_double(bit_generator)
    exps = [float(v) for v in np.asarray(exponents, dtype=np.float64)]
    n_exp = len(exps)
    sums = [0.0] * n_exp
    comp = [0.0] * n_exp
    kk = [0.0] * n_exp
    sqrt_pi = math.sqrt(math.pi)
    s = 1.0
    e = eps
    rate = math.pow(e, -1.5) / (2.0 * sqrt_pi)
    drift = 1.5 * math.pow(e, -0.5) / sqrt_pi
    log_e = math.log(e)
    for i in range(n_exp):
        kk[i] = 0.75 * math.pow(e, exps[i] - 1.5) / (sqrt_pi * (exps[i] - 1.5))
    x = 0.0
    t = 0.0
    n_jumps = 0
    while True:
        h = x + 1.0
        if h > band * s or (s > 1.0 and h * band < s):
            s_new = h
            if s_new < 1.0:
                s_new = 1.0
            if s_new > s_cap:
                s_new = s_cap
            if s_new != s:
                s = s_new
                e = eps * s
                rate = math.pow(e, -1.5) / (2.0 * sqrt_pi)
                drift = 1.5 * math.pow(e, -0.5) / sqrt_pi
                log_e = math.log(e)
                for i in range(n_exp):
                    kk[i] = 0.75 * math.pow(e, exps[i] - 1.5) / (
                        sqrt_pi * (exps[i] - 1.5)
                    )
        time_to_hit = (x + 1.0) / drift
        u1 = rand()
        if u1 == 0.0:
            u1 = 1.0
        dt = -math.log(u1) / rate
        if time_to_hit <= dt:
            tau = t + time_to_hit
            if tau > budget:
                return (budget, np.array(sums), np.array(comp), n_jumps, True)
            for i in range(n_exp):
                comp[i] += time_to_hit * kk[i]
            return (tau, np.array(sums), np.array(comp), n_jumps, False)
        t += dt
        if t > budget:
            return (budget, np.array(sums), np.array(comp), n_jumps, True)
        for i in range(n_exp):
            comp[i] += dt * kk[i]
        x -= drift * dt
        u2 = rand()
        if u2 == 0.0:
            u2 = 1.0
        log_u2 = math.log(u2)
        log_jump = log_e + (-2.0 / 3.0) * log_u2
        jump = e * math.exp((-2.0 / 3.0) * log_u2)
        x += jump
        n_jumps += 1
        for i in range(n_exp):
            sums[i] += math.exp(exps[i] * log_jump)


def stable_hit_powersums_adaptive_gauss(bit_generator, eps, band, s_cap,
                                        budget, exponents):
    """Adaptive power sums with the omitted small jumps re-added as noise.

    Identical to ``stable_hit_powersums_adaptive`` except that each
    inter-jump segment also carries a Gaussian increment whose variance is
    the exact second moment of the truncated sub-``e`` jumps, and hitting is
    detected through the segment endpoint plus an exact Brownian-bridge
    minimum test.  This removes the leading-order truncation bias of the
    path law at the cost of approximate within-segment crossing times
    (linear interpolation / midpoint).  Gaussians come from Box-Muller on
    the shared uniform stream so both backends stay bit-identical.  Returns
    ``(tau, sums, comp, n_jumps, censored)``.
    """
    rand = _next_double(bit_generator)
    exps = [float(v) for v in np.asarray(exponents, dtype=np.float64)]
    n_exp = len(exps)
    sums = [0.0] * n_exp
    comp = [0.0] * n_exp
    kk = [0.0] * n_exp
    sqrt_pi = math.sqrt(math.pi)
    s = 1.0
    e = eps
    rate = math.pow(e, -1.5) / (2.0 * sqrt_pi)
    drift = 1.5 * math.pow(e, -0.5) / sqrt_pi
    sigma2 = 1.5 * math.pow(e, 0.5) / sqrt_pi
    log_e = math.log(e)
    for i in range(n_exp):
        kk[i] = 0.75 * math.pow(e, exps[i] - 1.5) / (sqrt_pi * (exps[i] - 1.5))
    x = 0.0
    t = 0.0
    n_jumps = 0
    while True:
        h = x + 1.0
        if h > band * s or (s > 1.0 and h * band < s):
            s_new = h
            if s_new < 1.0:
                s_new = 1.0
            if s_new > s_cap:
                s_new = s_cap
            if s_new != s:
                s = s_new
                e = eps * s
                rate = math.pow(e, -1.5) / (2.0 * sqrt_pi)
                drift = 1.5 * math.pow(e, -0.5) / sqrt_pi
                sigma2 = 1.5 * math.pow(e, 0.5) / sqrt_pi
                log_e = math.log(e)
                for i in range(n_exp):
                    kk[i] = 0.75 * math.pow(e, exps[i] - 1.5) / (
                        sqrt_pi * (exps[i] - 1.5)
                    )
        u1 = rand()
        if u1 == 0.0:
            u1 = 1.0
        dt = -math.log(u1) / rate
        ua = rand()
        if ua == 0.0:
            ua = 1.0
        ub = rand()
        gauss = math.sqrt(sigma2 * dt) * math.sqrt(-2.0 * math.log(ua)) * math.cos(
            2.0 * math.pi * ub
        )
        x_end = x - drift * dt + gauss
        if x_end <= -1.0:
            frac = (x + 1.0) / (x - x_end)
            tau = t + frac * dt
            if tau > budget:
                return (budget, np.array(sums), np.array(comp), n_jumps, True)
            for i in range(n_exp):
                comp[i] += frac * dt * kk[i]
            return (tau, np.array(sums), np.array(comp), n_jumps, False)
        u3 = rand()
        if u3 < math.exp(-2.0 * (x + 1.0) * (x_end + 1.0) / (sigma2 * dt)):
            tau = t + 0.5 * dt
            if tau > budget:
                return (budget, np.array(sums), np.array(comp), n_jumps, True)
            for i in range(n_exp):
                comp[i] += 0.5 * dt * kk[i]
            return (tau, np.array(sums), np.array(comp), n_jumps, False)
        t += dt
        if t > budget:
            return (budget, np.array(sums), np.array(comp), n_jumps, True)
        for i in range(n_exp):
            comp[i] += dt * kk[i]
        x = x_end
        u2 = rand()
        if u2 == 0.0:
            u2 = 1.0
        log_u2 = math.log(u2)
        log_jump = log_e + (-2.0 / 3.0) * log_u2
        jump = e * math.exp((-2.0 / 3.0) * log_u2)
        x += jump
        n_jumps += 1
        for i in range(n_exp):
            sums[i] += math.exp(exps[i] * log_jump)
