# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels.

Twin of ``_fallback``: same names, signatures, stream consumption, and
IEEE-754 operation order (the build disables FMA contraction), so results
are bit-identical to the pure-Python implementations.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport M_PI, cos, exp, log, pow, sqrt
from libc.stdlib cimport free, malloc, realloc
from numpy.random cimport bitgen_t

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

cdef long long TAIL_SCAN_CAP = 1073741824  # 1 << 30


cdef bitgen_t *_get_bitgen(object bit_generator) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")


cdef inline double _nd(bitgen_t *bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline long long _draw_step(bitgen_t *bg, const double[::1] prob,
                                 const long long[::1] alias, long long n_cells,
                                 long long n_direct, double tail_coeff,
                                 double tail_power, double tail_mass) noexcept nogil:
    cdef double u = _nd(bg)
    cdef double scaled = u * n_cells
    cdef long long cell = <long long> scaled
    cdef long long j, k
    cdef double target, acc, inc
    if cell >= n_cells:
        cell = n_cells - 1
    if (scaled - cell) < prob[cell]:
        j = cell
    else:
        j = alias[cell]
    if tail_mass > 0.0 and j == n_direct:
        target = _nd(bg) * tail_mass
        k = n_direct
        acc = tail_coeff * pow(<double> k, -tail_power)
        while acc < target:
            k += 1
            inc = tail_coeff * pow(<double> k, -tail_power)
            acc += inc
            if inc <= 0.0 or k - n_direct > TAIL_SCAN_CAP:
                break
        j = k
    return j


def walk_hit_summary(object bit_generator, const double[::1] prob,
                     const long long[::1] alias, long long n_direct,
                     double tail_coeff, double tail_power, double tail_mass,
                     long long p, long long step_budget):
    """Run the walk to its first hit of -p; return (T, L, censored)."""
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    cdef long long n_cells = prob.shape[0]
    cdef long long position = 0, downs = 0, steps = 0, j
    with nogil:
        while steps < step_budget:
            j = _draw_step(bg, prob, alias, n_cells, n_direct,
                           tail_coeff, tail_power, tail_mass)
            steps += 1
            if j == 0:
                downs += 1
                position -= 1
                if position == -p:
                    break
            else:
                position += j - 1
    return steps, downs, position != -p


def walk_hit_jumps(object bit_generator, const double[::1] prob,
                   const long long[::1] alias, long long n_direct,
                   double tail_coeff, double tail_power, double tail_mass,
                   long long p, long long step_budget, long long collect_cap):
    """As summary, also returning positive jump values in occurrence order."""
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    cdef long long n_cells = prob.shape[0]
    cdef long long position = 0, downs = 0, steps = 0, j
    cdef long long cap = 256, used = 0
    cdef long long *buf = <long long *> malloc(cap * sizeof(long long))
    cdef long long *tmp
    cdef bint failed = 0
    if buf == NULL:
        raise MemoryError()
    with nogil:
        while steps < step_budget:
            j = _draw_step(bg, prob, alias, n_cells, n_direct,
                           tail_coeff, tail_power, tail_mass)
            steps += 1
            if j == 0:
                downs += 1
                position -= 1
                if position == -p:
                    break
            else:
                if used >= collect_cap:
                    break
                if used == cap:
                    cap *= 2
                    tmp = <long long *> realloc(buf, cap * sizeof(long long))
                    if tmp == NULL:
                        failed = 1
                        break
                    buf = tmp
                buf[used] = j
                used += 1
                position += j - 1
    if failed:
        free(buf)
        raise MemoryError()
    arr = np.empty(used, dtype=np.int64)
    cdef long long[::1] view = arr
    cdef long long i
    for i in range(used):
        view[i] = buf[i]
    free(buf)
    return steps, downs, arr, position != -p


def walk_hit_steps(object bit_generator, const double[::1] prob,
                   const long long[::1] alias, long long n_direct,
                   double tail_coeff, double tail_power, double tail_mass,
                   long long p, long long step_budget, long long collect_cap):
    """As summary, also returning every step (value - 1) in order."""
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    cdef long long n_cells = prob.shape[0]
    cdef long long position = 0, downs = 0, steps = 0, j
    cdef long long cap = 256, used = 0
    cdef long long *buf = <long long *> malloc(cap * sizeof(long long))
    cdef long long *tmp
    cdef bint failed = 0
    if buf == NULL:
        raise MemoryError()
    with nogil:
        while steps < step_budget:
            j = _draw_step(bg, prob, alias, n_cells, n_direct,
                           tail_coeff, tail_power, tail_mass)
            steps += 1
            if used >= collect_cap:
                break
            if used == cap:
                cap *= 2
                tmp = <long long *> realloc(buf, cap * sizeof(long long))
                if tmp == NULL:
                    failed = 1
                    break
                buf = tmp
            buf[used] = j - 1
            used += 1
            if j == 0:
                downs += 1
                position -= 1
                if position == -p:
                    break
            else:
                position += j - 1
    if failed:
        free(buf)
        raise MemoryError()
    arr = np.empty(used, dtype=np.int64)
    cdef long long[::1] view = arr
    cdef long long i
    for i in range(used):
        view[i] = buf[i]
    free(buf)
    return steps, downs, arr, position != -p


def walk_boltzmann_faces(object bit_generator, const double[::1] prob,
                         const long long[::1] alias, long long n_direct,
                         double tail_coeff, double tail_power, double tail_mass,
                         long long p, long long step_budget,
                         long long collect_cap):
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
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    cdef long long n_cells = prob.shape[0]
    cdef double u = _nd(bg)
    cdef double p_plus_1 = <double> (p + 1)
    cdef long long position = 0, downs = 0, steps = 0, excess = 0, j
    cdef long long cap = 256, used = 0
    cdef int status = 3
    cdef long long *buf = <long long *> malloc(cap * sizeof(long long))
    cdef long long *tmp
    cdef bint failed = 0
    if buf == NULL:
        raise MemoryError()
    with nogil:
        while steps < step_budget:
            j = _draw_step(bg, prob, alias, n_cells, n_direct,
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
                if u * (<double> (p + excess + 1)) >= p_plus_1:
                    status = 1
                    break
                if used >= collect_cap:
                    break
                if used == cap:
                    cap *= 2
                    tmp = <long long *> realloc(buf, cap * sizeof(long long))
                    if tmp == NULL:
                        failed = 1
                        break
                    buf = tmp
                buf[used] = j
                used += 1
                position += j - 1
    if failed:
        free(buf)
        raise MemoryError()
    cdef long long n_out = used if status == 0 else 0
    arr = np.empty(n_out, dtype=np.int64)
    cdef long long[::1] view = arr
    cdef long long i
    for i in range(n_out):
        view[i] = buf[i]
    free(buf)
    return status, steps, downs, arr


def stable_hit_tau(object bit_generator, double eps, double jump_rate,
                   double drift, double budget):
    """First-passage time of the truncated driven process below -1."""
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    cdef double x = 0.0, t = 0.0, tau = 0.0
    cdef double time_to_hit, u1, u2, dt, log_u2, jump
    cdef bint censored = 0, done = 0
    with nogil:
        while not done:
            time_to_hit = (x + 1.0) / drift
            u1 = _nd(bg)
            if u1 == 0.0:
                u1 = 1.0
            dt = -log(u1) / jump_rate
            if time_to_hit <= dt:
                tau = t + time_to_hit
                if tau > budget:
                    tau = budget
                    censored = 1
                done = 1
            else:
                t += dt
                if t > budget:
                    tau = budget
                    censored = 1
                    done = 1
                else:
                    x -= drift * dt
                    u2 = _nd(bg)
                    if u2 == 0.0:
                        u2 = 1.0
                    log_u2 = log(u2)
                    jump = eps * exp((-2.0 / 3.0) * log_u2)
                    x += jump
    return tau, bool(censored)


def stable_hit_jumps(object bit_generator, double eps, double delta,
                     double jump_rate, double drift, double budget):
    """First passage plus the jumps >= delta, in occurrence order."""
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    cdef double x = 0.0, t = 0.0, tau = 0.0
    cdef double time_to_hit, u1, u2, dt, log_u2, jump
    cdef bint censored = 0, done = 0, failed = 0
    cdef long long cap = 256, used = 0
    cdef double *buf = <double *> malloc(cap * sizeof(double))
    cdef double *tmp
    if buf == NULL:
        raise MemoryError()
    with nogil:
        while not done:
            time_to_hit = (x + 1.0) / drift
            u1 = _nd(bg)
            if u1 == 0.0:
                u1 = 1.0
            dt = -log(u1) / jump_rate
            if time_to_hit <= dt:
                tau = t + time_to_hit
                if tau > budget:
                    tau = budget
                    censored = 1
                done = 1
            else:
                t += dt
                if t > budget:
                    tau = budget
                    censored = 1
                    done = 1
                else:
                    x -= drift * dt
                    u2 = _nd(bg)
                    if u2 == 0.0:
                        u2 = 1.0
                    log_u2 = log(u2)
                    jump = eps * exp((-2.0 / 3.0) * log_u2)
                    x += jump
                    if jump >= delta:
                        if used == cap:
                            cap *= 2
                            tmp = <double *> realloc(buf, cap * sizeof(double))
                            if tmp == NULL:
                                failed = 1
                                break
                            buf = tmp
                        buf[used] = jump
                        used += 1
    if failed:
        free(buf)
        raise MemoryError()
    arr = np.empty(used, dtype=np.float64)
    cdef double[::1] view = arr
    cdef long long i
    for i in range(used):
        view[i] = buf[i]
    free(buf)
    return tau, arr, bool(censored)


def stable_hit_powersums(object bit_generator, double eps, double jump_rate,
                         double drift, double budget, object exponents):
    """First passage plus sum_j J^theta_i for each requested exponent."""
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    exps_arr = np.ascontiguousarray(exponents, dtype=np.float64)
    sums_arr = np.zeros(exps_arr.shape[0], dtype=np.float64)
    cdef const double[::1] exps = exps_arr
    cdef double[::1] sums = sums_arr
    cdef Py_ssize_t n_exp = exps.shape[0], i
    cdef double log_eps = log(eps)
    cdef double x = 0.0, t = 0.0, tau = 0.0
    cdef double time_to_hit, u1, u2, dt, log_u2, jump, log_jump
    cdef long long n_jumps = 0
    cdef bint censored = 0, done = 0
    with nogil:
        while not done:
            time_to_hit = (x + 1.0) / drift
            u1 = _nd(bg)
            if u1 == 0.0:
                u1 = 1.0
            dt = -log(u1) / jump_rate
            if time_to_hit <= dt:
                tau = t + time_to_hit
                if tau > budget:
                    tau = budget
                    censored = 1
                done = 1
            else:
                t += dt
                if t > budget:
                    tau = budget
                    censored = 1
                    done = 1
                else:
                    x -= drift * dt
                    u2 = _nd(bg)
                    if u2 == 0.0:
                        u2 = 1.0
                    log_u2 = log(u2)
                    jump = eps * exp((-2.0 / 3.0) * log_u2)
                    x += jump
                    n_jumps += 1
                    log_jump = log_eps + (-2.0 / 3.0) * log_u2
                    for i in range(n_exp):
                        sums[i] += exp(exps[i] * log_jump)
    return tau, sums_arr, n_jumps, bool(censored)


def stable_hit_powersums_adaptive(object bit_generator, double eps, double band,
                                  double s_cap, double budget, object exponents):
    """Power sums with a jump truncation that rescales with the height.

    See the fallback twin for the full description.  Returns
    ``(tau, sums, comp, n_jumps, censored)``.
    """
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    exps_arr = np.ascontiguousarray(exponents, dtype=np.float64)
    sums_arr = np.zeros(exps_arr.shape[0], dtype=np.float64)
    comp_arr = np.zeros(exps_arr.shape[0], dtype=np.float64)
    kk_arr = np.zeros(exps_arr.shape[0], dtype=np.float64)
    cdef const double[::1] exps = exps_arr
    cdef double[::1] sums = sums_arr
    cdef double[::1] comp = comp_arr
    cdef double[::1] kk = kk_arr
    cdef Py_ssize_t n_exp = exps.shape[0], i
    cdef double sqrt_pi = sqrt(M_PI)
    cdef double s = 1.0
    cdef double e = eps
    cdef double rate = pow(e, -1.5) / (2.0 * sqrt_pi)
    cdef double drift = 1.5 * pow(e, -0.5) / sqrt_pi
    cdef double log_e = log(e)
    cdef double x = 0.0, t = 0.0, tau = 0.0
    cdef double h, s_new, time_to_hit, u1, u2, dt, log_u2, jump, log_jump
    cdef long long n_jumps = 0
    cdef bint censored = 0, done = 0
    for i in range(n_exp):
        kk[i] = 0.75 * pow(e, exps[i] - 1.5) / (sqrt_pi * (exps[i] - 1.5))
    with nogil:
        while not done:
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
                    rate = pow(e, -1.5) / (2.0 * sqrt_pi)
                    drift = 1.5 * pow(e, -0.5) / sqrt_pi
                    log_e = log(e)
                    for i in range(n_exp):
                        kk[i] = 0.75 * pow(e, exps[i] - 1.5) / (
                            sqrt_pi * (exps[i] - 1.5)
                        )
            time_to_hit = (x + 1.0) / drift
            u1 = _nd(bg)
            if u1 == 0.0:
                u1 = 1.0
            dt = -log(u1) / rate
            if time_to_hit <= dt:
                tau = t + time_to_hit
                if tau > budget:
                    tau = budget
                    censored = 1
                else:
                    for i in range(n_exp):
                        comp[i] += time_to_hit * kk[i]
                done = 1
            else:
                t += dt
                if t > budget:
                    tau = budget
                    censored = 1
                    done = 1
                else:
                    for i in range(n_exp):
                        comp[i] += dt * kk[i]
                    x -= drift * dt
                    u2 = _nd(bg)
                    if u2 == 0.0:
                        u2 = 1.0
                    log_u2 = log(u2)
                    log_jump = log_e + (-2.0 / 3.0) * log_u2
                    jump = e * exp((-2.0 / 3.0) * log_u2)
                    x += jump
                    n_jumps += 1
                    for i in range(n_exp):
                        sums[i] += exp(exps[i] * log_jump)
    return tau, sums_arr, comp_arr, n_jumps, bool(censored)


def stable_hit_powersums_adaptive_gauss(object bit_generator, double eps,
                                        double band, double s_cap,
                                        double budget, object exponents):
    """Adaptive power sums with the omitted small jumps re-added as noise.

    See the fallback twin for the full description.  Returns
    ``(tau, sums, comp, n_jumps, censored)``.
    """
    cdef bitgen_t *bg = _get_bitgen(bit_generator)
    exps_arr = np.ascontiguousarray(exponents, dtype=np.float64)
    sums_arr = np.zeros(exps_arr.shape[0], dtype=np.float64)
    comp_arr = np.zeros(exps_arr.shape[0], dtype=np.float64)
    kk_arr = np.zeros(exps_arr.shape[0], dtype=np.float64)
    cdef const double[::1] exps = exps_arr
    cdef double[::1] sums = sums_arr
    cdef double[::1] comp = comp_arr
    cdef double[::1] kk = kk_arr
    cdef Py_ssize_t n_exp = exps.shape[0], i
    cdef double sqrt_pi = sqrt(M_PI)
    cdef double s = 1.0
    cdef double e = eps
    cdef double rate = pow(e, -1.5) / (2.0 * sqrt_pi)
    cdef double drift = 1.5 * pow(e, -0.5) / sqrt_pi
    cdef double sigma2 = 1.5 * pow(e, 0.5) / sqrt_pi
    cdef double log_e = log(e)
    cdef double x = 0.0, t = 0.0, tau = 0.0
    cdef double h, s_new, u1, u2, u3, ua, ub, dt, gauss, x_end, frac
    cdef double log_u2, jump, log_jump
    cdef long long n_jumps = 0
    cdef bint censored = 0, done = 0
    for i in range(n_exp):
        kk[i] = 0.75 * pow(e, exps[i] - 1.5) / (sqrt_pi * (exps[i] - 1.5))
    with nogil:
        while not done:
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
                    rate = pow(e, -1.5) / (2.0 * sqrt_pi)
                    drift = 1.5 * pow(e, -0.5) / sqrt_pi
                    sigma2 = 1.5 * pow(e, 0.5) / sqrt_pi
                    log_e = log(e)
                    for i in range(n_exp):
                        kk[i] = 0.75 * pow(e, exps[i] - 1.5) / (
                            sqrt_pi * (exps[i] - 1.5)
                        )
            u1 = _nd(bg)
            if u1 == 0.0:
                u1 = 1.0
            dt = -log(u1) / rate
            ua = _nd(bg)
            if ua == 0.0:
                ua = 1.0
            ub = _nd(bg)
            gauss = sqrt(sigma2 * dt) * sqrt(-2.0 * log(ua)) * cos(
                2.0 * M_PI * ub
            )
            x_end = x - drift * dt + gauss
            if x_end <= -1.0:
                frac = (x + 1.0) / (x - x_end)
                tau = t + frac * dt
                if tau > budget:
                    tau = budget
                    censored = 1
                else:
                    for i in range(n_exp):
                        comp[i] += frac * dt * kk[i]
                done = 1
            else:
                u3 = _nd(bg)
                if u3 < exp(-2.0 * (x + 1.0) * (x_end + 1.0) / (sigma2 * dt)):
                    tau = t + 0.5 * dt
                    if tau > budget:
                        tau = budget
                        censored = 1
                    else:
                        for i in range(n_exp):
                            comp[i] += 0.5 * dt * kk[i]
                    done = 1
                else:
                    t += dt
                    if t > budget:
                        tau = budget
                        censored = 1
                        done = 1
                    else:
                        for i in range(n_exp):
                            comp[i] += dt * kk[i]
                        x = x_end
                        u2 = _nd(bg)
                        if u2 == 0.0:
                            u2 = 1.0
                        log_u2 = log(u2)
                        log_jump = log_e + (-2.0 / 3.0) * log_u2
                        jump = e * exp((-2.0 / 3.0) * log_u2)
                        x += jump
                        n_jumps += 1
                        for i in range(n_exp):
                            sums[i] += exp(exps[i] * log_jump)
    return tau, sums_arr, comp_arr, n_jumps, bool(censored)
