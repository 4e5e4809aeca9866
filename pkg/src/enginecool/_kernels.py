"""Numba-compiled scalar primitives and the closed-loop lap kernel.

The public modules (plant, pump, control) wrap these with validation; the lap
kernel composes the very same primitives so there is one implementation of
each equation.
"""

import math

import numpy as np
from numba import njit

MECHANICAL = 0
FEEDFORWARD = 1
PID = 2
COMBINED = 3

# Layout of the carried state vector between kernel calls.
S_T_CYL, S_MDOT, S_Q, S_INTEGRAL, S_PREV_ERR, S_DFILT = range(6)


@njit(cache=True, nogil=True)
def water_htc(mdot, alpha_ref, mdot_ref, m_exp):
    return alpha_ref * (mdot / mdot_ref) ** m_exp


@njit(cache=True, nogil=True)
def dT_dt(T_cyl, T_w, alpha_w, chi_alpha_c, T_mod, heat_capacity):
    # heat_capacity = C_v * rho * dx, J/(m^2 K)
    return (chi_alpha_c * (T_mod - T_cyl) + alpha_w * (T_w - T_cyl)) / heat_capacity


@njit(cache=True, nogil=True)
def rk4_step(T_cyl, dt, T_w, alpha_w, chi_alpha_c, T_mod, heat_capacity):
    k1 = dT_dt(T_cyl, T_w, alpha_w, chi_alpha_c, T_mod, heat_capacity)
    k2 = dT_dt(T_cyl + 0.5 * dt * k1, T_w, alpha_w, chi_alpha_c, T_mod, heat_capacity)
    k3 = dT_dt(T_cyl + 0.5 * dt * k2, T_w, alpha_w, chi_alpha_c, T_mod, heat_capacity)
    k4 = dT_dt(T_cyl + dt * k3, T_w, alpha_w, chi_alpha_c, T_mod, heat_capacity)
    return T_cyl + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True, nogil=True)
def pt1_step(y, u, dt, tau):
    """Exact zero-order-hold update of ``tau * y' + y = u``."""
    return y + (1.0 - math.exp(-dt / tau)) * (u - y)


@njit(cache=True, nogil=True)
def clamp(x, lo, hi):
    return min(max(x, lo), hi)


@njit(cache=True, nogil=True)
def pump_update(mdot, command, dt, tau_p, lo, hi):
    u = clamp(command, lo, hi)
    return clamp(pt1_step(mdot, u, dt, tau_p), lo, hi)


@njit(cache=True, nogil=True)
def pid_update(integral, prev_error, dfilt, error, dt, k_p, k_i, k_d,
               t_filter, windup_limit, base, lo, hi):
    """One sample of the filtered-derivative PID with conditional integration.

    Returns (delta, integral, prev_error, dfilt).
    """
    raw = (error - prev_error) / dt
    if t_filter > 0.0:
        dfilt = pt1_step(dfilt, raw, dt, t_filter)
    else:
        dfilt = raw
    fixed = k_p * error + k_d * dfilt

    candidate = integral + error * dt
    if k_i != 0.0:
        bound = windup_limit / abs(k_i)
        candidate = clamp(candidate, -bound, bound)
    u = base + fixed + k_i * candidate
    push = k_i * error
    if (u > hi and push > 0.0) or (u < lo and push < 0.0):
        candidate = integral
    return fixed + k_i * candidate, candidate, error, dfilt


@njit(cache=True, nogil=True)
def lap_kernel(chi_alpha_c, T_mod, nominal, target, use_pid, dt,
               heat_capacity, alpha_ref, mdot_ref, m_exp, T_w_in, cp_w, area,
               tau_p, mdot_min, mdot_max,
               k_p, k_i, k_d, t_filter, windup_limit,
               state, out):
    """Integrate one pass over the precomputed disturbance arrays.

    ``out`` has shape (n, 9) with columns
    T_cyl, T_w, mdot_cmd, mdot_act, Q_dot, alpha_w, q_comb, q_water, T_next.
    The flux columns are per-step trapezoidal integrals (J/m^2) used for the
    energy bookkeeping check. ``state`` is updated in place.
    Returns the index of the first non-finite step, or -1.
    """
    n = chi_alpha_c.shape[0]
    T = state[S_T_CYL]
    mdot = state[S_MDOT]
    Q_prev = state[S_Q]
    integral = state[S_INTEGRAL]
    prev_err = state[S_PREV_ERR]
    dfilt = state[S_DFILT]
    for k in range(n):
        base = nominal[k]
        cmd = base
        if use_pid:
            err = target[k] - T
            delta, integral, prev_err, dfilt = pid_update(
                integral, prev_err, dfilt, err, dt, k_p, k_i, k_d,
                t_filter, windup_limit, base, mdot_min, mdot_max)
            cmd = base + delta
        a_w = water_htc(mdot, alpha_ref, mdot_ref, m_exp)
        T_w = T_w_in + Q_prev / (mdot * cp_w)
        Q = area * a_w * (T - T_w)
        T_next = rk4_step(T, dt, T_w, a_w, chi_alpha_c[k], T_mod[k], heat_capacity)
        T_mid = 0.5 * (T + T_next)
        out[k, 0] = T
        out[k, 1] = T_w
        out[k, 2] = cmd
        out[k, 3] = mdot
        out[k, 4] = Q
        out[k, 5] = a_w
        out[k, 6] = chi_alpha_c[k] * (T_mod[k] - T_mid) * dt
        out[k, 7] = a_w * (T_mid - T_w) * dt
        out[k, 8] = T_next
        if not (math.isfinite(T_next) and math.isfinite(cmd)):
            return k
        mdot = pump_update(mdot, cmd, dt, tau_p, mdot_min, mdot_max)
        Q_prev = Q
        T = T_next
    state[S_T_CYL] = T
    state[S_MDOT] = mdot
    state[S_Q] = Q_prev
    state[S_INTEGRAL] = integral
    state[S_PREV_ERR] = prev_err
    state[S_DFILT] = dfilt
    return -1


def new_state():
    return np.zeros(6)
