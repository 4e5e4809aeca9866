"""Lumped-capacity thermal model of the cylinder head.

One thermal mass per unit water-wetted area, heated from the combustion side
and cooled by the water jacket::

    C_v rho dx dT_cyl/dt = chi <alpha_c> (T_mod - T_cyl) + alpha_w (T_w - T_cyl)
    alpha_w              = alpha_ref (mdot_w / mdot_ref)**m
    T_w                  = T_w_in + Q_dot / (mdot_w C_p_w)

``Q_dot`` is total watts; it is obtained from the per-area water-side flux
through the effective wetted area ``wetted_area``.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._validation import check_positive, check_scalar
from .exceptions import ConvergenceError, DomainError


@dataclass(frozen=True)
class ThermalPlantParams:
    """Physical constants of the lumped plant (SI units).

    The aluminium density default is 2700 kg/m^3.
    ``wetted_area`` converts the per-area water-side flux into total watts; its
    default puts the full-load reference heat flow at roughly 50 kW.
    """

    C_v: float = 900.0
    rho: float = 2700.0
    dx: float = 0.015
    chi: float = 0.3
    alpha_ref: float = 1.0e4
    mdot_ref: float = 2.0
    m_exp: float = 0.7
    T_w_in: float = 368.0
    C_p_w: float = 4186.0
    wetted_area: float = 0.22

    def __post_init__(self):
        for name in ("C_v", "rho", "dx", "alpha_ref", "mdot_ref", "T_w_in", "C_p_w",
                     "wetted_area"):
            check_positive(getattr(self, name), name)
        check_scalar(self.chi, "chi", lo=0.0, hi=1.0, include_lo=False)
        check_scalar(self.m_exp, "m_exp", lo=0.0, hi=1.0, include_lo=False, include_hi=False)

    @property
    def heat_capacity(self):
        """Areal heat capacity ``C_v * rho * dx`` in J/(m^2 K)."""
        return self.C_v * self.rho * self.dx

    @property
    def htc_coefficient(self):
        """``alpha_ref / mdot_ref**m``, the prefactor of the flow power law."""
        return self.alpha_ref / self.mdot_ref ** self.m_exp


@dataclass(frozen=True)
class PlantState:
    """Instantaneous plant state at time ``t``."""

    t: float
    T_cyl: float
    T_w: float
    mdot_w: float
    Q_dot: float = 0.0

    def __post_init__(self):
        if not (self.T_cyl > 0 and self.T_w > 0):
            raise DomainError("temperatures must be positive")
        if not self.mdot_w >= 0:
            raise DomainError("mdot_w must be non-negative")


def water_htc(mdot_w, params):
    """Water-jacket heat transfer coefficient in W/(m^2 K).

    Accepts a scalar or an array of mass flows (kg/s).
    """
    mdot = np.asarray(mdot_w, dtype=float)
    if np.any(~(mdot > 0)):
        raise DomainError(f"water mass flow must be positive, got {mdot_w}")
    if mdot.ndim == 0:
        mdot = float(mdot)
    return _kernels.water_htc(mdot, params.alpha_ref, params.mdot_ref, params.m_exp)


def water_htc_slope(mdot_w, params):
    """Analytic derivative d(alpha_w)/d(mdot_w), W s/(m^2 K kg)."""
    mdot = check_positive(mdot_w, "mdot_w", error=DomainError)
    return params.m_exp * params.htc_coefficient * mdot ** (params.m_exp - 1.0)


def plant_derivative(state, alpha_c_mean, T_mod, params):
    """Rate of change of the cylinder head temperature, K/s."""
    if alpha_c_mean < 0:
        raise DomainError("alpha_c_mean must be non-negative")
    a_w = water_htc(state.mdot_w, params)
    return _kernels.dT_dt(state.T_cyl, state.T_w, a_w, params.chi * alpha_c_mean, T_mod,
                          params.heat_capacity)


def water_temperature(Q_dot, mdot_w, params):
    """Water reference temperature from the heat pickup, K."""
    mdot = check_scalar(mdot_w, "mdot_w", lo=0.0, include_lo=False, error=DomainError)
    return params.T_w_in + Q_dot / (mdot * params.C_p_w)


def heat_flow(T_cyl, T_w, mdot_w, params):
    """Total solid-to-water heat flow in W."""
    return params.wetted_area * water_htc(mdot_w, params) * (T_cyl - T_w)


def steady_state(alpha_c_mean, T_mod, mdot_w, params, *, tol=1e-9, max_iter=1000):
    """Self-consistent equilibrium of the plant and the water temperature.

    Iterates the closed-form solution of the temperature equation with the
    water temperature update until the head temperature moves less than
    ``tol`` kelvin.

    Returns
    -------
    PlantState
        Equilibrium at ``t = 0``.
    """
    if alpha_c_mean < 0:
        raise DomainError("alpha_c_mean must be non-negative")
    a_w = water_htc(mdot_w, params)
    x = params.chi * alpha_c_mean
    T_w = params.T_w_in
    T = (x * T_mod + a_w * T_w) / (x + a_w)
    for _ in range(max_iter):
        Q = params.wetted_area * a_w * (T - T_w)
        T_w = water_temperature(Q, mdot_w, params)
        T_new = (x * T_mod + a_w * T_w) / (x + a_w)
        if abs(T_new - T) < tol:
            T = T_new
            Q = params.wetted_area * a_w * (T - T_w)
            return PlantState(t=0.0, T_cyl=T, T_w=T_w, mdot_w=float(mdot_w), Q_dot=Q)
        T = T_new
    raise ConvergenceError(f"steady state did not converge within {max_iter} iterations")


def steady_state_temperature(alpha_c_mean, T_mod, mdot_w, params, **kwargs):
    """Equilibrium cylinder head temperature in K, see :func:`steady_state`."""
    return steady_state(alpha_c_mean, T_mod, mdot_w, params, **kwargs).T_cyl


def water_coupling_gain(mdot_w, params):
    """Loop gain of the explicit water-temperature coupling.

    The lagged update of ``T_w`` from the previous step's heat flow is a
    fixed-point iteration; it is stable only while this gain stays below one.
    """
    return params.wetted_area * water_htc(mdot_w, params) / (mdot_w * params.C_p_w)
