"""First-guess PID gains from a linearised plant.

Around an operating point the head temperature responds to the water flow as
a first-order element ``k_s_e / (tau_e s + 1)``; the pump adds a second lag
``1 / (tau_p s + 1)``. Placing the two controller zeros on the two plant poles
leaves an integrating open loop ``k_I k_s_e / s`` and a first-order closed
loop with time constant ``1 / (k_I k_s_e)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import _kernels
from ._validation import check_positive, check_scalar
from .control import PidGains, pid_step, ControllerState
from .exceptions import DomainError
from .plant import ThermalPlantParams, water_htc, water_htc_slope
from .pump import PumpParams


@dataclass(frozen=True)
class LinearPlant:
    tau_e: float
    k_s_e: float


def linearize_plant(T_w_0, T_cyl_0, mdot_w_0, plant, pump=None):
    """Time constant (s) and static gain (K s/kg) of the head temperature.

    The combustion-side flux is treated as an imposed disturbance and the
    water temperature is frozen at ``T_w_0``, so only the water-side
    conductance sets the time constant.
    """
    mdot_w_0 = check_positive(mdot_w_0, "mdot_w_0", error=DomainError)
    if pump is not None and not pump.mdot_min <= mdot_w_0 <= pump.mdot_max:
        raise DomainError(
            f"operating flow {mdot_w_0} outside [{pump.mdot_min}, {pump.mdot_max}] kg/s")
    a_w0 = water_htc(mdot_w_0, plant)
    tau_e = plant.heat_capacity / a_w0
    k_s_e = (T_w_0 - T_cyl_0) / a_w0 * water_htc_slope(mdot_w_0, plant)
    return LinearPlant(tau_e, k_s_e)


def kessler_tune(tau_e, tau_p, k_s_e, tau_c_desired):
    """PID gains that cancel both lags and give closed-loop time constant
    ``tau_c_desired``."""
    for name, v in (("tau_e", tau_e), ("tau_p", tau_p), ("tau_c_desired", tau_c_desired)):
        check_positive(v, name, error=DomainError)
    if k_s_e == 0 or not math.isfinite(k_s_e):
        raise DomainError("degenerate plant: static gain must be finite and non-zero")
    k_I = 1.0 / (k_s_e * tau_c_desired)
    return PidGains.from_time_constants(k_I, tau_e, tau_p)


def closed_loop_time_constant(k_I, k_s_e):
    return 1.0 / (k_I * k_s_e)


def simulate_linear_loop(linear, tau_p, gains, *, setpoint=1.0, disturbance=0.0, t_end=10.0,
                         dt=1e-3, derivative_filter=None):
    """Closed loop of the tuned PID around the linear plant and pump lag.

    Deviation variables throughout; the pump is unbounded. ``setpoint`` and
    ``disturbance`` are steps applied at ``t = 0`` (disturbance in K, added to
    the plant input).

    Returns
    -------
    t, y : ndarray
        Time and temperature deviation.
    """
    if derivative_filter is None:
        derivative_filter = tau_p / 10
    n = int(round(t_end / dt)) + 1
    t = np.arange(n) * dt
    y = np.empty(n)
    T = 0.0
    mdot = 0.0
    state = ControllerState()
    for k in range(n):
        y[k] = T
        u, state = pid_step(state, setpoint - T, dt, gains, derivative_filter=derivative_filter)
        T = _kernels.pt1_step(T, linear.k_s_e * mdot + disturbance, dt, linear.tau_e)
        mdot = _kernels.pt1_step(mdot, u, dt, tau_p)
    return t, y


def rise_time_63(t, y, final=None):
    """First time the response reaches 63.2 % of its final value (linear interpolation)."""
    final = y[-1] if final is None else final
    level = (1.0 - math.exp(-1.0)) * final
    above = np.nonzero(np.abs(y) >= abs(level))[0]
    if above.size == 0:
        return math.nan
    i = above[0]
    if i == 0:
        return t[0]
    return t[i - 1] + (level - y[i - 1]) * (t[i] - t[i - 1]) / (y[i] - y[i - 1])


class KesslerTuner(BaseEstimator):
    """Estimator wrapper around :func:`linearize_plant` and :func:`kessler_tune`.

    Parameters
    ----------
    T_w_0, T_cyl_0 : float
        Operating-point water and head temperature, K.
    mdot_w_0 : float
        Operating-point water flow, kg/s.
    tau_c : float
        Desired closed-loop time constant, s.
    plant : ThermalPlantParams, optional
    pump : PumpParams, optional

    Attributes
    ----------
    tau_e_, k_s_e_ : float
        Linearised plant.
    gains_ : PidGains
    """

    def __init__(self, T_w_0=373.0, T_cyl_0=419.0, mdot_w_0=2.0, tau_c=5.0, plant=None,
                 pump=None):
        self.T_w_0 = T_w_0
        self.T_cyl_0 = T_cyl_0
        self.mdot_w_0 = mdot_w_0
        self.tau_c = tau_c
        self.plant = plant
        self.pump = pump

    def fit(self, X=None, y=None):
        plant = self.plant if self.plant is not None else ThermalPlantParams()
        pump = self.pump if self.pump is not None else PumpParams()
        check_scalar(self.T_w_0, "T_w_0", lo=0.0, include_lo=False)
        check_scalar(self.T_cyl_0, "T_cyl_0", lo=0.0, include_lo=False)
        lin = linearize_plant(self.T_w_0, self.T_cyl_0, self.mdot_w_0, plant, pump)
        self.tau_e_ = lin.tau_e
        self.k_s_e_ = lin.k_s_e
        self.gains_ = kessler_tune(lin.tau_e, pump.tau_p, lin.k_s_e, self.tau_c)
        return self

    def transform(self, X=None):
        """Gains as a ``(1, 3)`` array ``[[k_P, k_I, k_D]]``."""
        return np.array([self.gains_.as_tuple()])

    def summary(self):
        """Dictionary of the linearisation and gains, ready for JSON."""
        g = self.gains_
        return {
            "tau_e": self.tau_e_,
            "k_s_e": self.k_s_e_,
            "k_P": g.k_P,
            "k_I": g.k_I,
            "k_D": g.k_D,
            "tau_c": closed_loop_time_constant(g.k_I, self.k_s_e_),
        }
