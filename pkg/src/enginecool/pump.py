"""Electric water pump: first-order lag inside a saturation box."""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._validation import check_positive, check_scalar
from .exceptions import ConfigurationError


@dataclass(frozen=True)
class PumpParams:
    """Pump lag and admissible flow region.

    ``f_max`` is only reported (the lag itself produces the roll-off).
    ``hydraulic_coeff`` scales the cubic hydraulic power law, W s^3/kg^3; the
    default gives 500 W at 4.5 kg/s.
    """

    tau_p: float = 0.2
    mdot_min: float = 0.25
    mdot_max: float = 4.5
    f_max: float = 5.0
    hydraulic_coeff: float = 500.0 / 4.5 ** 3

    def __post_init__(self):
        check_positive(self.tau_p, "tau_p")
        check_positive(self.mdot_min, "mdot_min")
        check_positive(self.f_max, "f_max")
        check_scalar(self.hydraulic_coeff, "hydraulic_coeff", lo=0.0)
        if not self.mdot_max > self.mdot_min:
            raise ConfigurationError("mdot_max must exceed mdot_min")

    @property
    def span(self):
        return self.mdot_max - self.mdot_min

    @property
    def midpoint(self):
        return 0.5 * (self.mdot_min + self.mdot_max)

    def clamp(self, mdot):
        return np.clip(mdot, self.mdot_min, self.mdot_max)

    def check_step(self, dt):
        dt = check_positive(dt, "dt")
        if dt > self.tau_p / 10:
            raise ConfigurationError(
                f"time step {dt} s exceeds tau_p/10 = {self.tau_p / 10} s")
        return dt


@dataclass(frozen=True)
class PumpState:
    mdot_actual: float


def pump_step(state, mdot_command, dt, params):
    """Advance the pump by ``dt`` seconds under a held command.

    The command is clamped to the admissible box, the lag is integrated with
    its exact discretisation and the result is clamped again.
    """
    dt = params.check_step(dt)
    mdot = _kernels.pump_update(float(state.mdot_actual), float(mdot_command), dt,
                                params.tau_p, params.mdot_min, params.mdot_max)
    return PumpState(mdot)


def hydraulic_power(mdot_actual, coeff):
    """Pumping power ``coeff * mdot**3`` in W."""
    mdot = np.asarray(mdot_actual, dtype=float)
    if np.any(mdot < 0):
        raise ValueError("mass flow must be non-negative")
    out = coeff * mdot ** 3
    return float(out) if out.ndim == 0 else out


def pt1_magnitude(frequency, tau):
    """|1 / (j 2 pi f tau + 1)|."""
    w = 2.0 * math.pi * np.asarray(frequency, dtype=float) * tau
    return 1.0 / np.sqrt(1.0 + w * w)


def measured_attenuation(frequency, params, *, dt=1e-4, periods=20, amplitude=None):
    """Amplitude ratio of the discrete pump for a sinusoidal command.

    The command oscillates around the midpoint of the flow box with an
    amplitude small enough to stay clear of the limits. The response amplitude
    is taken from a least-squares sine fit over the second half of the run.
    """
    frequency = check_positive(frequency, "frequency")
    params.check_step(dt)
    amplitude = 0.25 * params.span if amplitude is None else amplitude
    n = int(round(periods / frequency / dt))
    t = np.arange(n) * dt
    cmd = params.midpoint + amplitude * np.sin(2 * math.pi * frequency * t)
    y = np.empty(n)
    mdot = params.midpoint
    for k in range(n):
        y[k] = mdot
        mdot = _kernels.pump_update(mdot, cmd[k], dt, params.tau_p, params.mdot_min,
                                    params.mdot_max)
    keep = t >= t[-1] / 2
    w = 2 * math.pi * frequency
    basis = np.column_stack([np.sin(w * t[keep]), np.cos(w * t[keep]), np.ones(keep.sum())])
    coef, *_ = np.linalg.lstsq(basis, y[keep], rcond=None)
    return math.hypot(coef[0], coef[1]) / amplitude
