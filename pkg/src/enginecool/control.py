"""Flow strategies: mechanical pump, feed-forward, PID and feed-forward + PID.

Gains carry the sign of the plant: more flow lowers the head temperature, so
with ``error = T_target - T_cyl`` all three PID gains are normally negative.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from ._validation import check_positive, check_scalar
from .exceptions import ConfigurationError, DomainError
from .heat_input import boundary_conditions

STRATEGIES = ("mechanical", "feedforward", "pid", "combined")

#: Largest target temperature accepted by a schedule, K.
MAX_TARGET = 600.0


@dataclass(frozen=True)
class PidGains:
    """Parallel-form PID gains: kg/(K s), kg/(K s^2), kg/K."""

    k_P: float
    k_I: float
    k_D: float

    @classmethod
    def from_time_constants(cls, k_I, T_R1, T_R2):
        """Build gains from the factored form ``k_I (1 + T_R1 s)(1 + T_R2 s) / s``."""
        return cls(k_I * (T_R1 + T_R2), k_I, k_I * T_R1 * T_R2)

    def time_constants(self):
        """Return ``(T_R1, T_R2)`` with ``T_R1 >= T_R2``.

        Raises
        ------
        DomainError
            If ``k_I`` is zero or the time constants are complex.
        """
        if self.k_I == 0:
            raise DomainError("factored form needs a non-zero integral gain")
        s = self.k_P / self.k_I
        p = self.k_D / self.k_I
        disc = s * s - 4.0 * p
        if disc < 0 and -disc <= 1e-12 * s * s:
            disc = 0.0  # repeated root lost to rounding
        if disc < 0:
            raise DomainError("gains have complex controller time constants")
        r = math.sqrt(disc)
        # numerically stable pair of roots of x^2 - s x + p
        big = 0.5 * (s + math.copysign(r, s))
        small = p / big if big != 0 else 0.0
        return (big, small) if big >= small else (small, big)

    def as_tuple(self):
        return (self.k_P, self.k_I, self.k_D)


#: Gains used for the feasible-range study.
REFERENCE_GAINS = PidGains(-1.4, -0.05, -1.0)

#: Preset with a stronger integral part and no derivative part. The magnitude
#: is a starting point only; the Monte Carlo sweep refines it.
HIGH_INTEGRAL_GAINS = PidGains(-1.4, -0.2, 0.0)


@dataclass(frozen=True)
class TargetSchedule:
    """Target head temperature for the fired and the coasting state, K."""

    T_target_fired: float
    T_target_coasting: float

    def __post_init__(self):
        for name in ("T_target_fired", "T_target_coasting"):
            check_scalar(getattr(self, name), name, lo=0.0, hi=MAX_TARGET, include_lo=False)

    @classmethod
    def constant(cls, T):
        return cls(T, T)

    def check_plant(self, plant):
        if min(self.T_target_fired, self.T_target_coasting) <= plant.T_w_in:
            raise ConfigurationError(
                f"target temperatures must exceed the inlet water temperature {plant.T_w_in} K")

    def shifted(self, delta):
        return TargetSchedule(self.T_target_fired + delta, self.T_target_coasting + delta)


@dataclass(frozen=True)
class ControllerState:
    """Discrete PID memory: integral of the error (K s), last error (K),
    filtered error derivative (K/s)."""

    integral_accumulator: float = 0.0
    previous_error: float = 0.0
    derivative_filter_state: float = 0.0


@dataclass(frozen=True)
class ControllerSpec:
    """Everything that defines a flow strategy.

    Parameters
    ----------
    strategy : {"mechanical", "feedforward", "pid", "combined"}
    gains : PidGains
        Used by ``pid`` and ``combined``.
    schedule : TargetSchedule
        Used by every strategy except ``mechanical``.
    mechanical_ratio : float
        Flow per engine speed, kg/(s rpm); ``mechanical`` only.
    base_flow : float or None
        Constant flow the pure PID acts around; defaults to the middle of the
        pump's admissible range.
    derivative_filter : float or None
        Time constant of the derivative filter, s; defaults to ``tau_p / 10``.
    """

    strategy: str = "pid"
    gains: PidGains = field(default_factory=lambda: REFERENCE_GAINS)
    schedule: TargetSchedule = field(default_factory=lambda: TargetSchedule.constant(407.0))
    mechanical_ratio: float = None
    base_flow: float = None
    derivative_filter: float = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(
                f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}")
        if self.strategy == "mechanical":
            if self.mechanical_ratio is None:
                raise ConfigurationError("mechanical strategy needs mechanical_ratio")
            check_positive(self.mechanical_ratio, "mechanical_ratio")

    @property
    def uses_pid(self):
        return self.strategy in ("pid", "combined")

    def with_gains(self, gains):
        return replace(self, gains=gains)

    def with_schedule(self, schedule):
        return replace(self, schedule=schedule)


def feed_forward_series(chi_alpha_c, T_mod, T_target, plant):
    """Unclamped nominal flow for arrays of boundary conditions.

    Takes the effective combustion-side HTC ``chi * <alpha_c>`` directly.
    Negative heat demand maps to zero flow.
    """
    T_target = np.asarray(T_target, dtype=float)
    if np.any(T_target <= plant.T_w_in):
        raise ConfigurationError(
            f"target must exceed the inlet water temperature {plant.T_w_in} K")
    ratio = chi_alpha_c * (T_mod - T_target) / (plant.htc_coefficient * (T_target - plant.T_w_in))
    return np.maximum(ratio, 0.0) ** (1.0 / plant.m_exp)


def feed_forward_flow(sample, T_target, heat, plant, pump=None):
    """Nominal water flow that holds ``T_target`` in steady state, kg/s.

    The water temperature rise in the jacket is neglected. With ``pump``
    given the result is clamped to the admissible box.
    """
    alpha, T_mod = boundary_conditions([sample.n], [sample.fired], heat)
    raw = float(feed_forward_series(plant.chi * alpha, T_mod, T_target, plant)[0])
    return raw if pump is None else float(pump.clamp(raw))


def pid_step(state, error, dt, gains, *, derivative_filter=0.0, windup_limit=math.inf,
             base=0.0, limits=None):
    """Advance the PID by one sample.

    Parameters
    ----------
    state : ControllerState
    error : float
        ``T_target - T_cyl`` in K.
    dt : float
        Sample time, s.
    gains : PidGains
    derivative_filter : float
        First-order filter time constant on the error derivative; 0 gives the
        raw backward difference.
    windup_limit : float
        Bound on ``|k_I * integral|`` in kg/s.
    base : float
        Flow the correction is added to; only used for the saturation test.
    limits : tuple of float, optional
        Actuator box. While ``base + delta`` lies outside it and the error
        would drive it further out, the integrator is frozen.

    Returns
    -------
    delta : float
        Flow correction in kg/s.
    state : ControllerState
    """
    check_positive(dt, "dt")
    lo, hi = (-math.inf, math.inf) if limits is None else limits
    delta, integral, prev, dfilt = _kernels.pid_update(
        state.integral_accumulator, state.previous_error, state.derivative_filter_state,
        float(error), dt, gains.k_P, gains.k_I, gains.k_D, float(derivative_filter),
        float(windup_limit), float(base), float(lo), float(hi))
    return delta, ControllerState(integral, prev, dfilt)


def mechanical_pump_flow(sample, ratio, pump):
    """Flow of a pump geared to the crankshaft, kg/s."""
    check_positive(ratio, "ratio")
    return float(pump.clamp(ratio * sample.n))


def target_for(sample, schedule):
    return schedule.T_target_fired if sample.fired else schedule.T_target_coasting
