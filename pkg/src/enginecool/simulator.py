"""Closed-loop lap simulation.

Per fixed step of ``dt`` seconds: read the engine state, let the strategy
compute a flow command from the measured head temperature, evaluate the water
temperature from the previous step's heat flow, advance the head temperature
with RK4 and the pump with its exact lag update. Inputs are held over a step.
"""

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_positive
from .control import (REFERENCE_GAINS, ControllerSpec, PidGains, TargetSchedule,
                      feed_forward_series)
from .exceptions import ConfigurationError, SimulationError, TraceMismatchError
from .heat_input import HeatInputModel, boundary_conditions
from .plant import ThermalPlantParams, steady_state, water_coupling_gain
from .pump import PumpParams, hydraulic_power
from .trace import LapTrace, read_trace_csv

_STRATEGY_CODE = {
    "mechanical": _kernels.MECHANICAL,
    "feedforward": _kernels.FEEDFORWARD,
    "pid": _kernels.PID,
    "combined": _kernels.COMBINED,
}

SERIES_COLUMNS = ("t", "T_cyl", "T_w", "mdot_cmd", "mdot_actual", "Q_dot", "P_hyd")

# Head temperatures outside this band mark a run as physically implausible.
PLAUSIBLE_T = (300.0, 700.0)


@dataclass(frozen=True)
class LapMetrics:
    """Lap statistics over the retained window.

    Temperatures in K, heat flow and hydraulic power in W. The saturation
    fractions count samples whose actual flow lies within 1 % of the flow
    span from a pump limit.
    """

    mean_T_cyl: float
    std_T_cyl: float
    max_T_cyl: float
    min_T_cyl: float
    mean_Q_dot: float
    mean_hydraulic_power: float
    max_hydraulic_power: float
    heat_saving_vs_reference: float = None
    frac_at_max_flow: float = 0.0
    frac_at_min_flow: float = 0.0
    low_flow_fraction: float = 0.0
    trace_id: str = ""

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class ReynoldsCheck:
    """Maps the laminar-transition Reynolds number to a water mass flow.

    The jacket is represented by ``passages`` parallel round channels of
    ``hydraulic_diameter``; ``viscosity`` is the dynamic viscosity of water.
    """

    hydraulic_diameter: float = 0.01
    viscosity: float = 2.8e-4
    passages: int = 18
    re_critical: float = 2300.0

    def reynolds(self, mdot):
        return 4.0 * np.asarray(mdot) / (self.passages * math.pi * self.hydraulic_diameter
                                         * self.viscosity)

    @property
    def critical_mdot(self):
        return self.re_critical * self.passages * math.pi * self.hydraulic_diameter \
            * self.viscosity / 4.0


@dataclass
class LapResult:
    """Full-resolution series of the final lap plus its metrics.

    ``energy_residual`` is the relative mismatch between the stored heat of the
    lump and the integrated net heat flux over the whole run, normalised by the
    integrated combustion-side heat input.
    """

    series: dict
    metrics: LapMetrics
    energy_residual: float
    laps: int
    spec: ControllerSpec

    def decimated(self, decimation=1):
        step = max(int(decimation), 1)
        return {k: v[::step] for k, v in self.series.items()}

    def write_series_csv(self, path, decimation=1):
        data = self.decimated(decimation)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SERIES_COLUMNS)
            for row in zip(*(data[c] for c in SERIES_COLUMNS)):
                w.writerow([repr(float(v)) for v in row])

    def write_metrics_json(self, path):
        Path(path).write_text(json.dumps(self.metrics.to_dict(), indent=2) + "\n")


def read_metrics_json(path):
    return LapMetrics.from_dict(json.loads(Path(path).read_text()))


def default_warmup(plant):
    """Five plant time constants at the reference flow, s."""
    return 5.0 * plant.heat_capacity / plant.alpha_ref


def _nominal_flow(spec, speed, chi_alpha_c, T_mod, target, plant, pump):
    if spec.strategy == "mechanical":
        return pump.clamp(spec.mechanical_ratio * speed)
    if spec.strategy in ("feedforward", "combined"):
        return pump.clamp(feed_forward_series(chi_alpha_c, T_mod, target, plant))
    base = pump.midpoint if spec.base_flow is None else spec.base_flow
    return np.full(speed.shape, float(pump.clamp(base)))


def _metrics(out, t, pump, trace_id, keep, low_flow_mdot):
    T = out[keep, 0]
    mdot = out[keep, 3]
    P = hydraulic_power(mdot, pump.hydraulic_coeff)
    band = 0.01 * pump.span
    return LapMetrics(
        mean_T_cyl=float(T.mean()),
        std_T_cyl=float(T.std()),
        max_T_cyl=float(T.max()),
        min_T_cyl=float(T.min()),
        mean_Q_dot=float(out[keep, 4].mean()),
        mean_hydraulic_power=float(P.mean()),
        max_hydraulic_power=float(P.max()),
        frac_at_max_flow=float(np.mean(mdot >= pump.mdot_max - band)),
        frac_at_min_flow=float(np.mean(mdot <= pump.mdot_min + band)),
        low_flow_fraction=float(np.mean(mdot < low_flow_mdot)),
        trace_id=trace_id,
    )


def simulate_lap(trace, spec, plant=None, pump=None, heat=None, dt=1e-3, *, warmup=None,
                 periodic=True, max_laps=20, periodic_tol=0.005, reference=None,
                 reynolds=None):
    """Simulate the closed loop over a lap trace.

    Parameters
    ----------
    trace : LapTrace
    spec : ControllerSpec
    plant, pump, heat : parameter objects, defaults if omitted
    dt : float
        Fixed step, s; at most ``tau_p / 10``.
    warmup : float, optional
        Seconds excluded from the metrics at lap start; defaults to five
        plant time constants. Ignored in periodic mode.
    periodic : bool
        Repeat the lap, carrying the state over, until the lap-to-lap change
        of mean heat flow and temperature deviation drops below
        ``periodic_tol`` (relative); metrics then describe the last lap.
    reference : LapMetrics, optional
        Fills ``heat_saving_vs_reference``.
    reynolds : ReynoldsCheck, optional
        Threshold for ``low_flow_fraction``.

    Returns
    -------
    LapResult

    Raises
    ------
    SimulationError
        If the state becomes non-finite.
    """
    plant = plant or ThermalPlantParams()
    pump = pump or PumpParams()
    heat = heat or HeatInputModel()
    reynolds = reynolds or ReynoldsCheck()
    dt = pump.check_step(dt)
    if spec.strategy != "mechanical":
        spec.schedule.check_plant(plant)
    if water_coupling_gain(pump.mdot_min, plant) >= 1.0:
        raise ConfigurationError(
            "explicit water-temperature coupling is unstable at the minimum flow; "
            "reduce wetted_area or raise mdot_min")

    t, speed, fired = trace.resample(dt)
    alpha_c, T_mod = boundary_conditions(speed, fired, heat)
    chi_alpha_c = plant.chi * alpha_c
    if spec.strategy == "mechanical":
        target = np.zeros_like(t)
    else:
        target = np.where(fired, spec.schedule.T_target_fired, spec.schedule.T_target_coasting)
    nominal = _nominal_flow(spec, speed, chi_alpha_c, T_mod, target, plant, pump)
    t_filter = pump.tau_p / 10 if spec.derivative_filter is None else spec.derivative_filter
    gains = spec.gains

    init = steady_state(alpha_c[0], T_mod[0], float(nominal[0]), plant)
    state = _kernels.new_state()
    state[_kernels.S_T_CYL] = init.T_cyl
    state[_kernels.S_MDOT] = init.mdot_w
    state[_kernels.S_Q] = init.Q_dot
    state[_kernels.S_PREV_ERR] = target[0] - init.T_cyl

    out = np.empty((t.size, 9))
    T_start = init.T_cyl
    q_comb = q_water = 0.0
    warmup = default_warmup(plant) if warmup is None else warmup
    keep = t >= t[0] + (0.0 if periodic else warmup)
    if not keep.any():
        raise ConfigurationError("warm-up window covers the whole trace")
    n_laps = max_laps if periodic else 1
    prev = None
    for lap in range(1, n_laps + 1):
        bad = _kernels.lap_kernel(
            chi_alpha_c, T_mod, nominal, target, spec.uses_pid, dt,
            plant.heat_capacity, plant.alpha_ref, plant.mdot_ref, plant.m_exp, plant.T_w_in,
            plant.C_p_w, plant.wetted_area, pump.tau_p, pump.mdot_min, pump.mdot_max,
            gains.k_P, gains.k_I, gains.k_D, t_filter, pump.span, state, out)
        if bad >= 0:
            when = float(t[bad] + (lap - 1) * t.size * dt)
            raise SimulationError(f"non-finite state at t = {when:.3f} s", time=when)
        q_comb += out[:, 6].sum()
        q_water += out[:, 7].sum()
        metrics = _metrics(out, t, pump, trace.digest, keep, reynolds.critical_mdot)
        if prev is not None and _converged(prev, metrics, periodic_tol):
            break
        prev = metrics

    stored = plant.heat_capacity * (state[_kernels.S_T_CYL] - T_start)
    residual = abs(stored - (q_comb - q_water)) / abs(q_comb) if q_comb else abs(stored)
    if reference is not None:
        metrics = _with_saving(metrics, reference)
    series = {
        "t": t,
        "T_cyl": out[:, 0].copy(),
        "T_w": out[:, 1].copy(),
        "mdot_cmd": out[:, 2].copy(),
        "mdot_actual": out[:, 3].copy(),
        "Q_dot": out[:, 4].copy(),
        "P_hyd": hydraulic_power(out[:, 3], pump.hydraulic_coeff),
    }
    return LapResult(series, metrics, float(residual), lap, spec)


def _converged(a, b, tol):
    dq = abs(b.mean_Q_dot - a.mean_Q_dot) / max(abs(a.mean_Q_dot), 1e-12)
    ds = abs(b.std_T_cyl - a.std_T_cyl) / max(a.std_T_cyl, 0.01)
    return dq < tol and ds < tol


def _with_saving(metrics, reference):
    d = metrics.to_dict()
    d["heat_saving_vs_reference"] = heat_saving(metrics, reference)
    return LapMetrics(**d)


def heat_saving(candidate, reference):
    """Reduction of the mean heat flow to the water relative to ``reference``, W."""
    if candidate.trace_id != reference.trace_id:
        raise TraceMismatchError(
            f"metrics come from different traces ({candidate.trace_id} vs {reference.trace_id})")
    return reference.mean_Q_dot - candidate.mean_Q_dot


def is_plausible(metrics):
    lo, hi = PLAUSIBLE_T
    return (math.isfinite(metrics.std_T_cyl) and metrics.min_T_cyl >= lo
            and metrics.max_T_cyl <= hi)


def _bisect(fn, lo, hi, goal, iterations, increasing):
    """Bisection on a monotone scalar function; returns the midpoint of the final bracket."""
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        above = fn(mid) > goal
        if above == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def calibrate_mechanical_ratio(trace, plant=None, pump=None, heat=None, *, max_temperature=407.0,
                               iterations=20, **sim_kwargs):
    """Pump ratio (kg/s per rpm) at which the lap maximum equals ``max_temperature``.

    Bisection between the ratio that keeps every sample at the minimum flow
    and the one that keeps every sample at the maximum flow.
    """
    pump = pump or PumpParams()
    n = np.asarray(trace.speed)
    n_pos = n[n > 0]
    lo = pump.mdot_min / n_pos.max()
    hi = pump.mdot_max / n_pos.min()

    def max_T(ratio):
        spec = ControllerSpec("mechanical", mechanical_ratio=ratio)
        return simulate_lap(trace, spec, plant, pump, heat, **sim_kwargs).metrics.max_T_cyl

    if not max_T(hi) <= max_temperature <= max_T(lo):
        raise ConfigurationError(
            f"maximum temperature {max_temperature} K is outside what a mechanical pump "
            f"can reach on this trace")
    return _bisect(max_T, lo, hi, max_temperature, iterations, increasing=False)


def calibrate_target(spec, trace, plant=None, pump=None, heat=None, *, max_temperature=407.0,
                     iterations=30, **sim_kwargs):
    """Shift the target schedule so the lap maximum equals ``max_temperature``.

    The fired/coasting offset of the schedule is preserved. Returns the
    calibrated :class:`ControllerSpec`.
    """
    plant = plant or ThermalPlantParams()
    offset = spec.schedule.T_target_coasting - spec.schedule.T_target_fired
    lo = plant.T_w_in + 1.0 + max(0.0, -offset)
    hi = max_temperature + 20.0

    def make(T):
        return spec.with_schedule(TargetSchedule(T, T + offset))

    def max_T(T):
        return simulate_lap(trace, make(T), plant, pump, heat, **sim_kwargs).metrics.max_T_cyl

    return make(_bisect(max_T, lo, hi, max_temperature, iterations, increasing=True))


@dataclass(frozen=True)
class RangeRow:
    target: float
    mean_T_cyl: float
    std_T_cyl: float
    frac_at_max_flow: float
    frac_at_min_flow: float
    saturation: str


def feasible_range_sweep(targets, trace, plant=None, pump=None, heat=None, *,
                         gains=REFERENCE_GAINS, saturation_fraction=0.9, **sim_kwargs):
    """Run the PID at each constant target and report the achieved statistics.

    ``saturation`` is ``"max"`` or ``"min"`` when the flow sits at that pump
    limit for more than ``saturation_fraction`` of the retained window.
    """
    targets = [float(x) for x in targets]
    if any(b < a for a, b in zip(targets, targets[1:])):
        raise ConfigurationError("targets must be sorted ascending")
    rows = []
    for T in targets:
        spec = ControllerSpec("pid", gains=gains, schedule=TargetSchedule.constant(T))
        m = simulate_lap(trace, spec, plant, pump, heat, **sim_kwargs).metrics
        sat = ""
        if m.frac_at_max_flow > saturation_fraction:
            sat = "max"
        elif m.frac_at_min_flow > saturation_fraction:
            sat = "min"
        rows.append(RangeRow(T, m.mean_T_cyl, m.std_T_cyl, m.frac_at_max_flow,
                             m.frac_at_min_flow, sat))
    return rows


def _as_trace(X):
    if isinstance(X, LapTrace):
        return X
    if isinstance(X, (str, Path)):
        return read_trace_csv(X)
    raise TypeError(f"expected a LapTrace or a CSV path, got {type(X).__name__}")


class LapSimulator(BaseEstimator):
    """Estimator facade over :func:`simulate_lap`.

    ``fit`` simulates the given trace (calibrating the mechanical ratio first
    when it is not set); ``predict`` returns the head temperature series of a
    trace and ``score`` the negative lap standard deviation, so that sklearn
    tooling such as ``clone`` and ``set_params`` drive parameter sweeps.

    Attributes
    ----------
    spec_ : ControllerSpec
    result_ : LapResult
    metrics_ : LapMetrics
    """

    def __init__(self, strategy="pid", k_P=-1.4, k_I=-0.05, k_D=-1.0, target_fired=407.0,
                 target_coasting=None, mechanical_ratio=None, max_temperature=407.0,
                 plant=None, pump=None, heat=None, dt=1e-3, warmup=None, periodic=True,
                 derivative_filter=None, base_flow=None):
        self.strategy = strategy
        self.k_P = k_P
        self.k_I = k_I
        self.k_D = k_D
        self.target_fired = target_fired
        self.target_coasting = target_coasting
        self.mechanical_ratio = mechanical_ratio
        self.max_temperature = max_temperature
        self.plant = plant
        self.pump = pump
        self.heat = heat
        self.dt = dt
        self.warmup = warmup
        self.periodic = periodic
        self.derivative_filter = derivative_filter
        self.base_flow = base_flow

    def _sim_kwargs(self):
        return dict(plant=self.plant, pump=self.pump, heat=self.heat, dt=self.dt,
                    warmup=self.warmup, periodic=self.periodic)

    def _spec(self, trace):
        ratio = self.mechanical_ratio
        if self.strategy == "mechanical" and ratio is None:
            ratio = calibrate_mechanical_ratio(trace, max_temperature=self.max_temperature,
                                               **self._sim_kwargs())
        coasting = self.target_fired if self.target_coasting is None else self.target_coasting
        return ControllerSpec(
            strategy=self.strategy,
            gains=PidGains(self.k_P, self.k_I, self.k_D),
            schedule=TargetSchedule(self.target_fired, coasting),
            mechanical_ratio=ratio,
            base_flow=self.base_flow,
            derivative_filter=self.derivative_filter,
        )

    def fit(self, X, y=None, reference=None):
        trace = _as_trace(X)
        check_positive(self.dt, "dt")
        self.spec_ = self._spec(trace)
        self.result_ = simulate_lap(trace, self.spec_, reference=reference, **self._sim_kwargs())
        self.metrics_ = self.result_.metrics
        return self

    def simulate(self, X, reference=None):
        check_is_fitted(self, "spec_")
        return simulate_lap(_as_trace(X), self.spec_, reference=reference, **self._sim_kwargs())

    def predict(self, X):
        return self.simulate(X).series["T_cyl"]

    def score(self, X, y=None):
        return -self.simulate(X).metrics.std_T_cyl


def warn_if_sign_inconsistent(gains):
    if gains.k_P > 0 or gains.k_I > 0 or gains.k_D > 0:
        warnings.warn("positive PID gain with a negative plant gain; expect instability",
                      RuntimeWarning, stacklevel=2)
