"""Gain sweeps over (k_P, k_I, k_D): temperature regularity versus pumping power."""

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import qmc

from .control import ControllerSpec, PidGains, TargetSchedule
from .exceptions import ConfigurationError, SimulationError, SweepError
from .simulator import LapMetrics, is_plausible, simulate_lap

MODES = ("grid", "random")
OBJECTIVES = ("std_T_cyl", "mean_hydraulic_power")
GAIN_NAMES = ("k_P", "k_I", "k_D")
_METRIC_FIELDS = tuple(f.name for f in fields(LapMetrics) if f.name != "trace_id")


@dataclass(frozen=True)
class GainRange:
    """Closed interval sampled with ``count`` points (grid) or used as bounds (random).

    ``lo == hi`` with ``count == 1`` pins the gain to a single value.
    """

    lo: float
    hi: float
    count: int = 21

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ConfigurationError(f"invalid gain interval [{self.lo}, {self.hi}]")
        if self.lo == self.hi:
            if self.count != 1:
                raise ConfigurationError("a degenerate interval takes exactly one point")
        elif self.count < 2:
            raise ConfigurationError("grid counts must be at least 2")

    @classmethod
    def fixed(cls, value):
        return cls(value, value, 1)

    def values(self):
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep and how.

    In ``random`` mode ``n_samples`` points are drawn by Latin hypercube
    sampling inside the three intervals; in ``grid`` mode the full tensor
    grid of the interval counts is evaluated.
    """

    k_P_range: GainRange = GainRange(-3.0, 0.0, 21)
    k_I_range: GainRange = GainRange(-0.3, 0.0, 21)
    k_D_range: GainRange = GainRange(-2.0, 0.0, 21)
    target: TargetSchedule = field(default_factory=lambda: TargetSchedule.constant(407.0))
    strategy: str = "pid"
    mode: str = "grid"
    n_samples: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown sweep mode {self.mode!r}")
        if self.strategy not in ("pid", "combined"):
            raise ConfigurationError("sweeps need a strategy with feedback (pid or combined)")
        if self.mode == "random" and self.n_samples < 1:
            raise ConfigurationError("n_samples must be positive")

    @property
    def ranges(self):
        return (self.k_P_range, self.k_I_range, self.k_D_range)

    def points(self):
        """Gain triples as an ``(n, 3)`` array in a fixed order."""
        if self.mode == "grid":
            return np.array(list(itertools.product(*(r.values() for r in self.ranges))))
        sampler = qmc.LatinHypercube(d=3, seed=np.random.default_rng(self.seed))
        u = sampler.random(self.n_samples)
        lo = np.array([r.lo for r in self.ranges])
        hi = np.array([r.hi for r in self.ranges])
        return lo + u * (hi - lo)


@dataclass
class SweepResult:
    """Per-point gains, metrics and stability, in evaluation order.

    Unstable points keep their row with NaN metrics.
    """

    gains: np.ndarray
    metrics: list
    stable: np.ndarray
    trace_id: str = ""

    def __len__(self):
        return len(self.metrics)

    def column(self, name):
        if name in GAIN_NAMES:
            return self.gains[:, GAIN_NAMES.index(name)]
        return np.array([getattr(m, name) for m in self.metrics], dtype=float)

    def objectives(self):
        return np.column_stack([self.column(n) for n in OBJECTIVES])

    def pareto_mask(self):
        mask = np.zeros(len(self), dtype=bool)
        idx = np.flatnonzero(self.stable)
        mask[idx] = pareto_front(self.objectives()[idx])
        return mask

    def best_by(self, name):
        vals = np.where(self.stable, self.column(name), np.inf)
        return int(np.argmin(vals))

    def surface(self, name="std_T_cyl"):
        """Metric on the (k_P, k_I) plane of a grid sweep with a single k_D.

        Returns ``(k_P values, k_I values, Z)`` with ``Z[i, j]`` at
        ``(k_P[i], k_I[j])``; unstable points are NaN.
        """
        kd = np.unique(self.gains[:, 2])
        if kd.size != 1:
            raise SweepError("surface needs a sweep at a single k_D")
        kp = np.unique(self.gains[:, 0])
        ki = np.unique(self.gains[:, 1])
        Z = np.full((kp.size, ki.size), np.nan)
        vals = self.column(name)
        for (p, i, _), v, ok in zip(self.gains, vals, self.stable):
            if ok:
                Z[np.searchsorted(kp, p), np.searchsorted(ki, i)] = v
        return kp, ki, Z

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(GAIN_NAMES + _METRIC_FIELDS + ("stable",))
            for g, m, ok in zip(self.gains, self.metrics, self.stable):
                row = [repr(float(x)) for x in g]
                for name in _METRIC_FIELDS:
                    v = getattr(m, name)
                    row.append("" if v is None else repr(float(v)))
                row.append(int(ok))
                w.writerow(row)

    def summary(self, weights=(0.5, 0.5)):
        def point(i):
            d = dict(zip(GAIN_NAMES, map(float, self.gains[i])))
            d.update({n: float(getattr(self.metrics[i], n)) for n in OBJECTIVES})
            return d

        pareto = np.flatnonzero(self.pareto_mask())
        out = {
            "trace_id": self.trace_id,
            "n_points": len(self),
            "n_stable": int(self.stable.sum()),
            "best_by_std": point(self.best_by("std_T_cyl")),
            "best_by_power": point(self.best_by("mean_hydraulic_power")),
            "pareto": [point(i) for i in pareto],
            "weights": list(weights),
        }
        try:
            g = recommend_gains(self, weights)
            out["recommended"] = dict(zip(GAIN_NAMES, g.as_tuple()))
        except SweepError as exc:
            out["recommended"] = None
            out["recommendation_error"] = str(exc)
        return out

    def write_summary_json(self, path, weights=(0.5, 0.5)):
        Path(path).write_text(json.dumps(self.summary(weights), indent=2) + "\n")


def read_sweep_csv(path):
    gains, metrics, stable = [], [], []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            gains.append([float(row[n]) for n in GAIN_NAMES])
            d = {n: (None if row[n] == "" else float(row[n])) for n in _METRIC_FIELDS}
            metrics.append(LapMetrics(**d))
            stable.append(bool(int(row["stable"])))
    return SweepResult(np.array(gains), metrics, np.array(stable))


def _unstable_metrics(trace_id):
    nan = math.nan
    return LapMetrics(nan, nan, nan, nan, nan, nan, nan, None, nan, nan, nan, trace_id)


def _evaluate(gains, spec, trace, sim_kwargs):
    cs = ControllerSpec(spec.strategy, gains=PidGains(*map(float, gains)), schedule=spec.target)
    try:
        m = simulate_lap(trace, cs, **sim_kwargs).metrics
    except SimulationError:
        return _unstable_metrics(trace.digest), False
    if not is_plausible(m):
        return _unstable_metrics(trace.digest), False
    return m, True


def run_sweep(spec, trace, plant=None, pump=None, heat=None, *, n_jobs=1, **sim_kwargs):
    """Evaluate every point of ``spec`` on ``trace``.

    Runs are independent and executed on a thread pool (the simulation kernel
    releases the GIL). Results are assembled by point index, so the outcome
    does not depend on ``n_jobs``.

    Raises
    ------
    SweepError
        If no point yields a stable run.
    """
    pts = spec.points()
    if np.any(pts > 0):
        warnings.warn("positive gains in sweep; the plant gain is negative", RuntimeWarning,
                      stacklevel=2)
    sim_kwargs = dict(sim_kwargs, plant=plant, pump=pump, heat=heat)
    out = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_evaluate)(p, spec, trace, sim_kwargs) for p in pts)
    metrics = [m for m, _ in out]
    stable = np.array([ok for _, ok in out], dtype=bool)
    if not stable.any():
        raise SweepError("no stable point in sweep")
    return SweepResult(pts, metrics, stable, trace.digest)


def pareto_front(objectives):
    """Mask of non-dominated rows for two objectives, both minimised.

    A row is dominated if another row is no worse in both objectives and
    strictly better in one. Equal rows do not dominate each other.
    """
    F = np.asarray(objectives, dtype=float)
    if F.ndim != 2 or F.shape[1] != 2:
        raise ValueError("expected an (n, 2) objective array")
    order = np.lexsort((F[:, 1], F[:, 0]))
    mask = np.zeros(len(F), dtype=bool)
    best = math.inf  # lowest second objective among strictly smaller first objectives
    i = 0
    while i < len(order):
        j = i
        f1 = F[order[i], 0]
        while j < len(order) and F[order[j], 0] == f1:
            j += 1
        group = order[i:j]
        g_min = F[group[0], 1]
        if g_min < best:
            mask[group[F[group, 1] == g_min]] = True
        best = min(best, g_min)
        i = j
    return mask


def recommend_gains(result, weights=(0.5, 0.5)):
    """Pareto point with the lowest weighted sum of min-max normalised objectives.

    Points with ``k_I == 0`` are skipped: without integral action the loop
    keeps a steady-state offset.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (2,) or np.any(w < 0) or not w.any():
        raise ConfigurationError("weights must be two non-negative numbers, not both zero")
    keep = result.stable & (result.column("k_I") != 0)
    if not keep.any():
        raise SweepError("no stable point with integral action to recommend")
    F = result.objectives()
    idx = np.flatnonzero(keep)
    front = idx[pareto_front(F[idx])]
    lo = F[idx].min(axis=0)
    span = F[idx].max(axis=0) - lo
    span[span == 0] = 1.0
    score = ((F[front] - lo) / span) @ w
    best = front[np.argmin(score)]
    return PidGains(*map(float, result.gains[best]))
