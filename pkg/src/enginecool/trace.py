"""Race-lap traces: engine speed and fired/coasting flag over time."""

import csv
import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._validation import check_1d, check_positive
from .exceptions import ConfigurationError
from .heat_input import EngineSample

COLUMNS = ("time_s", "speed_rpm", "fired")

# (full-load seconds, coasting seconds, speed at corner exit, speed at braking point)
_SYNTHETIC_SEGMENTS = (
    (13.0, 4.2, 5000.0, 7500.0),
    (4.5, 2.4, 5500.0, 7000.0),
    (7.0, 3.0, 5000.0, 7200.0),
    (4.0, 1.8, 5800.0, 6800.0),
    (17.0, 4.8, 4800.0, 7800.0),
    (5.5, 2.4, 5200.0, 7000.0),
    (8.0, 3.6, 4500.0, 7300.0),
    (5.8, 3.0, 5000.0, 6900.0),
)


@dataclass(frozen=True, eq=False)
class LapTrace:
    """Sampled lap: strictly increasing time (s), speed (rpm), fired flag.

    Speed is interpolated linearly between samples; the fired flag is held
    from the most recent sample.
    """

    time: np.ndarray
    speed: np.ndarray
    fired: np.ndarray

    def __post_init__(self):
        time = check_1d(self.time, "time")
        speed = check_1d(self.speed, "speed")
        fired = np.asarray(self.fired).astype(bool)
        if not (time.shape == speed.shape == fired.shape):
            raise ConfigurationError("time, speed and fired must have equal length")
        if time.size < 2 or np.any(np.diff(time) <= 0):
            raise ConfigurationError("trace time must be strictly increasing")
        if np.any(speed < 0):
            raise ConfigurationError("engine speed must be non-negative")
        if fired.all() or not fired.any():
            raise ConfigurationError("trace needs at least one fired and one coasting segment")
        for name, a in (("time", time), ("speed", speed), ("fired", fired)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.time.size

    def __iter__(self):
        for t, n, f in zip(self.time, self.speed, self.fired):
            yield EngineSample(float(t), float(n), bool(f))

    @property
    def duration(self):
        return float(self.time[-1] - self.time[0])

    @property
    def digest(self):
        """Content hash identifying the trace."""
        h = hashlib.sha1()
        for a in (self.time, self.speed, self.fired.astype(np.uint8)):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]

    def resample(self, dt):
        """Values on the simulation grid ``t0 + k dt`` covering one lap.

        Returns ``(t, speed, fired)`` arrays.
        """
        dt = check_positive(dt, "dt")
        n = int(np.floor(self.duration / dt + 1e-9))
        t = self.time[0] + np.arange(n) * dt
        speed = np.interp(t, self.time, self.speed)
        idx = np.searchsorted(self.time, t + 1e-12, side="right") - 1
        return t, speed, self.fired[idx]


def read_trace_csv(path):
    """Load a trace from CSV with header ``time_s,speed_rpm,fired``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigurationError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    try:
        time = [float(r["time_s"]) for r in rows]
        speed = [float(r["speed_rpm"]) for r in rows]
        fired = [int(float(r["fired"])) for r in rows]
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    if any(f not in (0, 1) for f in fired):
        raise ConfigurationError(f"{path}: fired column must be 0 or 1")
    return LapTrace(np.array(time), np.array(speed), np.array(fired, dtype=bool))


def write_trace_csv(trace, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for t, n, f in zip(trace.time, trace.speed, trace.fired):
            w.writerow([repr(float(t)), repr(float(n)), int(f)])


def synthetic_lap(sample_interval=0.1):
    """A documented 90 s race lap: eight straights, each followed by braking.

    On each straight the speed climbs linearly under full load; under braking
    it falls back linearly while the engine coasts.
    """
    sample_interval = check_positive(sample_interval, "sample_interval")
    time, speed, fired = [], [], []
    t0 = 0.0
    for full, coast, n_lo, n_hi in _SYNTHETIC_SEGMENTS:
        for dur, a, b, flag in ((full, n_lo, n_hi, True), (coast, n_hi, n_lo, False)):
            k = int(round(dur / sample_interval))
            time.extend(t0 + np.arange(k) * sample_interval)
            speed.extend(np.linspace(a, b, k, endpoint=False))
            fired.extend([flag] * k)
            t0 += dur
    time.append(t0)
    speed.append(_SYNTHETIC_SEGMENTS[0][2])
    fired.append(True)
    return LapTrace(np.round(np.array(time), 9), np.array(speed), np.array(fired))


def default_lap():
    """The synthetic lap shipped with the package."""
    ref = resources.files("enginecool") / "data" / "default_lap.csv"
    with resources.as_file(ref) as path:
        return read_trace_csv(path)
