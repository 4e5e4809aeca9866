import numpy as np
import pytest
from hypothesis import settings

from enginecool import LapTrace, default_lap

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def lap():
    return default_lap()


@pytest.fixture(scope="session")
def short_trace():
    """20 s: 8 s full load rising 5000 -> 7000 rpm, 3 s coasting, repeated."""
    t = np.arange(0.0, 22.01, 0.5)
    phase = t % 11.0
    fired = phase < 8.0
    speed = np.where(fired, 5000.0 + 250.0 * phase, 7000.0 - 600.0 * (phase - 8.0))
    return LapTrace(t, speed, fired)


def constant_trace(speed=6000.0, duration=60.0):
    """Fired at constant speed; a single coasting sample at the very end keeps
    the trace valid but is never reached by the resampled grid."""
    t = np.array([0.0, duration / 2, duration])
    return LapTrace(t, np.full(3, speed), np.array([True, True, False]))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and rep.when == "call":
                status = "PASS" if rep.passed else "FAIL"
                lines.append((props["criterion"],
                              f"criterion {props['criterion']}: {status}  {props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
