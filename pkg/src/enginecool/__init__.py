"""Lumped-capacity engine cooling model with water-flow control strategies."""

from .control import (HIGH_INTEGRAL_GAINS, REFERENCE_GAINS, ControllerSpec, ControllerState,
                      PidGains, TargetSchedule, feed_forward_flow, mechanical_pump_flow, pid_step)
from .exceptions import (ConfigurationError, ConvergenceError, DomainError, EngineCoolError,
                         SimulationError, SweepError, TraceMismatchError)
from .heat_input import EngineSample, HeatInputModel, PowerLaw, boundary_conditions
from .montecarlo import GainRange, SweepResult, SweepSpec, pareto_front, recommend_gains, run_sweep
from .plant import PlantState, ThermalPlantParams, steady_state, steady_state_temperature
from .pump import PumpParams, PumpState, hydraulic_power, pump_step
from .simulator import (LapMetrics, LapResult, LapSimulator, calibrate_mechanical_ratio,
                        calibrate_target, feasible_range_sweep, heat_saving, simulate_lap)
from .trace import LapTrace, default_lap, read_trace_csv, synthetic_lap, write_trace_csv
from .tuning import KesslerTuner, kessler_tune, linearize_plant

__version__ = "0.1.0"
