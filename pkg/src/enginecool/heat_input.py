"""Combustion-side boundary condition surrogate.

The cycle-resolved heat transfer coefficient is treated as a random variable
conditioned on engine speed and on the fired/coasting state. Only two moments
reach the plant: the mean HTC and the HTC-weighted gas temperature
``T_mod = <alpha_c T_gas> / <alpha_c>``.

The surrogate uses a lognormal HTC parametrised by its mean and coefficient of
variation, and a gas temperature with a prescribed correlation to the HTC.
Under that joint model ``T_mod = <T_gas> + rho * cov_alpha * sigma_T``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_scalar
from .exceptions import ConfigurationError


@dataclass(frozen=True)
class PowerLaw:
    """``value_at_ref * (n / speed_ref) ** exponent``."""

    value_at_ref: float
    exponent: float = 0.8
    speed_ref: float = 7000.0

    def __post_init__(self):
        check_scalar(self.value_at_ref, "value_at_ref", lo=0.0)
        check_scalar(self.exponent, "exponent")
        check_positive(self.speed_ref, "speed_ref")

    def __call__(self, n):
        return self.value_at_ref * (np.asarray(n, dtype=float) / self.speed_ref) ** self.exponent


@dataclass(frozen=True)
class EngineSample:
    """Engine state at one instant: time (s), speed (rpm), full load or coasting."""

    t: float
    n: float
    fired: bool

    def __post_init__(self):
        if not self.n >= 0:
            raise ConfigurationError(f"engine speed must be non-negative, got {self.n}")


@dataclass(frozen=True)
class HeatInputModel:
    """Conditional moments of the combustion-side HTC and gas temperature.

    Parameters
    ----------
    fired_alpha_mean, coasting_alpha_mean : PowerLaw
        Mean HTC in W/(m^2 K) as a function of engine speed.
    fired_alpha_cov, coasting_alpha_cov : float
        Coefficient of variation of the HTC over engine cycles.
    T_gas_fired, T_gas_coasting : float
        Mean effective gas temperature in K.
    T_gas_fired_std, T_gas_coasting_std : float
        Cycle-to-cycle standard deviation of the gas temperature, K.
    correlation_alpha_T : float
        Pearson correlation between HTC and gas temperature.
    speed_range : tuple of float
        Speeds outside this interval are clamped with a warning.
    """

    fired_alpha_mean: PowerLaw = PowerLaw(1500.0, 1.5)
    coasting_alpha_mean: PowerLaw = PowerLaw(400.0, 0.8)
    fired_alpha_cov: float = 0.15
    coasting_alpha_cov: float = 0.05
    T_gas_fired: float = 900.0
    T_gas_coasting: float = 500.0
    T_gas_fired_std: float = 100.0
    T_gas_coasting_std: float = 20.0
    correlation_alpha_T: float = 0.3
    speed_range: tuple = (500.0, 9500.0)

    def __post_init__(self):
        for name in ("fired_alpha_cov", "coasting_alpha_cov", "T_gas_fired_std",
                     "T_gas_coasting_std"):
            check_scalar(getattr(self, name), name, lo=0.0)
        check_positive(self.T_gas_coasting, "T_gas_coasting")
        if not self.T_gas_fired > self.T_gas_coasting:
            raise ConfigurationError("T_gas_fired must exceed T_gas_coasting")
        check_scalar(self.correlation_alpha_T, "correlation_alpha_T", lo=-1.0, hi=1.0)
        lo, hi = self.speed_range
        if not 0 <= lo < hi:
            raise ConfigurationError(f"invalid speed_range {self.speed_range}")
        self._check_fired_dominates()

    def _check_fired_dominates(self, wall_range=(350.0, 550.0)):
        n = np.linspace(*self.speed_range, 64)
        n = n[n > 0]
        for T_ref in wall_range:
            fired = self.fired_alpha_mean(n) * (self.modified_temperature(True) - T_ref)
            coast = self.coasting_alpha_mean(n) * (self.modified_temperature(False) - T_ref)
            if np.any(fired <= coast):
                raise ConfigurationError(
                    f"fired heat input must exceed coasting heat input at wall temperature {T_ref} K")

    def modified_temperature(self, fired):
        """HTC-weighted gas temperature for one engine state, K."""
        if fired:
            T, cov, sd = self.T_gas_fired, self.fired_alpha_cov, self.T_gas_fired_std
        else:
            T, cov, sd = self.T_gas_coasting, self.coasting_alpha_cov, self.T_gas_coasting_std
        return T + self.correlation_alpha_T * cov * sd


def boundary_conditions(speed, fired, model, *, warn=True):
    """Vectorised mean HTC and modified gas temperature.

    Parameters
    ----------
    speed : array_like
        Engine speed in rpm.
    fired : array_like of bool
        Full-load flag per sample.

    Returns
    -------
    alpha_c : ndarray
        Mean HTC, W/(m^2 K).
    T_mod : ndarray
        HTC-weighted gas temperature, K.
    """
    n = np.asarray(speed, dtype=float)
    fired = np.asarray(fired, dtype=bool)
    lo, hi = model.speed_range
    if warn and (np.any(n < lo) or np.any(n > hi)):
        warnings.warn(f"engine speed outside [{lo}, {hi}] rpm; clamping", RuntimeWarning,
                      stacklevel=2)
    n = np.clip(n, lo, hi)
    alpha = np.where(fired, model.fired_alpha_mean(n), model.coasting_alpha_mean(n))
    T_mod = np.where(fired, model.modified_temperature(True), model.modified_temperature(False))
    T_gas = np.where(fired, model.T_gas_fired, model.T_gas_coasting)
    T_mod = np.where(alpha > 0, T_mod, T_gas)
    return alpha, T_mod


def mean_alpha_c(sample, model):
    """Expected combustion-side HTC for one engine sample, W/(m^2 K)."""
    alpha, _ = boundary_conditions([sample.n], [sample.fired], model)
    return float(alpha[0])


def modified_gas_temperature(sample, model):
    """``<alpha_c T_gas> / <alpha_c>`` for one engine sample, K.

    With zero mean HTC the ratio is undefined; the state's mean gas
    temperature is returned instead.
    """
    _, T_mod = boundary_conditions([sample.n], [sample.fired], model)
    return float(T_mod[0])


def sample_joint(sample, model, size, rng=None):
    """Draw cycle realisations of (alpha_c, T_gas) from the surrogate.

    The HTC is lognormal with the configured mean and coefficient of
    variation. The gas temperature is built from the standardised HTC and an
    independent normal so that its correlation with the HTC is exactly
    ``correlation_alpha_T``.
    """
    rng = np.random.default_rng(rng)
    mean = mean_alpha_c(sample, model)
    if sample.fired:
        cov, T_mean, sd = model.fired_alpha_cov, model.T_gas_fired, model.T_gas_fired_std
    else:
        cov, T_mean, sd = model.coasting_alpha_cov, model.T_gas_coasting, model.T_gas_coasting_std
    s2 = math.log1p(cov * cov)
    alpha = rng.lognormal(math.log(mean) - 0.5 * s2, math.sqrt(s2), size) if mean > 0 \
        else np.zeros(size)
    z = (alpha - mean) / (cov * mean) if cov > 0 and mean > 0 else np.zeros(size)
    r = model.correlation_alpha_T
    T_gas = T_mean + sd * (r * z + math.sqrt(1.0 - r * r) * rng.standard_normal(size))
    return alpha, T_gas
