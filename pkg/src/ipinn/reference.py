"""Reference machinery: fixed-step RK4, the error function, exact solutions."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import DomainError

# constants shared with the problem definitions (single source of truth)
OSCILLATOR_FORCING_EXPONENT = 0.99
OSCILLATOR_INTERVAL = (0.0, 10.0)
OSCILLATOR_REFERENCE_STEPS = 100_000
EXPONENTIAL_SHIFT = math.exp(-5.0)
SYSTEM_GAUSS_SCALE = 1.0 / (math.sqrt(2.0 / math.pi) * math.exp(-0.5))
SYSTEM_DRIFT = 1.0 - SYSTEM_GAUSS_SCALE * math.erf(1.0 / math.sqrt(2.0))


@dataclass(frozen=True)
class Trajectory:
    """Times and states of a fixed-step integration, endpoints included."""

    times: np.ndarray
    states: np.ndarray

    def component(self, j: int) -> np.ndarray:
        return self.states[:, j]


def rk4_solve(f: Callable, y0, interval, n_steps: int) -> Trajectory:
    """Classical fourth-order Runge-Kutta with a fixed step."""
    lo, hi = float(interval[0]), float(interval[1])
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    if not hi > lo:
        raise ValueError("interval must have positive length")
    y = np.asarray(y0, dtype=float).ravel().copy()
    times = np.linspace(lo, hi, n_steps + 1)
    states = np.empty((n_steps + 1, y.size))
    states[0] = y
    h = (hi - lo) / n_steps
    for i in range(n_steps):
        t = times[i]
        k1 = np.asarray(f(t, y))
        k2 = np.asarray(f(t + 0.5 * h, y + (0.5 * h) * k1))
        k3 = np.asarray(f(t + 0.5 * h, y + (0.5 * h) * k2))
        k4 = np.asarray(f(t + h, y + h * k3))
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1] = y
    return Trajectory(times, states)


_erf_scalar = np.frompyfunc(math.erf, 1, 1)


def erf(x):
    """Error function, elementwise; delegates to the libm implementation."""
    arr = np.asarray(x, dtype=float)
    out = np.asarray(_erf_scalar(arr), dtype=float)
    if arr.ndim == 0:
        return float(out)
    return out


def _oscillator_rhs(t: float, y: np.ndarray) -> np.ndarray:
    return np.array([y[1], -y[0] + math.sin(t ** OSCILLATOR_FORCING_EXPONENT)])


@functools.lru_cache(maxsize=1)
def oscillator_reference() -> Trajectory:
    """Dense RK4 trajectory used as the reference for the driven oscillator."""
    return rk4_solve(_oscillator_rhs, np.array([1.0, 1.0]),
                     OSCILLATOR_INTERVAL, OSCILLATOR_REFERENCE_STEPS)


def _exact_schwarz(t: np.ndarray) -> np.ndarray:
    if np.any(np.abs(t - 0.5 * np.pi) < 1e-9):
        raise DomainError("solution is unbounded at pi/2")
    return np.tan(t)[:, None]


def _exact_logistic(t: np.ndarray) -> np.ndarray:
    return (1.0 / (1.0 + np.exp(-t)))[:, None]


def _exact_oscillator(t: np.ndarray) -> np.ndarray:
    lo, hi = OSCILLATOR_INTERVAL
    if np.any(t < lo - 1e-9) or np.any(t > hi + 1e-9):
        raise DomainError("oscillator reference covers [0, 10] only")
    traj = oscillator_reference()
    return np.interp(t, traj.times, traj.states[:, 0])[:, None]


def _exact_exponential(t: np.ndarray) -> np.ndarray:
    base = t + EXPONENTIAL_SHIFT
    if np.any(base <= 0.0):
        raise DomainError("logarithm argument must stay positive")
    return (base * np.log(base) - t)[:, None]


def _exact_system(t: np.ndarray) -> np.ndarray:
    c = SYSTEM_GAUSS_SCALE
    k = SYSTEM_DRIFT
    bump = np.sqrt(2.0 / np.pi) * np.exp(-0.5 * (t + 1.0) ** 2)
    ramp = erf((t + 1.0) / np.sqrt(2.0))
    u = c * bump + c * t * ramp + k * t
    v = c * ramp + k
    return np.stack([np.asarray(u), np.asarray(v)], axis=-1)


_EXACT: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "schwarz": _exact_schwarz,
    "logistic": _exact_logistic,
    "oscillator": _exact_oscillator,
    "exponential": _exact_exponential,
    "system": _exact_system,
}


def exact_eval(problem_name: str, t):
    """Exact (or dense-reference) solution components at the given times.

    Array input yields shape (n, n_components); scalar input yields a float
    for single-component problems and a (n_components,) array otherwise.
    """
    if problem_name not in _EXACT:
        raise ValueError(f"unknown problem {problem_name!r}")
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    out = _EXACT[problem_name](np.atleast_1d(arr))
    if scalar:
        return float(out[0, 0]) if out.shape[1] == 1 else out[0]
    return out
