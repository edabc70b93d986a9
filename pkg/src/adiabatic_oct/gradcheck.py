"""Finite-difference verification of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ControlledHamiltonian, ControlSchedule, propagate
from .errors import ConfigurationError
from .objectives import (
    DIFFERENTIABLE_TRACKING,
    ObjectiveSpec,
    energy_series,
    fidelity,
    grad_energy_tracking,
    grad_fidelity,
    grad_population_tracking,
    population_series,
)

GRADIENT_TOL = 5e-3


def central_difference(fun, samples: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of a sample array."""
    samples = np.asarray(samples, dtype=float)
    out = np.zeros_like(samples)
    for idx in np.ndindex(samples.shape):
        up = samples.copy()
        down = samples.copy()
        up[idx] += step
        down[idx] -= step
        out[idx] = (fun(up) - fun(down)) / (2.0 * step)
    return out


def relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """``max |a - r| / max |r|``; zero when both vanish identically."""
    scale = float(np.max(np.abs(reference))) if reference.size else 0.0
    diff = float(np.max(np.abs(analytic - reference))) if reference.size else 0.0
    if scale == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / scale


@dataclass(frozen=True)
class GradientCheck:
    fidelity_error: float
    tracking_error: float
    tracking: str
    alpha: float
    intervals: int

    @property
    def worst(self) -> float:
        return max(self.fidelity_error, self.tracking_error)

    def passed(self, tol: float = GRADIENT_TOL) -> bool:
        return self.worst < tol


def check_gradients(model: ControlledHamiltonian, schedule: ControlSchedule, spec: ObjectiveSpec,
                    step: float = 1e-6) -> GradientCheck:
    """Compare analytic and central-difference gradients of F and the tracking term."""
    if spec.tracking not in DIFFERENTIABLE_TRACKING:
        raise ConfigurationError(
            f"tracking kind {spec.tracking!r} has no gradient; choose one of {DIFFERENTIABLE_TRACKING}"
        )
    traj = propagate(model, schedule, spec.initial_state)

    def fid(u):
        return fidelity(propagate(model, schedule.with_samples(u), spec.initial_state), spec)

    fd_F = central_difference(fid, schedule.samples, step)
    err_F = relative_error(grad_fidelity(traj, model, spec), fd_F)

    if spec.tracking == "none" or spec.alpha == 0.0:
        err_T = 0.0
    else:
        if spec.tracking == "population":
            analytic = grad_population_tracking(traj, model, schedule, spec)

            def track(u):
                s = schedule.with_samples(u)
                return spec.alpha * population_series(propagate(model, s, spec.initial_state), model, s)[1]
        else:
            analytic = grad_energy_tracking(traj, model, schedule, spec)

            def track(u):
                s = schedule.with_samples(u)
                return -spec.alpha * energy_series(propagate(model, s, spec.initial_state), model, s)[1]

        err_T = relative_error(analytic, central_difference(track, schedule.samples, step))
    return GradientCheck(err_F, err_T, spec.tracking, spec.alpha, schedule.intervals)
