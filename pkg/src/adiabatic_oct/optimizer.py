"""Gradient-flow ascent on the composite objective.

The controls follow the functional gradient ``dJ/du_k(t)`` (the per-sample
gradient divided by the time step, so step sizes do not depend on the
grid). Every sample moves freely. Steps that lower ``J`` are halved and
retried; accepted steps grow the step size, which keeps the recorded
objective monotone.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ControlledHamiltonian, ControlSchedule, propagate
from .errors import ConfigurationError, NumericalFailure, ValidationError
from .objectives import (
    DIFFERENTIABLE_TRACKING,
    ObjectiveReport,
    ObjectiveSpec,
    energy_series,
    evaluate,
    gradient,
    infidelity,
    population_series,
    tracking_value,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 50000
    step_size: float = 0.1
    step_growth: float = 1.5
    step_shrink: float = 0.5
    grad_tol: float = 1e-9
    objective_tol: float = 1e-14
    record_every: int = 1
    max_backtracks: int = 60

    def __post_init__(self):
        if self.max_iterations < 0 or int(self.max_iterations) != self.max_iterations:
            raise ValidationError("max_iterations must be a non-negative integer")
        if not self.step_size > 0:
            raise ValidationError("step_size must be positive")
        if not self.step_growth > 1.0:
            raise ValidationError("step_growth must exceed 1")
        if not 0.0 < self.step_shrink < 1.0:
            raise ValidationError("step_shrink must lie in (0, 1)")
        if not (self.grad_tol > 0 and self.objective_tol > 0):
            raise ValidationError("tolerances must be positive")
        if self.record_every < 1:
            raise ValidationError("record_every must be at least 1")


@dataclass(frozen=True, eq=False)
class RunRecord:
    initial_schedule: ControlSchedule
    final_schedule: ControlSchedule
    initial_report: ObjectiveReport
    final_report: ObjectiveReport
    iterations: int
    history: list = field(repr=False)  # (iteration, J, F, avg P0, max |grad|)
    termination: str
    meta: dict = field(default_factory=dict)
    error: Optional[str] = None

    def summary(self) -> dict:
        out = dict(self.meta)
        rep = self.final_report
        if rep is not None:
            out.update(rep.summary())
        out["iterations"] = self.iterations
        out["termination"] = self.termination
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class _Point:
    schedule: ControlSchedule
    trajectory: object
    infidelity: float
    tracking: float
    avg_population: float

    @property
    def J(self) -> float:
        return 1.0 - self.infidelity + self.tracking

    def gain_over(self, other: "_Point") -> float:
        # J difference without forming 1 - infidelity, so tiny infidelities still count
        return (self.tracking - other.tracking) - (self.infidelity - other.infidelity)


def _objective(model, schedule, spec) -> _Point:
    traj = propagate(model, schedule, spec.initial_state)
    avg_pop = avg_e = float("nan")
    if spec.tracking == "population":
        avg_pop = population_series(traj, model, schedule)[1]
    elif spec.tracking == "energy":
        avg_e = energy_series(traj, model, schedule)[1]
    track = tracking_value(spec, schedule, avg_pop, avg_e)
    return _Point(schedule, traj, infidelity(traj, spec), track, avg_pop)


def _history_population(point, model, spec):
    if spec.tracking == "population":
        return point.avg_population
    try:
        return population_series(point.trajectory, model, point.schedule)[1]
    except ArithmeticError:
        return float("nan")


def optimize(model: ControlledHamiltonian, problem, schedule0: ControlSchedule,
             spec: ObjectiveSpec, config: OptimizerConfig = OptimizerConfig(),
             meta: Optional[dict] = None) -> RunRecord:
    """Maximize ``J`` from ``schedule0`` by monotone adaptive-step ascent.

    ``problem`` is only carried into the run metadata; boundary conditions
    enter through the initial and target states of ``spec``.
    """
    if spec.tracking not in DIFFERENTIABLE_TRACKING:
        raise ConfigurationError(
            f"tracking kind {spec.tracking!r} has no gradient; "
            f"choose one of {DIFFERENTIABLE_TRACKING}"
        )
    if schedule0.n_controls != model.n_controls:
        raise ValidationError("schedule and model disagree on the number of controls")
    meta = dict(meta or {})
    if problem is not None:
        meta.setdefault("problem", getattr(problem, "label", problem))

    initial_report = evaluate(model, schedule0, spec)
    dt = schedule0.dt
    point = _objective(model, schedule0, spec)
    step = config.step_size
    history = []
    it = 0

    def fail(msg):
        raise NumericalFailure(msg, iterate=point.schedule.samples.copy())

    stop = None
    while True:
        if not np.isfinite(point.J):
            fail(f"non-finite objective at iteration {it}")
        direction = gradient(point.trajectory, spec).values / dt
        gnorm = float(np.max(np.abs(direction)))
        if not np.isfinite(gnorm):
            fail(f"non-finite gradient at iteration {it}")
        if stop is None and gnorm < config.grad_tol:
            stop = "grad_tol"
        elif stop is None and it >= config.max_iterations:
            stop = "max_iterations"
        if stop is not None or it % config.record_every == 0:
            history.append((it, point.J, 1.0 - point.infidelity,
                            _history_population(point, model, spec), gnorm))
        if stop is not None:
            break

        trial = None
        for _ in range(config.max_backtracks):
            moved = point.schedule.with_samples(point.schedule.samples + step * direction)
            cand = _objective(model, moved, spec)
            if np.isfinite(cand.J) and cand.gain_over(point) >= 0.0:
                trial = cand
                break
            step *= config.step_shrink
        if trial is None:
            # no ascent at any admissible step: J is flat to rounding here
            stop = "objective_tol"
            continue
        it += 1
        gain = trial.gain_over(point)
        point = trial
        step *= config.step_growth
        if gain < config.objective_tol:
            stop = "objective_tol"

    final_report = evaluate(model, point.schedule, spec, trajectory=point.trajectory)
    meta.update(alpha=spec.alpha, tracking=spec.tracking, T=schedule0.horizon, L=schedule0.intervals)
    log.info("optimize finished after %d iterations (%s): J=%.12g 1-F=%.3e",
             it, stop, point.J, point.infidelity)
    return RunRecord(schedule0, point.schedule, initial_report, final_report, it, history,
                     stop, meta)


def perturb(schedule: ControlSchedule, amplitude: float, seed: int) -> ControlSchedule:
    """Add seeded uniform noise in ``[-amplitude, amplitude]`` to every sample."""
    if amplitude < 0:
        raise ValidationError("amplitude must be non-negative")
    if amplitude == 0:
        return schedule.with_samples(schedule.samples)
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=schedule.samples.shape)
    return schedule.with_samples(schedule.samples + noise)


def _sweep_cell(args):
    from .core import xz_model
    from .objectives import aqc_spec
    from .schedules import get_problem, initial_set

    model, problem, family, T, alpha, L, tracking, config, dt_target, amplitude, seed = args
    if model is None:
        model = xz_model()
    key = {"problem": get_problem(problem).label, "family": family, "T": T, "alpha": alpha}
    try:
        L_cell = L if L is not None else max(2, int(round(T / dt_target)))
        schedule0, eps, lam = initial_set(problem, family, T, L_cell)
        if amplitude > 0:
            schedule0 = perturb(schedule0, amplitude, seed)
        spec = aqc_spec(problem, alpha, tracking)
        meta = dict(key, epsilon=eps, **{"lambda": lam})
        return optimize(model, problem, schedule0, spec, config, meta=meta)
    except Exception as exc:  # a failed cell must not sink the sweep
        log.warning("sweep cell %s failed: %s", key, exc)
        return RunRecord(None, None, None, None, 0, [], "error", key, error=f"{type(exc).__name__}: {exc}")


def sweep(model: Optional[ControlledHamiltonian], problem, init_family: str, T_values, alpha_values,
          config: OptimizerConfig = OptimizerConfig(), *, L: Optional[int] = None,
          tracking: str = "population", dt: float = 0.01, jobs: int = 1,
          perturb_amplitude: float = 0.0, seed: int = 0) -> list:
    """Run ``optimize`` over the Cartesian product of horizons and weights.

    Cells are independent; ``jobs > 1`` runs them in worker processes. The
    result order is ``(family, T, alpha)`` in input order regardless of ``jobs``.
    ``init_family`` may be one family id or a list of them. A positive
    ``perturb_amplitude`` perturbs every seed with the same ``seed``.
    """
    families = [init_family] if isinstance(init_family, str) else list(init_family)
    cells = [
        (model, problem, fam, float(T), float(a), L, tracking, config, dt, perturb_amplitude, seed)
        for fam in families
        for T in T_values
        for a in alpha_values
    ]
    if not cells:
        return []
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]
