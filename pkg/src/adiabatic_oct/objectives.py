"""Objective values, diagnostics, analytic gradients and Hessians.

The composite objective is ``J = F + J_t`` with the final-time fidelity
``F = |<phi_f| U_T |phi_i>|^2`` and one of the tracking terms

* ``population``: ``alpha * mean_t P0(t)`` (instantaneous ground-state population),
* ``energy``: ``-alpha * mean_t E(t)``,
* ``control-derivative``: ``-alpha / (K T) * sum_k int |du_k/dt|^2 dt`` (value only),
* ``none``: zero.

Gradients are returned per sample, ``dJ / du[k, l]``. They use the
first-order response ``dU(t') / du_k = -i dt U(t') A_k(t)`` with the
Heisenberg coupling ``A_k(t)`` anchored at the midpoint of the interval
that carries the sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ControlledHamiltonian,
    ControlSchedule,
    Trajectory,
    assemble_series,
    eigensystem,
    eigensystems,
    is_xz_model,
)
from .errors import (
    DegenerateSpectrumError,
    NotAtOptimumError,
    UnsupportedModelError,
    ValidationError,
)

GAP_TOL = 1e-12
TRACKING_KINDS = ("population", "energy", "control-derivative", "none")
# tracking kinds whose gradient is implemented
DIFFERENTIABLE_TRACKING = ("population", "energy", "none")


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    alpha: float
    tracking: str
    target_state: np.ndarray
    initial_state: np.ndarray

    def __post_init__(self):
        if self.tracking not in TRACKING_KINDS:
            raise ValidationError(
                f"unknown tracking kind {self.tracking!r}; expected one of {TRACKING_KINDS}"
            )
        alpha = float(self.alpha)
        if not np.isfinite(alpha) or alpha < 0:
            raise ValidationError(f"alpha must be finite and non-negative, got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)
        for name in ("target_state", "initial_state"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if abs(np.linalg.norm(v) - 1.0) > 1e-10:
                raise ValidationError(f"{name} must be unit norm")
            object.__setattr__(self, name, v)


def aqc_spec(problem, alpha: float = 0.0, tracking: str = "population") -> ObjectiveSpec:
    """Objective for an AQC problem: ground of ``H_i`` to ground of ``H_f``."""
    from .schedules import get_problem

    prob = get_problem(problem)
    return ObjectiveSpec(
        alpha,
        tracking,
        target_state=eigensystem(prob.final_hamiltonian).ground,
        initial_state=eigensystem(prob.initial_hamiltonian).ground,
    )


@dataclass(frozen=True, eq=False)
class ObjectiveReport:
    fidelity: float
    infidelity: float
    avg_population: float
    avg_energy: float
    tracking_value: float
    composite: float
    pop_series: np.ndarray
    gap_series: np.ndarray
    ratio_series: np.ndarray
    energy_series: np.ndarray
    trajectory: Trajectory = field(repr=False)

    def summary(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "infidelity": self.infidelity,
            "avg_population": self.avg_population,
            "composite": self.composite,
        }


@dataclass(frozen=True, eq=False)
class GradientField:
    values: np.ndarray
    fidelity_part: np.ndarray
    tracking_part: np.ndarray

    @property
    def parts(self):
        return self.fidelity_part, self.tracking_part


@dataclass(frozen=True, eq=False)
class HessianMatrix:
    values: np.ndarray
    asymmetry: float = 0.0


@dataclass(frozen=True, eq=False)
class GroundDerivative:
    """``chi[k]`` is d(ground state)/d(u_k) for the xz model, k = (x, z)."""

    chi: np.ndarray
    ground: np.ndarray
    excited: np.ndarray


# ---------------------------------------------------------------------------
# helpers


def _trapezoid_weights(n_points: int) -> np.ndarray:
    w = np.ones(n_points)
    w[0] = w[-1] = 0.5
    return w


def _grid_interval(L: int) -> np.ndarray:
    """Interval index (zero-based) whose control value acts at each grid point."""
    return np.maximum(np.arange(L + 1), 1) - 1


def grid_hamiltonians(model: ControlledHamiltonian, schedule: ControlSchedule) -> np.ndarray:
    return assemble_series(model, schedule.grid_values())


def _mid_frames(trajectory: Trajectory):
    """Rows and columns needed to apply midpoint Heisenberg couplings.

    For interval j with ``V_j = exp(-i H_j dt/2) U(t_j)``:
    returns ``m_j = V_j |psi0>`` and ``V_j`` itself.
    """
    U = trajectory.unitaries[:-1]
    half = trajectory.half_steps
    m = np.einsum("lij,lj->li", half, trajectory.states[:-1])
    V = half @ U
    return m, V


def _suffix_rows(rows: np.ndarray) -> np.ndarray:
    """``S[j] = sum_{l' >= j + 1} rows[l']`` for intervals j = 0..L-1."""
    csum = np.cumsum(rows[::-1], axis=0)[::-1]
    return csum[1:]


def _response(trajectory: Trajectory, rows: np.ndarray) -> np.ndarray:
    """``out[k, j] = S_j U(t_{l'}) A_k(j) |psi0>`` summed as in ``_suffix_rows``.

    ``rows[l']`` must already include ``<bra_l'| U(t_l')``.
    """
    m, V = _mid_frames(trajectory)
    S = _suffix_rows(rows)
    y = np.einsum("li,lji->lj", S, V.conj())  # S_j V_j^dagger
    A = trajectory.model.coupling_stack
    return np.einsum("li,kij,lj->kl", y, A, m)


# ---------------------------------------------------------------------------
# values and diagnostics


def fidelity(trajectory: Trajectory, spec: ObjectiveSpec) -> float:
    amp = np.vdot(spec.target_state, trajectory.final_unitary @ spec.initial_state)
    return float(abs(amp) ** 2)


def infidelity(trajectory: Trajectory, spec: ObjectiveSpec) -> float:
    """``1 - F`` as the squared norm of the final state's part orthogonal to the target.

    Unlike ``1 - |a|^2`` this keeps full relative accuracy far below 1e-16.
    """
    psi = trajectory.final_unitary @ spec.initial_state
    rest = psi - np.vdot(spec.target_state, psi) * spec.target_state
    return float(np.real(np.vdot(rest, rest)))


def ground_states(model: ControlledHamiltonian, schedule: ControlSchedule):
    """Gauge-fixed instantaneous ground states and gaps at every grid point."""
    w, v = eigensystems(grid_hamiltonians(model, schedule))
    gaps = w[:, 1] - w[:, 0]
    return v[:, :, 0], gaps


def _require_gap(gaps):
    bad = np.flatnonzero(gaps <= GAP_TOL)
    if bad.size:
        raise DegenerateSpectrumError(
            f"degenerate spectrum (gap {gaps[bad[0]]:.3e}) at grid index {bad[0]}",
            index=int(bad[0]),
        )


def population_series(trajectory: Trajectory, model: ControlledHamiltonian, schedule: ControlSchedule):
    """Instantaneous ground-state population ``P0(t_l)`` and its time average."""
    grounds, gaps = ground_states(model, schedule)
    _require_gap(gaps)
    pops = np.abs(np.einsum("li,li->l", grounds.conj(), trajectory.states)) ** 2
    avg = float(np.sum(_trapezoid_weights(pops.size) * pops) / schedule.intervals)
    return pops, avg


def energy_series(trajectory: Trajectory, model: ControlledHamiltonian, schedule: ControlSchedule):
    """Instantaneous energy ``<psi|H|psi>`` and its trapezoidal time average."""
    hams = grid_hamiltonians(model, schedule)
    psi = trajectory.states
    energies = np.einsum("li,lij,lj->l", psi.conj(), hams, psi).real
    avg = float(np.sum(_trapezoid_weights(energies.size) * energies) / schedule.intervals)
    return energies, avg


def gap_series(model: ControlledHamiltonian, schedule: ControlSchedule) -> np.ndarray:
    w = np.linalg.eigvalsh(grid_hamiltonians(model, schedule))
    return w[:, 1] - w[:, 0]


def _sample_rates(schedule: ControlSchedule) -> np.ndarray:
    """d u / d t at each sample: central differences inside, one-sided at the ends."""
    samples = schedule.samples
    if schedule.intervals < 3:
        return np.gradient(samples, schedule.dt, axis=1, edge_order=1)
    return np.gradient(samples, schedule.dt, axis=1, edge_order=2)


def adiabatic_ratio_series(schedule: ControlSchedule, model: ControlledHamiltonian = None) -> np.ndarray:
    """Adiabatic-condition ratio ``R`` at each grid point from sampled controls.

    For the xz model (the default when ``model`` is None) this is
    ``|x z' - z x'| / (4 (x^2 + z^2)^(3/2))`` with time derivatives. For
    other models the general form ``|<phi_1| dH/dt |phi_0>| / g^2`` is used.
    """
    rates = _sample_rates(schedule)
    idx = _grid_interval(schedule.intervals)
    if model is None or is_xz_model(model):
        if schedule.n_controls != 2:
            raise UnsupportedModelError("the closed-form ratio needs two controls (x, z)")
        x, z = schedule.samples
        dx, dz = rates
        h2 = x * x + z * z
        bad = np.flatnonzero(h2 <= 1e-24)
        if bad.size:
            raise DegenerateSpectrumError(
                f"vanishing gap at sample {bad[0]}", index=int(bad[0])
            )
        ratio = np.abs(x * dz - z * dx) / (4.0 * h2**1.5)
        return ratio[idx]
    w, v = eigensystems(assemble_series(model, schedule.samples))
    gaps = w[:, 1] - w[:, 0]
    _require_gap(gaps)
    hdot = np.einsum("kl,kij->lij", rates, model.coupling_stack)
    elem = np.einsum("li,lij,lj->l", v[:, :, 1].conj(), hdot, v[:, :, 0])
    return (np.abs(elem) / gaps**2)[idx]


def control_derivative_cost(schedule: ControlSchedule, alpha: float = 1.0) -> float:
    """``-alpha / (K T) * sum_k int |du_k/dt|^2 dt`` from forward differences."""
    if schedule.intervals < 2:
        raise ValidationError("control-derivative cost needs at least two intervals")
    rates = np.diff(schedule.samples, axis=1) / schedule.dt
    integral = np.sum(rates**2) * schedule.dt
    return float(-alpha * integral / (schedule.n_controls * schedule.horizon))


def tracking_value(spec: ObjectiveSpec, schedule: ControlSchedule, avg_population, avg_energy) -> float:
    if spec.tracking == "population":
        return spec.alpha * avg_population
    if spec.tracking == "energy":
        return -spec.alpha * avg_energy
    if spec.tracking == "control-derivative":
        return control_derivative_cost(schedule, spec.alpha)
    return 0.0


def evaluate(model: ControlledHamiltonian, schedule: ControlSchedule, spec: ObjectiveSpec,
             trajectory: Trajectory = None) -> ObjectiveReport:
    """Propagate (unless a trajectory is supplied) and compute every diagnostic."""
    from .core import propagate

    if trajectory is None:
        trajectory = propagate(model, schedule, spec.initial_state)
    F = fidelity(trajectory, spec)
    gaps = gap_series(model, schedule)
    if np.all(gaps > GAP_TOL):
        pops, avg_pop = population_series(trajectory, model, schedule)
    elif spec.tracking == "population":
        _require_gap(gaps)
    else:
        pops, avg_pop = np.full(gaps.size, np.nan), float("nan")
    energies, avg_e = energy_series(trajectory, model, schedule)
    try:
        ratios = adiabatic_ratio_series(schedule, model)
    except DegenerateSpectrumError:
        ratios = np.full(gaps.size, np.nan)
    tv = tracking_value(spec, schedule, avg_pop, avg_e)
    return ObjectiveReport(
        fidelity=F,
        infidelity=infidelity(trajectory, spec),
        avg_population=avg_pop,
        avg_energy=avg_e,
        tracking_value=tv,
        composite=F + tv,
        pop_series=pops,
        gap_series=gaps,
        ratio_series=ratios,
        energy_series=energies,
        trajectory=trajectory,
    )


# ---------------------------------------------------------------------------
# gradients


def grad_fidelity(trajectory: Trajectory, model: ControlledHamiltonian, spec: ObjectiveSpec) -> np.ndarray:
    """``dF/du[k, l] = 2 Im{ a^* <f| U_T A_k(t_l) |i> } dt`` with ``a = <f|U_T|i>``."""
    psi0 = trajectory.initial_state
    UT = trajectory.final_unitary
    amp = np.vdot(spec.target_state, UT @ psi0)
    L = trajectory.schedule.intervals
    rows = np.zeros((L + 1, model.dim), dtype=complex)
    rows[-1] = spec.target_state.conj() @ UT
    resp = _response(trajectory, rows)
    return 2.0 * np.imag(np.conj(amp) * resp) * trajectory.schedule.dt


def ground_state_derivative_xz(x: float, z: float) -> GroundDerivative:
    """Closed-form derivative of the gauge-fixed ground state of ``x sx + z sz``.

    With ``h = sqrt(x^2 + z^2)``:
    ``d phi0/dx = -z / sqrt(8 h^5) v`` and ``d phi0/dz = x / sqrt(8 h^5) v``,
    where ``v = sqrt(2h) phi1``. Written through the half angle
    ``theta = atan2(x, z)`` the same expressions stay valid for ``x < 0``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    h = np.hypot(x, z)
    bad = np.flatnonzero(np.atleast_1d(h) <= GAP_TOL / 2)
    if bad.size:
        raise DegenerateSpectrumError("vanishing gap in ground_state_derivative_xz", index=int(bad[0]))
    half = 0.5 * np.arctan2(x, z)
    c, s = np.cos(half), np.sin(half)
    ground = np.stack([-s, c], axis=-1).astype(complex)
    excited = np.stack([c, s], axis=-1).astype(complex)
    inv = 1.0 / (2.0 * h * h)
    chi_x = (-z * inv)[..., None] * excited
    chi_z = (x * inv)[..., None] * excited
    return GroundDerivative(np.stack([chi_x, chi_z], axis=-2), ground, excited)


def ground_state_data(model: ControlledHamiltonian, schedule: ControlSchedule):
    """Ground states and their control derivatives at all grid points (xz only).

    Returns ``(grounds (L+1, 2), chis (L+1, 2, 2))`` in the gauge of
    ``eigensystem``.
    """
    if not is_xz_model(model):
        raise UnsupportedModelError(
            "population-tracking gradients need the ground-state derivative, "
            "which is only available in closed form for H = x sigma_x + z sigma_z"
        )
    gv = schedule.grid_values()
    x, z = gv
    h = np.hypot(x, z)
    _require_gap(2.0 * h)
    d = ground_state_derivative_xz(x, z)
    return d.ground, d.chi


def grad_population_tracking(trajectory: Trajectory, model: ControlledHamiltonian,
                             schedule: ControlSchedule, spec: ObjectiveSpec,
                             ground_data=None) -> np.ndarray:
    """Per-sample gradient of ``alpha * mean_t P0(t)``.

    Two pieces: the change of the instantaneous ground state at the grid
    points driven by the sample (through ``chi``) and the change of every
    later state (through the Heisenberg coupling). Both are weighted by the
    trapezoidal rule used for the value.
    """
    L = schedule.intervals
    dt = schedule.dt
    if spec.alpha == 0.0:
        return np.zeros((model.n_controls, L))
    grounds, chis = ground_state_data(model, schedule) if ground_data is None else ground_data
    psi = trajectory.states
    amps = np.einsum("li,li->l", grounds.conj(), psi)
    weights = _trapezoid_weights(L + 1)
    pref = spec.alpha / schedule.horizon

    # ground-state response at grid points, routed to the interval in force there
    chi_amp = np.einsum("lki,li->kl", chis.conj(), psi)
    per_point = 2.0 * np.real(np.conj(amps)[None, :] * chi_amp) * weights * dt
    chi_part = np.zeros((model.n_controls, L))
    np.add.at(chi_part.T, _grid_interval(L), per_point.T)

    rows = (weights * np.conj(amps))[:, None] * np.einsum(
        "li,lij->lj", grounds.conj(), trajectory.unitaries
    )
    resp = _response(trajectory, rows)
    state_part = 2.0 * np.imag(resp) * dt * dt
    return pref * (chi_part + state_part)


def grad_energy_tracking(trajectory: Trajectory, model: ControlledHamiltonian,
                         schedule: ControlSchedule, spec: ObjectiveSpec) -> np.ndarray:
    """Per-sample gradient of ``-alpha * mean_t E(t)`` for any linear-control model."""
    L = schedule.intervals
    dt = schedule.dt
    if spec.alpha == 0.0:
        return np.zeros((model.n_controls, L))
    psi = trajectory.states
    weights = _trapezoid_weights(L + 1)
    pref = spec.alpha / schedule.horizon

    direct = np.einsum("li,kij,lj->kl", psi.conj(), model.coupling_stack, psi).real
    direct = direct * weights * dt
    direct_part = np.zeros((model.n_controls, L))
    np.add.at(direct_part.T, _grid_interval(L), direct.T)

    hams = grid_hamiltonians(model, schedule)
    hpsi = np.einsum("lij,lj->li", hams, psi)
    rows = weights[:, None] * np.einsum("li,lij->lj", hpsi.conj(), trajectory.unitaries)
    resp = _response(trajectory, rows)
    state_part = 2.0 * np.imag(resp) * dt * dt
    return -pref * (direct_part + state_part)


def gradient(trajectory: Trajectory, spec: ObjectiveSpec) -> GradientField:
    """Full per-sample gradient of the composite objective."""
    model, schedule = trajectory.model, trajectory.schedule
    gF = grad_fidelity(trajectory, model, spec)
    if spec.tracking == "population":
        gT = grad_population_tracking(trajectory, model, schedule, spec)
    elif spec.tracking == "energy":
        gT = grad_energy_tracking(trajectory, model, schedule, spec)
    else:
        # the control-derivative cost has no gradient; it only enters values
        gT = np.zeros_like(gF)
    return GradientField(gF + gT, gF, gT)


# ---------------------------------------------------------------------------
# Hessians of the fidelity


def _heisenberg_vectors(trajectory: Trajectory):
    """Columns ``A_k(j)|psi0>`` and rows ``<f|U_T A_k(j)`` flattened to (K*L, N)."""
    m, V = _mid_frames(trajectory)
    A = trajectory.model.coupling_stack
    # A_k(j) |psi0> = V_j^dagger A_k m_j
    cols = np.einsum("lji,kjn,ln->kli", V.conj(), A, m)
    K, L = A.shape[0], m.shape[0]
    return cols.reshape(K * L, -1), V


def hessian_fidelity(trajectory: Trajectory, model: ControlledHamiltonian, spec: ObjectiveSpec) -> HessianMatrix:
    """Second derivatives of F over all sample pairs, shape (K L, K L).

    Uses ``d^2 U_T = -dt^2 U_T A_j(t') A_k(t)`` with the later coupling on
    the left; for two samples in the same interval the two orders are
    averaged, which is the second-order term of the step exponential.
    """
    psi0 = trajectory.initial_state
    UT = trajectory.final_unitary
    dt = trajectory.schedule.dt
    L = trajectory.schedule.intervals
    amp = np.vdot(spec.target_state, UT @ psi0)
    cols, V = _heisenberg_vectors(trajectory)
    A = model.coupling_stack
    f_row = spec.target_state.conj() @ UT
    # <f| U_T A_k(j) = (f_row V_j^dagger) A_k V_j
    y = np.einsum("i,lji->lj", f_row, V.conj())
    left = np.einsum("lj,kjn,lnm->klm", y, A, V).reshape(cols.shape)
    b = left @ psi0
    M = left @ cols.T  # M[m, n] = <f| U_T A_m A_n |i>
    times = np.tile(np.arange(L), model.n_controls)
    later = times[:, None] > times[None, :]
    same = times[:, None] == times[None, :]
    ordered = np.where(later, M, M.T)
    ordered = np.where(same, 0.5 * (M + M.T), ordered)
    H = 2.0 * np.real(-np.conj(amp) * ordered + np.conj(b)[:, None] * b[None, :]) * dt * dt
    asym = float(np.max(np.abs(H - H.T))) if H.size else 0.0
    return HessianMatrix(0.5 * (H + H.T), asym)


def hessian_at_optimum(trajectory: Trajectory, model: ControlledHamiltonian, spec: ObjectiveSpec,
                       tol: float = 1e-8) -> HessianMatrix:
    """Closed-form Hessian of F where ``U_T |phi_i> = |phi_f>`` (up to phase)."""
    F = fidelity(trajectory, spec)
    if F < 1.0 - tol:
        raise NotAtOptimumError(f"fidelity {F:.12f} is not within {tol} of 1")
    dt = trajectory.schedule.dt
    cols, _ = _heisenberg_vectors(trajectory)
    gram = cols.conj() @ cols.T  # <i| A_m A_n |i>
    expect = np.real(cols @ trajectory.initial_state.conj())  # <i| A_m |i>
    H = (-2.0 * np.real(gram) + 2.0 * np.outer(expect, expect)) * dt * dt
    asym = float(np.max(np.abs(H - H.T))) if H.size else 0.0
    return HessianMatrix(0.5 * (H + H.T), asym)
