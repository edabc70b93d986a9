"""Dense linear algebra for small controlled quantum systems.

Hamiltonians are linear in the controls, ``H(t) = A0 + sum_k u_k(t) A_k``,
and the controls are piecewise constant on a uniform grid. Propagation uses
the exact exponential of every frozen step Hamiltonian, so the only
approximation anywhere downstream is the one made in the gradient formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _check_hermitian(op, name="operator", tol=HERMITIAN_TOL):
    op = np.asarray(op, dtype=complex)
    if op.ndim < 2 or op.shape[-1] != op.shape[-2]:
        raise ValidationError(f"{name} must be square, got shape {op.shape}")
    dev = np.max(np.abs(op - np.swapaxes(op.conj(), -1, -2))) if op.size else 0.0
    if dev > tol:
        raise ValidationError(f"{name} is not Hermitian (max deviation {dev:.3e})")
    return op


@dataclass(frozen=True, eq=False)
class ControlledHamiltonian:
    """Drift operator plus an ordered list of coupling operators."""

    drift: np.ndarray
    couplings: tuple

    def __post_init__(self):
        drift = _check_hermitian(self.drift, "drift")
        couplings = tuple(
            _check_hermitian(a, f"coupling {k + 1}") for k, a in enumerate(self.couplings)
        )
        if drift.shape[0] < 2:
            raise ValidationError("dimension must be at least 2")
        if not couplings:
            raise ValidationError("at least one coupling operator is required")
        for k, a in enumerate(couplings):
            if a.shape != drift.shape:
                raise ValidationError(
                    f"coupling {k + 1} has shape {a.shape}, drift has {drift.shape}"
                )
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "couplings", couplings)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.couplings)

    @property
    def coupling_stack(self) -> np.ndarray:
        return np.stack(self.couplings)


def xz_model() -> ControlledHamiltonian:
    """One-qubit model ``H = x sigma_x + z sigma_z`` with controls (x, z)."""
    return ControlledHamiltonian(np.zeros((2, 2), dtype=complex), (SIGMA_X, SIGMA_Z))


def is_xz_model(model: ControlledHamiltonian) -> bool:
    if model.dim != 2 or model.n_controls != 2:
        return False
    return (
        np.allclose(model.drift, 0.0, atol=HERMITIAN_TOL)
        and np.allclose(model.couplings[0], SIGMA_X, atol=HERMITIAN_TOL)
        and np.allclose(model.couplings[1], SIGMA_Z, atol=HERMITIAN_TOL)
    )


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """K piecewise-constant controls on L uniform intervals of [0, T].

    ``samples[k, l]`` is the value of control k on the interval
    ``(t_l, t_{l+1}]`` (zero-based), i.e. interval ``l + 1`` in one-based
    grid notation.
    """

    horizon: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float, copy=True)
        if samples.ndim == 1:
            samples = samples[None, :]
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise ValidationError(f"samples must be a K x L array, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("control samples must be finite")
        horizon = float(self.horizon)
        if not (np.isfinite(horizon) and horizon > 0):
            raise ValidationError(f"horizon must be positive, got {self.horizon}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "horizon", horizon)

    @property
    def n_controls(self) -> int:
        return self.samples.shape[0]

    @property
    def intervals(self) -> int:
        return self.samples.shape[1]

    @property
    def dt(self) -> float:
        return self.horizon / self.intervals

    @property
    def grid(self) -> np.ndarray:
        """Grid times ``t_l = l T / L`` for ``l = 0..L``."""
        return np.arange(self.intervals + 1) * self.dt

    @property
    def scaled_grid(self) -> np.ndarray:
        return np.arange(self.intervals + 1) / self.intervals

    @property
    def midpoints(self) -> np.ndarray:
        """Scaled interval midpoints ``s = (l - 1/2) / L``."""
        return (np.arange(self.intervals) + 0.5) / self.intervals

    def grid_values(self) -> np.ndarray:
        """Control values attributed to each grid point, shape (K, L+1).

        Grid point ``t_l`` lies in interval ``l`` (intervals are closed on the
        right); ``t_0`` takes the first interval's value.
        """
        idx = np.maximum(np.arange(self.intervals + 1), 1) - 1
        return self.samples[:, idx]

    def with_samples(self, samples) -> "ControlSchedule":
        return ControlSchedule(self.horizon, samples)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Sorted spectrum with gauge-fixed eigenvectors stored as columns."""

    energies: np.ndarray
    vectors: np.ndarray

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def ground(self) -> np.ndarray:
        return self.vectors[:, 0]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Cumulative propagators and states at the L+1 grid points.

    ``half_steps[l]`` holds ``exp(-i H_l dt / 2)`` for interval ``l``; the
    gradient formulas anchor Heisenberg couplings at interval midpoints.
    """

    unitaries: np.ndarray
    states: np.ndarray
    initial_state: np.ndarray
    model: ControlledHamiltonian
    schedule: ControlSchedule
    step_hamiltonians: np.ndarray
    half_steps: np.ndarray = field(repr=False)

    @property
    def final_unitary(self) -> np.ndarray:
        return self.unitaries[-1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def assemble(model: ControlledHamiltonian, values) -> np.ndarray:
    """Return ``A0 + sum_k values[k] A_k``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (model.n_controls,):
        raise ValidationError(
            f"expected {model.n_controls} control values, got shape {values.shape}"
        )
    return model.drift + np.tensordot(values, model.coupling_stack, axes=1)


def assemble_series(model: ControlledHamiltonian, samples) -> np.ndarray:
    """Vectorized ``assemble`` over the columns of a K x M array -> (M, N, N)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] != model.n_controls:
        raise ValidationError(
            f"samples must have {model.n_controls} rows, got shape {samples.shape}"
        )
    return model.drift[None] + np.einsum("km,kij->mij", samples, model.coupling_stack)


def _expm_from_eig(energies, vectors, dt):
    phases = np.exp(-1j * energies * dt)
    return np.einsum("...ij,...j,...kj->...ik", vectors, phases, vectors.conj())


def step_propagator(H, dt: float) -> np.ndarray:
    """Exact ``exp(-i H dt)`` through the eigendecomposition of ``H``."""
    H = _check_hermitian(H, "step Hamiltonian")
    if not dt > 0:
        raise ValidationError(f"time step must be positive, got {dt}")
    w, v = np.linalg.eigh(H)
    return _expm_from_eig(w, v, dt)


def _ordered_prefix_products(steps: np.ndarray) -> np.ndarray:
    """Return ``out[l] = steps[l] @ ... @ steps[0]`` by log-depth doubling."""
    out = np.array(steps, copy=True)
    shift = 1
    while shift < len(out):
        out[shift:] = out[shift:] @ out[:-shift]
        shift *= 2
    return out


def propagate(model: ControlledHamiltonian, schedule: ControlSchedule, initial_state) -> Trajectory:
    """Propagate through all intervals; ``U(t_l) = P_l ... P_1``."""
    if schedule.n_controls != model.n_controls:
        raise ValidationError(
            f"schedule has {schedule.n_controls} controls, model expects {model.n_controls}"
        )
    psi0 = np.asarray(initial_state, dtype=complex)
    if psi0.shape != (model.dim,):
        raise ValidationError(f"initial state must have shape ({model.dim},)")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValidationError(f"initial state norm is {norm:.12f}, expected 1")

    dt = schedule.dt
    hams = assemble_series(model, schedule.samples)
    w, v = np.linalg.eigh(hams)
    steps = _expm_from_eig(w, v, dt)
    half = _expm_from_eig(w, v, 0.5 * dt)

    L, N = schedule.intervals, model.dim
    unitaries = np.empty((L + 1, N, N), dtype=complex)
    unitaries[0] = np.eye(N)
    unitaries[1:] = _ordered_prefix_products(steps)
    states = unitaries @ psi0
    for arr in (unitaries, states, hams, half):
        arr.setflags(write=False)
    return Trajectory(unitaries, states, psi0, model, schedule, hams, half)


def fix_gauge(vectors: np.ndarray) -> np.ndarray:
    """Apply the deterministic phase convention to eigenvector columns.

    Works on a single (N, N) matrix or a stack (..., N, N). For N = 2 the
    ground state gets a real non-negative second component (which for
    ``x >= 0`` is the closed form ``(-sqrt(h - z), sqrt(h + z)) / sqrt(2h)``)
    and the excited state a real non-negative first component. For larger N
    the largest-magnitude component of each column is made real positive.
    """
    vectors = np.array(vectors, dtype=complex, copy=True)
    n = vectors.shape[-1]
    if n == 2:
        tiny = 1e-14
        # ground: pivot on component 1, fall back to component 0 made negative
        g1 = vectors[..., 1, 0]
        g0 = vectors[..., 0, 0]
        use1 = np.abs(g1) > tiny
        pivot = np.where(use1, g1, -g0)
        vectors[..., :, 0] *= (np.conj(pivot) / np.abs(pivot))[..., None]
        e0 = vectors[..., 0, 1]
        e1 = vectors[..., 1, 1]
        use0 = np.abs(e0) > tiny
        pivot = np.where(use0, e0, e1)
        vectors[..., :, 1] *= (np.conj(pivot) / np.abs(pivot))[..., None]
        return vectors
    mags = np.abs(vectors)
    idx = np.argmax(mags, axis=-2)
    pivot = np.take_along_axis(vectors, idx[..., None, :], axis=-2)[..., 0, :]
    vectors *= (np.conj(pivot) / np.abs(pivot))[..., None, :]
    return vectors


def eigensystem(H) -> EigenSystem:
    """Sorted energies and gauge-fixed eigenvectors of a Hermitian operator."""
    H = _check_hermitian(H, "Hamiltonian")
    w, v = np.linalg.eigh(H)
    return EigenSystem(w, fix_gauge(v))


def eigensystems(hams) -> tuple[np.ndarray, np.ndarray]:
    """Batched ``eigensystem`` over a stack (M, N, N); returns energies and vectors."""
    w, v = np.linalg.eigh(np.asarray(hams, dtype=complex))
    return w, fix_gauge(v)


def heisenberg_coupling(U, A) -> np.ndarray:
    """Return ``U^dagger A U``."""
    U = np.asarray(U, dtype=complex)
    A = np.asarray(A, dtype=complex)
    if U.shape[-2:] != A.shape[-2:]:
        raise ValidationError(f"shape mismatch: U {U.shape}, A {A.shape}")
    return np.swapaxes(U.conj(), -1, -2) @ A @ U
