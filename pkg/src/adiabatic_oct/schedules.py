"""AQC problem definitions and analytic initial control sets.

Both problems use the one-qubit model ``H = x sigma_x + z sigma_z`` and start
from ``H_i = sigma_x``. The adiabatic families hold the ratio

    R = |x z' - z x'| / (4 (x^2 + z^2)^(3/2)) / T

constant along the schedule (primes are d/ds with s = t/T). Each family is
kept as a continuous profile with analytic derivatives and sampled at
interval midpoints when a piecewise-constant schedule is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import SIGMA_X, SIGMA_Z, ControlSchedule
from .errors import ConfigurationError, DomainError, NoSolutionError, ValidationError

PI = math.pi

FAMILY_IDS = ("linear", "const-x", "sine-x", "linear-constraint", "trig")


@dataclass(frozen=True, eq=False)
class AqcProblem:
    label: str
    initial_hamiltonian: np.ndarray
    final_hamiltonian: np.ndarray
    x_bounds: tuple
    z_bounds: tuple

    @property
    def boundary(self) -> dict:
        return {
            "x0": self.x_bounds[0],
            "x1": self.x_bounds[1],
            "z0": self.z_bounds[0],
            "z1": self.z_bounds[1],
        }


PROBLEM_I = AqcProblem("I", SIGMA_X, SIGMA_X + SIGMA_Z, (1.0, 1.0), (0.0, 1.0))
PROBLEM_II = AqcProblem("II", SIGMA_X, SIGMA_Z, (1.0, 0.0), (0.0, 1.0))
PROBLEMS = {"I": PROBLEM_I, "II": PROBLEM_II}

# which families seed which problem
VALID_PAIRS = {
    "I": ("linear", "const-x", "sine-x"),
    "II": ("linear", "linear-constraint", "trig"),
}


def get_problem(label) -> AqcProblem:
    if isinstance(label, AqcProblem):
        return label
    try:
        return PROBLEMS[str(label)]
    except KeyError:
        raise ConfigurationError(f"unknown problem {label!r}; expected 'I' or 'II'") from None


@dataclass(frozen=True, eq=False)
class Profile:
    """Continuous control pair (x(s), z(s)) with analytic s-derivatives."""

    family: str
    problem: str
    x: Callable
    z: Callable
    dx: Callable
    dz: Callable
    gap: Callable
    epsilon_T: Optional[float] = None

    def sample(self, T: float, L: int) -> ControlSchedule:
        s = (np.arange(L) + 0.5) / L
        return ControlSchedule(T, np.vstack([self.x(s), self.z(s)]))

    def ratio(self, s, T: float) -> np.ndarray:
        """Adiabatic ratio R(s) from the analytic derivatives."""
        s = np.asarray(s, dtype=float)
        x, z = self.x(s), self.z(s)
        num = np.abs(x * self.dz(s) - z * self.dx(s))
        return num / (4.0 * (x * x + z * z) ** 1.5) / T

    @property
    def lam(self) -> Optional[float]:
        return None if self.epsilon_T is None else 4.0 * self.epsilon_T


@dataclass(frozen=True, eq=False)
class AdiabaticSolution:
    schedule: ControlSchedule
    epsilon: float
    lam: float
    family: str
    profile: Optional[Profile] = None
    dense: Optional[tuple] = None  # (s, x, z) on the integration grid, ODE solutions only


def _const(v):
    return lambda s: np.full_like(np.asarray(s, dtype=float), v)


def _sine_w(s):
    return 1.0 + PI * s - np.cos(PI * s)


def _sine_d(s):
    return 2.0 * (PI + 2.0) ** 2 - _sine_w(s) ** 2


def _sine_z(s):
    s = np.asarray(s, dtype=float)
    return (1.0 + np.sin(PI * s)) * _sine_w(s) / np.sqrt(_sine_d(s))


def _sine_dz(s):
    s = np.asarray(s, dtype=float)
    X = 1.0 + np.sin(PI * s)
    dX = PI * np.cos(PI * s)
    W = _sine_w(s)
    dW = PI + PI * np.sin(PI * s)
    D = _sine_d(s)
    return dX * W / np.sqrt(D) + X * dW / np.sqrt(D) + X * W * W * dW / D**1.5


def _lc_d(s):
    return 1.0 + 4.0 * s - 4.0 * s * s


PROFILES = {
    ("I", "linear"): Profile(
        "linear", "I",
        x=_const(1.0), z=lambda s: np.asarray(s, dtype=float),
        dx=_const(0.0), dz=_const(1.0),
        gap=lambda s: 2.0 * np.sqrt(1.0 + np.asarray(s) ** 2),
    ),
    ("II", "linear"): Profile(
        "linear", "II",
        x=lambda s: 1.0 - np.asarray(s, dtype=float), z=lambda s: np.asarray(s, dtype=float),
        dx=_const(-1.0), dz=_const(1.0),
        gap=lambda s: 2.0 * np.sqrt(1.0 - 2.0 * np.asarray(s) + 2.0 * np.asarray(s) ** 2),
    ),
    ("I", "const-x"): Profile(
        "const-x", "I",
        x=_const(1.0), z=lambda s: s / np.sqrt(2.0 - np.asarray(s) ** 2),
        dx=_const(0.0), dz=lambda s: 2.0 / (2.0 - np.asarray(s) ** 2) ** 1.5,
        gap=lambda s: 2.0 * math.sqrt(2.0) / np.sqrt(2.0 - np.asarray(s) ** 2),
        epsilon_T=1.0 / math.sqrt(32.0),
    ),
    ("I", "sine-x"): Profile(
        "sine-x", "I",
        x=lambda s: 1.0 + np.sin(PI * np.asarray(s)), z=_sine_z,
        dx=lambda s: PI * np.cos(PI * np.asarray(s)), dz=_sine_dz,
        gap=lambda s: 2.0 * math.sqrt(2.0) * (PI + 2.0) * (1.0 + np.sin(PI * np.asarray(s)))
        / np.sqrt(_sine_d(np.asarray(s))),
        epsilon_T=PI / (4.0 * math.sqrt(2.0) * (PI + 2.0)),
    ),
    ("II", "linear-constraint"): Profile(
        "linear-constraint", "II",
        x=lambda s: 0.5 * (1.0 + (1.0 - 2.0 * s) / np.sqrt(_lc_d(np.asarray(s)))),
        z=lambda s: 0.5 * (1.0 - (1.0 - 2.0 * s) / np.sqrt(_lc_d(np.asarray(s)))),
        dx=lambda s: -2.0 / _lc_d(np.asarray(s)) ** 1.5,
        dz=lambda s: 2.0 / _lc_d(np.asarray(s)) ** 1.5,
        gap=lambda s: 2.0 / np.sqrt(_lc_d(np.asarray(s))),
        epsilon_T=0.5,
    ),
    ("II", "trig"): Profile(
        "trig", "II",
        x=lambda s: np.cos(PI * np.asarray(s) / 2.0), z=lambda s: np.sin(PI * np.asarray(s) / 2.0),
        dx=lambda s: -0.5 * PI * np.sin(PI * np.asarray(s) / 2.0),
        dz=lambda s: 0.5 * PI * np.cos(PI * np.asarray(s) / 2.0),
        gap=_const(2.0),
        epsilon_T=PI / 8.0,
    ),
}


def get_profile(problem, family: str) -> Profile:
    label = get_problem(problem).label
    if family not in FAMILY_IDS:
        raise ConfigurationError(
            f"unknown family {family!r}; known families: {', '.join(FAMILY_IDS)}"
        )
    try:
        return PROFILES[(label, family)]
    except KeyError:
        pairs = "; ".join(f"{p}: {', '.join(f)}" for p, f in VALID_PAIRS.items())
        raise ConfigurationError(
            f"family {family!r} is not defined for problem {label}; valid pairs are {pairs}"
        ) from None


def _check_grid(T, L):
    if not (np.isfinite(T) and T > 0):
        raise ValidationError(f"T must be positive, got {T}")
    if int(L) != L or L < 2:
        raise ValidationError(f"L must be an integer >= 2, got {L}")


def _solution(problem, family, T, L) -> AdiabaticSolution:
    _check_grid(T, L)
    prof = get_profile(problem, family)
    return AdiabaticSolution(
        prof.sample(T, int(L)), prof.epsilon_T / T, prof.lam, family, profile=prof
    )


def linear_set(problem, T: float, L: int) -> ControlSchedule:
    """Linear interpolation of both controls between the problem's endpoints."""
    _check_grid(T, L)
    return get_profile(problem, "linear").sample(T, int(L))


def const_x_adiabatic_set(T: float, L: int) -> AdiabaticSolution:
    """Problem I with x held at 1: ``z = s / sqrt(2 - s^2)``."""
    return _solution("I", "const-x", T, L)


def sine_x_adiabatic_set(T: float, L: int) -> AdiabaticSolution:
    """Problem I with ``x = 1 + sin(pi s)``."""
    return _solution("I", "sine-x", T, L)


def linear_constraint_adiabatic_set(T: float, L: int) -> AdiabaticSolution:
    """Problem II with ``x + z = 1``."""
    return _solution("II", "linear-constraint", T, L)


def trig_adiabatic_set(T: float, L: int) -> AdiabaticSolution:
    """Problem II with ``x^2 + z^2 = 1``: a quarter turn at constant gap."""
    return _solution("II", "trig", T, L)


def initial_set(problem, family: str, T: float, L: int):
    """Build any named seed; returns ``(schedule, epsilon, lam)`` with None for linear."""
    prof = get_profile(problem, family)
    if family == "linear":
        return linear_set(problem, T, L), None, None
    sol = _solution(prof.problem, family, T, L)
    return sol.schedule, sol.epsilon, sol.lam


def reference_gap(family: str, s, problem="I"):
    """Closed-form gap ``g(s)`` of a named family."""
    if family not in FAMILY_IDS:
        raise ValidationError(
            f"unknown family {family!r}; known families: {', '.join(FAMILY_IDS)}"
        )
    if family != "linear":
        problem = "I" if family in VALID_PAIRS["I"] else "II"
    prof = get_profile(problem, family)
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < 0) | (s_arr > 1)):
        raise ValidationError("s must lie in [0, 1]")
    out = prof.gap(s_arr)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# generic solver for the one-qubit adiabatic equality


@dataclass(frozen=True)
class Constraint:
    """Eliminates x from the adiabatic equality, leaving ``dz/ds = rhs(s, z, lam)``.

    ``x_of(s, z)`` recovers the eliminated control along the solution.
    """

    name: str
    rhs: Callable
    x_of: Callable


def _quad_x(s, z):
    return np.sqrt(np.maximum(0.0, 1.0 - z * z))


CONSTRAINTS = {
    "const-x": Constraint(
        "const-x",
        rhs=lambda s, z, lam: lam * (1.0 + z * z) ** 1.5,
        x_of=lambda s, z: np.ones_like(z),
    ),
    "sine-x": Constraint(
        "sine-x",
        rhs=lambda s, z, lam: (
            PI * np.cos(PI * s) * z + lam * ((1.0 + np.sin(PI * s)) ** 2 + z * z) ** 1.5
        ) / (1.0 + np.sin(PI * s)),
        x_of=lambda s, z: 1.0 + np.sin(PI * s) + 0.0 * z,
    ),
    "linear-constraint": Constraint(
        "linear-constraint",
        rhs=lambda s, z, lam: lam * ((1.0 - z) ** 2 + z * z) ** 1.5,
        x_of=lambda s, z: 1.0 - z,
    ),
    # clipped at z = 1 so that RK stages touching the target stay finite
    "trig": Constraint(
        "trig",
        rhs=lambda s, z, lam: lam * np.sqrt(np.maximum(0.0, 1.0 - z * z)),
        x_of=_quad_x,
    ),
}


def _rk4(rhs, lam, z0, n_steps):
    h = 1.0 / n_steps
    z = np.empty(n_steps + 1)
    z[0] = z0
    zc = z0
    with np.errstate(all="ignore"):
        for i in range(n_steps):
            s = i * h
            try:
                k1 = rhs(s, zc, lam)
                k2 = rhs(s + 0.5 * h, zc + 0.5 * h * k1, lam)
                k3 = rhs(s + 0.5 * h, zc + 0.5 * h * k2, lam)
                k4 = rhs(s + h, zc + h * k3, lam)
                zc = zc + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            except (OverflowError, ZeroDivisionError):
                zc = math.inf
            if not math.isfinite(zc):
                z[i + 1:] = np.inf
                return z
            z[i + 1] = zc
    return z


def solve_adiabatic_ode(
    constraint,
    boundary: tuple,
    T: float,
    L: int,
    *,
    lam_bracket: tuple = (1e-6, 1e3),
    min_step: float = 1e-3,
    tangential_step: float = 2e-5,
) -> AdiabaticSolution:
    """Integrate a reduced adiabatic equality and shoot for ``lam = 4 eps T``.

    ``boundary`` is the pair ``(z(0), z(1))``. The ODE is integrated with
    classical RK4 on a uniform grid that contains every interval midpoint of
    the L-interval schedule. ``lam`` is found by bisection on
    ``z(1; lam) - z(1)``; runs that blow up count as overshoot. When the
    right-hand side vanishes at the target (the trajectory arrives
    tangentially, as for ``x^2 + z^2 = 1``), the bisection root is only
    accurate to the square root of the integration error, so it is refined
    by a secant iteration on ``sqrt(z(1) - z(1; lam))`` from below.
    Solutions that move by more than 1e-6 when the step is halved are
    rejected with ``NoSolutionError``.
    """
    if isinstance(constraint, str):
        try:
            constraint = CONSTRAINTS[constraint]
        except KeyError:
            raise ValidationError(
                f"unknown constraint {constraint!r}; known: {', '.join(CONSTRAINTS)}"
            ) from None
    _check_grid(T, L)
    L = int(L)
    z_start, z_end = map(float, boundary)
    sub = max(1, math.ceil(1.0 / (2 * L * min_step)))
    n_steps = 2 * L * sub

    def shoot(lam, n=n_steps):
        z = _rk4(constraint.rhs, lam, z_start, n)
        return z, (z[-1] - z_end if np.isfinite(z[-1]) else np.inf)

    lo, hi = map(float, lam_bracket)
    for _ in range(60):
        if shoot(lo)[1] < 0:
            break
        lo /= 10.0
    else:
        raise NoSolutionError("could not find lam undershooting the boundary")
    for _ in range(60):
        if shoot(hi)[1] >= 0:
            break
        hi *= 10.0
    else:
        raise NoSolutionError("could not find lam overshooting the boundary")

    while hi - lo > 1e-15 * hi:
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if shoot(mid)[1] < 0:
            lo = mid
        else:
            hi = mid
    lam = lo

    with np.errstate(all="ignore"):
        slope_at_target = abs(constraint.rhs(1.0, z_end, lam))
    if np.isfinite(slope_at_target) and slope_at_target < 1e-6:
        lam = _tangential_refine(shoot, lam, 1.0 / n_steps)
        # RK stages that step past the target see a clipped right-hand side;
        # a finer grid keeps that error below the boundary tolerance
        sub = max(sub, math.ceil(1.0 / (2 * L * tangential_step)))
        n_steps = 2 * L * sub

    z, res = shoot(lam, n_steps)
    if not np.all(np.isfinite(z)):
        raise DomainError(f"constraint {constraint.name!r} produced non-finite z at lam={lam}")
    if abs(res) > 1e-10:
        raise NoSolutionError(f"shooting residual {res:.3e} exceeds 1e-10")
    # a root produced by an unstable integration does not survive refinement
    z_fine, _ = shoot(lam, 2 * n_steps)
    drift = np.max(np.abs(z_fine[::2] - z)) if np.all(np.isfinite(z_fine)) else np.inf
    if not drift <= 1e-6:
        raise NoSolutionError(
            f"solution at lam={lam:.6g} is not resolved by the integration grid (drift {drift:.2e})"
        )

    s_dense = np.linspace(0.0, 1.0, n_steps + 1)
    x_dense = constraint.x_of(s_dense, z)
    if not np.all(np.isfinite(x_dense)):
        raise DomainError(f"constraint {constraint.name!r} produced non-finite x")
    mid_idx = sub * (2 * np.arange(L) + 1)
    schedule = ControlSchedule(T, np.vstack([x_dense[mid_idx], z[mid_idx]]))
    return AdiabaticSolution(
        schedule, lam / (4.0 * T), lam, constraint.name, dense=(s_dense, x_dense, z)
    )


def _tangential_refine(shoot, lam_bisect, h):
    # below the root the residual behaves like -c (lam* - lam)^2, so its
    # square root is nearly linear; one secant step through two points a
    # few integration steps below the root avoids the region where RK
    # stages overshoot the target
    pts = []
    for offset in (12.0 * h, 6.0 * h):
        lam = lam_bisect - offset * max(1.0, lam_bisect)
        r = shoot(lam)[1]
        if not (np.isfinite(r) and r < 0):
            return lam_bisect
        pts.append((lam, math.sqrt(-r)))
    (a, ga), (b, gb) = pts
    if ga == gb:
        return lam_bisect
    return b - gb * (b - a) / (gb - ga)
