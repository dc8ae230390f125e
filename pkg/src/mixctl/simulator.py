"""Execute conversion plans and audit the resulting trajectories.

``ideal`` mode applies unitaries instantly and, during a steered hold, keeps
the eigenbasis exactly on the prescribed basis while the eigenvalues follow
``exp(Q t)``. ``physical`` mode keeps the dissipation on throughout: a
unitary becomes a finite pulse of length ``pulse_tau`` and a steered hold
becomes free evolution in slices of ``steer_dt``, each followed by an
instantaneous rotation of the eigenvectors back onto the prescribed basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, InvalidTime, ValidationError
from .lindblad import DensityMatrix, Lindbladian, as_density, dagger, propagate, propagator, unvec, vec
from .majorization import majorizes
from .protocols import ConversionPlan, InstantUnitary
from .spectrum import evolve_spectrum, q_matrix

MIN_SAMPLES = 32
ENTROPY_TOL = 1e-6
MAJORIZATION_TOL = 1e-8
RANK_TOL = 1e-12
DIAGONAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SimulationResult:
    final_state: DensityMatrix
    trajectory: list
    spectral_error: float
    mode: str
    target_spectrum: np.ndarray = field(repr=False, default=None)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.trajectory])

    def to_dict(self, traj_stride: int = 1, audit: dict | None = None) -> dict:
        from .io import matrix_to_json

        if traj_stride < 1:
            raise ValidationError("trajectory stride must be >= 1")
        samples = self.trajectory[::traj_stride]
        if samples and samples[-1] is not self.trajectory[-1]:
            samples.append(self.trajectory[-1])
        out = {
            "mode": self.mode,
            "spectral_error": float(self.spectral_error),
            "final_state": matrix_to_json(self.final_state.mat),
            "final_spectrum": self.final_state.spectrum().tolist(),
            "trajectory": [{"t": float(t), "spectrum": s.spectrum().tolist()} for t, s in samples],
        }
        if audit is not None:
            out["audit"] = audit
        return out


@dataclass(frozen=True, eq=False)
class EntropyProfile:
    alphas: tuple
    times: np.ndarray
    values: np.ndarray  # shape (len(times), len(alphas))


@dataclass(frozen=True, eq=False)
class MonotonicityReport:
    profile: EntropyProfile
    entropy_violations: list
    majorization_violations: list | None

    @property
    def ok(self) -> bool:
        return not self.entropy_violations and not self.majorization_violations

    def to_dict(self) -> dict:
        return {
            "alphas": [_alpha_label(a) for a in self.profile.alphas],
            "entropy_violations": self.entropy_violations,
            "majorization_violations": self.majorization_violations,
            "ok": self.ok,
        }


def _alpha_label(alpha: float):
    return "inf" if math.isinf(alpha) else float(alpha)


def sorted_spectrum_l1(state: DensityMatrix, target) -> float:
    target = np.sort(np.asarray(target, dtype=float))[::-1]
    if target.shape != (state.d,):
        raise DimensionMismatch("target spectrum has the wrong length")
    return float(np.abs(state.spectrum() - target).sum())


def _check_dims(lind: Lindbladian, rho: DensityMatrix, plan: ConversionPlan) -> None:
    if rho.d != lind.d or plan.d != lind.d:
        raise DimensionMismatch(f"dimensions differ: L {lind.d}, rho {rho.d}, plan {plan.d}")


def _conj(u: np.ndarray, mat: np.ndarray) -> DensityMatrix:
    return DensityMatrix(u @ mat @ dagger(u))


def _match_to_basis(vecs: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Column ``k`` of ``basis`` gets eigenvector ``order[k]`` (maximal overlap)."""
    overlap = np.abs(dagger(basis) @ vecs) ** 2
    greedy = overlap.argmax(axis=1)
    if len(set(greedy.tolist())) == len(greedy) and np.all(overlap.max(axis=1) > 0.5):
        return greedy
    _, order = linear_sum_assignment(-overlap)
    return order


def pin_to_basis(state: DensityMatrix, basis: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``state`` assigned to the columns of ``basis``."""
    diag_form = dagger(basis) @ state.mat @ basis
    off = diag_form - np.diag(np.diag(diag_form))
    if state.d == 1 or np.abs(off).max() <= DIAGONAL_TOL:
        lam = np.real(np.diag(diag_form))
    else:
        w, v = np.linalg.eigh(state.mat)
        lam = w[_match_to_basis(v, basis)]
    lam = np.clip(lam, 0.0, None)
    return lam / lam.sum()


def _sample_times(duration: float, n: int) -> np.ndarray:
    return np.linspace(0.0, duration, n + 1)[1:]


def run_plan_ideal(lind: Lindbladian, rho, plan: ConversionPlan, samples: int = MIN_SAMPLES) -> SimulationResult:
    rho = as_density(rho)
    _check_dims(lind, rho, plan)
    state, t0 = rho, 0.0
    trajectory = [(0.0, state)]
    for step in plan.steps:
        if isinstance(step, InstantUnitary):
            state = _conj(step.u, state.mat)
            trajectory.append((t0, state))
            continue
        if step.duration == 0.0:
            continue
        if step.steered:
            basis = step.basis
            lam0 = pin_to_basis(state, basis)
            q = q_matrix(lind.ops, basis)
            for dt in _sample_times(step.duration, samples):
                lam = evolve_spectrum(q, lam0, dt).entries
                trajectory.append((t0 + dt, DensityMatrix(basis @ np.diag(lam) @ dagger(basis))))
        else:
            start = state
            for dt in _sample_times(step.duration, samples):
                trajectory.append((t0 + dt, propagate(lind, start, dt)))
        t0 += step.duration
        state = trajectory[-1][1]
    return SimulationResult(
        state, trajectory, sorted_spectrum_l1(state, plan.target_spectrum.entries), "ideal",
        plan.target_spectrum.entries,
    )


def unitary_log_hamiltonian(u: np.ndarray, tau: float) -> np.ndarray:
    """Hermitian ``H`` with ``exp(-i H tau) = u``, eigenphases taken in ``(-pi, pi]``."""
    t, z = la.schur(np.asarray(u, dtype=complex), output="complex")
    phases = np.angle(np.diag(t))
    phases[phases <= -np.pi] += 2 * np.pi
    h = -(z * phases) @ dagger(z) / tau
    return 0.5 * (h + dagger(h))


class _Stepper:
    """Cached free-evolution propagator for a fixed time slice."""

    def __init__(self, lind: Lindbladian, dt: float):
        self.d = lind.d
        self.dt = dt
        self.prop = propagator(lind, dt)

    def __call__(self, mat: np.ndarray) -> np.ndarray:
        return unvec(self.prop @ vec(mat), self.d)


def run_plan_physical(
    lind: Lindbladian,
    rho,
    plan: ConversionPlan,
    pulse_tau: float = 1e-4,
    steer_dt: float = 1e-3,
    samples: int = MIN_SAMPLES,
) -> SimulationResult:
    if not (pulse_tau > 0 and steer_dt > 0):
        raise InvalidTime("pulse_tau and steer_dt must be positive")
    rho = as_density(rho)
    _check_dims(lind, rho, plan)
    state, t0 = rho, 0.0
    trajectory = [(0.0, state)]
    steppers: dict[float, _Stepper] = {}
    for step in plan.steps:
        if isinstance(step, InstantUnitary):
            h = unitary_log_hamiltonian(step.u, pulse_tau)
            driven = lind.with_hamiltonian(lind.hamiltonian + h)
            state = propagate(driven, state, pulse_tau)
            t0 += pulse_tau
            trajectory.append((t0, state))
            continue
        if step.duration == 0.0:
            continue
        if not step.steered:
            start = state
            for dt in _sample_times(step.duration, samples):
                trajectory.append((t0 + dt, propagate(lind, start, dt)))
            t0 += step.duration
            state = trajectory[-1][1]
            continue
        n = max(1, int(math.ceil(step.duration / steer_dt - 1e-9)))
        dt = step.duration / n
        key = round(dt, 15)
        if key not in steppers:
            steppers[key] = _Stepper(lind, dt)
        stepper = steppers[key]
        basis = step.basis
        every = max(1, n // samples)
        mat = basis @ np.diag(pin_to_basis(state, basis)) @ dagger(basis)
        for k in range(1, n + 1):
            mat = stepper(mat)
            mat = 0.5 * (mat + dagger(mat))
            w, v = np.linalg.eigh(mat)
            lam = w[_match_to_basis(v, basis)]
            mat = (basis * lam) @ dagger(basis)
            if k % every == 0 or k == n:
                trajectory.append((t0 + k * dt, DensityMatrix(mat / np.trace(mat).real)))
        t0 += step.duration
        state = trajectory[-1][1]
    return SimulationResult(
        state, trajectory, sorted_spectrum_l1(state, plan.target_spectrum.entries), "physical",
        plan.target_spectrum.entries,
    )


def _spectrum_of(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.spectrum()
    return np.sort(np.clip(np.asarray(x, dtype=float), 0.0, None))[::-1]


def renyi_entropy(rho, alpha: float) -> float:
    """Renyi entropy in nats; accepts a state or a probability vector."""
    if not alpha >= 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    p = _spectrum_of(rho)
    p = p / p.sum()
    if alpha == 0:
        return float(np.log(np.count_nonzero(p > RANK_TOL)))
    if alpha == 1:
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum())
    if math.isinf(alpha):
        return float(-np.log(p.max()))
    nz = p[p > 0]
    return float(np.log((nz**alpha).sum()) / (1.0 - alpha))


def entropy_profile(result: SimulationResult, alphas: Sequence[float]) -> EntropyProfile:
    spectra = [s.spectrum() for _, s in result.trajectory]
    values = np.array([[renyi_entropy(p, a) for a in alphas] for p in spectra])
    return EntropyProfile(tuple(alphas), result.times, values)


def audit_monotonicity(
    result: SimulationResult,
    alphas: Sequence[float] = (0.5, 1.0, 2.0, math.inf),
    entropy_tol: float = ENTROPY_TOL,
    majorization_tol: float = MAJORIZATION_TOL,
) -> MonotonicityReport:
    """Flag entropy decreases along the trajectory and, in ideal mode,
    consecutive samples whose spectra fail to majorize their successors."""
    if not result.trajectory:
        raise ValidationError("empty trajectory")
    profile = entropy_profile(result, alphas)
    entropy_violations = []
    drops = np.diff(profile.values, axis=0)
    for k, a in zip(*np.nonzero(drops < -entropy_tol)):
        entropy_violations.append(
            {"index": int(k), "alpha": _alpha_label(alphas[a]), "drop": float(-drops[k, a])}
        )
    majorization_violations = None
    if result.mode == "ideal":
        majorization_violations = []
        spectra = [s.spectrum() for _, s in result.trajectory]
        for k in range(len(spectra) - 1):
            if not majorizes(spectra[k], spectra[k + 1], majorization_tol):
                majorization_violations.append({"index": k, "t": float(result.trajectory[k + 1][0])})
    return MonotonicityReport(profile, entropy_violations, majorization_violations)


def purity(rho) -> float:
    p = _spectrum_of(rho)
    return float((p**2).sum())


def trace_distance(a, b) -> float:
    a, b = as_density(a), as_density(b)
    if a.d != b.d:
        raise DimensionMismatch("states have different dimensions")
    return float(0.5 * la.svdvals(a.mat - b.mat).sum())
