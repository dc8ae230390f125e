"""Lindblad master equations: representation, unitality, propagation and
dephasing classification.

Matrices are plain complex ``numpy`` arrays. Superoperators use
column-stacking vectorization, ``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .config import TOL_HERM, TOL_PSD
from .errors import DimensionMismatch, InvalidTime, ValidationError, ZeroLindbladian

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def as_matrix(x, d: int | None = None) -> np.ndarray:
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    if d is not None and m.shape[0] != d:
        raise DimensionMismatch(f"expected {d}x{d}, got {m.shape}")
    return m


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    mat: np.ndarray
    tol: float = field(default=TOL_HERM, repr=False)

    def __post_init__(self):
        m = as_matrix(self.mat).copy()
        if hermiticity_error(m) > self.tol:
            raise ValidationError(f"state is not Hermitian (error {hermiticity_error(m):.2e})")
        m = 0.5 * (m + dagger(m))
        if abs(np.trace(m).real - 1.0) > self.tol:
            raise ValidationError(f"state has trace {np.trace(m).real:.15g}")
        lam_min = np.linalg.eigvalsh(m).min()
        if lam_min < -TOL_PSD:
            raise ValidationError(f"state has negative eigenvalue {lam_min:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def d(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def diagonal(cls, probs) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probs, dtype=complex)))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d, dtype=complex) / d)

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def spectrum(self) -> np.ndarray:
        """Eigenvalues in non-increasing order, clipped at zero."""
        return np.clip(np.linalg.eigvalsh(self.mat)[::-1], 0.0, None)

    def eigh_sorted(self) -> tuple[np.ndarray, np.ndarray]:
        """``(eigenvalues, eigenvectors)`` in non-increasing eigenvalue order."""
        w, v = np.linalg.eigh(self.mat)
        return w[::-1], v[:, ::-1]


def as_density(x) -> DensityMatrix:
    return x if isinstance(x, DensityMatrix) else DensityMatrix(x)


@dataclass(frozen=True, eq=False)
class Lindbladian:
    """Effective Hamiltonian plus Lindblad operators."""

    hamiltonian: np.ndarray
    lindblad_ops: tuple = ()

    def __post_init__(self):
        h = as_matrix(self.hamiltonian)
        d = h.shape[0]
        if hermiticity_error(h) > TOL_HERM * max(1.0, np.abs(h).max()):
            raise ValidationError("Hamiltonian is not Hermitian")
        ops = tuple(as_matrix(op, d) for op in self.lindblad_ops)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "lindblad_ops", ops)

    @classmethod
    def from_ops(cls, ops: Sequence[np.ndarray], hamiltonian=None) -> "Lindbladian":
        ops = [as_matrix(op) for op in ops]
        if hamiltonian is None:
            if not ops:
                raise ValidationError("need a Hamiltonian or at least one operator to fix d")
            hamiltonian = np.zeros_like(ops[0])
        return cls(hamiltonian, tuple(ops))

    @classmethod
    def zero(cls, d: int) -> "Lindbladian":
        return cls(np.zeros((d, d), dtype=complex), ())

    @property
    def d(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def ops(self) -> tuple:
        return self.lindblad_ops

    def with_hamiltonian(self, h: np.ndarray) -> "Lindbladian":
        return Lindbladian(h, self.lindblad_ops)

    def scaled(self, rate: float) -> "Lindbladian":
        """Same structure with every rate multiplied by ``rate``."""
        return Lindbladian(rate * self.hamiltonian, tuple(np.sqrt(rate) * op for op in self.ops))


def apply_lindbladian(lind: Lindbladian, x) -> np.ndarray:
    x = as_matrix(x, lind.d)
    h = lind.hamiltonian
    out = -1j * (h @ x - x @ h)
    for op in lind.ops:
        ldl = dagger(op) @ op
        out += op @ x @ dagger(op) - 0.5 * (ldl @ x + x @ ldl)
    return out


def unitality_defect(lind: Lindbladian) -> float:
    """``max |sum L^dag L - sum L L^dag|`` over entries."""
    acc = np.zeros((lind.d, lind.d), dtype=complex)
    for op in lind.ops:
        acc += dagger(op) @ op - op @ dagger(op)
    return float(np.max(np.abs(acc))) if acc.size else 0.0


def is_unital(lind: Lindbladian, tol: float = 1e-10) -> bool:
    scale = max([1.0] + [float(np.linalg.norm(op, 2)) ** 2 for op in lind.ops])
    return unitality_defect(lind) <= tol * scale


def to_superoperator(lind: Lindbladian) -> np.ndarray:
    d = lind.d
    eye = np.eye(d)
    h = lind.hamiltonian
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op in lind.ops:
        ldl = dagger(op) @ op
        sup += np.kron(op.conj(), op) - 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
    return sup


def hamiltonian_superoperator(h: np.ndarray) -> np.ndarray:
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def _finish_state(m: np.ndarray) -> DensityMatrix:
    m = 0.5 * (m + dagger(m))
    tr = np.trace(m).real
    if abs(tr - 1.0) <= 1e-10:
        m = m / tr
    return DensityMatrix(m)


def propagator(lind: Lindbladian, t: float) -> np.ndarray:
    """``exp(t L)`` as a ``d^2 x d^2`` matrix."""
    if t < 0:
        raise InvalidTime(f"negative time {t}")
    return la.expm(t * to_superoperator(lind))


def propagate(lind: Lindbladian, rho, t: float) -> DensityMatrix:
    if t < 0:
        raise InvalidTime(f"negative time {t}")
    rho = as_density(rho)
    if rho.d != lind.d:
        raise DimensionMismatch(f"state is {rho.d}-dimensional, Lindbladian {lind.d}")
    if t == 0:
        return rho
    out = la.expm(t * to_superoperator(lind)) @ vec(rho.mat)
    return _finish_state(unvec(out, lind.d))


def heisenberg_weyl(d: int) -> list[np.ndarray]:
    """The ``d^2`` clock-and-shift unitaries ``X^a Z^b``."""
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    ops = []
    for a in range(d):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(d):
            ops.append(xa @ np.linalg.matrix_power(clock, b))
    return ops


def depolarizing(d: int, rate: float = 1.0) -> Lindbladian:
    """Generator of ``X -> Tr(X) I/d - X`` (times ``rate``).

    Operators are the Heisenberg-Weyl unitaries normalized in Hilbert-Schmidt
    norm and scaled by ``1/sqrt(d)``, i.e. ``W/d``.
    """
    if d < 2:
        raise ValidationError("depolarizing Lindbladian needs d >= 2")
    ops = tuple(np.sqrt(rate) * w / d for w in heisenberg_weyl(d))
    return Lindbladian(np.zeros((d, d), dtype=complex), ops)


def depolarizing_closed_form(x: np.ndarray) -> np.ndarray:
    d = x.shape[0]
    return np.trace(x) * np.eye(d) / d - x


def is_depolarizing(lind: Lindbladian, tol: float = 1e-10) -> bool:
    """Whether the generator equals ``X -> Tr(X) I/d - X`` as a superoperator."""
    d = lind.d
    target = np.outer(vec(np.eye(d)), vec(np.eye(d))) / d - np.eye(d * d)
    return float(np.max(np.abs(to_superoperator(lind) - target))) <= tol


def spectral_gap(lind: Lindbladian, tol: float = 1e-9) -> float:
    """Smallest nonzero decay rate ``|Re mu|`` of the superoperator."""
    rates = -np.linalg.eigvals(to_superoperator(lind)).real
    nonzero = rates[rates > tol]
    if nonzero.size == 0:
        raise ZeroLindbladian("generator has no decaying modes")
    return float(nonzero.min())


def relaxation_time(lind: Lindbladian, eps: float = 1e-8) -> float:
    """Time after which every decaying mode is suppressed below ``eps``."""
    return float(np.log(1.0 / eps) / spectral_gap(lind))


@dataclass(frozen=True, eq=False)
class DephasingStructure:
    """Orthogonal projectors onto the joint eigenspaces of the operators.

    ``basis`` has the eigenspaces as contiguous column groups, in the order
    of ``blocks``.
    """

    projectors: tuple
    basis: np.ndarray
    blocks: tuple

    @property
    def ranks(self) -> list[int]:
        return [len(b) for b in self.blocks]

    def block_of(self) -> np.ndarray:
        """Block label for each basis column."""
        labels = np.empty(self.basis.shape[1], dtype=int)
        for k, idx in enumerate(self.blocks):
            labels[list(idx)] = k
        return labels

    def dephase(self, x: np.ndarray) -> np.ndarray:
        return sum(p @ x @ p for p in self.projectors)


def _hermitian_parts(ops: Sequence[np.ndarray]) -> list[np.ndarray]:
    parts = []
    for op in ops:
        parts.append(0.5 * (op + dagger(op)))
        parts.append(-0.5j * (op - dagger(op)))
    return parts


def joint_eigenspaces(hermitians: Sequence[np.ndarray], d: int, tol: float) -> list[np.ndarray]:
    """Split C^d into common eigenspaces of commuting Hermitian matrices.

    Refines one matrix at a time: each current subspace is split by the
    eigenvalue clusters of the next matrix compressed onto it.
    """
    spaces = [np.eye(d, dtype=complex)]
    for h in hermitians:
        scale = max(1.0, float(np.abs(h).max()))
        refined = []
        for v in spaces:
            w, u = np.linalg.eigh(dagger(v) @ h @ v)
            start = 0
            for k in range(1, len(w) + 1):
                if k == len(w) or w[k] - w[k - 1] > tol * scale:
                    refined.append(v @ u[:, start:k])
                    start = k
        spaces = refined
    return spaces


def classify_dephasing(lind: Lindbladian, tol: float = 1e-8) -> DephasingStructure | None:
    """Return the dephasing projectors if the given operators are a commuting
    normal family (and the Hamiltonian acts as a scalar on each joint
    eigenspace); otherwise ``None``.

    Only the representation at hand is inspected, so a dephasing generator
    written with non-commuting operators is reported as ``None``.
    """
    d = lind.d
    ops = [op for op in lind.ops if np.abs(op).max() > 0]
    h = lind.hamiltonian
    if not ops and np.abs(h).max() == 0:
        raise ZeroLindbladian("all Lindblad operators and the Hamiltonian vanish")
    scale = max([1.0] + [float(np.abs(op).max()) for op in ops] + [float(np.abs(h).max())])
    atol = tol * scale * scale

    def comm(a, b):
        return float(np.abs(a @ b - b @ a).max())

    for a in ops:
        if comm(a, dagger(a)) > atol:
            return None
        if comm(a, h) > atol:
            return None
    for k, a in enumerate(ops):
        for b in ops[k + 1:]:
            if comm(a, b) > atol:
                return None

    spaces = joint_eigenspaces(_hermitian_parts(ops), d, tol=1e-6)
    # a Hamiltonian that splits a dissipation-free eigenspace would rotate,
    # not kill, the coherences there
    for v in spaces:
        hv = dagger(v) @ h @ v
        if np.abs(hv - np.trace(hv) / hv.shape[0] * np.eye(hv.shape[0])).max() > tol * scale:
            return None
    basis = np.hstack(spaces)
    projectors, blocks, start = [], [], 0
    for v in spaces:
        projectors.append(v @ dagger(v))
        blocks.append(tuple(range(start, start + v.shape[1])))
        start += v.shape[1]
    return DephasingStructure(tuple(projectors), basis, tuple(blocks))
