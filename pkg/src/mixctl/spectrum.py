"""Classical generators of the eigenvalue flow at a prescribed eigenbasis.

If the eigenbasis of the state is held at the columns ``|i>`` of a basis
``B``, its eigenvalues obey ``dlambda/dt = Q lambda`` with

    X_ij = sum_a |<i|L_a|j>|^2,      Q_ij = X_ij - delta_ij sum_k X_kj.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .errors import DimensionMismatch, InvalidTime, NonpositiveRate, SOutOfRange, ValidationError
from .lindblad import dagger
from .majorization import ProbVector, as_prob


def check_basis(b, tol: float = 1e-10) -> np.ndarray:
    b = np.asarray(b, dtype=complex)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValidationError("basis must be a square matrix")
    err = np.abs(dagger(b) @ b - np.eye(b.shape[0])).max()
    if err > tol:
        raise ValidationError(f"basis columns are not orthonormal (error {err:.2e})")
    return b


def x_matrix(ops: Sequence[np.ndarray], basis) -> np.ndarray:
    b = check_basis(basis)
    d = b.shape[0]
    x = np.zeros((d, d))
    for op in ops:
        op = np.asarray(op, dtype=complex)
        if op.shape != (d, d):
            raise DimensionMismatch(f"operator shape {op.shape} does not match basis dimension {d}")
        x += np.abs(dagger(b) @ op @ b) ** 2
    return x


@dataclass(frozen=True, eq=False)
class QGenerator:
    entries: np.ndarray
    bistochastic: bool

    def __post_init__(self):
        q = np.array(self.entries, dtype=float)
        off = q - np.diag(np.diag(q))
        if off.min() < -1e-12:
            raise ValidationError("negative off-diagonal rate")
        if np.abs(q.sum(axis=0)).max() > 1e-10 * max(1.0, np.abs(q).max()):
            raise ValidationError("columns of a generator must sum to zero")
        q.setflags(write=False)
        object.__setattr__(self, "entries", q)

    @classmethod
    def from_matrix(cls, q) -> "QGenerator":
        q = np.asarray(q, dtype=float)
        rows_ok = np.abs(q.sum(axis=1)).max() <= 1e-10 * max(1.0, np.abs(q).max())
        return cls(q, bool(rows_ok))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def stochastic_matrix(self, t: float) -> np.ndarray:
        if t < 0:
            raise InvalidTime(f"negative time {t}")
        return la.expm(t * self.entries)


def q_from_x(x: np.ndarray) -> np.ndarray:
    return x - np.diag(x.sum(axis=0))


def q_matrix(ops: Sequence[np.ndarray], basis) -> QGenerator:
    return QGenerator.from_matrix(q_from_x(x_matrix(ops, basis)))


def evolve_spectrum(q: QGenerator, lambda0, t: float) -> ProbVector:
    if t < 0:
        raise InvalidTime(f"negative time {t}")
    lam = as_prob(lambda0)
    if lam.d != q.d:
        raise DimensionMismatch(f"spectrum has {lam.d} entries, generator is {q.d}x{q.d}")
    out = q.stochastic_matrix(t) @ lam.entries
    out = np.clip(out, 0.0, None)
    return ProbVector(out / out.sum())


def ttransform_from_hold(gamma: float, t: float) -> float:
    """Weight ``s(t) = (1 - exp(-2 gamma t)) / 2`` reached by holding a
    two-level generator of rate ``gamma`` for time ``t``."""
    if gamma <= 0:
        raise NonpositiveRate(f"rate must be positive, got {gamma}")
    if t < 0:
        raise InvalidTime(f"negative time {t}")
    return float(-0.5 * np.expm1(-2.0 * gamma * t))


def hold_duration(gamma: float, s: float) -> float:
    """Inverse of :func:`ttransform_from_hold`: time needed to reach ``s < 1/2``."""
    if gamma <= 0:
        raise NonpositiveRate(f"rate must be positive, got {gamma}")
    if not (0.0 <= s < 0.5):
        raise SOutOfRange(f"s={s} outside [0, 1/2)")
    return float(-np.log1p(-2.0 * s) / (2.0 * gamma))
