"""Decide whether a unital Lindbladian can realize every majorization-allowed
conversion, i.e. whether its operators can be written as ``M_a (+) D_a``
(one shared 2x2 block plus a diagonal remainder) in a common orthonormal
basis.

The search works on the *-algebra ``A`` generated by the operators. ``A`` is a
finite-dimensional C*-algebra, so up to a unitary change of basis it is a
direct sum of full matrix algebras ``M_n`` each repeated ``m`` times. The form
exists iff every irreducible block has ``n <= 2`` and the 2-dimensional
blocks occur at most once in total. A basis realizing it is read off from
the eigenspaces of a random Hermitian element of the commutant ``A'``, and is
always checked explicitly before being returned.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lindblad import Lindbladian, dagger, is_unital

RANK_TOL = 1e-9
DEFAULT_TRIALS = 16


@dataclass(frozen=True)
class OptimalityVerdict:
    status: str  # "optimal" | "not_optimal" | "unknown"
    basis: np.ndarray | None = field(default=None, compare=False)
    pair: tuple | None = None
    residual: float = float("nan")
    reason: str = ""

    def to_dict(self, include_basis: bool = True) -> dict:
        from .io import matrix_to_json

        out = {
            "status": self.status,
            "pair": list(self.pair) if self.pair is not None else None,
            "residual": None if np.isnan(self.residual) else float(self.residual),
            "reason": self.reason,
        }
        if include_basis and self.basis is not None:
            out["basis"] = matrix_to_json(self.basis)
        return out


def _scale(ops: Sequence[np.ndarray]) -> float:
    return max([1.0] + [float(np.abs(op).max()) for op in ops])


def form_residual(ops: Sequence[np.ndarray], basis: np.ndarray, pair: tuple[int, int]) -> float:
    """Largest entry that must vanish for ``M (+) D`` with the block on ``pair``."""
    i, j = pair
    if i == j:
        raise ValueError("pair needs two distinct levels")
    d = basis.shape[0]
    if not (0 <= i < d and 0 <= j < d):
        raise IndexError(f"pair {pair} out of range for d={d}")
    mask = ~np.eye(d, dtype=bool)
    mask[i, j] = mask[j, i] = False
    res = 0.0
    for op in ops:
        rotated = dagger(basis) @ np.asarray(op) @ basis
        if mask.any():
            res = max(res, float(np.abs(rotated[mask]).max()))
    return res


def check_form_in_basis(
    ops: Sequence[np.ndarray], basis: np.ndarray, pair: tuple[int, int], tol: float = 1e-8
) -> tuple[bool, float]:
    res = form_residual(ops, np.asarray(basis, dtype=complex), pair)
    return res <= tol, res


def _generators(ops: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Operators and their adjoints, normalized, with scalar parts removed."""
    gens = []
    for op in ops:
        op = np.asarray(op, dtype=complex)
        d = op.shape[0]
        op = op - np.trace(op) / d * np.eye(d)
        nrm = np.linalg.norm(op)
        if nrm > RANK_TOL:
            gens.append(op / nrm)
            gens.append(dagger(op) / nrm)
    return gens


def _orthonormal_span(vectors: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (rows) of the row span."""
    if vectors.shape[0] == 0:
        return vectors
    u, s, vh = np.linalg.svd(vectors, full_matrices=False)
    keep = s > tol * max(1.0, s[0])
    return vh[keep]


def _null_space(a: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of ``a``."""
    _, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vh[rank:].conj().T


def star_algebra(ops: Sequence[np.ndarray], tol: float = RANK_TOL) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) basis of the unital *-algebra generated by ``ops``."""
    ops = [np.asarray(op, dtype=complex) for op in ops]
    d = ops[0].shape[0]
    gens = _generators(ops)
    basis = _orthonormal_span(np.array([np.eye(d).ravel()] + [g.ravel() for g in gens]), tol)
    frontier = [g for g in gens]
    while frontier:
        candidates = [(g @ f).ravel() for g in gens for f in frontier]
        if not candidates:
            break
        cand = np.array(candidates)
        # strip components already in the span, keep what is new
        resid = cand - (cand @ basis.conj().T) @ basis
        new = _orthonormal_span(resid, tol)
        if new.shape[0] == 0:
            break
        basis = _orthonormal_span(np.vstack([basis, new]), tol)
        frontier = [row.reshape(d, d) for row in new]
        if basis.shape[0] >= d * d:
            break
    return [row.reshape(d, d) for row in basis]


def commutant(ops: Sequence[np.ndarray], tol: float = RANK_TOL) -> list[np.ndarray]:
    """Basis of ``{X : [X, L] = [X, L^dag] = 0 for all L}``."""
    ops = [np.asarray(op, dtype=complex) for op in ops]
    d = ops[0].shape[0]
    eye = np.eye(d)
    gens = _generators(ops)
    if not gens:
        return [e.reshape(d, d, order="F") for e in np.eye(d * d, dtype=complex)]
    # vec(XG - GX) = (G^T kron I - I kron G) vec(X)
    system = np.vstack([np.kron(g.T, eye) - np.kron(eye, g) for g in gens])
    kernel = _null_space(system, tol)
    return [kernel[:, k].reshape(d, d, order="F") for k in range(kernel.shape[1])]


def center(algebra: Sequence[np.ndarray], ops: Sequence[np.ndarray], tol: float = RANK_TOL) -> list[np.ndarray]:
    gens = _generators(ops)
    if not gens:
        return list(algebra)
    cols = []
    for a in algebra:
        cols.append(np.concatenate([(a @ g - g @ a).ravel() for g in gens]))
    kernel = _null_space(np.array(cols).T, tol)
    return [sum(c * a for c, a in zip(kernel[:, k], algebra)) for k in range(kernel.shape[1])]


def _random_hermitian_element(rng: np.random.Generator, elements: Sequence[np.ndarray]) -> np.ndarray:
    coeffs = rng.normal(size=len(elements)) + 1j * rng.normal(size=len(elements))
    x = sum(c * e for c, e in zip(coeffs, elements))
    return 0.5 * (x + dagger(x))


def _eigenspaces(h: np.ndarray, rel_tol: float = 1e-6) -> list[np.ndarray]:
    w, v = np.linalg.eigh(h)
    scale = max(1e-300, float(np.abs(w).max()))
    spaces, start = [], 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > rel_tol * scale:
            spaces.append(v[:, start:k])
            start = k
    return spaces


def _rank(mats: Sequence[np.ndarray], tol: float = RANK_TOL) -> int:
    if not mats:
        return 0
    return _orthonormal_span(np.array([m.ravel() for m in mats]), tol).shape[0]


@dataclass(frozen=True)
class AlgebraBlock:
    """One isotypic component: ``M_n`` acting with multiplicity ``m``."""

    n: int
    m: int


def algebra_structure(
    ops: Sequence[np.ndarray], rng: np.random.Generator | None = None, attempts: int = 4
) -> list[AlgebraBlock] | None:
    """Isotypic decomposition of the generated *-algebra, or ``None`` if the
    numerics did not settle (every component must check out as a factor)."""
    rng = np.random.default_rng(0) if rng is None else rng
    algebra = star_algebra(ops)
    z = center(algebra, ops)
    for _ in range(attempts):
        spaces = _eigenspaces(_random_hermitian_element(rng, z)) if len(z) > 1 else [np.eye(ops[0].shape[0])]
        blocks = []
        for v in spaces:
            p = v @ dagger(v)
            if _rank([p @ c @ p for c in z]) != 1:
                break  # two central components merged by accident
            dim = _rank([p @ a @ p for a in algebra])
            n = int(round(np.sqrt(dim)))
            rank = v.shape[1]
            if n * n != dim or rank % n:
                break
            blocks.append(AlgebraBlock(n, rank // n))
        else:
            return blocks
    return None


def structure_obstruction(blocks: Sequence[AlgebraBlock]) -> str | None:
    """Reason the form is impossible, or ``None`` if the structure admits it."""
    big = [b for b in blocks if b.n >= 3]
    if big:
        return f"irreducible block of dimension {big[0].n} mixes three or more levels"
    twos = sum(b.m for b in blocks if b.n == 2)
    if twos >= 2:
        return f"{twos} two-dimensional irreducible blocks; at most one fits"
    return None


def find_optimal_basis(
    ops: Sequence[np.ndarray], trials: int = DEFAULT_TRIALS, tol: float = 1e-8, seed: int = 0
) -> tuple[np.ndarray, tuple[int, int]] | None:
    """Search for a basis where every operator is ``M (+) D``.

    Each trial splits C^d into eigenspaces of a random Hermitian commutant
    element, puts the one 2-dimensional non-scalar piece (if any) on levels
    (0, 1), and verifies the candidate. Returns the first verified
    ``(basis, pair)``, or ``None``.
    """
    ops = [np.asarray(op, dtype=complex) for op in ops]
    d = ops[0].shape[0]
    atol = tol * _scale(ops)
    comm = commutant(ops)
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        spaces = _eigenspaces(_random_hermitian_element(rng, comm))
        block, singles, ok = None, [], True
        for v in spaces:
            if v.shape[1] == 1 or _acts_as_scalars(ops, v, atol):
                singles.extend(v[:, k:k + 1] for k in range(v.shape[1]))
            elif v.shape[1] == 2 and block is None:
                block = v
            else:
                ok = False
                break
        if not ok:
            continue
        cols = ([block] if block is not None else []) + singles
        basis = np.hstack(cols)
        pairs = [(0, 1)] + [(i, j) for i in range(d) for j in range(i + 1, d) if (i, j) != (0, 1)]
        for pair in pairs:
            good, _ = check_form_in_basis(ops, basis, pair, atol)
            if good:
                return basis, pair
    return None


def _acts_as_scalars(ops, v, atol) -> bool:
    for op in ops:
        c = dagger(v) @ op @ v
        if np.abs(c - np.trace(c) / c.shape[0] * np.eye(c.shape[0])).max() > atol:
            return False
        # the subspace must also be invariant
        if np.abs(op @ v - v @ c).max() > atol:
            return False
    return True


def dissipator_is_zero(lind: Lindbladian, tol: float = 1e-12) -> bool:
    """True when every operator is a multiple of the identity."""
    d = lind.d
    for op in lind.ops:
        if np.abs(op - np.trace(op) / d * np.eye(d)).max() > tol * _scale([op]):
            return False
    return True


def is_optimal(
    lind: Lindbladian, trials: int = DEFAULT_TRIALS, seed: int = 0, tol: float = 1e-8
) -> OptimalityVerdict:
    if not is_unital(lind):
        return OptimalityVerdict("not_optimal", reason="not unital")
    if dissipator_is_zero(lind):
        return OptimalityVerdict("not_optimal", reason="dissipator vanishes")
    ops = [np.asarray(op) for op in lind.ops]
    d = lind.d
    if d == 2:
        basis = np.eye(2, dtype=complex)
        return OptimalityVerdict("optimal", basis, (0, 1), 0.0, reason="d = 2")

    blocks = algebra_structure(ops, np.random.default_rng([seed, 1 << 16]))
    if blocks is not None:
        why = structure_obstruction(blocks)
        if why is not None:
            return OptimalityVerdict("not_optimal", reason=why)

    found = find_optimal_basis(ops, trials=trials, tol=tol, seed=seed)
    if found is not None:
        basis, pair = found
        res = form_residual(ops, basis, pair)
        return OptimalityVerdict("optimal", basis, pair, res, reason="verified basis")
    reason = "search failed" if blocks is not None else "algebra structure inconclusive"
    return OptimalityVerdict("unknown", reason=reason)
