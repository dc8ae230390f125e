"""Majorization of probability vectors.

Decision of the preorder, T-transforms (two-level mixings), bistochastic
witnesses and the constructive decomposition of ``p > q`` into at most
``d - 1`` T-transforms.

Conventions
-----------
A :class:`PermutationMap` with ``image`` acts on vectors as
``(P v)[k] = v[image[k]]``, i.e. ``image`` is the argsort that produces the
permuted vector. A chain of T-transforms is a list applied left to right:
``chain[0]`` acts first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import TOL_NEG, TOL_SUM
from .errors import DimensionMismatch, MajorizationViolated, ValidationError

# differences below this are treated as exact matches inside the decomposition
_MATCH_EPS = 1e-14


@dataclass(frozen=True, eq=False)
class ProbVector:
    """A discrete probability distribution, e.g. the spectrum of a state."""

    entries: np.ndarray
    tol_neg: float = field(default=TOL_NEG, repr=False)
    tol_sum: float = field(default=TOL_SUM, repr=False)

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float).reshape(-1).copy()
        if arr.size < 1:
            raise ValidationError("probability vector must have at least one entry")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("probability vector has non-finite entries")
        if arr.min() < -self.tol_neg:
            raise ValidationError(f"negative entry {arr.min():.3e} below -{self.tol_neg:g}")
        arr = np.clip(arr, 0.0, None)
        if abs(arr.sum() - 1.0) > self.tol_sum:
            raise ValidationError(f"entries sum to {arr.sum():.15g}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def d(self) -> int:
        return self.entries.size

    def __len__(self):
        return self.entries.size

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ProbVector):
            return NotImplemented
        return self.d == other.d and bool(np.array_equal(self.entries, other.entries))

    def tolist(self) -> list[float]:
        return self.entries.tolist()


def as_prob(p, tol_neg: float = TOL_NEG, tol_sum: float = TOL_SUM) -> ProbVector:
    if isinstance(p, ProbVector):
        return p
    return ProbVector(np.asarray(p, dtype=float), tol_neg=tol_neg, tol_sum=tol_sum)


@dataclass(frozen=True)
class TTransform:
    """Mixing of levels ``i`` and ``j`` with weight ``s``:

    ``p'_i = (1-s) p_i + s p_j`` and ``p'_j = s p_i + (1-s) p_j``.
    """

    i: int
    j: int
    s: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValidationError("T-transform needs two distinct levels")
        if self.i < 0 or self.j < 0:
            raise ValidationError("level indices must be nonnegative")
        if not (0.0 <= self.s <= 1.0):
            raise ValidationError(f"T-transform weight s={self.s} outside [0, 1]")

    def matrix(self, d: int) -> np.ndarray:
        if max(self.i, self.j) >= d:
            raise IndexError(f"levels ({self.i}, {self.j}) out of range for d={d}")
        m = np.eye(d)
        m[self.i, self.i] = m[self.j, self.j] = 1.0 - self.s
        m[self.i, self.j] = m[self.j, self.i] = self.s
        return m

    def to_dict(self) -> dict:
        return {"i": int(self.i), "j": int(self.j), "s": float(self.s)}

    @classmethod
    def from_dict(cls, data: dict) -> "TTransform":
        return cls(int(data["i"]), int(data["j"]), float(data["s"]))


@dataclass(frozen=True, eq=False)
class PermutationMap:
    image: tuple

    def __post_init__(self):
        image = tuple(int(k) for k in self.image)
        if sorted(image) != list(range(len(image))):
            raise ValidationError(f"{image} is not a permutation of 0..{len(image) - 1}")
        object.__setattr__(self, "image", image)

    def __eq__(self, other):
        return isinstance(other, PermutationMap) and self.image == other.image

    def __hash__(self):
        return hash(self.image)

    @classmethod
    def identity(cls, d: int) -> "PermutationMap":
        return cls(tuple(range(d)))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "PermutationMap":
        m = np.asarray(m)
        return cls(tuple(int(k) for k in np.argmax(m, axis=1)))

    @property
    def d(self) -> int:
        return len(self.image)

    def is_identity(self) -> bool:
        return self.image == tuple(range(self.d))

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.d, self.d))
        m[np.arange(self.d), list(self.image)] = 1.0
        return m

    def apply(self, v) -> np.ndarray:
        return np.asarray(v)[list(self.image)]

    def inverse(self) -> "PermutationMap":
        return PermutationMap(tuple(int(k) for k in np.argsort(self.image)))

    def compose(self, first: "PermutationMap") -> "PermutationMap":
        """Return the map ``self . first`` (``first`` acts first)."""
        return PermutationMap(tuple(first.image[k] for k in self.image))


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Column-stochastic matrix, optionally also row-stochastic."""

    entries: np.ndarray
    kind: str = "bistochastic"
    tol_neg: float = field(default=TOL_NEG, repr=False)
    tol_sum: float = field(default=TOL_SUM, repr=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("stochastic matrix must be square")
        if self.kind not in ("stochastic", "bistochastic"):
            raise ValidationError(f"unknown kind {self.kind!r}")
        if m.min() < -self.tol_neg:
            raise ValidationError(f"negative entry {m.min():.3e}")
        if np.max(np.abs(m.sum(axis=0) - 1.0)) > self.tol_sum:
            raise ValidationError("columns do not sum to 1")
        if self.kind == "bistochastic" and np.max(np.abs(m.sum(axis=1) - 1.0)) > self.tol_sum:
            raise ValidationError("rows do not sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)


def is_bistochastic(m, tol: float = TOL_SUM) -> bool:
    m = np.asarray(m, dtype=float)
    return bool(
        m.min() >= -tol
        and np.max(np.abs(m.sum(axis=0) - 1.0)) <= tol
        and np.max(np.abs(m.sum(axis=1) - 1.0)) <= tol
    )


def sort_descending(p) -> tuple[ProbVector, PermutationMap]:
    """Sort ``p`` into non-increasing order, ties kept in original index order.

    Returns the sorted vector and the permutation ``perm`` with
    ``sorted = perm.apply(p)``.
    """
    p = as_prob(p)
    order = np.argsort(-p.entries, kind="stable")
    return ProbVector(p.entries[order]), PermutationMap(tuple(order))


def prefix_gaps(p, q) -> np.ndarray:
    """Differences of the sorted prefix sums, ``sum_{i<=k} p_i - q_i`` for k=1..d."""
    p, q = as_prob(p), as_prob(q)
    if p.d != q.d:
        raise DimensionMismatch(f"dimensions differ: {p.d} vs {q.d}")
    ps = np.sort(p.entries)[::-1]
    qs = np.sort(q.entries)[::-1]
    return np.cumsum(ps) - np.cumsum(qs)


def first_failing_prefix(p, q, tol: float = TOL_SUM) -> int | None:
    """Index k (0-based) of the first prefix sum where ``p`` falls below ``q``."""
    gaps = prefix_gaps(p, q)
    bad = np.nonzero(gaps[:-1] < -tol)[0]
    return int(bad[0]) if bad.size else None


def majorizes(p, q, tol: float = TOL_SUM) -> bool:
    """True iff ``p`` majorizes ``q`` (``q`` is more mixed) up to ``tol``."""
    return first_failing_prefix(p, q, tol) is None


def apply_ttransform(t: TTransform, p) -> ProbVector:
    p = as_prob(p)
    if max(t.i, t.j) >= p.d:
        raise IndexError(f"levels ({t.i}, {t.j}) out of range for d={p.d}")
    out = p.entries.copy()
    pi, pj = out[t.i], out[t.j]
    out[t.i] = (1.0 - t.s) * pi + t.s * pj
    out[t.j] = t.s * pi + (1.0 - t.s) * pj
    return ProbVector(out)


def apply_chain(chain: Iterable[TTransform], p) -> np.ndarray:
    """Apply a chain (first element first) to a raw vector, no validation."""
    v = np.array(p, dtype=float)
    for t in chain:
        vi, vj = v[t.i], v[t.j]
        v[t.i] = (1.0 - t.s) * vi + t.s * vj
        v[t.j] = t.s * vi + (1.0 - t.s) * vj
    return v


def chain_matrix(chain: Sequence[TTransform], d: int) -> np.ndarray:
    m = np.eye(d)
    for t in chain:
        m = t.matrix(d) @ m
    return m


def decompose_into_ttransforms(p, q, tol: float = TOL_SUM) -> list[TTransform]:
    """Chain of at most ``d - 1`` T-transforms taking ``sort(p)`` to ``sort(q)``.

    Both vectors are sorted in non-increasing order first; the chain acts on
    those sorted representatives. Each step takes the largest index ``k``
    where the working vector still exceeds the target and the smallest
    ``l > k`` where it falls short, and mixes just enough to close one of the
    two gaps exactly. Every step therefore fixes at least one coordinate for
    good and keeps the working vector sorted.
    """
    p, q = as_prob(p), as_prob(q)
    if p.d != q.d:
        raise DimensionMismatch(f"dimensions differ: {p.d} vs {q.d}")
    fail = first_failing_prefix(p, q, tol)
    if fail is not None:
        raise MajorizationViolated(f"prefix sum {fail + 1} of p is below that of q")

    w = np.sort(p.entries)[::-1].copy()
    target = np.sort(q.entries)[::-1]
    chain: list[TTransform] = []
    for _ in range(p.d):
        diff = w - target
        above = np.nonzero(diff > _MATCH_EPS)[0]
        if above.size == 0:
            break
        k = int(above[-1])
        below = np.nonzero(diff[k + 1:] < -_MATCH_EPS)[0]
        if below.size == 0:
            break
        l = k + 1 + int(below[0])
        delta = min(diff[k], -diff[l])
        s = float(min(delta / (w[k] - w[l]), 0.5))
        chain.append(TTransform(k, l, s))
        wk, wl = w[k], w[l]
        w[k] = (1.0 - s) * wk + s * wl
        w[l] = s * wk + (1.0 - s) * wl
        # pin whichever coordinate the step was meant to close
        if diff[k] <= -diff[l]:
            w[k] = target[k]
        else:
            w[l] = target[l]
    return chain


def normalize_half_interval(
    chain: Sequence[TTransform], d: int | None = None
) -> tuple[list[TTransform], PermutationMap]:
    """Rewrite a chain so that every weight lies in ``[0, 1/2]``.

    Uses ``T_ij(1-s) = P_ij T_ij(s)`` and moves the transpositions to the
    first-applied end with ``P T_ab P^-1 = T_{pi(a) pi(b)}``. Returns
    ``(new_chain, perm)`` such that applying ``perm`` and then ``new_chain``
    equals applying the original chain.
    """
    chain = list(chain)
    needed = max((max(t.i, t.j) + 1 for t in chain), default=1)
    d = needed if d is None else d
    if d < needed:
        raise IndexError(f"chain touches level {needed - 1} but d={d}")
    # sigma[a] = where level a is sent by the accumulated permutation R
    sigma = list(range(d))
    rewritten: list[TTransform] = []
    for t in reversed(chain):
        i, j = sigma[t.i], sigma[t.j]
        s = t.s
        if s > 0.5:
            s = 1.0 - s
            # R <- P_ij R
            sigma = [j if x == i else i if x == j else x for x in sigma]
        rewritten.append(TTransform(i, j, s))
    rewritten.reverse()
    # R e_a = e_sigma[a]  =>  (R v)[sigma[a]] = v[a]
    image = [0] * d
    for a, target in enumerate(sigma):
        image[target] = a
    return rewritten, PermutationMap(tuple(image))


def pad_permutation(perm: PermutationMap, d: int) -> PermutationMap:
    if perm.d >= d:
        return perm
    return PermutationMap(perm.image + tuple(range(perm.d, d)))


def birkhoff_witness(p, q, tol: float = TOL_SUM) -> StochasticMatrix:
    """Explicit bistochastic ``M`` with ``M p = q``.

    Built as ``P_q^T . T_k ... T_1 . P_p`` from the sorting permutations and
    the T-transform chain between the sorted vectors.
    """
    p, q = as_prob(p), as_prob(q)
    chain = decompose_into_ttransforms(p, q, tol)
    _, perm_p = sort_descending(p)
    _, perm_q = sort_descending(q)
    m = perm_q.matrix().T @ chain_matrix(chain, p.d) @ perm_p.matrix()
    return StochasticMatrix(m, "bistochastic")
