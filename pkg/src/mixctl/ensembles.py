"""Random instances: states, unitaries and Lindbladians of known structure."""
from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .lindblad import DensityMatrix, Lindbladian, dagger
from .majorization import TTransform, apply_chain


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng)


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + dagger(a))


def random_density(rng: np.random.Generator, d: int, alpha: float = 1.0) -> DensityMatrix:
    """Random full-rank state with Dirichlet(alpha) spectrum in a Haar basis."""
    lam = rng.dirichlet(np.full(d, alpha))
    u = random_unitary(rng, d)
    return DensityMatrix(u @ np.diag(lam) @ dagger(u))


def random_mixing(rng: np.random.Generator, d: int, n_steps: int | None = None) -> list[TTransform]:
    n_steps = d if n_steps is None else n_steps
    chain = []
    for _ in range(n_steps):
        i, j = rng.choice(d, size=2, replace=False)
        chain.append(TTransform(int(i), int(j), float(rng.uniform())))
    return chain


def random_majorized_state(rng: np.random.Generator, rho: DensityMatrix) -> DensityMatrix:
    """A state whose spectrum is a random bistochastic image of ``rho``'s."""
    lam = apply_chain(random_mixing(rng, rho.d), rho.spectrum())
    lam = np.clip(lam, 0, None)
    lam /= lam.sum()
    u = random_unitary(rng, rho.d)
    return DensityMatrix(u @ np.diag(lam) @ dagger(u))


def random_conversion_pair(rng: np.random.Generator, d: int) -> tuple[DensityMatrix, DensityMatrix]:
    rho = random_density(rng, d, alpha=0.5)
    return rho, random_majorized_state(rng, rho)


def random_dephasing(
    rng: np.random.Generator, d: int, n_ops: int = 2, ranks: list[int] | None = None, rotate: bool = True
) -> Lindbladian:
    """Commuting normal operators, diagonal in a (random) basis.

    ``ranks`` groups levels into blocks on which every operator is a scalar.
    """
    ranks = [1] * d if ranks is None else list(ranks)
    if sum(ranks) != d:
        raise ValueError("ranks must sum to d")
    v = random_unitary(rng, d) if rotate else np.eye(d)
    ops = []
    for _ in range(n_ops):
        vals = rng.normal(size=len(ranks)) + 1j * rng.normal(size=len(ranks))
        diag = np.repeat(vals, ranks)
        ops.append(v @ np.diag(diag) @ dagger(v))
    return Lindbladian.from_ops(ops)


def random_planted(rng: np.random.Generator, d: int, n_ops: int = 2, rotate: bool = True) -> Lindbladian:
    """Unital operators of the form ``V (M (+) D) V^dag``.

    Each ``M`` is a random normal 2x2 block (so the family is unital) and
    each ``D`` a random complex diagonal.
    """
    v = random_unitary(rng, d) if rotate else np.eye(d)
    ops = []
    for _ in range(n_ops):
        w = random_unitary(rng, 2)
        m = w @ np.diag(rng.normal(size=2) + 1j * rng.normal(size=2)) @ dagger(w)
        op = np.zeros((d, d), dtype=complex)
        op[:2, :2] = m
        op[2:, 2:] = np.diag(rng.normal(size=d - 2) + 1j * rng.normal(size=d - 2))
        ops.append(v @ op @ dagger(v))
    return Lindbladian.from_ops(ops)


def random_unital(rng: np.random.Generator, d: int, n_ops: int = 2) -> Lindbladian:
    """Hermitian operators, hence unital; generically of no special form."""
    return Lindbladian.from_ops([random_hermitian(rng, d) for _ in range(n_ops)])


def random_lindbladian(rng: np.random.Generator, d: int, n_ops: int = 2, with_h: bool = True) -> Lindbladian:
    """Generic (typically non-unital) Lindbladian."""
    ops = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(n_ops)]
    h = random_hermitian(rng, d) if with_h else np.zeros((d, d), dtype=complex)
    return Lindbladian(h, tuple(0.5 * op for op in ops))


def amplitude_damping(d: int = 2, rate: float = 1.0) -> Lindbladian:
    """Decay ``|1> -> |0>``; not unital."""
    op = np.zeros((d, d), dtype=complex)
    op[0, 1] = np.sqrt(rate)
    return Lindbladian.from_ops([op])
