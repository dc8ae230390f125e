import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from mixctl.ensembles import random_lindbladian, random_unital, random_unitary
from mixctl.errors import InvalidTime, NonpositiveRate, SOutOfRange
from mixctl.lindblad import PAULI_X, depolarizing, is_unital
from mixctl.majorization import is_bistochastic, majorizes
from mixctl.spectrum import (
    QGenerator,
    evolve_spectrum,
    hold_duration,
    q_matrix,
    ttransform_from_hold,
    x_matrix,
)


def test_x_matrix_examples(rng):
    b = random_unitary(rng, 3)
    np.testing.assert_allclose(x_matrix([np.eye(3)], b), np.eye(3), atol=1e-12)
    gamma = 0.4
    np.testing.assert_allclose(x_matrix([np.sqrt(gamma) * PAULI_X], np.eye(2)), [[0, gamma], [gamma, 0]], atol=1e-15)
    a, c = 0.3 + 1j, -2.0
    np.testing.assert_allclose(x_matrix([np.diag([a, c])], np.eye(2)), np.diag([abs(a) ** 2, abs(c) ** 2]))


def test_q_matrix_examples(rng):
    gamma = 0.4
    q = q_matrix([np.sqrt(gamma) * PAULI_X], np.eye(2))
    np.testing.assert_allclose(q.entries, [[-gamma, gamma], [gamma, -gamma]], atol=1e-15)
    assert q.bistochastic
    assert np.all(q_matrix([np.eye(3)], np.eye(3)).entries == 0)
    for d in (2, 3, 4):
        q = q_matrix(depolarizing(d).ops, random_unitary(rng, d))
        np.testing.assert_allclose(q.entries, np.ones((d, d)) / d - np.eye(d), atol=1e-12)


def _eigenvalue_flow_oracle(lind, basis, lam):
    """d<i|rho|i>/dt straight from the Lindblad form, rho = B diag(lam) B^dag."""
    from mixctl.lindblad import apply_lindbladian

    rho = basis @ np.diag(lam) @ basis.conj().T
    drho = apply_lindbladian(lind, rho)
    return np.real(np.diag(basis.conj().T @ drho @ basis))


def test_q_matrix_reproduces_population_flow(rng):
    for d in (2, 3, 4):
        lind = random_lindbladian(rng, d, with_h=False)
        b = random_unitary(rng, d)
        lam = rng.dirichlet(np.ones(d))
        q = q_matrix(lind.ops, b)
        np.testing.assert_allclose(q.entries @ lam, _eigenvalue_flow_oracle(lind, b, lam), atol=1e-12)


@settings(max_examples=50)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_q_matrix_is_stochastic_generator(d, n_ops, seed):
    rng = np.random.default_rng(seed)
    lind = random_lindbladian(rng, d, n_ops=n_ops)
    q = q_matrix(lind.ops, random_unitary(rng, d)).entries
    off = q - np.diag(np.diag(q))
    assert off.min() >= -1e-12
    np.testing.assert_allclose(q.sum(axis=0), 0, atol=1e-10)


@settings(max_examples=50)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_unital_gives_bistochastic_generator(d, seed):
    rng = np.random.default_rng(seed)
    lind = random_unital(rng, d)
    assert is_unital(lind)
    q = q_matrix(lind.ops, random_unitary(rng, d))
    assert q.bistochastic
    np.testing.assert_allclose(q.entries.sum(axis=1), 0, atol=1e-10)
    for t in (0.1, 1.0, 10.0):
        assert is_bistochastic(q.stochastic_matrix(t), tol=1e-10)
    lam = rng.dirichlet(np.full(d, 0.4))
    assert majorizes(lam, evolve_spectrum(q, lam, rng.uniform(0, 5)), tol=1e-8)


def test_stochastic_generator_exponential(rng):
    lind = random_lindbladian(rng, 3)
    q = q_matrix(lind.ops, random_unitary(rng, 3))
    for t in (0.1, 1.0, 10.0):
        m = q.stochastic_matrix(t)
        assert m.min() >= -1e-12
        np.testing.assert_allclose(m.sum(axis=0), 1, atol=1e-10)


def test_evolve_spectrum_examples(rng):
    gamma = 0.8
    q = QGenerator.from_matrix([[-gamma, gamma], [gamma, -gamma]])
    lam0 = [0.6, 0.4]
    assert evolve_spectrum(q, lam0, 0.0).tolist() == pytest.approx(lam0, abs=1e-15)
    for t in (0.1, 1.0, 5.0):
        s = 0.5 * (1 - np.exp(-2 * gamma * t))
        np.testing.assert_allclose(evolve_spectrum(q, [1, 0], t).entries, [1 - s, s], atol=1e-12)
    for d in (3, 4):
        qd = q_matrix(depolarizing(d).ops, np.eye(d))
        lam = rng.dirichlet(np.ones(d))
        t = 0.7
        np.testing.assert_allclose(
            evolve_spectrum(qd, lam, t).entries, np.exp(-t) * lam + (1 - np.exp(-t)) / d, atol=1e-12
        )
    with pytest.raises(InvalidTime):
        evolve_spectrum(q, lam0, -1)


def test_two_level_parametrization_matches_expm():
    # exp(Qt) has diagonal (1 + e^{-2 gamma t})/2, i.e. 1 - s with s = (1 - e^{-2 gamma t})/2
    gamma, t = 1.3, 0.4
    m = la.expm(t * np.array([[-gamma, gamma], [gamma, -gamma]]))
    s = ttransform_from_hold(gamma, t)
    np.testing.assert_allclose(m, [[1 - s, s], [s, 1 - s]], atol=1e-14)


def test_ttransform_from_hold_examples():
    assert ttransform_from_hold(2.0, 0.0) == 0.0
    assert ttransform_from_hold(1.0, np.log(10) / 2) == pytest.approx(0.45, abs=1e-15)
    values = [ttransform_from_hold(1.0, t) for t in (1, 2, 5, 10, 20)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(NonpositiveRate):
        ttransform_from_hold(0.0, 1.0)


def test_hold_duration_inverts():
    gamma = 0.7
    assert hold_duration(gamma, 0.25) == pytest.approx(np.log(2) / (2 * gamma))
    for s in (0.0, 0.1, 0.4999):
        assert ttransform_from_hold(gamma, hold_duration(gamma, s)) == pytest.approx(s, abs=1e-14)
    with pytest.raises(SOutOfRange):
        hold_duration(gamma, 0.5)
