import numpy as np
import pytest

from mixctl.ensembles import (
    random_conversion_pair,
    random_density,
    random_dephasing,
    random_planted,
    random_unital,
    random_unitary,
)
from mixctl.errors import MajorizationViolated, NotDephasing, NotOptimal, SOutOfRange
from mixctl.lindblad import PAULI_X, DensityMatrix, Lindbladian, dagger, depolarizing
from mixctl.majorization import majorizes
from mixctl.protocols import (
    ConversionPlan,
    HoldBasis,
    InstantUnitary,
    NoSynthesisRoute,
    _routing,
    depolarizing_reachable,
    schur_horn_unitary,
    synthesize_conversion,
    synthesize_depolarizing_conversion,
    synthesize_dephasing_conversion,
    synthesize_ttransform_step,
)


def _populations(plan_steps, lind, rho):
    """Exact spectrum flow: unitaries conjugate, holds act by exp(Qt) in their basis."""
    from mixctl.spectrum import evolve_spectrum, q_matrix

    mat = rho.mat
    for step in plan_steps:
        if isinstance(step, InstantUnitary):
            mat = step.u @ mat @ dagger(step.u)
        else:
            b = step.basis
            lam = np.real(np.diag(dagger(b) @ mat @ b))
            lam = evolve_spectrum(q_matrix(lind.ops, b), lam, step.duration).entries
            mat = b @ np.diag(lam) @ dagger(b)
    return mat


def _sigma_x(gamma):
    return Lindbladian.from_ops([np.sqrt(gamma) * PAULI_X])


def test_routing_permutation():
    for d, src, dst in [(4, (2, 3), (0, 1)), (3, (0, 2), (0, 2)), (5, (1, 0), (0, 1)), (4, (3, 0), (1, 2))]:
        perm = _routing(d, src, dst)
        assert perm.image[dst[0]] == src[0] and perm.image[dst[1]] == src[1]
        assert sorted(perm.image) == list(range(d))


def test_ttransform_step_zero_and_two_level():
    gamma = 0.6
    lind = _sigma_x(gamma)
    steps = synthesize_ttransform_step(lind, np.eye(2), (0, 1), (0, 1), 0.0)
    assert [type(s) for s in steps] == [InstantUnitary, HoldBasis, InstantUnitary]
    assert steps[1].duration == 0.0
    steps = synthesize_ttransform_step(lind, np.eye(2), (0, 1), (0, 1), 0.25)
    assert steps[1].duration == pytest.approx(np.log(2) / (2 * gamma), rel=1e-14)
    with pytest.raises(SOutOfRange):
        synthesize_ttransform_step(lind, np.eye(2), (0, 1), (0, 1), 0.5)


def test_ttransform_step_case_ii_hadamard():
    lind = Lindbladian.from_ops([np.diag([1.0, 2.0, 3.0]).astype(complex)])
    steps = synthesize_ttransform_step(lind, np.eye(3), (0, 1), (0, 2), 0.3)
    hold = steps[1]
    h = np.eye(3, dtype=complex)
    h[np.ix_([0, 2], [0, 2])] = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(hold.basis, h, atol=1e-15)
    # gamma = |1-3|^2 / 4 = 1
    assert hold.duration == pytest.approx(-np.log(1 - 0.6) / 2, rel=1e-14)
    lam = np.array([0.5, 0.3, 0.2])
    out = np.real(np.diag(_populations(steps, lind, DensityMatrix.diagonal(lam))))
    np.testing.assert_allclose(out, [0.7 * 0.5 + 0.3 * 0.2, 0.3, 0.3 * 0.5 + 0.7 * 0.2], atol=1e-12)


def test_ttransform_step_routes_arbitrary_pair(rng):
    lind = random_planted(rng, 5, rotate=False)
    lam = rng.dirichlet(np.ones(5))
    for target in [(2, 4), (4, 1), (0, 3)]:
        steps = synthesize_ttransform_step(lind, np.eye(5), (0, 1), target, 0.2)
        out = np.real(np.diag(_populations(steps, lind, DensityMatrix.diagonal(lam))))
        i, j = target
        expected = lam.copy()
        expected[i], expected[j] = 0.8 * lam[i] + 0.2 * lam[j], 0.2 * lam[i] + 0.8 * lam[j]
        np.testing.assert_allclose(out, expected, atol=1e-12)


def test_conversion_two_level_example():
    gamma = 1.0
    lind = _sigma_x(gamma)
    plan = synthesize_conversion(lind, DensityMatrix.diagonal([0.8, 0.2]), DensityMatrix.diagonal([0.7, 0.3]))
    assert len(plan.holds) == 1
    assert plan.holds[0].annotation.s == pytest.approx(1 / 6, abs=1e-14)
    assert plan.holds[0].duration == pytest.approx(-np.log(1 - 1 / 3) / 2, rel=1e-12)


def test_conversion_equal_spectra_is_unitary_only(rng):
    lind = random_planted(rng, 4)
    rho = random_density(rng, 4)
    u = random_unitary(rng, 4)
    plan = synthesize_conversion(lind, rho, DensityMatrix(u @ rho.mat @ dagger(u)))
    assert plan.total_duration() == 0.0
    assert len(plan.unitaries) == 1


@pytest.mark.parametrize("kind", ["planted", "dephasing"])
def test_conversion_reaches_target(rng, kind):
    for _ in range(10):
        d = int(rng.integers(2, 6))
        lind = random_planted(rng, d) if kind == "planted" and d > 2 else random_dephasing(rng, d)
        rho, sigma = random_conversion_pair(rng, d)
        plan = synthesize_conversion(lind, rho, sigma)
        assert len(plan.holds) <= d - 1
        assert len(plan.unitaries) <= d + 1
        final = _populations(plan.steps, lind, rho)
        np.testing.assert_allclose(final, sigma.mat, atol=d * 1e-7)
        mu = sigma.spectrum()
        assert np.abs(plan.predicted_spectrum(rho.spectrum()) - mu).sum() <= d * 1e-8 + 1e-8


def test_conversion_errors(rng):
    with pytest.raises(NotOptimal):
        synthesize_conversion(depolarizing(3), random_density(rng, 3), DensityMatrix.maximally_mixed(3))
    lind = random_planted(rng, 3)
    with pytest.raises(MajorizationViolated):
        synthesize_conversion(lind, DensityMatrix.maximally_mixed(3), DensityMatrix.diagonal([1, 0, 0]))


def test_schur_horn_examples(rng):
    u = schur_horn_unitary(DensityMatrix.diagonal([1.0, 0.0]), [0.5, 0.5])
    np.testing.assert_allclose(np.abs(u), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-12)
    rho = random_density(rng, 4)
    lam = rho.spectrum()
    u = schur_horn_unitary(rho, lam)
    np.testing.assert_allclose(np.real(np.diag(u @ rho.mat @ dagger(u))), lam, atol=1e-12)


def test_schur_horn_random(rng):
    for _ in range(50):
        d = int(rng.integers(2, 9))
        rho = random_density(rng, d, alpha=0.5)
        target = rng.permutation(np.sort(rng.dirichlet(np.ones(d))))
        if not majorizes(rho.spectrum(), target):
            target = np.full(d, 1 / d)
        u = schur_horn_unitary(rho, target)
        np.testing.assert_allclose(dagger(u) @ u, np.eye(d), atol=1e-10)
        np.testing.assert_allclose(np.diag(u @ rho.mat @ dagger(u)), target, atol=1e-10)


def test_schur_horn_rejects_unreachable():
    with pytest.raises(MajorizationViolated):
        schur_horn_unitary(DensityMatrix.diagonal([0.5, 0.5]), [0.9, 0.1])


def test_dephasing_rank_one_single_hold(rng):
    lind = random_dephasing(rng, 4)
    rho, sigma = random_conversion_pair(rng, 4)
    plan = synthesize_dephasing_conversion(lind, rho, sigma)
    assert len(plan.holds) == 1 and not plan.holds[0].steered
    assert isinstance(plan.steps[0], InstantUnitary) and isinstance(plan.steps[-1], InstantUnitary)


def test_dephasing_rank_two_loops(rng):
    from mixctl.lindblad import propagate

    lind = random_dephasing(rng, 4, ranks=[2, 2])
    rho, sigma = random_conversion_pair(rng, 4)
    plan = synthesize_dephasing_conversion(lind, rho, sigma)
    assert len(plan.holds) >= 2
    state = rho
    for step in plan.steps:
        if isinstance(step, InstantUnitary):
            state = DensityMatrix(step.u @ state.mat @ dagger(step.u))
        else:
            state = propagate(lind, state, step.duration)
    np.testing.assert_allclose(state.mat, sigma.mat, atol=1e-6)


def test_dephasing_already_diagonal(rng):
    lind = random_dephasing(rng, 3, rotate=False)
    rho = DensityMatrix.diagonal([0.2, 0.5, 0.3])
    sigma = DensityMatrix.diagonal([0.5, 0.3, 0.2])
    plan = synthesize_dephasing_conversion(lind, rho, sigma)
    assert len(plan.steps) == 1 and isinstance(plan.steps[0], InstantUnitary)


def test_dephasing_errors(rng):
    with pytest.raises(NotDephasing):
        synthesize_dephasing_conversion(depolarizing(3), random_density(rng, 3), DensityMatrix.maximally_mixed(3))
    with pytest.raises(MajorizationViolated):
        synthesize_dephasing_conversion(
            random_dephasing(rng, 3), DensityMatrix.maximally_mixed(3), DensityMatrix.diagonal([1, 0, 0])
        )


def test_depolarizing_reachable_examples(rng):
    rho = random_density(rng, 3)
    u = random_unitary(rng, 3)
    assert depolarizing_reachable(rho, DensityMatrix(u @ rho.mat @ dagger(u))) == pytest.approx(1.0, abs=1e-8)
    assert depolarizing_reachable(rho, DensityMatrix.maximally_mixed(3)) == pytest.approx(0.0, abs=1e-8)
    rho = DensityMatrix.diagonal([0.6, 0.3, 0.1])
    sigma = DensityMatrix.diagonal([0.5, 0.3, 0.2])
    assert majorizes(rho.spectrum(), sigma.spectrum())
    assert depolarizing_reachable(rho, sigma) is None
    lam = rho.spectrum()
    s = 0.37
    assert depolarizing_reachable(rho, DensityMatrix.diagonal(s * lam + (1 - s) / 3)) == pytest.approx(s)


def test_depolarizing_reachable_implies_majorization(rng):
    for _ in range(50):
        d = int(rng.integers(2, 6))
        rho = random_density(rng, d)
        s = rng.uniform()
        sigma = DensityMatrix.diagonal(s * rho.spectrum() + (1 - s) / d)
        assert depolarizing_reachable(rho, sigma) is not None
        assert majorizes(rho.spectrum(), sigma.spectrum(), 1e-10)


def test_depolarizing_plan(rng):
    from mixctl.lindblad import propagate

    lind = depolarizing(3)
    rho = random_density(rng, 3)
    s = 0.4
    u = random_unitary(rng, 3)
    sigma = DensityMatrix(u @ np.diag(s * rho.spectrum() + (1 - s) / 3) @ dagger(u))
    plan = synthesize_depolarizing_conversion(lind, rho, sigma)
    state = DensityMatrix(plan.steps[0].u @ rho.mat @ dagger(plan.steps[0].u))
    state = propagate(lind, state, plan.steps[1].duration)
    np.testing.assert_allclose(state.mat, sigma.mat, atol=1e-10)
    with pytest.raises(NoSynthesisRoute):
        synthesize_depolarizing_conversion(lind, DensityMatrix.diagonal([0.6, 0.3, 0.1]), DensityMatrix.diagonal([0.5, 0.3, 0.2]))
    with pytest.raises(NoSynthesisRoute):
        synthesize_depolarizing_conversion(random_unital(rng, 3), rho, sigma)


def test_plan_json_roundtrip(rng):
    from mixctl.io import dumps

    lind = random_planted(rng, 4)
    rho, sigma = random_conversion_pair(rng, 4)
    plan = synthesize_conversion(lind, rho, sigma)
    data = plan.to_dict()
    assert "lindbladian_hash" in data["provenance"]
    again = ConversionPlan.from_dict(data)
    assert dumps(again.to_dict()) == dumps(data)
    assert all(type(a) is type(b) for a, b in zip(plan.steps, again.steps))


def test_synthesis_deterministic(rng):
    from mixctl.io import dumps

    lind = random_planted(rng, 4)
    rho, sigma = random_conversion_pair(rng, 4)
    a = synthesize_conversion(lind, rho, sigma).to_dict()
    b = synthesize_conversion(lind, rho, sigma).to_dict()
    assert dumps(a) == dumps(b)
