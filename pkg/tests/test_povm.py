import json

import numpy as np
import pytest

from bohmarrival import BackflowPair, PlaneWave, PreconditionError, Superposition, backflow_wavevectors
from bohmarrival.errors import GridMismatch
from bohmarrival.povm import (
    OperatorFamily,
    PointerModel,
    check_povm,
    construct_pointer_povm,
    current_povm_counterexample,
    gtz_sum_test,
    random_pointer_model,
)


def random_state(d, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


# pointer construction


def test_identity_coupling_gives_trivial_povm():
    phi = np.array([0.6, 0.8j])
    m = PointerModel(2, 2, np.eye(4), phi, [[0], [1]])
    fam = construct_pointer_povm(m)
    assert np.allclose(fam.members[0], 0.36 * np.eye(2))
    assert np.allclose(fam.members[1], 0.64 * np.eye(2))
    assert check_povm(fam).passed


def test_cnot_coupling_gives_projectors():
    cnot = np.eye(4)[[0, 1, 3, 2]]
    fam = construct_pointer_povm(PointerModel(2, 2, cnot, np.array([1.0, 0.0]), [[0], [1]]))
    assert np.allclose(fam.members[0], np.diag([1, 0]))
    assert np.allclose(fam.members[1], np.diag([0, 1]))


def test_povm_reproduces_pointer_statistics():
    m = random_pointer_model(3, 5, seed=11, n_cells=3)
    fam = construct_pointer_povm(m)
    for seed in range(5):
        psi = random_state(3, seed)
        assert np.allclose(fam.probabilities(psi), m.direct_probabilities(psi), atol=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_random_models_satisfy_axioms(seed):
    rng = np.random.default_rng(seed)
    dS, dM = int(rng.integers(1, 5)), int(rng.integers(1, 7))
    rep = check_povm(construct_pointer_povm(random_pointer_model(dS, dM, seed)))
    assert rep.passed, rep.failures


def test_scaled_family_fails_completeness_only():
    fam = construct_pointer_povm(random_pointer_model(2, 4, seed=3, n_cells=2))
    rep = check_povm(OperatorFamily([1.5 * m for m in fam.members]))
    assert rep.failures == ["completeness"]


def test_non_hermitian_and_negative_members_are_flagged():
    rep = check_povm(OperatorFamily([np.array([[1, 1], [0, 0]]), np.array([[0, -1], [0, 1]])]))
    assert "hermiticity" in rep.failures
    rep = check_povm(OperatorFamily([np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])]))
    assert rep.failures == ["positivity"]


def test_pointer_model_validation():
    with pytest.raises(PreconditionError):
        PointerModel(2, 2, 2 * np.eye(4), np.array([1.0, 0]), [[0], [1]])
    with pytest.raises(PreconditionError):
        PointerModel(2, 2, np.eye(4), np.array([1.0, 0]), [[0], [0, 1]])
    with pytest.raises(PreconditionError):
        PointerModel(2, 2, np.eye(4), np.array([1.0, 1.0]), [[0], [1]])


def test_family_json_round_trip():
    fam = construct_pointer_povm(random_pointer_model(2, 3, seed=5))
    back = OperatorFamily.from_json(json.dumps(fam.to_json()))
    assert back.labels == fam.labels
    for a, b in zip(fam.members, back.members):
        assert np.array_equal(a, b)


# current counterexample


def test_identical_components_have_no_defect():
    f = PlaneWave((0, 0, 2.0))
    rep = current_povm_counterexample(f, f, (0.1, 0, 0.3), 0.0)
    assert rep.signed_defect < 1e-12 and rep.absolute_defect < 1e-12


def test_backflow_breaks_additivity_of_absolute_current():
    k1, k2 = backflow_wavevectors()
    pair = BackflowPair(k1, k2)
    # the second component carries the backflow weight; its own current stays forward
    second = Superposition([(pair.alpha, PlaneWave(k2))])
    rep = current_povm_counterexample(PlaneWave(k1), second, np.zeros(3), 0.0)
    assert rep.signed_defect < 1e-12
    assert rep.backflow and rep.absolute_defect > 0.1


def test_forward_superposition_keeps_additivity():
    rep = current_povm_counterexample(PlaneWave((0, 0, 2.0)), PlaneWave((0.5, 0, 2.0)), np.zeros(3), 0.0)
    assert not rep.backflow and rep.absolute_defect < 1e-12


def test_counterexample_needs_forward_components():
    with pytest.raises(PreconditionError):
        current_povm_counterexample(PlaneWave((0, 0, 1.0)), PlaneWave((0, 0, -1.0)), np.zeros(3), 0.0)


# spin-basis sum


def test_sum_identity_on_equal_inputs():
    a = np.linspace(0, 1, 11)
    rep = gtz_sum_test({"+z": a, "-z": 2 * a, "+x": 2 * a, "-x": a}, tau=a)
    assert rep.max_deviation == 0.0


def test_sum_identity_is_symmetric_in_bases():
    rng = np.random.default_rng(0)
    d = {k: rng.random(20) for k in ("+z", "-z", "+x", "-x")}
    a = gtz_sum_test(d)
    b = gtz_sum_test(d, basis_a=("+x", "-x"), basis_b=("+z", "-z"))
    assert a.max_deviation == b.max_deviation


def test_sum_identity_rejects_mismatched_grids():
    d = {"+z": np.zeros(3), "-z": np.zeros(3), "+x": np.zeros(4), "-x": np.zeros(3)}
    with pytest.raises(GridMismatch):
        gtz_sum_test(d)
    with pytest.raises(PreconditionError):
        gtz_sum_test({"+z": np.zeros(3)})
