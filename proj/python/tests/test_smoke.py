import json
import math

import numpy as np
import pytest

import iml


def two_state():
    return iml.Model(m=np.array([1.0, 1.0]), L=np.array([[-1.0, 1.0], [1.0, -1.0]]))


def test_model_roundtrip():
    model = two_state()
    again = iml.Model.from_json(model.to_json())
    assert again.to_json() == model.to_json()
    assert model.conservative()


def test_detailed_balance_rejected():
    with pytest.raises(iml.ImlError):
        iml.Model(m=np.array([1.0, 1.0]), L=np.array([[-1.0, 2.0], [1.0, -1.0]]))


def test_spectrum_of_two_state_chain():
    spec = iml.Spectral(two_state())
    assert spec.eigenvalues == pytest.approx([0.0, 2.0], abs=1e-12)
    assert spec.lambda1() == pytest.approx(0.0, abs=1e-12)


def test_heat_kernel_and_survival():
    model = iml.example_two_state_killed()
    spec = iml.Spectral(model)
    p = spec.heat_kernel(0.7)
    assert np.allclose(p, p.T)
    assert 0.0 < spec.survival_probability(0, 0.7) < 1.0
    assert spec.log_survival_probability(0, 0.7) == pytest.approx(
        math.log(spec.survival_probability(0, 0.7)), abs=1e-12
    )


def test_gasket_sizes():
    assert iml.build_gasket_graph(0).size() == 3
    assert iml.build_gasket_graph(1).size() == 6


def test_simplex_integral_closed_form():
    assert iml.simplex_exp_integral([1.0, 2.0], 1.0) == pytest.approx(
        math.exp(-1) - math.exp(-2), rel=1e-12
    )
    assert iml.simplex_exp_integral([0.0, 0.0, 0.0], 2.0) == pytest.approx(2.0, rel=1e-12)


def test_counting_closed_form_matches_bruteforce():
    kwargs = dict(
        alphabet_size=2,
        p=1,
        s1_star=[0],
        s2_star=[1],
        f_prime=[[0, 1]],
        labels={0: [0], 1: [1]},
        A={(0,): 1, (1,): 1},
        r={(0,): 1},
    )
    count, witnesses = iml.enumerate_psi_bruteforce(**kwargs)
    assert count == 1
    assert iml.count_psi_closed_form(**kwargs) == count
    assert len(witnesses) == 1


def test_path_sampling_and_occupation():
    model = two_state()
    path = iml.sample_path(model, 0, 3.0, seed=7)
    assert path.survived
    occ = iml.occupation_measure(path, 2)
    assert sum(occ) == pytest.approx(3.0, abs=1e-12)


def test_moment_formula_positive():
    spec = iml.Spectral(iml.example_birth_death_killed())
    f = np.array([1.0, 0.6, 0.3])
    value = iml.mixed_moment_formula([spec, spec], [0, 0], f, t=1.0, k=1, m=1, eps=0.25)
    assert value > 0.0


def test_variational_solver_certified():
    spec = iml.Spectral(iml.example_two_state_killed())
    result = iml.variational_N(spec, theta=1.0, eps=0.0, h=np.ones(2), p=2, certify=True)
    assert result["certificate_gap"] <= 1e-6
    assert iml.variational_N(spec, 0.0, 0.0, np.ones(2), 2)["value"] == 0.0


def test_varadhan_identity():
    spec = iml.Spectral(iml.example_birth_death_killed())
    lhs, rhs, gap = iml.occupation_varadhan_check(spec, np.array([0.3, -0.2, 0.5]), 0.7, 0.1)
    assert gap <= 1e-7


def test_acceptance_json_shape():
    doc = json.loads(iml.run_acceptance(only=["survival"]))
    assert doc["criteria"][0]["status"] == "pass"
