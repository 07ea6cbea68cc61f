import json

import numpy as np
import pytest

from dmf_landscape import Problem, ProblemError
from dmf_landscape.problem import spectral_decompose

from conftest import haar


def test_lambda_product_cached():
    p = Problem((2, 3, 4), [0.5, 0.25], np.zeros((4, 2)))
    assert p.lam == pytest.approx(0.125, rel=1e-14)
    assert p.depth == 2 and p.d_Y == 2 and p.d_min == 2


@pytest.mark.parametrize("dims,lams,Y,field", [
    ((3,), [1.0], np.zeros((3, 3)), "dims"),
    ((2, 0, 2), [1.0, 1.0], np.zeros((2, 2)), "dims"),
    ((2, 2, 2), [1.0], np.zeros((2, 2)), "lambdas"),
    ((2, 2, 2), [1.0, -1.0], np.zeros((2, 2)), "lambdas"),
    ((2, 2, 3), [1.0, 1.0], np.zeros((2, 2)), "Y"),
    ((2, 2, 2), [1.0, 1.0], np.full((2, 2), np.nan), "Y"),
])
def test_validation_names_field(dims, lams, Y, field):
    with pytest.raises(ProblemError) as exc:
        Problem(dims, lams, Y)
    assert exc.value.field == field


def test_zero_matrix_spectrum():
    p = Problem((3, 3, 3), [1, 1], np.zeros((3, 3)))
    s = p.spectrum
    np.testing.assert_array_equal(s.y, [0, 0, 0])
    assert s.rank == 0 and s.n_groups == 0


def test_repeated_values_grouped():
    p = Problem((3, 3, 3), [1, 1], np.diag([5.0, 5.0, 2.0]))
    s = p.spectrum
    assert s.n_groups == 2 and s.multiplicities == (2, 1) and s.rank == 3


def test_grouping_threshold_is_relative_to_top_value():
    y = [10.0, 10.0 - 5e-9, 3.0]
    p = Problem.from_singular_values((3, 3, 3), [1, 1], y)
    assert p.spectrum.multiplicities == (2, 1)
    p2 = Problem.from_singular_values((3, 3, 3), [1, 1], y, group_tol=1e-12)
    assert p2.spectrum.multiplicities == (1, 1, 1)


def test_known_factorization_recovered():
    rng = np.random.default_rng(7)
    U, V = haar(rng, 4), haar(rng, 3)
    S = np.zeros((4, 3))
    S[[0, 1, 2], [0, 1, 2]] = [3.0, 2.0, 1.0]
    p = Problem((3, 2, 4), [1, 1], U @ S @ V.T)
    s = p.spectrum
    np.testing.assert_allclose(s.y, [3, 2, 1], atol=1e-10)
    recon = s.U @ s.sigma_matrix() @ s.V.T
    assert np.linalg.norm(recon - p.Y) <= 1e-10 * (1 + np.linalg.norm(p.Y))
    np.testing.assert_allclose(s.U.T @ s.U, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(s.V.T @ s.V, np.eye(3), atol=1e-12)


def test_sign_convention_deterministic():
    rng = np.random.default_rng(3)
    Y = rng.standard_normal((4, 4))
    s = spectral_decompose(Problem((4, 4, 4), [1, 1], Y))
    for i in range(4):
        col = s.U[:, i]
        assert col[np.argmax(np.abs(col))] > 0


def test_json_round_trip_dense_and_spectral():
    p = Problem.from_singular_values((2, 3, 3), [0.5, 2.0], [3.0, 1.0])
    q = Problem.from_json(json.dumps(p.to_dict()))
    np.testing.assert_array_equal(q.Y, p.Y)
    np.testing.assert_array_equal(q.lambdas, p.lambdas)
    doc = {"dims": [2, 3, 3], "lambdas": [0.5, 2.0], "Y": {"singular_values": [3.0, 1.0]}}
    np.testing.assert_array_equal(Problem.from_dict(doc).Y, p.Y)


@pytest.mark.parametrize("doc,field", [
    ({"dims": [2, 2], "lambdas": [1], "Y": {"dense": [[1, 0], [0, 1]]}, "extra": 1}, "extra"),
    ({"dims": [2, 2], "lambdas": [1]}, "Y"),
    ({"dims": [2, 2], "lambdas": [1], "Y": {"sparse": []}}, "Y"),
    ({"dims": [2, 2, 2], "lambdas": [1, 1], "Y": {"singular_values": [1, 2, 3]}}, "Y"),
])
def test_from_dict_rejects(doc, field):
    with pytest.raises(ProblemError) as exc:
        Problem.from_dict(doc)
    assert exc.value.field == field
