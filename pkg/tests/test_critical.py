import itertools

import numpy as np
import pytest

from dmf_landscape import Problem
from dmf_landscape.critical import (
    CriticalSpec,
    InvalidSpec,
    balancedness_residual,
    canonical_dressing,
    construct,
    enumerate_specs,
    global_specs,
    random_dressing,
    validate_spec,
)
from dmf_landscape.model import grad_F, grad_G, stack_norm
from dmf_landscape.scalar import root_profile

from conftest import random_problem, random_stack

X_UNDER_2 = 0.5436890126920764
X_BAR_3 = 1.30748610096198


def diag_problem(y, L=3, lam=1.0, dims=None):
    dims = dims or (len(y),) * (L + 1)
    return Problem.from_singular_values(dims, [lam ** (1 / L)] * L, y)


def test_validate_examples():
    p = diag_problem([2.0, 1.0])
    assert validate_spec(p, CriticalSpec([0.0, 0.0], [0, 1]))
    assert validate_spec(p, CriticalSpec([1.0, 0.0], [0, 1]))
    bad = validate_spec(p, CriticalSpec([1.0, 0.0], [1, 0]))
    assert not bad and bad.index == 0 and bad.field == "sigma"


@pytest.mark.parametrize("sigma,pi,field", [
    ([0.0], [0, 1], "sigma"),
    ([0.0, 0.0], [0, 0], "pi"),
    ([0.0, 1.0], [1, 0], "sigma"),
    ([-1.0, 0.0], [0, 1], "sigma"),
])
def test_validate_reports_first_violation(sigma, pi, field):
    p = diag_problem([2.0, 1.0])
    rep = validate_spec(p, CriticalSpec(sigma, pi))
    assert not rep and rep.field == field


def test_construct_rejects_invalid_spec():
    p = diag_problem([2.0, 1.0])
    with pytest.raises(InvalidSpec):
        construct(p, CriticalSpec([1.0, 0.0], [1, 0]))


def test_zero_spec_gives_zero_stack(rng):
    p = random_problem(rng, L=4)
    spec = CriticalSpec(np.zeros(p.d_min), range(p.d_Y))
    for W in (construct(p, spec), construct(p, spec, random_dressing(p, 1))):
        assert all(not np.any(w) for w in W)


def test_canonical_example():
    p = Problem.from_singular_values((1, 1, 1, 1), [1, 1, 1], [2.0])
    W = construct(p, CriticalSpec([1.0], [0]))
    for w in W:
        np.testing.assert_array_equal(w, [[1.0]])
    assert stack_norm(grad_F(p, W)) <= 1e-12


def test_canonical_example_padded():
    p = Problem.from_singular_values((2, 3, 2, 3), [1, 1, 1], [2.0])
    W = construct(p, CriticalSpec([1.0, 0.0], [0, 1]))
    for w in W:
        expect = np.zeros(w.shape)
        expect[0, 0] = 1.0
        np.testing.assert_array_equal(w, expect)
    assert stack_norm(grad_F(p, W)) <= 1e-12


def test_dressings():
    p = random_problem(np.random.default_rng(5), L=4)
    c = canonical_dressing(p)
    assert c.orthogonality_residual() == 0.0
    d1, d2 = random_dressing(p, 42), random_dressing(p, 42)
    assert d1.orthogonality_residual() <= 1e-12
    for a, b in zip(d1.blocks(), d2.blocks()):
        np.testing.assert_array_equal(a, b)
    assert len(d1.Q) == p.depth - 1
    assert [o.shape[0] for o in d1.O] == list(p.spectrum.multiplicities)


@pytest.mark.parametrize("seed", range(50))
def test_random_dressing_stays_critical(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, max_dim=6)
    fam = enumerate_specs(p)
    spec = fam.specs[int(rng.integers(len(fam)))]
    tol = 1e-8 * (1 + np.linalg.norm(p.Y))
    d = random_dressing(p, seed)
    WG = construct(p, spec, d, "G")
    WF = construct(p, spec, d, "F")
    assert stack_norm(grad_G(p, WG)) <= tol * p.lam
    assert stack_norm(grad_F(p, WF)) <= tol
    assert balancedness_residual(WG) <= 1e-10
    # every G layer carries the singular values sigma
    for w in WG:
        sv = np.linalg.svd(w, compute_uv=False)[: p.d_min]
        np.testing.assert_allclose(sv, spec.sigma, atol=1e-10)


def test_F_coordinates_unbalanced_when_weights_differ():
    p = Problem.from_singular_values((2, 2, 2, 2), [0.2, 1.0, 3.0], [4.0, 3.0])
    spec = max(enumerate_specs(p).specs, key=lambda s: s.r_sigma)
    assert balancedness_residual(construct(p, spec, coord="G")) <= 1e-10
    assert balancedness_residual(construct(p, spec, coord="F")) > 1e-3


def test_balancedness_zero_and_generic(rng):
    p = random_problem(rng, L=3, max_dim=4)
    assert balancedness_residual([np.zeros(s) for s in p.shapes]) == 0.0
    assert balancedness_residual(random_stack(rng, p)) > 1e-3


def test_enumerate_zero_data():
    p = Problem((3, 3, 3, 3), [1, 1, 1], np.zeros((3, 3)))
    fam = enumerate_specs(p)
    assert len(fam) == 1 and not np.any(fam.specs[0].sigma) and fam.complete


def test_enumerate_single_value():
    p = diag_problem([2.0])
    sig = sorted(float(s.sigma[0]) for s in enumerate_specs(p))
    np.testing.assert_allclose(sig, [0.0, X_UNDER_2, 1.0], atol=1e-10)


def _brute_force_specs(p):
    """All (sorted sigma, y-multiset) pairs by trying every permutation and root choice."""
    keys = set()
    y = p.spectrum.y
    for perm in itertools.permutations(range(p.d_Y)):
        options = []
        for i in range(p.d_min):
            prof = root_profile(y[perm[i]], p.lam, p.depth)
            options.append([0.0] + [r for r, _ in prof.labelled_roots()])
        for combo in itertools.product(*options):
            if any(combo[i] < combo[i + 1] for i in range(len(combo) - 1)):
                continue
            support = tuple(sorted(
                (round(c, 9), round(float(y[perm[i]]), 9))
                for i, c in enumerate(combo) if c > 0))
            keys.add(support)
    return keys


@pytest.mark.parametrize("y,L", [
    ([3.0, 2.0, 1.0], 3),
    ([3.0, 3.0, 2.0], 3),
    ([4.0, 2.5], 4),
    ([5.0, 5.0, 5.0], 3),
    ([3.0, 2.0, 1.0], 2),
])
def test_enumeration_matches_brute_force(y, L):
    p = diag_problem(y, L)
    fam = enumerate_specs(p)
    got = set()
    for s in fam:
        assert validate_spec(p, s)
        ys = s.assigned_y(p)
        got.add(tuple(sorted((round(float(s.sigma[i]), 9), round(float(ys[i]), 9))
                             for i in range(s.r_sigma))))
    assert len(got) == len(fam), "duplicate specs"
    assert got == _brute_force_specs(p)


def test_enumeration_cap_reports_truncation():
    p = diag_problem([3.0, 2.5, 2.0, 1.9])
    fam = enumerate_specs(p, max_specs=5)
    assert len(fam) == 5 and not fam.complete
    assert enumerate_specs(p).complete


def test_two_layer_family_size():
    # each y above sqrt(lam) gives exactly one positive root, so the family is
    # every subset of those values that fits in d_min slots
    p = Problem.from_singular_values((3, 2, 3), [1.0, 1.0], [3.0, 2.0, 0.5])
    assert len(enumerate_specs(p)) == 1 + 2 + 1


def test_global_specs_examples():
    p2 = Problem.from_singular_values((1, 2, 1), [1.0, 1.0], [5.0])
    [s] = global_specs(p2)
    assert s.sigma[0] == 2.0
    [s3] = global_specs(diag_problem([3.0]))
    assert s3.sigma[0] == pytest.approx(X_BAR_3, abs=1e-10)
    ties = sorted(float(s.sigma[0]) for s in global_specs(diag_problem([2.0])))
    np.testing.assert_allclose(ties, [0.0, 1.0], atol=1e-12)


def test_global_specs_tie_expansion_keeps_sorted():
    # y = (2, 2) at L = 3, lam = 1: each slot may be 0 or 1 but sigma must be sorted
    p = diag_problem([2.0, 2.0])
    sig = sorted(tuple(s.sigma) for s in global_specs(p))
    assert len(sig) == 3
    np.testing.assert_allclose(sig, [(0, 0), (1, 0), (1, 1)], atol=1e-12)


def test_spec_json_round_trip():
    s = CriticalSpec([1.0, 0.0], [1, 0])
    t = CriticalSpec.from_dict(s.to_dict())
    np.testing.assert_array_equal(s.sigma, t.sigma)
    assert s.pi == t.pi
    with pytest.raises(ValueError):
        CriticalSpec.from_dict({"sigma": [1.0], "pi": [0], "bogus": 1})
