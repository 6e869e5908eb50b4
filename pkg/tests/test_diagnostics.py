import csv
import json

import numpy as np
import pytest

from boundary_lab.boundary import (
    Generator,
    boundary_system,
    feedback_growth_root,
    feedback_roots,
    perturbed_generator,
    restrict_generator,
)
from boundary_lab.diagnostics import (
    admissibility_control,
    admissibility_observation,
    admissibility_scan,
    compactness_profile,
    dump_json,
    norm_continuity_scan,
    numerical_rank,
    pazy_index,
    perturbation_difference_report,
    resolvent_decay_fit,
    resolvent_norm,
    riesz_condition_probe,
    skew_generator,
    write_rows,
    zero_class,
)
from boundary_lab.errors import BadExponent, GridMismatch, GridTooShort, MuBelowGrowthBound
from boundary_lab.semigroup import TimeGrid, semigroup_at

TAUS = [1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0]


@pytest.fixture(scope="module")
def scan50(heat50):
    s = boundary_system(heat50)
    return admissibility_scan(s.A, s.B, s.C, TAUS, 2.0, 200, seed=0)


def test_admissibility_constants_nondecreasing(scan50):
    assert np.all(np.diff(scan50.gamma) >= 0)
    assert np.all(np.diff(scan50.c) >= 0)
    assert np.all(scan50.gamma > 0) and np.all(scan50.c > 0)


def test_admissibility_shrink_respects_contraction_bound(scan50):
    # for a contraction semigroup gamma(1) <= sqrt(32) gamma(1/32)
    assert scan50.gamma[-1] / scan50.gamma[0] <= np.sqrt(32) + 1e-9
    assert scan50.c[-1] / scan50.c[0] <= np.sqrt(32) + 1e-9


def test_observation_constant_scalar_oracle():
    # |e^{-s} x|: int_0^tau e^{-2s} ds = (1 - e^{-2 tau}) / 2
    g = TimeGrid(1.0, 2000)
    got = admissibility_observation(np.array([[-1.0]]), [[1.0]], 1.0, 2.0, g)
    assert np.isclose(got, np.sqrt((1 - np.exp(-2)) / 2), rtol=1e-6)


def test_control_constant_scalar_oracle():
    # sup_{|u|_2 = 1} |int_0^1 e^{-(1-s)} u(s) ds| = |e^{-(1-.)}|_2
    g = TimeGrid(1.0, 2000)
    got = admissibility_control(np.array([[-1.0]]), [1.0], 1.0, 2.0, g)
    assert np.isclose(got, np.sqrt((1 - np.exp(-2)) / 2), rtol=1e-3)


def test_sampled_exponent_below_exact_supremum(heat20):
    s = boundary_system(heat20)
    g = TimeGrid(0.5, 100)
    sampled = admissibility_observation(s.A, s.C, 0.5, 3.0, g, samples=100, seed=3)
    again = admissibility_observation(s.A, s.C, 0.5, 3.0, g, samples=100, seed=3)
    assert sampled == again and sampled > 0


def test_admissibility_errors(heat20):
    s = boundary_system(heat20)
    with pytest.raises(BadExponent):
        admissibility_observation(s.A, s.C, 0.5, 1.0, TimeGrid(0.5, 10))
    with pytest.raises(GridMismatch):
        admissibility_control(s.A, s.B, 0.5, 2.0, TimeGrid(1.0, 10))
    assert admissibility_observation(s.A, np.zeros(20), 0.5, 2.0, TimeGrid(0.5, 10)) == 0.0


def test_zero_class_rule():
    assert zero_class(TAUS, [0.01, 0.2, 0.2, 0.2, 0.2, 0.2])
    assert not zero_class(TAUS, [0.1, 0.2, 0.2, 0.2, 0.2, 0.2])
    assert not zero_class([0.5, 1.0], [0.0, 1.0])


def test_resolvent_decay_slopes(heat100):
    s = boundary_system(heat100)
    lam = [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0]
    fb = resolvent_decay_fit(s.A, s.A.growth_bound, lam, B=s.B)
    fc = resolvent_decay_fit(s.A, s.A.growth_bound, lam, C=s.C)
    assert fb.slope <= -0.45 and fc.slope <= -0.45
    with pytest.raises(GridTooShort):
        resolvent_decay_fit(s.A, 0.0, [10.0, 20.0], B=s.B)
    with pytest.raises(ValueError):
        resolvent_decay_fit(s.A, 0.0, lam)


def test_resolvent_norm_normal_operator():
    g = Generator.from_diagonal([-1.0, -4.0])
    assert np.isclose(resolvent_norm(g, 1.0), 0.5)
    assert np.isclose(resolvent_norm(Generator(np.diag([-1.0, -4.0])), 1.0), 0.5)


def test_heat_scan_decays(heat50):
    A = restrict_generator(heat50)
    scan = norm_continuity_scan(A, 1.0, 1e3, 31)
    assert scan.decay_flag
    assert np.all(np.diff(scan.norms) <= 1e-12)
    assert scan.pazy_index < 0.1
    with pytest.raises(MuBelowGrowthBound):
        norm_continuity_scan(perturbed_generator(heat50), 0.5, 1e3)


def test_skew_control_fails_decay():
    g = skew_generator(2000)
    scan = norm_continuity_scan(g, 1.0, 1e3, 31)
    assert not scan.decay_flag
    assert pazy_index(g, 1.0, 1e3, 31) > 2


def test_closed_loop_resolvent_within_factor_two(heat50):
    A, Acl = restrict_generator(heat50), perturbed_generator(heat50)
    mu = Acl.growth_bound + 1
    a = norm_continuity_scan(A, mu, 1e3, 31).norms
    b = norm_continuity_scan(Acl, mu, 1e3, 31).norms
    assert np.all(b <= 2 * a)


def test_riesz_probe_monotone_and_seeded(heat20):
    A = restrict_generator(heat20)
    g = TimeGrid(1.0, 200)
    h = [0.2, 0.1, 0.05, 0.025]
    r1 = riesz_condition_probe(A, 1.0, 2.0, g, h, samples=20, seed=5)
    r2 = riesz_condition_probe(A, 1.0, 2.0, g, h, samples=20, seed=5)
    assert np.array_equal(r1, r2)
    assert np.all(np.diff(r1) < 0)


def test_riesz_probe_zero_generator_is_order_h2():
    g = TimeGrid(1.0, 400)
    r = riesz_condition_probe(np.zeros((3, 3)), 1.0, 2.0, g, [0.1, 0.05], samples=20, seed=0)
    assert r[1] < r[0]


def test_compactness_profile_heat(heat100):
    prof = compactness_profile(restrict_generator(heat100), 1.0)
    assert abs(prof.decay_ratio[0] / np.exp(-2) - 1) < 0.05
    assert np.all(np.diff(prof.sv) <= 0)


def test_numerical_rank():
    assert numerical_rank([1.0, 1e-3, 1e-12]) == 2
    assert numerical_rank([]) == 0
    assert numerical_rank([0.0, 0.0]) == 0


def test_perturbation_difference_rank_one(heat50):
    rep = perturbation_difference_report(heat50, 1.0, 2.0, [0.1, 0.05, 0.025])
    assert rep.rank == 1
    assert rep.resolvent_sv[1] < 1e-8 * rep.resolvent_sv[0]
    assert np.all(np.diff(rep.modulus) < 0)
    base = semigroup_at(perturbed_generator(heat50), 1.0) - semigroup_at(restrict_generator(heat50), 1.0)
    assert np.isclose(rep.semigroup_sv[0], np.linalg.norm(base, 2))


def test_output_helpers(tmp_path):
    path = write_rows(tmp_path / "t.csv", [{"a": 1, "b": 0.1}, {"a": 2, "b": 0.2}])
    rows = list(csv.reader(path.open()))
    assert rows == [["a", "b"], ["1", "0.1"], ["2", "0.2"]]
    j = dump_json(tmp_path / "x.json", {"z": 1 + 2j, "v": np.array([1.0, np.inf]), "f": np.bool_(True)})
    data = json.loads(j.read_text())
    assert data == {"f": True, "v": [1.0, None], "z": {"im": 2.0, "re": 1.0}}


def test_bounded_observation_scales_like_square_root(heat50):
    # a bounded C gives gamma(tau) <= |C| sqrt(tau), with equality as tau -> 0
    s = boundary_system(heat50)
    norm_c = np.linalg.norm(s.C)
    ratios = [admissibility_observation(s.A, s.C, tau, 2.0, TimeGrid(tau, 200)) / np.sqrt(tau) / norm_c
              for tau in (1e-6, 1e-4, 1e-2, 1.0)]
    assert np.all(np.array(ratios) <= 1 + 1e-9)
    assert np.all(np.diff(ratios) < 0)
    assert ratios[0] > 0.999


# worked examples --------------------------------------------------------------

def test_admissibility_constants_for_zero_generator():
    g = TimeGrid(0.25, 200)
    e1 = np.array([1.0, 0.0])
    assert np.isclose(admissibility_observation(np.zeros((2, 2)), e1, 0.25, 2.0, g), 0.5)
    assert np.isclose(admissibility_control(np.zeros((2, 2)), e1, 0.25, 2.0, g), 0.5, rtol=1e-3)
    assert admissibility_control(np.zeros((2, 2)), np.zeros(2), 0.25, 2.0, g) == 0.0


def test_resolvent_decay_examples(heat100):
    fit = resolvent_decay_fit(np.array([[-1.0]]), -1.0, [1.0, 3.0, 10.0, 30.0, 100.0], B=[1.0])
    assert np.isclose(fit.slope, -1.0)
    s = boundary_system(heat100)
    lam = [4.0 * 2**k for k in range(8)]
    assert resolvent_decay_fit(s.A, 0.0, lam, B=s.B).slope <= -0.45
    assert resolvent_decay_fit(s.A, 0.0, lam, C=s.C).slope <= -0.45


def test_self_adjoint_scan_matches_distance_oracle(heat100):
    A = restrict_generator(heat100)
    scan = norm_continuity_scan(A, 1.0, 1e3, 31)
    ev = A.eigenvalues
    oracle = np.array([1 / np.min(np.abs(1.0 + 1j * t - ev)) for t in scan.tau_grid])
    assert np.allclose(scan.norms, oracle, rtol=1e-10)
    assert np.allclose(scan.norms * scan.tau_grid, 1.0, rtol=0.5)


def test_skew_control_norms_do_not_decay():
    scan = norm_continuity_scan(skew_generator(2000), 1.0, 1e3, 31)
    assert scan.norms.min() > 0.5
    idx = [pazy_index(skew_generator(2 * int(t)), 1.0, t, 31) for t in (1e2, 1e3)]
    assert idx[1] > idx[0]


def test_closed_loop_pazy_within_twice_unperturbed(heat50):
    A, Acl = restrict_generator(heat50), perturbed_generator(heat50)
    mu = Acl.growth_bound + 1
    assert pazy_index(Acl, mu, 1e4) <= 2 * pazy_index(A, mu, 1e4)


def test_riesz_zero_generator_increment_bound():
    g = TimeGrid(1.0, 400)
    h = [0.1, 0.05]
    r = riesz_condition_probe(np.zeros((2, 2)), 1.0, 2.0, g, h, samples=20, seed=0)
    assert np.all(r <= 1.0 * np.array(h) ** (2 - 1) * np.array(h) + 1e-12)


def test_closed_loop_riesz_probe_decays(heat20):
    g = TimeGrid(1.0, 200)
    r = riesz_condition_probe(perturbed_generator(heat20), 1.0, 2.0, g, [0.2, 0.1, 0.05], samples=20)
    assert np.all(np.diff(r) < 0)


def test_compactness_examples(heat100):
    assert np.allclose(compactness_profile(np.zeros((4, 4)), 1.0).sv, 1.0)
    prof = compactness_profile(perturbed_generator(heat100), 1.0)
    mu = feedback_roots(4)
    nu = feedback_growth_root()
    expected = np.concatenate([[np.exp(-mu[0] ** 2 - nu**2)], np.exp(-(mu[1:] ** 2 - mu[:-1] ** 2))])
    assert np.allclose(prof.decay_ratio[:4], expected, rtol=0.1)


def test_perturbation_difference_examples(heat50):
    t0 = heat50.with_feedback(np.zeros_like(heat50.M))
    rep = perturbation_difference_report(t0, 0.5, 1.0, [0.1, 0.05])
    assert rep.semigroup_sv[0] <= 1e-12 and np.all(rep.modulus <= 1e-12) and rep.resolvent_sv[0] <= 1e-12
    rep = perturbation_difference_report(heat50, 0.5, 1.0, [0.1, 0.05, 0.025])
    assert rep.resolvent_sv[1] < 1e-8 * rep.resolvent_sv[0]
    assert np.all(np.diff(rep.modulus) < 0)
