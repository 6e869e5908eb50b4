import csv

import numpy as np
import pytest
import scipy.linalg

from boundary_lab.boundary import (
    Generator,
    boundary_system,
    perturbed_generator,
    restrict_generator,
)
from boundary_lab.errors import GridMismatch, NegativeTime, ValidationError
from boundary_lab.semigroup import (
    SignalSamples,
    TimeGrid,
    control_map,
    feedback_wellposed_check,
    input_output_map,
    io_matrix,
    laplace_transform,
    observation_map,
    regularity_probe,
    semigroup_at,
    transfer_function,
    transfer_function_state_space,
    vcf_residual,
)


def test_time_grid():
    g = TimeGrid(2.0, 4)
    assert g.dt == 0.5
    assert np.allclose(g.times, [0, 0.5, 1, 1.5, 2])
    assert np.isclose(g.trapezoid_weights().sum(), 2.0)
    with pytest.raises(ValidationError):
        TimeGrid(0.0, 4)
    with pytest.raises(ValidationError):
        TimeGrid(1.0, 1)


def test_semigroup_identity_and_law(heat20):
    A = restrict_generator(heat20)
    assert np.allclose(semigroup_at(A, 0.0), np.eye(20))
    lhs = semigroup_at(A, 0.3) @ semigroup_at(A, 0.4)
    assert np.allclose(lhs, semigroup_at(A, 0.7), atol=1e-12)
    ref = scipy.linalg.expm(0.7 * A.matrix)
    assert np.allclose(semigroup_at(A, 0.7), ref, atol=1e-12)
    with pytest.raises(NegativeTime):
        semigroup_at(A, -1.0)


def test_diagonal_semigroup_fast_path():
    g = Generator.from_diagonal([-1.0, 1j])
    assert np.allclose(semigroup_at(g, 2.0), np.diag(np.exp([-2.0, 2j])))


def test_unperturbed_semigroup_is_contraction(heat50):
    A = restrict_generator(heat50)
    T = semigroup_at(A, 0.5)
    assert np.isclose(np.linalg.norm(T, 2), np.exp(0.5 * A.growth_bound), rtol=1e-10)
    assert np.linalg.norm(T, 2) < 1


def test_control_map_scalar_closed_form():
    # x' = -x + u, u = 1: x(t) = 1 - e^{-t}
    g = TimeGrid(1.0, 400)
    x = control_map(np.array([[-1.0]]), [1.0], SignalSamples.constant(g))
    assert abs(x[0] - (1 - np.exp(-1))) < 1e-5


def test_input_output_matrix_agrees_with_map(heat20):
    s = boundary_system(heat20)
    g = TimeGrid(0.5, 50)
    u = SignalSamples.from_function(g, np.sin)
    y = input_output_map(s.A, s.B, s.C, u, s.D)
    F = io_matrix(s.A, s.B, s.C, g, s.D)
    assert np.allclose(F @ u.values, y.values, atol=1e-12)
    assert np.allclose(np.triu(F, 1), 0)


def test_observation_map_matches_semigroup(heat20):
    s = boundary_system(heat20)
    g = TimeGrid(0.4, 8)
    x = np.ones(20)
    y = observation_map(s.A, s.C, x, g)
    assert np.isclose(y.values[-1], s.C @ semigroup_at(s.A, 0.4) @ x)


def test_grid_mismatch_errors(heat20):
    s = boundary_system(heat20)
    g = TimeGrid(1.0, 10)
    with pytest.raises(GridMismatch):
        SignalSamples(g, np.zeros(5))
    with pytest.raises(GridMismatch):
        control_map(s.A, np.ones(3), SignalSamples.constant(g))
    with pytest.raises(GridMismatch):
        vcf_residual(heat20, 0.5, g)


@pytest.mark.parametrize("lam", [2.0, 5 + 1j])
def test_transfer_function_two_routes(heat50, lam):
    s = boundary_system(heat50)
    a = transfer_function(heat50, lam).H
    b = transfer_function_state_space(s.A, s.B, s.C, lam, s.D)
    assert np.isclose(a, b, rtol=1e-10)


@pytest.mark.parametrize("lam", [2.0, 4.0])
def test_laplace_transform_of_impulse_response(heat50, lam):
    # the Laplace transform of C T(t) B is H(lam) - D
    s = boundary_system(heat50)
    g = TimeGrid(20.0, 10000)
    y = observation_map(s.A, s.C, s.B, g)
    approx = laplace_transform(y, lam)
    exact = transfer_function(heat50, lam).H - s.D
    assert abs(approx / exact - 1) < 1e-2


def test_regularity_probe_follows_square_root_law(heat100):
    # the step response of the boundary output averages to (4/3) sqrt(t/pi) near zero
    t = np.array([0.08, 0.04, 0.02])
    res = regularity_probe(heat100, 1.0, t)
    avg = res["averages"].real
    assert np.all(np.diff(avg) < 0)
    ref = 4 / 3 * np.sqrt(t / np.pi)
    assert np.max(np.abs(avg / ref - 1)) < 0.03
    assert 1.9 < avg[0] / avg[-1] < 2.1
    assert regularity_probe(heat100, 0.0, t)["limit"] == 0
    with pytest.raises(ValidationError):
        regularity_probe(heat100, 1.0, [0.01, 0.02])


def test_vcf_residual_converges(heat50):
    r1 = vcf_residual(heat50, 0.5, TimeGrid(0.5, 200))
    r2 = vcf_residual(heat50, 0.5, TimeGrid(0.5, 400))
    assert r2 < r1 < 5e-3
    assert vcf_residual(heat50, 0.5, TimeGrid(0.5, 200), form="right") < 2e-2
    assert vcf_residual(heat50, 0.0, TimeGrid(0.5, 200)) == 0.0


def test_vcf_exact_without_feedback(heat50):
    t0 = heat50.with_feedback(np.zeros_like(heat50.M))
    assert vcf_residual(t0, 0.5, TimeGrid(0.5, 100)) <= 1e-12


def test_feedback_check_on_heat(heat50):
    rep = feedback_wellposed_check(heat50, TimeGrid(1.0, 200))
    assert rep.wellposed and 1 < rep.inverse_norm < 10
    s = boundary_system(heat50)
    rep2 = feedback_wellposed_check((s.A, s.B, s.C, s.D), TimeGrid(1.0, 200))
    assert np.isclose(rep.inverse_norm, rep2.inverse_norm)


def test_closed_loop_grows_like_unstable_mode(heat50):
    Acl = perturbed_generator(heat50)
    T = semigroup_at(Acl, 3.0)
    rate = np.log(np.abs(np.linalg.eigvals(T)).max()) / 3.0
    assert np.isclose(rate, Acl.growth_bound)


def test_signal_csv(tmp_path):
    g = TimeGrid(1.0, 4)
    path = SignalSamples.from_function(g, lambda t: t + 1j * t).to_csv(tmp_path / "s.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "re0", "im0"]
    assert float(rows[-1][1]) == 1.0 and float(rows[-1][2]) == 1.0


# worked examples --------------------------------------------------------------

def test_control_map_trivial_inputs(heat20):
    g = TimeGrid(1.0, 100)
    s = boundary_system(heat20)
    assert np.allclose(control_map(s.A, s.B, SignalSamples.constant(g, 0.0)), 0)
    x = control_map(np.zeros((3, 3)), [1.0, 0, 0], SignalSamples.constant(g))
    assert np.allclose(x, [1.0, 0, 0])


def test_control_map_constant_input_closed_form(heat100):
    # int_0^t T(s) B ds = -A^{-1} (I - T(t)) B
    A = restrict_generator(heat100)
    s = boundary_system(heat100)
    ref = -np.linalg.solve(A.matrix, (np.eye(100) - semigroup_at(A, 0.5)) @ s.B)
    errs = [np.linalg.norm(control_map(A, s.B, SignalSamples.constant(TimeGrid(0.5, k))) - ref)
            / np.linalg.norm(ref) for k in (400, 800)]
    assert errs[0] < 2e-3
    assert 3.0 < errs[0] / errs[1] < 4.5


def test_observation_examples(heat100):
    g = TimeGrid(1.0, 20)
    s = boundary_system(heat100)
    assert np.allclose(observation_map(s.A, np.zeros(100), np.ones(100), g).values, 0)
    y = observation_map(np.array([[-1.0]]), [1.0], [1.0], g)
    assert np.allclose(y.values, np.exp(-g.times))
    ev = s.A.eigenvalues[0].real
    v = np.linalg.eigh(s.A.matrix)[1][:, -1]
    y = observation_map(s.A, s.C, v, g)
    assert np.allclose(y.values, np.exp(ev * g.times) * (s.C @ v), atol=1e-12)
    assert abs(ev + 0.25) < 1e-4


def test_input_output_examples(heat50):
    g = TimeGrid(1.0, 400)
    s = boundary_system(heat50)
    assert np.allclose(input_output_map(s.A, s.B, s.C, SignalSamples.constant(g, 0.0), s.D).values, 0)
    y = input_output_map(np.array([[-1.0]]), [1.0], [1.0], SignalSamples.constant(g))
    assert np.max(np.abs(y.values - (1 - np.exp(-g.times)))) < 1e-5


def test_step_response_laplace_transform(heat50):
    s = boundary_system(heat50)
    g = TimeGrid(20.0, 10000)
    y = input_output_map(s.A, s.B, s.C, SignalSamples.constant(g), s.D)
    expected = transfer_function(heat50, 2.0).H / 2.0
    assert abs(laplace_transform(y, 2.0) / expected - 1) < 1e-2


def test_transfer_function_closed_forms(heat100):
    assert abs(transfer_function(heat100, 1.0).H - np.tanh(np.pi)) < 1e-3
    assert abs(transfer_function(heat100, 4.0).H - np.tanh(2 * np.pi) / 2) < 1e-3
    sup = max(abs(transfer_function(heat100, complex(a, b)).H)
              for a in np.linspace(1, 100, 8) for b in np.linspace(-100, 100, 9))
    assert sup <= 1.1


def test_regularity_probe_scalar_average():
    # scalar system x' = -x + u, y = x: the step-response average is 1 - (1 - e^{-t}) / t
    for t in (0.1, 0.05):
        g = TimeGrid(t, 400)
        y = input_output_map(np.array([[-1.0]]), [1.0], [1.0], SignalSamples.constant(g))
        avg = np.sum(g.trapezoid_weights() * y.values).real / t
        assert abs(avg - (1 - (1 - np.exp(-t)) / t)) < 1e-7


def test_regularity_probe_halves_over_fourfold_range(heat100):
    res = regularity_probe(heat100, 1.0, [0.1, 0.05, 0.025])
    avg = res["averages"].real
    assert np.all(np.diff(avg) < 0)
    # the continuum average is (4/3) sqrt(t / pi), so a fourfold range gives exactly half
    assert 1.9 < avg[0] / avg[-1] < 2.1
    assert np.allclose(regularity_probe(heat100, 0.0, [0.1, 0.05])["averages"], 0)


def test_feedback_check_examples():
    g = TimeGrid(1.0, 200)
    rep = feedback_wellposed_check((np.array([[-1.0]]), [1.0], [0.0], 0.0), g)
    assert np.isclose(rep.inverse_norm, 1.0) and rep.wellposed
    # (I - F)^{-1} = I + V with V the Volterra integration operator on L2(0, 1)
    N = 3000
    h = 1.0 / N
    V = np.tril(np.ones((N, N))) * h - 0.5 * h * np.eye(N)
    oracle = np.linalg.norm(np.eye(N) + V, 2)
    rep = feedback_wellposed_check((np.array([[-1.0]]), [1.0], [1.0], 0.0), TimeGrid(1.0, 400))
    assert abs(rep.inverse_norm / oracle - 1) < 2e-3
