import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from liftrom.model import (
    FilterConfig,
    GridSpec,
    InitialState,
    SemidiscreteModel,
    analytic_continuum_solution,
    build_backward_generator,
    build_interior_laplacian,
    build_model,
    crank_nicolson_march,
    exact_semidiscrete_solution,
    laplacian_eigenvalues,
    matched_ridge,
    spectral_lowpass_evolve,
    tikhonov_march,
    tikhonov_mode_gain,
)


def test_single_node_stencil():
    D = build_interior_laplacian(GridSpec(1))
    assert D.shape == (1, 1)
    assert D[0, 0] == -8.0


def test_three_node_spectrum():
    D = build_interior_laplacian(GridSpec(3))
    h = 0.25
    k = np.arange(1, 4)
    expected = -(4 / h**2) * np.sin(k * np.pi / 8) ** 2
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(D)), np.sort(expected), rtol=1e-12)
    np.testing.assert_allclose(np.sort(expected), [-54.6274, -32.0, -9.3726], rtol=1e-4)


def test_benchmark_grid_shape():
    g = GridSpec(7)
    D = build_interior_laplacian(g)
    assert g.spacing == 1 / 8
    assert D.shape == (7, 7)
    assert np.count_nonzero(np.triu(D, 2)) == 0
    np.testing.assert_array_equal(np.diag(D), np.full(7, -128.0))


@pytest.mark.parametrize("n", list(range(1, 33)))
def test_closed_form_spectrum(n):
    g = GridSpec(n, length=1.3)
    D = build_interior_laplacian(g)
    assert np.linalg.norm(D - D.T) == 0.0
    np.testing.assert_allclose(np.linalg.eigvalsh(D), np.sort(laplacian_eigenvalues(g)), rtol=1e-10)


def test_spectral_radius_of_generator():
    m = build_model(GridSpec(7, 1.0, 0.05))
    expected = 0.05 * 4 * 64 * np.sin(7 * np.pi / 16) ** 2
    assert m.eigenvalues[-1] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(12.3, abs=0.05)
    assert np.all(m.eigenvalues > 0)


def test_generator_from_negative_identity():
    m = build_backward_generator(-np.eye(3), 1.0)
    np.testing.assert_array_equal(m.generator, np.eye(3))


def test_generator_rejects_bad_input():
    with pytest.raises(ValueError):
        build_backward_generator(-np.eye(2), 0.0)
    with pytest.raises(ValueError):
        build_backward_generator(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        GridSpec(0)
    with pytest.raises(ValueError):
        FilterConfig(0, 0.0, 0.1)


@pytest.fixture
def model():
    return build_model(GridSpec(7, 1.0, 0.05))


def test_sine_round_trip(model, rng):
    a = rng.standard_normal(7)
    u = InitialState.from_sine_coefficients(a, 7)
    back = InitialState.from_values(u.values)
    np.testing.assert_allclose(back.sine_coefficients, a, rtol=1e-12, atol=1e-14)


def test_exact_solution_identity_at_zero(model, rng):
    u0 = rng.standard_normal(7)
    np.testing.assert_allclose(exact_semidiscrete_solution(model, u0, 0.0), u0, rtol=1e-14)


def test_exact_solution_on_eigenvector(model):
    v = model.eigenvectors[:, 2]
    lam = model.eigenvalues[2]
    out = exact_semidiscrete_solution(model, v, 0.3)
    np.testing.assert_allclose(out, np.exp(0.3 * lam) * v, rtol=1e-10)


def test_exact_solution_multiplies_sine_coefficients(model):
    a = np.array([1.0, -0.5, 0.25, 0.1, 0.0, 0.3, -0.2])
    u0 = InitialState.from_sine_coefficients(a, 7)
    out = InitialState.from_values(exact_semidiscrete_solution(model, u0, 0.2))
    np.testing.assert_allclose(out.sine_coefficients, a * np.exp(0.2 * model.eigenvalues), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(exact_semidiscrete_solution(model, u0, 0.2), expm(0.2 * model.generator) @ u0.values, rtol=1e-10)


def test_continuum_solution():
    x = np.linspace(0, 1, 9)
    a = [1.0, 0.5]
    np.testing.assert_allclose(
        analytic_continuum_solution(a, 0.05, 1.0, 0.0, x),
        np.sin(np.pi * x) + 0.5 * np.sin(2 * np.pi * x), atol=1e-14,
    )
    amp = analytic_continuum_solution([1.0], 0.05, 1.0, 0.3, np.array([0.5]))[0]
    assert amp == pytest.approx(np.exp(0.05 * np.pi**2 * 0.3), rel=1e-12)
    assert amp == pytest.approx(1.1595, abs=1e-4)


def test_semidiscrete_converges_to_continuum_at_second_order():
    # short horizon: roundoff in the top modes is amplified by exp(lam_max t)
    a = [1.0, 0.5, 0.25]
    errs = []
    for n in (7, 15, 31):
        m = build_model(GridSpec(n, 1.0, 0.05))
        u0 = InitialState.from_sine_coefficients(a, n)
        u = exact_semidiscrete_solution(m, u0, 0.05)
        ref = analytic_continuum_solution(a, 0.05, 1.0, 0.05, m.grid.nodes)
        errs.append(np.max(np.abs(u - ref)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates[-1] > 1.9 and np.all(rates > 1.6)


def test_crank_nicolson_zero_generator():
    m = build_backward_generator(np.zeros((3, 3)), 1.0)
    traj = crank_nicolson_march(m, np.array([1.0, 2.0, 3.0]), 0.1, 1.0)
    assert np.all(traj.states == traj.states[0])
    assert traj.states.shape == (11, 3)


def test_crank_nicolson_scalar_recurrence():
    a, dt = 2.0, 0.05
    m = build_backward_generator(np.array([[-a]]), 1.0)
    traj = crank_nicolson_march(m, np.array([1.0]), dt, 0.5)
    factor = (1 + a * dt / 2) / (1 - a * dt / 2)
    np.testing.assert_allclose(traj.states[:, 0], factor ** np.arange(11), rtol=1e-12)


def test_crank_nicolson_singular_step():
    m = build_backward_generator(np.array([[-40.0]]), 1.0)
    with pytest.raises(np.linalg.LinAlgError, match="2/dt"):
        crank_nicolson_march(m, np.array([1.0]), 0.05, 0.5)


def test_crank_nicolson_second_order(model):
    u0 = InitialState.from_sine_coefficients([1.0, 0.5, 0.25], 7)
    exact = exact_semidiscrete_solution(model, u0, 0.3)
    errs = [np.linalg.norm(crank_nicolson_march(model, u0, 0.3 / n, 0.3).final - exact) for n in (40, 80, 160)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    np.testing.assert_allclose(rates, 2.0, atol=0.1)


def test_lowpass_limits(model, rng):
    u0 = rng.standard_normal(7)
    np.testing.assert_allclose(spectral_lowpass_evolve(model, u0, 7, 0.3), exact_semidiscrete_solution(model, u0, 0.3), rtol=1e-12)
    assert np.allclose(spectral_lowpass_evolve(model, model.eigenvectors[:, 1], 1, 0.3), 0.0, atol=1e-14)
    once = spectral_lowpass_evolve(model, u0, 4, 0.0)
    np.testing.assert_allclose(spectral_lowpass_evolve(model, once, 4, 0.0), once, atol=1e-14)


def test_tikhonov_limits(rng):
    m = build_backward_generator(np.zeros((3, 3)), 1.0)
    u0 = rng.standard_normal(3)
    traj = tikhonov_march(m, u0, 0.1, 0.0, 0.5)
    np.testing.assert_allclose(traj.states, np.tile(u0, (6, 1)))
    model = build_model(GridSpec(7))
    u = tikhonov_march(model, u0 := rng.standard_normal(7), 0.03, 1e12, 0.03).final
    assert np.linalg.norm(u) < 1e-6 * np.linalg.norm(u0)


def test_matched_ridge_gains(model):
    dt = 0.03
    alpha = matched_ridge(model, dt, 4)
    gain = tikhonov_mode_gain(model, dt, alpha)
    assert gain[4] == pytest.approx(1.0, rel=1e-12)
    assert np.all(gain[:4] > 1) and np.all(gain[5:] < 1)
    u0 = InitialState.from_sine_coefficients([1.0, 0.5, 0.25, 0.0, 0.0135, 0.0135, 0.0135], 7)
    tik = tikhonov_march(model, u0, dt, alpha, 0.3).final
    ref = spectral_lowpass_evolve(model, u0, 4, 0.3)
    cn = crank_nicolson_march(model, u0, dt, 0.3).final
    assert np.linalg.norm(tik - ref) < np.linalg.norm(cn - ref)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=7, max_size=7),
    st.floats(0, 0.5), st.floats(0, 0.5),
)
def test_backward_growth_is_monotone(coeffs, t1, t2):
    model = build_model(GridSpec(7))
    t1, t2 = sorted((t1, t2))
    n1 = np.linalg.norm(exact_semidiscrete_solution(model, coeffs, t1))
    n2 = np.linalg.norm(exact_semidiscrete_solution(model, coeffs, t2))
    assert n2 >= n1 * (1 - 1e-12)


def test_model_type_invariants(model):
    assert isinstance(model, SemidiscreteModel)
    assert np.all(np.linalg.eigvalsh(model.laplacian) <= 0)
    np.testing.assert_array_equal(model.generator, -0.05 * model.laplacian)
