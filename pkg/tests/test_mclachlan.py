import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from liftrom.diagnostics import verify_fixed_frame_bound
from liftrom.lift import LiftSpec, build_lift, inject
from liftrom.mclachlan import (
    Frame,
    Pencil,
    RankDeficientFrameError,
    arnoldi_frame,
    assemble_pencil,
    build_snapshot_frame,
    cumulative_defect,
    galerkin_residual,
    initial_coefficients,
    integrate_reduced,
    mclachlan_functional,
    out_of_span,
    project_nonunitary,
    projection_defect,
    projector,
)
from liftrom.model import (
    GridSpec,
    build_backward_generator,
    build_model,
    exact_semidiscrete_solution,
    spectral_lowpass_evolve,
)

MODEL = build_model(GridSpec(7))
LIFT = build_lift(MODEL, LiftSpec())


def rand_herm(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


def rand_frame(rng, M, m):
    return Frame(rng.standard_normal((M, m)) + 1j * rng.standard_normal((M, m)))


@pytest.fixture(scope="module")
def psi0():
    u0 = np.sin(np.pi * MODEL.grid.nodes)
    p = inject(LIFT, u0).amplitudes
    return p / np.linalg.norm(p)


def test_single_snapshot_frame(psi0):
    f = build_snapshot_frame(LIFT, psi0, [0.0])
    np.testing.assert_allclose(f.columns[:, 0], psi0)
    P = assemble_pencil(f, LIFT)
    assert P.overlap[0, 0] == pytest.approx(1.0)


def test_stationary_frame_is_rank_deficient(psi0):
    zero = build_lift(build_backward_generator(np.zeros((7, 7)), 1.0, GridSpec(7)), LiftSpec())
    f = build_snapshot_frame(zero, psi0, [0.0, 0.1, 0.2])
    assert np.allclose(f.columns, psi0[:, None])
    assert not f.is_full_rank()
    with pytest.raises(RankDeficientFrameError, match="rank deficient"):
        assemble_pencil(f, zero)


def test_snapshot_times_validated(psi0):
    with pytest.raises(ValueError):
        build_snapshot_frame(LIFT, psi0, [0.2, 0.1])
    with pytest.raises(ValueError):
        build_snapshot_frame(LIFT, psi0, [])


def test_orthonormal_and_scalar_pencils(rng):
    H = rand_herm(rng, 10)
    Q, _ = np.linalg.qr(rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3)))
    P = assemble_pencil(Frame(Q), H, floor=0.0)
    np.testing.assert_allclose(P.overlap, np.eye(3), atol=1e-14)
    v = rng.standard_normal((10, 1)) + 0j
    P1 = assemble_pencil(Frame(v), H, floor=0.0)
    assert P1.projected_h.shape == (1, 1)
    assert P1.projected_h[0, 0].imag == 0.0


def test_initial_coefficients(rng, psi0):
    f = rand_frame(rng, 12, 3)
    P = assemble_pencil(f, rand_herm(rng, 12), floor=0.0)
    c_true = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    psi = f.columns @ c_true
    c0 = initial_coefficients(f, P, psi, floored=False)
    assert np.linalg.norm(f.columns @ c0 - psi) <= 1e-8
    Q, _ = np.linalg.qr(f.columns, mode="complete")
    perp = Q[:, 5]
    assert np.linalg.norm(initial_coefficients(f, P, perp, floored=False)) <= 1e-12

    snap = build_snapshot_frame(LIFT, psi0, [0.0, 0.05])
    Ps = assemble_pencil(snap, LIFT, floor=0.0)
    assert not Ps.floor_active
    np.testing.assert_allclose(initial_coefficients(snap, Ps, psi0, floored=False), [1, 0], atol=1e-8)


def test_zero_projected_hamiltonian_is_static(rng):
    f = rand_frame(rng, 8, 3)
    P = assemble_pencil(f, np.zeros((8, 8)), floor=0.0)
    c0 = rng.standard_normal(3) + 0j
    traj = integrate_reduced(P, c0, [0.0, 0.5, 2.0], floored=False)
    np.testing.assert_allclose(traj.coefficients, np.tile(c0, (3, 1)), atol=1e-12)


def test_identity_overlap_matches_matrix_exponential(rng):
    HK = rand_herm(rng, 4)
    P = Pencil(np.eye(4), HK, 0.0, np.eye(4))
    c0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    times = np.linspace(0, 2, 7)
    traj = integrate_reduced(P, c0, times, floored=False)
    for t, c in zip(times, traj.coefficients):
        np.testing.assert_allclose(c, expm(-1j * t * HK) @ c0, atol=1e-10)


def test_gram_norm_conserved(psi0):
    f = build_snapshot_frame(LIFT, psi0, [0.0, 0.1, 0.2, 0.3])
    P = assemble_pencil(f, LIFT, floor=1e-2)
    assert P.floor_active
    c0 = initial_coefficients(f, P, psi0)
    times = np.linspace(0, 0.3, 301)
    traj = integrate_reduced(P, c0, times)
    g = traj.gram_norm
    assert np.max(np.abs(g - g[0])) <= 1e-8 * g[0]
    dg = np.gradient(g, times)
    assert np.max(np.abs(dg)) <= 1e-6 * np.linalg.norm(c0) ** 2 / 0.3


def test_invariant_and_full_frames_have_no_defect(rng):
    H = rand_herm(rng, 8)
    w, U = np.linalg.eigh(H)
    f = Frame(U[:, :3] @ (rng.standard_normal((3, 3)) + 0j))
    P = assemble_pencil(f, H, floor=0.0)
    assert projection_defect(f, P, H, f.columns @ np.ones(3), floored=False) <= 1e-10
    full = rand_frame(rng, 8, 8)
    Pf = assemble_pencil(full, H, floor=0.0)
    assert projection_defect(full, Pf, H, full.columns[:, 0], floored=False) <= 1e-10


def test_arnoldi_defect_is_last_coefficient(rng):
    H = rand_herm(rng, 20)
    psi = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    m = 5
    f, Hs = arnoldi_frame(H, psi, m)
    P = assemble_pencil(f, H, floor=0.0)
    c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    eta = projection_defect(f, P, H, f.columns @ c, floored=False)
    assert eta == pytest.approx(abs(Hs[m, m - 1]) * abs(c[-1]), abs=1e-8)


def test_cumulative_defect_quadrature():
    t = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(cumulative_defect(np.zeros(11), 0.0, t), np.zeros(11))
    np.testing.assert_allclose(cumulative_defect(np.full(11, 0.3), 0.2, t), 0.2 + 0.3 * t, atol=1e-15)
    with pytest.raises(ValueError):
        cumulative_defect(np.zeros(3), 0.0, t)


def test_fixed_frame_bound_on_benchmark_frame(psi0):
    f = build_snapshot_frame(LIFT, psi0, [0.0, 0.1, 0.2, 0.3])
    P = assemble_pencil(f, LIFT, floor=1e-2)
    times = np.linspace(0, 0.3, 11)
    c0 = initial_coefficients(f, P, psi0, floored=False)
    traj = integrate_reduced(P, c0, times, frame=f, floored=False)
    eta = projection_defect(f, P, LIFT, traj.lifted_states, floored=False)
    delta = cumulative_defect(eta, out_of_span(f, P, psi0), times)
    exact = np.array([LIFT.evolve(psi0, t) for t in times])
    check = verify_fixed_frame_bound(exact, traj.lifted_states, delta)
    assert check.ok, check.margins


def test_galerkin_residual(rng):
    H = rand_herm(rng, 10)
    f = rand_frame(rng, 10, 3)
    P = assemble_pencil(f, H, floor=0.0)
    traj = integrate_reduced(P, rng.standard_normal(3) + 0j, np.linspace(0, 1, 5), floored=False)
    res = galerkin_residual(f, H, traj, P, floored=False)
    scale = np.linalg.norm(H, 2) * np.linalg.norm(traj.coefficients, axis=1) * np.linalg.norm(f.columns, 2) ** 2
    assert np.all(res <= 1e-8 * scale)
    bad = Pencil(P.overlap, P.projected_h + 0.1 * np.eye(3), 0.0, P.overlap)
    assert np.all(galerkin_residual(f, H, traj, bad, floored=False) > 0)


def test_floored_residual_is_reported(psi0):
    f = build_snapshot_frame(LIFT, psi0, [0.0, 0.1, 0.2, 0.3])
    P = assemble_pencil(f, LIFT, floor=1e-2)
    traj = integrate_reduced(P, initial_coefficients(f, P, psi0), np.linspace(0, 0.3, 11))
    res = galerkin_residual(f, LIFT, traj, P, floored=True)
    assert np.all(np.isfinite(res)) and np.max(res) > 1e-8


def test_classical_projection_lanes(rng):
    u0 = rng.standard_normal(7)
    times = np.linspace(0, 0.3, 4)
    full = project_nonunitary(MODEL, Frame(np.eye(7)), times, u0)
    for t, u in zip(times, full):
        np.testing.assert_allclose(u, exact_semidiscrete_solution(MODEL, u0, t), rtol=1e-10)
    slow = project_nonunitary(MODEL, Frame(MODEL.eigenvectors[:, :4]), times, u0)
    for t, u in zip(times, slow):
        np.testing.assert_allclose(u, spectral_lowpass_evolve(MODEL, u0, 4, t), atol=1e-8)
    v = MODEL.eigenvectors[:, [2]]
    one = project_nonunitary(MODEL, Frame(v), times, v[:, 0])
    np.testing.assert_allclose(one @ v[:, 0], np.exp(MODEL.eigenvalues[2] * times), rtol=1e-10)


def test_projector_idempotent(rng):
    f = rand_frame(rng, 9, 4)
    P = projector(f, assemble_pencil(f, np.eye(9), floor=0.0), floored=False)
    assert np.linalg.norm(P @ P - P, 2) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 10), st.integers(1, 3))
def test_optimal_velocity_is_strict_minimizer(seed, M, m):
    rng = np.random.default_rng(seed)
    H = rand_herm(rng, M)
    f = rand_frame(rng, M, m)
    P = assemble_pencil(f, H, floor=0.0)
    c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    cdot = np.linalg.solve(P.overlap, -1j * P.projected_h @ c)
    d = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    best = mclachlan_functional(f, H, c, cdot)
    assert mclachlan_functional(f, H, c, cdot + 1e-3 * d) > best
