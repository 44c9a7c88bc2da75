"""Randomized verification of the fixed-frame, recovery and sampled-pencil bounds."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from .mclachlan import (
    Frame,
    Pencil,
    assemble_pencil,
    cumulative_defect,
    initial_coefficients,
    integrate_reduced,
    out_of_span,
    projection_defect,
)

# exact identities are only checkable in floating point for kappa(S) <= 1e6
FRAME_RATIO_MIN = 1e-3

BOUNDS = ("fixed_frame", "recovered", "generator", "coefficient", "gram")


@dataclass
class BoundSuiteResult:
    trials: int
    seed: int
    violations: dict = field(default_factory=lambda: {k: 0 for k in BOUNDS})
    evaluated: dict = field(default_factory=lambda: {k: 0 for k in BOUNDS})
    worst_margin: dict = field(default_factory=lambda: {k: np.inf for k in BOUNDS})
    max_gram_drift: float = 0.0
    skipped: int = 0
    elapsed: float = 0.0

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    def record(self, name: str, lhs, rhs, slack: float):
        lhs, rhs = np.atleast_1d(lhs), np.atleast_1d(rhs)
        margin = rhs + slack - lhs
        self.evaluated[name] += 1
        self.violations[name] += int(np.any(margin < 0))
        self.worst_margin[name] = min(self.worst_margin[name], float(np.min(margin)))

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "violations": dict(self.violations),
            "evaluated": dict(self.evaluated),
            "worst_margin": {k: (None if np.isinf(v) else v) for k, v in self.worst_margin.items()},
            "max_gram_drift": self.max_gram_drift,
            "skipped_ill_conditioned": self.skipped,
            "elapsed_s": self.elapsed,
        }


class _DenseH:
    """Dense Hermitian matrix with cached eigenpairs, exposing the lift interface."""

    def __init__(self, H):
        self.H = H
        self.w, self.U = np.linalg.eigh(H)

    def apply_hamiltonian(self, X):
        return self.H @ X

    def evolve(self, psi, t):
        return self.U @ (np.exp(-1j * self.w * t) * (self.U.conj().T @ psi))


def _hermitian(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (A + A.conj().T) / np.sqrt(n)


def _unit(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _trial(rng, result: BoundSuiteResult, adversarial: bool, zero_perturbation: bool, slack: float):
    M = int(rng.integers(6, 33))
    m = int(rng.integers(2, min(6, M - 1) + 1))
    H = _DenseH(_hermitian(rng, M, scale=rng.uniform(0.5, 3.0)))
    psi0 = _unit(rng, M)
    if rng.random() < 0.5:
        taus = np.sort(rng.uniform(0, 1.5, m))
        V = np.column_stack([H.evolve(psi0, t) for t in taus])
    else:
        V = np.column_stack([_unit(rng, M) for _ in range(m)])
        V[:, 0] = psi0 if rng.random() < 0.5 else V[:, 0]
    if adversarial:
        # push towards near-collinear columns
        V[:, -1] = V[:, 0] + 10.0 ** rng.uniform(-2.5, -1) * V[:, -1]
    frame = Frame(V)
    if not frame.is_full_rank(FRAME_RATIO_MIN):
        result.skipped += 1
        return
    pencil = assemble_pencil(frame, H, floor=0.0)
    S, HK = pencil.overlap, pencil.projected_h

    # fixed-frame bound on a fine grid for the defect integral, checked at every sample
    T = rng.uniform(0.2, 2.0)
    fine = np.linspace(0, T, 401)
    c0 = initial_coefficients(frame, pencil, psi0, floored=False)
    traj = integrate_reduced(pencil, c0, fine, frame=frame, floored=False)
    exact = np.array([H.evolve(psi0, t) for t in fine])
    eta = projection_defect(frame, pencil, H, traj.lifted_states, floored=False)
    delta = cumulative_defect(eta, out_of_span(frame, pencil, psi0), fine)
    gap = np.linalg.norm(exact - traj.lifted_states, axis=1)
    result.record("fixed_frame", gap[::20], delta[::20], slack)

    gram = traj.gram_norm
    drift = float(np.max(np.abs(gram - gram[0])) / gram[0])
    result.max_gram_drift = max(result.max_gram_drift, drift)
    result.record("gram", drift, 1e-8, 0.0)

    # recovery through a random readout with a perturbed physical reference
    n = int(rng.integers(2, 9))
    R = rng.standard_normal((n, M)) * rng.uniform(0.1, 5.0)
    u_h = (exact[::20] @ R.T) + rng.standard_normal((exact[::20].shape[0], n)) * rng.uniform(0, 0.1)
    eps_lift = np.linalg.norm(u_h - exact[::20] @ R.T, axis=1)
    lhs = np.linalg.norm(u_h - traj.lifted_states[::20] @ R.T, axis=1)
    result.record("recovered", lhs, eps_lift + np.linalg.norm(R, 2) * delta[::20], slack)

    # injected pencil perturbations
    if zero_perturbation:
        dS = np.zeros_like(S)
        dH = np.zeros_like(HK)
    else:
        dS = _hermitian(rng, m)
        target = rng.uniform(0.9, 0.999) if adversarial else 10.0 ** rng.uniform(-3, 0.5)
        dS *= target / np.linalg.norm(np.linalg.solve(S, dS), 2)
        dH = _hermitian(rng, m, scale=10.0 ** rng.uniform(-3, 0) * np.linalg.norm(HK, 2))
    G = dg._generator(S, HK)
    bound = dg.generator_perturbation_bound(S, dS, dH, G)
    S_hat, HK_hat = S + dS, HK + dH
    if not bound.applicable:
        return
    G_hat = dg._generator(S_hat, HK_hat)
    g_gap = float(np.linalg.norm(G_hat - G, 2))
    result.record("generator", g_gap, bound.bound, slack * max(1.0, bound.bound))
    if np.linalg.eigvalsh(S_hat)[0] <= 0:
        return
    times = fine[::20]
    c = integrate_reduced(pencil, c0, times, floored=False).coefficients
    hat = Pencil(S_hat, HK_hat, 0.0, S_hat)
    ch = integrate_reduced(hat, c0, times, floored=False).coefficients
    c_gap = np.linalg.norm(ch - c, axis=1)
    c_bound = dg.coefficient_perturbation_bound(S, S_hat, g_gap, float(np.linalg.norm(c0)), times)
    result.record("coefficient", c_gap, c_bound, slack * max(1.0, float(np.max(c_bound))))


def run_bound_suite(
    trials: int = 500,
    seed: int = 0,
    adversarial: bool = False,
    zero_perturbation: bool = False,
    slack: float = dg.BOUND_SLACK,
) -> BoundSuiteResult:
    """Random frames, random Hermitian ``H`` and injected ``dS``/``dH``; counts bound violations."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    result = BoundSuiteResult(trials, seed)
    start = time.perf_counter()
    j = 0
    # ill-conditioned draws are redrawn so that ``trials`` frames are actually evaluated
    while result.evaluated["fixed_frame"] < trials:
        if j >= 20 * trials:
            raise RuntimeError(f"only {result.evaluated['fixed_frame']} usable frames in {j} draws")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, j)))
        _trial(rng, result, adversarial, zero_perturbation, slack)
        j += 1
    result.elapsed = time.perf_counter() - start
    return result
