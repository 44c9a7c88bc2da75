"""Error ledger, conditioning and perturbation bounds for the reduced pipeline.

The layered bound assembled here is

    ||u - I_h R psi_hat_m||_X <= eps_space + ||I_h|| (eps_lift + ||R|| (eps_proj + eps_floor + eps_sample))

where ``eps_proj`` is the cumulative projection defect of the exact-pencil flow,
``eps_floor`` the gap introduced by flooring the overlap, and ``eps_sample`` the gap between
the floored exact-pencil and sampled-pencil coefficients, both measured through ``||V||``.
The X norm is the continuum L2 norm, approximated by trapezoid quadrature on a refined grid,
and ``I_h`` is piecewise-linear interpolation with zero boundary values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mclachlan import Pencil, floor_spectrum
from .model import GridSpec, analytic_continuum_solution

BOUND_SLACK = 1e-8


def condition_number(S: np.ndarray) -> float:
    w = np.linalg.eigvalsh(S)
    if w[0] <= 0:
        raise np.linalg.LinAlgError(f"matrix is not positive definite (smallest eigenvalue {w[0]:.3e})")
    return float(w[-1] / w[0])


def generator(pencil: Pencil) -> tuple[np.ndarray, np.ndarray]:
    """``G = S^{-1} H_K`` and its floored counterpart ``S_*^{-1} H_K``."""
    try:
        G = np.linalg.solve(pencil.overlap, pencil.projected_h)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"overlap is singular: {exc}") from None
    return G, np.linalg.solve(pencil.floored_overlap, pencil.projected_h)


def _generator(S, HK):
    return np.linalg.solve(S, HK)


@dataclass(frozen=True)
class GeneratorBound:
    applicable: bool
    neumann: float
    bound: float | None

    def holds(self, gap: float, slack: float = 1e-10) -> bool | None:
        if not self.applicable:
            return None
        return gap <= self.bound + slack * max(1.0, self.bound)


def generator_perturbation_bound(S, dS, dH, G) -> GeneratorBound:
    """``||S^{-1}|| / (1 - ||S^{-1} dS||) (||dH|| + ||dS|| ||G||)`` when the Neumann term is below 1."""
    S_inv = np.linalg.inv(S)
    neumann = float(np.linalg.norm(S_inv @ dS, 2))
    if not neumann < 1:
        return GeneratorBound(False, neumann, None)
    value = np.linalg.norm(S_inv, 2) / (1 - neumann) * (
        np.linalg.norm(dH, 2) + np.linalg.norm(dS, 2) * np.linalg.norm(G, 2)
    )
    return GeneratorBound(True, neumann, float(value))


def coefficient_perturbation_bound(S, S_hat, generator_gap: float, c0_norm: float, times) -> np.ndarray:
    """``t sqrt(kappa(S) kappa(S_hat)) ||G_hat - G|| ||c(0)||``."""
    times = np.asarray(times, dtype=float)
    amp = np.sqrt(condition_number(S) * condition_number(S_hat))
    return times * amp * generator_gap * c0_norm


def relative_L2_error(series, reference_series) -> np.ndarray:
    u = np.atleast_2d(np.asarray(series))
    ref = np.atleast_2d(np.asarray(reference_series))
    ref_norm = np.linalg.norm(ref, axis=1)
    if np.any(ref_norm == 0):
        raise ValueError("reference has zero norm at some sample")
    return np.linalg.norm(u - ref, axis=1) / ref_norm


def absolute_L2_error(series, reference_series) -> np.ndarray:
    return np.linalg.norm(np.atleast_2d(series) - np.atleast_2d(reference_series), axis=1)


@dataclass(frozen=True)
class BoundCheck:
    lhs: np.ndarray
    rhs: np.ndarray
    slack: float = BOUND_SLACK

    @property
    def margins(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def passed(self) -> np.ndarray:
        return self.lhs <= self.rhs + self.slack

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    def to_dict(self) -> dict:
        return {"ok": self.ok, "min_margin": float(np.min(self.margins)), "violations": int(np.sum(~self.passed))}


def verify_fixed_frame_bound(lifted_states, reduced_states, delta_v, slack: float = BOUND_SLACK) -> BoundCheck:
    """``||psi(t) - psi_m(t)|| <= delta_V(t)`` sample by sample."""
    gap = np.linalg.norm(np.atleast_2d(lifted_states) - np.atleast_2d(reduced_states), axis=1)
    return BoundCheck(gap, np.asarray(delta_v, dtype=float), slack)


# --------------------------------------------------------------------------- continuum norm


@dataclass(frozen=True)
class ContinuumNorm:
    """Trapezoid L2 norm on a grid ``refine`` times finer than the mesh, boundaries included."""

    grid: GridSpec
    refine: int = 8

    @property
    def nodes(self) -> np.ndarray:
        n_cells = (self.grid.n_interior + 1) * self.refine
        return np.linspace(0.0, self.grid.length, n_cells + 1)

    @property
    def weights(self) -> np.ndarray:
        x = self.nodes
        w = np.full(x.size, x[1] - x[0])
        w[[0, -1]] *= 0.5
        return w

    @property
    def interpolation(self) -> np.ndarray:
        """``I_h``: piecewise-linear interpolation with homogeneous Dirichlet ends."""
        x_mesh = np.concatenate([[0.0], self.grid.nodes, [self.grid.length]])
        eye = np.eye(self.grid.n_interior)
        padded = np.vstack([np.zeros(self.grid.n_interior), eye, np.zeros(self.grid.n_interior)])
        return np.column_stack([np.interp(self.nodes, x_mesh, padded[:, k]) for k in range(self.grid.n_interior)])

    @property
    def interpolation_norm(self) -> float:
        return float(np.linalg.norm(np.sqrt(self.weights)[:, None] * self.interpolation, 2))

    def norm(self, f) -> np.ndarray:
        f = np.atleast_2d(f)
        return np.sqrt(np.abs(f) ** 2 @ self.weights)


def space_error(grid: GridSpec, sine_coeffs, times, grid_states, refine: int = 8) -> np.ndarray:
    """``eps_space(t) = ||u(t) - I_h u_h(t)||_X`` against the analytic sine series."""
    cn = ContinuumNorm(grid, refine)
    I = cn.interpolation
    out = np.empty(len(times))
    for i, t in enumerate(times):
        u = analytic_continuum_solution(sine_coeffs, grid.diffusivity, grid.length, t, cn.nodes)
        out[i] = cn.norm(u - I @ np.asarray(grid_states[i]))[0]
    return out


# --------------------------------------------------------------------------- reports


@dataclass
class ErrorLedger:
    times: np.ndarray
    eps_space: np.ndarray
    eps_lift: np.ndarray
    eps_proj: np.ndarray
    eps_floor: np.ndarray
    eps_sample: np.ndarray
    total_bound: np.ndarray
    observed_total: np.ndarray
    interpolation_norm: float
    recovery_norm: float
    relative_errors: dict = field(default_factory=dict)
    absolute_errors: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def columns(self) -> dict:
        return {
            "eps_space": self.eps_space,
            "eps_lift": self.eps_lift,
            "eps_proj": self.eps_proj,
            "eps_floor": self.eps_floor,
            "eps_sample": self.eps_sample,
            "total_bound": self.total_bound,
            "observed_total": self.observed_total,
        }


def layered_error_report(
    times,
    eps_space,
    eps_lift,
    eps_proj,
    eps_floor,
    eps_sample,
    observed_total,
    interpolation_norm: float,
    recovery_norm: float,
    lanes: dict | None = None,
    reference=None,
    checks: dict | None = None,
) -> ErrorLedger:
    """Assemble the layered ledger, its composite bound and the relative-error lanes.

    ``lanes`` maps method names to state series (rows per time) compared against ``reference``.
    """
    times = np.asarray(times, dtype=float)
    eps_space, eps_lift, eps_proj, eps_floor, eps_sample = (
        np.asarray(a, dtype=float) for a in (eps_space, eps_lift, eps_proj, eps_floor, eps_sample)
    )
    total = eps_space + interpolation_norm * (eps_lift + recovery_norm * (eps_proj + eps_floor + eps_sample))
    observed_total = np.asarray(observed_total, dtype=float)
    rel, absl = {}, {}
    for name, states in (lanes or {}).items():
        rel[name] = relative_L2_error(states, reference)
        absl[name] = absolute_L2_error(states, reference)
    checks = dict(checks or {})
    checks["layered_bound"] = BoundCheck(observed_total, total).to_dict()
    return ErrorLedger(
        times, eps_space, eps_lift, eps_proj, eps_floor, eps_sample, total, observed_total,
        float(interpolation_norm), float(recovery_norm), rel, absl, checks,
    )


@dataclass
class PerturbationReport:
    kappa_S: float
    kappa_S_hat: float | None
    kappa_S_floored: float
    kappa_S_hat_floored: float
    neumann_raw: float
    neumann_floored: float
    generator_gap: float
    generator_bound: float | None
    generator_bound_applicable: bool
    coefficient_gap_series: np.ndarray
    coefficient_bound_series: np.ndarray
    frobenius_ratios: dict

    @property
    def generator_bound_holds(self) -> bool | None:
        if not self.generator_bound_applicable:
            return None
        return self.generator_gap <= self.generator_bound + 1e-10 * max(1.0, self.generator_bound)

    @property
    def coefficient_bound_holds(self) -> bool:
        return bool(np.all(self.coefficient_gap_series <= self.coefficient_bound_series + 1e-10))

    def to_dict(self) -> dict:
        return {
            "kappa_S": self.kappa_S,
            "kappa_S_hat": self.kappa_S_hat,
            "kappa_S_floored": self.kappa_S_floored,
            "kappa_S_hat_floored": self.kappa_S_hat_floored,
            "neumann_raw": self.neumann_raw,
            "neumann_floored": self.neumann_floored,
            "generator_gap": self.generator_gap,
            "generator_bound": self.generator_bound,
            "generator_bound_applicable": self.generator_bound_applicable,
            "generator_bound_holds": self.generator_bound_holds,
            "coefficient_gap_series": self.coefficient_gap_series.tolist(),
            "coefficient_bound_series": self.coefficient_bound_series.tolist(),
            "coefficient_bound_holds": self.coefficient_bound_holds,
            "frobenius_ratios": self.frobenius_ratios,
        }


def _safe_kappa(S) -> float | None:
    try:
        return condition_number(S)
    except np.linalg.LinAlgError:
        return None


def perturbation_report(pencil: Pencil, S_hat, HK_hat, floor_hat: float, c_star, c_hat, times, c0) -> PerturbationReport:
    """Raw and floored sampled-pencil diagnostics.

    ``c_star`` and ``c_hat`` are coefficient series (rows) from the floored exact and floored
    sampled pencils started at the same ``c0``.
    """
    S, HK = pencil.overlap, pencil.projected_h
    dS, dH = S_hat - S, HK_hat - HK
    S_star = pencil.floored_overlap
    S_hat_star = floor_spectrum(S_hat, floor_hat)
    dS_star = S_hat_star - S_star
    neumann_raw = float(np.linalg.norm(np.linalg.solve(S, dS), 2))
    G_star = _generator(S_star, HK)
    G_hat_star = _generator(S_hat_star, HK_hat)
    gap = float(np.linalg.norm(G_hat_star - G_star, 2))
    bound = generator_perturbation_bound(S_star, dS_star, dH, G_star)
    c_gap = np.linalg.norm(np.asarray(c_hat) - np.asarray(c_star), axis=1)
    c_bound = coefficient_perturbation_bound(S_star, S_hat_star, gap, float(np.linalg.norm(c0)), times)
    return PerturbationReport(
        kappa_S=condition_number(S),
        kappa_S_hat=_safe_kappa(S_hat),
        kappa_S_floored=condition_number(S_star),
        kappa_S_hat_floored=condition_number(S_hat_star),
        neumann_raw=neumann_raw,
        neumann_floored=bound.neumann,
        generator_gap=gap,
        generator_bound=bound.bound,
        generator_bound_applicable=bound.applicable,
        coefficient_gap_series=c_gap,
        coefficient_bound_series=c_bound,
        frobenius_ratios={
            "overlap": float(np.linalg.norm(dS) / np.linalg.norm(S)),
            "projected_hamiltonian": float(np.linalg.norm(dH) / np.linalg.norm(HK)),
        },
    )
