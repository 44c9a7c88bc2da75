"""Fixed-frame McLachlan reduction of the lifted Schrödinger flow.

For a frame ``V`` the coefficient velocity minimizing ``||V c' + i H V c||`` solves
``i S c' = H_K c`` with ``S = V^H V`` and ``H_K = V^H H V``.  Everything here works with the
pencil ``(H_K, S)`` through its generalized eigendecomposition, so reduced trajectories are
exact in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import cumulative_trapezoid

from .model import SemidiscreteModel

RANK_TOL = 1e-12


class RankDeficientFrameError(ValueError):
    pass


class PencilNotDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Frame:
    columns: np.ndarray
    snapshot_times: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.columns.shape[1]

    @property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.columns, compute_uv=False)

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])

    @property
    def norm(self) -> float:
        return float(self.singular_values[0])

    def is_full_rank(self, tol: float = RANK_TOL) -> bool:
        s = self.singular_values
        return bool(s[0] > 0 and s[-1] >= tol * s[0])


@dataclass(frozen=True)
class Pencil:
    overlap: np.ndarray
    projected_h: np.ndarray
    floor: float
    floored_overlap: np.ndarray

    @property
    def m(self) -> int:
        return self.overlap.shape[0]

    @property
    def floor_active(self) -> bool:
        return bool(np.linalg.eigvalsh(self.overlap)[0] < self.floor)

    def gram(self, floored: bool = True) -> np.ndarray:
        return self.floored_overlap if floored else self.overlap


@dataclass(frozen=True)
class ReducedTrajectory:
    times: np.ndarray
    coefficients: np.ndarray  # (n_times, m)
    lifted_states: np.ndarray | None  # (n_times, M)
    gram_norm: np.ndarray


def hermitian_part(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


def floor_spectrum(S: np.ndarray, floor: float) -> np.ndarray:
    """Raise eigenvalues of the Hermitian ``S`` below ``floor`` up to ``floor``."""
    w, U = np.linalg.eigh(S)
    if floor <= 0 or w[0] >= floor:
        return S.copy()
    return hermitian_part((U * np.maximum(w, floor)) @ U.conj().T)


def resolve_floor(S: np.ndarray, floor: float, mode: str = "absolute") -> float:
    """Absolute threshold for ``floor``; ``mode="relative"`` scales it by ``||S||_2``."""
    if mode == "absolute":
        return float(floor)
    if mode == "relative":
        return float(floor * np.linalg.eigvalsh(S)[-1])
    raise ValueError(f"unknown floor mode {mode!r}")


def _apply(H, X):
    if hasattr(H, "apply_hamiltonian"):
        return H.apply_hamiltonian(X)
    return np.asarray(H) @ X


def build_snapshot_frame(lift, psi0, taus) -> Frame:
    """Columns ``exp(-i H tau_l) psi0``, left unorthogonalized."""
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise ValueError("need at least one snapshot time")
    if np.any(np.diff(taus) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    psi0 = np.asarray(getattr(psi0, "amplitudes", psi0))
    cols = np.column_stack([lift.evolve(psi0, t) for t in taus])
    return Frame(cols, taus)


def assemble_pencil(frame: Frame, H, floor: float = 1e-2, floor_mode: str = "absolute") -> Pencil:
    if not frame.is_full_rank():
        s = frame.singular_values
        raise RankDeficientFrameError(
            f"frame is numerically rank deficient: sigma_min/sigma_max = {s[-1] / s[0]:.3e} < {RANK_TOL:g}"
        )
    V = frame.columns
    S = hermitian_part(V.conj().T @ V)
    HK = hermitian_part(V.conj().T @ _apply(H, V))
    threshold = resolve_floor(S, floor, floor_mode)
    return Pencil(S, HK, threshold, floor_spectrum(S, threshold))


def initial_coefficients(frame: Frame, pencil: Pencil, psi0, floored: bool = True) -> np.ndarray:
    """Solve ``S c0 = V^H psi0`` (floored overlap by default) so ``V c0`` projects ``psi0``."""
    psi0 = np.asarray(getattr(psi0, "amplitudes", psi0))
    rhs = frame.columns.conj().T @ psi0
    return sla.solve(pencil.gram(floored), rhs, assume_a="her")


def _generalized_eig(HK: np.ndarray, S: np.ndarray):
    try:
        return sla.eigh(HK, S)
    except np.linalg.LinAlgError as exc:
        raise PencilNotDefiniteError(f"overlap matrix is not positive definite: {exc}") from None


def integrate_reduced(
    pencil: Pencil,
    c0: np.ndarray,
    times,
    frame: Frame | None = None,
    floored: bool = True,
) -> ReducedTrajectory:
    """``c(t) = exp(-i t S^{-1} H_K) c0`` via ``H_K y = theta S y`` with ``Y^H S Y = I``."""
    S = pencil.gram(floored)
    return _pencil_flow(pencil.projected_h, S, c0, times, frame, generator_sign=-1j)


def _pencil_flow(K, S, c0, times, frame, generator_sign):
    times = np.asarray(times, dtype=float)
    theta, Y = _generalized_eig(K, S)
    modal = Y.conj().T @ (S @ np.asarray(c0, dtype=complex))
    coeffs = (np.exp(generator_sign * np.outer(times, theta)) * modal) @ Y.T
    gram = np.real(np.einsum("ti,ij,tj->t", coeffs.conj(), S, coeffs))
    lifted = coeffs @ frame.columns.T if frame is not None else None
    return ReducedTrajectory(times, coeffs, lifted, gram)


def projector(frame: Frame, pencil: Pencil, floored: bool = True) -> np.ndarray:
    V = frame.columns
    return V @ sla.solve(pencil.gram(floored), V.conj().T, assume_a="her")


def projection_defect(frame: Frame, pencil: Pencil, H, psi_m, floored: bool = True) -> np.ndarray:
    """``eta_V = ||(I - P_V) H psi_m||`` for one state or a stack of states (rows)."""
    psi_m = np.asarray(psi_m)
    single = psi_m.ndim == 1
    X = np.atleast_2d(psi_m).T  # columns
    HX = _apply(H, X)
    V = frame.columns
    resid = HX - V @ sla.solve(pencil.gram(floored), V.conj().T @ HX, assume_a="her")
    eta = np.linalg.norm(resid, axis=0)
    return float(eta[0]) if single else eta


def out_of_span(frame: Frame, pencil: Pencil, psi, floored: bool = False) -> float:
    """``||(I - P_V) psi||``."""
    psi = np.asarray(getattr(psi, "amplitudes", psi))
    V = frame.columns
    return float(np.linalg.norm(psi - V @ sla.solve(pencil.gram(floored), V.conj().T @ psi, assume_a="her")))


def cumulative_defect(defect_series, initial_residual: float, times) -> np.ndarray:
    """``delta_V(t) = ||(I - P_V) psi0|| + int_0^t eta_V``, trapezoid rule on ``times``."""
    eta = np.asarray(defect_series, dtype=float)
    times = np.asarray(times, dtype=float)
    if eta.shape != times.shape:
        raise ValueError("defect series and time grid differ in length")
    if times.size == 1:
        return np.array([initial_residual])
    return initial_residual + cumulative_trapezoid(eta, times, initial=0.0)


def galerkin_residual(frame: Frame, H, trajectory: ReducedTrajectory, pencil: Pencil, floored: bool = True) -> np.ndarray:
    """``||V^H (psi_m' + i H psi_m)||`` along the trajectory, with ``psi_m' = V S^{-1}(-i H_K c)``."""
    V = frame.columns
    C = trajectory.coefficients.T
    cdot = sla.solve(pencil.gram(floored), -1j * (pencil.projected_h @ C), assume_a="her")
    resid = V.conj().T @ (V @ cdot + 1j * _apply(H, V @ C))
    return np.linalg.norm(resid, axis=0)


def mclachlan_functional(frame: Frame, H, c: np.ndarray, cdot: np.ndarray) -> float:
    """``J(cdot; c) = ||V cdot + i H V c||^2``."""
    V = frame.columns
    r = V @ cdot + 1j * _apply(H, V @ c)
    return float(np.real(np.vdot(r, r)))


def project_nonunitary(model: SemidiscreteModel, frame_phys: Frame, times, u0) -> np.ndarray:
    """Classical lane: ``S c' = A_K c`` with ``A_K = V^H A_h V``; returns ``V c(t)`` per time (rows)."""
    V = frame_phys.columns
    S = hermitian_part(V.conj().T @ V)
    AK = hermitian_part(V.conj().T @ model.generator @ V)
    u0 = np.asarray(getattr(u0, "values", u0))
    c0 = sla.solve(S, V.conj().T @ u0, assume_a="her")
    traj = _pencil_flow(AK, S, c0, times, frame_phys, generator_sign=1.0)
    states = traj.lifted_states
    return states.real if np.isrealobj(V) else states


def arnoldi_frame(H, psi0, m: int) -> tuple[Frame, np.ndarray]:
    """Orthonormal Krylov frame ``K_m(H, psi0)`` and the ``(m+1) x m`` Hessenberg matrix."""
    psi0 = np.asarray(getattr(psi0, "amplitudes", psi0), dtype=complex)
    Q = np.zeros((psi0.size, m + 1), dtype=complex)
    Hs = np.zeros((m + 1, m), dtype=complex)
    Q[:, 0] = psi0 / np.linalg.norm(psi0)
    for j in range(m):
        w = _apply(H, Q[:, j])
        for _ in range(2):  # reorthogonalize once
            h = Q[:, : j + 1].conj().T @ w
            w = w - Q[:, : j + 1] @ h
            Hs[: j + 1, j] += h
        Hs[j + 1, j] = np.linalg.norm(w)
        if Hs[j + 1, j] < RANK_TOL:
            raise RankDeficientFrameError(f"Krylov space is invariant at dimension {j + 1}")
        Q[:, j + 1] = w / Hs[j + 1, j]
    return Frame(Q[:, :m]), Hs
