"""Semidiscrete backward diffusion on a uniform Dirichlet grid and its classical baselines.

The backward model is ``du/dt = A_h u`` with ``A_h = -nu * D_h``, where ``D_h`` is the
second-difference Laplacian on the interior nodes of ``(0, L)``.  ``A_h`` is positive
semidefinite, so every mode grows and fine structure grows fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst


@dataclass(frozen=True)
class GridSpec:
    n_interior: int
    length: float = 1.0
    diffusivity: float = 0.05

    def __post_init__(self):
        if int(self.n_interior) != self.n_interior or self.n_interior < 1:
            raise ValueError(f"n_interior must be a positive integer, got {self.n_interior!r}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length!r}")
        if not self.diffusivity > 0:
            raise ValueError(f"diffusivity must be positive, got {self.diffusivity!r}")

    @property
    def spacing(self) -> float:
        return self.length / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.spacing * np.arange(1, self.n_interior + 1)


@dataclass(frozen=True)
class SemidiscreteModel:
    grid: GridSpec
    laplacian: np.ndarray
    generator: np.ndarray
    # cached symmetric eigendecomposition of the generator, ascending
    eigenvalues: np.ndarray = field(repr=False, compare=False, default=None)
    eigenvectors: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.eigenvalues is None or self.eigenvectors is None:
            lam, vec = np.linalg.eigh(self.generator)
            object.__setattr__(self, "eigenvalues", lam)
            object.__setattr__(self, "eigenvectors", vec)

    @property
    def n(self) -> int:
        return self.generator.shape[0]


@dataclass(frozen=True)
class InitialState:
    values: np.ndarray
    sine_coefficients: np.ndarray

    @classmethod
    def from_sine_coefficients(cls, coefficients, n_interior: int) -> "InitialState":
        """Synthesize grid values from sine coefficients ``a_k`` (k = 1, 2, ...).

        Coefficients beyond ``n_interior`` alias on the grid and are rejected.
        """
        a = np.zeros(n_interior)
        c = np.asarray(coefficients, dtype=float)
        if c.size > n_interior:
            raise ValueError(
                f"{c.size} sine coefficients given but the grid resolves only {n_interior} modes"
            )
        a[: c.size] = c
        return cls(values=sine_synthesis(a), sine_coefficients=a)

    @classmethod
    def from_values(cls, values) -> "InitialState":
        v = np.asarray(values, dtype=float)
        return cls(values=v, sine_coefficients=sine_analysis(v))


def sine_synthesis(coefficients: np.ndarray) -> np.ndarray:
    """Grid values ``u_i = sum_k a_k sin(k pi i / (N+1))``."""
    return dst(np.asarray(coefficients, dtype=float), type=1) / 2.0


def sine_analysis(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`sine_synthesis`."""
    v = np.asarray(values, dtype=float)
    return dst(v, type=1) / (v.size + 1)


@dataclass(frozen=True)
class FilterConfig:
    cutoff_mode: int = 4
    ridge: float = 0.0
    timestep: float = 0.03

    def __post_init__(self):
        if self.cutoff_mode < 1:
            raise ValueError(f"cutoff_mode must be >= 1, got {self.cutoff_mode}")
        if self.ridge < 0:
            raise ValueError(f"ridge must be nonnegative, got {self.ridge}")
        if not self.timestep > 0:
            raise ValueError(f"timestep must be positive, got {self.timestep}")


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped grid vectors; ``states[i]`` lives at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def build_interior_laplacian(grid: GridSpec) -> np.ndarray:
    n, h = grid.n_interior, grid.spacing
    off = np.ones(n - 1)
    return (np.diag(-2.0 * np.ones(n)) + np.diag(off, 1) + np.diag(off, -1)) / h**2


def laplacian_eigenvalues(grid: GridSpec) -> np.ndarray:
    """Closed-form Dirichlet spectrum ``-(4/h^2) sin^2(k pi h / (2L))``, k = 1..N."""
    h, L = grid.spacing, grid.length
    k = np.arange(1, grid.n_interior + 1)
    return -(4.0 / h**2) * np.sin(k * np.pi * h / (2 * L)) ** 2


def build_backward_generator(laplacian: np.ndarray, nu: float, grid: GridSpec | None = None) -> SemidiscreteModel:
    if not nu > 0:
        raise ValueError(f"diffusivity must be positive, got {nu!r}")
    D = np.asarray(laplacian, dtype=float)
    if not np.array_equal(D, D.T):
        raise ValueError("laplacian must be symmetric")
    if grid is None:
        grid = GridSpec(n_interior=D.shape[0], length=1.0, diffusivity=nu)
    elif grid.diffusivity != nu:
        grid = GridSpec(grid.n_interior, grid.length, nu)
    return SemidiscreteModel(grid=grid, laplacian=D, generator=-nu * D)


def build_model(grid: GridSpec) -> SemidiscreteModel:
    return build_backward_generator(build_interior_laplacian(grid), grid.diffusivity, grid)


def _values(u0) -> np.ndarray:
    return np.asarray(u0.values if isinstance(u0, InitialState) else u0, dtype=float)


def exact_semidiscrete_solution(model: SemidiscreteModel, u0, t: float) -> np.ndarray:
    """``exp(t A_h) u0`` through the symmetric eigendecomposition."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    lam, Q = model.eigenvalues, model.eigenvectors
    return Q @ (np.exp(lam * t) * (Q.T @ _values(u0)))


def analytic_continuum_solution(sine_coeffs, nu: float, length: float, t: float, eval_grid) -> np.ndarray:
    """Backward-heat series ``sum_k a_k exp(nu (k pi/L)^2 t) sin(k pi x / L)`` at ``eval_grid``."""
    a = np.asarray(sine_coeffs, dtype=float)
    k = np.arange(1, a.size + 1)
    x = np.asarray(eval_grid, dtype=float)
    growth = a * np.exp(nu * (k * np.pi / length) ** 2 * t)
    return np.sin(np.outer(x, k) * np.pi / length) @ growth


def crank_nicolson_march(model: SemidiscreteModel, u0, dt: float, T: float) -> Trajectory:
    if not dt > 0:
        raise ValueError("dt must be positive")
    A = model.generator
    lam = model.eigenvalues
    # (I - dt/2 A) is singular exactly when some eigenvalue equals 2/dt
    pivot = 1.0 - 0.5 * dt * lam
    bad = np.abs(pivot) <= 1e-12 * max(1.0, np.max(np.abs(lam)) * dt)
    if np.any(bad):
        raise np.linalg.LinAlgError(
            f"Crank-Nicolson step matrix is singular: generator eigenvalue {lam[bad][0]!r} equals 2/dt"
        )
    n_steps = _step_count(T, dt)
    eye = np.eye(model.n)
    step = np.linalg.solve(eye - 0.5 * dt * A, eye + 0.5 * dt * A)
    return _march(step, _values(u0), dt, n_steps)


def spectral_lowpass_evolve(model: SemidiscreteModel, u0, k_star: int, t: float) -> np.ndarray:
    """Grow only the ``k_star`` slowest eigenmodes of ``A_h``; discard the rest (sharp window)."""
    if not 1 <= k_star <= model.n:
        raise ValueError(f"k_star must lie in [1, {model.n}], got {k_star}")
    lam, Q = model.eigenvalues[:k_star], model.eigenvectors[:, :k_star]
    return Q @ (np.exp(lam * t) * (Q.T @ _values(u0)))


def tikhonov_march(model: SemidiscreteModel, u0, dt: float, alpha: float, T: float) -> Trajectory:
    """Explicit predictor followed by a ridge corrector penalizing ``||D_h u||``.

    Each step solves ``argmin_u ||u - (I + dt A_h) u_n||^2 + alpha ||D_h u||^2``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    D = model.laplacian
    eye = np.eye(model.n)
    step = np.linalg.solve(eye + alpha * D.T @ D, eye + dt * model.generator)
    return _march(step, _values(u0), dt, _step_count(T, dt))


def tikhonov_mode_gain(model: SemidiscreteModel, dt: float, alpha: float) -> np.ndarray:
    """Per-step amplification of each eigenmode under :func:`tikhonov_march`."""
    lam = model.eigenvalues
    d = lam / model.grid.diffusivity  # eigenvalues of -D_h
    return (1.0 + dt * lam) / (1.0 + alpha * d**2)


def matched_ridge(model: SemidiscreteModel, dt: float, k_star: int) -> float:
    """Ridge strength that freezes the first discarded mode ``k_star + 1`` (unit step gain).

    Modes above the cutoff then decay, modes at or below it still grow, which is the
    Tikhonov analogue of the sharp window at ``k_star``.
    """
    if k_star >= model.n:
        return 0.0
    lam = model.eigenvalues[k_star]
    d = lam / model.grid.diffusivity
    return dt * lam / d**2


def _step_count(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 0 or abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def _march(step: np.ndarray, u: np.ndarray, dt: float, n_steps: int) -> Trajectory:
    states = np.empty((n_steps + 1, u.size))
    states[0] = u
    for n in range(n_steps):
        states[n + 1] = step @ states[n]
    return Trajectory(times=dt * np.arange(n_steps + 1), states=states)
