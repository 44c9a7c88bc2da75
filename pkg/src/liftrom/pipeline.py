"""End-to-end benchmark: model, lift, snapshot frame, exact and sampled reduced flows, baselines."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from .config import RunConfig
from .estimator import SampledPencil, ShotConfig, count_circuits, decompose_lift, sample_pencil
from .lift import LiftRealization, LiftSpec, build_lift, inject, recover
from .mclachlan import (
    Frame,
    Pencil,
    ReducedTrajectory,
    assemble_pencil,
    build_snapshot_frame,
    cumulative_defect,
    floor_spectrum,
    galerkin_residual,
    initial_coefficients,
    integrate_reduced,
    out_of_span,
    projection_defect,
    resolve_floor,
)
from .model import (
    GridSpec,
    InitialState,
    SemidiscreteModel,
    build_model,
    crank_nicolson_march,
    exact_semidiscrete_solution,
    matched_ridge,
    spectral_lowpass_evolve,
    tikhonov_march,
)

METHODS = ("crank_nicolson", "lifted_exact", "projected_exact", "projected_sampled")
PUBLISHED_CIRCUITS = {"hadamard_circuits": 546, "estimator_calls": 4}
EXACT_PENCIL_KAPPA_MAX = 1e8
SEED_SCHEME = "numpy SeedSequence(seed, spawn_key=(kind, j, l)); kind 0 overlap, 1 H_K off-diagonal, 2 H_K diagonal"


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


@dataclass
class Setup:
    """Seed-independent artifacts of a run."""

    config: RunConfig
    model: SemidiscreteModel
    u0: InitialState
    lift: LiftRealization
    times: np.ndarray
    k_star: int
    ridge: float
    psi0: np.ndarray  # raw lifted initial state J u0
    scale: float  # ||psi0||; the frame is built from psi0 / scale
    frame: Frame
    pencil: Pencil
    decomposition: object
    c0_floored: np.ndarray
    reference: np.ndarray  # spectral low-pass states, rows per time
    exact: np.ndarray  # unfiltered semidiscrete states
    lifted_states: np.ndarray  # normalized exact lifted states
    floored: ReducedTrajectory

    @property
    def psi(self) -> np.ndarray:
        return self.psi0 / self.scale

    def recovered(self, coefficients) -> np.ndarray:
        """Physical states ``||psi0|| R V c`` (real part) for coefficient rows."""
        lifted = np.asarray(coefficients) @ self.frame.columns.T
        return self.scale * recover(self.lift, lifted).values


def _stage(name):
    def wrap(fn):
        def inner(*a, **k):
            try:
                return fn(*a, **k)
            except StageError:
                raise
            except (ValueError, np.linalg.LinAlgError, ArithmeticError) as exc:
                raise StageError(name, exc) from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


def resolve(config: RunConfig) -> tuple[dict, SemidiscreteModel, LiftSpec, float]:
    """Concrete values for every ``"auto"`` field."""
    c = config.to_dict()
    g = c["grid"]
    model = build_model(GridSpec(g["n_interior"], g["length"], g["nu"]))
    k_star = c["baselines"]["cutoff_mode"]
    lf = c["lift"]
    spec = LiftSpec.resolve(
        model, config.T, k_star, lf["aux_points"], lf["aux_radius"], lf["recovery_point"], lf["padded_dim"],
    )
    lf.update(aux_radius=spec.aux_radius, recovery_point=spec.recovery_node, padded_dim=spec.padded_dim)
    ridge = c["baselines"]["ridge"]
    if ridge == "auto":
        ridge = matched_ridge(model, c["baselines"]["timestep"], k_star)
    c["baselines"]["ridge"] = float(ridge)
    return c, model, spec, float(ridge)


def describe(config: RunConfig) -> dict:
    c, model, spec, ridge = resolve(config)
    return {
        "config": c,
        "lifted_dim": spec.lifted_dim,
        "generator_eigenvalues": model.eigenvalues.tolist(),
        "recovery_window": {"node": spec.recovery_node, "modes_inside": int(np.sum(model.eigenvalues * config.T <= spec.recovery_node))},
        "p_spacing": 2 * spec.aux_radius / spec.aux_points,
    }


@_stage("setup")
def prepare(config: RunConfig) -> Setup:
    resolved, model, spec, ridge = resolve(config)
    config = RunConfig.from_dict(resolved)
    times = config.times
    k_star = config["baselines"]["cutoff_mode"]
    u0 = InitialState.from_sine_coefficients(config["initial_condition"]["sine_coefficients"], model.n)
    lift = build_lift(model, spec)
    psi0 = inject(lift, u0).amplitudes
    scale = float(np.linalg.norm(psi0))
    if scale == 0:
        raise ValueError("initial condition is zero")
    frame = build_snapshot_frame(lift, psi0 / scale, config["frame"]["snapshot_times"])
    pc = config["pencil"]
    pencil = assemble_pencil(frame, lift, pc["floor"], pc["floor_mode"])
    c0 = initial_coefficients(frame, pencil, psi0 / scale, floored=True)
    floored = integrate_reduced(pencil, c0, times, frame=frame, floored=True)
    reference = np.array([spectral_lowpass_evolve(model, u0, k_star, t) for t in times])
    exact = np.array([exact_semidiscrete_solution(model, u0, t) for t in times])
    lifted = np.array([lift.evolve(psi0 / scale, t) for t in times])
    return Setup(
        config=config, model=model, u0=u0, lift=lift, times=times, k_star=k_star, ridge=ridge,
        psi0=psi0, scale=scale, frame=frame, pencil=pencil, decomposition=decompose_lift(lift),
        c0_floored=c0, reference=reference, exact=exact, lifted_states=lifted, floored=floored,
    )


def shot_config(config: RunConfig) -> ShotConfig:
    e = config["estimator"]
    return ShotConfig(e["shots"], e["seed"], e["mode"], e["noiseless"])


@dataclass
class SampledLane:
    sampled: SampledPencil
    floor: float
    trajectory: ReducedTrajectory
    states: np.ndarray
    relative_error: np.ndarray


@_stage("sampling")
def sampled_lane(setup: Setup, cfg: ShotConfig) -> SampledLane:
    sp = sample_pencil(setup.frame, setup.pencil, setup.decomposition, cfg, H=setup.lift)
    pc = setup.config["pencil"]
    floor_hat = resolve_floor(sp.overlap_hat, pc["floor"], pc["floor_mode"])
    sampled = Pencil(sp.overlap_hat, sp.projected_h_hat, floor_hat, floor_spectrum(sp.overlap_hat, floor_hat))
    traj = integrate_reduced(sampled, setup.c0_floored, setup.times, frame=setup.frame, floored=True)
    states = setup.recovered(traj.coefficients)
    return SampledLane(sp, floor_hat, traj, states, dg.relative_L2_error(states, setup.reference))


def _march_at(traj, times):
    idx = np.rint(np.asarray(times) / (traj.times[1] - traj.times[0] if traj.times.size > 1 else 1.0)).astype(int)
    return traj.states[idx]


@dataclass
class RunReport:
    config: dict
    resolved: dict
    ledger: dg.ErrorLedger | None
    perturbation: dg.PerturbationReport | None
    circuits: dict
    endpoints: dict
    seeds: dict
    diagnostics: dict = field(default_factory=dict)
    end_states: dict = field(default_factory=dict)
    extra_lanes: dict = field(default_factory=dict)
    caveats: list = field(default_factory=list)

    @property
    def methods(self) -> list:
        return list(self.ledger.relative_errors) if self.ledger is not None else []

    @property
    def violations(self) -> list:
        return [name for name, chk in self.diagnostics.get("checks", {}).items() if chk.get("ok") is False]

    def to_dict(self) -> dict:
        led = self.ledger
        ledger = None
        if led is not None:
            ledger = {
                "times": led.times.tolist(),
                **{k: v.tolist() for k, v in led.columns.items()},
                "interpolation_norm": led.interpolation_norm,
                "recovery_norm": led.recovery_norm,
                "relative_errors": {k: v.tolist() for k, v in led.relative_errors.items()},
                "absolute_errors": {k: v.tolist() for k, v in led.absolute_errors.items()},
            }
        return {
            "config": copy.deepcopy(self.config),
            "resolved": self.resolved,
            "ledger": ledger,
            "perturbation": self.perturbation.to_dict() if self.perturbation is not None else None,
            "circuits": self.circuits,
            "endpoints": self.endpoints,
            "seeds": self.seeds,
            "diagnostics": self.diagnostics,
            "end_states": {k: np.asarray(v).tolist() for k, v in self.end_states.items()},
            "extra_lanes": self.extra_lanes,
            "caveats": list(self.caveats),
        }


def run_benchmark(config: RunConfig) -> RunReport:
    setup = prepare(config)
    lane = sampled_lane(setup, shot_config(setup.config))
    return _assemble_report(setup, lane)


@_stage("diagnostics")
def _assemble_report(setup: Setup, lane: SampledLane) -> RunReport:
    cfg = setup.config
    model, lift, frame, pencil = setup.model, setup.lift, setup.frame, setup.pencil
    times, s = setup.times, setup.scale
    bl = cfg["baselines"]
    caveats = list(lane.sampled.caveats)

    cn = _march_at(crank_nicolson_march(model, setup.u0, bl["timestep"], setup.config.T), times)
    tik = _march_at(tikhonov_march(model, setup.u0, bl["timestep"], setup.ridge, setup.config.T), times)
    lifted = recover(lift, s * setup.lifted_states)
    projected = setup.recovered(setup.floored.coefficients)
    lanes = {
        "crank_nicolson": cn,
        "lifted_exact": lifted.values,
        "projected_exact": projected,
        "projected_sampled": lane.states,
    }

    # exact-pencil lane for the fixed-frame bound: unfloored overlap, exact projection
    kappa = dg.condition_number(pencil.overlap)
    checks: dict = {}
    V_norm = frame.norm
    if kappa <= EXACT_PENCIL_KAPPA_MAX:
        c_ex0 = initial_coefficients(frame, pencil, setup.psi, floored=False)
        ex = integrate_reduced(pencil, c_ex0, times, frame=frame, floored=False)
        eta = projection_defect(frame, pencil, lift, ex.lifted_states, floored=False)
        delta = cumulative_defect(eta, out_of_span(frame, pencil, setup.psi), times)
        thm2 = dg.verify_fixed_frame_bound(setup.lifted_states, ex.lifted_states, delta)
        checks["fixed_frame_bound"] = thm2.to_dict()
        rec_ex = setup.recovered(ex.coefficients)
        eps_lift = np.linalg.norm(setup.exact - lifted.values, axis=1)
        eq17 = dg.BoundCheck(np.linalg.norm(setup.exact - rec_ex, axis=1), eps_lift + lift.recovery_norm * s * delta)
        checks["recovered_bound"] = eq17.to_dict()
        gram = ex.gram_norm
        checks["gram_conservation"] = {
            "ok": bool(np.max(np.abs(gram - gram[0])) <= 1e-8 * gram[0]),
            "max_relative_drift": float(np.max(np.abs(gram - gram[0])) / gram[0]),
        }
        g_res = galerkin_residual(frame, lift, ex, pencil, floored=False)
        g_scale = lift.hamiltonian_norm * np.linalg.norm(ex.coefficients, axis=1)
        checks["galerkin_orthogonality"] = {
            "ok": bool(np.all(g_res <= 1e-8 * g_scale)), "max_scaled": float(np.max(g_res / g_scale)),
        }
        c_ex = ex.coefficients
    else:
        caveats.append(f"kappa(S)={kappa:.3e} too large for the unfloored fixed-frame lane; floored lane used")
        ex = setup.floored
        eta = projection_defect(frame, pencil, lift, ex.lifted_states, floored=True)
        delta = cumulative_defect(eta, out_of_span(frame, pencil, setup.psi, floored=True), times)
        eps_lift = np.linalg.norm(setup.exact - lifted.values, axis=1)
        c_ex = ex.coefficients

    eps_proj = s * delta
    eps_floor = s * V_norm * np.linalg.norm(setup.floored.coefficients - c_ex, axis=1)
    eps_sample = s * V_norm * np.linalg.norm(lane.trajectory.coefficients - setup.floored.coefficients, axis=1)
    eps_space = dg.space_error(model.grid, setup.u0.sine_coefficients, times, setup.exact)
    cn_norm = dg.ContinuumNorm(model.grid)
    from .model import analytic_continuum_solution

    observed = np.array([
        cn_norm.norm(
            analytic_continuum_solution(setup.u0.sine_coefficients, model.grid.diffusivity, model.grid.length, t, cn_norm.nodes)
            - cn_norm.interpolation @ lane.states[i]
        )[0]
        for i, t in enumerate(times)
    ])

    floored_residual = galerkin_residual(frame, lift, setup.floored, pencil, floored=True)
    pert = dg.perturbation_report(
        pencil, lane.sampled.overlap_hat, lane.sampled.projected_h_hat, lane.floor,
        setup.floored.coefficients, lane.trajectory.coefficients, times, setup.c0_floored,
    )
    if pert.generator_bound_applicable:
        checks["generator_bound"] = {"ok": bool(pert.generator_bound_holds), "neumann": pert.neumann_floored}
    checks["coefficient_bound"] = {"ok": pert.coefficient_bound_holds}

    ledger = dg.layered_error_report(
        times, eps_space, eps_lift, eps_proj, eps_floor, eps_sample, observed,
        cn_norm.interpolation_norm, lift.recovery_norm, lanes=lanes, reference=setup.reference, checks=checks,
    )
    tik_err = dg.relative_L2_error(tik, setup.reference)

    hadamard, calls = count_circuits(frame.m, setup.decomposition)
    endpoints = {
        name: {"final": float(err[-1]), "max": float(np.max(err)), "argmax_t": float(times[int(np.argmax(err))])}
        for name, err in ledger.relative_errors.items()
    }
    sampled_gram = np.real(np.einsum("ti,ij,tj->t", lane.trajectory.coefficients.conj(), pencil.overlap, lane.trajectory.coefficients))
    spec = lift.spec
    resolved = {
        "aux_radius": spec.aux_radius,
        "recovery_node": spec.recovery_node,
        "lifted_dim": spec.lifted_dim,
        "p_spacing": 2 * spec.aux_radius / spec.aux_points,
        "ridge": setup.ridge,
        "floor_threshold": pencil.floor,
        "floor_threshold_sampled": lane.floor,
        "floor_mode": cfg["pencil"]["floor_mode"],
        "initial_lifted_norm": s,
        "recovery_norm": lift.recovery_norm,
        "interpolation_norm": cn_norm.interpolation_norm,
        "continuum_norm": "trapezoid L2 on an 8x refined grid, piecewise-linear I_h",
        "snapshot_norms": "known exactly (unit after state preparation)",
        "pauli_terms": len(setup.decomposition),
        "kappa_S": kappa,
    }
    return RunReport(
        config=cfg.to_dict(),
        resolved=resolved,
        ledger=ledger,
        perturbation=pert,
        circuits={"hadamard_circuits": hadamard, "estimator_calls": calls, "published": PUBLISHED_CIRCUITS,
                  "shots_total": lane.sampled.shot_ledger},
        endpoints=endpoints,
        seeds={"root": cfg["estimator"]["seed"], "scheme": SEED_SCHEME},
        diagnostics={
            "checks": ledger.checks,
            "floored_galerkin_residual_max": float(np.max(floored_residual)),
            "floor_active": pencil.floor_active,
            "sampled_gram_drift": float(np.max(np.abs(sampled_gram - sampled_gram[0])) / sampled_gram[0]),
            "frobenius_ratios": pert.frobenius_ratios,
        },
        end_states={"x": model.grid.nodes, "reference": setup.reference[-1], **{k: v[-1] for k, v in lanes.items()}},
        extra_lanes={"tikhonov": {"relative_l2": tik_err.tolist(), "ridge": setup.ridge}},
        caveats=caveats,
    )


# --------------------------------------------------------------------------- sweeps


def sweep_override(config: RunConfig, field_name: str, value) -> RunConfig:
    """``frame.m`` is shorthand for ``m`` snapshot times spread evenly over ``[0, T]``."""
    if field_name == "frame.m":
        m = int(value)
        if m < 1:
            raise ValueError("frame.m must be >= 1")
        return config.with_overrides(**{"frame.snapshot_times": np.linspace(0.0, config.T, m).tolist()})
    return config.with_overrides(**{field_name: value})


def sweep_seed(root: int, value_index: int, trial: int) -> int:
    return int(np.random.SeedSequence(root, spawn_key=(4, value_index, trial)).generate_state(1)[0])


def sweep_threads() -> int:
    import os

    raw = os.environ.get("LIFTROM_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise ValueError(f"LIFTROM_THREADS must be an integer, got {raw!r}") from None


def run_sweep(config: RunConfig, field_name: str, values, directory, trials: int = 1, threads: int | None = None) -> list[dict]:
    """One run per (value, trial) in its own subdirectory; returns endpoint summaries in input order."""
    from concurrent.futures import ThreadPoolExecutor
    from pathlib import Path

    from .output import emit_outputs

    directory = Path(directory)
    root = config["estimator"]["seed"]
    jobs = []
    for j, value in enumerate(values):
        for i in range(trials):
            cfg = sweep_override(config, field_name, value)
            if trials > 1:
                cfg = cfg.with_overrides(**{"estimator.seed": sweep_seed(root, j, i)})
            sub = directory / f"{field_name}={value}" / (f"trial_{i:03d}" if trials > 1 else "")
            jobs.append((value, i, cfg, sub))

    def work(job):
        value, i, cfg, sub = job
        report = run_benchmark(cfg)
        emit_outputs(report, sub)
        return {
            "field": field_name, "value": value, "trial": i, "seed": cfg["estimator"]["seed"],
            "directory": str(sub), "endpoints": report.endpoints, "violations": report.violations,
        }

    with ThreadPoolExecutor(max_workers=threads or sweep_threads()) as pool:
        return list(pool.map(work, jobs))
