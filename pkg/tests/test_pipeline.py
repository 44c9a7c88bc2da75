import dataclasses

import numpy as np
import pytest

from liftrom import pipeline
from liftrom.pipeline import StageError


def test_report_blocks(bench_report):
    r = bench_report
    assert set(r.endpoints) == set(pipeline.METHODS)
    assert r.perturbation.generator_bound_applicable
    assert r.perturbation.generator_bound_holds
    assert r.perturbation.neumann_raw > 1 > r.perturbation.neumann_floored
    assert r.circuits["hadamard_circuits"] == 12 + 12 * r.resolved["pauli_terms"]
    assert r.resolved["recovery_norm"] == pytest.approx(np.exp(r.resolved["recovery_node"]))
    assert 1e3 <= r.resolved["kappa_S"] <= 1e5
    assert not r.violations


def test_lane_ordering(bench_report):
    e = {k: v["final"] for k, v in bench_report.endpoints.items()}
    assert e["crank_nicolson"] > max(e["lifted_exact"], e["projected_exact"], e["projected_sampled"])
    assert 0.12 <= e["lifted_exact"] <= 0.27
    assert 0.30 <= e["crank_nicolson"] <= 0.55


def test_sampled_noise_is_masked(bench_setup):
    base = pipeline.shot_config(bench_setup.config)
    exact = pipeline.dg.relative_L2_error(bench_setup.recovered(bench_setup.floored.coefficients), bench_setup.reference)[-1]
    finals, ratios = [], []
    for s in range(20):
        lane = pipeline.sampled_lane(bench_setup, dataclasses.replace(base, seed=s))
        finals.append(lane.relative_error[-1])
        ratios.append(lane.sampled.hamiltonian_ratio)
    assert np.median(ratios) > 1
    assert abs(np.median(finals) - exact) <= 0.10


def test_bound_chain_holds_at_every_sample(bench_report):
    led = bench_report.ledger
    assert np.all(led.observed_total <= led.total_bound)
    assert np.all(np.diff(led.eps_proj) >= 0)


def test_stage_labels(bench_config):
    bad = bench_config.with_overrides(**{"frame.snapshot_times": [0.0, 1e-14]})
    with pytest.raises(StageError, match=r"\[setup\]"):
        pipeline.prepare(bad)
