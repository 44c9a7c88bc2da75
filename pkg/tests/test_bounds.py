import numpy as np
import pytest

from liftrom.bounds import BOUNDS, run_bound_suite


def test_zero_perturbation_single_trial():
    r = run_bound_suite(1, seed=0, zero_perturbation=True)
    assert r.total_violations == 0
    assert r.evaluated["fixed_frame"] == 1
    # zero injected perturbation gives zero gaps, so margins equal the slack
    assert r.worst_margin["generator"] == pytest.approx(1e-8, abs=1e-12)


def test_suite_is_deterministic():
    a, b = run_bound_suite(20, seed=5).to_dict(), run_bound_suite(20, seed=5).to_dict()
    a.pop("elapsed_s"), b.pop("elapsed_s")
    assert a == b


def test_adversarial_suite_holds():
    r = run_bound_suite(100, seed=2, adversarial=True)
    assert r.total_violations == 0
    assert set(r.violations) == set(BOUNDS)


def test_rejects_zero_trials():
    with pytest.raises(ValueError):
        run_bound_suite(0)
