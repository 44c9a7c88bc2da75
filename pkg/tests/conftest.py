import numpy as np
import pytest

from liftrom import pipeline
from liftrom.config import RunConfig, bundled_config


@pytest.fixture(scope="session")
def bench_config():
    return RunConfig.from_dict(bundled_config("paper"))


@pytest.fixture(scope="session")
def bench_setup(bench_config):
    return pipeline.prepare(bench_config)


@pytest.fixture(scope="session")
def bench_report(bench_config):
    return pipeline.run_benchmark(bench_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
