import numpy as np
import pytest

from gvc_randlab.model import ModelParams, build_pair, instance_rng, sample_table


@pytest.fixture
def small_instance():
    """N=5, mu=1, mu_f=0.01 table with its share matrices (fixed seed)."""
    table = sample_table(ModelParams(5, 1.0, 0.01, seed=11), instance_rng(11, 0))
    return table, build_pair(table)


def random_instances(count, n=50, mu=1.0, mu_f=0.01, seed=123):
    params = ModelParams(n, mu, mu_f, seed=seed)
    for k in range(count):
        table = sample_table(params, instance_rng(seed, k))
        yield table, build_pair(table)


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("SECTOR,Agri,Manu,FINAL_DEMAND\nAgri,0,1,1\nManu,2,0,1\n", encoding="utf-8")
    return path


def assert_all_ge_one(x):
    assert np.all(np.asarray(x) >= 1.0 - 1e-12)


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY

    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
