import pytest

from clusterlab import run
from services.demo import PUBLIC_OPERATIONS, run_demo


@pytest.fixture(scope="module")
def small_demo():
    return run_demo(seed=1, n_conditional_samples=20_000, threads=2)


def test_demo_exercises_every_public_operation(small_demo):
    assert set(PUBLIC_OPERATIONS) <= small_demo.operations_used


def test_demo_exact_stages_pass(small_demo):
    table = small_demo.table()
    exact = table[table["scenario"].str.startswith(("calculus", "invariance"))]
    assert len(exact) > 0
    assert exact["passed"].all(), exact[~exact["passed"]]


def test_demo_table_layout(small_demo):
    table = small_demo.table()
    assert list(table.columns) == ["scenario", "check", "value", "expected", "passed"]
    assert "calculus moving_maxima r=3" in set(table["scenario"])
    assert small_demo.to_text().count("\n") == len(table) + 1


def test_demo_is_deterministic(small_demo):
    again = run_demo(seed=1, n_conditional_samples=20_000, threads=1)
    assert again.table().equals(small_demo.table())


@pytest.mark.slow
def test_full_demo_passes(capsys):
    assert run(["demo", "--seed", "42"]) == 0
    assert "theta_hat" in capsys.readouterr().out
