import math

import numpy as np
import pytest

from services.core_types import ProcessSpec
from services.errors import BadArgument, Degenerate, WindowTooLarge
from services.estimation import window_law_from_path
from services.rng import make_rng
from services.simulators import (
    BinaryPath,
    exact_window_law,
    exceedance_times,
    induced_chain,
    markov_indicators,
    moving_maxima_indicators,
    moving_maxima_threshold,
    path_from_times,
    path_summary,
    run_lengths,
    simulate_path,
    stationary_marginal,
    urn_indicators,
    urn_spec,
)


MARKOV = ProcessSpec("markov_binary", {"p01": 0.1, "p11": 0.6})


def _transition_rate(bits: np.ndarray, previous: int) -> float:
    """Empirical P(I_{t+1} = 1 | I_t = previous)."""
    before, after = bits[:-1], bits[1:]
    return float(after[before == previous].mean())


def _runs_from_times(times: np.ndarray) -> np.ndarray:
    breaks = np.flatnonzero(np.diff(times) != 1) + 1
    return np.diff(np.concatenate([[0], breaks, [len(times)]]))


# -----------------------------------------------------------------------------
# helpers
# -----------------------------------------------------------------------------

def test_urn_spec_integer_counts():
    spec = urn_spec(0.5, 1e-3)
    assert (spec.params["g"], spec.params["y"], spec.params["r_balls"]) == (500, 499, 1)
    assert urn_spec(1.0, 0.01).params["y"] == 0


def test_urn_induces_two_state_chain():
    spec = ProcessSpec("urn", {"g": 2, "y": 1, "r_balls": 1})
    assert induced_chain(spec) == pytest.approx((0.25, 0.5))
    assert stationary_marginal(spec) == pytest.approx(1 / 3)


def test_stationary_marginals():
    assert stationary_marginal(MARKOV) == pytest.approx(0.2)
    assert stationary_marginal(ProcessSpec("moving_maxima", {"r": 3, "q": 0.99})) == pytest.approx(0.01)
    with pytest.raises(Degenerate):
        stationary_marginal(ProcessSpec("markov_binary", {"p01": 0.0, "p11": 1.0}))


def test_moving_maxima_threshold_is_marginal_quantile():
    spec = ProcessSpec("moving_maxima", {"r": 4, "q": 0.95})
    u = moving_maxima_threshold(spec)
    assert math.exp(-4 / u) == pytest.approx(0.95)


def test_run_lengths():
    assert run_lengths(np.array([1, 1, 0, 1, 0, 0, 1, 1, 1])).tolist() == [2, 1, 3]
    assert run_lengths(np.zeros(5)).tolist() == []


def test_binary_path_accessors():
    path = BinaryPath(np.array([0, 1, 1, 0]), MARKOV)
    assert path.to_text() == "0110"
    assert path.ones().tolist() == [1, 2]
    assert path.marginal() == 0.5


# -----------------------------------------------------------------------------
# dense simulators
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("spec", [
    MARKOV,
    ProcessSpec("urn", {"g": 1, "y": 1, "r_balls": 1}),
    ProcessSpec("moving_maxima", {"r": 3, "q": 0.9}),
])
def test_paths_are_reproducible(spec):
    a = simulate_path(spec, 5000, seed=7)
    b = simulate_path(spec, 5000, seed=7)
    c = simulate_path(spec, 5000, seed=8)
    assert np.array_equal(a.bits, b.bits)
    assert not np.array_equal(a.bits, c.bits)


def test_spec_seed_changes_the_stream():
    a = simulate_path(MARKOV, 5000, seed=7)
    b = simulate_path(MARKOV.with_seed(1), 5000, seed=7)
    assert not np.array_equal(a.bits, b.bits)


def test_markov_path_matches_stationary_law():
    path = markov_indicators(MARKOV, 400_000, seed=1)
    # var factor (1 + lambda) / (1 - lambda) = 3 for lambda = 0.5
    se = math.sqrt(0.2 * 0.8 * 3 / path.length)
    assert path.marginal() == pytest.approx(0.2, abs=5 * se)
    assert _transition_rate(path.bits, 1) == pytest.approx(0.6, abs=0.01)
    assert _transition_rate(path.bits, 0) == pytest.approx(0.1, abs=0.01)


def test_markov_path_with_flipping_transitions():
    spec = ProcessSpec("markov_binary", {"p01": 0.9, "p11": 0.2})
    path = markov_indicators(spec, 200_000, seed=2)
    assert _transition_rate(path.bits, 0) == pytest.approx(0.9, abs=0.01)
    assert _transition_rate(path.bits, 1) == pytest.approx(0.2, abs=0.01)


def test_equal_transitions_give_independent_bits():
    spec = ProcessSpec("markov_binary", {"p01": 0.3, "p11": 0.3})
    path = markov_indicators(spec, 200_000, seed=3)
    assert _transition_rate(path.bits, 1) == pytest.approx(0.3, abs=0.01)
    assert _transition_rate(path.bits, 0) == pytest.approx(0.3, abs=0.01)


def test_absorbing_chains_are_degenerate():
    with pytest.raises(Degenerate):
        markov_indicators(ProcessSpec("markov_binary", {"p01": 0.0, "p11": 0.5}), 10)
    with pytest.raises(Degenerate):
        markov_indicators(ProcessSpec("markov_binary", {"p01": 0.2, "p11": 1.0}), 10)


def test_urn_path_at_risk_state():
    spec = ProcessSpec("urn", {"g": 1, "y": 1, "r_balls": 1})
    path = urn_indicators(spec, 200_000, seed=4)
    assert path.marginal() == pytest.approx(0.5, abs=0.01)
    assert _transition_rate(path.bits, 1) == pytest.approx(2 / 3, abs=0.01)
    assert _transition_rate(path.bits, 0) == pytest.approx(1 / 3, abs=0.01)


def test_moving_maxima_marginal():
    spec = ProcessSpec("moving_maxima", {"r": 2, "q": 0.999})
    path = moving_maxima_indicators(spec, 2_000_000, seed=5)
    assert path.marginal() == pytest.approx(1e-3, abs=1.5e-4)


def test_moving_maxima_with_r_one_is_iid():
    spec = ProcessSpec("moving_maxima", {"r": 1, "q": 0.7})
    path = moving_maxima_indicators(spec, 200_000, seed=6)
    assert path.marginal() == pytest.approx(0.3, abs=0.01)
    assert _transition_rate(path.bits, 1) == pytest.approx(0.3, abs=0.01)


def test_moving_maxima_needs_r_steps():
    spec = ProcessSpec("moving_maxima", {"r": 3, "q": 0.9})
    with pytest.raises(BadArgument):
        moving_maxima_indicators(spec, 2)


def test_simulators_reject_other_models():
    with pytest.raises(BadArgument):
        urn_indicators(MARKOV, 10)
    with pytest.raises(BadArgument):
        moving_maxima_indicators(MARKOV, 10)


def test_path_summary_fields():
    summary = path_summary(simulate_path(MARKOV, 10_000, seed=9))
    assert summary["length"] == 10_000
    assert summary["stationary_marginal"] == pytest.approx(0.2)
    assert summary["runs"] > 0
    assert summary["max_run_length"] >= 1
    assert summary["model"] == MARKOV.label()


# -----------------------------------------------------------------------------
# sparse simulation
# -----------------------------------------------------------------------------

def test_sparse_chain_matches_stationary_law():
    spec = ProcessSpec("markov_binary", {"p01": 1e-3, "p11": 0.6})
    length = 10_000_000
    times = exceedance_times(spec, length, make_rng(11))

    assert np.all(np.diff(times) > 0)
    assert times.min() >= 0 and times.max() < length
    marginal = len(times) / length
    assert marginal == pytest.approx(stationary_marginal(spec), abs=1.6e-4)
    assert _runs_from_times(times).mean() == pytest.approx(1 / (1 - 0.6), abs=0.1)


def test_sparse_moving_maxima_matches_marginal():
    spec = ProcessSpec("moving_maxima", {"r": 2, "q": 0.999})
    length = 10_000_000
    times = exceedance_times(spec, length, make_rng(12))
    assert len(times) / length == pytest.approx(1e-3, abs=1e-4)


def test_sparse_moving_maxima_runs_have_length_r_near_the_limit():
    spec = ProcessSpec("moving_maxima", {"r": 3, "q": 0.99999})
    times = exceedance_times(spec, 100_000_000, make_rng(13))
    runs = _runs_from_times(times)
    assert len(runs) > 100
    assert np.mean(runs == 3) >= 0.95


def test_path_from_times_places_ones():
    path = path_from_times(MARKOV, np.array([0, 3, 4]), 6)
    assert path.to_text() == "100110"


# -----------------------------------------------------------------------------
# exact window law
# -----------------------------------------------------------------------------

def test_exact_law_of_iid_bits_factorizes():
    p = 0.3
    law = exact_window_law(ProcessSpec("markov_binary", {"p01": p, "p11": p}), 1, 2)
    assert len(law.entries) == 8
    for pattern, prob in law.entries.items():
        others = pattern[:1] + pattern[2:]
        expected = math.prod(p if bit == "1" else 1 - p for bit in others)
        assert prob == pytest.approx(expected, abs=1e-12)


def test_exact_law_two_step_transition():
    law = exact_window_law(MARKOV, 2, 2)
    pi1, lam = 0.2, 0.6 - 0.1
    assert law.marginal(0) == pytest.approx(1.0, abs=1e-12)
    assert law.marginal(1) == pytest.approx(0.6, abs=1e-12)
    # two-state chains are reversible
    assert law.marginal(-1) == pytest.approx(0.6, abs=1e-12)
    assert law.marginal(2) == pytest.approx(pi1 + (1 - pi1) * lam ** 2, abs=1e-12)


def test_urn_exact_law_is_the_induced_chain_law():
    spec = ProcessSpec("urn", {"g": 3, "y": 2, "r_balls": 1})
    p01, p11 = induced_chain(spec)
    urn = exact_window_law(spec, 2, 3)
    chain = exact_window_law(ProcessSpec("markov_binary", {"p01": p01, "p11": p11}), 2, 3)
    assert np.array_equal(urn.codes, chain.codes)
    assert np.allclose(urn.probs, chain.probs, rtol=0.0, atol=1e-15)


def test_exact_law_errors():
    with pytest.raises(WindowTooLarge):
        exact_window_law(MARKOV, 12, 12)
    with pytest.raises(BadArgument):
        exact_window_law(ProcessSpec("moving_maxima", {"r": 2, "q": 0.9}), 1, 1)
    with pytest.raises(Degenerate):
        exact_window_law(ProcessSpec("markov_binary", {"p01": 0.0, "p11": 0.5}), 1, 1)


def test_simulated_window_law_agrees_with_exact_law():
    exact = exact_window_law(MARKOV, 1, 1)
    empirical = window_law_from_path(simulate_path(MARKOV, 1_000_000, seed=14), 1, 1)
    assert not empirical.is_exact
    for pattern, prob in exact.entries.items():
        assert empirical.entries.get(pattern, 0.0) == pytest.approx(prob, abs=0.01)
