import itertools

import numpy as np
import pytest

from services.core_types import ProcessSpec, WindowLaw
from services.errors import BadArgument, OutOfWindow, ShiftNotInSet
from services.invariance import (
    EXACT_TOL,
    IndexSet,
    check_support_shift,
    check_time_change,
    index_sets,
    prob_all_ones,
    prob_pattern,
    prob_pattern_inclusion_exclusion,
    sweep_invariance,
)
from services.simulators import exact_window_law, simulate_path
from services.estimation import window_law_from_path


MARKOV = ProcessSpec("markov_binary", {"p01": 0.1, "p11": 0.6})
ISOLATED = WindowLaw.from_entries(1, 1, {"010": 1.0})
ADVERSARIAL = WindowLaw.from_entries(1, 1, {"011": 1.0})


def _brute_force_all_ones(p01, p11, u, v, A):
    """P(I_t = 1, t in A | I_0 = 1) by summing over every chain path."""
    pi1 = p01 / (p01 + 1 - p11)
    total = 0.0
    for bits in itertools.product((0, 1), repeat=u + v + 1):
        if bits[u] != 1 or any(bits[t + u] != 1 for t in A):
            continue
        prob = pi1 if bits[0] else 1 - pi1
        for before, after in zip(bits, bits[1:]):
            to_one = p11 if before else p01
            prob *= to_one if after else 1 - to_one
        total += prob
    return total / pi1


# -----------------------------------------------------------------------------
# index sets
# -----------------------------------------------------------------------------

def test_index_set_contains_zero():
    assert IndexSet.of(2, 0, -1).elements == (-1, 0, 2)
    assert str(IndexSet.of(0, 1)) == "{0,1}"
    with pytest.raises(BadArgument):
        IndexSet.of(1, 2)


def test_index_set_shift():
    assert IndexSet.of(0, 2).shifted(2).elements == (-2, 0)
    with pytest.raises(ShiftNotInSet):
        IndexSet.of(0, 2).shifted(1)


def test_index_sets_enumeration_order():
    law = exact_window_law(MARKOV, 1, 1)
    sets = [s.elements for s in index_sets(law, 2)]
    assert sets == [(-1, 0), (0,), (0, 1)]
    assert len(index_sets(exact_window_law(MARKOV, 2, 2), 3)) == 1 + 4 + 6


# -----------------------------------------------------------------------------
# probabilities
# -----------------------------------------------------------------------------

def test_prob_all_ones_isolated_cluster():
    assert prob_all_ones(ISOLATED, IndexSet.of(0)) == 1.0
    assert prob_all_ones(ISOLATED, IndexSet.of(0, 1)) == 0.0


def test_prob_all_ones_matches_path_enumeration():
    law = exact_window_law(MARKOV, 3, 3)
    for A in [(0,), (0, 2), (-3, 0), (-1, 0, 1), (-2, 0, 3)]:
        expected = _brute_force_all_ones(0.1, 0.6, 3, 3, A)
        assert prob_all_ones(law, A) == pytest.approx(expected, abs=1e-12)


def test_prob_all_ones_outside_window():
    with pytest.raises(OutOfWindow):
        prob_all_ones(ISOLATED, IndexSet.of(0, 2))


@pytest.mark.parametrize("A, t1, t2", [
    ((0,), -2, 2),
    ((0, 1), -1, 2),
    ((-2, 0), -3, 0),
    ((-1, 0, 2), -3, 3),
])
def test_inclusion_exclusion_equals_pattern_matching(A, t1, t2):
    law = exact_window_law(MARKOV, 3, 3)
    direct = prob_pattern(law, A, t1, t2)
    signed = prob_pattern_inclusion_exclusion(law, A, t1, t2)
    assert signed == pytest.approx(direct, abs=1e-12)


# -----------------------------------------------------------------------------
# single checks
# -----------------------------------------------------------------------------

def test_zero_shift_has_zero_residual():
    law = exact_window_law(MARKOV, 2, 2)
    for A in index_sets(law, 3):
        assert check_time_change(law, A, 0).residual == 0.0
        assert check_support_shift(law, A, -1, 1, 0).residual == 0.0
    assert check_time_change(ADVERSARIAL, IndexSet.of(0, 1), 0).residual == 0.0


def test_time_change_holds_for_markov_chain():
    law = exact_window_law(MARKOV, 3, 3)
    check = check_time_change(law, IndexSet.of(0, 1, 3), 1)
    assert check.passed
    assert check.tolerance == EXACT_TOL
    assert check.context == "A={0,1,3} a=1"


def test_support_shift_holds_for_markov_chain():
    law = exact_window_law(MARKOV, 3, 3)
    check = check_support_shift(law, IndexSet.of(0, 1), -1, 2, 1)
    assert check.passed
    assert check.identity_name == "support_shift"


def test_adversarial_law_fails_time_change():
    check = check_time_change(ADVERSARIAL, IndexSet.of(0, 1), 1)
    assert check.residual == pytest.approx(1.0)
    assert not check.passed


def test_check_argument_errors():
    law = exact_window_law(MARKOV, 2, 2)
    with pytest.raises(ShiftNotInSet):
        check_time_change(law, IndexSet.of(0, 1), 2)
    with pytest.raises(OutOfWindow):
        check_time_change(law, IndexSet.of(-2, 0, 2), 2)
    with pytest.raises(BadArgument):
        check_support_shift(law, IndexSet.of(0, 1), 1, 2, 1)
    with pytest.raises(ShiftNotInSet):
        check_support_shift(law, IndexSet.of(0, 2), -1, 1, 2)


def test_explicit_tolerance_overrides_default():
    check = check_time_change(ADVERSARIAL, IndexSet.of(0, 1), 1, tolerance=2.0)
    assert check.passed


# -----------------------------------------------------------------------------
# sweeps
# -----------------------------------------------------------------------------

def test_sweep_on_isolated_cluster():
    checks = sweep_invariance(ISOLATED, 2)
    assert checks
    assert all(check.residual == 0.0 for check in checks)


def test_sweep_detects_adversarial_law():
    checks = sweep_invariance(ADVERSARIAL, 2)
    assert any(not check.passed for check in checks)


def test_sweep_is_deterministic():
    law = exact_window_law(MARKOV, 2, 2)
    first = [(c.identity_name, c.context) for c in sweep_invariance(law, 3)]
    second = [(c.identity_name, c.context) for c in sweep_invariance(law, 3)]
    assert first == second


def test_sweep_keeps_interval_checks_when_the_shifted_set_leaves_the_window():
    law = exact_window_law(MARKOV, 1, 1)
    checks = sweep_invariance(law, 3)
    contexts = {(c.identity_name, c.context) for c in checks}
    # {-1, 0, 1} - 1 leaves the window, [0, 1] - 1 does not
    assert ("support_shift", "A={-1,0,1} a=1 [t1,t2]=[0,1]") in contexts
    assert ("time_change", "A={-1,0,1} a=1") not in contexts
    assert ("time_change", "A={-1,0,1} a=0") in contexts
    direct = check_support_shift(law, IndexSet.of(-1, 0, 1), 0, 1, 1)
    assert direct.context in {c.context for c in checks}
    assert all(check.passed for check in checks)


def test_sweep_rejects_bad_arguments():
    with pytest.raises(BadArgument):
        sweep_invariance(ISOLATED, 0)
    with pytest.raises(BadArgument):
        sweep_invariance(ISOLATED, 2, sigma=0.0)


def test_random_markov_chains_pass_every_check():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        spec = ProcessSpec("markov_binary", {
            "p01": float(rng.uniform(0.05, 0.95)),
            "p11": float(rng.uniform(0.0, 0.95)),
        })
        checks = sweep_invariance(exact_window_law(spec, 4, 4), 3)
        worst = max(abs(check.residual) for check in checks)
        assert worst <= 1e-12, spec.label()


def test_urn_law_passes_every_check():
    law = exact_window_law(ProcessSpec("urn", {"g": 1, "y": 1, "r_balls": 1}), 3, 3)
    assert all(check.passed for check in sweep_invariance(law, 3))


def test_empirical_law_uses_statistical_tolerance():
    path = simulate_path(MARKOV, 200_000, seed=21)
    law = window_law_from_path(path, 2, 2)
    checks = sweep_invariance(law, 2)
    assert all(check.tolerance > EXACT_TOL for check in checks)
    assert all(check.tolerance >= 1.0 / law.sample_count for check in checks)
