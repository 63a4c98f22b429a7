import math

import numpy as np
import pytest

from services.core_types import (
    CheckResult,
    ClusterReport,
    ExtendedPmf,
    ProcessSpec,
    WindowLaw,
    code_to_pattern,
    decode_float,
    encode_float,
    pattern_to_code,
    pmf_tail,
    validate_pmf,
)
from services.errors import BadArgument, BadOffset, ClusterLabError, NegativeMass, NotNormalized


# -----------------------------------------------------------------------------
# ExtendedPmf / validate_pmf
# -----------------------------------------------------------------------------

def test_validate_pmf_keeps_exactly_normalized_law():
    p = validate_pmf(ExtendedPmf(0, [0.5, 0.5]))
    assert p.probs.tolist() == [0.5, 0.5]
    assert p.infinity_mass == 0.0


def test_validate_pmf_trims_trailing_zeros():
    p = validate_pmf(ExtendedPmf(0, [1 / 3, 1 / 3, 1 / 3, 0, 0]))
    assert len(p.probs) == 3


def test_validate_pmf_rejects_excess_mass():
    with pytest.raises(NotNormalized):
        validate_pmf(ExtendedPmf(0, [0.5, 0.6]))


def test_validate_pmf_rejects_negative_entry():
    with pytest.raises(NegativeMass):
        validate_pmf(ExtendedPmf(0, [1.2, -0.2]))


def test_validate_pmf_is_idempotent():
    once = validate_pmf(ExtendedPmf(1, [0.25, 0.25, 0.0], 0.5))
    twice = validate_pmf(once)
    assert twice.allclose(once, atol=0.0)
    assert twice.offset == 1


def test_domain_errors_are_value_errors():
    with pytest.raises(ValueError):
        validate_pmf(ExtendedPmf(0, [0.5, 0.6]))
    assert issubclass(NotNormalized, ClusterLabError)


def test_offset_must_be_zero_or_one():
    with pytest.raises(BadOffset):
        ExtendedPmf(2, [1.0])


def test_probs_are_read_only():
    p = ExtendedPmf.uniform(3)
    with pytest.raises(ValueError):
        p.probs[0] = 1.0


def test_mean_and_second_moment():
    p = ExtendedPmf(1, [0.5, 0.5])
    assert p.mean() == pytest.approx(1.5)
    assert p.second_moment() == pytest.approx(2.5)
    assert ExtendedPmf(0, [0.5], 0.5).mean() == math.inf


def test_geometric_constructor():
    g = ExtendedPmf.geometric(0.5, offset=0, k_max=200)
    assert g.value_at(0) == pytest.approx(0.5)
    assert g.value_at(3) == pytest.approx(0.0625)
    assert g.total_mass == pytest.approx(1.0, abs=1e-12)
    assert ExtendedPmf.geometric(0.5, offset=1).value_at(1) == pytest.approx(0.5)


def test_pmf_dict_round_trip_with_infinity_string():
    p = ExtendedPmf.from_dict({"offset": 0, "probs": [0.5], "infinity_mass": "0.5"})
    assert p.infinity_mass == 0.5
    data = ExtendedPmf(0, [0.25, 0.75]).to_dict()
    assert data == {"offset": 0, "probs": [0.25, 0.75], "infinity_mass": 0.0}


def test_pmf_from_dict_names_missing_fields():
    with pytest.raises(BadArgument, match="probs"):
        ExtendedPmf.from_dict({"offset": 0})


@pytest.mark.parametrize("data", [
    {"offset": 0, "probs": 5},
    {"offset": 0, "probs": ["half"]},
    {"offset": 0, "probs": [None]},
    {"offset": "zero", "probs": [1.0]},
    {"offset": 0.5, "probs": [1.0]},
    {"offset": 0, "probs": [1.0], "infinity_mass": [0.0]},
    [0, [1.0]],
])
def test_pmf_from_dict_rejects_malformed_values(data):
    with pytest.raises(BadArgument):
        ExtendedPmf.from_dict(data)


# -----------------------------------------------------------------------------
# pmf_tail
# -----------------------------------------------------------------------------

def test_pmf_tail_geometric():
    assert pmf_tail(ExtendedPmf.geometric(0.5), 2) == pytest.approx(0.25, abs=1e-12)


def test_pmf_tail_at_offset_is_one():
    assert pmf_tail(ExtendedPmf(1, [0.2, 0.8]), 1) == 1.0
    assert pmf_tail(ExtendedPmf.geometric(0.3), 0) == 1.0


def test_pmf_tail_counts_infinity_atom():
    assert pmf_tail(ExtendedPmf(0, [0.2, 0.3], 0.5), 1) == pytest.approx(0.8)
    assert pmf_tail(ExtendedPmf(0, [0.2, 0.3], 0.5), 10) == pytest.approx(0.5)


def test_pmf_tail_is_nonincreasing():
    p = ExtendedPmf(0, [0.1, 0.4, 0.2, 0.1], 0.2)
    tails = [pmf_tail(p, k) for k in range(8)]
    assert all(a >= b for a, b in zip(tails, tails[1:]))


# -----------------------------------------------------------------------------
# WindowLaw
# -----------------------------------------------------------------------------

def test_pattern_codes():
    assert pattern_to_code("011") == 6
    assert code_to_pattern(6, 3) == "011"
    assert code_to_pattern(pattern_to_code("10110"), 5) == "10110"


def test_window_law_entries_and_marginal():
    law = WindowLaw.from_entries(1, 1, {"010": 0.5, "011": 0.5})
    assert law.entries == {"010": 0.5, "011": 0.5}
    assert law.marginal(0) == 1.0
    assert law.marginal(1) == 0.5
    assert law.marginal(-1) == 0.0
    assert law.width == 3
    assert law.is_exact


def test_window_law_rejects_zero_at_time_zero():
    with pytest.raises(BadArgument, match="time 0"):
        WindowLaw.from_entries(1, 1, {"010": 0.5, "100": 0.5})


def test_window_law_rejects_bad_normalization():
    with pytest.raises(NotNormalized):
        WindowLaw.from_entries(1, 1, {"010": 0.5, "011": 0.6})


def test_window_law_drops_zero_patterns():
    law = WindowLaw.from_entries(1, 1, {"010": 1.0, "011": 0.0})
    assert list(law.entries) == ["010"]


def test_empirical_law_needs_sample_count():
    with pytest.raises(BadArgument):
        WindowLaw.from_entries(0, 0, {"1": 1.0}, source="empirical")
    law = WindowLaw.from_dict({"u": 0, "v": 0, "entries": {"1": 1.0}, "source": {"empirical": 10}})
    assert law.sample_count == 10
    assert not law.is_exact


def test_window_law_dict_round_trip():
    law = WindowLaw.from_entries(1, 2, {"0100": 0.25, "1110": 0.75})
    again = WindowLaw.from_dict(law.to_dict())
    assert again.entries == law.entries
    assert np.array_equal(again.codes, law.codes)


@pytest.mark.parametrize("data", [
    {"u": 1, "v": 1, "entries": ["010"]},
    {"u": "one", "v": 1, "entries": {"010": 1.0}},
    {"u": 1, "v": 1, "entries": {"010": "most"}},
    {"u": 0, "v": 0, "entries": {"1": 1.0}, "source": {"empirical": "many"}},
])
def test_window_law_from_dict_rejects_malformed_values(data):
    with pytest.raises(BadArgument):
        WindowLaw.from_dict(data)


# -----------------------------------------------------------------------------
# ProcessSpec
# -----------------------------------------------------------------------------

def test_process_spec_validation():
    spec = ProcessSpec("moving_maxima", {"r": 3.0, "q": 0.99}, seed=5)
    assert spec.params["r"] == 3
    assert spec.label() == "moving_maxima(r=3, q=0.99)"

    with pytest.raises(BadArgument, match="unknown model"):
        ProcessSpec("ar1", {})
    with pytest.raises(BadArgument, match="missing"):
        ProcessSpec("urn", {"g": 1, "y": 1})
    with pytest.raises(BadArgument):
        ProcessSpec("moving_maxima", {"r": 2.5, "q": 0.9})
    with pytest.raises(BadArgument):
        ProcessSpec("moving_maxima", {"r": 2, "q": 1.0})
    with pytest.raises(BadArgument):
        ProcessSpec("urn", {"g": 1, "y": 0, "r_balls": 0})
    with pytest.raises(BadArgument):
        ProcessSpec("markov_binary", {"p01": 1.5, "p11": 0.5})
    with pytest.raises(BadArgument):
        ProcessSpec("markov_binary", {"p01": 0.5, "p11": 0.5}, seed=-1)


def test_process_spec_params_are_immutable():
    spec = ProcessSpec("markov_binary", {"p01": 0.1, "p11": 0.6})
    with pytest.raises(TypeError):
        spec.params["p01"] = 0.2
    assert ProcessSpec.from_dict(spec.to_dict()) == spec


# -----------------------------------------------------------------------------
# CheckResult / ClusterReport
# -----------------------------------------------------------------------------

def test_check_result_verdict():
    assert CheckResult("x", 1e-13, 1e-12).passed
    assert not CheckResult("x", -2e-12, 1e-12).passed
    assert not CheckResult("x", math.nan, 1.0).passed
    assert CheckResult("x", 0.0, 0.0).passed


def test_cluster_report_validates_theta():
    side = ExtendedPmf.uniform(1)
    with pytest.raises(BadArgument):
        ClusterReport(theta=1.5, e_typical=1.0, e_inspected=1.0, e_side=0.0,
                      pmf_side=side, pmf_inspected=ExtendedPmf.uniform(1, 1), pmf_typical=None)


def test_float_encoding():
    assert encode_float(math.inf) == "inf"
    assert encode_float(0.5) == 0.5
    assert decode_float("Infinity") == math.inf
    assert decode_float("inf") == math.inf
    assert decode_float(None) is None
