"""
Cluster Calculus Module
=======================
Exact maps between the laws of the side counts S±, the joint law of
(S-, S+), the inspected cluster size S^i, the typical cluster size S^t
and the extremal index theta.

Everything here is driven by the common law of the side counts
(an ExtendedPmf with offset 0):

    P(S+ >= k, S- >= l)   = P(S± >= k + l)
    P(S+ = k, S- >= l)    = P(S± = k + l)
    P(S+ = k, S- = l)     = P(S± = k + l) - P(S± = k + l + 1)
    P(S^i = k)            = k * [P(S± = k - 1) - P(S± = k)]
    P(S± = l | S^i = k)   = 1 / k,                 l = 0, ..., k - 1
    theta                 = P(S± = 0)
    P(S^t = k)            = [P(S± = k - 1) - P(S± = k)] / theta
    P(S± = l)             = theta * P(S^t >= l + 1)

and the moment identities

    theta * E(S^t)        = P(S± < inf)
    E(S^i)                = 1 + 2 E(S±)
    E(S^i) * E(S^t)       = E((S^t)^2)
    E(S^t)               <= E(S^i)

All functions are pure; inputs are immutable.
"""

import math
from typing import List, Tuple

import numpy as np

from .core_types import (
    EPS_NORM,
    CheckResult,
    ClusterReport,
    ExtendedPmf,
    pmf_tail,
    validate_pmf,
)
from .errors import (
    BadArgument,
    BadOffset,
    BadTheta,
    MassOverflow,
    NotMonotone,
    ThetaZero,
)


# relative tolerance for identity residuals of the exact calculus
EXACT_RTOL = 1e-10

IDENTITY_NAMES = (
    "theta_mean_identity",
    "inspected_mean_identity",
    "second_moment_identity",
    "mean_inequality",
)


def _side_law(side: ExtendedPmf) -> ExtendedPmf:
    """Validate a side-count law (offset 0) and return its canonical form."""
    if side.offset != 0:
        raise BadOffset(
            f"side-count laws live on N0 (offset 0), got offset {side.offset}"
        )
    return validate_pmf(side)


def _successor(probs: np.ndarray) -> np.ndarray:
    """probs shifted by one: entry k holds probs[k + 1] (zero past the end)."""
    return np.append(probs[1:], 0.0)


def _reverse_cumsum(values: np.ndarray) -> np.ndarray:
    return np.cumsum(values[::-1])[::-1]


def _clip_small_negatives(values: np.ndarray, what: str) -> np.ndarray:
    if len(values) and values.min() < -EPS_NORM:
        k = int(np.argmin(values))
        raise NotMonotone(
            f"{what} would have a negative entry {values[k]!r} at index {k}; "
            f"the side-count pmf must be nonincreasing"
        )
    return np.clip(values, 0.0, None)


# =============================================================================
# joint law of (S-, S+)
# =============================================================================

def joint_tail(side: ExtendedPmf, k: int, l: int) -> float:
    """
    Joint tail P(S+ >= k, S- >= l) = P(S± >= k + l).

    Args:
        side (ExtendedPmf): law of S± (offset 0).
        k (int): lower bound for S+ (>= 0).
        l (int): lower bound for S- (>= 0).

    Returns:
        float: the joint tail probability.

    Raises:
        BadOffset: if side does not have offset 0.

    Example:
        >>> joint_tail(ExtendedPmf.uniform(3), 1, 1)
        0.333...
    """
    if side.offset != 0:
        raise BadOffset(f"joint tail needs a side-count law (offset 0), got {side.offset}")
    if k < 0 or l < 0:
        raise BadArgument(f"k and l must be non-negative, got k={k}, l={l}")
    return pmf_tail(side, k + l)


def joint_point_tail(side: ExtendedPmf, k: int, l: int) -> float:
    """P(S+ = k, S- >= l) = P(S± = k + l)."""
    if side.offset != 0:
        raise BadOffset(f"joint tail needs a side-count law (offset 0), got {side.offset}")
    if k < 0 or l < 0:
        raise BadArgument(f"k and l must be non-negative, got k={k}, l={l}")
    return side.value_at(k + l)


def joint_pmf(side: ExtendedPmf, k: int, l: int) -> float:
    """
    Joint point probability P(S+ = k, S- = l) = P(S± = k+l) - P(S± = k+l+1).

    Non-negative whenever the side pmf is nonincreasing; symmetric in k, l.
    """
    if side.offset != 0:
        raise BadOffset(f"joint pmf needs a side-count law (offset 0), got {side.offset}")
    if k < 0 or l < 0:
        raise BadArgument(f"k and l must be non-negative, got k={k}, l={l}")
    m = k + l
    return side.value_at(m) - side.value_at(m + 1)


def joint_pmf_table(side: ExtendedPmf, k_max: int) -> np.ndarray:
    """
    Matrix of P(S+ = k, S- = l) for 0 <= k, l <= k_max.

    Returns:
        np.ndarray: (k_max+1, k_max+1) array, symmetric.
    """
    if side.offset != 0:
        raise BadOffset(f"joint pmf needs a side-count law (offset 0), got {side.offset}")
    padded = np.zeros(2 * k_max + 2)
    n = min(len(side.probs), len(padded))
    padded[:n] = side.probs[:n]
    diffs = padded - _successor(padded)
    index = np.add.outer(np.arange(k_max + 1), np.arange(k_max + 1))
    return diffs[index]


def check_monotone(side: ExtendedPmf) -> CheckResult:
    """
    Check that the side-count pmf is nonincreasing on N0.

    residual = max(0, max_k P(S± = k+1) - P(S± = k)); passes at EPS_NORM.
    """
    probs = side.probs
    residual = 0.0
    if len(probs) > 1:
        residual = max(0.0, float(np.max(probs[1:] - probs[:-1])))
    return CheckResult(
        identity_name="side_pmf_nonincreasing",
        residual=residual,
        tolerance=EPS_NORM,
        context=f"support size {len(probs)}",
    )


# =============================================================================
# inspected cluster size
# =============================================================================

def inspected_from_side(side: ExtendedPmf) -> ExtendedPmf:
    """
    Law of the inspected cluster size S^i from the side-count law.

    P(S^i = k) = k * [P(S± = k-1) - P(S± = k)] for k >= 1. The mass left
    unexplained by the finite entries sits at infinity; by telescoping it
    equals P(S± = inf).

    Raises:
        BadOffset: side offset is not 0.
        NotMonotone: an entry would be negative beyond EPS_NORM.

    Example:
        >>> inspected_from_side(ExtendedPmf.uniform(3)).probs
        array([0., 0., 1.])
    """
    side = _side_law(side)
    probs = side.probs
    k = np.arange(1, len(probs) + 1)
    inspected = _clip_small_negatives(k * (probs - _successor(probs)), "inspected pmf")
    return ExtendedPmf(1, np.trim_zeros(inspected, "b"), side.infinity_mass)


def side_from_inspected(inspected: ExtendedPmf) -> ExtendedPmf:
    """
    Side-count law from the inspected size via the uniform split.

    P(S± = l) = sum_{k > l} P(S^i = k) / k; an infinite inspected size
    forces infinite side counts.
    """
    if inspected.offset != 1:
        raise BadOffset(f"inspected laws live on N (offset 1), got {inspected.offset}")
    inspected = validate_pmf(inspected)
    k = np.arange(1, len(inspected.probs) + 1)
    side = _reverse_cumsum(inspected.probs / k)
    return ExtendedPmf(0, side, inspected.infinity_mass)


def split_conditional(k: int) -> ExtendedPmf:
    """Conditional law of S± given S^i = k: uniform on {0, ..., k-1}."""
    if k < 1:
        raise BadArgument(f"cluster size k must be >= 1, got {k}")
    return ExtendedPmf.uniform(k, offset=0)


# =============================================================================
# extremal index and typical cluster size
# =============================================================================

def extremal_index(side: ExtendedPmf) -> float:
    """theta = P(S± = 0)."""
    if side.offset != 0:
        raise BadOffset(f"extremal index needs a side-count law (offset 0), got {side.offset}")
    return side.value_at(0)


def typical_from_side(side: ExtendedPmf) -> Tuple[float, ExtendedPmf]:
    """
    Extremal index and typical cluster size law from the side-count law.

    pi_k = [P(S± = k-1) - P(S± = k)] / theta, k >= 1. The typical size is
    finite almost surely, so the returned law has no infinity atom.

    Returns:
        tuple: (theta, typical) with typical an ExtendedPmf of offset 1.

    Raises:
        ThetaZero: P(S± = 0) = 0, the typical law is undefined.
        NotMonotone: side pmf is not nonincreasing.
    """
    side = _side_law(side)
    theta = extremal_index(side)
    if theta <= 0.0:
        raise ThetaZero("theta = P(S± = 0) is zero; the typical cluster law is not defined")

    probs = side.probs
    typical = _clip_small_negatives((probs - _successor(probs)) / theta, "typical pmf")
    return theta, ExtendedPmf(1, np.trim_zeros(typical, "b"), 0.0)


def side_from_typical(theta: float, typical: ExtendedPmf) -> ExtendedPmf:
    """
    Side-count law from theta and the typical cluster size law.

    P(S± = l) = theta * P(S^t >= l + 1). The infinity atom is whatever mass
    is left: P(S± = inf) = 1 - theta * E(S^t).

    Raises:
        BadTheta: theta outside (0, 1].
        BadOffset: typical offset is not 1.
        MassOverflow: theta * E(S^t) > 1 + EPS_NORM.
    """
    if not 0.0 < theta <= 1.0:
        raise BadTheta(f"theta must lie in (0, 1], got {theta}")
    if typical.offset != 1:
        raise BadOffset(f"typical laws live on N (offset 1), got {typical.offset}")
    typical = validate_pmf(typical)
    if typical.infinity_mass > EPS_NORM:
        raise BadArgument(
            f"typical cluster sizes are finite, got infinity mass {typical.infinity_mass}"
        )

    finite_mass = theta * typical.mean()
    if finite_mass > 1.0 + EPS_NORM:
        raise MassOverflow(
            f"theta * E(S^t) = {finite_mass!r} exceeds 1; no side law carries this pair"
        )

    infinity_mass = 1.0 - finite_mass
    if infinity_mass < EPS_NORM:
        infinity_mass = 0.0
    return ExtendedPmf(0, theta * _reverse_cumsum(typical.probs), infinity_mass)


# =============================================================================
# moment identities
# =============================================================================

def moments_report(side: ExtendedPmf) -> ClusterReport:
    """
    Exact cluster report for a side-count law.

    Computes theta, E(S^t), E(S^i), E(S±) and the residuals of
        theta_mean_identity     theta * E(S^t) - P(S± < inf)
        inspected_mean_identity E(S^i) - 1 - 2 E(S±)     (finite moments only)
        second_moment_identity  E(S^i) E(S^t) - E((S^t)^2) (finite E(S^i) only)
        mean_inequality         max(0, E(S^t) - E(S^i))
    plus mean_gap = E(S^i) - E(S^t), which is zero exactly when S^i is
    degenerate.

    Raises:
        ThetaZero: theta = 0. The exception's report attribute holds the
            partial report (theta = 0, S^i infinite almost surely).
    """
    side = _side_law(side)
    monotone = check_monotone(side)
    inspected = inspected_from_side(side)
    e_side = side.mean()
    e_inspected = inspected.mean()

    theta = extremal_index(side)
    if theta <= 0.0:
        partial = ClusterReport(
            theta=0.0,
            e_typical=None,
            e_inspected=e_inspected,
            e_side=e_side,
            pmf_side=side,
            pmf_inspected=inspected,
            pmf_typical=None,
            checks=[monotone],
            notes=["theta = 0: the typical cluster law is undefined and S^i is infinite a.s."],
        )
        raise ThetaZero("theta = P(S± = 0) is zero; the typical cluster law is not defined",
                        report=partial)

    theta, typical = typical_from_side(side)
    e_typical = typical.mean()

    residuals = {"theta_mean_identity": theta * e_typical - side.finite_mass}
    if math.isfinite(e_side) and math.isfinite(e_inspected):
        residuals["inspected_mean_identity"] = e_inspected - 1.0 - 2.0 * e_side
    if math.isfinite(e_inspected):
        residuals["second_moment_identity"] = e_inspected * e_typical - typical.second_moment()
    residuals["mean_inequality"] = max(0.0, e_typical - e_inspected)
    residuals["mean_gap"] = e_inspected - e_typical

    report = ClusterReport(
        theta=theta,
        e_typical=e_typical,
        e_inspected=e_inspected,
        e_side=e_side,
        pmf_side=side,
        pmf_inspected=inspected,
        pmf_typical=typical,
        residuals=residuals,
    )
    report.checks = [monotone] + report_checks(report)
    return report


def report_checks(report: ClusterReport, rtol: float = EXACT_RTOL) -> List[CheckResult]:
    """
    Turn the identity residuals of an exact report into CheckResults.

    The tolerance is rtol relative to the size of the quantity the identity
    compares (absolute rtol when that quantity is zero).
    """
    references = {
        "theta_mean_identity": report.pmf_side.finite_mass,
        "inspected_mean_identity": report.e_inspected,
        "second_moment_identity": (
            report.pmf_typical.second_moment() if report.pmf_typical is not None else 0.0
        ),
        "mean_inequality": report.e_typical or 0.0,
    }

    checks = []
    for name in IDENTITY_NAMES:
        if name not in report.residuals:
            continue
        reference = abs(references[name])
        tolerance = rtol * reference if reference > 0.0 and math.isfinite(reference) else rtol
        checks.append(CheckResult(
            identity_name=name,
            residual=report.residuals[name],
            tolerance=tolerance,
            context="exact calculus",
        ))
    return checks
