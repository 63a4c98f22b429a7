"""
Invariance Checks Module
========================
Checks the time change formula and the support-shift identities on a
WindowLaw, exactly (enumerated laws) or statistically (estimated laws).

    time change:    P(I_t = 1, t in A)  =  P(I_{t-a} = 1, t in A)
    support shift:  P(C n [t1, t2] = A n [t1, t2])
                      = P(C n [t1-a, t2-a] = (A-a) n [t1-a, t2-a])

for index sets A containing 0 and shifts a in A. C is the set of times
carrying a one.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Tuple

import numpy as np

from .core_types import CheckResult, WindowLaw, time_mask
from .errors import BadArgument, OutOfWindow, ShiftNotInSet, WindowTooLarge

logger = logging.getLogger(__name__)


# tolerance for residuals computed on exact (enumerated) laws
EXACT_TOL = 1e-12

DEFAULT_SIGMA = 4.0

# free positions allowed in an inclusion-exclusion sum (2^n terms)
MAX_FREE_POSITIONS = 20


@dataclass(frozen=True)
class IndexSet:
    """Finite set of integer times containing 0, kept sorted."""
    elements: Tuple[int, ...]

    def __post_init__(self):
        elements = tuple(sorted({int(t) for t in self.elements}))
        if 0 not in elements:
            raise BadArgument(f"index set must contain 0, got {elements}")
        object.__setattr__(self, "elements", elements)

    @classmethod
    def of(cls, *elements: int) -> "IndexSet":
        return cls(tuple(elements))

    def __iter__(self) -> Iterator[int]:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, t) -> bool:
        return t in self.elements

    def __str__(self) -> str:
        return "{" + ",".join(str(t) for t in self.elements) + "}"

    def shifted(self, a: int) -> "IndexSet":
        """A - a; contains 0 whenever a is in A."""
        if a not in self.elements:
            raise ShiftNotInSet(f"shift a={a} is not an element of A={self}")
        return IndexSet(tuple(t - a for t in self.elements))

    def within(self, t1: int, t2: int) -> Tuple[int, ...]:
        return tuple(t for t in self.elements if t1 <= t <= t2)


def _as_index_set(A) -> IndexSet:
    return A if isinstance(A, IndexSet) else IndexSet(tuple(A))


def _require_in_window(law: WindowLaw, times: Iterable[int], what: str) -> None:
    outside = [t for t in times if not law.contains(t)]
    if outside:
        raise OutOfWindow(
            f"{what} has times {outside} outside the law's window [-{law.u}, {law.v}]"
        )


def _mass_matching(law: WindowLaw, mask: int, target: int) -> float:
    """Total probability of patterns whose bits under mask equal target."""
    hit = (law.codes & np.int64(mask)) == np.int64(target)
    return float(law.probs[hit].sum())


def _statistical_tolerance(law: WindowLaw, p1: float, p2: float, sigma: float) -> float:
    # binomial SE of both sides plus one lattice step
    m = law.sample_count
    variance = (p1 * (1.0 - p1) + p2 * (1.0 - p2)) / m
    return sigma * math.sqrt(max(variance, 0.0)) + 1.0 / m


def _tolerance(law: WindowLaw, p1: float, p2: float,
               tolerance: Optional[float], sigma: float) -> float:
    if tolerance is not None:
        return tolerance
    if law.is_exact:
        return EXACT_TOL
    return _statistical_tolerance(law, p1, p2, sigma)


# =============================================================================
# probabilities
# =============================================================================

def prob_all_ones(law: WindowLaw, A) -> float:
    """
    P(I_t = 1 for every t in A).

    Raises:
        OutOfWindow: if A leaves [-u, v].

    Example:
        >>> isolated = WindowLaw.from_entries(1, 1, {"010": 1.0})
        >>> prob_all_ones(isolated, IndexSet.of(0)), prob_all_ones(isolated, IndexSet.of(0, 1))
        (1.0, 0.0)
    """
    A = _as_index_set(A)
    _require_in_window(law, A, f"A={A}")
    mask = time_mask(A, law.u)
    return _mass_matching(law, mask, mask)


def prob_pattern(law: WindowLaw, ones: Iterable[int], t1: int, t2: int) -> float:
    """P(C n [t1, t2] = ones) by direct pattern matching."""
    ones = [t for t in ones if t1 <= t <= t2]
    interval = time_mask(range(t1, t2 + 1), law.u)
    return _mass_matching(law, interval, time_mask(ones, law.u))


def prob_pattern_inclusion_exclusion(law: WindowLaw, A, t1: int, t2: int) -> float:
    """
    P(C n [t1, t2] = A n [t1, t2]) as a signed sum of all-ones probabilities:

        sum over K subset of [t1, t2] minus A of
            (-1)^|K| P(I_t = 1, t in (A n [t1, t2]) u K)
    """
    A = _as_index_set(A)
    _require_in_window(law, range(t1, t2 + 1), f"interval [{t1}, {t2}]")
    ones = A.within(t1, t2)
    free = [t for t in range(t1, t2 + 1) if t not in A]
    if len(free) > MAX_FREE_POSITIONS:
        raise WindowTooLarge(
            f"inclusion-exclusion over {len(free)} free positions, "
            f"at most {MAX_FREE_POSITIONS} supported"
        )

    base = time_mask(ones, law.u)
    total = 0.0
    for size in range(len(free) + 1):
        sign = -1.0 if size % 2 else 1.0
        for subset in itertools.combinations(free, size):
            mask = base | time_mask(subset, law.u)
            total += sign * _mass_matching(law, mask, mask)
    return total


# =============================================================================
# identity checks
# =============================================================================

def check_time_change(law: WindowLaw, A, a: int,
                      tolerance: Optional[float] = None,
                      sigma: float = DEFAULT_SIGMA) -> CheckResult:
    """
    Time change check: residual = P(I_t=1, t in A) - P(I_{t-a}=1, t in A).

    The default tolerance is EXACT_TOL for exact laws and sigma binomial
    standard errors (plus one lattice step 1/m) for empirical laws.

    Raises:
        ShiftNotInSet: a is not in A.
        OutOfWindow: A or A - a leaves the window.
    """
    A = _as_index_set(A)
    shifted = A.shifted(a)
    _require_in_window(law, A, f"A={A}")
    _require_in_window(law, shifted, f"A-a={shifted}")

    p1 = prob_all_ones(law, A)
    p2 = p1 if a == 0 else prob_all_ones(law, shifted)
    return CheckResult(
        identity_name="time_change",
        residual=p1 - p2,
        tolerance=_tolerance(law, p1, p2, tolerance, sigma),
        context=f"A={A} a={a}",
    )


def check_support_shift(law: WindowLaw, A, t1: int, t2: int, a: int,
                        tolerance: Optional[float] = None,
                        sigma: float = DEFAULT_SIGMA) -> CheckResult:
    """
    Support-shift check on the interval [t1, t2]:

        residual = P(C n [t1, t2] = A n [t1, t2])
                   - P(C n [t1-a, t2-a] = (A-a) n [t1-a, t2-a])

    Raises:
        ShiftNotInSet: a is not in A n [t1, t2].
        OutOfWindow: A, [t1, t2] or [t1-a, t2-a] leaves the window.
    """
    A = _as_index_set(A)
    if t1 > 0 or t2 < 0:
        raise BadArgument(f"interval must satisfy t1 <= 0 <= t2, got [{t1}, {t2}]")
    if a not in A or not t1 <= a <= t2:
        raise ShiftNotInSet(f"shift a={a} is not in A n [t1, t2] = {A.within(t1, t2)}")
    _require_in_window(law, A, f"A={A}")
    _require_in_window(law, (t1, t2), f"interval [{t1}, {t2}]")
    _require_in_window(law, (t1 - a, t2 - a), f"shifted interval [{t1 - a}, {t2 - a}]")

    p1 = prob_pattern(law, A, t1, t2)
    p2 = p1 if a == 0 else prob_pattern(law, A.shifted(a), t1 - a, t2 - a)
    return CheckResult(
        identity_name="support_shift",
        residual=p1 - p2,
        tolerance=_tolerance(law, p1, p2, tolerance, sigma),
        context=f"A={A} a={a} [t1,t2]=[{t1},{t2}]",
    )


def index_sets(law: WindowLaw, max_set_size: int) -> List[IndexSet]:
    """All index sets A in the window with 0 in A and |A| <= max_set_size,
    in lexicographic order of their sorted elements."""
    others = [t for t in range(-law.u, law.v + 1) if t != 0]
    sets = []
    for size in range(0, max_set_size):
        for rest in itertools.combinations(others, size):
            sets.append(IndexSet(rest + (0,)))
    return sorted(sets, key=lambda s: s.elements)


def sweep_invariance(law: WindowLaw, max_set_size: int,
                     tolerance: Optional[float] = None,
                     sigma: float = DEFAULT_SIGMA) -> List[CheckResult]:
    """
    Run every admissible time change and support-shift check.

    For each A (lexicographic order) and each a in A: one time change
    check when A - a stays inside the window, then one support-shift check
    for every interval [t1, t2] with t1 <= 0 <= t2, a in [t1, t2] and both
    [t1, t2] and [t1-a, t2-a] inside the window. Only A n [t1, t2] has to
    shift into the window for the latter.

    Returns:
        list: CheckResults in enumeration order.
    """
    if max_set_size < 1:
        raise BadArgument(f"max_set_size must be >= 1, got {max_set_size}")
    if not sigma > 0.0:
        raise BadArgument(f"tolerance sigma must be positive, got {sigma}")

    results = []
    for A in index_sets(law, max_set_size):
        for a in A:
            if all(law.contains(t - a) for t in A):
                results.append(check_time_change(law, A, a, tolerance, sigma))
            for t1 in range(-law.u, 1):
                for t2 in range(0, law.v + 1):
                    if not t1 <= a <= t2:
                        continue
                    if not (law.contains(t1 - a) and law.contains(t2 - a)):
                        continue
                    results.append(check_support_shift(law, A, t1, t2, a, tolerance, sigma))

    failed = sum(not r.passed for r in results)
    logger.info(f"[Verify] {len(results)} checks over window [-{law.u}, {law.v}], {failed} failed")
    return results
