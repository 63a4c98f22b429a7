"""
Simulators Module
=================
Stationary binary processes and their exact window laws.

Models (see ProcessSpec):
    moving_maxima  X_t = max(Z_t, ..., Z_{t-r+1}) with i.i.d. unit-Frechet
                   Z_t, thresholded at the marginal q-quantile of X_t.
    urn            i.i.d. draws from g green, y yellow and r_balls red balls;
                   at risk after a red draw until the next green draw.
    markov_binary  two-state chain with P(1 | 0) = p01, P(1 | 1) = p11.

Two ways to produce a path:
    dense   one uniform per time step; the reference implementation
            (moving_maxima_indicators, urn_indicators, markov_indicators).
    sparse  only the positions of the ones (exceedance_times), drawn from
            geometric gaps and geometric run lengths. Same law as the
            dense path, used when P(I_t = 1) is small.

The urn's at-risk state is the two-state chain
    p01 = r_balls / N,   p11 = (y + r_balls) / N,   N = g + y + r_balls
so both chain models share one path generator and one exact oracle.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core_types import WindowLaw, ProcessSpec
from .errors import BadArgument, Degenerate, WindowTooLarge
from .rng import make_rng

logger = logging.getLogger(__name__)


# widest window the exact oracle enumerates (2^24 patterns)
MAX_EXACT_WIDTH = 24


@dataclass(frozen=True, eq=False)
class BinaryPath:
    """A realization of the 0/1 process with the spec that produced it."""
    bits: np.ndarray
    model: ProcessSpec

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def length(self) -> int:
        return len(self.bits)

    def marginal(self) -> float:
        return float(self.bits.mean()) if self.length else 0.0

    def ones(self) -> np.ndarray:
        """Sorted positions of the ones."""
        return np.flatnonzero(self.bits).astype(np.int64)

    def to_text(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


# =============================================================================
# stationary helpers
# =============================================================================

def induced_chain(spec: ProcessSpec) -> Tuple[float, float]:
    """
    Transition probabilities (p01, p11) of the two-state chain behind a
    markov_binary or urn spec.
    """
    if spec.model == "markov_binary":
        return spec.params["p01"], spec.params["p11"]
    if spec.model == "urn":
        g, y, r = spec.params["g"], spec.params["y"], spec.params["r_balls"]
        total = g + y + r
        return r / total, (y + r) / total
    raise BadArgument(f"{spec.model} has no induced two-state chain")


def stationary_marginal(spec: ProcessSpec) -> float:
    """
    Exact stationary P(I_t = 1).

        moving_maxima:  1 - q
        chains:         p01 / (p01 + 1 - p11)
    """
    if spec.model == "moving_maxima":
        return 1.0 - spec.params["q"]

    p01, p11 = induced_chain(spec)
    denominator = p01 + 1.0 - p11
    if denominator <= 0.0:
        raise Degenerate(f"{spec.label()} has no unique stationary law (p01 = 0, p11 = 1)")
    return p01 / denominator


def urn_spec(rho: float, red_fraction: float, r_balls: int = 1, seed: int = 0) -> ProcessSpec:
    """
    Integer urn with green share rho among the non-red balls and the given
    share of red balls.

    The side counts of this urn approach Geo_0(rho) as red_fraction -> 0.

    Example:
        >>> urn_spec(0.5, 1e-3).params["g"], urn_spec(0.5, 1e-3).params["y"]
        (500, 499)
    """
    if not 0.0 < rho <= 1.0:
        raise BadArgument(f"rho must lie in (0, 1], got {rho}")
    if not 0.0 < red_fraction < 1.0:
        raise BadArgument(f"red_fraction must lie in (0, 1), got {red_fraction}")

    total = int(round(r_balls / red_fraction))
    others = total - r_balls
    g = max(1, int(round(rho * others)))
    return ProcessSpec("urn", {"g": g, "y": others - g, "r_balls": r_balls}, seed)


def moving_maxima_threshold(spec: ProcessSpec) -> float:
    """Threshold u = -r / log(q), the q-quantile of X_t (P(X_t <= x) = exp(-r/x))."""
    return -spec.params["r"] / math.log(spec.params["q"])


def _chain_params(spec: ProcessSpec) -> Tuple[float, float]:
    p01, p11 = induced_chain(spec)
    if p01 == 0.0 or p11 == 1.0:
        raise Degenerate(
            f"{spec.label()} has an absorbing state; expected p01 > 0 and p11 < 1"
        )
    return p01, p11


def _rng_for(spec: ProcessSpec, seed: int, rng: Optional[np.random.Generator]):
    return rng if rng is not None else make_rng(seed, spec.seed)


def _require_length(n: int, minimum: int = 1) -> None:
    if n < minimum:
        raise BadArgument(f"path length must be >= {minimum}, got {n}")


# =============================================================================
# dense simulators
# =============================================================================

def moving_maxima_indicators(spec: ProcessSpec, n: int, seed: int = 0,
                             rng: Optional[np.random.Generator] = None) -> BinaryPath:
    """
    Exceedance indicators of the moving maxima process.

    Draws n + r - 1 unit-Frechet innovations Z = -1/log(U) (the first r - 1
    are burn-in), forms X_t = max(Z_t, ..., Z_{t-r+1}) and returns
    I_t = 1{X_t > u} with u = -r / log(q).

    Args:
        spec (ProcessSpec): moving_maxima spec (r, q).
        n (int): path length, n >= r.
        seed (int): master seed, combined with spec.seed.

    Returns:
        BinaryPath: stationary path with P(I_t = 1) = 1 - q.
    """
    if spec.model != "moving_maxima":
        raise BadArgument(f"expected a moving_maxima spec, got {spec.model}")
    r = spec.params["r"]
    _require_length(n, r)
    rng = _rng_for(spec, seed, rng)

    with np.errstate(divide="ignore"):
        z = -1.0 / np.log(rng.random(n + r - 1))
    x = sliding_window_view(z, r).max(axis=1)
    return BinaryPath(x > moving_maxima_threshold(spec), spec)


def _two_state_path(uniforms: np.ndarray, p01: float, p11: float, initial: int) -> np.ndarray:
    """
    Vectorized two-state chain driven by one uniform per step.

    A step is forced to 1 when U < min(p01, p11) and to 0 when
    U >= max(p01, p11). In between it copies the previous state (p11 > p01)
    or flips it (p01 > p11).
    """
    n = len(uniforms)
    low, high = min(p01, p11), max(p01, p11)
    forced_one = uniforms < low
    decisive = forced_one | (uniforms >= high)

    index = np.where(decisive, np.arange(n), -1)
    last = np.maximum.accumulate(index) if n else index
    state = np.where(last >= 0, forced_one[np.maximum(last, 0)], initial).astype(np.int64)

    if p01 > p11:
        flips = np.cumsum(~decisive)
        since = flips - np.where(last >= 0, flips[np.maximum(last, 0)], 0)
        state ^= since & 1
    return state.astype(np.uint8)


def markov_indicators(spec: ProcessSpec, n: int, seed: int = 0,
                      rng: Optional[np.random.Generator] = None) -> BinaryPath:
    """
    Stationary two-state Markov chain path; the initial state is drawn from
    pi_1 = p01 / (p01 + 1 - p11).

    Raises:
        Degenerate: p01 = 0 or p11 = 1.
    """
    if spec.model != "markov_binary":
        raise BadArgument(f"expected a markov_binary spec, got {spec.model}")
    _require_length(n)
    p01, p11 = _chain_params(spec)
    rng = _rng_for(spec, seed, rng)

    initial = int(rng.random() < stationary_marginal(spec))
    return BinaryPath(_two_state_path(rng.random(n), p01, p11, initial), spec)


def urn_indicators(spec: ProcessSpec, n: int, seed: int = 0,
                   rng: Optional[np.random.Generator] = None) -> BinaryPath:
    """
    At-risk indicators of the urn model.

    Each step draws a ball: red (U < r/N), yellow, or green (U >= (y+r)/N).
    The process is at risk after a red draw until the next green draw;
    yellow draws keep the current state. The state before the first draw
    comes from the stationary law r / (r + g).
    """
    if spec.model != "urn":
        raise BadArgument(f"expected an urn spec, got {spec.model}")
    _require_length(n)
    p01, p11 = _chain_params(spec)
    rng = _rng_for(spec, seed, rng)

    initial = int(rng.random() < stationary_marginal(spec))
    return BinaryPath(_two_state_path(rng.random(n), p01, p11, initial), spec)


def simulate_path(spec: ProcessSpec, n: int, seed: int = 0) -> BinaryPath:
    """Dense path for any model."""
    simulators = {
        "moving_maxima": moving_maxima_indicators,
        "urn": urn_indicators,
        "markov_binary": markov_indicators,
    }
    return simulators[spec.model](spec, n, seed)


# =============================================================================
# sparse simulation
# =============================================================================

def _geometric_positions(p: float, start: int, stop: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Positions in [start, stop) of an i.i.d. Bernoulli(p) sequence's ones."""
    chunks, position = [], start - 1
    while True:
        expected = p * (stop - position)
        size = int(expected + 10.0 * math.sqrt(expected) + 16)
        positions = position + np.cumsum(rng.geometric(p, size=size))
        chunks.append(positions)
        position = int(positions[-1])
        if position >= stop:
            break
    positions = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return positions[positions < stop].astype(np.int64)


def _moving_maxima_times(spec: ProcessSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    r, q = spec.params["r"], spec.params["q"]
    # P(Z > u) for the innovations
    p_innovation = -math.expm1(math.log(q) / r)
    records = _geometric_positions(p_innovation, -(r - 1), length, rng)

    ones = (records[:, None] + np.arange(r)[None, :]).ravel()
    ones = np.unique(ones)
    return ones[(ones >= 0) & (ones < length)]


def _chain_times(spec: ProcessSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    p01, p11 = _chain_params(spec)
    leave = (p01, 1.0 - p11)
    state = int(rng.random() < stationary_marginal(spec))

    starts, lengths = [], []
    position = 0
    while position < length:
        # pairs of alternating runs; run lengths are memoryless so the first
        # run of the stationary start is geometric too
        expected_runs = 2.0 * (length - position) * p01 * (1.0 - p11) / (p01 + 1.0 - p11)
        pairs = int(min(expected_runs / 2.0 + 10.0 * math.sqrt(expected_runs + 1.0) + 16, 1 << 22))
        runs = np.empty(2 * pairs, dtype=np.int64)
        runs[0::2] = rng.geometric(leave[state], size=pairs)
        runs[1::2] = rng.geometric(leave[1 - state], size=pairs)
        ends = position + np.cumsum(runs)
        begins = ends - runs

        ones_index = 0 if state == 1 else 1
        starts.append(begins[ones_index::2])
        lengths.append(runs[ones_index::2])
        position = int(ends[-1])

    starts = np.concatenate(starts)
    lengths = np.concatenate(lengths)
    keep = starts < length
    starts, lengths = starts[keep], lengths[keep]
    lengths = np.minimum(lengths, length - starts)

    offsets = np.arange(int(lengths.sum())) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return np.repeat(starts, lengths) + offsets


def exceedance_times(spec: ProcessSpec, length: int,
                     rng: np.random.Generator) -> np.ndarray:
    """
    Sorted positions of the ones of a stationary path on [0, length).

    Same law as the dense simulators; the cost scales with the number of
    ones instead of the path length.

    moving_maxima: innovations above u arrive with geometric gaps of
    parameter 1 - q^(1/r) starting r - 1 steps before 0; each switches on
    the r positions it dominates.
    chains: alternating runs, ones-runs Geo(1 - p11), zeros-runs Geo(p01).
    """
    _require_length(length)
    if spec.model == "moving_maxima":
        return _moving_maxima_times(spec, length, rng)
    return _chain_times(spec, length, rng)


def path_from_times(spec: ProcessSpec, times: np.ndarray, length: int) -> BinaryPath:
    bits = np.zeros(length, dtype=np.uint8)
    bits[times] = 1
    return BinaryPath(bits, spec)


# =============================================================================
# exact window law
# =============================================================================

def exact_window_law(spec: ProcessSpec, u: int, v: int) -> WindowLaw:
    """
    Exact conditional law of (I_t), t in [-u, v], given I_0 = 1, for a
    markov_binary or urn spec.

    Enumerates all 2^(u+v+1) patterns: the probability of a pattern is the
    stationary probability of its first bit times the chain's transition
    probabilities; patterns with bit u set are then divided by pi_1.

    Raises:
        WindowTooLarge: u + v + 1 > 24.
        Degenerate: pi_1 = 0 or undefined.
    """
    if spec.model not in ("markov_binary", "urn"):
        raise BadArgument(f"exact window laws need a chain model, got {spec.model}")
    if u < 0 or v < 0:
        raise BadArgument(f"window extents must be non-negative, got u={u}, v={v}")
    width = u + v + 1
    if width > MAX_EXACT_WIDTH:
        raise WindowTooLarge(
            f"window width {width} exceeds the enumeration bound {MAX_EXACT_WIDTH}"
        )

    p01, p11 = induced_chain(spec)
    pi1 = stationary_marginal(spec)
    if pi1 <= 0.0:
        raise Degenerate(f"{spec.label()} never visits state 1; cannot condition on I_0 = 1")

    # probs[code] over the first i bits; bit i of code is I_{i-u}
    probs = np.array([1.0 - pi1, pi1])
    for i in range(1, width):
        previous = (np.arange(len(probs)) >> (i - 1)) & 1
        to_one = np.where(previous == 1, p11, p01)
        probs = np.concatenate([probs * (1.0 - to_one), probs * to_one])

    codes = np.arange(len(probs), dtype=np.int64)
    centered = ((codes >> u) & 1) == 1
    law = WindowLaw(u, v, codes[centered], probs[centered] / pi1, source="exact")
    logger.debug(f"[Oracle] {spec.label()} window [-{u}, {v}]: {len(law.codes)} patterns")
    return law


# =============================================================================
# path summaries
# =============================================================================

def run_lengths(bits: np.ndarray) -> np.ndarray:
    """Lengths of the maximal runs of ones."""
    padded = np.concatenate([[0], np.asarray(bits, dtype=np.int8), [0]])
    edges = np.diff(padded)
    return np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)


def path_summary(path: BinaryPath) -> Dict[str, Any]:
    """
    Marginal, half-path marginals, run-length statistics and the exact
    stationary marginal for a simulated path.
    """
    bits = path.bits
    half = path.length // 2
    runs = run_lengths(bits)
    return {
        "model": path.model.label(),
        "length": path.length,
        "ones": int(bits.sum()),
        "marginal": path.marginal(),
        "marginal_first_half": float(bits[:half].mean()) if half else 0.0,
        "marginal_second_half": float(bits[half:].mean()) if path.length - half else 0.0,
        "stationary_marginal": stationary_marginal(path.model),
        "runs": int(len(runs)),
        "mean_run_length": float(runs.mean()) if len(runs) else 0.0,
        "max_run_length": int(runs.max()) if len(runs) else 0,
    }
