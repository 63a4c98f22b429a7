"""
Core Types Module
=================
Domain types shared by every other service module.

    ExtendedPmf   - probability mass function on N0 (or N) with an explicit
                    atom at infinity; carries the laws of S±, S^i and S^t.
    WindowLaw     - conditional law of the indicator pattern on a window
                    [-u, v] given I_0 = 1, stored as pattern codes + probs.
    ProcessSpec   - named stochastic model with parameters and seed.
    ClusterReport - theta, cluster-size moments, laws and identity residuals.
    CheckResult   - one identity residual with its tolerance and verdict.

Pattern encoding:
    A window pattern is a bit string of length u+v+1 whose character i
    holds I_{i-u}; character u is time 0. The integer code of a pattern
    sets bit i for character i, so shifting the pattern in time is pure
    index arithmetic on the code.

All types are immutable after construction (arrays are flagged read-only)
and can be shared between worker threads.
"""

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from .errors import BadArgument, BadOffset, NegativeMass, NotNormalized


# Normalization bound for exact and empirical laws
EPS_NORM = 1e-9

# Widest window whose pattern codes fit into int64
MAX_WINDOW_WIDTH = 62

MODEL_PARAMS = {
    "moving_maxima": ("r", "q"),
    "urn": ("g", "y", "r_balls"),
    "markov_binary": ("p01", "p11"),
}

LAW_SOURCES = ("exact", "empirical")


# -----------------------------------------------------------------------------
# JSON helpers for possibly-infinite reals
# -----------------------------------------------------------------------------

def encode_float(value: Optional[float]) -> Any:
    """Encode a real for strict JSON; infinity becomes the string "inf"."""
    if value is None:
        return None
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def decode_float(value: Any) -> Optional[float]:
    """Inverse of encode_float; also accepts "Infinity"."""
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
    return float(value)


def _require_fields(data: Any, required, what: str, expected: List[str]) -> None:
    if not isinstance(data, Mapping):
        raise BadArgument(f"{what} must be a JSON object, got {type(data).__name__}")
    missing = [key for key in required if key not in data]
    if missing:
        raise BadArgument(f"missing required {what} fields: {missing}. expected: {expected}")


def _as_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer)):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return int(value)


# =============================================================================
# ExtendedPmf
# =============================================================================

@dataclass(frozen=True, eq=False)
class ExtendedPmf:
    """
    Probability mass function with an atom at infinity.

    probs[k] is P(value = offset + k); infinity_mass is P(value = inf).
    offset is 0 for side counts S± and 1 for cluster sizes S^i, S^t.

    Construction only coerces types. Use validate_pmf() for the
    normalization checks and the canonical (trimmed) form.
    """
    offset: int
    probs: np.ndarray
    infinity_mass: float = 0.0

    def __post_init__(self):
        offset = int(self.offset)
        if offset not in (0, 1):
            raise BadOffset(f"offset must be 0 or 1, got {self.offset}")

        probs = np.array(self.probs, dtype=np.float64).ravel()
        probs.setflags(write=False)

        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "infinity_mass", float(self.infinity_mass))

    # -------------------------------------------------------------------------
    # constructors
    # -------------------------------------------------------------------------

    @classmethod
    def point_mass(cls, value: int, offset: int = 0) -> "ExtendedPmf":
        """Point mass at a finite value (value >= offset)."""
        if value < offset:
            raise BadArgument(f"point mass at {value} lies below offset {offset}")
        probs = np.zeros(value - offset + 1)
        probs[-1] = 1.0
        return cls(offset, probs, 0.0)

    @classmethod
    def infinite(cls, offset: int = 0) -> "ExtendedPmf":
        """Point mass at infinity."""
        return cls(offset, np.zeros(0), 1.0)

    @classmethod
    def uniform(cls, r: int, offset: int = 0) -> "ExtendedPmf":
        """Uniform law on {offset, ..., offset + r - 1}."""
        if r < 1:
            raise BadArgument(f"uniform law needs r >= 1, got {r}")
        return cls(offset, np.full(r, 1.0 / r), 0.0)

    @classmethod
    def geometric(cls, rho: float, offset: int = 0, k_max: int = 200) -> "ExtendedPmf":
        """
        Geometric law rho * (1 - rho)^(k - offset), truncated after k_max.

        The truncated tail (1 - rho)^(k_max + 1 - offset) is dropped; at the
        default k_max it is far below EPS_NORM for rho >= 0.2.
        """
        if not 0.0 < rho <= 1.0:
            raise BadArgument(f"rho must lie in (0, 1], got {rho}")
        k = np.arange(k_max + 1 - offset)
        return cls(offset, rho * (1.0 - rho) ** k, 0.0)

    # -------------------------------------------------------------------------
    # accessors
    # -------------------------------------------------------------------------

    @property
    def support(self) -> np.ndarray:
        """Finite support points offset, offset+1, ..."""
        return np.arange(self.offset, self.offset + len(self.probs))

    @property
    def finite_mass(self) -> float:
        return float(self.probs.sum())

    @property
    def total_mass(self) -> float:
        return self.finite_mass + self.infinity_mass

    def value_at(self, k: int) -> float:
        """P(value = k) for a finite k; zero outside the stored support."""
        index = k - self.offset
        if index < 0 or index >= len(self.probs):
            return 0.0
        return float(self.probs[index])

    def mean(self) -> float:
        """Expectation; infinite as soon as the infinity atom is positive."""
        if self.infinity_mass > 0.0:
            return math.inf
        return float(np.dot(self.support, self.probs))

    def second_moment(self) -> float:
        if self.infinity_mass > 0.0:
            return math.inf
        support = self.support.astype(np.float64)
        return float(np.dot(support * support, self.probs))

    def allclose(self, other: "ExtendedPmf", atol: float = 1e-12) -> bool:
        """Entrywise comparison after padding both pmfs to a common length."""
        if self.offset != other.offset:
            return False
        length = max(len(self.probs), len(other.probs))
        a = np.pad(self.probs, (0, length - len(self.probs)))
        b = np.pad(other.probs, (0, length - len(other.probs)))
        return bool(
            np.allclose(a, b, rtol=0.0, atol=atol)
            and abs(self.infinity_mass - other.infinity_mass) <= atol
        )

    # -------------------------------------------------------------------------
    # serialization
    # -------------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "offset": self.offset,
            "probs": [float(x) for x in self.probs],
            "infinity_mass": float(self.infinity_mass),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExtendedPmf":
        _require_fields(data, ("offset", "probs"), "pmf", ["offset", "probs", "infinity_mass"])
        try:
            offset = _as_int(data["offset"], "offset")
            probs = [float(decode_float(x)) for x in data["probs"]]
            infinity_mass = float(decode_float(data.get("infinity_mass", 0.0)))
        except (TypeError, ValueError) as exc:
            raise BadArgument(f"malformed pmf: {exc}") from exc
        return cls(offset, probs, infinity_mass)


def validate_pmf(p: ExtendedPmf) -> ExtendedPmf:
    """
    Validate an extended pmf and return its canonical (trimmed) copy.

    Args:
        p (ExtendedPmf): pmf to check.

    Returns:
        ExtendedPmf: copy with trailing zeros removed from probs.

    Raises:
        NegativeMass: if any entry (or the infinity atom) is negative.
        NotNormalized: if the total mass deviates from 1 by more than EPS_NORM.

    Example:
        >>> validate_pmf(ExtendedPmf(0, [1/3, 1/3, 1/3, 0, 0])).probs
        array([0.33333333, 0.33333333, 0.33333333])
    """
    if np.any(p.probs < 0.0) or p.infinity_mass < 0.0:
        worst = min(float(p.probs.min()) if len(p.probs) else 0.0, p.infinity_mass)
        raise NegativeMass(f"pmf has a negative entry ({worst!r})")

    total = p.total_mass
    if not math.isfinite(total) or abs(total - 1.0) > EPS_NORM:
        raise NotNormalized(
            f"pmf total mass is {total!r}, expected 1 within {EPS_NORM}"
        )

    return ExtendedPmf(p.offset, np.trim_zeros(p.probs, "b"), p.infinity_mass)


def pmf_tail(p: ExtendedPmf, k: int) -> float:
    """
    Tail probability P(value >= k), counting the infinity atom.

    Example:
        >>> pmf_tail(ExtendedPmf(0, [0.2, 0.3], 0.5), 1)
        0.8
    """
    # the whole support carries all the mass by definition
    if k <= p.offset:
        return 1.0

    index = k - p.offset
    tail = p.infinity_mass
    if index < len(p.probs):
        tail += float(p.probs[index:].sum())
    return min(1.0, max(0.0, tail))


# =============================================================================
# WindowLaw
# =============================================================================

def pattern_to_code(pattern: str) -> int:
    """Encode a 0/1 string (character i = bit i) as an integer."""
    if not pattern or set(pattern) - {"0", "1"}:
        raise BadArgument(f"pattern must be a non-empty 0/1 string, got {pattern!r}")
    return int(pattern[::-1], 2)


def code_to_pattern(code: int, width: int) -> str:
    """Decode an integer pattern code into a 0/1 string of the given width."""
    return format(int(code), f"0{width}b")[::-1]


def time_mask(times, u: int) -> int:
    """Bit mask selecting the window positions of the given times."""
    mask = 0
    for t in times:
        mask |= 1 << (int(t) + u)
    return mask


@dataclass(frozen=True, eq=False)
class WindowLaw:
    """
    Conditional law of (I_t) for t in [-u, v] given I_0 = 1.

    Stored sparsely: codes[j] is a pattern code (bit i <-> time i - u) and
    probs[j] its probability. Zero-probability patterns are dropped and
    codes are kept sorted.

    source is "exact" for enumerated laws and "empirical" for laws
    estimated from sample_count conditioning instants.
    """
    u: int
    v: int
    codes: np.ndarray
    probs: np.ndarray
    source: str = "exact"
    sample_count: Optional[int] = None

    def __post_init__(self):
        u, v = int(self.u), int(self.v)
        if u < 0 or v < 0:
            raise BadArgument(f"window extents must be non-negative, got u={u}, v={v}")
        if u + v + 1 > MAX_WINDOW_WIDTH:
            raise BadArgument(
                f"window width {u + v + 1} exceeds the supported {MAX_WINDOW_WIDTH}"
            )
        if self.source not in LAW_SOURCES:
            raise BadArgument(f"unknown law source {self.source!r}, expected one of {LAW_SOURCES}")
        if self.source == "empirical" and (self.sample_count is None or self.sample_count < 1):
            raise BadArgument("empirical window laws need a positive sample_count")

        codes = np.asarray(self.codes, dtype=np.int64).ravel()
        probs = np.asarray(self.probs, dtype=np.float64).ravel()
        if codes.shape != probs.shape:
            raise BadArgument("codes and probs must have the same length")
        if np.any(probs < 0.0):
            raise NegativeMass("window law has a negative probability")

        total = float(probs.sum())
        if abs(total - 1.0) > EPS_NORM:
            raise NotNormalized(
                f"window law total mass is {total!r}, expected 1 within {EPS_NORM}"
            )

        keep = probs > 0.0
        codes, probs = codes[keep], probs[keep]
        if len(np.unique(codes)) != len(codes):
            raise BadArgument("window law lists a pattern more than once")

        # I_0 = 1 almost surely
        if np.any(((codes >> u) & 1) == 0):
            raise BadArgument("window law puts mass on a pattern with a 0 at time 0")

        order = np.argsort(codes, kind="stable")
        codes, probs = codes[order].copy(), probs[order].copy()
        codes.setflags(write=False)
        probs.setflags(write=False)

        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "probs", probs)
        if self.sample_count is not None:
            object.__setattr__(self, "sample_count", int(self.sample_count))

    @property
    def width(self) -> int:
        return self.u + self.v + 1

    @property
    def is_exact(self) -> bool:
        return self.source == "exact"

    @property
    def entries(self) -> Dict[str, float]:
        """Pattern string -> probability."""
        return {
            code_to_pattern(code, self.width): float(prob)
            for code, prob in zip(self.codes, self.probs)
        }

    def contains(self, t: int) -> bool:
        return -self.u <= t <= self.v

    def marginal(self, t: int) -> float:
        """P(I_t = 1 | I_0 = 1)."""
        bit = (self.codes >> (t + self.u)) & 1
        return float(self.probs[bit == 1].sum())

    @classmethod
    def from_entries(cls, u: int, v: int, entries: Mapping[str, float],
                     source: str = "exact",
                     sample_count: Optional[int] = None) -> "WindowLaw":
        width = u + v + 1
        codes, probs = [], []
        for pattern, prob in entries.items():
            if len(pattern) != width:
                raise BadArgument(
                    f"pattern {pattern!r} has length {len(pattern)}, expected {width}"
                )
            codes.append(pattern_to_code(pattern))
            probs.append(float(prob))
        return cls(u, v, np.array(codes, dtype=np.int64), np.array(probs), source, sample_count)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "u": self.u,
            "v": self.v,
            "entries": self.entries,
            "source": self.source,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WindowLaw":
        _require_fields(data, ("u", "v", "entries"), "window law",
                        ["u", "v", "entries", "source"])
        source = data.get("source", "exact")
        sample_count = data.get("sample_count")
        # also accept {"empirical": m}
        if isinstance(source, Mapping):
            sample_count = source.get("empirical", sample_count)
            source = "empirical"
        if not isinstance(data["entries"], Mapping):
            raise BadArgument(f"window law entries must map patterns to probabilities, "
                              f"got {type(data['entries']).__name__}")
        try:
            u = _as_int(data["u"], "u")
            v = _as_int(data["v"], "v")
            entries = {str(pattern): float(prob) for pattern, prob in data["entries"].items()}
            if sample_count is not None:
                sample_count = _as_int(sample_count, "sample_count")
        except (TypeError, ValueError) as exc:
            raise BadArgument(f"malformed window law: {exc}") from exc
        return cls.from_entries(u, v, entries, source, sample_count)


# =============================================================================
# ProcessSpec
# =============================================================================

@dataclass(frozen=True)
class ProcessSpec:
    """
    A named stationary binary process with its parameters and seed.

    Parameters per model:
        moving_maxima: r (window length, >= 1), q (threshold quantile in (0, 1))
        urn:           g (green >= 1), y (yellow >= 0), r_balls (red >= 1)
        markov_binary: p01, p11 (transition probabilities in [0, 1])
    """
    model: str
    params: Mapping[str, float]
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODEL_PARAMS:
            raise BadArgument(
                f"unknown model {self.model!r}. expected one of {list(MODEL_PARAMS)}"
            )

        expected = MODEL_PARAMS[self.model]
        missing = [name for name in expected if name not in self.params]
        extra = [name for name in self.params if name not in expected]
        if missing or extra:
            raise BadArgument(
                f"{self.model} parameters mismatch: missing {missing}, unexpected {extra}. "
                f"expected: {list(expected)}"
            )

        params = dict(self.params)
        if self.model == "moving_maxima":
            params["r"] = _as_count(params["r"], "r", minimum=1)
            params["q"] = float(params["q"])
            if not 0.0 < params["q"] < 1.0:
                raise BadArgument(f"q must lie in (0, 1), got {params['q']}")
        elif self.model == "urn":
            params["g"] = _as_count(params["g"], "g", minimum=1)
            params["y"] = _as_count(params["y"], "y", minimum=0)
            params["r_balls"] = _as_count(params["r_balls"], "r_balls", minimum=1)
        else:
            for name in ("p01", "p11"):
                params[name] = float(params[name])
                if not 0.0 <= params[name] <= 1.0:
                    raise BadArgument(f"{name} must lie in [0, 1], got {params[name]}")

        seed = int(self.seed)
        if not 0 <= seed < 2 ** 64:
            raise BadArgument(f"seed must be an unsigned 64-bit integer, got {self.seed}")

        object.__setattr__(self, "params", MappingProxyType(params))
        object.__setattr__(self, "seed", seed)

    def label(self) -> str:
        """Short human-readable description used in reports and logs."""
        values = ", ".join(f"{k}={self.params[k]}" for k in MODEL_PARAMS[self.model])
        return f"{self.model}({values})"

    def with_seed(self, seed: int) -> "ProcessSpec":
        return ProcessSpec(self.model, dict(self.params), seed)

    def to_dict(self) -> Dict[str, Any]:
        return {"model": self.model, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProcessSpec":
        return cls(data["model"], dict(data.get("params", {})), int(data.get("seed", 0)))


def _as_count(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, float) and not value.is_integer():
        raise BadArgument(f"{name} must be an integer, got {value}")
    count = int(value)
    if count < minimum:
        raise BadArgument(f"{name} must be >= {minimum}, got {count}")
    return count


# =============================================================================
# CheckResult / ClusterReport
# =============================================================================

@dataclass(frozen=True)
class CheckResult:
    """
    One identity residual with its tolerance.

    passed is derived, so it always agrees with |residual| <= tolerance
    (a NaN residual never passes).
    """
    identity_name: str
    residual: float
    tolerance: float
    context: str = ""

    @property
    def passed(self) -> bool:
        return bool(abs(self.residual) <= self.tolerance)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "identity_name": self.identity_name,
            "context": self.context,
            "residual": encode_float(self.residual),
            "tolerance": encode_float(self.tolerance),
            "passed": self.passed,
        }


@dataclass
class ClusterReport:
    """
    Summary of a cluster-size law: theta, moments, laws and residuals.

    Exact reports come from the calculus (sample_count is None);
    empirical reports carry the conditioning sample count, the
    dependence-corrected effective count and the censoring diagnostics.
    """
    theta: Optional[float]
    e_typical: Optional[float]
    e_inspected: float
    e_side: float
    pmf_side: ExtendedPmf
    pmf_inspected: ExtendedPmf
    pmf_typical: Optional[ExtendedPmf]
    censored_fraction: float = 0.0
    residuals: Dict[str, float] = field(default_factory=dict)
    checks: List[CheckResult] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    sample_count: Optional[int] = None
    effective_sample_count: Optional[float] = None

    def __post_init__(self):
        if self.theta is not None and not -EPS_NORM <= self.theta <= 1.0 + EPS_NORM:
            raise BadArgument(f"theta must lie in [0, 1], got {self.theta}")
        if not 0.0 <= self.censored_fraction <= 1.0:
            raise BadArgument(
                f"censored_fraction must lie in [0, 1], got {self.censored_fraction}"
            )

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": encode_float(self.theta),
            "e_typical": encode_float(self.e_typical),
            "e_inspected": encode_float(self.e_inspected),
            "e_side": encode_float(self.e_side),
            "pmf_side": self.pmf_side.to_dict(),
            "pmf_inspected": self.pmf_inspected.to_dict(),
            "pmf_typical": self.pmf_typical.to_dict() if self.pmf_typical is not None else None,
            "censored_fraction": self.censored_fraction,
            "residuals": {name: encode_float(value) for name, value in self.residuals.items()},
            "checks": [check.to_dict() for check in self.checks],
            "notes": list(self.notes),
            "sample_count": self.sample_count,
            "effective_sample_count": encode_float(self.effective_sample_count),
        }
