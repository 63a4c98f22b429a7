"""
Estimation Module
=================
Monte Carlo estimates of the conditional window law and of the cluster
sizes, and their cross-check against the exact calculus.

Sampling scheme:
- The stationary path is simulated in independent blocks. Block b uses
  the Philox stream (master_seed, spec.seed) / b and covers
  [0, 2M + L): a margin M on each side of L anchor positions.
- Every one at a position t in [M, M + L) is a conditioning instant. For
  each instant we record the window pattern on [t - u, t + v] and the side
  counts S- and S+ (number of ones within W steps before / after t).
- Blocks are produced in waves of `threads` and merged in block order;
  sampling stops after the first n_conditional_samples instants, so the
  result does not depend on the number of workers.

Censoring:
- A scan is censored when all W scanned positions are ones (the cluster
  does not visibly end). Censored directions go to the infinity atom.
  This rule is pathwise monotone in W.

Standard errors:
- Conditioning instants of one cluster are dependent. Standard errors use
  the deflated sample size m_eff = m / (1 + 2 E(S±)).
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.isotonic import IsotonicRegression

from .cluster_calculus import inspected_from_side, moments_report
from .core_types import MAX_WINDOW_WIDTH, CheckResult, ClusterReport, ExtendedPmf, ProcessSpec, WindowLaw
from .errors import BadArgument, NoAnchors, NoExceedances
from .rng import make_rng
from .simulators import BinaryPath, exceedance_times, stationary_marginal

logger = logging.getLogger(__name__)


# pmf entries compared cell by cell in cross_check
PMF_CHECK_MAX_K = 10

UNIFORM_SPLIT_SIZES = (2, 3, 4)

# joint (S-, S+) cells entering the symmetry check
SYMMETRY_MIN_COUNT = 25


@dataclass(frozen=True)
class EstimationConfig:
    """
    Monte Carlo settings.

    block_margin defaults to max(window_u, window_v, cluster_window); fix it
    explicitly to compare runs with different cluster windows on the same
    paths.
    """
    window_u: int = 4
    window_v: int = 4
    cluster_window: int = 64
    n_conditional_samples: int = 1_000_000
    master_seed: int = 0
    tolerance_sigma: float = 4.0
    samples_per_block: int = 65_536
    block_margin: Optional[int] = None
    max_blocks: int = 100_000
    threads: Optional[int] = None

    def __post_init__(self):
        if self.window_u < 0 or self.window_v < 0:
            raise BadArgument(
                f"window extents must be non-negative, got u={self.window_u}, v={self.window_v}"
            )
        if self.window_u + self.window_v + 1 > MAX_WINDOW_WIDTH:
            raise BadArgument(f"window width exceeds {MAX_WINDOW_WIDTH}")
        if self.cluster_window < 1:
            raise BadArgument(f"cluster_window must be >= 1, got {self.cluster_window}")
        if self.n_conditional_samples < 1:
            raise BadArgument(
                f"n_conditional_samples must be >= 1, got {self.n_conditional_samples}"
            )
        if not 0 <= self.master_seed < 2 ** 64:
            raise BadArgument(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.tolerance_sigma <= 0:
            raise BadArgument(f"tolerance_sigma must be positive, got {self.tolerance_sigma}")
        if self.samples_per_block < 1 or self.max_blocks < 1:
            raise BadArgument("samples_per_block and max_blocks must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise BadArgument(f"threads must be >= 1, got {self.threads}")
        needed = max(self.window_u, self.window_v, self.cluster_window)
        if self.block_margin is not None and self.block_margin < needed:
            raise BadArgument(
                f"block_margin {self.block_margin} is smaller than the scan reach {needed}"
            )

    @property
    def margin(self) -> int:
        if self.block_margin is not None:
            return self.block_margin
        return max(self.window_u, self.window_v, self.cluster_window)

    @property
    def workers(self) -> int:
        return self.threads or os.cpu_count() or 1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ClusterSamples:
    """Per-instant records: window pattern code and side counts."""
    codes: np.ndarray
    s_minus: np.ndarray
    s_plus: np.ndarray
    window_u: int
    window_v: int
    cluster_window: int
    blocks: int

    @property
    def count(self) -> int:
        return len(self.codes)

    @property
    def censored_minus(self) -> np.ndarray:
        return self.s_minus >= self.cluster_window

    @property
    def censored_plus(self) -> np.ndarray:
        return self.s_plus >= self.cluster_window

    @property
    def censored(self) -> np.ndarray:
        return self.censored_minus | self.censored_plus


@dataclass
class TypicalEstimate:
    """Typical cluster size estimated from cluster starts and from cluster ends."""
    theta_start: float
    typical_start: ExtendedPmf
    theta_end: float
    typical_end: ExtendedPmf
    anchors_start: int
    anchors_end: int

    @property
    def discrepancy(self) -> float:
        return self.theta_start - self.theta_end


# =============================================================================
# sampling
# =============================================================================

def _count_in(times: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    """Number of entries of the sorted array times in [low, high]."""
    return np.searchsorted(times, high, side="right") - np.searchsorted(times, low, side="left")


def _present(times: np.ndarray, positions: np.ndarray) -> np.ndarray:
    index = np.searchsorted(times, positions)
    inside = index < len(times)
    hit = np.zeros(len(positions), dtype=bool)
    hit[inside] = times[index[inside]] == positions[inside]
    return hit


def _records_at(times: np.ndarray, anchors: np.ndarray, u: int, v: int,
                cluster_window: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    codes = np.zeros(len(anchors), dtype=np.int64)
    for j in range(-u, v + 1):
        codes |= _present(times, anchors + j).astype(np.int64) << (j + u)
    s_minus = _count_in(times, anchors - cluster_window, anchors - 1)
    s_plus = _count_in(times, anchors + 1, anchors + cluster_window)
    return codes, s_minus.astype(np.int64), s_plus.astype(np.int64)


def _block_length(spec: ProcessSpec, cfg: EstimationConfig) -> int:
    marginal = stationary_marginal(spec)
    if marginal <= 0.0:
        raise NoExceedances(f"{spec.label()} has P(I_t = 1) = 0")
    return max(1, int(math.ceil(cfg.samples_per_block / marginal)))


def _simulate_block(spec: ProcessSpec, cfg: EstimationConfig, block: int,
                    length: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = make_rng(cfg.master_seed, spec.seed, block)
    margin = cfg.margin
    times = exceedance_times(spec, length + 2 * margin, rng)
    anchors = times[(times >= margin) & (times < margin + length)]
    return _records_at(times, anchors, cfg.window_u, cfg.window_v, cfg.cluster_window)


def collect_cluster_samples(spec: ProcessSpec, cfg: EstimationConfig) -> ClusterSamples:
    """
    Simulate blocks until n_conditional_samples conditioning instants are
    collected.

    Raises:
        NoExceedances: no instant observed within max_blocks blocks.
    """
    length = _block_length(spec, cfg)
    target = cfg.n_conditional_samples
    workers = cfg.workers

    logger.info(
        f"[Estimation] {spec.label()}: target {target:,} instants, "
        f"block length {length:,}, {workers} worker(s)"
    )

    parts: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    collected, next_block = 0, 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while collected < target and next_block < cfg.max_blocks:
            wave = range(next_block, min(next_block + workers, cfg.max_blocks))
            results = pool.map(lambda b: _simulate_block(spec, cfg, b, length), wave)
            for part in results:
                next_block += 1
                if collected >= target:
                    continue
                parts.append(part)
                collected += len(part[0])
            logger.debug(f"[Estimation] {next_block} block(s), {collected:,} instants")

    if collected == 0:
        raise NoExceedances(
            f"no conditioning instant (I_t = 1) in {next_block} block(s) of {spec.label()}"
        )
    if collected < target:
        logger.warning(
            f"[Estimation] only {collected:,} of {target:,} instants after {cfg.max_blocks} blocks"
        )

    codes, s_minus, s_plus = (np.concatenate(column)[:target] for column in zip(*parts))
    return ClusterSamples(
        codes=codes,
        s_minus=s_minus,
        s_plus=s_plus,
        window_u=cfg.window_u,
        window_v=cfg.window_v,
        cluster_window=cfg.cluster_window,
        blocks=len(parts),
    )


# =============================================================================
# window law
# =============================================================================

def _empirical_law(codes: np.ndarray, u: int, v: int) -> WindowLaw:
    patterns, counts = np.unique(codes, return_counts=True)
    m = int(counts.sum())
    return WindowLaw(u, v, patterns, counts / m, source="empirical", sample_count=m)


def window_law_from_samples(samples: ClusterSamples) -> WindowLaw:
    return _empirical_law(samples.codes, samples.window_u, samples.window_v)


def window_law_from_path(path: BinaryPath, u: int, v: int) -> WindowLaw:
    """
    Empirical window law of a single path; every one whose window
    [t - u, t + v] lies inside the path is a conditioning instant.

    Raises:
        NoExceedances: no such instant.
    """
    times = path.ones()
    anchors = times[(times >= u) & (times < path.length - v)]
    if len(anchors) == 0:
        raise NoExceedances(f"path of length {path.length} has no usable conditioning instant")
    codes, _, _ = _records_at(times, anchors, u, v, cluster_window=1)
    return _empirical_law(codes, u, v)


def estimate_window_law(spec: ProcessSpec, cfg: EstimationConfig) -> WindowLaw:
    """
    Empirical conditional law of (I_t), t in [-u, v], given I_0 = 1.

    Each conditioning instant contributes its re-centered window pattern
    once; overlapping windows are all counted.
    """
    return window_law_from_samples(collect_cluster_samples(spec, cfg))


# =============================================================================
# cluster sizes
# =============================================================================

def _pmf_from_values(values: np.ndarray, censored: int, total: int, offset: int) -> ExtendedPmf:
    counts = np.bincount(values - offset) if len(values) else np.zeros(0)
    return ExtendedPmf(offset, counts / total, censored / total)


def side_pmf(samples: ClusterSamples) -> ExtendedPmf:
    """Law of S± pooled over both scan directions."""
    censored_minus, censored_plus = samples.censored_minus, samples.censored_plus
    values = np.concatenate([samples.s_minus[~censored_minus], samples.s_plus[~censored_plus]])
    censored = int(censored_minus.sum() + censored_plus.sum())
    return _pmf_from_values(values, censored, 2 * samples.count, offset=0)


def inspected_pmf(samples: ClusterSamples) -> ExtendedPmf:
    """Law of S^i = S- + 1 + S+; censored instants go to the infinity atom."""
    censored = samples.censored
    sizes = samples.s_minus[~censored] + 1 + samples.s_plus[~censored]
    return _pmf_from_values(sizes, int(censored.sum()), samples.count, offset=1)


def estimate_cluster_sizes(spec: ProcessSpec,
                           cfg: EstimationConfig) -> Tuple[ExtendedPmf, ExtendedPmf, float]:
    """
    Estimated side-count law, inspected size law and censored fraction.

    Raises:
        NoExceedances: no conditioning instant observed.
    """
    samples = collect_cluster_samples(spec, cfg)
    return side_pmf(samples), inspected_pmf(samples), float(samples.censored.mean())


def typical_from_samples(samples: ClusterSamples) -> TypicalEstimate:
    """
    Typical size from instants starting a cluster (S- = 0, size S+ + 1) and,
    for comparison, from instants ending one (S+ = 0, size S- + 1).

    Raises:
        NoAnchors: no instant with S- = 0.
    """
    m = samples.count
    starts = samples.s_minus == 0
    ends = samples.s_plus == 0
    if not starts.any():
        raise NoAnchors("no conditioning instant has S- = 0 (no cluster start observed)")
    if not ends.any():
        raise NoAnchors("no conditioning instant has S+ = 0 (no cluster end observed)")

    def anchored(mask, forward, censored):
        anchors = int(mask.sum())
        values = forward[mask & ~censored] + 1
        return _pmf_from_values(values, int((mask & censored).sum()), anchors, offset=1)

    return TypicalEstimate(
        theta_start=float(starts.mean()),
        typical_start=anchored(starts, samples.s_plus, samples.censored_plus),
        theta_end=float(ends.mean()),
        typical_end=anchored(ends, samples.s_minus, samples.censored_minus),
        anchors_start=int(starts.sum()),
        anchors_end=int(ends.sum()),
    )


def estimate_typical(spec: ProcessSpec, cfg: EstimationConfig) -> Tuple[float, ExtendedPmf]:
    """
    theta_hat = fraction of instants with S- = 0 and the law of S+ + 1 among
    them. The discrepancy to the end-anchored estimate is logged.
    """
    estimate = typical_from_samples(collect_cluster_samples(spec, cfg))
    logger.info(
        f"[Estimation] theta from starts {estimate.theta_start:.6f}, "
        f"from ends {estimate.theta_end:.6f} (difference {estimate.discrepancy:+.2e})"
    )
    return estimate.theta_start, estimate.typical_start


# =============================================================================
# standard errors
# =============================================================================

def effective_sample_count(samples: ClusterSamples) -> float:
    """m / (1 + 2 E(S±)) with E(S±) over uncensored scans."""
    scans = np.concatenate([
        samples.s_minus[~samples.censored_minus],
        samples.s_plus[~samples.censored_plus],
    ])
    mean_side = float(scans.mean()) if len(scans) else 0.0
    return samples.count / (1.0 + 2.0 * mean_side)


def pmf_stderr(pmf: ExtendedPmf, effective_count: float) -> np.ndarray:
    """Binomial standard error of every finite pmf entry."""
    if effective_count <= 0:
        return np.full(len(pmf.probs), math.inf)
    return np.sqrt(pmf.probs * (1.0 - pmf.probs) / effective_count)


def project_monotone(side: ExtendedPmf) -> ExtendedPmf:
    """
    Closest nonincreasing side pmf (least squares on the finite entries).

    The projection keeps the finite mass, so the infinity atom is unchanged.
    """
    if len(side.probs) < 2:
        return side
    k = np.arange(len(side.probs))
    projected = IsotonicRegression(increasing=False, y_min=0.0).fit_transform(k, side.probs)
    return ExtendedPmf(0, projected, side.infinity_mass)


# =============================================================================
# cross-check
# =============================================================================

def _mean_check(name: str, residual: float, variance: float, count: float,
                sigma: float, m: int, context: str) -> CheckResult:
    se = math.sqrt(max(variance, 0.0) / count) if count > 0 else math.inf
    return CheckResult(name, residual, sigma * se + 1.0 / m, context)


def _pmf_checks(name: str, direct: ExtendedPmf, derived: ExtendedPmf, count: float,
                sigma: float, m: int) -> List[CheckResult]:
    checks = []
    stderr = pmf_stderr(direct, count)
    for index in range(min(len(direct.probs), PMF_CHECK_MAX_K + 1)):
        k = direct.offset + index
        residual = direct.value_at(k) - derived.value_at(k)
        checks.append(CheckResult(f"{name}[{k}]", residual, sigma * stderr[index] + 1.0 / m,
                                  "direct vs calculus"))
    return checks


def uniform_split_checks(samples: ClusterSamples, sigma: float) -> List[CheckResult]:
    """Among instants with S^i = k, S- should be uniform on {0, ..., k-1}."""
    keep = ~samples.censored
    sizes = samples.s_minus[keep] + 1 + samples.s_plus[keep]
    before = samples.s_minus[keep]

    checks = []
    for k in UNIFORM_SPLIT_SIZES:
        in_size = sizes == k
        n_k = int(in_size.sum())
        if n_k == 0:
            continue
        frequencies = np.bincount(before[in_size], minlength=k)[:k] / n_k
        deviation = np.abs(frequencies - 1.0 / k)
        worst = int(np.argmax(deviation))
        se = math.sqrt((1.0 / k) * (1.0 - 1.0 / k) / n_k)
        checks.append(CheckResult(
            f"uniform_split[k={k}]",
            float(deviation[worst]),
            sigma * se + 1.0 / n_k,
            f"{n_k} instants, worst S-={worst}",
        ))
    return checks


def joint_counts(samples: ClusterSamples) -> pd.DataFrame:
    """Counts N(k, l) of (S- = k, S+ = l) over uncensored instants."""
    keep = ~samples.censored
    return pd.crosstab(
        pd.Series(samples.s_minus[keep], name="s_minus"),
        pd.Series(samples.s_plus[keep], name="s_plus"),
    )


def symmetry_check(samples: ClusterSamples, sigma: float) -> CheckResult:
    """
    |N(k, l) - N(l, k)| <= sigma * sqrt(N(k, l) + N(l, k)) on every cell
    pair with at least SYMMETRY_MIN_COUNT instants.

    The residual is the largest standardized difference; the tolerance is
    sigma.
    """
    table = joint_counts(samples)
    size = int(max(table.index.max(), table.columns.max())) + 1 if table.size else 0
    counts = table.reindex(index=range(size), columns=range(size), fill_value=0).to_numpy()

    total = counts + counts.T
    difference = np.abs(counts - counts.T)
    upper = np.triu(total >= SYMMETRY_MIN_COUNT, k=1)
    if not upper.any():
        return CheckResult("joint_symmetry", 0.0, sigma, "no cell pair with enough instants")

    scores = np.where(upper, difference / np.sqrt(np.maximum(total, 1)), 0.0)
    k, l = np.unravel_index(int(np.argmax(scores)), scores.shape)
    return CheckResult(
        "joint_symmetry",
        float(scores[k, l]),
        sigma,
        f"{int(upper.sum())} cell pairs, worst (k,l)=({k},{l}) N={counts[k, l]}/{counts[l, k]}",
    )


def _uncensored_mean_var(values: np.ndarray) -> Tuple[float, float]:
    if len(values) == 0:
        return math.nan, math.nan
    return float(values.mean()), float(values.var())


def cross_check_samples(samples: ClusterSamples, sigma: float = 4.0) -> ClusterReport:
    """
    Compare the directly estimated laws with the exact calculus applied to
    the (monotone-projected) estimated side law.

    Raises:
        NoAnchors: no cluster start or end observed.
        ThetaZero: the estimated side law has no mass at 0.
    """
    m = samples.count
    m_eff = effective_sample_count(samples)
    side = side_pmf(samples)
    inspected = inspected_pmf(samples)
    typical = typical_from_samples(samples)
    censored_fraction = float(samples.censored.mean())

    projected = project_monotone(side)
    calculus = moments_report(projected)
    theta_hat = typical.theta_start
    m_typical = m_eff * theta_hat

    keep = ~samples.censored
    sizes = samples.s_minus[keep] + 1 + samples.s_plus[keep]
    starts = keep & (samples.s_minus == 0)
    typical_sizes = samples.s_plus[starts] + 1
    e_inspected_hat, var_inspected = _uncensored_mean_var(sizes)
    e_typical_hat, var_typical = _uncensored_mean_var(typical_sizes)
    _, var_typical_sq = _uncensored_mean_var(typical_sizes.astype(np.float64) ** 2)
    e_typical_sq_hat = float((typical_sizes.astype(np.float64) ** 2).mean()) if len(typical_sizes) else math.nan

    theta_se = math.sqrt(theta_hat * (1.0 - theta_hat) / m_eff)
    checks = [
        CheckResult("theta_vs_calculus", theta_hat - calculus.theta,
                    sigma * theta_se + 1.0 / m, "P(S- = 0) vs P(S± = 0) of the projected side law"),
        CheckResult("theta_start_vs_end", typical.discrepancy,
                    sigma * math.sqrt(2.0) * theta_se + 1.0 / m, "P(S- = 0) vs P(S+ = 0)"),
    ]

    # theta * E(S^t) = P(S± < inf), as the mean of 1{S- = 0} (S+ + 1)
    weighted = np.where(samples.s_minus == 0, samples.s_plus + 1, 0)[keep].astype(np.float64)
    finite_side = 1.0 - side.infinity_mass
    checks.append(_mean_check(
        "theta_mean_identity", float(weighted.sum()) / m - finite_side,
        float(weighted.var()), m_eff, sigma, m, "theta * E(S^t) vs P(S± < inf)",
    ))

    if len(sizes):
        checks.append(_mean_check(
            "inspected_mean_vs_calculus", e_inspected_hat - calculus.e_inspected,
            var_inspected, m_eff, sigma, m, "direct E(S^i) vs 1 + 2 E(S±)",
        ))
    if len(typical_sizes):
        checks.append(_mean_check(
            "typical_mean_vs_calculus", e_typical_hat - calculus.e_typical,
            var_typical, m_typical, sigma, m, "direct E(S^t) vs calculus",
        ))
    if len(sizes) and len(typical_sizes):
        second = e_inspected_hat * e_typical_hat - e_typical_sq_hat
        variance = (e_typical_hat ** 2 * var_inspected / m_eff
                    + (e_inspected_hat ** 2 * var_typical + var_typical_sq) / m_typical)
        checks.append(CheckResult(
            "second_moment_identity", second, sigma * math.sqrt(variance) + 1.0 / m,
            "E(S^i) E(S^t) vs E((S^t)^2)",
        ))
        gap_se = math.sqrt(var_inspected / m_eff + var_typical / m_typical)
        checks.append(CheckResult(
            "mean_inequality", max(0.0, e_typical_hat - e_inspected_hat),
            sigma * gap_se + 1.0 / m, "E(S^t) <= E(S^i)",
        ))

    checks += _pmf_checks("side_pmf", side, projected, m_eff, sigma, m)
    checks += _pmf_checks("inspected_pmf", inspected, inspected_from_side(projected), m_eff, sigma, m)
    if calculus.pmf_typical is not None:
        checks += _pmf_checks("typical_pmf", typical.typical_start, calculus.pmf_typical,
                              m_typical, sigma, m)
    checks += uniform_split_checks(samples, sigma)
    checks.append(symmetry_check(samples, sigma))

    notes = [
        f"standard errors use m_eff = m / (1 + 2 E(S±)) = {m_eff:.1f} (m = {m}); "
        f"this dependence correction is a heuristic",
        "estimates are at a fixed spec; pre-limit bias is not extrapolated",
    ]
    if censored_fraction > 0.0:
        notes.append(
            f"{censored_fraction:.3%} of instants censored at W = {samples.cluster_window}; "
            f"moments of censored laws are infinite, checks use uncensored instants"
        )
    if len(sizes) and len(typical_sizes):
        notes.append(f"mean gap E(S^i) - E(S^t) = {e_inspected_hat - e_typical_hat:.6f}")

    report = ClusterReport(
        theta=theta_hat,
        e_typical=typical.typical_start.mean(),
        e_inspected=inspected.mean(),
        e_side=side.mean(),
        pmf_side=side,
        pmf_inspected=inspected,
        pmf_typical=typical.typical_start,
        censored_fraction=censored_fraction,
        residuals={check.identity_name: check.residual for check in checks},
        checks=checks,
        notes=notes,
        sample_count=m,
        effective_sample_count=m_eff,
    )

    failed = [check.identity_name for check in checks if not check.passed]
    logger.info(
        f"[Estimation] cross-check: theta_hat={theta_hat:.6f}, {len(checks)} checks, "
        f"{len(failed)} failed{': ' + ', '.join(failed) if failed else ''}"
    )
    return report


def cross_check(spec: ProcessSpec, cfg: EstimationConfig) -> ClusterReport:
    """
    Estimate the cluster laws for spec and check them against the calculus.

    See cross_check_samples for the list of checks.
    """
    return cross_check_samples(collect_cluster_samples(spec, cfg), cfg.tolerance_sigma)
