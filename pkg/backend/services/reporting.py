"""
Reporting Module
================
Readers and writers for pmf, window-law and report files.

JSON files are strict JSON: infinity is written as the string "inf".
CSV files are written with pandas (shortest round-trip float repr, "\\n"
line endings) so identical inputs give byte-identical files.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional

import numpy as np
import pandas as pd

from .core_types import CheckResult, ClusterReport, ExtendedPmf, WindowLaw
from .errors import ConfigError
from .estimation import pmf_stderr

logger = logging.getLogger(__name__)

CHECK_COLUMNS = ["identity_name", "context", "residual", "tolerance", "passed"]


# =============================================================================
# readers
# =============================================================================

def read_json(path) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"input file {path} is not valid JSON: {exc}") from exc


def load_pmf(path) -> ExtendedPmf:
    """Read an ExtendedPmf JSON file ({offset, probs, infinity_mass})."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object with offset, probs, infinity_mass")
    return ExtendedPmf.from_dict(data)


def load_window_law(path) -> WindowLaw:
    """Read a WindowLaw JSON file ({u, v, entries, source, sample_count})."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object with u, v, entries")
    return WindowLaw.from_dict(data)


# =============================================================================
# tables
# =============================================================================

def pmf_frame(pmf: ExtendedPmf, stderr: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    One row per finite support point (k, prob, stderr); the infinity atom,
    when positive, is a final row with k = "inf".
    """
    if stderr is None:
        stderr = np.zeros(len(pmf.probs))
    frame = pd.DataFrame({
        "k": [int(k) for k in pmf.support],
        "prob": pmf.probs.astype(float),
        "stderr": np.asarray(stderr, dtype=float),
    })
    if pmf.infinity_mass > 0.0:
        frame = frame.astype({"k": object})
        frame.loc[len(frame)] = ["inf", pmf.infinity_mass, math.nan]
    return frame


def checks_frame(checks: Iterable[CheckResult]) -> pd.DataFrame:
    rows = [
        {
            "identity_name": check.identity_name,
            "context": check.context,
            "residual": check.residual,
            "tolerance": check.tolerance,
            "passed": check.passed,
        }
        for check in checks
    ]
    return pd.DataFrame(rows, columns=CHECK_COLUMNS)


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _to_json_text(data: Any) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def write_json(data: Any, path) -> Path:
    path = Path(path)
    path.write_text(_to_json_text(data))
    return path


# =============================================================================
# writers
# =============================================================================

def report_frames(report: ClusterReport) -> dict:
    """CSV tables of a report keyed by file name."""
    m_eff = report.effective_sample_count
    frames = {}
    if m_eff is None:
        frames["side_pmf.csv"] = pmf_frame(report.pmf_side)
        frames["inspected_pmf.csv"] = pmf_frame(report.pmf_inspected)
        if report.pmf_typical is not None:
            frames["typical_pmf.csv"] = pmf_frame(report.pmf_typical)
    else:
        frames["side_pmf.csv"] = pmf_frame(report.pmf_side, pmf_stderr(report.pmf_side, m_eff))
        frames["inspected_pmf.csv"] = pmf_frame(
            report.pmf_inspected, pmf_stderr(report.pmf_inspected, m_eff)
        )
        if report.pmf_typical is not None:
            m_typical = m_eff * (report.theta or 0.0)
            frames["typical_pmf.csv"] = pmf_frame(
                report.pmf_typical, pmf_stderr(report.pmf_typical, m_typical)
            )
    frames["checks.csv"] = checks_frame(report.checks)
    return frames


def write_report(report: ClusterReport, output_dir, fmt: str = "both",
                 extra: Optional[dict] = None) -> List[Path]:
    """
    Write report.json and/or the companion CSVs (side_pmf, inspected_pmf,
    typical_pmf, checks) into output_dir.

    Args:
        report (ClusterReport): exact or empirical report.
        output_dir: existing directory.
        fmt (str): "json", "csv" or "both".
        extra (dict): additional top-level JSON fields (e.g. the spec).

    Returns:
        list: paths written.
    """
    output_dir = Path(output_dir)
    written = []
    if fmt in ("json", "both"):
        data = dict(extra or {})
        data.update(report.to_dict())
        written.append(write_json(data, output_dir / "report.json"))
    if fmt in ("csv", "both"):
        for name, frame in report_frames(report).items():
            written.append(_write_csv(frame, output_dir / name))
    logger.info(f"[Report] wrote {', '.join(p.name for p in written)} to {output_dir}")
    return written


def write_checks(checks: List[CheckResult], output_dir, fmt: str = "csv",
                 name: str = "checks") -> List[Path]:
    output_dir = Path(output_dir)
    written = []
    if fmt in ("csv", "both"):
        written.append(_write_csv(checks_frame(checks), output_dir / f"{name}.csv"))
    if fmt in ("json", "both"):
        written.append(write_json([c.to_dict() for c in checks], output_dir / f"{name}.json"))
    return written


def write_window_law(law: WindowLaw, path) -> Path:
    return write_json(law.to_dict(), path)


def checks_to_text(checks: List[CheckResult]) -> str:
    return checks_frame(checks).to_csv(index=False, lineterminator="\n")

