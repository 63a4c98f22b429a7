"""
Run Configuration
=================
JSON run-config schema for the command-line tool, validated with pydantic.

Example (backend/data/examples/urn_rho05.json):

    {
      "spec": {"model": "urn", "params": {"rho": 0.5, "red_fraction": 1e-5}, "seed": 7},
      "estimation": {"n_conditional_samples": 1000000, "cluster_window": 64},
      "output_dir": "out/urn",
      "format": "both"
    }

Relative paths are resolved against the directory of the config file.
Validation errors name the offending field and become ConfigError.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .core_types import ProcessSpec
from .errors import ClusterLabError, ConfigError
from .estimation import EstimationConfig
from .simulators import urn_spec

THREADS_ENV = "CLUSTERLAB_THREADS"

PATH_FIELDS = ("calculus_input", "verify_input", "output_dir")


class SpecSection(BaseModel):
    """
    Process spec. An urn may be given by its ball counts (g, y, r_balls) or
    by (rho, red_fraction[, r_balls]).
    """
    model_config = ConfigDict(extra="forbid")

    model: Literal["moving_maxima", "urn", "markov_binary"]
    params: Dict[str, float]
    seed: int = Field(0, ge=0, lt=2 ** 64)

    def to_spec(self) -> ProcessSpec:
        try:
            if self.model == "urn" and "rho" in self.params:
                extra = set(self.params) - {"rho", "red_fraction", "r_balls"}
                if extra or "red_fraction" not in self.params:
                    raise ConfigError(
                        "spec.params: an urn given by rho needs red_fraction "
                        f"(and optionally r_balls), got {sorted(self.params)}"
                    )
                return urn_spec(
                    self.params["rho"],
                    self.params["red_fraction"],
                    int(self.params.get("r_balls", 1)),
                    self.seed,
                )
            return ProcessSpec(self.model, dict(self.params), self.seed)
        except ConfigError:
            raise
        except ClusterLabError as exc:
            raise ConfigError(f"spec.params: {exc}") from exc


class EstimationSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    window_u: int = Field(4, ge=0)
    window_v: int = Field(4, ge=0)
    cluster_window: int = Field(64, ge=1)
    n_conditional_samples: int = Field(1_000_000, ge=1)
    master_seed: int = Field(0, ge=0, lt=2 ** 64)
    tolerance_sigma: float = Field(4.0, gt=0)
    samples_per_block: int = Field(65_536, ge=1)
    block_margin: Optional[int] = Field(None, ge=1)
    max_blocks: int = Field(100_000, ge=1)

    def to_config(self, master_seed: Optional[int] = None,
                  threads: Optional[int] = None) -> EstimationConfig:
        values = self.model_dump()
        if master_seed is not None:
            values["master_seed"] = master_seed
        try:
            return EstimationConfig(threads=threads, **values)
        except ClusterLabError as exc:
            raise ConfigError(f"estimation: {exc}") from exc


class SimulateSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    length: int = Field(100_000, ge=1)
    summary_only: bool = True


class VerifySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_set_size: int = Field(2, ge=1)
    tolerance_sigma: float = Field(4.0, gt=0)


class RunConfig(BaseModel):
    """Top-level run configuration; every section is optional."""
    model_config = ConfigDict(extra="forbid")

    spec: Optional[SpecSection] = None
    estimation: EstimationSection = Field(default_factory=EstimationSection)
    simulate: SimulateSection = Field(default_factory=SimulateSection)
    verify: VerifySection = Field(default_factory=VerifySection)
    calculus_input: Optional[Path] = None
    verify_input: Optional[Path] = None
    output_dir: Optional[Path] = None
    format: Literal["json", "csv", "both"] = "both"
    threads: Optional[int] = Field(None, ge=1)

    @field_validator("calculus_input", "verify_input")
    @classmethod
    def _input_exists(cls, value: Optional[Path]) -> Optional[Path]:
        if value is not None and not value.is_file():
            raise ValueError(f"file not found: {value}")
        return value


def _format_validation_error(exc: ValidationError) -> str:
    problems = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        problems.append(f"{location}: {error['msg']}")
    return "invalid run config: " + "; ".join(problems)


def parse_run_config(data: Dict[str, Any], base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a config dict; relative paths are taken from base_dir."""
    if not isinstance(data, dict):
        raise ConfigError(f"run config must be a JSON object, got {type(data).__name__}")

    data = dict(data)
    if base_dir is not None:
        for name in PATH_FIELDS:
            if isinstance(data.get(name), str) and not Path(data[name]).is_absolute():
                data[name] = str(base_dir / data[name])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def load_run_config(path) -> RunConfig:
    """
    Load and validate a JSON run config.

    Raises:
        ConfigError: missing file, malformed JSON or schema violation.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_run_config(data, base_dir=path.parent)


def resolve_threads(flag: Optional[int], config: Optional[RunConfig] = None) -> Optional[int]:
    """
    Thread count by precedence: flag > config > CLUSTERLAB_THREADS > None
    (None means available parallelism).
    """
    if flag is not None:
        if flag < 1:
            raise ConfigError(f"--threads must be >= 1, got {flag}")
        return flag
    if config is not None and config.threads is not None:
        return config.threads

    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            threads = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if threads < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {threads}")
        return threads
    return None


def ensure_output_dir(path) -> Path:
    """Create the output directory if needed and check it is writable."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path
