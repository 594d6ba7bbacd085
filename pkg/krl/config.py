"""Run configuration: a sectioned TOML file validated by pydantic models.

Sections: [operator], [grid], [solver], [verify], [output]. Validation
errors are reported with the line that carries the offending key.
Environment overrides (``.env`` is honoured): KRL_SEED, KRL_LOG_LEVEL,
KRL_LOG_PATH, KRL_SWEEP_WORKERS.
"""
import os
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import tomli_w
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .cones import ConeKind, DEFAULT_TOLERANCE
from .errors import ConfigError
from .instances import (GridSpec, HardySobolevSpec, PLaplaceSpec, PucciSpec, build_inverse_operator,
                        build_matrix_operator, load_matrix)
from .operators import MonotoneOperator
from .solver import ContinuationConfig

SECTIONS = ("operator", "grid", "solver", "verify", "output")
SCALAR_TYPES = (int, float, Optional[int], Optional[float])

KIND_FIELDS = {
    "matrix": {"matrix", "matrix_file"},
    "plaplace": {"p", "cone", "newton_tol"},
    "hardy_sobolev": {"p", "mu", "n_dim", "v_scale", "v_decay", "cone", "newton_tol"},
    "pucci": {"lambda_p", "big_lambda", "variant", "cone"},
}


class OperatorBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["matrix", "plaplace", "hardy_sobolev", "pucci"]
    tolerance: float = Field(DEFAULT_TOLERANCE, ge=0.0, lt=1.0)
    p: Optional[float] = None
    mu: Optional[float] = None
    n_dim: Optional[int] = None
    v_scale: Optional[float] = None
    v_decay: Optional[float] = None
    lambda_p: Optional[float] = None
    big_lambda: Optional[float] = None
    variant: Optional[str] = None
    matrix: Optional[List[List[float]]] = None
    matrix_file: Optional[str] = None
    cone: Optional[ConeKind] = None
    newton_tol: Optional[float] = None

    @model_validator(mode="after")
    def _fields_match_kind(self):
        allowed = KIND_FIELDS[self.kind]
        for name in KIND_FIELDS["hardy_sobolev"] | KIND_FIELDS["pucci"] | KIND_FIELDS["matrix"]:
            if getattr(self, name) is not None and name not in allowed:
                raise ConfigError(f"{name} does not apply to operator kind {self.kind}", field=name)
        if self.kind == "matrix" and (self.matrix is None) == (self.matrix_file is None):
            raise ConfigError("matrix operator needs exactly one of matrix, matrix_file", field="matrix")
        if self.kind in ("plaplace", "hardy_sobolev") and self.p is None:
            raise ConfigError(f"operator kind {self.kind} needs p", field="p")
        return self

    def specific(self) -> dict:
        """Kind-specific fields that were set, as keyword arguments."""
        return {k: getattr(self, k) for k in KIND_FIELDS[self.kind] if getattr(self, k) is not None}


class SolverBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    eps0: float = Field(1e-1, gt=0.0)
    ratio: float = Field(0.5, gt=0.0, lt=1.0)
    eps_min: float = Field(1e-8, gt=0.0)
    tol: float = Field(1e-12, gt=0.0)
    max_iters: int = Field(10_000, gt=0)
    seed: int = 0
    acceptance_residual: float = Field(1e-6, gt=0.0)
    damping: float = Field(0.5, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _schedule_is_decreasing(self):
        if not self.eps_min < self.eps0:
            raise ConfigError(f"eps_min ({self.eps_min}) must be below eps0 ({self.eps0})",
                              section="solver", field="eps_min")
        return self

    def continuation_config(self) -> ContinuationConfig:
        return ContinuationConfig(eps0=self.eps0, ratio=self.ratio, eps_min=self.eps_min,
                                  max_inner_iters=self.max_iters, inner_tol=self.tol, seed=self.seed,
                                  acceptance_residual=self.acceptance_residual, damping=self.damping)


class VerifyBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    samples: int = Field(20, gt=0)
    pairs: int = Field(50, gt=0)
    uniqueness_starts: int = Field(20, ge=2)
    branch_depth: int = Field(8, gt=0)
    seed: int = 0


class OutputBlock(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    trace: str = "trace.csv"
    eigenpair: str = "eigenpair.json"
    report: str = "report.json"
    sweep: str = "sweep.csv"
    metrics: Optional[str] = None


class GridBlock(GridSpec):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    operator: OperatorBlock
    grid: GridBlock = GridBlock()
    solver: SolverBlock = SolverBlock()
    verify: VerifyBlock = VerifyBlock()
    output: OutputBlock = OutputBlock()
    base_dir: Path = Field(default=Path("."), exclude=True)

    def grid_spec(self) -> GridSpec:
        return GridSpec(n=self.grid.n, interval=self.grid.interval)

    def instance_spec(self):
        """PLaplaceSpec / HardySobolevSpec / PucciSpec, or the matrix as an array."""
        op = self.operator
        fields = op.specific()
        if op.kind == "matrix":
            if op.matrix is not None:
                return np.array(op.matrix, dtype=float)
            return load_matrix(str(self.base_dir / op.matrix_file))
        model = {"plaplace": PLaplaceSpec, "hardy_sobolev": HardySobolevSpec, "pucci": PucciSpec}[op.kind]
        return model(grid=self.grid_spec(), tolerance=op.tolerance, **fields)

    def output_path(self, name: str) -> Optional[Path]:
        value = getattr(self.output, name)
        return None if value is None else self.base_dir / value


def build_instance(cfg: RunConfig) -> MonotoneOperator:
    spec = cfg.instance_spec()
    if isinstance(spec, np.ndarray):
        return build_matrix_operator(spec, tolerance=cfg.operator.tolerance, label="matrix")
    return build_inverse_operator(spec)


def _line_of(text: str, section: str, key: Optional[str]) -> Optional[int]:
    current = None
    header = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", line)
        if m:
            current = m.group(1)
            if current == section:
                header = lineno
            continue
        if current == section and key and re.match(rf"^{re.escape(key)}\s*=", line):
            return lineno
    return header


def _anchored(path, text, section, key, message) -> ConfigError:
    line = _line_of(text, section, key)
    where = f"{path}:{line}" if line else str(path)
    name = f"{section}.{key}" if key else section
    return ConfigError(f"{where}: {name}: {message}", line=line, section=section, key=key)


def _validate(data: dict, path, text: str, base_dir: Path) -> RunConfig:
    try:
        cfg = RunConfig.model_validate({**data, "base_dir": base_dir})
    except ValidationError as e:
        err = e.errors()[0]
        loc = [str(part) for part in err["loc"]]
        section = loc[0] if loc and loc[0] in SECTIONS else "operator"
        key = loc[1] if len(loc) > 1 else (None if loc and loc[0] in SECTIONS else (loc[0] if loc else None))
        raise _anchored(path, text, section, key, err["msg"]) from e
    except ConfigError as e:
        raise _anchored(path, text, e.details.get("section", "operator"), e.details.get("field"), e.message) from e
    try:
        cfg.instance_spec()
    except ValidationError as e:
        err = e.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else None
        section = "grid" if key == "grid" else "operator"
        raise _anchored(path, text, section, None if section == "grid" else key, err["msg"]) from e
    except ConfigError as e:
        raise _anchored(path, text, "operator", e.details.get("field"), e.message) from e
    return cfg


def _env_overrides(cfg: RunConfig) -> RunConfig:
    seed = os.getenv("KRL_SEED")
    if seed is None or seed == "":
        return cfg
    try:
        value = int(seed)
    except ValueError:
        raise ConfigError(f"KRL_SEED must be an integer, got {seed!r}")
    return cfg.model_copy(update={"solver": cfg.solver.model_copy(update={"seed": value})})


def parse_config(text: str, path="<string>", base_dir: Optional[Path] = None) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        line = int(m.group(1)) if m else None
        raise ConfigError(f"{path}:{line}: {e}" if line else f"{path}: {e}", line=line) from e
    if "operator" not in data:
        raise ConfigError(f"{path}: missing [operator] section")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise _anchored(path, text, unknown[0], None, "unknown section")
    return _env_overrides(_validate(data, path, text, base_dir or Path(".")))


def load_config(path) -> RunConfig:
    load_dotenv()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, path, path.parent)


def to_toml(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))


def sweep_target(cfg: RunConfig, key: str) -> Tuple[str, str]:
    """Resolve ``p`` or ``operator.p`` to (section, field); the field must be scalar."""
    if "." in key:
        section, name = key.split(".", 1)
    else:
        section = next((s for s in SECTIONS if _has_field(cfg, s, key)), None)
        name = key
    if section not in SECTIONS or not _has_field(cfg, section, name):
        raise ConfigError(f"sweep key {key!r} does not name a config field")
    annotation = type(getattr(cfg, section)).model_fields[name].annotation
    allowed = section != "operator" or name in KIND_FIELDS[cfg.operator.kind] | {"tolerance"}
    if not allowed or annotation not in SCALAR_TYPES:
        raise ConfigError(f"sweep key {key!r} is not a scalar field of this run")
    return section, name


def _has_field(cfg: RunConfig, section: str, name: str) -> bool:
    return name in type(getattr(cfg, section)).model_fields


def with_override(cfg: RunConfig, section: str, name: str, value: float) -> RunConfig:
    """A re-validated copy of ``cfg`` with one scalar field replaced."""
    data = cfg.model_dump(mode="json", exclude_none=True)
    field_info = type(getattr(cfg, section)).model_fields[name]
    if field_info.annotation in (int, Optional[int]) and float(value).is_integer():
        value = int(value)
    data[section][name] = value
    new = RunConfig.model_validate({**data, "base_dir": cfg.base_dir})
    new.instance_spec()
    return new
