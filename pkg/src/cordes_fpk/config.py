"""Line-oriented ``key = value`` run configuration."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import coefficients as cf
from .sparse_linalg import DIRECT, ITERATIVE, SolveConfig

COMMANDS = ("check", "solve", "study", "homogenize")
SETTINGS = ("periodic", "dirichlet")
CLI_FAMILIES = ("constant_identity", "constant_matrix", "checkerboard", "layered", "trig_drift", "table")

_MATRIX_KEYS = {d: [f"a{i + 1}{j + 1}" for i in range(d) for j in range(i, d)] for d in (2, 3)}
FAMILY_PARAMS = {
    "constant_identity": set(),
    "constant_matrix": {"a11", "a12", "a13", "a22", "a23", "a33", "b1", "b2", "b3"},
    "checkerboard": {"values", "split_axis"},
    "layered": {"profile"},
    "trig_drift": {"alpha"},
    "table": {"table"},
}
ALL_PARAMS = set().union(*FAMILY_PARAMS.values())

# key -> (parser name, default)
GENERAL_KEYS = {
    "command": ("command", None),
    "dim": ("int", None),
    "setting": ("setting", "periodic"),
    "family": ("family", None),
    "N": ("int_list", None),
    "quad_order": ("int", 2),
    "solver": ("solver", ITERATIVE),
    "tol": ("float", 1e-10),
    "max_iter": ("int", None),
    "restart": ("int", 200),
    "f": ("source", None),
    "F": ("source", None),
    "N_fine": ("int", None),
    "dump_matrix": ("bool", False),
    "report": ("str", "cordes_report.txt"),
    "solution": ("str", "solution.csv"),
    "study": ("str", "study.csv"),
    "matrix": ("str", "effective_matrix.txt"),
}
MANDATORY = ("dim", "family", "N")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dim: int
    family: str
    N: tuple
    command: Optional[str] = None
    setting: str = "periodic"
    params: dict = field(default_factory=dict)
    quad_order: int = 2
    solver: str = ITERATIVE
    tol: float = 1e-10
    max_iter: Optional[int] = None
    restart: int = 200
    f: Optional[str] = None
    F: Optional[str] = None
    N_fine: Optional[int] = None
    dump_matrix: bool = False
    report: str = "cordes_report.txt"
    solution: str = "solution.csv"
    study: str = "study.csv"
    matrix: str = "effective_matrix.txt"

    def solve_config(self) -> SolveConfig:
        return SolveConfig(method=self.solver, tol=self.tol, max_iter=self.max_iter, restart=self.restart)

    def with_command(self, command: str) -> "RunConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values["command"] = command
        cfg = RunConfig(**values)
        validate(cfg)
        return cfg


def _parse_value(kind: str, raw: str, key: str, lineno: int):
    def bad(expect):
        return ConfigError(f"line {lineno}: malformed value for {key}: {raw!r} (expected {expect})")

    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "int_list":
            vals = tuple(int(v) for v in raw.split(",") if v.strip())
            if not vals:
                raise ValueError
            return vals
        if kind == "float_list":
            vals = tuple(float(v) for v in raw.split(",") if v.strip())
            if not vals:
                raise ValueError
            return vals
    except ValueError:
        raise bad({"int": "an integer", "float": "a number"}.get(kind, "a comma-separated list")) from None
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise bad("true or false")
    if kind == "command":
        if raw not in COMMANDS:
            raise bad(" | ".join(COMMANDS))
        return raw
    if kind == "setting":
        if raw not in SETTINGS:
            raise bad(" | ".join(SETTINGS))
        return raw
    if kind == "family":
        if raw not in CLI_FAMILIES:
            raise bad(" | ".join(CLI_FAMILIES))
        return raw
    if kind == "solver":
        if raw not in (ITERATIVE, DIRECT):
            raise bad(f"{ITERATIVE} | {DIRECT}")
        return raw
    if kind == "source":
        if raw in ("manufactured", "zero"):
            return raw
        try:
            float(raw)
        except ValueError:
            raise bad("manufactured, zero or a number") from None
        return raw
    return raw


def _param_kind(key: str) -> str:
    if key in ("values", "profile"):
        return "float_list"
    if key == "split_axis":
        return "int"
    if key == "table":
        return "str"
    return "float"


def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    """Parse and validate a configuration; ``command`` overrides the file's."""
    values: dict = {}
    params: dict = {}
    seen: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped or (stripped.startswith("[") and stripped.endswith("]")):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        if key in GENERAL_KEYS:
            values[key] = _parse_value(GENERAL_KEYS[key][0], raw, key, lineno)
        elif key in ALL_PARAMS:
            params[key] = (_parse_value(_param_kind(key), raw, key, lineno), lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    for key in MANDATORY:
        if key not in values:
            raise ConfigError(f"missing key: {key}")
    family = values["family"]
    for key, (_, lineno) in params.items():
        if key not in FAMILY_PARAMS[family]:
            raise ConfigError(f"line {lineno}: key {key!r} does not apply to family {family}")
    if command is not None:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        values["command"] = command

    cfg = RunConfig(params={k: v for k, (v, _) in params.items()}, **values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.dim not in (2, 3):
        raise ConfigError(f"dim must be 2 or 3, got {cfg.dim}")
    if any(n < 2 for n in cfg.N):
        raise ConfigError("N must be at least 2")
    if cfg.command is not None and cfg.command != "study" and len(cfg.N) != 1:
        raise ConfigError(f"a list of N values is only allowed for the study command, not {cfg.command}")
    if cfg.quad_order < 1:
        raise ConfigError("quad_order must be >= 1")
    if cfg.setting == "dirichlet":
        if cfg.f is None and cfg.F is None:
            raise ConfigError("missing source: setting=dirichlet requires f or F")
        if cfg.f is not None and cfg.F is not None:
            raise ConfigError("inconsistent combination: give either f or F, not both")
        if cfg.command == "homogenize":
            raise ConfigError("inconsistent combination: homogenize requires setting=periodic")
        if "manufactured" in (cfg.f, cfg.F) and cfg.family not in ("constant_identity", "constant_matrix"):
            raise ConfigError("inconsistent combination: manufactured source requires a constant-coefficient family")
        if cfg.F is not None and cfg.F not in ("manufactured", "zero"):
            raise ConfigError("F must be 'manufactured' or 'zero'")
    elif cfg.f is not None or cfg.F is not None:
        raise ConfigError("inconsistent combination: sources f/F only apply to setting=dirichlet")

    p = cfg.params
    if cfg.family == "constant_matrix":
        for key in p:
            if int(key[-1]) > cfg.dim or (key.startswith("a") and int(key[1]) > cfg.dim):
                raise ConfigError(f"key {key!r} exceeds dimension {cfg.dim}")
    if cfg.family == "checkerboard":
        if "values" in p and len(p["values"]) != 2:
            raise ConfigError("checkerboard values must list exactly two numbers")
        if "split_axis" in p and not 1 <= p["split_axis"] <= cfg.dim:
            raise ConfigError(f"split_axis must lie in 1..{cfg.dim}")
    if cfg.family == "table" and "table" not in p:
        raise ConfigError("missing key: table (path of the coefficient CSV)")
    if cfg.family == "layered" and "profile" not in p:
        raise ConfigError("missing key: profile")

    align = {"checkerboard": 2, "layered": len(p.get("profile", ()))}.get(cfg.family)
    if align:
        for n in cfg.N:
            if n % align:
                if align == 2:
                    raise ConfigError("N must be even for grid-aligned discontinuities")
                raise ConfigError(f"N must be a multiple of {align} for grid-aligned discontinuities")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def emit_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        if f.name == "params":
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_format(value)}")
    for key in sorted(cfg.params):
        lines.append(f"{key} = {_format(cfg.params[key])}")
    return "\n".join(lines) + "\n"


def build_coefficients(cfg: RunConfig, base_dir=None) -> cf.CoefficientField:
    """Coefficient field (with Dirichlet source when configured) for a config."""
    p, n = cfg.params, cfg.dim
    if cfg.family == "constant_identity":
        A, b = np.eye(n), np.zeros(n)
        field_ = cf.constant_identity(n)
    elif cfg.family == "constant_matrix":
        A = np.eye(n)
        for i in range(n):
            for j in range(i, n):
                A[i, j] = A[j, i] = p.get(f"a{i + 1}{j + 1}", 1.0 if i == j else 0.0)
        b = np.array([p.get(f"b{i + 1}", 0.0) for i in range(n)])
        field_ = cf.constant_matrix(A, b)
    elif cfg.family == "checkerboard":
        field_ = cf.checkerboard(p.get("values", (1.0, 2.0)), n, p.get("split_axis"))
    elif cfg.family == "layered":
        field_ = cf.layered(p["profile"], n)
    elif cfg.family == "trig_drift":
        field_ = cf.trig_drift(p.get("alpha", 0.15), n)
    else:
        from pathlib import Path

        path = Path(p["table"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        field_ = cf.table(path, n)

    if cfg.setting != "dirichlet":
        return field_
    if "manufactured" in (cfg.f, cfg.F):
        return cf.manufactured_dirichlet(A, b, n, source="F" if cfg.F else "f")
    if cfg.F == "zero":
        return field_.with_source(f=lambda x: np.zeros(len(x)), F=lambda x: np.zeros((len(x), n)))
    value = float(cfg.f)
    return field_.with_source(f=lambda x: np.full(len(x), value))
