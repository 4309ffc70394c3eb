"""Scenario configuration files (TOML) and their validation.

Grammar: ``[section]`` headers, ``key = value`` pairs, arrays in brackets.
Every problem found is reported at once, each with the line it came from.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

KINDS = ("evolve", "trajectories", "pauli", "stern-gerlach", "measure", "hj-compare")
SAMPLING = {"trajectories", "pauli", "stern-gerlach", "measure", "hj-compare"}
POTENTIALS = ("free", "harmonic", "linear")
INITIAL = ("gaussian", "coherent", "ground", "superposition", "plane")

NUM = (int, float)
POS = "positive"
NONNEG = "nonnegative"
INT = "integer"


@dataclass(frozen=True)
class Key:
    types: tuple
    required: bool = False
    check: str | None = None
    choices: tuple | None = None
    length: int | None = None


SCHEMA: dict[str, dict[str, Key]] = {
    "scenario": {
        "kind": Key((str,), True, choices=KINDS),
        "name": Key((str,), True),
        "description": Key((str,)),
        "expect_exit": Key((int,)),
    },
    "grid": {
        "dims": Key((int,), check=POS),
        "points": Key((int, list), True),
        "extent": Key((int, float, list), True),
    },
    "physics": {
        "hbar": Key(NUM, check=POS),
        "mass": Key(NUM, check=POS),
        "potential": Key((str,), choices=POTENTIALS),
        "omega": Key(NUM, check=POS),
        "force": Key(NUM),
        "center": Key(NUM),
    },
    "initial": {
        "type": Key((str,), True, choices=INITIAL),
        "center": Key(NUM),
        "width": Key(NUM, check=POS),
        "momentum": Key(NUM),
        "amplitude": Key(NUM),
        "centers": Key((list,)),
        "momenta": Key((list,)),
        "weights": Key((list,)),
        "mode": Key((int,)),
        "spin": Key((list,), length=2),
        "spin_phase": Key(NUM),
    },
    "run": {
        "T": Key(NUM, check=POS),
        "dt": Key(NUM, check=POS),
        "n": Key((int,), check=POS),
        "seed": Key((int,), check=NONNEG),
        "substeps": Key((int,), check=POS),
        "stride": Key((int,), check=POS),
    },
    "output": {
        "stride": Key((int,), check=POS),
        "bins": Key((int,), check=POS),
        "max_trajectories": Key((int,), check=NONNEG),
        "fields": Key((bool,)),
    },
    "fields": {
        "B": Key((list,), length=3),
        "B_gradient": Key(NUM),
        "A": Key((list,), length=3),
        "V": Key(NUM),
        "mu": Key(NUM, check=POS),
        "charge": Key(NUM),
        "c": Key(NUM, check=POS),
        "mode": Key((str,), choices=("jump", "continuous")),
        "guidance": Key((str,), choices=("branch", "total")),
    },
    "measurement": {
        "coefficients": Key((list,), True),
        "centers": Key((list,), True),
        "width": Key(NUM, check=POS),
        "pointer_width": Key(NUM, check=POS),
        "eigenvalues": Key((list,)),
        "g": Key(NUM, True, check=NONNEG),
        "T": Key(NUM, True, check=POS),
        "steps": Key((int,), check=POS),
        "points": Key((list,), length=2),
        "extent": Key((list,), length=2),
        "overlap_tol": Key(NUM, check=POS),
        "drift_steps": Key((int,), check=POS),
        "drift_mass": Key(NUM, check=POS),
    },
    "hj": {
        "a0": Key(NUM, True),
        "b0": Key(NUM, True),
        "hbars": Key((list,)),
    },
    "assert": {
        "norm_drift": Key(NUM, check=POS),
        "energy_drift": Key(NUM, check=POS),
        "trajectory_oracle": Key(NUM, check=POS),
        "rigid": Key(NUM, check=POS),
        "tv": Key(NUM, check=POS),
        "expectation": Key((bool,)),
        "expectation_budget": Key(NUM, check=POS),
        "no_crossing": Key((bool,)),
        "precession": Key(NUM, check=POS),
        "spin_mean": Key((bool,)),
        "s3_constant": Key((bool,)),
        "up_fraction": Key((bool,)),
        "separation": Key(NUM, check=POS),
        "born": Key((bool,)),
        "projection": Key((bool,)),
        "fidelity": Key(NUM, check=POS),
        "drift_changed": Key(NUM, check=POS),
        "unclassified": Key(NUM, check=POS),
        "quadrature": Key(NUM, check=POS),
        "zeta_oracle": Key(NUM, check=POS),
        "zeta_tv": Key(NUM, check=POS),
        "residual": Key(NUM, check=POS),
        "hbar_exponent": Key(NUM, check=POS),
    },
}

REQUIRED_SECTIONS = {
    "evolve": ("grid", "initial", "run"),
    "trajectories": ("grid", "initial", "run"),
    "pauli": ("grid", "initial", "run", "fields"),
    "stern-gerlach": ("grid", "initial", "run", "fields"),
    "measure": ("measurement", "run"),
    "hj-compare": ("grid", "initial", "run", "hj"),
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    name: str
    sections: dict[str, dict[str, Any]]
    source: str | None = None
    lines: dict[tuple[str, str], int] = field(default_factory=dict, repr=False, compare=False)

    def section(self, name: str) -> dict[str, Any]:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def seed(self) -> int | None:
        return self.get("run", "seed")

    @property
    def assertions(self) -> dict[str, Any]:
        return self.section("assert")

    @property
    def expect_exit(self) -> int:
        return self.get("scenario", "expect_exit", 0)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        secs = {k: dict(v) for k, v in self.sections.items()}
        secs.setdefault("run", {})["seed"] = seed
        return ScenarioConfig(self.kind, self.name, secs, self.source, self.lines)


_HEADER = re.compile(r"^\s*\[\s*([A-Za-z0-9_\-]+)\s*\]")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def _line_index(text: str) -> tuple[dict[tuple[str, str], int], dict[str, int]]:
    keys, headers = {}, {}
    section = ""
    for i, line in enumerate(text.splitlines(), 1):
        m = _HEADER.match(line)
        if m:
            section = m.group(1)
            headers.setdefault(section, i)
            continue
        m = _KEY.match(line)
        if m:
            keys.setdefault((section, m.group(1)), i)
    return keys, headers


def _type_ok(value, types: tuple) -> bool:
    if isinstance(value, bool):
        return bool in types
    if isinstance(value, int) and float in types:
        return True
    return isinstance(value, types)


def _check_value(value, spec: Key) -> str | None:
    if not _type_ok(value, spec.types):
        names = "/".join(t.__name__ for t in spec.types)
        return f"expected {names}, got {type(value).__name__}"
    if spec.choices is not None and value not in spec.choices:
        return f"must be one of {', '.join(spec.choices)}"
    if spec.length is not None and isinstance(value, list) and len(value) != spec.length:
        return f"must have {spec.length} entries"
    items = value if isinstance(value, list) else [value]
    for v in items:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            if spec.check:
                return f"entries must be numbers"
            continue
        if not math.isfinite(v):
            return "must be finite"
        if spec.check == POS and not v > 0:
            return "must be positive"
        if spec.check == NONNEG and v < 0:
            return "must be nonnegative"
    if isinstance(value, list) and spec.types == (list,):
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return "entries must be numbers"
    return None


def parse_config(text: str, source: str | None = None) -> ScenarioConfig:
    """Parse scenario TOML, collecting every error before raising :class:`ConfigError`."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError([f"line {getattr(err, 'lineno', '?')}: {err}"]) from None
    keys, headers = _line_index(text)
    errors: list[tuple[int, str]] = []

    def where(section, key=None):
        return keys.get((section, key), headers.get(section, 0)) if key else headers.get(section, 0)

    for sec, body in data.items():
        if sec not in SCHEMA:
            errors.append((where(sec), f"unknown section [{sec}]"))
            continue
        if not isinstance(body, dict):
            errors.append((keys.get(("", sec), 0), f"{sec} must be a section"))
            continue
        for key, value in body.items():
            spec = SCHEMA[sec].get(key)
            if spec is None:
                errors.append((where(sec, key), f"unknown key {sec}.{key}"))
                continue
            msg = _check_value(value, spec)
            if msg:
                errors.append((where(sec, key), f"{sec}.{key} {msg}"))

    kind = data.get("scenario", {}).get("kind") if isinstance(data.get("scenario"), dict) else None
    needed = ["scenario"] + list(REQUIRED_SECTIONS.get(kind, ()))
    for sec in needed:
        if sec not in data:
            errors.append((0, f"missing section [{sec}]"))
            continue
        for key, spec in SCHEMA[sec].items():
            if spec.required and key not in data[sec]:
                errors.append((where(sec), f"missing required key {sec}.{key}"))
    run = data.get("run", {}) if isinstance(data.get("run"), dict) else {}
    if kind in KINDS and kind != "measure":
        for key in ("T", "dt"):
            if key not in run:
                errors.append((where("run"), f"missing required key run.{key}"))
    if kind in SAMPLING:
        for key in ("seed", "n"):
            if key not in run:
                errors.append((where("run"), f"missing required key run.{key} (needed for sampling)"))
    errors.extend(_semantic_errors(data, kind, where))

    if errors:
        errors.sort(key=lambda e: e[0])
        raise ConfigError([f"line {ln}: {msg}" if ln else msg for ln, msg in errors])
    return ScenarioConfig(kind, data["scenario"]["name"], data, source, keys)


def _semantic_errors(data: dict, kind: str | None, where) -> list[tuple[int, str]]:
    errs = []
    run = data.get("run", {})
    T, dt = run.get("T"), run.get("dt")
    if _num(T) and _num(dt) and T > 0 and dt > 0:
        k = T / dt
        if abs(k - round(k)) > 1e-8 * max(1.0, k):
            errs.append((where("run", "dt"), f"run.T = {T} is not an integer multiple of run.dt = {dt}"))
        stride = run.get("stride", 1)
        if isinstance(stride, int) and stride > 0 and round(k) % stride:
            errs.append((where("run", "stride"), f"run.stride {stride} does not divide the {round(k)} steps"))
    grid = data.get("grid", {})
    dims = grid.get("dims", 1)
    if kind in ("pauli", "stern-gerlach", "hj-compare") and dims != 1:
        errs.append((where("grid", "dims"), f"{kind} scenarios need grid.dims = 1"))
    ini = data.get("initial", {})
    if kind in ("pauli", "stern-gerlach") and "spin" not in ini:
        errs.append((where("initial"), "missing required key initial.spin for a spinor scenario"))
    if ini.get("type") == "superposition" and "centers" not in ini:
        errs.append((where("initial", "type"), "superposition needs initial.centers"))
    pot = data.get("physics", {}).get("potential", "free")
    if pot == "harmonic" and "omega" not in data.get("physics", {}):
        errs.append((where("physics", "potential"), "harmonic potential needs physics.omega"))
    if kind == "stern-gerlach" and "B_gradient" not in data.get("fields", {}):
        errs.append((where("fields"), "stern-gerlach needs fields.B_gradient"))
    meas = data.get("measurement", {})
    if meas:
        c, x = meas.get("coefficients"), meas.get("centers")
        if isinstance(c, list) and all(_num(v) for v in c):
            total = math.fsum(v * v for v in c)
            if abs(total - 1) > 1e-10:
                errs.append((where("measurement", "coefficients"), f"squared coefficients sum to {total!r}, not 1"))
            if isinstance(x, list) and len(x) != len(c):
                errs.append((where("measurement", "centers"), "need one centre per coefficient"))
    return errs


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError([f"cannot read {path}: {err.strerror}"]) from None
    return parse_config(text, str(path))


def scenario_dir() -> Path:
    return Path(__file__).with_name("scenarios")


def shipped_scenarios(include_negative: bool = False) -> dict[str, Path]:
    """Scenario name -> file.  Negative controls live under ``negative/``."""
    root = scenario_dir()
    files = sorted(root.glob("*.toml"))
    if include_negative:
        files += sorted((root / "negative").glob("*.toml"))
    out = {}
    for f in files:
        data = tomllib.loads(f.read_text())
        out[data["scenario"]["name"]] = f
    return out
