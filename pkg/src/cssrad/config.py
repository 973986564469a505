"""Strict TOML configuration for the command-line driver.

Unknown keys are errors and every violation is reported, not just the first.
A minimal document may be empty; all values have defaults except the density
file of ``gauge-table`` and the run directory of ``hierarchy-check``.
"""

import json
import math
import sys
from dataclasses import asdict, dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FOCUSING_TAG = "focusing (g ≥ 1)"
COMMANDS = ("simulate", "hierarchy-check", "estimates", "boardgame", "gauge-table", "converge")
CONVERGE_TARGETS = ("free_gaussian", "solver", "scaling", "hierarchy", "duhamel")


class ConfigError(ValueError):
    """Carries the full list of problems found in a configuration."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


# (kind, default, predicate, requirement text). The text completes "<key> must be ...".
_F = "float"
_I = "int"
_S = "str"
_B = "bool"
_L = "list"

SCHEMA = {
    "simulate": {
        "n": (_I, 1024, lambda v: v >= 16, "an integer >= 16"),
        "r_max": (_F, 16.0, lambda v: v > 0, "positive"),
        "dt": (_F, 1e-3, lambda v: v > 0, "positive"),
        "t_end": (_F, 1.0, lambda v: v >= 0, "non-negative"),
        "g": (_F, -1.0, lambda v: True, "finite"),
        "record_every": (_I, 100, lambda v: v >= 1, "an integer >= 1"),
        "boundary_mass_tol": (_F, 1e-10, lambda v: v > 0, "positive"),
        "growth_tol": (_F, 0.01, lambda v: v > 0, "positive"),
    },
    "hierarchy": {
        "run_dir": (_S, "", lambda v: True, "a path"),
        "k": (_I, 1, lambda v: v in (1, 2), "1 or 2"),
        "levels": (_I, 3, lambda v: v >= 2, "an integer >= 2"),
        "n": (_I, 32, lambda v: v >= 16, "an integer >= 16"),
        "r_max": (_F, 8.0, lambda v: v > 0, "positive"),
        "dt": (_F, 4e-3, lambda v: v > 0, "positive"),
        "t_end": (_F, 0.1, lambda v: v > 0, "positive"),
        "stride": (_I, 1, lambda v: v >= 1 and v % 2 == 1, "an odd integer >= 1"),
    },
    "estimates": {
        "select": (_L, [], lambda v: all(isinstance(x, str) for x in v), "a list of estimate id prefixes"),
        "count": (_I, 100, lambda v: v >= 1, "an integer >= 1"),
        "n": (_I, 512, lambda v: v >= 16, "an integer >= 16"),
        "r_max": (_F, 16.0, lambda v: v > 0, "positive"),
        "s": (_F, 2.0 / 3.0, lambda v: 0 < v <= 2.0 / 3.0, "in (0, 2/3]"),
        "t0": (_F, 1.0, lambda v: v > 0, "positive"),
        "time_samples": (_I, 64, lambda v: v >= 64, "an integer >= 64"),
        "q": (_L, [2, 3], lambda v: len(v) > 0 and all(_num(x) and 1 < x < math.inf for x in v),
              "a non-empty list of exponents in (1, inf)"),
        "refine": (_B, True, lambda v: True, "a boolean"),
    },
    "boardgame": {
        "depth": (_I, 8, lambda v: 1 <= v <= 10, "an integer in [1, 10]"),
        "list_maps_up_to": (_I, 4, lambda v: 0 <= v <= 10, "an integer in [0, 10]"),
    },
    "gauge_table": {
        "density": (_S, "", lambda v: True, "a path to a CSV of r, rho"),
    },
    "converge": {
        "target": (_S, "free_gaussian", lambda v: v in CONVERGE_TARGETS, f"one of {', '.join(CONVERGE_TARGETS)}"),
        "levels": (_I, 3, lambda v: v >= 2, "an integer >= 2"),
        "k": (_I, 1, lambda v: v in (1, 2), "1 or 2"),
        "lam": (_F, 2.0, lambda v: v > 0, "positive"),
    },
}

PRESET_KEYS = {
    "gaussian": {"width": 1.0, "amplitude": 1.0},
    "ring": {"center": 2.0, "width": 0.5, "amplitude": 1.0},
    "indicator": {"radius": 1.0},
}
TOP_LEVEL = {"seed": (_I, 0, lambda v: v >= 0, "a non-negative integer"),
             "out": (_S, "cssrad-out", lambda v: len(v) > 0, "a non-empty path")}


@dataclass
class RunConfig:
    command: str = None
    seed: int = 0
    out: str = "cssrad-out"
    simulate: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    hierarchy: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    boardgame: dict = field(default_factory=dict)
    gauge_table: dict = field(default_factory=dict)
    converge: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def tags(self):
        return [FOCUSING_TAG] if self.simulate.get("g", -1.0) >= 1 else []


def _coerce(kind, v):
    if kind == _F and _num(v):
        return float(v)
    if kind == _I and _int(v):
        return v
    if kind == _S and isinstance(v, str):
        return v
    if kind == _B and isinstance(v, bool):
        return v
    if kind == _L and isinstance(v, list):
        return list(v)
    raise TypeError


_KIND_NAMES = {_F: "a number", _I: "an integer", _S: "a string", _B: "a boolean", _L: "a list"}


def _check_block(name, spec, given, errors):
    out = {}
    for key in given:
        if key not in spec:
            errors.append(f"{name}.{key}: unknown key (allowed: {', '.join(sorted(spec))})")
    for key, (kind, default, ok, need) in spec.items():
        # invalid values fall back to the default so every error gets collected
        out[key] = list(default) if isinstance(default, list) else default
        if key not in given:
            continue
        raw = given[key]
        try:
            v = _coerce(kind, raw)
        except TypeError:
            errors.append(f"{name}.{key}: {key} must be {_KIND_NAMES[kind]}, got {raw!r}")
            continue
        if kind == _F and not math.isfinite(v):
            errors.append(f"{name}.{key}: {key} must be finite, got {raw!r}")
            continue
        if not ok(v):
            errors.append(f"{name}.{key}: {key} must be {need}, got {raw!r}")
            continue
        out[key] = v
    return out


def _check_initial(given, errors):
    if not isinstance(given, dict):
        errors.append("simulate.initial: must be a table with a 'preset' key")
        return {"preset": "gaussian", **PRESET_KEYS["gaussian"]}
    preset = given.get("preset", "gaussian")
    if preset not in PRESET_KEYS:
        errors.append(f"simulate.initial.preset: preset must be one of {', '.join(PRESET_KEYS)}, got {preset!r}")
        return {"preset": "gaussian", **PRESET_KEYS["gaussian"]}
    spec = {k: (_F, d, (lambda v: v > 0) if k != "center" else (lambda v: v >= 0),
                "positive" if k != "center" else "non-negative") for k, d in PRESET_KEYS[preset].items()}
    body = {k: v for k, v in given.items() if k != "preset"}
    vals = _check_block(f"simulate.initial[{preset}]", spec, body, errors)
    return {"preset": preset, **vals}


_SECTION_ATTR = {"gauge-table": "gauge_table", "gauge_table": "gauge_table"}


def parse_config(text, command=None):
    """Validate a TOML document; raises :class:`ConfigError` listing all problems."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    return from_dict(doc, command)


def from_dict(doc, command=None):
    errors = []
    if command is not None and command not in COMMANDS:
        errors.append(f"command must be one of {', '.join(COMMANDS)}, got {command!r}")
    cfg = RunConfig(command=command)
    top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in doc.items() if isinstance(v, dict)}
    vals = _check_block("<top>", TOP_LEVEL, top, errors)
    cfg.seed, cfg.out = vals["seed"], vals["out"]
    for name in tables:
        attr = _SECTION_ATTR.get(name, name)
        if attr not in SCHEMA:
            errors.append(f"{name}: unknown section (allowed: {', '.join(sorted(SCHEMA))})")
    for name, spec in SCHEMA.items():
        given = dict(tables.get(name, tables.get(name.replace("_", "-"), {})))
        if name == "simulate":
            cfg.initial = _check_initial(given.pop("initial", {"preset": "gaussian"}), errors)
        setattr(cfg, name, _check_block(name, spec, given, errors))
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path, command=None):
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return parse_config(text, command)


# --------------------------------------------------------------------------
# run summaries


@dataclass
class RunSummary:
    command: str
    version: str
    config: dict
    warnings: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))
