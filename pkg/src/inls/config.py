"""INI run configurations and the bundled presets.

Sections: ``[model]``, ``[grid]``, ``[time]``, ``[initial]``, ``[diagnostics]``,
``[ground_state]`` and ``[verify]``. Every section is optional; missing keys
take the defaults below.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dc_field
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError
from .grid import GridSpec, make_grid
from .model import ModelParams

DEFAULTS = {
    "model": {"N": "3", "p": "2.5", "b": "0.5", "validation": "false"},
    "grid": {"points": "64", "half_width": "12", "offset": "true"},
    "time": {"dt": "1e-3", "T": "1", "log_every": "10"},
    "initial": {"kind": "gaussian", "amplitude": "1", "width": "1", "center": "",
                "velocity": "", "focus_time": "0", "scale": "0.9", "k_cut": "",
                "seed": "0"},
    "diagnostics": {"radii": "", "virial_R": "", "virial_fd": "false", "blowup_factor": "50",
                    "wrap_tol": "1e-8", "coercivity_R": "", "coercivity_A": "inf",
                    "horizons": ""},
    "ground_state": {"tol": "1e-8", "r_max": "30", "step": "0.001953125", "r0": "1e-6"},
    "verify": {"suites": ""},
}

INITIAL_KINDS = ("gaussian", "offset_gaussian", "boosted_gaussian", "scaled_ground_state",
                 "random")


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.replace(";", ",").split(","))


def _opt_float(text: str):
    text = text.strip().lower()
    if text in ("", "none", "off"):
        return None
    return float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    name: str
    params: ModelParams
    grid: GridSpec
    dt: float
    T: float
    log_every: int
    initial: dict
    diagnostics: dict
    ground_state: dict
    verify: dict
    raw: dict = dc_field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.initial["seed"])


def preset_names() -> list[str]:
    pkg = resources.files("inls") / "presets"
    return sorted(p.name[:-4] for p in pkg.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    path = resources.files("inls") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text()


def load_config(path=None, preset: str | None = None, seed: int | None = None,
                overrides: dict | None = None) -> RunConfig:
    """Parse a preset and/or a config file (the file wins on shared keys)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    name = "custom"
    if preset:
        cp.read_string(preset_text(preset), source=preset)
        name = preset
    if path:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} not found")
        cp.read(path)
        name = path.stem if not preset else name
    for section, values in (overrides or {}).items():
        if not cp.has_section(section):
            cp.add_section(section)
        for k, v in values.items():
            cp.set(section, k, str(v))
    if seed is not None:
        cp.set("initial", "seed", str(int(seed)))
    raw = {s: dict(cp.items(s)) for s in cp.sections()}
    return _build(name, raw)


def _build(name: str, raw: dict) -> RunConfig:
    m = raw["model"]
    params = ModelParams(int(m["N"]), float(m["p"]), float(m["b"]), _bool(m["validation"]))
    g = raw["grid"]
    grid = make_grid(params.N, int(g["points"]), float(g["half_width"]), _bool(g["offset"]))
    t = raw["time"]
    dt, T = float(t["dt"]), float(t["T"])
    init = dict(raw["initial"])
    if init["kind"] not in INITIAL_KINDS:
        raise ConfigurationError(
            f"unknown initial kind {init['kind']!r}; choose from {', '.join(INITIAL_KINDS)}")
    initial = {
        "kind": init["kind"], "amplitude": float(init["amplitude"]),
        "width": float(init["width"]), "center": _floats(init["center"]) or None,
        "velocity": _floats(init["velocity"]) or None,
        "focus_time": float(init["focus_time"]), "scale": float(init["scale"]),
        "k_cut": _opt_float(init["k_cut"]), "seed": int(init["seed"]),
    }
    d = raw["diagnostics"]
    diagnostics = {
        "radii": _floats(d["radii"]), "virial_R": _opt_float(d["virial_R"]),
        "virial_fd": _bool(d["virial_fd"]), "blowup_factor": float(d["blowup_factor"]),
        "wrap_tol": _opt_float(d["wrap_tol"]), "coercivity_R": _floats(d["coercivity_R"]),
        "coercivity_A": float(d["coercivity_A"]), "horizons": _floats(d["horizons"]),
    }
    gs = raw["ground_state"]
    ground_state = {"tol": float(gs["tol"]), "r_max": float(gs["r_max"]),
                    "h": float(gs["step"]), "r0": float(gs["r0"])}
    verify = {"suites": [s.strip() for s in raw["verify"]["suites"].split(",") if s.strip()]}
    for key, val in raw["verify"].items():
        if key != "suites" and "." in key:
            suite, opt = key.split(".", 1)
            verify.setdefault("options", {}).setdefault(suite, {})[opt] = _parse_value(val)
    if not (dt > 0 and T > 0) or not math.isclose(round(T / dt) * dt, T, rel_tol=1e-9):
        raise ConfigurationError(f"T={T} must be a positive multiple of dt={dt}")
    return RunConfig(name, params, grid, dt, T, max(1, int(t["log_every"])), initial,
                     diagnostics, ground_state, verify, raw)


def _parse_value(text: str):
    t = text.strip()
    if "," in t:
        return tuple(_parse_value(x) for x in t.split(","))
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    if t.lower() == "none":
        return None
    return t
