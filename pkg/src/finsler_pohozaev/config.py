"""Run configuration: versioned INI files parsed with configparser.

Every section has a closed set of keys; anything else is an error, as is
a missing section that the chosen experiment needs.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigParseError

VERSION = 1

EXPERIMENTS = (
    "check-hypotheses",
    "verify-identity",
    "convergence-study",
    "solve",
    "nonexistence-scan",
    "critical-exponent",
    "wholespace",
)

KEYS = {
    "run": {"version", "experiment", "resolutions", "seed", "dimension"},
    "anisotropy": {"kind", "matrix", "q", "eps", "dim"},
    "profile": {"kind", "p", "kappa"},
    "domain": {"kind", "radius", "a", "b", "a0", "cos", "sin", "theta_factor"},
    "source": {"kind", "value", "m", "lam", "offset"},
    "field": {"kind", "coefficients", "center", "radius", "power", "amplitude"},
    "solver": {
        "max_iterations",
        "gradient_tolerance",
        "decrement_tolerance",
        "kappa0",
        "kappa_factor",
        "kappa_min",
        "stage_iterations",
        "backtrack",
        "armijo",
    },
    "thresholds": {
        "residual_rel",
        "min_order",
        "hypothesis_error",
        "linf",
        "solver_ratio",
        "specialization_gap",
        "reduction_gap",
        "stress_variation",
        "expect_condition",
    },
    "wholespace": {"radii"},
    "output": {"field_csv"},
}

REQUIRED = {
    "check-hypotheses": {"anisotropy", "profile"},
    "verify-identity": {"anisotropy", "profile", "domain", "source", "field"},
    "convergence-study": {"anisotropy", "profile", "domain", "source", "field"},
    "solve": {"anisotropy", "profile", "domain", "source"},
    "nonexistence-scan": {"anisotropy", "profile", "domain", "source"},
    "critical-exponent": {"profile"},
    "wholespace": {"anisotropy", "profile", "domain", "field"},
}

LIST_KEYS = {"matrix", "cos", "sin", "coefficients", "center", "radii", "resolutions"}


def _value(key, raw):
    if key in LIST_KEYS:
        parts = [v.strip() for v in raw.replace(";", ",").split(",")]
        return [v for v in parts if v]
    return raw.strip()


@dataclass
class RunConfig:
    experiment: str
    resolutions: list
    seed: int = 0
    dimension: int = 2
    sections: dict = field(default_factory=dict)
    source_path: str | None = None

    def section(self, name) -> dict:
        return dict(self.sections.get(name, {}))

    def threshold(self, key, default):
        raw = self.sections.get("thresholds", {}).get(key)
        if raw is None:
            return default
        if isinstance(default, bool):
            return _bool(raw, key)
        return type(default)(raw)

    def as_dict(self):
        return {
            "version": VERSION,
            "experiment": self.experiment,
            "resolutions": list(self.resolutions),
            "seed": self.seed,
            "dimension": self.dimension,
            "sections": {k: dict(v) for k, v in sorted(self.sections.items())},
        }


def _bool(raw, key):
    v = str(raw).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigParseError(f"{key}: expected a boolean, got {raw!r}")


def parse_text(text: str, source_path=None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source_path or "<config>")
    except configparser.Error as exc:
        raise ConfigParseError(str(exc)) from exc
    sections = {}
    for name in cp.sections():
        if name not in KEYS:
            raise ConfigParseError(f"unknown section [{name}]")
        unknown = set(cp[name]) - KEYS[name]
        if unknown:
            raise ConfigParseError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
        sections[name] = {k: _value(k, v) for k, v in cp[name].items()}
    run = sections.pop("run", None)
    if run is None:
        raise ConfigParseError("missing [run] section")
    if "version" not in run:
        raise ConfigParseError("[run] needs an explicit version")
    if run["version"] != str(VERSION):
        raise ConfigParseError(f"unsupported config version {run['version']!r} (expected {VERSION})")
    exp = run.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigParseError(f"[run] experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    missing = REQUIRED[exp] - set(sections)
    if missing:
        raise ConfigParseError(f"experiment {exp} needs section(s): {', '.join(sorted(missing))}")
    try:
        resolutions = [int(v) for v in run.get("resolutions", ["64"])]
        seed = int(run.get("seed", "0"))
        dimension = int(run.get("dimension", "2"))
    except ValueError as exc:
        raise ConfigParseError(f"[run]: {exc}") from exc
    if not resolutions or any(n < 8 for n in resolutions):
        raise ConfigParseError("resolutions must be integers >= 8")
    if exp == "convergence-study" and len(resolutions) < 2:
        raise ConfigParseError("convergence-study needs at least two resolutions")
    return RunConfig(exp, resolutions, seed, dimension, sections, source_path)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, str(path))
