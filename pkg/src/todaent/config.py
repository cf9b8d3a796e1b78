"""Experiment configuration: presets, defaults, and flat-text round-trip.

The config format is diff-friendly ``key = value`` text under
``[section]`` headers.  Serialization writes every field, so emitted
manifests are self-describing; parsing is strict (unknown keys are
errors) and reproduces the config exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace

from .dynamics import ModelParams, PhaseState, SectionSpec
from .errors import ConfigurationError

PRESET_NAMES = ("regular", "chaotic", "custom")

#: Mass of particle 2 in the chaotic preset; motion at E = 7 is then
#: predominantly chaotic.
CHAOTIC_M2 = 0.54


def preset_model(preset: str, energy: float = 7.0) -> ModelParams:
    if preset == "regular":
        return ModelParams(m1=1.0, m2=1.0, energy=energy)
    if preset == "chaotic":
        return ModelParams(m1=1.0, m2=CHAOTIC_M2, energy=energy)
    raise ConfigurationError(f"no model preset named {preset!r}")


def preset_center(preset: str, params: ModelParams) -> PhaseState:
    """Initial wavepacket/ensemble center for a preset.

    Regular: q = 0, p1 = p2 = sqrt(E).  Chaotic: q = 0, p1 = sqrt(E),
    p2 = -sqrt(m2 E); the latter lies inside the chaotic sea.
    """
    root_e = math.sqrt(params.energy)
    if preset == "regular":
        return PhaseState(0.0, 0.0, root_e, root_e)
    if preset == "chaotic":
        return PhaseState(0.0, 0.0, root_e, -math.sqrt(params.m2 * params.energy))
    raise ConfigurationError(f"no center preset named {preset!r}")


_SECTIONS: dict[str, tuple[str, ...]] = {
    "experiment": ("preset", "seed", "output_dir", "cache_dir", "workers"),
    "model": ("m1", "m2", "energy",
              "center_q1", "center_q2", "center_p1", "center_p2"),
    "quantum": ("hbar_schedule", "omega", "n_max", "n_sum_max", "deficit_tol"),
    "classical": ("delta_schedule", "m_points", "dt", "drift_tol",
                  "pair_with_hbar", "extra_seed_check"),
    "grid": ("t_max", "n_intervals"),
    "poincare": ("poincare_orbits", "poincare_crossings", "poincare_dt",
                 "section_pin", "section_value", "section_direction", "section_plot"),
    "analysis": ("tail_fraction", "rise_fraction"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs, with desk-scale defaults."""

    preset: str = "regular"
    seed: int = 20260810
    output_dir: str = "artifacts"
    cache_dir: str = "spectral-cache"
    workers: int = 1

    # model; filled from the preset unless preset == "custom"
    m1: float = 1.0
    m2: float = 1.0
    energy: float = 7.0
    center_q1: float = 0.0
    center_q2: float = 0.0
    center_p1: float = math.sqrt(7.0)
    center_p2: float = math.sqrt(7.0)

    # quantum sweep
    hbar_schedule: tuple[float, ...] = (0.5, 0.25, 0.125)
    omega: float = 1.0
    n_max: int | None = None           # None: size automatically per hbar
    n_sum_max: int | None = None
    deficit_tol: float = 1e-8

    # classical sweep
    delta_schedule: tuple[float, ...] = (0.32, 0.16, 0.08, 0.04, 0.02)
    m_points: int = 100_000
    dt: float = 1e-3
    drift_tol: float = 1e-8
    pair_with_hbar: bool = True        # add classical cells at delta = hbar
    extra_seed_check: bool = False     # re-run the smallest delta with seed+1

    # shared time grid: samples at k * t_max / n_intervals, k = 0..n_intervals
    t_max: float = 100.0
    n_intervals: int = 400

    # surface of section
    poincare_orbits: int = 20
    poincare_crossings: int = 300
    poincare_dt: float = 1e-3
    section_pin: str = "q2"
    section_value: float = 0.0
    section_direction: int = 1
    section_plot: tuple[str, str] = ("q1", "p1")

    # analysis conventions
    tail_fraction: float = 0.2
    rise_fraction: float = 0.95

    def __post_init__(self):
        if self.preset not in PRESET_NAMES:
            raise ConfigurationError(f"preset must be one of {PRESET_NAMES}, got {self.preset!r}")
        for name in ("hbar_schedule", "delta_schedule"):
            sched = getattr(self, name)
            if any(not v > 0.0 for v in sched):
                raise ConfigurationError(f"{name} entries must be positive, got {sched}")
        if len(self.delta_schedule) == 0:
            raise ConfigurationError("delta_schedule must not be empty")
        if not self.t_max > 0.0:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")
        if self.n_intervals < 1:
            raise ConfigurationError(f"n_intervals must be >= 1, got {self.n_intervals}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        for name in ("m_points",):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        for name in ("dt", "poincare_dt", "drift_tol", "deficit_tol"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"{name} must be positive")
        # constructing these validates their fields
        self.section()
        self.model()

    def model(self) -> ModelParams:
        if self.preset == "custom":
            return ModelParams(self.m1, self.m2, self.energy)
        return preset_model(self.preset, self.energy)

    def center(self) -> PhaseState:
        if self.preset == "custom":
            return PhaseState(self.center_q1, self.center_q2,
                              self.center_p1, self.center_p2)
        return preset_center(self.preset, self.model())

    def section(self) -> SectionSpec:
        return SectionSpec(pin=self.section_pin, value=self.section_value,
                           direction=self.section_direction, plot=self.section_plot)

    def times(self):
        import numpy as np
        step = self.t_max / self.n_intervals
        return np.arange(self.n_intervals + 1) * step

    def classical_deltas(self) -> tuple[float, ...]:
        """Delta schedule, plus paired cells at delta = hbar when enabled."""
        deltas = list(self.delta_schedule)
        if self.pair_with_hbar:
            for h in self.hbar_schedule:
                if h not in deltas:
                    deltas.append(h)
        return tuple(sorted(set(deltas), reverse=True))

    def kind(self) -> str:
        """Regular or chaotic, for analysis model selection."""
        if self.preset in ("regular", "chaotic"):
            return self.preset
        return "regular" if self.m1 == self.m2 else "chaotic"


def _render_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(_render_value(x) for x in v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = ["# todaent experiment config v1"]
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_render_value(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}

_FLOAT_TUPLES = {"hbar_schedule", "delta_schedule"}
_STR_TUPLES = {"section_plot"}
_INTS = {"seed", "workers", "n_intervals", "m_points", "poincare_orbits",
         "poincare_crossings", "section_direction"}
_OPTIONAL_INTS = {"n_max", "n_sum_max"}
_BOOLS = {"pair_with_hbar", "extra_seed_check"}
_STRS = {"preset", "output_dir", "cache_dir", "section_pin"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _FLOAT_TUPLES:
        return tuple(float(p) for p in raw.split()) if raw else ()
    if key in _STR_TUPLES:
        parts = tuple(raw.split())
        return parts
    if key in _OPTIONAL_INTS:
        return None if raw == "none" else int(raw)
    if key in _INTS:
        return int(raw)
    if key in _BOOLS:
        if raw not in ("true", "false"):
            raise ConfigurationError(f"{key} must be true or false, got {raw!r}")
        return raw == "true"
    if key in _STRS:
        return raw
    return float(raw)


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse config text; unknown sections or keys are errors."""
    known = {k for keys in _SECTIONS.values() for k in keys}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            if section not in _SECTIONS:
                raise ConfigurationError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    if overrides:
        values.update(overrides)
    return ExperimentConfig(**values)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


def apply_preset_fields(cfg: ExperimentConfig) -> ExperimentConfig:
    """Normalize the model/center fields to the preset's effective values."""
    if cfg.preset == "custom":
        return cfg
    model = cfg.model()
    center = cfg.center()
    return replace(cfg, m1=model.m1, m2=model.m2, energy=model.energy,
                   center_q1=center.q1, center_q2=center.q2,
                   center_p1=center.p1, center_p2=center.p2)
