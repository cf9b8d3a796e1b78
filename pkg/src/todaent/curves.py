"""Entropy curves: sampled times, values, and provenance tags.

Both the quantum and the classical pipelines produce these; the analysis
module consumes them.  A curve's tag records which construction produced
it (quantum at some hbar, or classical at some cell area delta with its
ensemble size and seed), so emitted files are self-describing.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigurationError

KIND_QUANTUM = "quantum"
KIND_CLASSICAL = "classical"


@dataclass(frozen=True)
class CurveTag:
    """Provenance of an entropy curve."""

    kind: str
    preset: str = "custom"
    hbar: float | None = None   # quantum hbar, or the sampling width of the ensemble
    delta: float | None = None  # classical cell area
    m_points: int | None = None
    seed: int | None = None
    dt: float | None = None

    def __post_init__(self):
        if self.kind not in (KIND_QUANTUM, KIND_CLASSICAL):
            raise ConfigurationError(f"unknown curve kind {self.kind!r}")

    def items(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                yield f.name, v


@dataclass(frozen=True)
class EntropyCurve:
    """Entropy samples S(t_i) with ascending times and provenance tag."""

    times: np.ndarray
    values: np.ndarray
    tag: CurveTag
    particle: int = 1

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or times.shape != values.shape:
            raise ConfigurationError("times and values must be 1-d arrays of equal length")
        if len(times) == 0:
            raise ConfigurationError("an entropy curve needs at least one sample")
        if np.any(np.diff(times) <= 0.0):
            raise ConfigurationError("curve times must be strictly ascending")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ConfigurationError("entropy values must be finite and non-negative")
        if self.particle not in (1, 2):
            raise ConfigurationError(f"particle index must be 1 or 2, got {self.particle}")
        times.setflags(write=False)
        values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def window(self, t_lo: float, t_hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Samples with t_lo <= t <= t_hi."""
        m = (self.times >= t_lo) & (self.times <= t_hi)
        return self.times[m], self.values[m]

    def interp(self, times) -> np.ndarray:
        """Linear interpolation onto the given times (must lie inside the span)."""
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < self.t_min - 1e-12 or times.max() > self.t_max + 1e-12):
            raise ConfigurationError("interpolation times outside the curve's span")
        return np.interp(times, self.times, self.values)
