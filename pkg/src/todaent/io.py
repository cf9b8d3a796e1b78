"""Plain-text artifact files: entropy-curve tables and section tables.

All tables are whitespace-delimited with ``#`` header lines, directly
consumable by standard plotting tools.  Floats are written with repr,
which round-trips exactly, so identical data produces identical bytes
and re-reading a file is lossless.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np

from .curves import CurveTag, EntropyCurve
from .dynamics import SectionResult
from .errors import ConfigurationError


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def render_curve_table(curve1: EntropyCurve, curve2: EntropyCurve,
                       extra_header: dict | None = None) -> str:
    """Two-particle entropy table: ``t  S_particle1  S_particle2``."""
    if curve1.tag != curve2.tag:
        raise ConfigurationError("paired curves must share one tag")
    if not np.array_equal(curve1.times, curve2.times):
        raise ConfigurationError("paired curves must share one time grid")
    lines = ["# todaent entropy curve v1"]
    for key, val in curve1.tag.items():
        lines.append(f"# {key} = {fmt(val)}")
    for key, val in (extra_header or {}).items():
        lines.append(f"# {key} = {fmt(val)}")
    lines.append("# columns: t S_particle1 S_particle2")
    for t, s1, s2 in zip(curve1.times, curve1.values, curve2.values):
        lines.append(f"{fmt(t)} {fmt(s1)} {fmt(s2)}")
    return "\n".join(lines) + "\n"


def write_curve_file(path: Path, curve1: EntropyCurve, curve2: EntropyCurve,
                     extra_header: dict | None = None) -> None:
    atomic_write_text(path, render_curve_table(curve1, curve2, extra_header))


_TAG_FIELD_TYPES = {
    "kind": str, "preset": str, "hbar": float, "delta": float,
    "m_points": int, "seed": int, "dt": float,
}


def read_curve_file(path: Path) -> tuple[EntropyCurve, EntropyCurve, dict]:
    """Parse a curve table back into its two curves plus all header keys."""
    header: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ConfigurationError(f"malformed row in {path}: {line!r}")
            rows.append([float(p) for p in parts])
    if not rows:
        raise ConfigurationError(f"no data rows in {path}")
    data = np.array(rows)
    tag_kwargs = {}
    for name, typ in _TAG_FIELD_TYPES.items():
        if name in header:
            tag_kwargs[name] = typ(header[name])
    tag = CurveTag(**tag_kwargs)
    c1 = EntropyCurve(data[:, 0], data[:, 1], tag, particle=1)
    c2 = EntropyCurve(data[:, 0].copy(), data[:, 2], tag, particle=2)
    return c1, c2, header


def render_poincare_table(result: SectionResult,
                          extra_header: dict | None = None) -> str:
    """Section table: one crossing per row, ``orbit_index t_crossing x y``."""
    spec = result.spec
    lines = ["# todaent poincare section v1",
             f"# pin = {spec.pin}",
             f"# value = {fmt(spec.value)}",
             f"# direction = {spec.direction}",
             f"# plot = {spec.plot[0]} {spec.plot[1]}",
             f"# m1 = {fmt(result.params.m1)}",
             f"# m2 = {fmt(result.params.m2)}",
             f"# energy = {fmt(result.params.energy)}",
             f"# orbits = {len(result.orbits)}",
             f"# warnings = {result.warnings}"]
    for key, val in (extra_header or {}).items():
        lines.append(f"# {key} = {fmt(val)}")
    lines.append("# columns: orbit_index t_crossing x y")
    for idx, orbit in enumerate(result.orbits):
        xy = orbit.xy(spec)
        for t, (x, y) in zip(orbit.times, xy):
            lines.append(f"{idx} {fmt(t)} {fmt(x)} {fmt(y)}")
    return "\n".join(lines) + "\n"


def write_poincare_file(path: Path, result: SectionResult,
                        extra_header: dict | None = None) -> None:
    atomic_write_text(path, render_poincare_table(result, extra_header))
