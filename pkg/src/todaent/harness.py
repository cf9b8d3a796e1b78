"""Experiment orchestration: sweep cells, artifacts, and the manifest.

One experiment is one preset: quantum entropy curves per hbar, classical
curves per delta (cell area and sampling width paired), one surface of
section, one analysis report, and a manifest listing every emitted file
with its content hash.  A failing cell is recorded in the manifest and
the remaining cells proceed.

Re-running with the same config, seed, and code version reproduces the
artifact directory bitwise (the spectral cache only short-circuits the
eigensolution; it stores exactly what the cold path computes).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SweepCurves, analyze_sweep
from .cache import cache_get_or_build
from .config import ExperimentConfig, apply_preset_fields, config_hash, serialize_config
from .curves import EntropyCurve
from .dynamics import PhaseState, SectionResult, poincare_section, shell_state
from .ensemble import classical_entropy_curve
from .errors import ConfigurationError, TodaentError
from .io import atomic_write_text, file_sha256, read_curve_file, write_curve_file, write_poincare_file
from .quantum import BasisSpec, entanglement_curve_pair, required_n_max

log = logging.getLogger(__name__)

ALL_PARTS = ("quantum", "classical", "poincare", "analysis")


@dataclass(frozen=True)
class RunResult:
    artifact_dir: Path
    files: dict
    failures: tuple
    reused: bool = False

    @property
    def manifest_path(self) -> Path:
        return self.artifact_dir / "manifest.txt"


def resolve_basis(cfg: ExperimentConfig, hbar: float) -> BasisSpec:
    """Basis for one quantum cell; the cutoff is sized automatically unless pinned.

    The automatic rule keeps each coherent mode's Poisson tail an order
    of magnitude below the deficit gate, plus a small cushion.
    """
    if cfg.n_max is not None:
        n_max = cfg.n_max
    else:
        n_max = required_n_max(cfg.center(), hbar, cfg.omega,
                               deficit_tol=cfg.deficit_tol / 10.0) + 2
    return BasisSpec(hbar=hbar, n_max=n_max, omega=cfg.omega, n_sum_max=cfg.n_sum_max)


def delta_file_name(delta: float, seed_check: bool = False) -> str:
    suffix = "_seedcheck" if seed_check else ""
    return f"classical_delta_{delta:g}{suffix}.txt"


def hbar_file_name(hbar: float) -> str:
    return f"quantum_hbar_{hbar:g}.txt"


def section_scan_states(cfg: ExperimentConfig) -> list[PhaseState]:
    """Initial conditions for the section: a scan across it plus the preset center.

    The scan walks the first plotted coordinate along the section with the
    second plotted coordinate zero, between the turning points on the
    energy shell (with a small margin so the reconstructed momentum stays
    real under integration error).
    """
    spec = cfg.section()
    params = cfg.model()

    def feasible(x: float) -> bool:
        try:
            shell_state(x, 0.0, spec, params)
            return True
        except ConfigurationError:
            return False

    if not feasible(0.0):
        raise ConfigurationError("section scan assumes the shell contains x = 0")

    def boundary(direction: float) -> float:
        # expand a feasible/infeasible bracket outward from 0, then bisect
        lo, hi = 0.0, direction
        while feasible(hi):
            lo, hi = hi, 2.0 * hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
        return lo

    x_max = boundary(1.0)
    x_min = boundary(-1.0)

    margin = 0.02 * (x_max - x_min)
    xs = np.linspace(x_min + margin, x_max - margin, cfg.poincare_orbits)
    states = [shell_state(float(x), 0.0, spec, params) for x in xs]
    center = cfg.center()
    pin_value = getattr(center, spec.pin)
    if math.isclose(pin_value, spec.value, abs_tol=1e-12):
        states.append(center)
    return states


def _quantum_cell(cfg: ExperimentConfig, hbar: float):
    basis = resolve_basis(cfg, hbar)
    dec = cache_get_or_build(cfg.model(), basis, cfg.cache_dir)
    c1, c2 = entanglement_curve_pair(cfg.model(), basis, cfg.center(), cfg.times(),
                                     decomposition=dec, preset=cfg.preset)
    header = {"n_max": basis.n_max, "omega": basis.omega,
              "basis_dim": basis.dim, "code_version": __version__}
    if basis.n_sum_max is not None:
        header["n_sum_max"] = basis.n_sum_max
    return c1, c2, header


def _classical_cell(cfg: ExperimentConfig, delta: float, seed: int):
    c1, c2 = classical_entropy_curve(cfg.model(), cfg.center(), hbar=delta,
                                     delta=delta, m=cfg.m_points, seed=seed,
                                     times=cfg.times(), dt=cfg.dt,
                                     drift_tol=cfg.drift_tol, preset=cfg.preset)
    return c1, c2, {"code_version": __version__}


def _poincare_cell(cfg: ExperimentConfig) -> SectionResult:
    states = section_scan_states(cfg)
    return poincare_section(states, cfg.section(), cfg.model(),
                            n_crossings=cfg.poincare_crossings, dt=cfg.poincare_dt)


def load_artifact_curves(artifact_dir, cfg: ExperimentConfig) -> SweepCurves:
    """Rebuild the sweep-curve container from curve files on disk."""
    artifact_dir = Path(artifact_dir)
    classical: dict[float, tuple[EntropyCurve, EntropyCurve]] = {}
    quantum: dict[float, tuple[EntropyCurve, EntropyCurve]] = {}
    for path in sorted(artifact_dir.glob("classical_delta_*.txt")):
        if path.name.endswith("_seedcheck.txt"):
            continue
        c1, c2, _ = read_curve_file(path)
        classical[c1.tag.delta] = (c1, c2)
    for path in sorted(artifact_dir.glob("quantum_hbar_*.txt")):
        c1, c2, _ = read_curve_file(path)
        quantum[c1.tag.hbar] = (c1, c2)
    return SweepCurves(preset=cfg.preset, kind=cfg.kind(), classical=classical,
                       quantum=quantum, delta_schedule=cfg.delta_schedule,
                       hbar_schedule=cfg.hbar_schedule)


def _write_manifest(out_dir: Path, cfg: ExperimentConfig, failures, parts) -> dict:
    names = sorted(p.name for p in out_dir.iterdir()
                   if p.is_file() and p.name != "manifest.txt" and not p.name.endswith(".tmp"))
    hashes = {name: file_sha256(out_dir / name) for name in names}
    lines = ["# todaent manifest v1",
             f"# code_version = {__version__}",
             f"# config_sha256 = {config_hash(cfg)}",
             f"# parts = {' '.join(parts)}",
             "[config]"]
    lines.extend(serialize_config(cfg).rstrip("\n").splitlines())
    lines.append("[files]")
    for name in names:
        lines.append(f"{hashes[name]}  {name}")
    lines.append("[failures]")
    for cell, err in failures:
        lines.append(f"{cell}: {err}")
    lines.append("[status]")
    lines.append(f"cells_failed = {len(failures)}")
    atomic_write_text(out_dir / "manifest.txt", "\n".join(lines) + "\n")
    return hashes


def read_manifest(path) -> dict:
    """Header keys, file hashes, and failures of a manifest."""
    header: dict[str, str] = {}
    files: dict[str, str] = {}
    failures: list[str] = []
    section = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# ") and "=" in line and section is None:
                key, _, val = line[2:].partition("=")
                header[key.strip()] = val.strip()
            elif line in ("[config]", "[files]", "[failures]", "[status]"):
                section = line
            elif section == "[files]" and line:
                digest, _, name = line.partition("  ")
                files[name] = digest
            elif section == "[failures]" and line:
                failures.append(line)
    return {"header": header, "files": files, "failures": failures}


def _existing_run_valid(out_dir: Path, cfg: ExperimentConfig) -> dict | None:
    manifest = out_dir / "manifest.txt"
    if not manifest.exists():
        return None
    info = read_manifest(manifest)
    if info["header"].get("config_sha256") != config_hash(cfg):
        return None
    if info["failures"]:
        return None
    for name, digest in info["files"].items():
        path = out_dir / name
        if not path.exists() or file_sha256(path) != digest:
            return None
    return info["files"]


def run_experiment(cfg: ExperimentConfig, parts=ALL_PARTS,
                   reuse_if_valid: bool = False) -> RunResult:
    """Execute the sweep and write all artifacts under cfg.output_dir.

    ``parts`` selects which cell families run (the manifest is always
    rewritten).  With ``reuse_if_valid`` an existing artifact directory
    whose manifest matches this config, hash-verifies, and recorded no
    failures is returned as-is.
    """
    cfg = apply_preset_fields(cfg)
    unknown = set(parts) - set(ALL_PARTS)
    if unknown:
        raise ConfigurationError(f"unknown parts {sorted(unknown)}; valid: {ALL_PARTS}")
    out_dir = Path(cfg.output_dir)
    if reuse_if_valid:
        files = _existing_run_valid(out_dir, cfg)
        if files is not None:
            log.info("reusing verified artifacts in %s", out_dir)
            return RunResult(out_dir, files, (), reused=True)
    out_dir.mkdir(parents=True, exist_ok=True)

    failures: list[tuple[str, str]] = []
    jobs: list[tuple[str, callable]] = []

    if "quantum" in parts:
        for hbar in cfg.hbar_schedule:
            jobs.append((hbar_file_name(hbar),
                         lambda h=hbar: _quantum_cell(cfg, h)))
    if "classical" in parts:
        for delta in cfg.classical_deltas():
            jobs.append((delta_file_name(delta),
                         lambda d=delta: _classical_cell(cfg, d, cfg.seed)))
        if cfg.extra_seed_check:
            d_min = min(cfg.classical_deltas())
            jobs.append((delta_file_name(d_min, seed_check=True),
                         lambda d=d_min: _classical_cell(cfg, d, cfg.seed + 1)))

    def run_cell(item):
        name, fn = item
        try:
            return name, fn(), None
        except TodaentError as exc:
            log.warning("cell %s failed: %s", name, exc)
            return name, None, f"{type(exc).__name__}: {exc}"

    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run_cell, jobs))
    else:
        outcomes = [run_cell(j) for j in jobs]

    for name, payload, err in outcomes:
        if err is not None:
            failures.append((name, err))
            continue
        c1, c2, header = payload
        write_curve_file(out_dir / name, c1, c2, header)
        log.info("wrote %s", name)

    if "poincare" in parts:
        try:
            result = _poincare_cell(cfg)
            write_poincare_file(out_dir / "poincare.txt", result,
                                {"dt": cfg.poincare_dt, "n_crossings": cfg.poincare_crossings,
                                 "code_version": __version__})
            log.info("wrote poincare.txt (%d orbits, %d budget warnings)",
                     len(result.orbits), result.warnings)
        except TodaentError as exc:
            failures.append(("poincare.txt", f"{type(exc).__name__}: {exc}"))

    if "analysis" in parts:
        try:
            curves = load_artifact_curves(out_dir, cfg)
            report = analyze_sweep(curves, tail_fraction=cfg.tail_fraction,
                                   rise_fraction=cfg.rise_fraction)
            atomic_write_text(out_dir / "analysis.txt", report.to_text())
            log.info("wrote analysis.txt")
        except TodaentError as exc:
            failures.append(("analysis.txt", f"{type(exc).__name__}: {exc}"))

    hashes = _write_manifest(out_dir, cfg, failures, parts)
    return RunResult(out_dir, hashes, tuple(failures))
