"""Classical counterpart: Gaussian ensembles, projection, cell entropy.

A coherent state of width parameter hbar corresponds to an isotropic
Gaussian in the 4-dimensional phase space with variance hbar/2 in every
coordinate (the Wigner covariance at unit mass and frequency).  The
ensemble is evolved point-by-point with the RK4 stepper from
:mod:`todaent.dynamics`, projected onto one particle's (q, p) plane, and
coarse-grained over square cells of side sqrt(delta):

    S_cl(delta, t) = -sum_i (w_i / M) ln(w_i / M),

where w_i counts the points found in cell i.  Cells are discovered
dynamically, so every point is always hosted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .curves import KIND_CLASSICAL, CurveTag, EntropyCurve
from .dynamics import (DEFAULT_DRIFT_TOL, DEFAULT_DT, ModelParams, PhaseState,
                       RK4Stepper)
from .errors import ConfigurationError, EnergyDriftError, OverflowGuardError

#: Gaussian sampler identity; bump if the draw scheme ever changes, so
#: seeds remain comparable across builds.
SAMPLER_VERSION = 1


@dataclass(frozen=True)
class Ensemble:
    """M equally weighted phase-space points plus their provenance.

    ``energies0`` holds the per-point energies recorded at t = 0 (filled
    on first evolution); the drift guard is anchored there for the whole
    history of the ensemble.
    """

    points: np.ndarray  # (M, 4), columns q1 q2 p1 p2
    center: PhaseState
    hbar: float
    seed: int
    t: float = 0.0
    energies0: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != 4 or len(pts) < 1:
            raise ConfigurationError(f"points must be (M, 4) with M >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("ensemble points must be finite")
        pts.setflags(write=False)
        if self.energies0 is not None:
            self.energies0.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.points)


def sample_initial_ensemble(center: PhaseState, hbar: float, m: int, seed: int) -> Ensemble:
    """Draw M points from the Gaussian matching a coherent state at ``center``.

    The sampler is pinned: a PCG64 stream seeded with ``seed`` supplies
    exactly four uniforms per point, turned into four normals by two
    Box-Muller pairs.  (M, seed) therefore fully determine the sample,
    and a longer draw extends a shorter one.
    """
    if m < 1:
        raise ConfigurationError(f"ensemble size must be >= 1, got {m}")
    if not hbar > 0.0:
        raise ConfigurationError(f"width parameter hbar must be positive, got {hbar}")
    u = np.random.Generator(np.random.PCG64(seed)).random((m, 4))
    r01 = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    r23 = np.sqrt(-2.0 * np.log1p(-u[:, 2]))
    z = np.empty((m, 4))
    z[:, 0] = r01 * np.cos(2.0 * np.pi * u[:, 1])
    z[:, 1] = r01 * np.sin(2.0 * np.pi * u[:, 1])
    z[:, 2] = r23 * np.cos(2.0 * np.pi * u[:, 3])
    z[:, 3] = r23 * np.sin(2.0 * np.pi * u[:, 3])
    pts = center.as_array()[None, :] + math.sqrt(hbar / 2.0) * z
    return Ensemble(pts, center, hbar, seed)


def evolve_ensemble(ens: Ensemble, t_target: float, dt: float,
                    params: ModelParams,
                    drift_tol: float = DEFAULT_DRIFT_TOL) -> Ensemble:
    """Advance every point independently from ens.t to t_target.

    ``t_target - ens.t`` must be an integer number of dt steps (aligned
    grids keep staged evolution bitwise equal to a single stage).  After
    stepping, any point whose energy drifted relatively more than
    ``drift_tol`` from its t = 0 value aborts with
    :class:`EnergyDriftError` naming the point and time.
    """
    if t_target < ens.t:
        raise ConfigurationError(f"cannot evolve backwards: {t_target} < {ens.t}")
    span = t_target - ens.t
    n_steps = int(round(span / dt)) if span > 0.0 else 0
    if abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(t_target)):
        raise ConfigurationError(
            f"t_target - t = {span!r} is not an integer number of dt={dt!r} steps")

    stepper = RK4Stepper(ens.size, params)
    s = np.ascontiguousarray(ens.points.T)  # (4, M) working copy
    e0 = ens.energies0
    if e0 is None:
        e0 = stepper.energies(s).copy()

    for _ in range(n_steps):
        stepper.step(s, dt)

    if not np.all(np.isfinite(s)):
        bad = int(np.nonzero(~np.isfinite(s).all(axis=0))[0][0])
        raise OverflowGuardError(
            f"ensemble point {bad} became non-finite by t={t_target}")
    drift = np.abs(stepper.energies(s) - e0) / np.abs(e0)
    worst = int(np.argmax(drift))
    if drift[worst] > drift_tol:
        raise EnergyDriftError(
            f"point {worst} drifted {drift[worst]:.3e} (> {drift_tol:.1e}) by t={t_target}",
            time=t_target, point_index=worst)

    return replace(ens, points=s.T.copy(), t=t_target, energies0=e0)


def project(ens: Ensemble | np.ndarray, particle: int) -> np.ndarray:
    """Reduced ensemble: the (q, p) pairs of one particle, order preserved."""
    if particle not in (1, 2):
        raise ConfigurationError(f"particle must be 1 or 2, got {particle}")
    pts = ens.points if isinstance(ens, Ensemble) else np.asarray(ens)
    cols = (0, 2) if particle == 1 else (1, 3)
    return pts[:, cols]


@dataclass(frozen=True)
class CellPartition:
    """Fixed partition of a plane into square cells of area delta.

    Cells are half-open: a point exactly on an edge belongs to the cell
    of the larger index.
    """

    delta: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ConfigurationError(f"cell area delta must be positive, got {self.delta}")

    @property
    def side(self) -> float:
        return math.sqrt(self.delta)


def cell_entropy(points: np.ndarray, part: CellPartition) -> float:
    """Shannon entropy of the cell occupation of a 2-d point set."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ConfigurationError(f"points must be a nonempty (M, 2) array, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ConfigurationError("cell entropy of non-finite points is undefined")
    side = part.side
    ix = np.floor((pts[:, 0] - part.origin[0]) / side).astype(np.int64)
    iy = np.floor((pts[:, 1] - part.origin[1]) / side).astype(np.int64)
    # indices stay far below 2^31 for any physical configuration
    keys = ix * np.int64(2 ** 31) + iy
    _, counts = np.unique(keys, return_counts=True)
    w = counts / len(pts)
    return max(float(-(w * np.log(w)).sum()), 0.0)


def classical_entropy_curve(params: ModelParams, center: PhaseState, hbar: float,
                            delta: float, m: int, seed: int, times,
                            dt: float = DEFAULT_DT,
                            drift_tol: float = DEFAULT_DRIFT_TOL,
                            origin: tuple[float, float] = (0.0, 0.0),
                            preset: str = "custom") -> tuple[EntropyCurve, EntropyCurve]:
    """Cell entropies of both reduced ensembles along a time grid.

    ``hbar`` sets the sampling width and ``delta`` the cell area; pass
    them equal for the pairing used in quantum comparisons.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ConfigurationError("need a nonempty 1-d time grid")
    if np.any(np.diff(times) <= 0.0) or times[0] < 0.0:
        raise ConfigurationError("time grid must be ascending and non-negative")
    part = CellPartition(delta, origin)
    ens = sample_initial_ensemble(center, hbar, m, seed)
    s1 = np.empty(len(times))
    s2 = np.empty(len(times))
    for k, t in enumerate(times):
        ens = evolve_ensemble(ens, float(t), dt, params, drift_tol)
        s1[k] = cell_entropy(project(ens, 1), part)
        s2[k] = cell_entropy(project(ens, 2), part)
    tag = CurveTag(kind=KIND_CLASSICAL, preset=preset, hbar=hbar, delta=delta,
                   m_points=m, seed=seed, dt=dt)
    return (EntropyCurve(times, s1, tag, particle=1),
            EntropyCurve(times, s2, tag, particle=2))
