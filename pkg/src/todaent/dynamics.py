"""Classical mechanics of two particles on a line with exponential coupling.

The Hamiltonian is

    H = p1^2/(2 m1) + p2^2/(2 m2) + e^{-q1} + e^{-(q2-q1)} + e^{q2} - 3,

a wall-bounded two-particle Toda chain.  For m1 = m2 the motion is
integrable at every energy; unequal masses develop a mixed phase space as
the energy grows.  This module provides the potential/energy functions,
Hamilton's flow field, a classic fourth-order Runge-Kutta integrator
(scalar and batched), and surface-of-section generation.

All operations are pure functions of their inputs.  Any non-finite
intermediate aborts with :class:`~todaent.errors.OverflowGuardError`
rather than propagating NaNs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, EnergyDriftError, OverflowGuardError

COORD_NAMES = ("q1", "q2", "p1", "p2")

#: Default step of production integrations.  RK4 is not symplectic; the
#: drift guard below turns silent energy drift into a diagnosable error.
DEFAULT_DT = 1e-3

#: Relative energy-drift guard for production trajectories.
DEFAULT_DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """Masses and nominal shell energy for the two-particle chain."""

    m1: float = 1.0
    m2: float = 1.0
    energy: float = 7.0

    def __post_init__(self):
        if not (self.m1 > 0.0 and self.m2 > 0.0):
            raise ConfigurationError(f"masses must be positive, got {self.m1}, {self.m2}")
        if not self.energy > 0.0:
            raise ConfigurationError(f"energy must be positive, got {self.energy}")


@dataclass(frozen=True)
class PhaseState:
    """One point (q1, q2, p1, p2) of the 4-dimensional phase space."""

    q1: float
    q2: float
    p1: float
    p2: float

    def __post_init__(self):
        for name in COORD_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"coordinate {name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.p1, self.p2], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "PhaseState":
        q1, q2, p1, p2 = (float(x) for x in a)
        return cls(q1, q2, p1, p2)


@dataclass(frozen=True)
class SectionSpec:
    """Definition of a Poincare surface of section.

    One position coordinate is pinned to ``value``; a crossing is recorded
    when the trajectory passes through the section with the sign of the
    pinned coordinate's conjugate momentum equal to ``direction``.  The
    plotted pair must not contain that conjugate momentum (it is fixed by
    energy conservation on the section).
    """

    pin: str = "q2"
    value: float = 0.0
    direction: int = 1
    plot: tuple[str, str] = ("q1", "p1")

    def __post_init__(self):
        if self.pin not in ("q1", "q2"):
            raise ConfigurationError(f"pinned coordinate must be q1 or q2, got {self.pin!r}")
        if self.direction not in (1, -1):
            raise ConfigurationError(f"crossing direction must be +1 or -1, got {self.direction}")
        if len(self.plot) != 2 or self.plot[0] == self.plot[1]:
            raise ConfigurationError(f"plotted pair must be two distinct coordinates, got {self.plot}")
        for name in self.plot:
            if name not in COORD_NAMES:
                raise ConfigurationError(f"unknown coordinate {name!r} in plotted pair")
        if self.conjugate in self.plot:
            raise ConfigurationError(
                f"plotted pair {self.plot} must exclude {self.conjugate}, the momentum "
                f"conjugate to the pinned coordinate (it is fixed by energy conservation)")

    @property
    def conjugate(self) -> str:
        return "p1" if self.pin == "q1" else "p2"

    @property
    def pin_index(self) -> int:
        return COORD_NAMES.index(self.pin)

    @property
    def conjugate_index(self) -> int:
        return COORD_NAMES.index(self.conjugate)

    @property
    def plot_indices(self) -> tuple[int, int]:
        return (COORD_NAMES.index(self.plot[0]), COORD_NAMES.index(self.plot[1]))


def _require_finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise OverflowGuardError(f"{what} is not finite (exponential overflow?)")
    return value


def potential_energy(q1: float, q2: float) -> float:
    """Potential e^{-q1} + e^{-(q2-q1)} + e^{q2} - 3.

    Convex, with global minimum 0 at the origin.  Raises
    :class:`OverflowGuardError` instead of returning inf for |q| beyond
    the double-precision exponential range.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        v = float(np.exp(-q1) + np.exp(q1 - q2) + np.exp(q2) - 3.0)
    return _require_finite(v, f"potential at ({q1}, {q2})")


def total_energy(state: PhaseState, params: ModelParams) -> float:
    """Kinetic plus potential energy of one phase-space point."""
    kin = 0.5 * state.p1 * state.p1 / params.m1 + 0.5 * state.p2 * state.p2 / params.m2
    return kin + potential_energy(state.q1, state.q2)


def hamiltonian_flow(state: PhaseState, params: ModelParams) -> np.ndarray:
    """Right-hand side (dq1, dq2, dp1, dp2) of Hamilton's equations."""
    with np.errstate(over="ignore", invalid="ignore"):
        e1 = np.exp(-state.q1)
        e2 = np.exp(state.q1 - state.q2)
        e3 = np.exp(state.q2)
        out = np.array([state.p1 / params.m1, state.p2 / params.m2, e1 - e2, e2 - e3])
    return _require_finite(out, f"flow at {state}")


class RK4Stepper:
    """Classic four-stage Runge-Kutta for a batch of phase-space points.

    The state is a (4, n) array with rows q1, q2, p1, p2, advanced in
    place.  All work buffers are preallocated, so stepping does not
    allocate; a single instance must not be shared across threads.

    Every public integration path in this package goes through this
    class, which makes a batch of size one bitwise identical to the
    corresponding column of a larger batch.
    """

    def __init__(self, n: int, params: ModelParams):
        self.m1 = params.m1
        self.m2 = params.m2
        self._k = [np.empty((4, n)) for _ in range(4)]
        self._y = np.empty((4, n))
        self._ea = np.empty(n)
        self._eb = np.empty(n)
        self._ec = np.empty(n)

    def flow(self, s: np.ndarray, out: np.ndarray) -> None:
        q1, q2, p1, p2 = s
        ea, eb, ec = self._ea, self._eb, self._ec
        np.exp(np.negative(q1, out=ea), out=ea)
        np.exp(np.subtract(q1, q2, out=eb), out=eb)
        np.exp(q2, out=ec)
        np.divide(p1, self.m1, out=out[0])
        np.divide(p2, self.m2, out=out[1])
        np.subtract(ea, eb, out=out[2])
        np.subtract(eb, ec, out=out[3])

    def step(self, s: np.ndarray, dt: float) -> None:
        with np.errstate(over="ignore", invalid="ignore"):
            self._step(s, dt)

    def _step(self, s: np.ndarray, dt: float) -> None:
        k1, k2, k3, k4 = self._k
        y = self._y
        h = 0.5 * dt
        self.flow(s, k1)
        np.multiply(k1, h, out=y)
        y += s
        self.flow(y, k2)
        np.multiply(k2, h, out=y)
        y += s
        self.flow(y, k3)
        np.multiply(k3, dt, out=y)
        y += s
        self.flow(y, k4)
        # s += dt/6 * ((k1 + k4) + 2 (k2 + k3)), evaluated in this exact order
        k2 += k3
        k2 *= 2.0
        k1 += k4
        k1 += k2
        k1 *= dt / 6.0
        s += k1

    def energies(self, s: np.ndarray) -> np.ndarray:
        """Total energy per column, using the same exp evaluations as the flow."""
        q1, q2, p1, p2 = s
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.exp(-q1) + np.exp(q1 - q2) + np.exp(q2) - 3.0
            return 0.5 * p1 * p1 / self.m1 + 0.5 * p2 * p2 / self.m2 + v


def rk4_step(state: PhaseState, dt: float, params: ModelParams) -> PhaseState:
    """One fourth-order Runge-Kutta update of Hamilton's flow."""
    if not math.isfinite(dt):
        raise ConfigurationError(f"dt must be finite, got {dt}")
    s = state.as_array().reshape(4, 1)
    RK4Stepper(1, params).step(s, dt)
    _require_finite(s, f"RK4 step from {state}")
    return PhaseState.from_array(s[:, 0])


@dataclass(frozen=True)
class Trajectory:
    """Sampled trajectory: times, states (n, 4), and the observed drift."""

    times: np.ndarray
    states: np.ndarray
    max_rel_drift: float

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> PhaseState:
        return PhaseState.from_array(self.states[i])

    def __iter__(self):
        return ((float(t), PhaseState.from_array(s)) for t, s in zip(self.times, self.states))


def integrate_trajectory(state0: PhaseState, t_end: float, dt: float,
                         params: ModelParams, sample_stride: int = 1,
                         drift_tol: float = DEFAULT_DRIFT_TOL) -> Trajectory:
    """Integrate one trajectory, emitting every ``sample_stride``-th state.

    The initial state is always emitted, as is the final one.  The
    relative energy drift |E(t) - E(0)| / |E(0)| is checked at every
    emitted sample; exceeding ``drift_tol`` raises
    :class:`EnergyDriftError` naming the time of violation.
    """
    if not t_end > 0.0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    if not dt > 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if sample_stride < 1:
        raise ConfigurationError(f"sample_stride must be >= 1, got {sample_stride}")

    n_steps = max(1, int(round(t_end / dt)))
    stepper = RK4Stepper(1, params)
    s = state0.as_array().reshape(4, 1)
    e0 = total_energy(state0, params)

    times = [0.0]
    states = [s[:, 0].copy()]
    max_drift = 0.0

    def check_sample(k: int):
        nonlocal max_drift
        t = k * dt
        if not np.all(np.isfinite(s)):
            raise OverflowGuardError(f"trajectory became non-finite at t={t}")
        e = float(stepper.energies(s)[0])
        drift = abs(e - e0) / abs(e0)
        max_drift = max(max_drift, drift)
        if drift > drift_tol:
            raise EnergyDriftError(
                f"relative energy drift {drift:.3e} exceeds {drift_tol:.1e} at t={t}",
                time=t)
        times.append(t)
        states.append(s[:, 0].copy())

    for k in range(1, n_steps + 1):
        stepper.step(s, dt)
        if k % sample_stride == 0 or k == n_steps:
            check_sample(k)

    return Trajectory(np.array(times), np.array(states), max_drift)


def shell_state(x: float, y: float, spec: SectionSpec, params: ModelParams) -> PhaseState:
    """Lift a point of the section plane onto the energy shell.

    The plotted coordinates are set to (x, y), the pinned coordinate to
    the section value, and the momentum conjugate to the pinned
    coordinate is reconstructed from ``params.energy`` with the sign of
    ``spec.direction``.  Raises :class:`ConfigurationError` when (x, y)
    lies outside the shell or when the plotted pair does not determine
    the remaining coordinates.
    """
    free = {name for name in COORD_NAMES if name not in (spec.pin, spec.conjugate)}
    if set(spec.plot) != free:
        raise ConfigurationError(
            f"shell lift needs the plotted pair to be {sorted(free)}, got {spec.plot}")
    coords = dict(zip(spec.plot, (x, y)))
    coords[spec.pin] = spec.value
    q1, q2 = coords["q1"], coords["q2"]
    m_conj = params.m1 if spec.conjugate == "p1" else params.m2
    p_other = coords["p1"] if spec.conjugate == "p2" else coords["p2"]
    m_other = params.m1 if spec.conjugate == "p2" else params.m2
    budget = params.energy - potential_energy(q1, q2) - 0.5 * p_other * p_other / m_other
    if budget < 0.0:
        raise ConfigurationError(
            f"section point ({x}, {y}) lies outside the energy-{params.energy} shell")
    coords[spec.conjugate] = spec.direction * math.sqrt(2.0 * m_conj * budget)
    return PhaseState(coords["q1"], coords["q2"], coords["p1"], coords["p2"])


@dataclass(frozen=True)
class SectionOrbit:
    """Crossings of one orbit: times and full 4-dimensional crossing states."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    def xy(self, spec: SectionSpec) -> np.ndarray:
        ix, iy = spec.plot_indices
        return self.states[:, (ix, iy)]


@dataclass(frozen=True)
class SectionResult:
    """Poincare section of a batch of orbits.

    ``warnings`` counts the orbits that exhausted their step budget
    before reaching the requested number of crossings; their recorded
    crossings are still included (partial result).
    """

    orbits: list[SectionOrbit]
    spec: SectionSpec
    params: ModelParams
    warnings: int

    @cached_property
    def all_xy(self) -> np.ndarray:
        parts = [o.xy(self.spec) for o in self.orbits if len(o)]
        if not parts:
            return np.zeros((0, 2))
        return np.concatenate(parts, axis=0)


def poincare_section(initial_states: list[PhaseState], spec: SectionSpec,
                     params: ModelParams, n_crossings: int, dt: float = DEFAULT_DT,
                     max_steps: int | None = None, refine: bool = True,
                     energy_rtol: float = 1e-8) -> SectionResult:
    """Record section crossings for a batch of orbits on one energy shell.

    Crossings are detected by a sign change of the pinned coordinate
    (minus the section value) in the crossing direction, located by
    linear interpolation between integration steps and, when ``refine``
    is set, corrected by one Newton iteration on the crossing time.
    """
    if n_crossings < 1:
        raise ConfigurationError(f"n_crossings must be >= 1, got {n_crossings}")
    if not dt > 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    n = len(initial_states)
    if n == 0:
        raise ConfigurationError("poincare_section needs at least one initial state")
    for i, st in enumerate(initial_states):
        e = total_energy(st, params)
        if abs(e - params.energy) > energy_rtol * max(1.0, abs(params.energy)):
            raise ConfigurationError(
                f"initial state {i} has energy {e!r}, not within tolerance of "
                f"shell energy {params.energy!r}")
    if max_steps is None:
        max_steps = 20_000 * n_crossings

    ip = spec.pin_index
    ic = spec.conjugate_index
    m_conj = params.m1 if spec.conjugate == "p1" else params.m2
    sgn = float(spec.direction)

    s = np.stack([st.as_array() for st in initial_states], axis=1)  # (4, n)
    stepper = RK4Stepper(n, params)
    refine_stepper = RK4Stepper(1, params) if refine else None

    times: list[list[float]] = [[] for _ in range(n)]
    hits: list[list[np.ndarray]] = [[] for _ in range(n)]
    done = np.zeros(n, dtype=bool)
    s_prev = np.empty_like(s)
    g_prev = sgn * (s[ip] - spec.value)

    for k in range(1, max_steps + 1):
        s_prev[...] = s
        stepper.step(s, dt)
        if not np.all(np.isfinite(s)):
            bad = int(np.argmin(np.isfinite(s).all(axis=0)))
            raise OverflowGuardError(f"orbit {bad} became non-finite at t={k * dt}")
        g_new = sgn * (s[ip] - spec.value)
        crossing = (g_prev < 0.0) & (g_new >= 0.0) & ~done
        if crossing.any():
            for j in np.nonzero(crossing)[0]:
                tau = g_prev[j] / (g_prev[j] - g_new[j])
                hit = (1.0 - tau) * s_prev[:, j] + tau * s[:, j]
                t_hit = (k - 1 + tau) * dt
                if refine:
                    # one Newton iteration on the crossing time, applied as
                    # an RK4 substep of the signed correction
                    g = hit[ip] - spec.value
                    gdot = hit[ic] / m_conj
                    if gdot != 0.0:
                        dt_corr = -g / gdot
                        col = hit.reshape(4, 1).copy()
                        refine_stepper.step(col, dt_corr)
                        if np.all(np.isfinite(col)):
                            hit = col[:, 0]
                            t_hit += dt_corr
                times[j].append(t_hit)
                hits[j].append(hit.copy())
                if len(times[j]) >= n_crossings:
                    done[j] = True
        g_prev = g_new
        if done.all():
            break

    orbits = [SectionOrbit(np.array(t), np.array(h).reshape(len(t), 4))
              for t, h in zip(times, hits)]
    return SectionResult(orbits, spec, params, warnings=int((~done).sum()))


def max_nearest_neighbor_gap(xy: np.ndarray) -> float:
    """Largest nearest-neighbor distance within a 2-d point set.

    For points accumulating on a closed curve this is non-increasing as
    points are appended; for an area-filling set it keeps being refreshed
    by points landing in unexplored territory.
    """
    pts = np.asarray(xy, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ConfigurationError("need an (n, 2) array with n >= 2")
    n = len(pts)
    best = np.full(n, np.inf)
    chunk = 512
    for i in range(0, n, chunk):
        d2 = ((pts[i:i + chunk, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        for r in range(d2.shape[0]):
            d2[r, i + r] = np.inf
        best[i:i + chunk] = np.minimum(best[i:i + chunk], d2.min(axis=1))
    return float(np.sqrt(best.max()))


def occupied_cell_count(xy: np.ndarray, grid_n: int, bounds=None) -> int:
    """Number of cells of a ``grid_n`` x ``grid_n`` grid hit by the points.

    ``bounds`` is ((xmin, xmax), (ymin, ymax)); it defaults to the data's
    bounding box.  Pass fixed bounds when comparing prefixes of a growing
    point set, so the grid does not move underneath the comparison.
    """
    pts = np.asarray(xy, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ConfigurationError("need a nonempty (n, 2) array")
    if bounds is None:
        bounds = ((pts[:, 0].min(), pts[:, 0].max()), (pts[:, 1].min(), pts[:, 1].max()))
    (x0, x1), (y0, y1) = bounds
    sx = (x1 - x0) or 1.0
    sy = (y1 - y0) or 1.0
    ix = np.clip(((pts[:, 0] - x0) / sx * grid_n).astype(np.int64), 0, grid_n - 1)
    iy = np.clip(((pts[:, 1] - y0) / sy * grid_n).astype(np.int64), 0, grid_n - 1)
    return int(np.unique(ix * grid_n + iy).size)
