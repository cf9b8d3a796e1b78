"""Quantitative laws extracted from entropy curves.

The raw curves rise with superimposed oscillations and then saturate.
This module fits the average growth (logarithmic for regular dynamics,
linear for chaotic), estimates saturation values from tail means,
inverts the growth law for saturation times, regresses those against
the cell area (or hbar), and measures sup-norm distances between
quantum and classical curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import EntropyCurve
from .errors import (ConfigurationError, CurveAlignmentError, EstimationError,
                     FitWindowError, InsufficientDataError)

GROWTH_MODELS = ("log", "linear")

#: x-axis transforms available to scaling regressions.
SCALING_TRANSFORMS = {
    "log_inverse": lambda x: np.log(1.0 / x),
    "inverse_sqrt": lambda x: 1.0 / np.sqrt(x),
}


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares fit of S = a + b ln t ("log") or S = a + b t ("linear")."""

    model: str
    window: tuple[float, float]
    a: float
    b: float
    r_squared: float

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        x = np.log(t) if self.model == "log" else t
        return self.a + self.b * x


@dataclass(frozen=True)
class TailStats:
    """Mean and standard error over the trailing window of a curve."""

    s_bar: float
    stderr: float
    window: tuple[float, float]
    n_samples: int


@dataclass(frozen=True)
class SaturationEstimate:
    """Saturation entropy and the time the fitted growth law reaches it."""

    s_bar: float
    t_d: float
    tail_window: tuple[float, float]


def _linear_lsq(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept, r^2 of an ordinary least-squares line."""
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-28 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(b), float(a), r2


def fit_growth(curve: EntropyCurve, model: str, window: tuple[float, float]) -> GrowthFit:
    """Fit the average growth of a curve on a time window (raw, unsmoothed)."""
    if model not in GROWTH_MODELS:
        raise ConfigurationError(f"growth model must be one of {GROWTH_MODELS}, got {model!r}")
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise FitWindowError(f"empty window {window}")
    if model == "log" and t_lo <= 0.0:
        raise FitWindowError("log-model window must exclude t <= 0")
    t, s = curve.window(t_lo, t_hi)
    if len(t) < 5:
        raise FitWindowError(
            f"window {window} holds {len(t)} samples; at least 5 are needed")
    x = np.log(t) if model == "log" else t
    b, a, r2 = _linear_lsq(x, s)
    return GrowthFit(model=model, window=(float(t_lo), float(t_hi)), a=a, b=b, r_squared=r2)


def saturation_value(curve: EntropyCurve, tail_fraction: float = 0.2) -> TailStats:
    """Mean entropy over the trailing ``tail_fraction`` of samples."""
    if not 0.0 < tail_fraction <= 0.5:
        raise ConfigurationError(f"tail_fraction must be in (0, 0.5], got {tail_fraction}")
    n = max(1, int(math.ceil(tail_fraction * len(curve))))
    tail = curve.values[-n:]
    mean = float(tail.mean())
    stderr = float(tail.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return TailStats(s_bar=mean, stderr=stderr,
                     window=(float(curve.times[-n]), curve.t_max), n_samples=n)


def saturation_time(curve: EntropyCurve, growth: GrowthFit, s_bar: float) -> float:
    """Time when the fitted average growth reaches the saturation value.

    For the log model t_d = exp((s_bar - a) / b); for the linear model
    t_d = (s_bar - a) / b.  The result must land inside the curve's time
    span, otherwise the estimate is rejected.
    """
    if growth.b <= 0.0:
        raise EstimationError(f"growth slope {growth.b!r} is not positive; cannot invert")
    if growth.model == "log":
        if s_bar <= growth.a:
            raise EstimationError(
                f"saturation {s_bar!r} is below the log-model intercept {growth.a!r}")
        t_d = math.exp((s_bar - growth.a) / growth.b)
    else:
        t_d = (s_bar - growth.a) / growth.b
    if not curve.t_min <= t_d <= curve.t_max:
        raise EstimationError(
            f"saturation time {t_d!r} falls outside the curve span "
            f"[{curve.t_min}, {curve.t_max}]")
    return t_d


def estimate_saturation(curve: EntropyCurve, growth: GrowthFit,
                        tail_fraction: float = 0.2) -> SaturationEstimate:
    """Tail mean plus growth-law inversion, bundled."""
    tail = saturation_value(curve, tail_fraction)
    t_d = saturation_time(curve, growth, tail.s_bar)
    return SaturationEstimate(s_bar=tail.s_bar, t_d=t_d, tail_window=tail.window)


def scaling_regression(xs, ys, transform: str) -> GrowthFit:
    """Least squares of y against f(x), f in {ln(1/x), 1/sqrt(x)}.

    The slope is the headline number: the saturation-value coefficient C
    for s_bar against ln(1/delta), or the saturation-time coefficients
    against 1/sqrt(delta) and ln(1/delta).
    """
    if transform not in SCALING_TRANSFORMS:
        raise ConfigurationError(
            f"transform must be one of {sorted(SCALING_TRANSFORMS)}, got {transform!r}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ConfigurationError("xs and ys must be 1-d arrays of equal length")
    if len(xs) < 3:
        raise InsufficientDataError(f"need at least 3 points, got {len(xs)}")
    if np.any(xs <= 0.0):
        raise ConfigurationError("scaling regressions need positive parameter values")
    f = SCALING_TRANSFORMS[transform](xs)
    b, a, r2 = _linear_lsq(f, ys)
    return GrowthFit(model=transform, window=(float(xs.min()), float(xs.max())),
                     a=a, b=b, r_squared=r2)


def curve_distance(a: EntropyCurve, b: EntropyCurve, window: tuple[float, float]) -> float:
    """Sup-norm distance max |S_a - S_b| over a window, b interpolated onto a's grid."""
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise CurveAlignmentError(f"empty window {window}")
    for name, c in (("first", a), ("second", b)):
        if c.t_min > t_lo + 1e-12 or c.t_max < t_hi - 1e-12:
            raise CurveAlignmentError(
                f"{name} curve spans [{c.t_min}, {c.t_max}], not the window {window}")
    t, sa = a.window(t_lo, t_hi)
    if len(t) == 0:
        raise CurveAlignmentError(f"first curve has no samples inside {window}")
    sb = b.interp(t)
    return float(np.abs(sa - sb).max())


def rise_time(curve: EntropyCurve, fraction: float = 0.95,
              tail_fraction: float = 0.2) -> float:
    """First time the raw curve reaches ``fraction`` of its tail mean.

    Used to place pre-saturation fit windows; the growth-law inversion
    (:func:`saturation_time`) is the quantitative saturation time.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError(f"fraction must be in (0, 1], got {fraction}")
    level = fraction * saturation_value(curve, tail_fraction).s_bar
    above = np.nonzero(curve.values >= level)[0]
    if len(above) == 0:
        raise EstimationError(f"curve never reaches {fraction:.2f} of its tail mean")
    return float(curve.times[above[0]])


def growth_window(kind: str, t_rise: float, curve: EntropyCurve) -> tuple[float, float]:
    """Default pre-saturation fit window for a preset kind.

    Regular curves are fitted with the log model on [2, 0.5 t_rise]
    (undefined near t = 0, contaminated near saturation); chaotic curves
    with the linear model on [1, 0.7 t_rise].  The upper edge is widened
    when the window would hold fewer than 5 samples.
    """
    if kind == "regular":
        lo, hi = 2.0, 0.5 * t_rise
    elif kind == "chaotic":
        lo, hi = 1.0, 0.7 * t_rise
    else:
        raise ConfigurationError(f"kind must be regular or chaotic, got {kind!r}")
    if hi <= lo:
        hi = min(curve.t_max, max(t_rise, lo * 2.0))
    # ensure at least 5 samples
    for _ in range(32):
        t, _v = curve.window(lo, hi)
        if len(t) >= 5 or hi >= curve.t_max:
            break
        hi = min(curve.t_max, 2.0 * hi)
    return (lo, hi)


# ---------------------------------------------------------------------------
# sweep-level analysis and report


GROWTH_MODEL_BY_KIND = {"regular": "log", "chaotic": "linear"}
TD_TRANSFORM_BY_KIND = {"regular": "inverse_sqrt", "chaotic": "log_inverse"}


@dataclass(frozen=True)
class SweepCurves:
    """All curves of one preset's sweep, keyed by their sweep parameter."""

    preset: str
    kind: str  # regular | chaotic: selects growth model and t_d transform
    classical: dict  # delta -> (curve particle 1, curve particle 2)
    quantum: dict    # hbar  -> (curve particle 1, curve particle 2)
    delta_schedule: tuple[float, ...]
    hbar_schedule: tuple[float, ...]


@dataclass(frozen=True)
class ReportRow:
    source: str  # classical | quantum
    param: float  # delta or hbar
    s_bar: float
    s_bar_err: float
    t_d: float  # nan when the growth law cannot be inverted for this row
    growth_slope: float
    growth_r2: float


@dataclass(frozen=True)
class SweepReport:
    preset: str
    kind: str
    growth_model: str
    fit_window: tuple[float, float]
    limit_fit: GrowthFit
    rows: tuple[ReportRow, ...]
    scalings: dict  # name -> GrowthFit
    distances: dict  # hbar -> sup distance on [0, t_d_ref]
    distance_window: tuple[float, float] | None
    notes: tuple[str, ...]

    def trailer(self) -> dict:
        out = {
            "preset": self.preset,
            "kind": self.kind,
            "growth_model": self.growth_model,
            "growth_slope": self.limit_fit.b,
            "growth_r2": self.limit_fit.r_squared,
        }
        for name, fit in self.scalings.items():
            out[f"{name}_slope"] = fit.b
            out[f"{name}_r2"] = fit.r_squared
        for hbar in sorted(self.distances, reverse=True):
            out[f"qc_distance_hbar_{hbar:g}"] = self.distances[hbar]
        if len(self.distances) >= 2:
            ordered = [self.distances[h] for h in sorted(self.distances, reverse=True)]
            out["qc_distance_decreasing"] = all(
                b < a for a, b in zip(ordered, ordered[1:]))
        return out

    def to_text(self) -> str:
        lines = ["# todaent analysis report v1",
                 f"# preset = {self.preset}",
                 f"# kind = {self.kind}",
                 f"# growth_model = {self.growth_model}",
                 f"# fit_window = {self.fit_window[0]!r} {self.fit_window[1]!r}"]
        for note in self.notes:
            lines.append(f"# note: {note}")
        lines.append("# columns: source param s_bar s_bar_err t_d growth_slope growth_r2")
        for r in self.rows:
            lines.append(f"{r.source} {r.param!r} {r.s_bar!r} {r.s_bar_err!r} "
                         f"{r.t_d!r} {r.growth_slope!r} {r.growth_r2!r}")
        lines.append("== scaling ==")
        for name, fit in self.scalings.items():
            lines.append(f"{name}: y = {fit.a:.6g} + {fit.b:.6g} * f(x), "
                         f"f = {fit.model}, r2 = {fit.r_squared:.6g}")
        if self.distances:
            lines.append("== quantum-classical distance ==")
            lo, hi = self.distance_window
            lines.append(f"# window = {lo!r} {hi!r}")
            for hbar in sorted(self.distances, reverse=True):
                lines.append(f"hbar {hbar!r} distance {self.distances[hbar]!r}")
        lines.append("== trailer ==")
        for key, val in self.trailer().items():
            lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
        return "\n".join(lines) + "\n"


def _row(source: str, param: float, curve: EntropyCurve, limit_fit: GrowthFit,
         window: tuple[float, float], model: str, tail_fraction: float) -> ReportRow:
    tail = saturation_value(curve, tail_fraction)
    try:
        own = fit_growth(curve, model, window)
        slope, r2 = own.b, own.r_squared
    except FitWindowError:
        slope, r2 = float("nan"), float("nan")
    try:
        t_d = saturation_time(curve, limit_fit, tail.s_bar)
    except EstimationError:
        t_d = float("nan")
    return ReportRow(source=source, param=param, s_bar=tail.s_bar,
                     s_bar_err=tail.stderr, t_d=t_d, growth_slope=slope, growth_r2=r2)


def analyze_sweep(curves: SweepCurves, tail_fraction: float = 0.2,
                  rise_fraction: float = 0.95) -> SweepReport:
    """Growth law, saturation scaling, and quantum-classical distances.

    Saturation times are read off the growth fit of the limit curve (the
    smallest available delta, and for quantum rows the smallest hbar), at
    each row's own saturation value.
    """
    if not curves.classical:
        raise ConfigurationError("sweep analysis needs at least one classical curve")
    model = GROWTH_MODEL_BY_KIND[curves.kind]
    notes: list[str] = []

    deltas = sorted(curves.classical, reverse=True)
    limit_delta = deltas[-1]
    limit_curve = curves.classical[limit_delta][0]
    t_rise = rise_time(limit_curve, rise_fraction, tail_fraction)
    window = growth_window(curves.kind, t_rise, limit_curve)
    limit_fit = fit_growth(limit_curve, model, window)

    rows = [_row("classical", d, curves.classical[d][0], limit_fit, window,
                 model, tail_fraction) for d in deltas]

    quantum_fit = None
    q_window = window
    if curves.quantum:
        hbars = sorted(curves.quantum, reverse=True)
        q_limit = curves.quantum[hbars[-1]][0]
        try:
            q_rise = rise_time(q_limit, rise_fraction, tail_fraction)
            q_window = growth_window(curves.kind, q_rise, q_limit)
            quantum_fit = fit_growth(q_limit, model, q_window)
        except (EstimationError, FitWindowError) as exc:
            notes.append(f"quantum growth fit unavailable: {exc}")
        for h in hbars:
            rows.append(_row("quantum", h, curves.quantum[h][0],
                             quantum_fit or limit_fit, q_window, model, tail_fraction))

    by = {(r.source, r.param): r for r in rows}
    scalings: dict[str, GrowthFit] = {}

    def regress(name: str, source: str, params_: tuple[float, ...],
                values: str, transform: str):
        pts = [(p, by[(source, p)]) for p in params_ if (source, p) in by]
        pts = [(p, getattr(r, values)) for p, r in pts if math.isfinite(getattr(r, values))]
        if len(pts) < 3:
            notes.append(f"{name}: skipped ({len(pts)} usable points)")
            return
        xs, ys = zip(*pts)
        scalings[name] = scaling_regression(xs, ys, transform)

    td_transform = TD_TRANSFORM_BY_KIND[curves.kind]
    regress("classical_sbar", "classical", curves.delta_schedule, "s_bar", "log_inverse")
    regress("classical_td", "classical", curves.delta_schedule, "t_d", td_transform)
    if curves.quantum:
        regress("quantum_sbar", "quantum", curves.hbar_schedule, "s_bar", "log_inverse")
        regress("quantum_td", "quantum", curves.hbar_schedule, "t_d", td_transform)

    distances: dict[float, float] = {}
    distance_window = None
    pairable = [h for h in curves.hbar_schedule
                if h in curves.quantum and h in curves.classical]
    if pairable:
        h_min = min(pairable)
        paired_limit = curves.classical[h_min][0]
        try:
            pr = rise_time(paired_limit, rise_fraction, tail_fraction)
            pw = growth_window(curves.kind, pr, paired_limit)
            pf = fit_growth(paired_limit, model, pw)
            t_d_ref = saturation_time(paired_limit,
                                      pf, saturation_value(paired_limit, tail_fraction).s_bar)
            distance_window = (0.0, t_d_ref)
            for h in pairable:
                distances[h] = curve_distance(curves.quantum[h][0],
                                              curves.classical[h][0], distance_window)
        except (EstimationError, FitWindowError, CurveAlignmentError) as exc:
            notes.append(f"quantum-classical distances unavailable: {exc}")

    return SweepReport(preset=curves.preset, kind=curves.kind, growth_model=model,
                       fit_window=window, limit_fit=limit_fit, rows=tuple(rows),
                       scalings=scalings, distances=distances,
                       distance_window=distance_window, notes=tuple(notes))
