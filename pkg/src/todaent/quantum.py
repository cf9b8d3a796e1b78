"""Truncated-basis quantum mechanics for the two-particle exponential chain.

The Hamiltonian is represented over the product eigenbasis of two
uncoupled harmonic oscillators of unit mass and frequency ``omega``
(an auxiliary choice; physical results must not depend on it).  Matrix
elements of e^{alpha q} are analytic in this basis:

    <m| e^{alpha q} |n> = e^{b^2/2} sqrt(n!/m!) b^{m-n} L_n^{(m-n)}(-b^2),
    b = alpha sqrt(hbar / (2 omega)),  m >= n,

with generalized Laguerre polynomials L and symmetric completion for
m < n.  Factorial ratios are evaluated in log space, so cutoffs up to a
few hundred are safe.

The full pipeline is: assemble the Hamiltonian over an admitted set of
mode pairs, diagonalize it densely, expand a separable coherent state,
propagate it spectrally, trace out one particle, and take the
von Neumann entropy of the reduced state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.special import eval_genlaguerre, gammaln

from .curves import KIND_QUANTUM, CurveTag, EntropyCurve
from .dynamics import ModelParams, PhaseState
from .errors import (BasisMismatchError, ConfigurationError, DensityInvariantError,
                     EigensolverError, OverflowGuardError, TruncationDeficitError)

#: Norm loss allowed when a state is admitted into a truncated basis.
DEFICIT_TOL = 1e-8


@dataclass(frozen=True)
class BasisSpec:
    """Product basis of two unit-mass oscillators with a pair cutoff.

    Pairs (n1, n2) are admitted when n1 <= n_max and n2 <= n_max and,
    if ``n_sum_max`` is set, n1 + n2 <= n_sum_max.  The flat index runs
    lexicographically over admitted pairs.
    """

    hbar: float
    n_max: int
    omega: float = 1.0
    n_sum_max: int | None = None

    def __post_init__(self):
        if not self.hbar > 0.0:
            raise ConfigurationError(f"hbar must be positive, got {self.hbar}")
        if not self.omega > 0.0:
            raise ConfigurationError(f"omega must be positive, got {self.omega}")
        if self.n_max < 0:
            raise ConfigurationError(f"n_max must be >= 0, got {self.n_max}")
        if self.n_sum_max is not None and self.n_sum_max < 0:
            raise ConfigurationError(f"n_sum_max must be >= 0, got {self.n_sum_max}")

    @property
    def mode_dim(self) -> int:
        return self.n_max + 1

    @cached_property
    def pairs(self) -> np.ndarray:
        """Admitted (n1, n2) pairs, shape (D, 2), lexicographic order."""
        n = np.arange(self.mode_dim)
        n1, n2 = np.meshgrid(n, n, indexing="ij")
        n1, n2 = n1.ravel(), n2.ravel()
        if self.n_sum_max is not None:
            keep = n1 + n2 <= self.n_sum_max
            n1, n2 = n1[keep], n2[keep]
        out = np.column_stack([n1, n2])
        out.setflags(write=False)
        return out

    @property
    def dim(self) -> int:
        return len(self.pairs)

    @cached_property
    def index_lookup(self) -> np.ndarray:
        """Map (n1, n2) -> flat index, -1 for pairs outside the cutoff."""
        table = np.full((self.mode_dim, self.mode_dim), -1, dtype=np.int64)
        table[self.pairs[:, 0], self.pairs[:, 1]] = np.arange(self.dim)
        table.setflags(write=False)
        return table

    def index_of(self, n1: int, n2: int) -> int:
        idx = int(self.index_lookup[n1, n2])
        if idx < 0:
            raise ConfigurationError(f"pair ({n1}, {n2}) is outside the basis cutoff")
        return idx


def ho_exp_matrix(alpha: float, basis: BasisSpec) -> np.ndarray:
    """Single-mode matrix <m| e^{alpha q} |n> for the basis oscillator."""
    d = basis.mode_dim
    if alpha == 0.0:
        return np.eye(d)
    beta = alpha * math.sqrt(basis.hbar / (2.0 * basis.omega))
    n = np.arange(d)
    mg, ng = np.meshgrid(n, n, indexing="ij")
    lower = mg >= ng
    m_lo, n_lo = mg[lower], ng[lower]
    k = m_lo - n_lo
    log_mag = (0.5 * (gammaln(n_lo + 1.0) - gammaln(m_lo + 1.0))
               + k * math.log(abs(beta)) + 0.5 * beta * beta)
    # L_n^{(k)}(-beta^2) is a sum of positive terms: no cancellation
    lag = eval_genlaguerre(n_lo, k, -beta * beta)
    sign = np.where(k % 2 == 0, 1.0, math.copysign(1.0, beta))
    vals = sign * np.exp(log_mag) * lag
    out = np.zeros((d, d))
    out[m_lo, n_lo] = vals
    out[n_lo, m_lo] = vals
    if not np.all(np.isfinite(out)):
        raise OverflowGuardError(
            f"e^(alpha q) matrix overflowed for alpha={alpha}, beta={beta:.3g} "
            f"(valid range is |beta| <~ 10)")
    return out


def ho_p2_matrix(basis: BasisSpec) -> np.ndarray:
    """Single-mode matrix <m| p^2 |n> for the unit-mass basis oscillator."""
    d = basis.mode_dim
    hw = basis.hbar * basis.omega
    n = np.arange(d)
    out = np.diag(hw * (n + 0.5))
    if d > 2:
        off = -0.5 * hw * np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
        out[n[:-2] + 2, n[:-2]] = off
        out[n[:-2], n[:-2] + 2] = off
    return out


def ho_q2_matrix(basis: BasisSpec) -> np.ndarray:
    """Single-mode matrix <m| q^2 |n>; companion of :func:`ho_p2_matrix`."""
    d = basis.mode_dim
    c = basis.hbar / (2.0 * basis.omega)
    n = np.arange(d)
    out = np.diag(c * (2.0 * n + 1.0))
    if d > 2:
        off = c * np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
        out[n[:-2] + 2, n[:-2]] = off
        out[n[:-2], n[:-2] + 2] = off
    return out


def build_hamiltonian(params: ModelParams, basis: BasisSpec) -> np.ndarray:
    """Assemble the D x D Hamiltonian matrix over the admitted pairs.

    The coupling term factorizes as e^{-(q2-q1)} = e^{q1} (x) e^{-q2}, so
    every term is a tensor product of single-mode matrices; the result is
    exactly symmetric by construction.
    """
    pairs = basis.pairs
    i, j = pairs[:, 0], pairs[:, 1]
    d = basis.dim
    t = ho_p2_matrix(basis)
    e_minus = ho_exp_matrix(-1.0, basis)
    e_plus = ho_exp_matrix(1.0, basis)
    eye = np.eye(basis.mode_dim)
    terms = (
        (t / (2.0 * params.m1), eye),   # kinetic, particle 1
        (eye, t / (2.0 * params.m2)),   # kinetic, particle 2
        (e_minus, eye),                 # e^{-q1}
        (e_plus, e_minus),              # e^{-(q2-q1)}
        (eye, e_plus),                  # e^{q2}
    )
    h = np.zeros((d, d))
    for x, y in terms:
        xg = x[np.ix_(i, i)]
        yg = y[np.ix_(j, j)]
        np.multiply(xg, yg, out=xg)
        h += xg
        del xg, yg
    h[np.diag_indices(d)] -= 3.0
    return h


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthogonal eigenvector columns of H."""

    basis: BasisSpec
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    model: ModelParams | None = None

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    def orthogonality_residual(self) -> float:
        v = self.eigenvectors
        g = v.T @ v
        g[np.diag_indices_from(g)] -= 1.0
        return float(np.abs(g).max())


def spectral_decompose(h: np.ndarray, basis: BasisSpec,
                       model: ModelParams | None = None,
                       validate: bool = True) -> SpectralDecomposition:
    """Full symmetric eigensolution of an assembled Hamiltonian.

    Verifies orthogonality (sup-norm 1e-8), reconstruction (relative
    Frobenius 1e-8) and spectrum positivity (>= -1e-6; the potential
    minimum is zero, so the operator is positive semidefinite and any
    sizable negative eigenvalue signals corruption).
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConfigurationError(f"Hamiltonian must be square, got shape {h.shape}")
    if h.shape[0] != basis.dim:
        raise ConfigurationError(
            f"Hamiltonian dimension {h.shape[0]} does not match basis dimension {basis.dim}")
    sym_res = float(np.abs(h - h.T).max())
    if sym_res > 1e-12 * max(1.0, float(np.abs(h).max())):
        raise ConfigurationError(f"matrix is not symmetric (residual {sym_res:.3e})")
    try:
        w, v = scipy.linalg.eigh(h, driver="evd")
    except Exception as exc:  # LinAlgError or LAPACK failure
        finite = int(np.isfinite(h).sum())
        raise EigensolverError(
            f"dense eigensolution failed for D={h.shape[0]} "
            f"({finite}/{h.size} finite entries): {exc}") from exc
    dec = SpectralDecomposition(basis, w, v, model)
    if validate:
        orth = dec.orthogonality_residual()
        if orth > 1e-8:
            raise EigensolverError(f"eigenvector orthogonality residual {orth:.3e} > 1e-8")
        recon = (v * w) @ v.T
        rel = float(np.linalg.norm(recon - h) / np.linalg.norm(h))
        if rel > 1e-8:
            raise EigensolverError(f"reconstruction residual {rel:.3e} > 1e-8")
        if w[0] < -1e-6:
            raise EigensolverError(
                f"smallest eigenvalue {w[0]:.3e} below -1e-6; the operator is "
                f"positive semidefinite, so this matrix is corrupt")
    return dec


@dataclass(frozen=True)
class WaveVector:
    """Complex coefficients of a two-particle state over the product basis."""

    basis: BasisSpec
    coefficients: np.ndarray
    deficit: float | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        object.__setattr__(self, "coefficients", c)
        if c.shape != (self.basis.dim,):
            raise ConfigurationError(
                f"coefficient length {c.shape} does not match basis dimension {self.basis.dim}")
        c.setflags(write=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


def coherent_alpha(q: float, p: float, hbar: float, omega: float) -> complex:
    """Coherent-state label for a unit-mass oscillator of frequency omega."""
    return complex(q * math.sqrt(omega / (2.0 * hbar)), p / math.sqrt(2.0 * omega * hbar))


def coherent_mode_coefficients(alpha: complex, n_max: int) -> np.ndarray:
    """Single-mode expansion c_n = e^{-|a|^2/2} a^n / sqrt(n!), log-space stable."""
    n = np.arange(n_max + 1)
    a2 = abs(alpha) ** 2
    if a2 == 0.0:
        out = np.zeros(n_max + 1, dtype=np.complex128)
        out[0] = 1.0
        return out
    log_mag = -0.5 * a2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1.0)
    phase = n * np.angle(alpha)
    return np.exp(log_mag) * np.exp(1j * phase)


def _poisson_tail_quantile(lam: float, tail: float, n_cap: int = 100_000) -> int:
    """Smallest n with P(Poisson(lam) > n) <= tail."""
    if lam == 0.0:
        return 0
    log_pmf = -lam
    cum = math.exp(log_pmf)
    n = 0
    while 1.0 - cum > tail and n < n_cap:
        n += 1
        log_pmf += math.log(lam / n)
        cum += math.exp(log_pmf)
    return n


def required_n_max(center: PhaseState, hbar: float, omega: float = 1.0,
                   deficit_tol: float = DEFICIT_TOL) -> int:
    """Single-mode cutoff needed to hold the coherent state at ``center``.

    Mode occupations are Poisson with mean |alpha|^2; the cutoff is sized
    so each mode keeps its tail below half the total deficit budget.
    """
    a1 = coherent_alpha(center.q1, center.p1, hbar, omega)
    a2 = coherent_alpha(center.q2, center.p2, hbar, omega)
    per_mode = deficit_tol / 4.0
    return max(_poisson_tail_quantile(abs(a1) ** 2, per_mode),
               _poisson_tail_quantile(abs(a2) ** 2, per_mode))


def coherent_coefficients(center: PhaseState, basis: BasisSpec,
                          deficit_tol: float = DEFICIT_TOL) -> WaveVector:
    """Separable coherent state centered at ``center``, in the product basis.

    Both particles use the same unit-mass, frequency-omega oscillator
    width, regardless of the model masses.  Raises
    :class:`TruncationDeficitError` when the truncated norm loss
    1 - ||c||^2 exceeds ``deficit_tol``, naming the cutoff that would
    suffice.
    """
    a1 = coherent_alpha(center.q1, center.p1, basis.hbar, basis.omega)
    a2 = coherent_alpha(center.q2, center.p2, basis.hbar, basis.omega)
    c1 = coherent_mode_coefficients(a1, basis.n_max)
    c2 = coherent_mode_coefficients(a2, basis.n_max)
    pairs = basis.pairs
    coeffs = c1[pairs[:, 0]] * c2[pairs[:, 1]]
    deficit = max(0.0, 1.0 - float(np.vdot(coeffs, coeffs).real))
    if deficit > deficit_tol:
        need = required_n_max(center, basis.hbar, basis.omega, deficit_tol)
        raise TruncationDeficitError(
            f"coherent state loses {deficit:.3e} of its norm at n_max={basis.n_max} "
            f"(tolerance {deficit_tol:.1e}); n_max >= {need} would suffice",
            deficit=deficit, required_n_max=need)
    return WaveVector(basis, coeffs, deficit=deficit)


def _propagate(dec: SpectralDecomposition, a_re: np.ndarray, a_im: np.ndarray,
               t: float) -> np.ndarray:
    """psi(t) = V exp(-i L t / hbar) a, where a = V^T psi(0), split re/im.

    The eigenvector matrix stays real throughout, avoiding a complex
    upcast of the (possibly large) V.
    """
    theta = dec.eigenvalues * (-t / dec.basis.hbar)
    c, s = np.cos(theta), np.sin(theta)
    b_re = c * a_re - s * a_im
    b_im = s * a_re + c * a_im
    v = dec.eigenvectors
    return (v @ b_re) + 1j * (v @ b_im)


def evolve(psi0: WaveVector, t: float, dec: SpectralDecomposition) -> WaveVector:
    """Spectral time evolution of a state under a diagonalized Hamiltonian."""
    if psi0.basis != dec.basis:
        raise BasisMismatchError("state and spectral decomposition use different bases")
    v = dec.eigenvectors
    a_re = v.T @ psi0.coefficients.real
    a_im = v.T @ psi0.coefficients.imag
    return WaveVector(psi0.basis, _propagate(dec, a_re, a_im, t))


def energy_expectation(psi: WaveVector, dec: SpectralDecomposition) -> float:
    """<psi| H |psi> via the spectral representation."""
    if psi.basis != dec.basis:
        raise BasisMismatchError("state and spectral decomposition use different bases")
    v = dec.eigenvectors
    a_re = v.T @ psi.coefficients.real
    a_im = v.T @ psi.coefficients.imag
    return float(np.sum(dec.eigenvalues * (a_re * a_re + a_im * a_im)))


@dataclass(frozen=True)
class ReducedDensity:
    """Reduced density matrix of one particle."""

    dimension: int
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.complex128)
        object.__setattr__(self, "entries", e)
        if e.shape != (self.dimension, self.dimension):
            raise ConfigurationError(f"entries must be {self.dimension} square, got {e.shape}")
        e.setflags(write=False)


def reduced_density(psi: WaveVector, particle: int = 1,
                    norm_tol: float = 1e-6) -> ReducedDensity:
    """Partial trace of |psi><psi| over the other particle.

    Coefficients of pairs outside the cutoff are zero by definition, so a
    sum-cutoff basis embeds into the full rectangular coefficient grid.
    """
    if particle not in (1, 2):
        raise ConfigurationError(f"particle must be 1 or 2, got {particle}")
    nrm2 = float(np.vdot(psi.coefficients, psi.coefficients).real)
    if abs(nrm2 - 1.0) > norm_tol:
        raise ConfigurationError(
            f"state squared norm {nrm2!r} is not within {norm_tol:.1e} of 1")
    d = psi.basis.mode_dim
    grid = np.zeros((d, d), dtype=np.complex128)
    pairs = psi.basis.pairs
    grid[pairs[:, 0], pairs[:, 1]] = psi.coefficients
    if particle == 1:
        rho = grid @ grid.conj().T
    else:
        rho = grid.T @ grid.conj()
    herm = float(np.abs(rho - rho.conj().T).max())
    if herm > 1e-10:
        raise DensityInvariantError(f"hermiticity residual {herm:.3e} > 1e-10")
    rho = 0.5 * (rho + rho.conj().T)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-8:
        raise DensityInvariantError(f"trace {tr!r} is not within 1e-8 of 1")
    return ReducedDensity(d, rho)


def von_neumann_entropy(rho: ReducedDensity) -> float:
    """S = -Tr(rho ln rho), with eigenvalues clipped to [0, 1] and 0 ln 0 = 0."""
    w = np.linalg.eigvalsh(rho.entries)
    if float(w.min()) < -1e-6:
        raise DensityInvariantError(
            f"eigenvalue {w.min():.3e} below -1e-6: not a density matrix")
    w = np.clip(w, 0.0, 1.0)
    w = w[w > 0.0]
    return max(float(-(w * np.log(w)).sum()), 0.0)


def entanglement_entropies(psi: WaveVector) -> tuple[float, float]:
    """Entropies of both reduced states (equal for a pure state)."""
    return (von_neumann_entropy(reduced_density(psi, 1)),
            von_neumann_entropy(reduced_density(psi, 2)))


def entanglement_curve(params: ModelParams, basis: BasisSpec, center: PhaseState,
                       times, particle: int = 1,
                       decomposition: SpectralDecomposition | None = None,
                       preset: str = "custom") -> EntropyCurve:
    """Entanglement entropy S(t) of a coherent state evolved from ``center``."""
    c1, c2 = entanglement_curve_pair(params, basis, center, times,
                                     decomposition=decomposition, preset=preset)
    return c1 if particle == 1 else c2


def entanglement_curve_pair(params: ModelParams, basis: BasisSpec, center: PhaseState,
                            times, decomposition: SpectralDecomposition | None = None,
                            preset: str = "custom") -> tuple[EntropyCurve, EntropyCurve]:
    """Entanglement curves for both particles, sharing one propagation."""
    times = np.asarray(times, dtype=float)
    if decomposition is None:
        decomposition = spectral_decompose(build_hamiltonian(params, basis), basis, params)
    elif decomposition.basis != basis:
        raise BasisMismatchError("decomposition basis does not match the requested basis")
    psi0 = coherent_coefficients(center, basis)
    v = decomposition.eigenvectors
    a_re = v.T @ psi0.coefficients.real
    a_im = v.T @ psi0.coefficients.imag
    s1 = np.empty(len(times))
    s2 = np.empty(len(times))
    for k, t in enumerate(times):
        psi_t = WaveVector(basis, _propagate(decomposition, a_re, a_im, float(t)))
        s1[k], s2[k] = entanglement_entropies(psi_t)
    tag = CurveTag(kind=KIND_QUANTUM, preset=preset, hbar=basis.hbar)
    return (EntropyCurve(times, s1, tag, particle=1),
            EntropyCurve(times, s2, tag, particle=2))


def truncation_shift(params: ModelParams, basis: BasisSpec, center: PhaseState,
                     times, bump: int = 10) -> float:
    """Max |S(t)| change when the cutoff grows by ``bump`` (convergence guard).

    Run once per (hbar, preset); a shift above ~1e-3 means the basis is
    too small for the requested time window.
    """
    bigger = BasisSpec(hbar=basis.hbar, n_max=basis.n_max + bump,
                       omega=basis.omega, n_sum_max=basis.n_sum_max)
    c_small = entanglement_curve(params, basis, center, times)
    c_big = entanglement_curve(params, bigger, center, times)
    return float(np.abs(c_small.values - c_big.values).max())
