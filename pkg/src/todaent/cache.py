"""On-disk cache of spectral decompositions.

One file per (model, basis), keyed by a content hash of every parameter
plus the format version.  The layout is a single JSON header line
followed by raw little-endian float64 blocks: first the D eigenvalues,
then the D x D eigenvector matrix in C (row-major) order with
eigenvectors in columns.  The header records a SHA-256 of the payload,
so truncation or bit rot is detected on load and answered by a rebuild;
a well-formed entry that fails the orthogonality invariant is a hard
error (the cache would otherwise silently poison every curve built on
top of it).
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .dynamics import ModelParams
from .errors import CacheCorruptionError, CacheIntegrityError
from .quantum import BasisSpec, SpectralDecomposition, build_hamiltonian, spectral_decompose

log = logging.getLogger(__name__)

FORMAT_NAME = "todaent-spectral"
FORMAT_VERSION = 1

#: Orthogonality residual allowed for a loaded decomposition.
ORTHOGONALITY_TOL = 1e-8


def cache_key(params: ModelParams, basis: BasisSpec) -> str:
    canon = (f"{FORMAT_NAME}|v{FORMAT_VERSION}"
             f"|m1={params.m1!r}|m2={params.m2!r}|E={params.energy!r}"
             f"|hbar={basis.hbar!r}|omega={basis.omega!r}"
             f"|n_max={basis.n_max}|n_sum_max={basis.n_sum_max}")
    return hashlib.sha256(canon.encode()).hexdigest()


def entry_path(cache_dir: Path, params: ModelParams, basis: BasisSpec) -> Path:
    return Path(cache_dir) / f"{cache_key(params, basis)}.eig"


def save_spectral(path: Path, dec: SpectralDecomposition) -> None:
    basis, model = dec.basis, dec.model
    w = np.ascontiguousarray(dec.eigenvalues, dtype="<f8")
    v = np.ascontiguousarray(dec.eigenvectors, dtype="<f8")
    payload = w.tobytes() + v.tobytes()
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dim": int(basis.dim),
        "dtype": "<f8",
        "order": "C",
        "hbar": basis.hbar,
        "omega": basis.omega,
        "n_max": basis.n_max,
        "n_sum_max": basis.n_sum_max,
        "m1": model.m1 if model else None,
        "m2": model.m2 if model else None,
        "energy": model.energy if model else None,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = (json.dumps(header, sort_keys=True) + "\n").encode() + payload
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


def read_header(path: Path) -> dict:
    with open(path, "rb") as fh:
        line = fh.readline()
    try:
        header = json.loads(line.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CacheCorruptionError(f"unreadable cache header in {path}: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise CacheCorruptionError(f"{path} is not a {FORMAT_NAME} file")
    return header


def load_spectral(path: Path, params: ModelParams, basis: BasisSpec) -> SpectralDecomposition:
    """Load and revalidate one cache entry.

    Raises :class:`CacheCorruptionError` for anything malformed (callers
    may rebuild) and :class:`CacheIntegrityError` when a well-formed
    entry fails the orthogonality invariant.
    """
    path = Path(path)
    header = read_header(path)
    if header.get("version") != FORMAT_VERSION:
        raise CacheCorruptionError(
            f"{path} has format version {header.get('version')}, expected {FORMAT_VERSION}")
    d = header.get("dim")
    if d != basis.dim:
        raise CacheCorruptionError(f"{path} holds dimension {d}, expected {basis.dim}")
    with open(path, "rb") as fh:
        fh.readline()
        payload = fh.read()
    expected = (d + d * d) * 8
    if len(payload) != expected:
        raise CacheCorruptionError(
            f"{path} payload is {len(payload)} bytes, expected {expected}")
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("payload_sha256"):
        raise CacheCorruptionError(f"{path} payload checksum mismatch")
    w = np.frombuffer(payload[:d * 8], dtype="<f8").astype(np.float64)
    v = np.frombuffer(payload[d * 8:], dtype="<f8").astype(np.float64).reshape(d, d)
    dec = SpectralDecomposition(basis, w, v, params)
    orth = dec.orthogonality_residual()
    if orth > ORTHOGONALITY_TOL:
        raise CacheIntegrityError(
            f"loaded decomposition {path} has orthogonality residual {orth:.3e} "
            f"> {ORTHOGONALITY_TOL:.1e}")
    return dec


def cache_get_or_build(params: ModelParams, basis: BasisSpec, cache_dir) -> SpectralDecomposition:
    """Load the decomposition for (params, basis), building it on a miss.

    Concurrent builders of the same key are serialized by an advisory
    file lock; losers find the winner's file and just load it.  Corrupt
    entries are rebuilt with a warning.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = entry_path(cache_dir, params, basis)

    def try_load():
        if not path.exists():
            return None
        try:
            return load_spectral(path, params, basis)
        except CacheCorruptionError as exc:
            log.warning("rebuilding corrupt cache entry: %s", exc)
            return None

    dec = try_load()
    if dec is not None:
        return dec

    lock_path = path.with_suffix(".lock")
    with open(lock_path, "w") as lock_fh:
        fcntl.flock(lock_fh, fcntl.LOCK_EX)
        try:
            dec = try_load()  # a concurrent builder may have won the race
            if dec is not None:
                return dec
            log.info("building spectral decomposition (D=%d, hbar=%g)", basis.dim, basis.hbar)
            built = spectral_decompose(build_hamiltonian(params, basis), basis, params)
            save_spectral(path, built)
        finally:
            fcntl.flock(lock_fh, fcntl.LOCK_UN)
    # serve every caller from the file so cold and warm runs are bitwise alike
    return load_spectral(path, params, basis)


def list_entries(cache_dir) -> list[dict]:
    """Headers of all entries in a cache directory, with file names."""
    out = []
    for path in sorted(Path(cache_dir).glob("*.eig")):
        try:
            header = read_header(path)
        except CacheCorruptionError:
            header = {"format": "corrupt"}
        header["file"] = path.name
        out.append(header)
    return out


def purge(cache_dir) -> int:
    """Remove all cache entries; returns the number of files deleted."""
    n = 0
    for path in Path(cache_dir).glob("*.eig"):
        path.unlink()
        n += 1
    for path in Path(cache_dir).glob("*.lock"):
        path.unlink()
    return n
