"""Command-line interface.

Verbs: ``run`` (full experiment), ``quantum`` / ``classical`` /
``poincare`` (single cell families), ``analyze`` (re-run analysis on an
existing artifact directory), ``cache`` (inspect or purge the spectral
cache).  Flags mirror config keys and override the config file; the
``TODAENT_CACHE_DIR`` environment variable overrides the configured
cache directory (flags override both).

Exit codes: 0 success, 1 configuration error, 2 numerical-guard
violation, 3 partial sweep failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__, cache
from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigurationError, TodaentError
from .harness import ALL_PARTS, run_experiment

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GUARD = 2
EXIT_PARTIAL = 3

_OVERRIDE_FLAGS = {
    # flag name -> (config key, parser)
    "preset": ("preset", str),
    "seed": ("seed", int),
    "output_dir": ("output_dir", str),
    "cache_dir": ("cache_dir", str),
    "workers": ("workers", int),
    "m_points": ("m_points", int),
    "dt": ("dt", float),
    "t_max": ("t_max", float),
    "n_intervals": ("n_intervals", int),
    "omega": ("omega", float),
    "n_max": ("n_max", int),
    "hbar": ("hbar_schedule", lambda s: tuple(float(x) for x in s.split(",") if x.strip())),
    "delta": ("delta_schedule", lambda s: tuple(float(x) for x in s.split(",") if x.strip())),
    "poincare_orbits": ("poincare_orbits", int),
    "poincare_crossings": ("poincare_crossings", int),
    "tail_fraction": ("tail_fraction", float),
}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("-c", "--config", help="config file (key = value text)")
    p.add_argument("--preset", choices=("regular", "chaotic", "custom"))
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--m-points", dest="m_points", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--n-intervals", dest="n_intervals", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--hbar", help="comma-separated hbar schedule")
    p.add_argument("--delta", help="comma-separated delta schedule")
    p.add_argument("--poincare-orbits", dest="poincare_orbits", type=int)
    p.add_argument("--poincare-crossings", dest="poincare_crossings", type=int)
    p.add_argument("--tail-fraction", dest="tail_fraction", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="todaent",
        description="Entanglement-entropy dynamics of the two-particle Toda chain")
    parser.add_argument("--version", action="version", version=f"todaent {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for verb, help_ in (("run", "full experiment: all cells plus analysis"),
                        ("quantum", "quantum entropy curves only"),
                        ("classical", "classical entropy curves only"),
                        ("poincare", "surface of section only"),
                        ("analyze", "re-run analysis on existing curve files")):
        p = sub.add_parser(verb, help=help_)
        _add_common(p)
        if verb == "analyze":
            p.add_argument("--artifacts", help="artifact directory (defaults to output_dir)")

    p = sub.add_parser("cache", help="inspect or purge the spectral cache")
    p.add_argument("action", choices=("list", "purge"))
    p.add_argument("--cache-dir", dest="cache_dir", default="spectral-cache")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for flag, (key, conv) in _OVERRIDE_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = conv(val) if isinstance(val, str) else val
    env_cache = os.environ.get("TODAENT_CACHE_DIR")
    if env_cache and "cache_dir" not in overrides:
        overrides["cache_dir"] = env_cache
    if args.config:
        return load_config(args.config, overrides)
    return parse_config("", overrides)


def _exit_code(result) -> int:
    if not result.failures:
        return EXIT_OK
    n_files = len(result.files)
    if n_files > 0:
        return EXIT_PARTIAL
    first = result.failures[0][1]
    return EXIT_CONFIG if first.startswith(("ConfigurationError", "BasisMismatchError")) \
        else EXIT_GUARD


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "cache":
            if args.action == "list":
                for header in cache.list_entries(args.cache_dir):
                    print(f"{header['file']}: dim={header.get('dim')} "
                          f"hbar={header.get('hbar')} omega={header.get('omega')} "
                          f"n_max={header.get('n_max')} m1={header.get('m1')} "
                          f"m2={header.get('m2')}")
            else:
                n = cache.purge(args.cache_dir)
                print(f"removed {n} cache entries")
            return EXIT_OK

        cfg = _config_from_args(args)
        if args.command == "run":
            parts = ALL_PARTS
        elif args.command == "analyze":
            parts = ("analysis",)
            if getattr(args, "artifacts", None):
                from dataclasses import replace
                cfg = replace(cfg, output_dir=args.artifacts)
            if not Path(cfg.output_dir).exists():
                raise ConfigurationError(f"artifact directory {cfg.output_dir} does not exist")
        else:
            parts = (args.command,)
        result = run_experiment(cfg, parts=parts)
        for cell, err in result.failures:
            log.error("cell %s failed: %s", cell, err)
        code = _exit_code(result)
        log.info("artifacts in %s (%d files, %d failures) -> exit %d",
                 result.artifact_dir, len(result.files), len(result.failures), code)
        return code
    except ConfigurationError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except TodaentError as exc:
        log.error("%s", exc)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
