"""Command line entry point: ``legquant run | validate | emit-plots | list-builtins``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, LegquantError
from ..legendrian import BUILTINS
from .config import builtin_config_names, load_config
from .runner import PLOT_KINDS, THREADS_ENV, default_threads, emit_plot_data, run, write_results


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="legquant", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="YAML path or bundled config name")
    r.add_argument("--out-dir", type=Path, help="output directory (default: config output.dir/<id>)")
    r.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    r.add_argument("--k-min", type=int)
    r.add_argument("--k-max", type=int)
    r.add_argument("--no-cache", action="store_true", help="do not read or write the sequence cache")

    v = sub.add_parser("validate", help="check a config against the schema")
    v.add_argument("--config", required=True)

    e = sub.add_parser("emit-plots", help="write plot tables from a results directory")
    e.add_argument("--results", type=Path, required=True)
    e.add_argument("--kind", choices=PLOT_KINDS, required=True)
    e.add_argument("--out-dir", type=Path, help="default: <results>/plots")

    sub.add_parser("list-builtins", help="list bundled configs and Legendrian families")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list-builtins":
            print("configs:")
            for name in builtin_config_names():
                print(f"  {name}")
            print("legendrian families:")
            for name in sorted(BUILTINS):
                print(f"  {name}")
            return 0
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"{cfg.source}: valid (id={cfg.id}, hash={cfg.config_hash})")
            return 0
        if args.command == "emit-plots":
            files = emit_plot_data(args.results, args.kind, args.out_dir or args.results / "plots")
            for f in files:
                print(f)
            return 0
        cfg = load_config(args.config)
        if args.k_min is not None and args.k_max is not None and args.k_min > args.k_max:
            raise ConfigError("--k-min exceeds --k-max")
        out = args.out_dir or Path(cfg.output_dir) / cfg.id
        cache = None if args.no_cache else out / ".cache"
        rs = run(cfg, threads=args.threads or default_threads(), k_min=args.k_min, k_max=args.k_max, cache_dir=cache)
        if not rs.records:
            raise ConfigError("the k overrides leave no levels to compute")
        write_results(rs, out)
        for c in rs.checks:
            vp = ";".join(map(str, c.varpi))
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.probe_id}{' varpi=' + vp if vp else ''}: {c.detail}")
        print(f"results written to {out}")
        return 0 if rs.passed else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LegquantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
