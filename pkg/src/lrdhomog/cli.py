"""Command line entry point.

    lrdhomog rate --config configs/rate_laplace.json --seed 7 --threads 2 --out results/
    lrdhomog report --out results/

Exit codes: 0 all verdicts pass, 2 a verdict failed, 1 execution error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config

log = logging.getLogger("lrdhomog")

SUBCOMMANDS = {
    "rate": "rate",
    "fluct": "fluctuation-dist",
    "autocov": "autocov",
    "hermite": "hermite-var",
    "isometry": "isometry",
}

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="lrdhomog", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, type=Path, help="experiment JSON")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    p = sub.add_parser("report", help="summarise result JSON files")
    p.add_argument("--out", type=Path, default=Path("results"), help="directory with result files")
    p.add_argument("--config", type=Path, default=None, help=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--threads", type=int, default=1, help=argparse.SUPPRESS)
    return parser


def _run(args):
    from .experiments import run_experiment

    cfg = load_config(args.config)
    kind = SUBCOMMANDS[args.command]
    if cfg.kind != kind:
        raise ValueError(f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    out = args.out if args.out is not None else Path(cfg.output)
    table = run_experiment(cfg, threads=args.threads)
    stem = cfg.name or args.config.stem
    csv_path, json_path = table.write(out, stem)
    for v in table.verdicts:
        print(v.line())
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if table.passed else EXIT_FAILED


def _report(args):
    files = sorted(Path(args.out).glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no result summaries in {args.out}")
    ok = True
    for path in files:
        summary = json.loads(path.read_text())
        if "verdicts" not in summary:
            continue
        print(f"[{summary['experiment']}] {path.stem}")
        for v in summary["verdicts"]:
            status = "PASS" if v["passed"] else "FAIL"
            print(f"  {status} {v['name']}: {v['value']:.6g}")
            ok &= bool(v["passed"])
    return EXIT_OK if ok else EXIT_FAILED


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return _report(args)
        return _run(args)
    except Exception as exc:  # noqa: BLE001
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
