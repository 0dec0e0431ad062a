"""Command-line entry point: ``mbdyn run|preset|list-presets``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, NumericalError
from .harness import (
    PRESETS,
    config_from_mapping,
    load_config,
    parse_config_text,
    preset,
    run_experiment,
    write_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("mbdyn")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", type=Path, help="output CSV path (default <name>.csv)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--realizations", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--model", choices=("spin-chain", "tbri"))
    p.add_argument("--k0", help="'spectrum-center' or a basis index")
    p.add_argument("--outputs", help="comma-separated subset of outputs")
    p.add_argument("--epsilons", help="comma-separated perturbation strengths")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="model parameter override, e.g. --set J=100 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mbdyn", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a config file or preset")
    run.add_argument("--preset", choices=sorted(PRESETS), help="start from a preset")
    _add_run_flags(run)
    pre = sub.add_parser("preset", help="run a named preset")
    pre.add_argument("name", choices=sorted(PRESETS))
    _add_run_flags(pre)
    sub.add_parser("list-presets", help="print preset names")
    return ap


def _flag_mapping(args) -> dict:
    lines = []
    for key in ("seed", "realizations", "steps", "t_max", "model", "k0", "outputs", "epsilons"):
        value = getattr(args, key)
        if value is not None:
            lines.append(f"{key} = {value}")
    if args.overrides:
        lines.append("[model]")
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            lines.append(item)
    return parse_config_text("\n".join(lines))


def resolve_config(args):
    name = getattr(args, "name", None) or getattr(args, "preset", None)
    cfg = preset(name) if name else None
    if args.config is not None:
        cfg = load_config(args.config, cfg)
    if cfg is None:
        raise ConfigError("need --config or a preset")
    return config_from_mapping(_flag_mapping(args), cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list-presets":
        for name in sorted(PRESETS):
            print(name)
        return EXIT_OK
    try:
        cfg = resolve_config(args)
        out = args.out or Path(f"{cfg.name}.csv")
        log.info("running %s: %d realizations, seed %d", cfg.name, cfg.realizations, cfg.seed)
        result = run_experiment(cfg, threads=args.threads)
        write_csv(result, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    for (label, q), (m, e) in result.scalars.items():
        print(f"  {label or '-'}  {q} = {m:.6g} +- {e:.2g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
