"""Command-line entry point (``qnn``).

Exit codes: 0 success, 2 validation error, 3 training divergence.
Bad usage is also 2, which is what argparse already returns.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from dynlearn import experiments, presets
from dynlearn.errors import DivergenceError, PropagationError, ValidationError
from dynlearn.experiments import RunConfig
from dynlearn.weights import WeightFile

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def _float(text: str) -> float:
    t = text.strip().lower()
    scale = 1.0
    for suffix in ("pi", "π"):
        if t.endswith(suffix):
            head = t[: -len(suffix)].rstrip("*")
            scale = math.pi
            t = head or "1"
    try:
        return float(t) * scale
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _base_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.merged(eta=getattr(args, "eta", None), epochs=getattr(args, "epochs", None),
                      units=getattr(args, "units", None))


def cmd_train(args) -> int:
    cfg = _base_config(args)
    result = experiments.run_training(args.preset, cfg)
    out = Path(args.out or f"{args.preset}.weights.json")
    result.weights.save(out)
    hist = Path(args.history) if args.history else out.with_suffix(".history.csv")
    hist.write_text(result.history_csv(), encoding="utf-8")
    prov = result.weights.provenance
    print(f"wrote {out} and {hist}")
    print(f"epochs {prov.epochs}, final {prov.final_rms:.6g}")
    for label, value in result.outputs.items():
        print(f"  {label}: {value:.6g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    wf = WeightFile.load(args.weights)
    seed = RunConfig(seed=args.seed).resolved_seed()
    res = experiments.run_eval(wf, args.set, units=args.units, seed=seed)
    _emit(res.csv(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    wf = WeightFile.load(args.weights)
    fixed = {}
    for item in args.fixed or []:
        key, eq, val = item.partition("=")
        if not eq:
            raise ValidationError(f"--fixed expects key=value, got {item!r}")
        fixed[key] = val if key == "variant" else _float(val)
    res = experiments.run_sweep(wf, args.family, args.param, args.start, args.stop, args.points,
                                fixed, units=args.units)
    _emit(res.csv(), args.out)
    return EXIT_OK


def cmd_scan(args) -> int:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"bad --values list {args.values!r}") from None
    res = experiments.run_target_scan(values, _base_config(args))
    _emit(res.csv(), args.out)
    return EXIT_OK


def cmd_describe(args) -> int:
    info = presets.get(args.preset).describe()
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_replay(args) -> int:
    _emit(experiments.replay_report(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qnn", description="Train and evaluate two-qubit dynamic-learning models.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a preset and write a weight file")
    t.add_argument("preset")
    t.add_argument("--config", help="JSON file of run settings")
    t.add_argument("--eta", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--units", choices=["raw", "twopi"])
    t.add_argument("--out", help="weight file path (default <preset>.weights.json)")
    t.add_argument("--history", help="per-epoch CSV path (default next to --out)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate weights on a state set")
    e.add_argument("--weights", required=True)
    e.add_argument("--set", required=True,
                   help="table8, grid-product, grid-mixed, or family specs joined by ';'")
    e.add_argument("--units", choices=["raw", "twopi"])
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="sweep one parameter of a state family")
    s.add_argument("--weights", required=True)
    s.add_argument("--family", required=True)
    s.add_argument("--param", required=True)
    s.add_argument("--from", dest="start", type=_float, default=0.0)
    s.add_argument("--to", dest="stop", type=_float, default=2 * math.pi)
    s.add_argument("--points", type=int, default=20)
    s.add_argument("--fixed", action="append", help="extra family parameter key=value")
    s.add_argument("--units", choices=["raw", "twopi"])
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("scan-target", help="retrain the witness for several P targets")
    c.add_argument("--values", required=True)
    c.add_argument("--config")
    c.add_argument("--eta", type=float)
    c.add_argument("--epochs", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_scan)

    d = sub.add_parser("describe", help="print a preset's settings as JSON")
    d.add_argument("preset")
    d.set_defaults(func=cmd_describe)

    r = sub.add_parser("replay", help="evaluate the published witness weights under both unit "
                                      "conventions")
    r.add_argument("--out")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:  # ValidationError and bad enum values
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DivergenceError, PropagationError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
