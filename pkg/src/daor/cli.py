"""Command line entry point: ``daor <command> [options]``.

Exit codes: 0 on success, 2 for an invalid configuration, 3 when a single
design (``design``/``beampattern``) asks for an unattainable DAOR threshold.
"""

import argparse
import sys

from . import harness
from .config import load_config, parse_config
from .errors import InfeasiblePrivacy, InvalidConfig

COMMANDS = ("design", "sweep", "beampattern", "compare", "bounds")


def build_parser():
    p = argparse.ArgumentParser(prog="daor", description="DOA-obfuscating beamformer design and Monte Carlo runs.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment config; defaults apply to omitted keys")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--strategy", choices=("os", "ss"))
    p.add_argument("--q", type=int, help="shortlist size for the ss strategy")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="default: json for design, csv otherwise")
    p.add_argument("--timing", action="store_true",
                   help="add wall-clock fields and a clock timestamp (output no longer reproducible)")
    return p


def _resolve(args):
    data = {} if args.config is None else load_config(args.config).model_dump(mode="json")
    for key, attr in (("master_seed", "seed"), ("strategy", "strategy"), ("q", "q"),
                      ("trials", "trials"), ("workers", "workers")):
        val = getattr(args, attr)
        if val is not None:
            data[key] = val
    return parse_config(data)


def _render(args, cfg):
    fmt = args.format or ("json" if args.command == "design" else "csv")
    cmd, timing = args.command, args.timing
    if cmd == "design":
        out, record = harness.run_design(cfg, timing=timing)
        if fmt == "json":
            return harness.dumps(record)
        keys = [k for k in record if k not in ("config", "precoder_w")]
        return harness.rows_to_csv(keys, [[record[k] if not isinstance(record[k], list) else
                                          " ".join(map(str, record[k])) for k in keys]])
    if cmd == "beampattern":
        out, _, verdict, rows = harness.run_beampattern(cfg, timing=timing)
        if fmt == "json":
            rec = harness.make_record(cfg, cmd, timing, verdict=verdict.value, achieved_gamma=out.achieved_gamma,
                                  case=out.case_label.value, columns=list(harness.BEAMPATTERN_COLUMNS),
                                  rows=[dict(zip(harness.BEAMPATTERN_COLUMNS, r)) for r in rows])
            return harness.dumps(rec)
        return harness.rows_to_csv(harness.BEAMPATTERN_COLUMNS, rows)
    if cmd == "sweep":
        result = harness.run_sweep(cfg, timing=timing)
    elif cmd == "compare":
        result = harness.run_compare(cfg, timing=timing)
    else:
        result = harness.run_bounds(cfg)
    if fmt == "json":
        return harness.dumps(harness.result_record(cfg, cmd, result, timing))
    return result.to_csv()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        text = _render(args, cfg)
    except (InvalidConfig, OSError) as exc:
        print(f"daor: {exc}", file=sys.stderr)
        return 2
    except InfeasiblePrivacy as exc:
        print(f"daor: {exc}", file=sys.stderr)
        return 3
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
