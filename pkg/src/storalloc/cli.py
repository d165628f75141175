"""Command-line entry point: ``storalloc {simulate,sweep,orders,optimize}``.

Exit codes: 0 ok, 2 usage error, 3 resource guard exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

from . import analytic
from .allocation import parse_strategy
from .config import DEFAULT_SEED, SystemConfig, db_to_linear
from .errors import InvalidParameterError, OutOfDomainError, SizeLimitError
from .montecarlo import sweep
from .optimizer import enumerate_allocations, rank_allocations, ranked_json

log = logging.getLogger("storalloc")

EXIT_USAGE = 2
EXIT_GUARD = 3

ORDER_COLUMNS = ["K", "T", "d_star", "slope_low", "slope_high", "in_domain"]


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive when on the grid) or a single value.

    ``start:step:stop`` is also understood when the documented reading would
    be empty or a single point, e.g. ``10:5:40`` or ``0:1:20``.
    """
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) == 2:
        parts.append("1")
    if len(parts) != 3:
        raise InvalidParameterError(f"bad range {text!r}; expected start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if (stop < start or step > stop - start > 0) and parts[2] != parts[1] and start <= step \
            and stop > 0:
        # start:step:stop written the other way round, e.g. 10:5:40
        stop, step = step, stop
    if step <= 0 or stop < start:
        raise InvalidParameterError(f"empty range {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def split_strategies(text: str) -> list[str]:
    """Split on commas that are not inside a JSON array."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s.strip() for s in out if s.strip()]


def _float_list(text: str) -> list[float]:
    if ":" in text:
        return parse_range(text)
    return [float(x) for x in text.split(",") if x.strip()]


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _common(p, snr_single=True):
    p.add_argument("--config", help="JSON file supplying any of these flags")
    p.add_argument("--k", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--q", type=float, help="rate threshold in bits (default 1)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output", "-o", help="write to file instead of stdout")
    if snr_single:
        p.add_argument("--snr-db", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="storalloc",
                                     description="Wireless distributed storage allocation simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="estimate one failure probability")
    _common(p)
    p.add_argument("--strategy", help="symmetric | minimal | custom=<json array>")
    p.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("sweep", help="failure probability over an SNR grid")
    _common(p, snr_single=False)
    p.add_argument("--snr-db-range", help="start:stop:step in dB")
    p.add_argument("--strategies", help="comma list of strategies")
    p.add_argument("--conditioned", action="store_true", default=None,
                   help="add decoding-set-conditioned estimates")
    p.add_argument("--trials-per-set", type=int)
    p.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("orders", help="optimal exponential order table")
    p.add_argument("--config")
    p.add_argument("--k-range", help="K values, start:stop[:step] or comma list")
    p.add_argument("--t-range", help="T values, start:stop:step or comma list")
    p.add_argument("--k", help="fixed K value(s), comma list")
    p.add_argument("--t", help="fixed T value(s), comma list")
    p.add_argument("--target-fraction", type=float,
                   help="also report the smallest T reaching this fraction of full order K")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--output", "-o")

    p = sub.add_parser("optimize", help="grid search for the best allocation")
    _common(p)
    p.add_argument("--step", type=float)
    p.add_argument("--top", type=int, help="only print the best N candidates")
    return parser


DEFAULTS = {"q": 1.0, "trials": 100_000, "seed": DEFAULT_SEED, "workers": 1, "format": "csv",
            "trials_per_set": 100_000, "conditioned": False, "strategy": "symmetric",
            "strategies": "symmetric,minimal"}


def _merge_config(parser, args):
    """Fill unset flags from --config, then from built-in defaults."""
    file_values = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(file_values, dict):
            parser.error("config file must hold a JSON object")
    for key, value in vars(args).items():
        if value is not None or key in ("config", "command", "verbose"):
            continue
        alias = key.replace("_", "-")
        if key in file_values:
            setattr(args, key, file_values[key])
        elif alias in file_values:
            setattr(args, key, file_values[alias])
        elif key in DEFAULTS:
            setattr(args, key, DEFAULTS[key])
    return args


def _require(parser, args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        parser.error("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def cmd_simulate(parser, args) -> int:
    _require(parser, args, "k", "t", "snr_db")
    config = SystemConfig.from_db(args.k, args.t, args.q, args.snr_db, seed=args.seed)
    label, alloc = parse_strategy(str(args.strategy), args.k, args.t)
    result = sweep(config, [(label, alloc)], [args.snr_db], args.trials, workers=args.workers)
    _emit(_render(result, args.format), args.output)
    return 0


def cmd_sweep(parser, args) -> int:
    _require(parser, args, "k", "t", "snr_db_range")
    grid = parse_range(args.snr_db_range)
    config = SystemConfig(args.k, args.t, args.q, db_to_linear(grid[0]), seed=args.seed)
    strategies = [parse_strategy(s, args.k, args.t) for s in split_strategies(str(args.strategies))]
    if not strategies:
        parser.error("no strategies given")
    result = sweep(config, strategies, grid, args.trials, workers=args.workers,
                   conditioned=bool(args.conditioned), trials_per_set=args.trials_per_set)
    _emit(_render(result, args.format), args.output)
    return 0


def _render(result, fmt):
    return result.to_json() if fmt == "json" else result.to_csv()


def order_rows(ks, ts) -> list[dict]:
    rows = []
    for K in ks:
        for T in ts:
            row = {"K": int(K), "T": float(T), "d_star": None, "slope_low": None,
                   "slope_high": None, "in_domain": T > 1}
            if T > 1:
                row["d_star"] = analytic.optimal_order(int(K), T)
                row["slope_low"], row["slope_high"] = analytic.slope_bounds(int(K), T)
            rows.append(row)
    return rows


def smallest_budget(K: int, fraction: float, ts=None) -> dict:
    """Smallest T with d*(K, T) >= fraction * K, exactly and on an optional grid."""
    need = fraction * K
    # d* = K - ceil(K/T) + 1 >= need  <=>  ceil(K/T) <= m
    m = math.floor(K - need + 1 + 1e-9)
    if m < 1:
        raise OutOfDomainError(f"fraction {fraction} unreachable for K={K}")
    out = {"K": K, "fraction": fraction, "T_exact": K / m, "a_exact": 1.0 / m}
    if ts is not None:
        hits = [T for T in ts if T > 1 and analytic.optimal_order(K, T) >= need - 1e-9]
        if hits:
            out["T_grid"] = min(hits)
            out["a_grid"] = min(hits) / K
    return out


def cmd_orders(parser, args) -> int:
    if args.k_range is not None:
        ks = [int(k) for k in _float_list(args.k_range)]
        ts = _float_list(str(args.t)) if args.t is not None else None
        if ts is None:
            parser.error("--k-range needs --t")
    elif args.t_range is not None:
        ts = _float_list(args.t_range)
        ks = [int(k) for k in _float_list(str(args.k))] if args.k is not None else None
        if ks is None:
            parser.error("--t-range needs --k")
    else:
        parser.error("give --k-range or --t-range")
    rows = order_rows(ks, ts)
    for r in rows:
        if not r["in_domain"]:
            log.warning("T=%g <= 1 is outside the optimal-order formula; row flagged", r["T"])
    targets = []
    if args.target_fraction is not None:
        targets = [smallest_budget(K, args.target_fraction, ts if args.t_range else None) for K in ks]
    if args.format == "json":
        text = json.dumps({"rows": rows, "targets": targets}, indent=2)
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=ORDER_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if r[k] is None else r[k] for k in ORDER_COLUMNS})
        for t in targets:
            buf.write("# target " + " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                                             for k, v in t.items()) + "\n")
        text = buf.getvalue()
    _emit(text, args.output)
    return 0


def cmd_optimize(parser, args) -> int:
    _require(parser, args, "k", "t", "step", "snr_db")
    config = SystemConfig.from_db(args.k, args.t, args.q, args.snr_db, seed=args.seed)
    candidates = enumerate_allocations(args.k, args.t, args.step)
    ranked = rank_allocations(candidates, config, args.trials, workers=args.workers)
    if args.top:
        ranked = ranked[:args.top]
    meta = {"K": args.k, "T": args.t, "Q": args.q, "snr_db": args.snr_db, "step": args.step,
            "trials": args.trials, "seed": args.seed, "candidates": len(candidates)}
    _emit(ranked_json(ranked, meta), args.output)
    return 0


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "orders": cmd_orders,
            "optimize": cmd_optimize}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    args = _merge_config(sub, args)
    try:
        return COMMANDS[args.command](sub, args)
    except SizeLimitError as exc:
        print(f"storalloc: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (InvalidParameterError, OutOfDomainError) as exc:
        sub.print_usage(sys.stderr)
        print(f"storalloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
