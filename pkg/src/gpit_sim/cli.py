"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 empty result.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import ConfigError, RunConfig, load_config
from .experiments import (
    SCHEMA_LINE,
    ExperimentKind,
    ExperimentSpec,
    elasticity_csv,
    exp_dynamic,
    exp_elasticity,
    exp_fixed_profit,
    histogram_csv,
    profit_csv,
)
from .market import run_simulation
from .scenario import TraceParseError, check_grammar, generate_profiles, generate_trace, parse_trace, serialize_trace
from .world import WorldFormatError, build_world, format_world, generate_prices, load_base_curve, parse_world

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EMPTY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="key = value config file")
    p.add_argument("--seed", type=_seed, default=d(1), help="base RNG seed (default 1)")
    p.add_argument("--out", default=d("."), help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gpit-sim", description="Gas-price information trading simulator.")
    _add_globals(parser, suppress=False)
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def leaf(sub, name, help_):
        p = sub.add_parser(name, help=help_)
        _add_globals(p, suppress=True)
        return p

    world = groups.add_parser("world", help="road network tools")
    ws = world.add_subparsers(dest="action", required=True, parser_class=_Parser)
    leaf(ws, "gen", "generate a synthetic world -> world.txt")
    p = leaf(ws, "import", "validate a world file -> world.txt")
    p.add_argument("path")

    trace = groups.add_parser("trace", help="event trace tools")
    ts = trace.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(ts, "gen", "generate a baseline trace -> trace.txt")
    p.add_argument("--world", help="world file (default: generate from seed)")
    p = leaf(ts, "check", "parse a trace and check event grammar")
    p.add_argument("path")
    p.add_argument("--world", help="also check locations against this world")

    prices = groups.add_parser("prices", help="gas price field")
    ps = prices.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(ps, "gen", "generate station prices -> prices.csv")
    p.add_argument("--world", help="world file (default: generate from seed)")

    sim = groups.add_parser("sim", help="market simulation")
    ss = sim.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = leaf(ss, "run", "one market run -> deals.csv, ledger.csv, trader.csv, trace_augmented.txt")
    p.add_argument("--world", help="world file (default: generate from seed)")
    p.add_argument("--trace", help="baseline trace file (default: generate from seed)")
    p.add_argument("--pricing", help="'dynamic' or a fixed opening offer in $")

    exp = groups.add_parser("exp", help="market experiments")
    es = exp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, help_ in (
        ("dynamic", "deal-price histogram -> dynamic.csv"),
        ("elasticity", "success ratio per fixed offer -> elasticity.csv"),
        ("profit", "profit per fixed offer plus dynamic -> profit.csv"),
    ):
        p = leaf(es, name, help_)
        p.add_argument("--replications", type=int, help="number of seeds (default from config)")
        p.add_argument("--workers", type=int, default=1, help="parallel processes")
    return parser


# -- helpers ---------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    target = out / name
    target.write_text(text, encoding="utf-8")
    return target


def _world(args, cfg: RunConfig):
    if getattr(args, "world", None):
        try:
            return parse_world(_read(args.world))
        except WorldFormatError as exc:
            raise DataError(f"{args.world}: {exc}") from None
    return build_world(cfg.world, args.seed)


def _prices(world, cfg: RunConfig, seed: int):
    params = cfg.prices
    if cfg.base_curve_csv is not None:
        params = replace(params, base_curve=load_base_curve(_read(cfg.base_curve_csv)))
    return generate_prices(world.stations, cfg.horizon_days, params, seed)


def _header(seed: int) -> str:
    return SCHEMA_LINE.format(seed=seed) + "\n"


# -- commands --------------------------------------------------------------


def _cmd_world(args, cfg, out) -> int:
    if args.action == "gen":
        world = build_world(cfg.world, args.seed)
    else:
        try:
            world = parse_world(_read(args.path))
        except WorldFormatError as exc:
            raise DataError(f"{args.path}: {exc}") from None
    path = _write(out, "world.txt", format_world(world))
    print(f"wrote {path} ({len(world.locations)} locations, {len(world.edges)} edges)", file=sys.stderr)
    return EXIT_OK


def _cmd_trace(args, cfg, out) -> int:
    if args.action == "gen":
        world = _world(args, cfg)
        profiles = generate_profiles(world, cfg.n_clients, args.seed, cfg.scenario)
        trace = generate_trace(world, profiles, cfg.horizon_days, args.seed, cfg.scenario)
        path = _write(out, "trace.txt", serialize_trace(trace))
        print(f"wrote {path} ({len(trace)} events)", file=sys.stderr)
        return EXIT_OK
    try:
        trace = parse_trace(_read(args.path))
    except TraceParseError as exc:
        raise DataError(f"{args.path}: {exc}") from None
    problems = check_grammar(trace)
    if args.world:
        world = _world(args, cfg)
        problems += sorted({f"unknown location {e.location}" for e in trace if e.location not in world})
    if problems:
        for p in problems[:20]:
            print(f"{args.path}: {p}", file=sys.stderr)
        return EXIT_DATA
    if not len(trace):
        print(f"{args.path}: no events", file=sys.stderr)
        return EXIT_EMPTY
    print(f"{args.path}: ok ({len(trace)} events, {len(trace.by_agent())} agents)", file=sys.stderr)
    return EXIT_OK


def _cmd_prices(args, cfg, out) -> int:
    world = _world(args, cfg)
    table = _prices(world, cfg, args.seed)
    lines = [_header(args.seed), "day,station,price\n"]
    for d in range(table.horizon_days):
        for k, s in enumerate(table.stations):
            lines.append(f"{d},{s},{table.realized[k, d]:.4f}\n")
    path = _write(out, "prices.csv", "".join(lines))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _pricing(text: str | None, cfg: RunConfig) -> RunConfig:
    if text is None:
        return cfg
    if text.lower() == "dynamic":
        return replace(cfg, sim=replace(cfg.sim, fixed_offer=None))
    try:
        amount = float(text)
    except ValueError:
        raise UsageError(f"--pricing must be 'dynamic' or an amount, got {text!r}") from None
    if amount < 0:
        raise UsageError("--pricing amount must be >= 0")
    return replace(cfg, sim=replace(cfg.sim, fixed_offer=amount))


def _cmd_sim(args, cfg, out) -> int:
    cfg = _pricing(args.pricing, cfg)
    world = _world(args, cfg)
    profiles = generate_profiles(world, cfg.n_clients, args.seed, cfg.scenario)
    if args.trace:
        try:
            trace = parse_trace(_read(args.trace))
        except TraceParseError as exc:
            raise DataError(f"{args.trace}: {exc}") from None
        profiles = []  # an imported trace brings its own agents
    else:
        trace = generate_trace(world, profiles, cfg.horizon_days, args.seed, cfg.scenario)
    prices = _prices(world, cfg, args.seed)
    try:
        ledger, augmented, deals = run_simulation(world, trace, profiles, prices, cfg.sim, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    h = _header(args.seed)
    rows = [h, "client_id,day,price,savings,promotional,rounds,outcome\n"]
    for d in deals:
        rows.append(f"{d.client_id},{d.day},{d.price:.4f},{d.savings:.4f},{int(d.promotional)},{d.rounds},{d.outcome}\n")
    _write(out, "deals.csv", "".join(rows))

    rows = [h, "client_id,payments,gross_savings,net_benefit,purchases,conflicts,dropped_out,dropout_day\n"]
    for cid, c in ledger.clients.items():
        day = "" if c.dropout_day is None else c.dropout_day
        rows.append(
            f"{cid},{c.payments:.4f},{c.gross_savings:.4f},{c.net_benefit:.4f},"
            f"{c.purchases},{c.conflicts},{int(c.dropped_out)},{day}\n"
        )
    _write(out, "ledger.csv", "".join(rows))

    t = ledger.trader
    rows = [h, "day,income,deals\n"]
    rows += [f"{d},{t.daily_income[d]:.4f},{t.daily_deals[d]}\n" for d in range(len(t.daily_income))]
    rows.append(f"# totals: income={t.income:.4f} acquisition_cost={t.acquisition_cost:.4f} profit={t.profit:.4f} deals={t.deals}\n")
    _write(out, "trader.csv", "".join(rows))
    _write(out, "trace_augmented.txt", serialize_trace(augmented))
    print(f"trader profit {t.profit:.2f} from {t.deals} deals; outputs in {out}", file=sys.stderr)
    return EXIT_OK if t.deals else EXIT_EMPTY


def _cmd_exp(args, cfg, out) -> int:
    reps = args.replications if args.replications is not None else cfg.replications
    if reps < 1:
        raise UsageError("--replications must be >= 1")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    spec = ExperimentSpec(ExperimentKind(args.action), cfg.offers, reps, args.seed, args.workers)
    if args.action == "dynamic":
        pooled, _ = exp_dynamic(cfg, spec)
        path = _write(out, "dynamic.csv", histogram_csv(pooled, args.seed))
        print(f"wrote {path}", file=sys.stderr)
        if not pooled.total:
            print("no successful deals", file=sys.stderr)
            return EXIT_EMPTY
        return EXIT_OK
    if args.action == "elasticity":
        path = _write(out, "elasticity.csv", elasticity_csv(exp_elasticity(cfg, spec), args.seed))
    else:
        path = _write(out, "profit.csv", profit_csv(exp_fixed_profit(cfg, spec), args.seed))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {"world": _cmd_world, "trace": _cmd_trace, "prices": _cmd_prices, "sim": _cmd_sim, "exp": _cmd_exp}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        return _COMMANDS[args.group](args, cfg, Path(args.out))
    except UsageError as exc:
        print(f"gpit-sim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DataError) as exc:
        print(f"gpit-sim: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"gpit-sim: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
