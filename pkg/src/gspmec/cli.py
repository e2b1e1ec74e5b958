"""Command-line front end.

Exit codes: 0 success, 1 a checked property or expectation failed,
2 bad usage or configuration.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import csvio, svgplot
from .analytics import profit_margin_ratio
from .errors import GspMecError, MissingColumn, NoAllocations, ParseError, UnknownPreset, ValidationError
from .gsp import run_gsp_round
from .orchestrator import DEFAULT_HORIZON, SUMMARY_FIELDS, RunReport, run_simulation, run_sweep
from .presets import (
    EXAMPLE1_STATED_PRICE,
    builtin_preset,
    example1_fixture,
    multi_server_market,
    with_strategy,
    with_ue_count,
)
from .scenario import STRATEGY_TAGS, Scenario, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CONFIG_ERRORS = (UnknownPreset, ValidationError, ParseError, MissingColumn)
EXAMPLE1_TOL = 1e-6


class UsageError(GspMecError):
    pass


# --- argument helpers --------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    return out


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}") from None
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError(f"need 0 < lo <= hi, got {text!r}")
    return lo, hi


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _scenario(args) -> Scenario:
    if args.scenario:
        scen = load_scenario(args.scenario)
    elif args.preset:
        scen = builtin_preset(args.preset)
    else:
        raise UsageError("one of --preset or --scenario is required")
    changes = {}
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if args.replications is not None:
        if args.replications < 1:
            raise UsageError("--replications must be >= 1")
        changes["replications"] = args.replications
    return scen.with_auction(**changes) if changes else scen


def _mechanisms(choice: str) -> tuple[str, ...]:
    return ("gsp", "vcg") if choice == "both" else (choice,)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- run ---------------------------------------------------------------------


def round_columns(server_ids: Sequence[int]) -> list[str]:
    cols = ["mechanism", "slot"]
    cols += [f"bid_s{i}" for i in server_ids]
    cols += ["mean_price"]
    cols += [f"utility_s{i}" for i in server_ids]
    cols += [f"wins_s{i}" for i in server_ids]
    cols += ["margin", "qoe", "qoe_latency", "qoe_cost", "latency", "social_welfare", "unserved", "rejected"]
    return cols


def round_rows(rep: RunReport) -> list[dict]:
    rows = []
    for t in range(rep.n_slots):
        row = {"mechanism": rep.mechanism, "slot": t + 1, "mean_price": float(rep.mean_price[t])}
        for k, sid in enumerate(rep.server_ids):
            row[f"bid_s{sid}"] = float(rep.mean_bid[t, k])
            row[f"utility_s{sid}"] = float(rep.server_utility[t, k])
            row[f"wins_s{sid}"] = int(rep.wins[t, k])
        for name in ("margin", "qoe", "qoe_latency", "qoe_cost", "latency", "social_welfare"):
            row[name] = float(getattr(rep, name)[t])
        row["unserved"] = int(rep.unserved[t])
        row["rejected"] = int(rep.rejected[t])
        rows.append(row)
    return rows


def summary_lines(rep: RunReport) -> list[str]:
    conv = "none" if rep.convergence_slot is None else str(rep.convergence_slot)
    lines = [
        f"[{rep.mechanism}] scenario={rep.scenario} slots={rep.n_slots}",
        f"convergence_slot = {conv}",
    ]
    for app, prices in enumerate(rep.final_prices):
        if prices.size:
            lines.append(
                f"final_price app{app}: mean={prices.mean():.6f} min={prices.min():.6f} max={prices.max():.6f}"
            )
        else:
            lines.append(f"final_price app{app}: no allocations")
    if rep.outcomes:
        for out in rep.outcomes[-1]:
            try:
                lines.append(f"final_margin_pct app{out.app_id} = {profit_margin_ratio(out):.4f}")
            except NoAllocations:
                lines.append(f"final_margin_pct app{out.app_id} = n/a")
    lines.append(f"settled_margin_pct = {float(rep.settled('margin')):.4f}")
    lines.append(f"settled_mean_price = {float(rep.settled('mean_price')):.6f}")
    lines.append(f"settled_social_welfare = {float(rep.settled('social_welfare')):.6f}")
    lines.append(f"settled_qoe = {float(rep.settled('qoe')):.6f}")
    return lines


def cmd_run(args) -> int:
    scen = _scenario(args)
    if args.horizon < 1:
        raise UsageError("--horizon must be >= 1")
    out = _out_dir(args.out)
    reports = [run_simulation(scen, m, args.horizon, args.stop_at_convergence) for m in _mechanisms(args.mechanism)]
    rows = [row for rep in reports for row in round_rows(rep)]
    csvio.write_table(out / "rounds.csv", "rounds", round_columns(reports[0].server_ids), rows)
    text = []
    for rep in reports:
        text += summary_lines(rep) + [""]
    (out / "summary.txt").write_text("\n".join(text))
    print("\n".join(text).rstrip())
    print(f"wrote {out / 'rounds.csv'} and {out / 'summary.txt'}")
    return EXIT_OK


# --- sweep -------------------------------------------------------------------


def sweep_points(args) -> tuple[str, list[tuple[str, float, Scenario]]]:
    """``(axis, [(label, x, scenario), ...])`` for the single requested axis."""
    axes = [a for a in ("sweep_ues", "sweep_servers", "davg", "sweep_strategies") if getattr(args, a) is not None]
    if len(axes) != 1:
        raise UsageError("give exactly one of --sweep-ues, --sweep-servers, --davg, --sweep-strategies")
    axis = axes[0]
    values = getattr(args, axis)
    if not values:
        raise ValidationError(axis.replace("_", "-"), "sweep list must not be empty")
    seed = 7 if args.seed is None else args.seed
    points = []
    if axis == "sweep_servers":
        for n in values:
            if args.vms_total % n:
                raise UsageError(f"--vms-total {args.vms_total} is not divisible by {n} servers")
            scen = multi_server_market(n, args.vms_total // n, args.ues, seed=seed, name=f"servers{n}")
            points.append((str(n), float(n), scen))
    else:
        base = _scenario(args)
        if axis == "sweep_ues":
            points = [(str(j), float(j), with_ue_count(base, j)) for j in values]
        elif axis == "davg":
            points = [
                (f"{lo:g}-{hi:g}", hi, with_ue_count(base, len(base.ues), d_avg_range=(lo, hi)))
                for lo, hi in values
            ]
        else:
            for tag in values:
                if tag not in STRATEGY_TAGS:
                    raise ValidationError("sweep-strategies", f"unknown strategy {tag!r}")
            points = [(tag, float(i), with_strategy(base, tag)) for i, tag in enumerate(values)]
    if args.replications is not None:
        points = [(lab, x, s.with_auction(replications=args.replications)) for lab, x, s in points]
    return axis, points


def cmd_sweep(args) -> int:
    axis, points = sweep_points(args)
    out = _out_dir(args.out)
    rows = []
    for mech in _mechanisms(args.mechanism):
        summaries = run_sweep([p[2] for p in points], mech, args.horizon, True, args.workers)
        for (label, x, _), summ in zip(points, summaries):
            rows.append({"mechanism": mech, "axis": axis.replace("sweep_", ""), "label": label, "x": x, **summ})
    cols = ["mechanism", "axis", "label", "x", *SUMMARY_FIELDS]
    csvio.write_table(out / "sweep.csv", "sweep", cols, rows)
    for r in rows:
        print(f"{r['mechanism']:>4} {r['label']:>10}  price={r['mean_price']:.6f}  sw={r['social_welfare']:.4f}  qoe={r['qoe']:.4f}")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


# --- verify ------------------------------------------------------------------


def cmd_verify(args) -> int:
    from .verify import run_all

    suites = tuple(s.upper() for s in args.suites) if args.suites else ("IR", "SNE", "WDP")
    report = run_all(args.instances, args.seed or 0, args.inject, suites)
    for r in report.results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{r.name:<4} {status}  cases={r.cases} failures={r.failures}"
        print(line + (f"  ({r.detail})" if r.detail else ""))
    bad = report.first_failure()
    if bad is not None:
        print(f"property failed: {bad.name}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# --- example1 ----------------------------------------------------------------


def cmd_example1(args) -> int:
    fx = example1_fixture()
    first_price = None
    for n, (queue, vms) in enumerate(zip(fx.queues, fx.vms)):
        out = run_gsp_round(queue, vms, epsilon=1e-3)
        rates = ", ".join(f"{x:.4f}" for x in out.price_adjustment)
        print(f"queue {n + 1}: adjustment rates [{rates}]")
        for s in range(out.n_slots):
            r = out.winner[s]
            if r < 0:
                print(f"  task {s + 1}: unserved")
                continue
            srv, vm = out.vm_keys[r]
            print(f"  task {s + 1} -> server {srv} vm {vm}  price {out.prices[s]:.6f}")
        if n == 0:
            first_price = float(out.prices[0])
    ok = abs(first_price - args.expect) <= EXAMPLE1_TOL
    print(f"queue 1 task 1 price {first_price:.6f} vs expected {args.expect:.6f}: {'ok' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_FAIL


# --- plot --------------------------------------------------------------------

# chart -> (csv kind, x column, y column or per-server prefix, title, y label)
CHARTS = {
    "fig5a": ("rounds", "slot", "bid_s*", "Mean bid per server", "bid ($/VM-hr)"),
    "fig5b": ("rounds", "slot", "mean_price", "Mean allocation price", "price ($/VM-hr)"),
    "fig6a": ("sweep", "x", "mean_price", "Converged price vs UE count", "price ($/VM-hr)"),
    "fig6b": ("sweep", "x", "mean_price", "Converged price vs server count", "price ($/VM-hr)"),
    "fig7a": ("rounds", "slot", "bid_s*", "Bid dynamics", "bid ($/VM-hr)"),
    "fig7b": ("rounds", "slot", "margin", "Profit margin ratio", "margin (%)"),
    "fig8a": ("rounds", "slot", "utility_s*", "Server utility", "utility"),
    "fig8b": ("rounds", "slot", "social_welfare", "Composite social welfare", "SW"),
    "fig9a": ("sweep", "x", "qoe", "Mean QoE vs UE count", "QoE"),
    "fig9b": ("sweep", "x", "social_welfare", "Composite social welfare vs UE count", "SW"),
    "fig10a": ("sweep", "x", "qoe", "Mean QoE vs task size range", "QoE"),
    "fig10b": ("sweep", "x", "latency", "Mean latency vs task size range", "latency (s)"),
}


def chart_series(kind: str, columns: list[str], rows: list[dict], spec) -> list[svgplot.Series]:
    want_kind, xcol, ycol, _, _ = spec
    if kind != want_kind:
        raise MissingColumn(f"chart needs a {want_kind} table, got {kind}")
    if xcol not in columns:
        raise MissingColumn(f"column {xcol!r} not found")
    ycols = [c for c in columns if c.startswith(ycol[:-1])] if ycol.endswith("*") else [ycol]
    if not ycols or any(c not in columns for c in ycols):
        raise MissingColumn(f"column {ycol!r} not found")
    mechs = sorted({r.get("mechanism", "") for r in rows})
    series = []
    for mech in mechs:
        sub = [r for r in rows if r.get("mechanism", "") == mech]
        for c in ycols:
            label = c if len(mechs) == 1 else f"{mech} {c}"
            series.append(svgplot.Series(label, csvio.column(sub, columns, xcol), csvio.column(sub, columns, c)))
    return series


def cmd_plot(args) -> int:
    kind, columns, rows = csvio.read_table(args.csv)
    if not columns:
        raise MissingColumn(f"{args.csv}: no columns")
    spec = CHARTS[args.chart]
    series = chart_series(kind, columns, rows, spec)
    xlabel = "slot" if spec[1] == "slot" else (rows[0]["axis"] if rows and "axis" in columns else "x")
    svg = svgplot.line_chart(series, spec[3], xlabel, spec[4])
    out = Path(args.out)
    if out.suffix != ".svg":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{args.chart}.svg"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, out_default: str = "out") -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", help="built-in scenario name")
    src.add_argument("--scenario", help="TOML scenario file")
    p.add_argument("--mechanism", choices=("gsp", "vcg", "both"), default="gsp")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--out", default=out_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gspmec", description="Edge-computing VM auction simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and write rounds.csv and summary.txt")
    _common(p)
    p.add_argument("--stop-at-convergence", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="converged summaries across a parameter axis")
    _common(p)
    p.add_argument("--sweep-ues", type=_int_list)
    p.add_argument("--sweep-servers", type=_int_list)
    p.add_argument("--davg", type=_range, action="append", help="average task size range lo,hi (repeatable)")
    p.add_argument("--sweep-strategies", type=_str_list)
    p.add_argument("--vms-total", type=int, default=120, help="total VMs split evenly in a server sweep")
    p.add_argument("--ues", type=int, default=120, help="UE count in a server sweep")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the IR, SNE and allocation-oracle property suites")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject", choices=("ir-violation",), default=None)
    p.add_argument("--suites", type=_str_list, default=None, help="subset of IR,SNE,WDP")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example1", help="replay the three-queue worked example")
    p.add_argument("--expect", type=float, default=EXAMPLE1_STATED_PRICE)
    p.set_defaults(func=cmd_example1)

    p = sub.add_parser("plot", help="render a CSV table as an SVG line chart")
    p.add_argument("csv")
    p.add_argument("--chart", choices=sorted(CHARTS), required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, *CONFIG_ERRORS) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GspMecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
