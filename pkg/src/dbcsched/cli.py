"""Command-line front end: ``dbcsched <subcommand> --config FILE [--out DIR]``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import HEADER_KEY, ExperimentConfig, format_schedule, load_config
from .errors import DBCError, Infeasible
from .exponents import exponent_table
from .simulator import estimate_stability, run
from .stability import classify, max_slack, service_rates, synthesize_policy
from .verification import run_all

log = logging.getLogger("dbcsched")

SUBCOMMANDS = ("exponents", "lengths", "region", "simulate", "verify")


def _header(cfg: ExperimentConfig, extra: dict | None = None) -> str:
    lines = [f"# dbcsched {__version__}", HEADER_KEY + cfg.to_json()]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, header: str, columns: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def cmd_exponents(cfg: ExperimentConfig, out: Path, args) -> int:
    tab = exponent_table(cfg.channel, cfg.coding.rho)
    rows = [(k, j, repr(tab.rho), repr(tab(k, j))) for k, j in tab.pairs()]
    _write_csv(out / "exponents.csv", _header(cfg), ["k", "j", "rho", "E_o"], rows)
    print(f"wrote {out / 'exponents.csv'} ({len(rows)} rows)")
    return 0


def cmd_lengths(cfg: ExperimentConfig, out: Path, args) -> int:
    tbl = cfg.schedule_table()
    J = cfg.J
    cols = ["schedule"]
    cols += [f"N_{j}" for j in range(1, J + 1)]
    cols += ["N"]
    cols += [f"lower_{j}" for j in range(1, J + 1)] + [f"upper_{j}" for j in range(1, J + 1)]
    cols += [f"R_{k}" for k in range(1, J + 1)]
    rows = []
    for s, e in tbl.entries.items():
        rows.append(
            [format_schedule(s), *e.N_rx, e.N, *(b[0] for b in e.bounds), *(b[1] for b in e.bounds)]
            + [repr(r) for r in e.rates]
        )
    _write_csv(out / "lengths.csv", _header(cfg, {"K": cfg.K}), cols, rows)
    print(f"wrote {out / 'lengths.csv'} ({len(rows)} schedules)")
    return 0


def cmd_region(cfg: ExperimentConfig, out: Path, args) -> int:
    tbl = cfg.schedule_table()
    J = cfg.J
    rows = [[format_schedule(s), tbl.N(s), *(repr(v) for v in tbl[s].service)] for s in tbl]
    _write_csv(out / "region.csv", _header(cfg), ["schedule", "N", *(f"v_{j}" for j in range(1, J + 1))], rows)
    qrows = []
    for beta in cfg.raw.get("region", {}).get("queries", []):
        q = max_slack(beta, tbl)
        try:
            pol = synthesize_policy(beta, tbl)
            synth = ";".join(f"{format_schedule(s)}={p:.12g}" for s, p in pol.probs.items())
        except Infeasible:
            synth = "infeasible"
        qrows.append([" ".join(repr(float(b)) for b in beta), repr(q.slack), q.contains, q.interior, synth])
        print(f"beta={list(beta)} contains={q.contains} slack={q.slack:.6g} policy={synth}")
    _write_csv(
        out / "region_queries.csv", _header(cfg), ["beta", "slack", "in_outer_bound", "interior", "policy"], qrows
    )
    print(f"wrote {out / 'region.csv'} and {out / 'region_queries.csv'}")
    return 0


def cmd_simulate(cfg: ExperimentConfig, out: Path, args) -> int:
    tbl = cfg.schedule_table()
    sc = cfg.sim_config(tbl, seed=args.seed, horizon=args.horizon)
    verdict = classify(sc.split.class_means([a.mean for a in sc.arrivals]), sc.policy, tbl)
    log.info("simulating %d slots, seed %d", sc.horizon, sc.seed)
    tr = run(sc)
    try:
        est = estimate_stability(tr)
        empirical, slope = est.verdict.value, f"{est.slope:.6g}"
    except DBCError as exc:
        empirical, slope = f"n/a ({exc})", "n/a"
    names = [f"{j}:{format_schedule(s)}" for j, s in tr.classes]
    raw = dict(cfg.raw)
    raw.setdefault("simulation", {})
    raw["simulation"] = {**raw["simulation"], "seed": sc.seed, "horizon": sc.horizon}
    cfg_run = ExperimentConfig(raw=raw, channel=cfg.channel, coding=cfg.coding, K=cfg.K)
    header = _header(
        cfg_run,
        {
            "seed": sc.seed,
            "horizon": sc.horizon,
            "W": sc.W,
            "classes": " ".join(names),
            "analytic": verdict.verdict.value,
            "empirical": empirical,
            "slope": slope,
        },
    )
    data = np.column_stack([tr.slots, tr.c_alpha, tr.fresh, tr.departures]).astype(np.int64)
    cols = ["slot", "c_alpha", *(f"fresh[{n}]" for n in names), *(f"departures[{n}]" for n in names)]
    buf = io.StringIO()
    buf.write(header)
    buf.write(",".join(cols) + "\n")
    np.savetxt(buf, data, fmt="%d", delimiter=",")
    (out / "trace.csv").write_text(buf.getvalue())
    psi = service_rates(sc.policy, tbl)
    print(f"analytic: {verdict.verdict.value}  empirical: {empirical}  slope: {slope}")
    print(f"service rates psi = {psi.tolist()} msgs/slot; arrival rates = {[a.mean * sc.W for a in sc.arrivals]} msgs/s")
    print(f"wrote {out / 'trace.csv'} ({len(tr)} samples)")
    return 0


def cmd_verify(cfg: ExperimentConfig, out: Path, args) -> int:
    tab = cfg.exponent_table()
    tbl = cfg.schedule_table(tab)
    pol = cfg.policy(tbl) if "policy" in cfg.raw else synthesize_policy(np.zeros(cfg.J), tbl)
    opts = cfg.raw.get("verify", {})
    results = run_all(
        cfg.channel,
        tbl,
        tab,
        pol,
        region_samples=opts.get("region_samples", 200),
        seed=args.seed if args.seed is not None else opts.get("seed", 0),
        saturation_horizon=args.horizon if args.horizon is not None else opts.get("saturation_horizon", 1_000_000),
    )
    for r in results:
        print(r.line())
    ok = all(r.ok for r in results)
    print("all properties hold" if ok else "some properties FAILED")
    return 0 if ok else 1


COMMANDS = {
    "exponents": cmd_exponents,
    "lengths": cmd_lengths,
    "region": cmd_region,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbcsched", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=Path("."))
        sp.add_argument("--seed", type=int, default=None, help="overrides simulation.seed")
        sp.add_argument("--horizon", type=int, default=None, help="overrides simulation.horizon")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.horizon is not None and args.horizon < 0:
        print("error: --horizon must be nonnegative", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args)
    except DBCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
