"""``ftsim`` command line: every subcommand writes one CSV (stdout or ``--out DIR``).

Exit status: 0 ok, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

from . import bist, costmodel, reliability, selector, simulator
from .config import ConfigError, WorkbenchConfig, load_config
from .netlist import (
    FaultSite,
    NetlistError,
    enumerate_faults,
    parse_netlist,
    random_patterns,
    sample_faults,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _num(x: float) -> str:
    """Shortest round-trippable text for a number."""
    if isinstance(x, float) and x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x) if isinstance(x, float) else str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v for v in row])
    return buf.getvalue()


def _seed(args, cfg: WorkbenchConfig) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FTSIM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"FTSIM_SEED must be an integer, got {env!r}") from None
    return cfg.seed if cfg.seed is not None else 0


def cmd_cost(args, cfg):
    rows = []
    names = args.module or list(cfg.modules)
    for name in names:
        _, entry = cfg.module(name)
        for r in costmodel.compare(entry.spec, cfg.ratio_k):
            rows.append((name, r.architecture.value, r.runtime_cycles, r.onchip_gates,
                         r.offchip_memory_gates, r.energy_joules, r.perf_per_logic_ratio))
    return _csv(("module", "architecture", "runtime_cycles", "onchip_gates", "offchip_gates",
                 "energy_joules", "ratio"), rows)


def cmd_select(args, cfg):
    rows = []
    for name, entry in cfg.modules.items():
        cons = entry.constraints
        if cons is None and (args.ht is None or args.tt is None):
            raise ConfigError([f"modules/{name}: no constraints; pass --ht and --tt"])
        ht = args.ht if args.ht is not None else cons.ht
        tt = args.tt if args.tt is not None else cons.tt
        d = selector.select_architecture(entry.spec, selector.Constraints(ht, tt))
        rows.append((name, d.choice.value, d.guard_ftmr, d.guard_proposed, d.guard_sw_time, d.guard_sw_gates))
    return _csv(("module", "decision", "guard_ftmr", "guard_proposed", "guard_sw_time", "guard_sw_gates"), rows)


def cmd_reliability(args, cfg):
    _, entry = cfg.module(args.module)
    gates = {a.value: costmodel.resources(entry.spec, a)[0] for a in costmodel.ARCHITECTURES}
    grid = reliability.linear_grid(args.t_max, args.steps)
    rows = []
    for curve in reliability.reliability_curves(gates, cfg.reliability, grid):
        rows += [(curve.architecture, t, p) for t, p in curve.samples]
    return _csv(("architecture", "t_hours", "probability"), rows)


def _load_circuit(cfg: WorkbenchConfig, seed: int, count: int | None = None):
    if cfg.netlist_path is None:
        raise ConfigError(["netlist: no netlist file configured"])
    try:
        net = parse_netlist(cfg.netlist_path.read_text(), name=cfg.netlist_path.stem)
    except NetlistError as exc:
        raise ConfigError([f"{cfg.netlist_path}: {exc}"]) from None
    if cfg.pattern_path is not None:
        try:
            pats = bist.parse_patterns(cfg.pattern_path.read_text(), net)
        except ValueError as exc:
            raise ConfigError([f"{cfg.pattern_path}: {exc}"]) from None
    else:
        n = count or cfg.coverage.get("random_patterns", 32)
        pats = random_patterns(net, n, seed)
    return net, pats


def cmd_coverage(args, cfg):
    seed = _seed(args, cfg)
    net, pats = _load_circuit(cfg, seed)
    sample = args.faults if args.faults is not None else cfg.coverage.get("fault_sample")
    faults = sample_faults(net, sample, seed) if sample else enumerate_faults(net)
    if args.prioritize or cfg.coverage.get("prioritize", False):
        pats = bist.prioritize_patterns(net, pats)
    if args.block_size is not None:
        size = args.block_size
    else:
        size = bist.default_block_size(len(pats), args.blocks or cfg.coverage.get("blocks", 3))
    try:
        curve = bist.coverage_curve(net, pats, faults, size)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    return _csv(("k", "coverage"), curve)


def _parse_fault(text: str) -> FaultSite:
    net, sep, pol = text.rpartition("/")
    if not sep or pol not in ("sa0", "sa1", "0", "1"):
        raise UsageError(f"fault must look like NET/sa0 or NET/sa1, got {text!r}")
    return FaultSite(net, int(pol[-1]))


def cmd_bist(args, cfg):
    net, pats = _load_circuit(cfg, _seed(args, cfg))
    budget = args.budget if args.budget is not None else cfg.bist.get("budget", len(pats))
    cpp = args.cycles_per_pattern or cfg.bist.get("cycles_per_pattern", bist.DEFAULT_CYCLES_PER_PATTERN)
    fault_text = args.fault or cfg.bist.get("fault")
    fault = _parse_fault(fault_text) if fault_text else None
    if fault is not None and fault.net not in net.index:
        raise ConfigError([f"fault on unknown net {fault.net!r}"])
    try:
        r = bist.run_bist(net, pats, budget, fault, cpp, cfg.dma)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    first = "" if r.first_detecting_pattern is None else r.first_detecting_pattern
    return _csv(("fault_bit", "patterns_applied", "first_detecting_pattern", "test_cycles", "dma_stall_cycles"),
                [(int(r.fault_bit), r.patterns_applied, first, r.test_cycles, r.dma_stall_cycles)])


def _run_config(cfg: WorkbenchConfig, module: str | None, seed: int, fault: str | None,
                p_fault: float | None) -> simulator.RunConfig:
    run = dict(cfg.run)
    name = module or run.pop("module", None)
    run.pop("module", None)
    _, entry = cfg.module(name)
    mode = dict(run.pop("fault_mode", {}))
    if fault is not None:
        mode = {"none": {"kind": "none"},
                "detected": {"kind": "forced", "detectable": True},
                "escape": {"kind": "forced", "detectable": False},
                "bernoulli": {**mode, "kind": "bernoulli"}}[fault]
    if p_fault is not None:
        mode["p_fault"] = p_fault
    mode.setdefault("seed", seed)
    if mode.get("kind") == "bernoulli":
        mode.setdefault("p_fault", entry.spec.p_fault)
    try:
        return simulator.RunConfig(entry.spec, dma=cfg.dma, fault_mode=simulator.FaultMode(**mode), **run)
    except ValueError as exc:
        raise ConfigError([f"run: {exc}"]) from None


def cmd_sim(args, cfg):
    rc = _run_config(cfg, args.module, _seed(args, cfg), args.fault, args.p_fault)
    trace = simulator.simulate_run(rc)
    rows = []
    for e in trace.events:
        detail = f"duration={_num(e.duration)}" + (f" {e.detail}" if e.detail else "")
        rows.append((e.cycle, e.kind, detail))
    rows.append((trace.total_cycles, "End",
                 f"total_energy={_num(trace.total_energy)} silent_escape={int(trace.silent_escape)}"))
    return _csv(("cycle", "event", "detail"), rows)


def cmd_montecarlo(args, cfg):
    seed = _seed(args, cfg)
    trials = args.trials or cfg.montecarlo.get("trials", 100000)
    ps = args.p_fault or cfg.montecarlo.get("p_fault")
    if not ps:
        _, entry = cfg.module(args.module or cfg.run.get("module"))
        ps = [entry.spec.p_fault]
    rows = []
    for p in ps:
        rc = _run_config(cfg, args.module, seed, "bernoulli", p)
        res = simulator.monte_carlo(rc, trials)
        rows.append((p, trials, res.mean_cycles, res.stderr, simulator.analytic_cycles(rc.spec, p)))
    return _csv(("p_fault", "trials", "mean_cycles", "stderr", "analytic_cycles"), rows)


def cmd_qos(args, cfg):
    if not cfg.qos_table:
        raise ConfigError(["qos/table: no QoS table configured"])
    clock = args.clock_hz or cfg.qos.get("clock_hz", 550e6)
    target = args.target_fps if args.target_fps is not None else cfg.qos.get("target_fps", 25.0)
    row = simulator.qos_adapt(cfg.qos_table, clock, target, args.fault)
    if row is None:
        return _csv(("frame_label", "cycles_per_frame", "fps", "fault_present"),
                    [("none", "", "", int(args.fault))])
    cycles = row.cycles_per_frame_fault if args.fault else row.cycles_per_frame_nofault
    return _csv(("frame_label", "cycles_per_frame", "fps", "fault_present"),
                [(row.frame_label, cycles, simulator.frame_rate(cycles, clock), int(args.fault))])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ftsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="write <command>.csv into this directory")
        p.set_defaults(func=func)
        return p

    p = add("cost", cmd_cost, "runtime/gates/energy/ratio for the three architectures")
    p.add_argument("--module", action="append")
    p = add("select", cmd_select, "architecture decision per module")
    p.add_argument("--ht", type=float)
    p.add_argument("--tt", type=float)
    p = add("reliability", cmd_reliability, "fault-free probability curves")
    p.add_argument("--module")
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=8)
    p = add("coverage", cmd_coverage, "fault coverage vs applied pattern blocks")
    p.add_argument("--blocks", type=int)
    p.add_argument("--block-size", type=int)
    p.add_argument("--faults", type=int, help="sample this many faults instead of all")
    p.add_argument("--prioritize", action="store_true")
    p = add("bist", cmd_bist, "one BIST run on the configured netlist")
    p.add_argument("--budget", type=int)
    p.add_argument("--fault", help="injected fault, e.g. s3/sa1")
    p.add_argument("--cycles-per-pattern", type=int)
    p = add("sim", cmd_sim, "event trace of one protocol run")
    p.add_argument("--module")
    p.add_argument("--fault", choices=("none", "detected", "escape", "bernoulli"))
    p.add_argument("--p-fault", type=float)
    p = add("montecarlo", cmd_montecarlo, "Monte Carlo mean runtime vs analytic expectation")
    p.add_argument("--module")
    p.add_argument("--trials", type=int)
    p.add_argument("--p-fault", type=float, action="append")
    p = add("qos", cmd_qos, "frame size chosen by the QoS policy")
    p.add_argument("--target-fps", type=float)
    p.add_argument("--clock-hz", type=float)
    p.add_argument("--fault", action="store_true", help="hardware fault present")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("ftsim: missing subcommand (see --help)")
        if args.config is not None and not args.config.is_file():
            raise ConfigError([f"{args.config}: no such file"])
        cfg = load_config(args.config)
        text = args.func(args, cfg)
        out_dir = args.out or cfg.output_dir
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{args.command}.csv").write_text(text)
        else:
            sys.stdout.write(text)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"ftsim: {problem}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError, KeyError) as exc:
        print(f"ftsim: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
