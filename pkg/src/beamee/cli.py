"""Command-line front end: ``beamee {solve,sweep,trace,validate}``.

Every command writes plain result files into ``--out``: CSV with a header
row and ``.17g`` floats, allocations as JSON.  Outputs depend only on the
configuration and ``--seed``; wall-clock times are left out unless
``--timing`` is given, so reruns are byte-identical.

Exit codes: 0 success, 2 bad configuration, 3 a solver did not converge,
4 invalid input data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .de import de_net_rates
from .mc import mc_net_rate, prop1_validate
from .model import (BeamEEError, ChannelStats, NoConvergence, PowerAllocation, PowerModel,
                    SolverConfig, validate)
from .solver import (random_initial_allocations, solve_ee_lowcomplexity, solve_ee_reference,
                     solve_sumrate)
from .synth import PROFILES, ScenarioSpec, dumps, generate, load_alloc, load_stats

LN2 = math.log(2.0)

SUMMARY_COLUMNS = ["objective", "algorithm", "K", "M", "p_max_dbm", "p_max_w", "p_c_dbm",
                   "ee_nats_per_j", "ee_bits_per_j", "sum_rate_nats", "total_power_w", "branch",
                   "iterations", "converged", "restarts", "best_restart", "ee_mean_nats_per_j",
                   "ee_mean_bits_per_j"]
TRACE_COLUMNS = ["p_max_dbm", "iteration", "ee_nats_per_j", "ee_bits_per_j", "sum_rate_nats",
                 "total_power_w", "branch", "step", "p_opt_w"]
ETA_COLUMNS = ["p_max_dbm", "mm_iteration", "dinkelbach_iteration", "eta_bar"]
VALIDATE_COLUMNS = ["user", "de_rate_nats", "mc_rate_nats", "mc_std_error", "rel_gap"]
PROP1_COLUMNS = ["rotation", "diff_nulled", "se_nulled", "diff_alloc", "se_alloc"]


class ConfigError(BeamEEError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _grid(text: str, kind=float) -> list:
    try:
        vals = [kind(v) for v in str(text).replace(" ", "").split(",") if v != ""]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc
    if not vals:
        raise ConfigError("grids must be nonempty")
    if vals != sorted(vals):
        raise ConfigError(f"grid {text!r} is not sorted")
    return vals


@dataclass
class RunConfig:
    """Resolved options of one invocation."""

    command: str
    out: Path
    objective: str = "ee"
    algorithm: str = "lowcomplexity"
    stats_file: str | None = None
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    xi: float = 5.0
    pc_dbm: float = 30.0
    ps_dbm: float = 40.0
    pmax_dbm: float = 30.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    restarts: int = 5
    seed: int = 0
    jobs: int = 1
    timing: bool = False
    pmax_grid: list[float] | None = None
    m_grid: list[int] | None = None
    pc_grid: list[float] | None = None
    alloc_file: str | None = None
    rotations: int | None = None

    def power_model(self, pc_dbm: float | None = None, pmax_dbm: float | None = None) -> PowerModel:
        return PowerModel.from_dbm(self.xi, self.pc_dbm if pc_dbm is None else pc_dbm, self.ps_dbm,
                                   self.pmax_dbm if pmax_dbm is None else pmax_dbm)

    def stats(self, M: int | None = None) -> ChannelStats:
        if self.stats_file is not None:
            if M is not None:
                raise ConfigError("an M grid needs a generated scenario, not --stats")
            return load_stats(self.stats_file)
        spec = self.scenario
        if M is not None:
            spec = ScenarioSpec(**{**spec.__dict__, "M": M})
        return generate(spec)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("inputs")
    g.add_argument("--config", help="JSON file whose keys are option names (flags override it)")
    g.add_argument("--stats", dest="stats_file", help="ChannelStats JSON file instead of a generated scenario")
    g.add_argument("--M", type=int, default=16, help="BS antennas / beams of the generated scenario")
    g.add_argument("--K", type=int, default=4, help="users of the generated scenario")
    g.add_argument("--N", type=int, default=2, help="receive antennas per user")
    g.add_argument("--profile", choices=PROFILES, default="exponential-beam")
    g.add_argument("--pathloss-db", type=float, default=-120.0)
    g.add_argument("--noise-dbm", type=float, default=-105.0)
    p = common.add_argument_group("power model")
    p.add_argument("--xi", type=float, default=5.0, help="amplifier inefficiency")
    p.add_argument("--pc-dbm", type=float, default=30.0, help="circuit power per antenna")
    p.add_argument("--ps-dbm", type=float, default=40.0, help="static power")
    p.add_argument("--pmax-dbm", type=float, default=30.0, help="power budget (-inf for zero)")
    s = common.add_argument_group("solver")
    s.add_argument("--objective", choices=("ee", "sumrate", "both"), default=None)
    s.add_argument("--algorithm", choices=("lowcomplexity", "reference"), default="lowcomplexity")
    s.add_argument("--restarts", type=int, default=5, help="uniform start plus random starts")
    s.add_argument("--seed", type=int, default=0, help="scenario, restart and Monte-Carlo seed")
    s.add_argument("--mc-samples", type=int, default=10000)
    s.add_argument("--de-refresh", choices=("mm", "dinkelbach"), default="mm")
    s.add_argument("--eps-mm", type=float, default=1e-4)
    s.add_argument("--max-iter-mm", type=int, default=50)
    o = common.add_argument_group("output")
    o.add_argument("--out", default="results", help="output directory")
    o.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    o.add_argument("--timing", action="store_true", help="add wall-time columns (not reproducible)")

    parser = argparse.ArgumentParser(prog="beamee", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="single allocation")
    sw = sub.add_parser("sweep", parents=[common], help="EE over P_max / M / P_c grids")
    sw.add_argument("--pmax-grid", default="-10,-5,0,5,10,15,20,25,30,35,40,45,50",
                    help="comma-separated budgets in dBm")
    sw.add_argument("--m-grid", default=None, help="comma-separated antenna counts")
    sw.add_argument("--pc-grid", default=None, help="comma-separated circuit powers in dBm")
    tr = sub.add_parser("trace", parents=[common], help="MM and Dinkelbach convergence traces")
    tr.add_argument("--pmax-grid", default=None, help="budgets in dBm (default: --pmax-dbm)")
    va = sub.add_parser("validate", parents=[common], help="DE vs Monte-Carlo rates and rotation check")
    va.add_argument("--alloc", dest="alloc_file", default=None,
                    help="allocation JSON (default: the EE-optimal allocation from the uniform start)")
    va.add_argument("--rotations", type=int, default=None,
                    help="random unitary rotations for the beam-domain check (default 50 if M <= 8, else 0)")
    return parser


def _option_names(parser: argparse.ArgumentParser) -> set[str]:
    names = set()
    for sub in _subcommands(parser).values():
        names.update(a.dest for a in sub._actions)
    return names


def _subcommands(parser: argparse.ArgumentParser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def parse_args(argv: list[str] | None = None) -> RunConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            conf = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(conf, dict):
            raise ConfigError("config file must hold a JSON object")
        known = _option_names(parser)
        conf = {k.replace("-", "_"): v for k, v in conf.items()}
        unknown = sorted(set(conf) - known - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sub = _subcommands(parser)[args.command]
        sub.set_defaults(**{k: v for k, v in conf.items() if k != "command"})
        args = parser.parse_args(argv)
    return resolve(args)


def resolve(args: argparse.Namespace) -> RunConfig:
    for name in ("restarts", "jobs", "mc_samples", "max_iter_mm"):
        if getattr(args, name) < 1:
            raise ConfigError(f"--{name.replace('_', '-')} must be >= 1")
    objective = args.objective or ("both" if args.command == "sweep" else "ee")
    if objective == "both" and args.command != "sweep":
        raise ConfigError("--objective both is only meaningful for sweep")
    try:
        solver = SolverConfig(mc_samples=args.mc_samples, seed=args.seed, de_refresh=args.de_refresh,
                              eps_mm=args.eps_mm, max_iter_mm=args.max_iter_mm)
        scenario = ScenarioSpec(M=args.M, K=args.K, N=args.N, profile=args.profile,
                                pathloss_db=args.pathloss_db, noise_dbm=args.noise_dbm, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(command=args.command, out=Path(args.out), objective=objective,
                    algorithm=args.algorithm, stats_file=args.stats_file, scenario=scenario,
                    xi=args.xi, pc_dbm=args.pc_dbm, ps_dbm=args.ps_dbm, pmax_dbm=args.pmax_dbm,
                    solver=solver, restarts=args.restarts, seed=args.seed, jobs=args.jobs,
                    timing=args.timing)
    if args.command in ("sweep", "trace") and args.pmax_grid is not None:
        cfg.pmax_grid = _grid(args.pmax_grid)
    if args.command == "sweep":
        cfg.m_grid = _grid(args.m_grid, int) if args.m_grid else None
        cfg.pc_grid = _grid(args.pc_grid) if args.pc_grid else None
    if args.command == "validate":
        cfg.alloc_file = args.alloc_file
        cfg.rotations = args.rotations
    return cfg


# ---------------------------------------------------------------- solving

def _solve_once(stats, pm, objective, algorithm, alloc0, solver):
    if objective == "sumrate":
        return solve_sumrate(stats, pm, alloc0, solver)
    fn = solve_ee_reference if algorithm == "reference" else solve_ee_lowcomplexity
    return fn(stats, pm, alloc0, solver)


@dataclass
class SolveOutcome:
    alloc: PowerAllocation
    trace: object
    ee: float
    sum_rate: float
    best_restart: int
    ee_all: list[float]
    wall_time: float


def solve_with_restarts(stats: ChannelStats, pm: PowerModel, objective: str, algorithm: str,
                        restarts: int, solver: SolverConfig, extra_starts=()) -> SolveOutcome:
    """Run every start and keep the best by the chosen objective.

    Starts are the uniform allocation, ``restarts - 1`` random full-budget
    allocations and any ``extra_starts`` (e.g. the previous sweep point).
    """
    t0 = time.perf_counter()
    starts = random_initial_allocations(stats.K, stats.M, pm.p_max, restarts, solver.seed)
    starts += [np.asarray(s, dtype=float) for s in extra_starts]
    best, ee_all = None, []
    for i, a0 in enumerate(starts):
        alloc, trace = _solve_once(stats, pm, objective, algorithm, a0, solver)
        rec = trace.records[-1]
        ee_all.append(rec.ee)
        score = rec.ee if objective == "ee" else rec.sum_rate
        if best is None or score > best[0]:
            best = (score, i, alloc, trace)
    _, i, alloc, trace = best
    rec = trace.records[-1]
    return SolveOutcome(alloc, trace, rec.ee, rec.sum_rate, i, ee_all[:restarts],
                        time.perf_counter() - t0)


def summary_row(cfg: RunConfig, stats, pm, objective, out: SolveOutcome, pmax_dbm, pc_dbm) -> dict:
    last = out.trace.records[-1]
    mean = float(np.mean(out.ee_all))
    row = {"objective": objective, "algorithm": cfg.algorithm if objective == "ee" else "waterfill",
           "K": stats.K, "M": stats.M, "p_max_dbm": pmax_dbm, "p_max_w": pm.p_max, "p_c_dbm": pc_dbm,
           "ee_nats_per_j": out.ee, "ee_bits_per_j": out.ee / LN2, "sum_rate_nats": out.sum_rate,
           "total_power_w": out.alloc.total_power(), "branch": last.branch or "-",
           "iterations": out.trace.iterations, "converged": out.trace.converged,
           "restarts": len(out.ee_all), "best_restart": out.best_restart,
           "ee_mean_nats_per_j": mean, "ee_mean_bits_per_j": mean / LN2}
    if cfg.timing:
        row["wall_time_s"] = out.wall_time
    return row


def _columns(base, cfg):
    return base + (["wall_time_s"] if cfg.timing else [])


def run_solve(cfg: RunConfig) -> None:
    stats = cfg.stats()
    pm = cfg.power_model()
    validate(stats, pm)
    out = solve_with_restarts(stats, pm, cfg.objective, cfg.algorithm, cfg.restarts, cfg.solver)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "allocation.json").write_text(dumps(out.alloc), encoding="utf-8")
    write_csv(cfg.out / "summary.csv", _columns(SUMMARY_COLUMNS, cfg),
              [summary_row(cfg, stats, pm, cfg.objective, out, cfg.pmax_dbm, cfg.pc_dbm)])


def _sweep_chain(cfg: RunConfig, M, pc_dbm, objective) -> list[dict]:
    """One P_max curve; the EE design also starts from the previous point's optimum."""
    stats = cfg.stats(M if cfg.m_grid else None)
    rows, prev = [], None
    for pmax_dbm in cfg.pmax_grid:
        pm = cfg.power_model(pc_dbm, pmax_dbm)
        validate(stats, pm)
        extra = [prev] if (prev is not None and objective == "ee") else []
        out = solve_with_restarts(stats, pm, objective, cfg.algorithm, cfg.restarts, cfg.solver, extra)
        prev = out.alloc.lambdas
        rows.append(summary_row(cfg, stats, pm, objective, out, pmax_dbm, pc_dbm))
    return rows


def run_sweep(cfg: RunConfig) -> None:
    objectives = ["ee", "sumrate"] if cfg.objective == "both" else [cfg.objective]
    Ms = cfg.m_grid or [None]
    pcs = cfg.pc_grid or [cfg.pc_dbm]
    chains = [(M, pc, obj) for pc in pcs for M in Ms for obj in objectives]
    if cfg.jobs > 1 and len(chains) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_sweep_chain, [cfg] * len(chains), *zip(*chains)))
    else:
        results = [_sweep_chain(cfg, *c) for c in chains]
    rows = [r for chain in results for r in chain]
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "sweep.csv", _columns(SUMMARY_COLUMNS, cfg), rows)


def run_trace(cfg: RunConfig) -> None:
    stats = cfg.stats()
    rows, eta_rows = [], []
    for pmax_dbm in cfg.pmax_grid or [cfg.pmax_dbm]:
        pm = cfg.power_model(pmax_dbm=pmax_dbm)
        validate(stats, pm)
        t0 = time.perf_counter()
        _, trace = _solve_once(stats, pm, cfg.objective, cfg.algorithm, None, cfg.solver)
        for r in trace.records:
            row = {"p_max_dbm": pmax_dbm, "iteration": r.iteration, "ee_nats_per_j": r.ee,
                   "ee_bits_per_j": r.ee / LN2, "sum_rate_nats": r.sum_rate,
                   "total_power_w": r.total_power, "branch": r.branch or "-", "step": r.step,
                   "p_opt_w": r.p_opt}
            if cfg.timing:
                row["wall_time_s"] = r.wall_time if r.iteration else time.perf_counter() - t0
            rows.append(row)
            for i, eta in enumerate(r.eta_trace):
                eta_rows.append({"p_max_dbm": pmax_dbm, "mm_iteration": r.iteration,
                                 "dinkelbach_iteration": i, "eta_bar": eta})
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "trace.csv", _columns(TRACE_COLUMNS, cfg), rows)
    write_csv(cfg.out / "eta_trace.csv", ETA_COLUMNS, eta_rows)


def run_validate(cfg: RunConfig) -> None:
    stats = cfg.stats()
    pm = cfg.power_model()
    validate(stats, pm)
    if cfg.alloc_file:
        alloc = load_alloc(cfg.alloc_file)
        if (alloc.K, alloc.M) != (stats.K, stats.M):
            raise ConfigError(f"allocation is {alloc.K}x{alloc.M}, stats are {stats.K}x{stats.M}")
    elif pm.p_max > 0:
        alloc, _ = solve_ee_lowcomplexity(stats, pm, None, cfg.solver)
    else:
        alloc = PowerAllocation.zeros(stats.K, stats.M)
    work = stats.normalized()
    de = de_net_rates(work, alloc, cfg.solver)
    rows = []
    for k in range(stats.K):
        mc = mc_net_rate(work, alloc, k, cfg.solver)
        gap = 0.0 if de[k] == mc.mean else abs(de[k] - mc.mean) / abs(mc.mean)
        rows.append({"user": k, "de_rate_nats": de[k], "mc_rate_nats": mc.mean,
                     "mc_std_error": mc.std_error, "rel_gap": gap})
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "validate.csv", VALIDATE_COLUMNS, rows)
    n_rot = cfg.rotations if cfg.rotations is not None else (50 if stats.M <= 8 else 0)
    if n_rot > 0:
        rng = np.random.default_rng([cfg.seed, 0x0F1])
        rep = prop1_validate(work, pm, alloc, n_rot, rng, cfg.solver)
        write_csv(cfg.out / "prop1.csv", PROP1_COLUMNS,
                  [{"rotation": i, "diff_nulled": a, "se_nulled": b, "diff_alloc": c, "se_alloc": d}
                   for i, (a, b, c, d) in enumerate(zip(rep.diff_nulled, rep.se_nulled,
                                                        rep.diff_alloc, rep.se_alloc))])


COMMANDS = {"solve": run_solve, "sweep": run_sweep, "trace": run_trace, "validate": run_validate}


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_args(argv)
        COMMANDS[cfg.command](cfg)
    except NoConvergence as exc:
        print(f"beamee: no convergence: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"beamee: configuration error: {exc}", file=sys.stderr)
        return 2
    except (BeamEEError, ValueError) as exc:
        print(f"beamee: invalid input: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"beamee: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
