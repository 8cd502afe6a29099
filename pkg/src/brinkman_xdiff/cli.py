"""Command-line entry point.

Exit codes: 0 all verdicts pass, 1 some verdict fails or the run broke down,
2 a hypothesis of the experiment was violated, 64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_problem, parse_config
from .core import Grid1D
from .elliptic import apply_K, apply_L, assemble, green_solve, operator_suite
from .errors import BrinkmanError, ConfigurationError, HypothesisViolated, SimulationError
from .experiments import run_boundedness, run_decay, run_decay_diagonal, run_localization, run_stability
from .dynamics import simulate
from .io import fmt, write_diagnostics_csv, write_manifest, write_states_csv, write_table

log = logging.getLogger("brinkman_xdiff")

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_USAGE = 0, 1, 2, 64
COMMANDS = ("simulate", "decay", "decay-diagonal", "sweep-eps", "stability", "boundedness", "operator-check", "bench")
NEEDS_CONFIG = COMMANDS[:6]
DEFAULT_EPS_LIST = (1e-1, 1e-2, 1e-3)
DEFAULT_DELTA = 1e-2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="brinkman-xdiff", description="Brinkman cross-diffusion simulator and experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=name in NEEDS_CONFIG, help="run configuration file")
        cmd.add_argument("--out", default="./out", help="output directory (default ./out)")
        cmd.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
        if name == "bench":
            cmd.add_argument("--sizes", default=",".join(str(2**k) for k in range(7, 13)))
            cmd.add_argument("--repeats", type=int, default=5)
            cmd.add_argument("--eps", type=float, default=1.0)
    return parser


# --- experiment runners -------------------------------------------------------


def _run_simulate(problem, cfg):
    traj = simulate(problem)
    return "states", traj, [], None


def _run_decay(problem, cfg):
    rep = run_decay(problem, mu=cfg.experiment.get("mu"))
    return rep.name, rep.trajectory, rep.verdicts, rep.table()


def _run_decay_diagonal(problem, cfg):
    rep = run_decay_diagonal(problem)
    return rep.name, rep.trajectory, rep.verdicts, rep.table()


def _run_sweep(problem, cfg):
    rep = run_localization(problem, cfg.experiment.get("eps_list", DEFAULT_EPS_LIST))
    return rep.name, rep.trajectory, rep.verdicts, rep.table()


def _run_stability(problem, cfg):
    rep = run_stability(problem, cfg.experiment.get("delta", DEFAULT_DELTA))
    return rep.name, rep.trajectory, rep.verdicts, rep.table()


def _run_boundedness(problem, cfg):
    rep = run_boundedness(problem, slack=cfg.experiment.get("slack", 0.1))
    return rep.name, rep.trajectory, rep.verdicts, rep.table()


RUNNERS = {
    "simulate": _run_simulate,
    "decay": _run_decay,
    "decay-diagonal": _run_decay_diagonal,
    "sweep-eps": _run_sweep,
    "stability": _run_stability,
    "boundedness": _run_boundedness,
}


def _manifest(cfg, command, traj, verdicts, wall, status):
    final = None
    if traj is not None and traj.diagnostics:
        rec = traj.diagnostics[-1]
        from .entropy import diagnostics_header, diagnostics_row

        final = dict(zip(diagnostics_header(len(rec.mass)), diagnostics_row(rec)))
    return {
        "command": command,
        "config": cfg.echo(),
        "final_diagnostics": final,
        "status": status,
        "steps": traj.steps if traj is not None else 0,
        "verdicts": [{"criterion": v.criterion, "passed": v.passed, "measured": v.measured, "bound": v.bound} for v in verdicts],
        "version": __version__,
        "wall_clock": wall,
    }


def _write_outputs(out, name, problem, traj, table, manifest):
    out.mkdir(parents=True, exist_ok=True)
    n = problem.params.n
    if name == "states":
        write_states_csv(traj, out / "states.csv", problem.grid, n)
    elif table is not None:
        header, rows = table
        write_table(out / f"{name}.csv", header, rows)
    write_diagnostics_csv(traj, out / "diagnostics.csv", n)
    write_manifest(out / "manifest.json", manifest)


def run_experiment(command, config_path, out):
    cfg = parse_config(config_path)
    problem = build_problem(cfg)
    out = Path(out)
    start = time.perf_counter()
    try:
        name, traj, verdicts, table = RUNNERS[command](problem, cfg)
    except SimulationError as exc:
        wall = time.perf_counter() - start
        status = "hypothesis_violated" if isinstance(exc, HypothesisViolated) else "failed"
        log.error("%s", exc)
        traj = exc.partial
        if traj is not None:
            _write_outputs(out, "states", problem, traj, None, _manifest(cfg, command, traj, [], wall, status))
        else:
            write_manifest(out / "manifest.json", _manifest(cfg, command, None, [], wall, status))
        print(f"FAIL {command} {status}: {exc}")
        return EXIT_HYPOTHESIS if isinstance(exc, HypothesisViolated) else EXIT_FAIL
    wall = time.perf_counter() - start
    ok = all(v.passed for v in verdicts)
    _write_outputs(out, name, problem, traj, table, _manifest(cfg, command, traj, verdicts, wall, "ok" if ok else "failed"))
    for v in verdicts:
        print(v.line())
    log.info("%s finished in %.3f s, %d steps, outputs in %s", command, wall, traj.steps, out)
    return EXIT_OK if ok else EXIT_FAIL


def run_operator_check():
    rows = operator_suite()
    print("identity,max_violation,tolerance,pass")
    for name, val, tol, passed in rows:
        print(f"{name},{fmt(val)},{fmt(tol)},{str(bool(passed)).lower()}")
    return EXIT_OK if all(r[3] for r in rows) else EXIT_FAIL


def _median_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run_bench(sizes, repeats, eps):
    try:
        sizes = [int(s) for s in sizes.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--sizes must be comma-separated integers, got {sizes!r}") from None
    if not sizes or min(sizes) < 2 or repeats < 1 or not eps > 0:
        raise UsageError("bench needs sizes >= 2, repeats >= 1 and eps > 0")
    rng = np.random.default_rng(0)
    print("M,apply_L_s,green_solve_s,apply_K_s")
    for m in sizes:
        grid = Grid1D(-1.0, 1.0, m)
        op = assemble(grid, eps, "cell")
        g = rng.normal(size=m)
        t_l = _median_time(lambda: apply_L(op, g), repeats)
        t_g = _median_time(lambda: green_solve(grid, g, eps), repeats)
        t_k = _median_time(lambda: apply_K(op, g), repeats)
        print(f"{m},{t_l:.6e},{t_g:.6e},{t_k:.6e}")
    return EXIT_OK


def dispatch(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given")
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        if args.command == "operator-check":
            return run_operator_check()
        if args.command == "bench":
            return run_bench(args.sizes, args.repeats, args.eps)
        return run_experiment(args.command, args.config, args.out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrinkmanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None):
    return dispatch(sys.argv[1:] if argv is None else argv)
