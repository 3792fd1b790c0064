"""Command-line front end: ``dlim {ground-truth, trial, sweep, gen-graph, validate-config}``.

Exit codes: 0 success, 1 input error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from .config import ConfigError, RunConfig
from .dynamics import TWO_PI
from .integrator import IntegrationError, write_trace_csv
from .ising import (
    EnumerationTooLarge,
    ENUMERATION_LIMIT,
    GraphGenerationError,
    brute_force_ground,
    load_problem,
    mobius_ladder,
    named_graph,
    random_graph,
    save_problem,
)
from .sweep import (
    AXIS_ORDER,
    KINDS,
    run_sweep,
    run_trial,
    write_csv,
    write_fit_csv,
    write_matrix,
    write_metadata,
)

log = logging.getLogger("dlim")

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2

FAST_TRIALS = 50
FAST_STEP = 0.04


class InputError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# --- argument helpers ---------------------------------------------------------

def _numbers(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _axis_arg(text: str):
    """``lo:hi:step`` is an inclusive range, ``a,b,c`` an explicit list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be lo:hi:step, got {text!r}")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"range must be numeric, got {text!r}") from None
        return {"min": lo, "max": hi, "step": step}
    return _numbers(text)


def _add_graph_args(p: argparse.ArgumentParser, default_graph: bool = True) -> None:
    # the generator seed is --seed where no trial seed competes for the name
    seed_flags = ("--graph-seed",) if default_graph else ("--seed", "--graph-seed")
    g = p.add_argument_group("problem selection (pick one)")
    g.add_argument("--graph", help="named graph: mobius<N>, ferro2, fig1b, fig1c, fig1d"
                   + (" (default: sweep.graph from the config, mobius8)" if default_graph else ""))
    g.add_argument("--file", type=Path, help="problem file: n, then n rows of J, then one row of h")
    g.add_argument("--mobius", type=int, metavar="N", help="Moebius ladder with N nodes")
    g.add_argument("--coupling", type=float, default=-1.0,
                   help="Moebius edge weight (default: -1, antiferromagnetic benchmark ladder)")
    g.add_argument("--random", type=int, metavar="N", help="random connected graph with N nodes")
    g.add_argument("--density", type=float, default=0.5, help="edge probability for --random (default: 0.5)")
    g.add_argument("--weights", type=_numbers, default=[-1.0, 1.0],
                   help="edge weights drawn uniformly for --random, e.g. --weights=-1,1 (default: -1,1)")
    g.add_argument(*seed_flags, dest="graph_seed", type=int, default=0,
                   help="generator seed for --random (default: 0)")


def _problem_from_args(args, fallback: str | None = None):
    chosen = [x for x in ("graph", "file", "mobius", "random") if getattr(args, x, None) is not None]
    if len(chosen) > 1:
        raise InputError(f"choose only one of --graph/--file/--mobius/--random, got {', '.join(chosen)}")
    try:
        if args.file is not None:
            return load_problem(args.file)
        if args.mobius is not None:
            return mobius_ladder(args.mobius, args.coupling)
        if args.random is not None:
            return random_graph(args.random, args.density, args.weights, seed=args.graph_seed)
        name = args.graph or fallback
        if name is None:
            raise InputError("no problem given; use --graph, --file, --mobius or --random")
        return named_graph(name)
    except (ValueError, KeyError, OSError, GraphGenerationError) as exc:
        raise InputError(str(exc).strip('"')) from exc


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None) is None:
        return RunConfig()
    try:
        return RunConfig.load(args.config)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc


def _threads(value: int | None) -> int:
    if value is not None:
        if value < 1:
            raise InputError("--threads must be >= 1")
        return value
    env = os.environ.get("DLIM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InputError(f"DLIM_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise InputError("DLIM_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _machine_overrides(cfg: RunConfig, args) -> RunConfig:
    return cfg.with_overrides("machine", **{k: getattr(args, k) for k in ("beta_r", "beta_i", "kappa", "Ke")})


def _fmt_spins(spins) -> str:
    return " ".join("+1" if s > 0 else "-1" for s in spins)


# --- subcommands ----------------------------------------------------------------

def cmd_ground_truth(args) -> int:
    problem = _problem_from_args(args, fallback=None)
    try:
        gt = brute_force_ground(problem)
    except EnumerationTooLarge as exc:
        raise InputError(str(exc)) from exc
    print(f"n: {problem.n}")
    print(f"energy: {gt.energy:g}")
    print(f"degeneracy: {gt.degeneracy}")
    print(f"config: {_fmt_spins(gt.configs[0])}")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write("energy,degeneracy\n")
            fh.write(f"{gt.energy:.10g},{gt.degeneracy}\n")
    return EXIT_OK


def cmd_gen_graph(args) -> int:
    problem = _problem_from_args(args, fallback=None)
    if args.out is None:
        _write_problem(problem, sys.stdout)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        save_problem(problem, args.out)
        print(f"wrote {args.out} (n={problem.n}, edges={len(problem.edges())})")
    return EXIT_OK


def _write_problem(problem, fh) -> None:
    fh.write(f"{problem.n}\n")
    for row in problem.J:
        fh.write(" ".join(f"{v:.10g}" for v in row) + "\n")
    fh.write(" ".join(f"{v:.10g}" for v in problem.h) + "\n")


def cmd_validate_config(args) -> int:
    cfg = _load_config(args)
    print(f"{args.config}: ok")
    if args.show:
        yaml.safe_dump(cfg.to_dict(), sys.stdout, sort_keys=False)
    return EXIT_OK


def cmd_trial(args) -> int:
    cfg = _machine_overrides(_load_config(args), args)
    if args.frame is not None:
        cfg = cfg.with_overrides("integrator", frame=args.frame)
    if args.t_end is not None:
        cfg = cfg.with_overrides("integrator", t_end=args.t_end)
    cfg.validate()
    problem = _problem_from_args(args, fallback=cfg.sweep.graph)
    try:
        ground = brute_force_ground(problem)
    except EnumerationTooLarge as exc:
        raise InputError(str(exc)) from exc
    params = cfg.params(problem.n)
    icfg = cfg.integrator_config()
    out = run_trial(params, problem, icfg, args.seed, ground,
                    amplitude_scale=cfg.sweep.amplitude_scale,
                    dispersion_sigma=cfg.sweep.dispersion_sigma,
                    readout_window=cfg.sweep.readout_window,
                    relative_window=cfg.sweep.relative_window, keep_trace=args.trace is not None)
    print(f"seed: {args.seed}")
    print(f"status: {out.status}")
    if out.status == "failed":
        print(f"error: {out.message}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"classification: {out.classification}")
    print(f"readout: {out.readout_mode}")
    print(f"spins: {_fmt_spins(out.spins) if out.spins is not None else 'none'}")
    print(f"energy: {out.energy:g}")
    print(f"ground energy: {ground.energy:g}")
    print(f"is_ground: {str(bool(out.is_ground)).lower()}")
    if out.message:
        print(f"note: {out.message}")
    if args.trace is not None:
        args.trace.parent.mkdir(parents=True, exist_ok=True)
        samples = write_trace_csv(out.trajectory, args.trace)
        print(f"trace: {args.trace} ({samples} samples x {problem.n} oscillators)")
    return EXIT_OK


def _check_writable(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".dlim-write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InputError(f"output directory {out_dir} is not writable: {exc}") from exc


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    kind = args.kind or cfg.sweep.kind
    sweep_over = {}
    if args.fast:
        sweep_over["trials_per_point"] = FAST_TRIALS
        if kind == "beta-plane":
            sweep_over["beta_r"] = {"min": 0.1, "max": 0.5, "step": FAST_STEP}
            sweep_over["beta_i"] = {"min": -1.0, "max": 1.0, "step": FAST_STEP}
    for name in ("trials", "seed", "dispersion"):
        v = getattr(args, name)
        if v is not None:
            sweep_over[{"trials": "trials_per_point", "seed": "master_seed",
                        "dispersion": "dispersion_sigma"}[name]] = v
    # on a swept axis the flag replaces the axis; otherwise it fixes the machine value
    axes_of_kind = AXIS_ORDER[kind]
    machine_over = {}
    for name in ("beta_r", "beta_i", "kappa", "Ke", "detuning"):
        v = getattr(args, name)
        if v is None:
            continue
        if name in axes_of_kind:
            sweep_over[name] = v
        elif name == "detuning":
            raise InputError("--detuning is only an axis of the detuning and arnold sweeps")
        else:
            if isinstance(v, dict) or len(v) != 1:
                raise InputError(f"--{name.replace('_', '-')} takes a single value for a {kind} sweep")
            machine_over[name] = v[0]
    cfg = cfg.with_overrides("sweep", kind=kind, **sweep_over).with_overrides("machine", **machine_over)
    cfg.validate()
    out_dir = Path(args.out or cfg.output.dir)
    _check_writable(out_dir)
    threads = _threads(args.threads)

    problem = None if kind == "arnold" else _problem_from_args(args, fallback=cfg.sweep.graph)
    ground = None
    if problem is not None:
        try:
            ground = brute_force_ground(problem)
        except EnumerationTooLarge as exc:
            raise InputError(str(exc)) from exc
    spec = cfg.sweep_spec(problem, kind)
    summary = run_sweep(spec, threads=threads, ground=ground)

    stem = kind.replace("-", "_")
    write_csv(summary, out_dir / f"{stem}.csv")
    if kind == "beta-plane":
        write_fit_csv(summary.fit, out_dir / "transition_fit.csv")
        write_matrix(summary.grid("gmp", "beta_i", "beta_r"), out_dir / "gmp_matrix.txt")
        write_matrix(summary.grid("locked_fraction", "beta_i", "beta_r"), out_dir / "locked_matrix.txt")
    elif kind == "detuning":
        write_matrix(summary.grid("gmp", "beta_i", "detuning"), out_dir / "gmp_matrix.txt")
    elif kind == "arnold":
        write_matrix(summary.grid("locked_fraction", "detuning", "Ke"), out_dir / "locked_matrix.txt")
        write_matrix(summary.grid("mean_freq_offset", "detuning", "Ke") / TWO_PI,
                     out_dir / "freq_offset_matrix.txt")
    write_metadata(summary, out_dir / "metadata.yaml")

    shape = "x".join(str(len(summary.values(a))) for a in AXIS_ORDER[kind]) or "1"
    if kind == "arnold":
        best = "locked points {}/{}".format(sum(st.locked > 0 for st in summary.stats), len(summary.stats))
    else:
        pk = summary.peak()
        where = ", ".join(f"{k}={v:g}" for k, v in pk.point.items()) or "single point"
        best = f"peak gmp {pk.gmp:.3f} at {where}"
    fit = ""
    if kind == "beta-plane":
        fit = (f", nu_th {summary.fit.nu_th:.3f} ({summary.fit.n_boundary_points} boundary points)"
               if summary.fit is not None else ", transition fit refused")
    print(f"{kind}: {shape} points x {spec.trials_per_point} trials, {summary.wall_time:.1f} s, "
          f"{best}{fit} -> {out_dir}")
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = Parser(
        prog="dlim",
        description="Delay-line oscillator Ising machine: oracle, single trials and parameter sweeps.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ground-truth", help="exact ground state by exhaustive enumeration",
                       description=f"Enumerate all spin configurations (n <= {ENUMERATION_LIMIT}).")
    _add_graph_args(p, default_graph=False)
    p.add_argument("--out", type=Path, help="also write energy and degeneracy to this CSV file")
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("gen-graph", help="write a problem file",
                       description="Generate a problem and write it in the plain-text matrix format.")
    _add_graph_args(p, default_graph=False)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("validate-config", help="check a config file strictly",
                       description="Parse a config file; unknown keys are reported by name.")
    p.add_argument("config", type=Path)
    p.add_argument("--show", action="store_true", help="print the resolved config with defaults")
    p.set_defaults(func=cmd_validate_config)

    p = sub.add_parser("trial", help="run one trial and print its outcome",
                       description="Integrate one trial from a seeded random start and read out the spins.")
    p.add_argument("--config", type=Path, help="YAML run configuration")
    _add_graph_args(p)
    p.add_argument("--seed", type=int, default=0, help="trial seed for the initial phases (default: 0)")
    p.add_argument("--beta-r", type=float, help="gain compression (default: 0.3, inside the explored 0.1-0.5 band)")
    p.add_argument("--beta-i", type=float,
                   help="nonlinear frequency shift (default: 0.0; -0.16 with beta_r 0.42 sits on the lower locking edge)")
    p.add_argument("--kappa", type=float,
                   help="coupling strength kappa/2pi (default: 0.003)")
    p.add_argument("--Ke", type=float, help="binarizing drive strength Ke/2pi (default: 0.01)")
    p.add_argument("--frame", choices=["rotating", "lab"],
                   help="integration frame (default: rotating at half the drive frequency, h=0.05; "
                        "lab uses h=0.005 and records every 10th step)")
    p.add_argument("--t-end", type=float, help="integration time (default: 1000, i.e. 100 delay times)")
    p.add_argument("--trace", type=Path, help="write the full trajectory to this CSV")
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("sweep", help="run a parameter sweep and write CSV and matrix files",
                       description="Run a Monte Carlo sweep. Axis flags accept lo:hi:step or a,b,c; "
                                   "write --beta-i=-1:1:0.04 when a value starts with a minus sign. "
                                   "Frequencies are in cycles per time unit (divided by 2 pi).")
    p.add_argument("--kind", choices=KINDS, help="sweep family (default: beta-plane)")
    p.add_argument("--config", type=Path, help="YAML run configuration")
    _add_graph_args(p)
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("--threads", type=int,
                   help="worker threads (default: $DLIM_THREADS, else the number of CPUs)")
    p.add_argument("--fast", action="store_true",
                   help=f"desk-scale profile: {FAST_TRIALS} trials per point and beta step {FAST_STEP} "
                        "instead of 200 trials and step 0.02")
    p.add_argument("--trials", type=int,
                   help="trials per grid point (default: 200)")
    p.add_argument("--seed", type=int, help="master seed (default: 0)")
    p.add_argument("--dispersion", type=float,
                   help="relative std of natural frequencies (default: 0; 1e-3 probes robustness)")
    p.add_argument("--beta-r", type=_axis_arg,
                   help="beta_r axis or fixed value (default axis: 0.1:0.5:0.02; "
                        "fixed default 0.3)")
    p.add_argument("--beta-i", type=_axis_arg,
                   help="beta_i axis or fixed value (default axis: -1:1:0.02; fixed default 0)")
    p.add_argument("--kappa", type=_axis_arg,
                   help="kappa/2pi axis or fixed value (default axis: 0.003,...,0.018 in steps of "
                        "0.003; fixed default 0.003)")
    p.add_argument("--Ke", type=_axis_arg,
                   help="Ke/2pi axis or fixed value (default axis: 0.002:0.02:0.002; fixed default 0.01)")
    p.add_argument("--detuning", type=_axis_arg,
                   help="(w_e - 2 w0)/2pi axis (default: -0.005:0.005:0.001 around resonance)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntegrationError, FloatingPointError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
