"""Monte Carlo parameter sweeps over the oscillator Ising machine.

Each grid point runs ``trials_per_point`` independent trials whose seeds are a
hash of ``(master_seed, point_index, trial_index)``, so results do not depend on
execution order or worker count. Frequency-like axes (``kappa``, ``Ke``,
``detuning``) are given and reported in units of 2 pi (cycles per time unit);
``beta_r`` and ``beta_i`` are dimensionless.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import TWO_PI, MachineParams, draw_omega_offsets
from .integrator import InitialHistory, IntegrationError, IntegratorConfig, integrate
from .ising import GroundTruth, IsingProblem, brute_force_ground, ising_energy
from .readout import (
    RELATIVE_PHASE,
    REGION_I,
    SHIL_REFERENCE,
    NonStationary,
    TrialOutcome,
    Unreadable,
    binarize_relative,
    binarize_shil,
    classify_locking,
    default_lock_tol,
    frequency_offsets,
)

log = logging.getLogger(__name__)

KINDS = ("beta-plane", "arnold", "kappa", "detuning", "single-point")
FREQUENCY_AXES = ("kappa", "Ke", "detuning")
AXIS_ORDER = {
    "beta-plane": ("beta_r", "beta_i"),
    "arnold": ("Ke", "detuning"),
    "kappa": ("kappa",),
    "detuning": ("detuning", "beta_i"),
    "single-point": (),
}
ENERGY_TOL = 1e-9
RELATIVE_WINDOW = 300.0  # 30 delays

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(master_seed: int, point_index: int, trial_index: int) -> int:
    s = splitmix64(master_seed & _MASK64)
    s = splitmix64(s ^ (point_index & _MASK64))
    return splitmix64(s ^ ((trial_index * 0xD1B54A32D192ED03) & _MASK64))


def axis_values(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid ``lo, lo + step, ..., hi`` rounded to 12 decimals."""
    if not step > 0:
        raise ValueError(f"axis step must be positive, got {step}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    if count < 1:
        raise ValueError(f"empty axis [{lo}, {hi}]")
    return np.round(lo + step * np.arange(count), 12)


def apply_point(params: MachineParams, name: str, value: float) -> MachineParams:
    if name in ("beta_r", "beta_i"):
        return params.with_(**{name: float(value)})
    if name == "kappa":
        return params.with_(kappa=TWO_PI * value)
    if name == "Ke":
        return params.with_(Ke=TWO_PI * value)
    if name == "detuning":
        return params.with_(omega_e=2.0 * params.omega0 + TWO_PI * value)
    raise KeyError(f"unknown sweep axis {name!r}")


# --- single trial ----------------------------------------------------------------

def run_trial(params: MachineParams, problem: IsingProblem | None, config: IntegratorConfig,
              seed: int, ground: GroundTruth | None = None, *, amplitude_scale: float = 0.01,
              dispersion_sigma: float = 0.0, lock_tol: float | None = None,
              readout_window: float = 50.0, relative_window: float = RELATIVE_WINDOW,
              keep_trace: bool = False) -> TrialOutcome:
    """Draw initial phases (and frequency offsets), integrate, classify and read out spins.

    Locking and the SHIL readout use the last ``readout_window`` time units. The
    relative-phase readout looks at the last ``relative_window`` units instead: phase
    differences of a pulled network wobble on the scale of a few delays, and a short
    window cannot resolve a frequency difference as small as ``lock_tol``.
    """
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, TWO_PI, size=params.n)
    if dispersion_sigma > 0:
        params = params.with_(omega_offsets=draw_omega_offsets(params.n, dispersion_sigma, params.omega0, rng))
    lock_tol = default_lock_tol(params) if lock_tol is None else lock_tol
    start = config.t_end - readout_window
    rel_start = max(config.t_end - relative_window, 0.0)
    run_cfg = config if keep_trace else replace(config, record_from=min(start, rel_start))
    init = InitialHistory(amplitude_scale=amplitude_scale, phases=phases, rng_seed=seed)
    try:
        traj = integrate(params, problem, run_cfg, init)
    except IntegrationError as exc:
        return TrialOutcome(None, math.nan, False, False, np.full(params.n, np.nan), None, seed,
                            status="failed", message=str(exc))
    window = (start, config.t_end)
    offsets = frequency_offsets(traj, params, window)
    report = classify_locking(offsets, lock_tol)
    out = TrialOutcome(None, math.nan, False, bool(report.locked.all()), offsets, None, seed,
                       classification=report.classification,
                       trajectory=traj if keep_trace else None)
    try:
        if report.classification == REGION_I:
            out.readout_mode = SHIL_REFERENCE
            out.spins = binarize_shil(traj, params, window)
        else:
            out.readout_mode = RELATIVE_PHASE
            if params.kappa == 0 or problem is None:
                raise Unreadable("no mutual coupling to carry a relative-phase readout")
            out.spins = binarize_relative(traj, (rel_start, config.t_end), lock_tol)
    except NonStationary as exc:
        out.status, out.message = "non-stationary", str(exc)
        return out
    except Unreadable as exc:
        out.status, out.message = "unreadable", str(exc)
        return out
    if problem is not None:
        out.energy = ising_energy(problem, out.spins)
        if ground is not None:
            if out.energy < ground.energy - ENERGY_TOL:
                raise AssertionError(
                    f"trial energy {out.energy} below the exact minimum {ground.energy} (seed={seed})"
                )
            out.is_ground = abs(out.energy - ground.energy) <= ENERGY_TOL
    return out


# --- sweeps ----------------------------------------------------------------------

@dataclass
class SweepSpec:
    kind: str
    params: MachineParams
    problem: IsingProblem | None = None
    axes: dict = field(default_factory=dict)
    trials_per_point: int = 200
    master_seed: int = 0
    dispersion_sigma: float = 0.0
    dispersion_mode: str = "per-trial"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    amplitude_scale: float = 0.01
    lock_tol: float | None = None
    readout_window: float = 50.0
    relative_window: float = RELATIVE_WINDOW

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}; expected one of {KINDS}")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        if not (self.readout_window > 0 and self.relative_window > 0):
            raise ValueError("readout windows must be positive")
        if self.dispersion_mode not in ("per-trial", "fixed"):
            raise ValueError(f"dispersion_mode must be 'per-trial' or 'fixed', got {self.dispersion_mode!r}")
        for name in AXIS_ORDER[self.kind]:
            if name not in self.axes:
                raise ValueError(f"{self.kind} sweep needs a {name!r} axis")
        for name, ax in self.axes.items():
            if not np.iterable(ax):
                raise ValueError(f"axis {name!r} must be (min, max, step) or a list of values")

    def axis(self, name: str) -> np.ndarray:
        ax = self.axes[name]
        if isinstance(ax, tuple) and len(ax) == 3:
            return axis_values(*ax)
        return np.round(np.asarray(ax, dtype=float), 12)

    def points(self) -> list[dict]:
        names = AXIS_ORDER[self.kind]
        grids = [self.axis(nm) for nm in names]
        return [dict(zip(names, map(float, combo))) for combo in itertools.product(*grids)]

    def point_params(self, point: dict) -> MachineParams:
        p = self.params
        for name, value in point.items():
            p = apply_point(p, name, value)
        return p


@dataclass
class PointStats:
    point: dict
    trials: int = 0
    ground: int = 0
    excluded: int = 0
    failed: int = 0
    locked: int = 0
    energy_sum: float = 0.0
    readable: int = 0
    min_energy: float = math.inf
    freq_offset_sum: float = 0.0

    def add(self, out: TrialOutcome) -> None:
        self.trials += 1
        if out.status == "failed":
            self.failed += 1
            return
        self.locked += out.locked
        self.freq_offset_sum += float(np.mean(out.mean_freq_offsets))
        if not out.counted:
            self.excluded += 1
            return
        if not math.isnan(out.energy):
            self.readable += 1
            self.energy_sum += out.energy
            self.min_energy = min(self.min_energy, out.energy)
        self.ground += out.is_ground

    @property
    def counted(self) -> int:
        return self.trials - self.excluded

    @property
    def gmp(self) -> float:
        return self.ground / self.counted if self.counted else 0.0

    @property
    def mean_energy(self) -> float:
        return self.energy_sum / self.readable if self.readable else math.nan

    @property
    def locked_fraction(self) -> float:
        return self.locked / self.trials if self.trials else 0.0

    @property
    def mean_freq_offset(self) -> float:
        """Mean of 2w - w_e over trials that ran to completion (rad per time unit)."""
        done = self.trials - self.failed
        return self.freq_offset_sum / done if done else math.nan

    def binomial_sigma(self) -> float:
        n = self.counted
        return math.sqrt(self.gmp * (1 - self.gmp) / n) if n else math.inf


@dataclass
class TransitionFit:
    nu_th: float
    intercept: float
    n_boundary_points: int
    rmse: float
    slope_se: float
    intercept_se: float
    boundary: np.ndarray


@dataclass
class SweepSummary:
    spec: SweepSpec
    stats: list
    ground: GroundTruth | None = None
    fit: TransitionFit | None = None
    fit_error: str = ""
    wall_time: float = 0.0

    def values(self, name: str) -> np.ndarray:
        return self.spec.axis(name)

    def grid(self, attr: str = "gmp", rows: str = "beta_i", cols: str = "beta_r") -> np.ndarray:
        """Dense matrix of a per-point statistic, rows and columns ascending."""
        rv, cv = self.values(rows), self.values(cols)
        out = np.full((len(rv), len(cv)), np.nan)
        ri = {v: i for i, v in enumerate(rv)}
        ci = {v: i for i, v in enumerate(cv)}
        for st in self.stats:
            out[ri[st.point[rows]], ci[st.point[cols]]] = getattr(st, attr)
        return out

    def lookup(self, **point) -> PointStats:
        for st in self.stats:
            if all(math.isclose(st.point[k], v, abs_tol=1e-9) for k, v in point.items()):
                return st
        raise KeyError(point)

    @property
    def failed(self) -> int:
        return sum(st.failed for st in self.stats)

    @property
    def min_energy(self) -> float:
        return min((st.min_energy for st in self.stats), default=math.inf)

    def peak(self) -> PointStats:
        return max(self.stats, key=lambda st: (st.gmp, -self.stats.index(st)))


def _execute(tasks, fn, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def run_sweep(spec: SweepSpec, threads: int = 1, ground: GroundTruth | None = None) -> SweepSummary:
    """Run every trial of every grid point and aggregate per point."""
    t0 = time.perf_counter()
    if spec.problem is not None and ground is None:
        ground = brute_force_ground(spec.problem)
    points = spec.points() if spec.kind != "single-point" else [{}]
    base = spec.params
    fixed_offsets = None
    if spec.dispersion_sigma > 0 and spec.dispersion_mode == "fixed":
        rng = np.random.default_rng(trial_seed(spec.master_seed, _MASK64, 0))
        fixed_offsets = draw_omega_offsets(base.n, spec.dispersion_sigma, base.omega0, rng)
    per_point = []
    for p in points:
        pp = spec.point_params(p)
        if fixed_offsets is not None:
            pp = pp.with_(omega_offsets=fixed_offsets)
        per_point.append(pp)
    sigma = spec.dispersion_sigma if spec.dispersion_mode == "per-trial" else 0.0
    tasks = [(i, k) for i in range(len(points)) for k in range(spec.trials_per_point)]

    def fn(task):
        i, k = task
        return run_trial(per_point[i], spec.problem, spec.integrator,
                         trial_seed(spec.master_seed, i, k), ground,
                         amplitude_scale=spec.amplitude_scale, dispersion_sigma=sigma,
                         lock_tol=spec.lock_tol, readout_window=spec.readout_window,
                         relative_window=spec.relative_window)

    outcomes = _execute(tasks, fn, threads)
    stats = [PointStats(p) for p in points]
    for (i, _), out in zip(tasks, outcomes):
        stats[i].add(out)
    summary = SweepSummary(spec, stats, ground)
    if spec.kind == "beta-plane":
        try:
            summary.fit = fit_transition_line(
                summary.values("beta_r"), summary.values("beta_i"), summary.grid("gmp"))
        except ValueError as exc:
            summary.fit_error = str(exc)
            log.warning("transition fit refused: %s", exc)
    summary.wall_time = time.perf_counter() - t0
    return summary


def sweep_beta_plane(spec: SweepSpec, threads: int = 1) -> SweepSummary:
    if spec.kind != "beta-plane":
        raise ValueError("sweep_beta_plane needs a beta-plane spec")
    return run_sweep(spec, threads)


def sweep_kappa(spec: SweepSpec, threads: int = 1) -> SweepSummary:
    if spec.kind != "kappa":
        raise ValueError("sweep_kappa needs a kappa spec")
    return run_sweep(spec, threads)


def sweep_detuning(spec: SweepSpec, threads: int = 1) -> SweepSummary:
    if spec.kind != "detuning":
        raise ValueError("sweep_detuning needs a detuning spec")
    return run_sweep(spec, threads)


def sweep_arnold(spec: SweepSpec, threads: int = 1) -> SweepSummary:
    """Single driven oscillator over (Ke, detuning); records 2w - w_e per point."""
    if spec.kind != "arnold":
        raise ValueError("sweep_arnold needs an arnold spec")
    if spec.params.n != 1 or spec.problem is not None:
        raise ValueError("the Arnold-tongue map drives a single uncoupled oscillator (n=1, no problem)")
    return run_sweep(replace(spec, params=spec.params.with_(kappa=0.0)), threads)


def is_locked(params: MachineParams, config: IntegratorConfig, seed: int = 0, *,
              amplitude_scale: float = 0.01, lock_tol: float | None = None,
              readout_window: float = 50.0) -> tuple[bool, float]:
    """Lock flag and 2w - w_e of one driven oscillator."""
    out = run_trial(params, None, config, seed, amplitude_scale=amplitude_scale,
                    lock_tol=lock_tol, readout_window=readout_window)
    if out.status == "failed":
        return False, math.nan
    return out.locked, float(out.mean_freq_offsets[0])


def locking_half_width(params: MachineParams, config: IntegratorConfig, *, span: float = None,
                       tol: float = 1e-5, **kw) -> float:
    """Half-width (rad per time unit) of the drive-frequency range that locks one oscillator.

    Bisects each tongue edge outward from the free-running second harmonic.
    """
    free = params.with_(Ke=0.0, kappa=0.0)
    # free-running frequency sets the tongue centre
    _, off = is_locked(free, config, **kw)
    centre = params.lab_omega_e + off
    if not is_locked(params.with_(omega_e=centre), config, **kw)[0]:
        return 0.0
    span = span if span is not None else 20.0 * params.Ke + 0.05

    def edge(sign):
        lo, hi = 0.0, span
        if is_locked(params.with_(omega_e=centre + sign * hi), config, **kw)[0]:
            return hi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if is_locked(params.with_(omega_e=centre + sign * mid), config, **kw)[0]:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return 0.5 * (edge(+1) + edge(-1))


def fit_transition_line(beta_r, beta_i, gmp, hysteresis: int = 2) -> TransitionFit:
    """Least-squares line through the per-column onset of GMP = 0.

    ``gmp[i, j]`` is indexed by ``beta_i[i]`` (ascending) and ``beta_r[j]``.
    In each column, starting from beta_i >= 0, the boundary is the first zero
    cell that follows a positive cell and stays zero for ``hysteresis`` more
    cells (or up to the grid edge).
    """
    beta_r = np.asarray(beta_r, dtype=float)
    beta_i = np.asarray(beta_i, dtype=float)
    gmp = np.asarray(gmp, dtype=float)
    if gmp.shape != (beta_i.size, beta_r.size):
        raise ValueError(f"gmp grid shape {gmp.shape} does not match axes ({beta_i.size}, {beta_r.size})")
    start = int(np.searchsorted(beta_i, -1e-12))
    pts = []
    for j, br in enumerate(beta_r):
        col = gmp[:, j]
        for i in range(max(start, 1), beta_i.size):
            if col[i] == 0 and col[i - 1] > 0 and np.all(col[i:i + hysteresis + 1] == 0):
                pts.append((br, beta_i[i]))
                break
    if len(pts) < 3:
        raise ValueError(f"only {len(pts)} boundary points found; need at least 3 for a line fit")
    pts = np.array(pts)
    x, y = pts[:, 0], pts[:, 1]
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icept)
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    dof = max(1, len(x) - 2)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return TransitionFit(float(slope), float(icept), len(x), rmse,
                         float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1])), pts)


# --- CSV output -------------------------------------------------------------------

def _f(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def write_csv(summary: SweepSummary, path) -> Path:
    """Write the per-kind CSV schema; frequencies divided by 2 pi."""
    kind = summary.spec.kind
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if kind == "beta-plane":
            w.writerow(["beta_r", "beta_i", "trials", "excluded", "gmp", "mean_energy", "locked_fraction"])
            for st in summary.stats:
                w.writerow([_f(st.point["beta_r"]), _f(st.point["beta_i"]), st.trials, st.excluded,
                            _f(st.gmp), _f(st.mean_energy), _f(st.locked_fraction)])
        elif kind == "arnold":
            w.writerow(["ke", "detuning", "freq_offset", "locked"])
            for st in summary.stats:
                w.writerow([_f(st.point["Ke"]), _f(st.point["detuning"]), _f(st.mean_freq_offset / TWO_PI),
                            int(st.locked_fraction >= 0.5)])
        elif kind == "kappa":
            p = summary.spec.params
            w.writerow(["kappa", "beta_r", "beta_i", "trials", "gmp"])
            for st in summary.stats:
                w.writerow([_f(st.point["kappa"]), _f(p.beta_r), _f(p.beta_i), st.trials, _f(st.gmp)])
        elif kind == "detuning":
            w.writerow(["detuning", "beta_i", "trials", "gmp"])
            for st in summary.stats:
                w.writerow([_f(st.point["detuning"]), _f(st.point["beta_i"]), st.trials, _f(st.gmp)])
        else:
            p = summary.spec.params
            w.writerow(["beta_r", "beta_i", "trials", "excluded", "gmp", "mean_energy", "locked_fraction"])
            st = summary.stats[0]
            w.writerow([_f(p.beta_r), _f(p.beta_i), st.trials, st.excluded, _f(st.gmp),
                        _f(st.mean_energy), _f(st.locked_fraction)])
    return path


def write_fit_csv(fit: TransitionFit | None, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nu_th", "intercept", "n_boundary_points", "rmse"])
        if fit is not None:
            w.writerow([_f(fit.nu_th), _f(fit.intercept), fit.n_boundary_points, _f(fit.rmse)])
        else:
            w.writerow(["nan", "nan", 0, "nan"])
    return path


def write_metadata(summary: SweepSummary, path, **extra) -> Path:
    """Spec echo, fit confidence and library versions as YAML (no wall time, so reruns match)."""
    import numba
    import yaml

    from . import __version__

    spec = summary.spec
    p = spec.params
    doc = {
        "kind": spec.kind,
        "problem": getattr(spec.problem, "label", None) if spec.problem is not None else None,
        "trials_per_point": spec.trials_per_point,
        "master_seed": spec.master_seed,
        "dispersion_sigma": spec.dispersion_sigma,
        "dispersion_mode": spec.dispersion_mode,
        "amplitude_scale": spec.amplitude_scale,
        "readout_window": spec.readout_window,
        "relative_window": spec.relative_window,
        "axes": {k: [float(v) for v in spec.axis(k)] for k in AXIS_ORDER[spec.kind]},
        "machine_cycles": {
            "omega0": p.omega0 / TWO_PI, "omega_e": p.omega_e / TWO_PI, "tau": p.tau,
            "gamma0": p.gamma0 / TWO_PI, "K": p.K / TWO_PI, "kappa": p.kappa / TWO_PI,
            "Ke": p.Ke / TWO_PI, "p0": p.p0, "beta_r": p.beta_r, "beta_i": p.beta_i,
        },
        "integrator": {"h": spec.integrator.h, "t_end": spec.integrator.t_end,
                       "frame": "lab" if spec.integrator.frame_freq == 0.0 else "rotating"},
        "totals": {"trials": sum(st.trials for st in summary.stats),
                   "excluded": sum(st.excluded for st in summary.stats),
                   "failed": summary.failed},
        "versions": {"dlim": __version__, "numpy": np.__version__, "numba": numba.__version__},
    }
    if summary.ground is not None:
        doc["ground_truth"] = {"energy": float(summary.ground.energy), "degeneracy": summary.ground.degeneracy}
    if spec.kind == "beta-plane":
        fit = summary.fit
        doc["transition_fit"] = None if fit is None else {
            "nu_th": fit.nu_th, "intercept": fit.intercept,
            "nu_th_ci95": [fit.nu_th - 1.96 * fit.slope_se, fit.nu_th + 1.96 * fit.slope_se],
            "intercept_ci95": [fit.intercept - 1.96 * fit.intercept_se, fit.intercept + 1.96 * fit.intercept_se],
            "n_boundary_points": fit.n_boundary_points, "rmse": fit.rmse,
        }
        if fit is None:
            doc["transition_fit_error"] = summary.fit_error
    doc.update(extra)
    path = Path(path)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
    return path


def write_matrix(matrix: np.ndarray, path) -> Path:
    """Dense heatmap matrix, one row per line (rows ascending), whitespace separated."""
    path = Path(path)
    with open(path, "w") as fh:
        for row in matrix:
            fh.write(" ".join(_f(float(v)) for v in row) + "\n")
    return path
