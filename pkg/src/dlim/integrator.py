"""Fixed-step RK4 integration of delay differential systems.

The delayed state comes from a ring buffer holding the last ``tau / h + 2`` grid
points with their derivatives. Midpoint stages look up ``c(t - tau + h/2)`` by
cubic Hermite interpolation, which keeps the scheme fourth order. The step is
snapped so that ``tau`` is an exact multiple of ``h``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import MachineParams, im_rhs
from .ising import IsingProblem

OK = 0
NONFINITE = 1


class IntegrationError(RuntimeError):
    """A trajectory overflowed or produced NaN."""


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 0.05
    t_end: float = 1000.0
    record_stride: int = 1
    frame_freq: float | None = None  # None: rotate at half the drive frequency
    record_from: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError(f"step h must be positive, got {self.h}")
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigurationError(f"record_stride must be an integer >= 1, got {self.record_stride}")

    @classmethod
    def lab(cls, **kw) -> "IntegratorConfig":
        kw.setdefault("h", 0.005)
        kw.setdefault("record_stride", 10)
        return cls(frame_freq=0.0, **kw)

    def resolve_frame(self, params: MachineParams) -> float:
        return params.lab_omega_e / 2.0 if self.frame_freq is None else float(self.frame_freq)

    def grid(self, tau: float) -> tuple[float, int]:
        """Step snapped down so that tau / h is an integer, and that integer."""
        m = max(4, math.ceil(tau / self.h - 1e-9))
        return tau / m, m

    def n_steps(self, tau: float) -> int:
        h, _ = self.grid(tau)
        return int(round(self.t_end / h))


@dataclass(frozen=True)
class InitialHistory:
    """Constant-envelope history with per-oscillator phases.

    ``phases=None`` draws them uniformly from [0, 2 pi) with ``rng_seed``.
    """

    amplitude_scale: float = 0.01
    phases: np.ndarray | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.amplitude_scale <= 2:
            raise ValueError(f"amplitude_scale must lie in (0, 2], got {self.amplitude_scale}")

    def resolve_phases(self, n: int) -> np.ndarray:
        if self.phases is not None:
            ph = np.asarray(self.phases, dtype=float)
            if ph.shape != (n,):
                raise ValueError(f"expected {n} initial phases, got shape {ph.shape}")
            return ph
        return np.random.default_rng(self.rng_seed).uniform(0.0, 2.0 * math.pi, size=n)


class TrajectoryHistory:
    """Ring buffer of (time, state, derivative) on a uniform grid.

    Grid index ``k`` lives at time ``(k - m) * h`` where ``m = tau / h``, so the
    seeded history covers indices ``0..m`` (times ``-tau..0``). ``head`` is the
    newest index.
    """

    def __init__(self, n: int, h: float, m: int):
        self.h = h
        self.m = m
        self.capacity = m + 2
        self.times = np.full(self.capacity, np.nan)
        self.states = np.zeros((self.capacity, n), dtype=np.complex128)
        self.derivs = np.zeros((self.capacity, n), dtype=np.complex128)
        self.head = -1

    @property
    def tau(self) -> float:
        return self.m * self.h

    def time_of(self, k: int) -> float:
        return (k - self.m) * self.h

    def push(self, state, deriv) -> None:
        self.head += 1
        slot = self.head % self.capacity
        self.times[slot] = self.time_of(self.head)
        self.states[slot] = state
        self.derivs[slot] = deriv

    @property
    def span(self) -> tuple[float, float]:
        oldest = max(0, self.head - self.capacity + 1)
        return self.time_of(oldest), self.time_of(self.head)

    def interpolate(self, t_query: float) -> np.ndarray:
        lo, hi = self.span
        if not lo <= t_query <= hi:
            raise IndexError(f"t={t_query} outside buffered span [{lo}, {hi}]")
        x = t_query / self.h + self.m
        k = int(math.floor(x))
        theta = x - k
        if theta == 0.0:
            return self.states[k % self.capacity].copy()
        k1 = k + 1
        a, b = k % self.capacity, k1 % self.capacity
        return _hermite(self.states[a], self.derivs[a], self.states[b], self.derivs[b], theta, self.h)


def interpolate_delayed(history: TrajectoryHistory, t_query: float) -> np.ndarray:
    return history.interpolate(t_query)


@njit(cache=True, nogil=True, error_model="numpy")
def _hermite(y0, f0, y1, f1, theta, h):
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + theta
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1


def _make_stepper(f):
    """Build the RK4 stepping loop around a compiled right-hand side ``f``."""

    def advance(args, ring_y, ring_f, ring_t, k0, n_steps, m, h, stride, rec_first, rec_y, rec_t):
        """Advance ``n_steps`` RK4 steps from grid index ``k0``; returns (status, steps done)."""
        cap, n = ring_y.shape
        y = ring_y[k0 % cap].copy()
        k1 = np.empty(n, dtype=np.complex128)
        k2 = np.empty(n, dtype=np.complex128)
        k3 = np.empty(n, dtype=np.complex128)
        k4 = np.empty(n, dtype=np.complex128)
        tmp = np.empty(n, dtype=np.complex128)
        ydm = np.empty(n, dtype=np.complex128)
        f((k0 - m) * h, y, ring_y[(k0 - m) % cap], k1, args)
        # right-hand derivative at the start point; the stored (left) one stays
        # valid until the interval starting here is first looked up
        pending = k1.copy()
        comp = np.zeros(n, dtype=np.complex128)
        half = 0.5 * h
        eighth = 0.125 * h
        sixth = h / 6.0
        r = 0
        if rec_first == 0:
            rec_y[0] = y
            rec_t[0] = (k0 - m) * h
            r = 1
        for s in range(n_steps):
            k = k0 + s
            t = (k - m) * h
            if k == k0 + m:
                ring_f[k0 % cap] = pending
            a = (k - m) % cap
            b = (k - m + 1) % cap
            yd0 = ring_y[a]
            yd1 = ring_y[b]
            fa = ring_f[a]
            fb = ring_f[b]
            for i in range(n):
                ydm[i] = 0.5 * (yd0[i] + yd1[i]) + eighth * (fa[i] - fb[i])
                tmp[i] = y[i] + half * k1[i]
            f(t + half, tmp, ydm, k2, args)
            for i in range(n):
                tmp[i] = y[i] + half * k2[i]
            f(t + half, tmp, ydm, k3, args)
            for i in range(n):
                tmp[i] = y[i] + h * k3[i]
            f(t + h, tmp, yd1, k4, args)
            finite = True
            for i in range(n):
                # compensated (Kahan) accumulation keeps long runs free of roundoff drift
                inc = sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - comp[i]
                total = y[i] + inc
                comp[i] = (total - y[i]) - inc
                y[i] = total
                if not (math.isfinite(y[i].real) and math.isfinite(y[i].imag)):
                    finite = False
            if not finite:
                return NONFINITE, s
            t_new = (k + 1 - m) * h
            slot = (k + 1) % cap
            ring_y[slot] = y
            ring_t[slot] = t_new
            f(t_new, y, yd1, k1, args)
            ring_f[slot] = k1
            done = s + 1
            if done >= rec_first and (done - rec_first) % stride == 0:
                rec_y[r] = y
                rec_t[r] = t_new
                r += 1
        return OK, n_steps

    return advance


# one compiled stepper per right-hand side, built on first use in each process
# (closures over a dispatcher cannot be cached on disk reliably)
_STEPPERS = {}


def _stepper_for(f):
    if f not in _STEPPERS:
        _STEPPERS[f] = njit(nogil=True, error_model="numpy")(_make_stepper(f))
    return _STEPPERS[f]


@dataclass
class Trajectory:
    """Recorded samples in the integration frame plus the final history buffer."""

    t: np.ndarray
    c: np.ndarray
    history: TrajectoryHistory
    frame_freq: float = 0.0

    def lab(self) -> np.ndarray:
        return self.c * np.exp(1j * self.frame_freq * self.t)[:, None]

    def phase(self) -> np.ndarray:
        return np.unwrap(np.angle(self.c), axis=0)

    def window(self, start: float, stop: float | None = None) -> "Trajectory":
        stop = self.t[-1] if stop is None else stop
        keep = (self.t >= start - 1e-9) & (self.t <= stop + 1e-9)
        return Trajectory(self.t[keep], self.c[keep], self.history, self.frame_freq)


def solve_dde(f, args, tau, h, t_end, history, dhistory, *, n=None, record_stride=1, record_from=0.0):
    """Integrate ``y' = f(t, y, y(t - tau))`` from ``t = 0`` to ``t_end``.

    ``f`` is a compiled function ``f(t, y, yd, out, args)``; ``history`` and
    ``dhistory`` give the state and its derivative for ``t <= 0`` (vectorised
    over a 1-D array of times, returning shape ``(len(t), n)``).
    Returns a :class:`Trajectory`.
    """
    m = max(4, math.ceil(tau / h - 1e-9))
    h = tau / m
    grid = (np.arange(m + 1) - m) * h
    y_hist = np.atleast_2d(np.asarray(history(grid), dtype=np.complex128).reshape(m + 1, -1))
    f_hist = np.atleast_2d(np.asarray(dhistory(grid), dtype=np.complex128).reshape(m + 1, -1))
    n = y_hist.shape[1] if n is None else n
    hist = TrajectoryHistory(n, h, m)
    for k in range(m + 1):
        hist.push(y_hist[k], f_hist[k])
    n_steps = int(round(t_end / h))
    return _run(f, args, hist, n_steps, record_stride, record_from)


def _run(f, args, hist: TrajectoryHistory, n_steps: int, stride: int, record_from: float,
         frame_freq: float = 0.0) -> Trajectory:
    k0 = hist.head
    t_start = hist.time_of(k0)
    rec_first = max(0, int(math.ceil((record_from - t_start) / hist.h - 1e-9)))
    # align the recording grid to multiples of the stride from the start
    rec_first = int(math.ceil(rec_first / stride) * stride)
    n_rec = 0 if rec_first > n_steps else (n_steps - rec_first) // stride + 1
    rec_y = np.empty((n_rec, hist.states.shape[1]), dtype=np.complex128)
    rec_t = np.empty(n_rec)
    status, done = _stepper_for(f)(args, hist.states, hist.derivs, hist.times, k0, n_steps, hist.m,
                                   hist.h, stride, rec_first, rec_y, rec_t)
    hist.head = k0 + done
    if status != OK:
        raise IntegrationError(f"non-finite state at t={hist.time_of(hist.head + 1):.6g}")
    return Trajectory(rec_t, rec_y, hist, frame_freq)


def to_rotating_frame(params: MachineParams, frame_freq: float) -> MachineParams:
    """Parameters for ``a = c exp(-i frame_freq t)``, measured from the current frame."""
    if frame_freq == 0:
        return params
    return params.with_(
        omega0=params.omega0 - frame_freq,
        omega_e=params.omega_e - 2.0 * frame_freq,
        frame_freq=params.frame_freq + frame_freq,
    )


def check_step(params: MachineParams, h: float) -> None:
    """Reject steps coarser than 1/20 of the fastest natural period in the frame."""
    rate = max(float(np.max(np.abs(params.omega0 + params.omega_offsets))), params.gamma0 + params.K)
    limit = 2.0 * math.pi / rate / 20.0
    if h > limit * (1 + 1e-12):
        raise ConfigurationError(
            f"step h={h:.4g} exceeds stability guard {limit:.4g} for this frame "
            "(use a smaller step or a rotating frame)"
        )


def integrate(params: MachineParams, problem: IsingProblem | None, config: IntegratorConfig,
              init: InitialHistory) -> Trajectory:
    """Integrate the oscillator network and return the recorded trajectory.

    ``params`` are lab-frame parameters; the run happens in the frame given by
    ``config`` and the trajectory stays in that frame (see ``Trajectory.lab``).
    """
    frame = config.resolve_frame(params)
    fp = to_rotating_frame(params, frame - params.frame_freq)
    h, m = config.grid(fp.tau)
    check_step(fp, h)
    J = np.zeros((fp.n, fp.n)) if problem is None else problem.J
    if problem is not None and problem.n != fp.n:
        raise ValueError(f"problem has {problem.n} spins, parameters describe {fp.n} oscillators")
    phases = init.resolve_phases(fp.n)
    w_rot = fp.omega0 + fp.omega_offsets
    amp = init.amplitude_scale * math.sqrt(fp.p0)
    grid = (np.arange(m + 1) - m) * h
    y_hist = amp * np.exp(1j * (phases[None, :] + w_rot[None, :] * grid[:, None]))
    f_hist = 1j * w_rot[None, :] * y_hist
    hist = TrajectoryHistory(fp.n, h, m)
    for k in range(m + 1):
        hist.push(y_hist[k], f_hist[k])
    n_steps = int(round(config.t_end / h))
    try:
        return _run(im_rhs, fp.kernel_args(J), hist, n_steps, int(config.record_stride),
                    config.record_from, frame_freq=fp.frame_freq)
    except IntegrationError as exc:
        raise IntegrationError(
            f"{exc} (beta_r={params.beta_r:g}, beta_i={params.beta_i:g}, seed={init.rng_seed})"
        ) from None


def write_trace_csv(traj: Trajectory, path) -> int:
    """Write ``t, osc, re, im, power, phase`` rows (phase unwrapped, integration frame)."""
    phase = traj.phase()
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "osc", "re", "im", "power", "phase"])
        for k, t in enumerate(traj.t):
            for j, c in enumerate(traj.c[k]):
                w.writerow([f"{t:.10g}", j, f"{c.real:.12g}", f"{c.imag:.12g}",
                            f"{abs(c) ** 2:.12g}", f"{phase[k, j]:.12g}"])
            rows += 1
    return rows
