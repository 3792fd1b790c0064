"""Right-hand side of the coupled delay-line oscillator model.

Each spin is a complex amplitude ``c_j`` obeying

    dc_j/dt = (i w_j - g0) c_j
              + K [1 - b_r u_j] exp(i b_i u_j) c_j(t - tau)
              + Ke exp(i w_e t) conj(c_j)
              + kappa sum_{i != j} J_ij c_i / |c_i|

with ``u_j = (|c_j(t - tau)|^2 - p0) / p0``. Free oscillations rotate as
``exp(+i w t)`` so the conjugate injection term is resonant at ``w_e ~ 2 w0``.
The conjugate (``exp(-i w t)``) form is recovered by conjugating every field and
negating ``w_e``; ``beta_i`` keeps the same meaning in both.

When integrating in a frame rotating at ``frame_freq`` the free frequency and
drive frequency are shifted and the delayed term picks up the constant phase
``exp(-i frame_freq tau)``; ``MachineParams.frame_freq`` records that shift.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .ising import IsingProblem

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
AMPLITUDE_FLOOR = 1e-12


@dataclass(frozen=True)
class MachineParams:
    """Physical constants of the loop. Angular quantities are in rad per time unit."""

    n: int
    omega0: float = TWO_PI * 1.0
    gamma0: float = TWO_PI * 0.05
    K: float = TWO_PI * 0.06
    beta_r: float = 0.3
    beta_i: float = 0.0
    p0: float = 1.0
    tau: float = 10.0
    Ke: float = TWO_PI * 0.01
    omega_e: float = TWO_PI * 2.0 * 1.0015
    kappa: float = TWO_PI * 0.003
    omega_offsets: np.ndarray = None
    frame_freq: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        for name in ("gamma0", "K", "p0", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        offsets = np.zeros(self.n) if self.omega_offsets is None else np.array(self.omega_offsets, dtype=float)
        if offsets.shape != (self.n,):
            raise ValueError(f"omega_offsets must have length {self.n}, got shape {offsets.shape}")
        offsets.setflags(write=False)
        object.__setattr__(self, "omega_offsets", offsets)
        if self.K <= self.gamma0:
            warnings.warn(
                f"gain K={self.K:.4g} does not exceed loss gamma0={self.gamma0:.4g}; "
                "the loop is below oscillation threshold",
                stacklevel=3,
            )

    def with_(self, **changes) -> "MachineParams":
        return replace(self, **changes)

    @property
    def detuning(self) -> float:
        """Drive detuning ``w_e - 2 w0`` in the lab frame."""
        return self.omega_e - 2.0 * self.omega0

    @property
    def lab_omega_e(self) -> float:
        return self.omega_e + 2.0 * self.frame_freq

    def kernel_args(self, J: np.ndarray):
        """Pack parameters into the tuple consumed by the compiled right-hand side."""
        omega = (self.omega0 + self.omega_offsets).astype(np.float64)
        delay_phase = complex(math.cos(self.frame_freq * self.tau), -math.sin(self.frame_freq * self.tau))
        return (
            omega,
            float(self.gamma0),
            float(self.K),
            float(self.beta_r),
            float(self.beta_i),
            float(self.p0),
            float(self.Ke),
            float(self.omega_e),
            float(self.kappa),
            delay_phase,
            np.ascontiguousarray(J, dtype=np.float64),
            AMPLITUDE_FLOOR * math.sqrt(self.p0),
            np.empty(self.n, dtype=np.complex128),  # scratch, one per integration
        )


@dataclass(frozen=True)
class OscillatorState:
    c: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        c = np.array(self.c, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise ValueError("oscillator state contains non-finite entries")
        object.__setattr__(self, "c", c)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.c) ** 2


@njit(cache=True, nogil=True, error_model="numpy")
def im_rhs(t, y, yd, out, args):
    """Compiled right-hand side; writes dc/dt into ``out``.

    ``y`` is c(t), ``yd`` is c(t - tau), ``args`` comes from ``MachineParams.kernel_args``.
    """
    omega, gamma0, K, beta_r, beta_i, p0, Ke, omega_e, kappa, delay_phase, J, floor, unit = args
    n = y.shape[0]
    shil = Ke * complex(math.cos(omega_e * t), math.sin(omega_e * t))
    for i in range(n):
        a = abs(y[i])
        if a > floor:
            unit[i] = y[i] / a
        else:
            unit[i] = 0.0
    for j in range(n):
        d = yd[j]
        u = (d.real * d.real + d.imag * d.imag - p0) / p0
        g = K * (1.0 - beta_r * u)
        ph = beta_i * u
        gain = complex(g * math.cos(ph), g * math.sin(ph)) * delay_phase
        acc = 0j
        for i in range(n):
            w = J[i, j]
            if w != 0.0:
                acc += w * unit[i]
        c = y[j]
        out[j] = (complex(-gamma0, omega[j]) * c + gain * d
                  + shil * c.conjugate() + kappa * acc)


def _check_problem(params: MachineParams, problem: IsingProblem | None) -> np.ndarray:
    if problem is None:
        return np.zeros((params.n, params.n))
    if problem.n != params.n:
        raise ValueError(f"problem has {problem.n} spins, parameters describe {params.n} oscillators")
    return problem.J


def drive_term(params: MachineParams, state_now: OscillatorState, problem: IsingProblem | None, j: int) -> complex:
    """Injection plus phase-only coupling acting on oscillator ``j`` at ``state_now.t``."""
    J = _check_problem(params, problem)
    c = state_now.c
    floor = AMPLITUDE_FLOOR * math.sqrt(params.p0)
    shil = params.Ke * np.exp(1j * params.omega_e * state_now.t) * np.conj(c[j])
    acc = 0j
    for i in range(params.n):
        if i == j or J[i, j] == 0:
            continue
        a = abs(c[i])
        if a <= floor:
            log.debug("oscillator %d amplitude %.3g below floor; its coupling term is dropped", i, a)
            continue
        acc += J[i, j] * c[i] / a
    return complex(shil + params.kappa * acc)


def rhs(params: MachineParams, state_now: OscillatorState, state_delayed, problem: IsingProblem | None) -> np.ndarray:
    """dc/dt for all oscillators given c(t) and the delayed c(t - tau)."""
    J = _check_problem(params, problem)
    y = np.asarray(state_now.c, dtype=np.complex128)
    yd = np.asarray(state_delayed, dtype=np.complex128)
    if yd.shape != y.shape:
        raise ValueError(f"delayed state shape {yd.shape} does not match {y.shape}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yd))):
        raise FloatingPointError("non-finite oscillator state")
    out = np.empty_like(y)
    im_rhs(float(state_now.t), y, yd, out, params.kernel_args(J))
    return out


def steady_power_ratio(params: MachineParams) -> float:
    """|c|^2 / p0 of the free-running (undriven) oscillator when beta_i = 0."""
    return 1.0 + (1.0 - params.gamma0 / params.K) / params.beta_r


def draw_omega_offsets(n: int, sigma_rel: float, omega0: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean normal frequency offsets with standard deviation ``sigma_rel * omega0``."""
    if sigma_rel <= 0:
        return np.zeros(n)
    return rng.normal(0.0, sigma_rel * omega0, size=n)


__all__ = [
    "MachineParams",
    "OscillatorState",
    "drive_term",
    "rhs",
    "im_rhs",
    "steady_power_ratio",
    "draw_omega_offsets",
    "TWO_PI",
]
