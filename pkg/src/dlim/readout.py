"""Readout of oscillator trajectories: frequencies, locking and spin binarization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MachineParams
from .integrator import Trajectory

MIN_WINDOW_SAMPLES = 100
PHASE_VARIANCE_LIMIT = 0.1  # rad^2
RELATIVE_PHASE_TOL = math.pi / 4

REGION_I = "region-I"
REGION_II = "region-II"
UNLOCKED = "unlocked"

SHIL_REFERENCE = "shil-reference"
RELATIVE_PHASE = "relative-phase"


class ReadoutError(ValueError):
    """The trajectory does not support a spin readout (too short, drifting, incoherent)."""


class NonStationary(ReadoutError):
    pass


class Unreadable(ReadoutError):
    pass


def default_lock_tol(params: MachineParams) -> float:
    return 1e-3 * (params.omega0 + params.frame_freq)


@dataclass(frozen=True)
class LockingReport:
    freq_offsets: np.ndarray
    locked: np.ndarray
    classification: str
    coherent: bool = False


@dataclass
class TrialOutcome:
    spins: np.ndarray | None
    energy: float
    is_ground: bool
    locked: bool
    mean_freq_offsets: np.ndarray
    readout_mode: str | None
    seed: int
    classification: str = UNLOCKED
    status: str = "ok"  # ok | non-stationary | unreadable | failed
    message: str = ""
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def counted(self) -> bool:
        """Whether the trial enters the GMP denominator."""
        return self.status in ("ok", "failed")


def _window_mask(t: np.ndarray, window) -> np.ndarray:
    if window is None:
        return np.ones_like(t, dtype=bool)
    start, stop = window
    return (t >= start - 1e-9) & (t <= stop + 1e-9)


def estimate_frequency(t, c, window=None, frame_freq: float = 0.0) -> float:
    """Lab-frame angular frequency of one oscillator from a least-squares phase slope.

    ``c`` is the complex trace in a frame rotating at ``frame_freq``.
    """
    t = np.asarray(t, dtype=float)
    c = np.asarray(c)
    mask = _window_mask(t, window)
    if mask.sum() < MIN_WINDOW_SAMPLES:
        raise ReadoutError(f"window holds {mask.sum()} samples, need at least {MIN_WINDOW_SAMPLES}")
    tw = t[mask]
    phase = np.unwrap(np.angle(c[mask]))
    tc = tw - tw.mean()
    slope = np.dot(tc, phase - phase.mean()) / np.dot(tc, tc)
    return float(slope + frame_freq)


def frequency_offsets(traj: Trajectory, params: MachineParams, window=None) -> np.ndarray:
    """Per-oscillator 2 w_j - w_e in the lab frame."""
    w = np.array([estimate_frequency(traj.t, traj.c[:, j], window, traj.frame_freq)
                  for j in range(traj.c.shape[1])])
    return 2.0 * w - params.lab_omega_e


def classify_locking(freq_offsets, lock_tol: float) -> LockingReport:
    """Per-oscillator lock flags and the region label.

    ``region-I``: every oscillator locked to the drive. ``region-II``: some
    locked, or none locked but all sharing one frequency (mutually coherent).
    ``unlocked`` otherwise.
    """
    off = np.asarray(freq_offsets, dtype=float)
    locked = np.abs(off) < lock_tol
    coherent = bool(off.size and (off.max() - off.min()) < lock_tol)
    if locked.all():
        cls = REGION_I
    elif locked.any() or coherent:
        cls = REGION_II
    else:
        cls = UNLOCKED
    return LockingReport(off, locked, cls, coherent)


def _spins_from(psi: np.ndarray) -> np.ndarray:
    return np.where(np.cos(psi - psi[0]) > 0, 1, -1).astype(np.int8)


def shil_phases(traj: Trajectory, params: MachineParams, window=None):
    """Phase of each oscillator relative to the drive's half-frequency reference.

    Returns (circular mean, variance of the unwrapped phase) per oscillator.
    """
    mask = _window_mask(traj.t, window)
    t = traj.t[mask]
    ref_rate = params.lab_omega_e / 2.0 - traj.frame_freq
    psi_t = np.unwrap(np.angle(traj.c[mask]), axis=0) - ref_rate * t[:, None]
    mean = np.angle(np.exp(1j * psi_t).mean(axis=0))
    # variance about the circular mean, unwrapped so no 2 pi jumps leak in
    dev = psi_t - mean
    dev -= 2 * np.pi * np.round(dev.mean(axis=0) / (2 * np.pi))
    return mean, (dev ** 2).mean(axis=0) - dev.mean(axis=0) ** 2


def binarize_shil(traj: Trajectory, params: MachineParams, window=None,
                  variance_limit: float = PHASE_VARIANCE_LIMIT) -> np.ndarray:
    """Spins from phases relative to the injection reference, gauge-fixed on oscillator 0."""
    psi, var = shil_phases(traj, params, window)
    if np.any(var > variance_limit):
        j = int(np.argmax(var))
        raise NonStationary(f"oscillator {j} phase variance {var[j]:.3g} rad^2 exceeds {variance_limit}")
    return spins_from_phases(psi)


def spins_from_phases(psi) -> np.ndarray:
    """Half-plane decision around the first oscillator's phase."""
    return _spins_from(np.asarray(psi, dtype=float))


def binarize_relative(traj: Trajectory, window=None, lock_tol: float | None = None,
                      phase_tol: float = RELATIVE_PHASE_TOL) -> np.ndarray:
    """Spins from phase differences to oscillator 0; common drift cancels.

    Requires the relative phases to be stationary and close to 0 or pi.
    """
    mask = _window_mask(traj.t, window)
    t = traj.t[mask]
    ph = np.unwrap(np.angle(traj.c[mask]), axis=0)
    rel = ph - ph[:, :1]
    if lock_tol is not None and len(t) > 1:
        tc = t - t.mean()
        slopes = tc @ (rel - rel.mean(axis=0)) / np.dot(tc, tc)
        if np.any(np.abs(2.0 * slopes) >= lock_tol):
            raise Unreadable("oscillators are not mutually frequency-coherent")
    mean = np.angle(np.exp(1j * rel).mean(axis=0))
    if np.any(np.abs(np.sin(mean)) > math.sin(phase_tol)):
        raise Unreadable("relative phases are not binarized near 0 or pi")
    return _spins_from(mean)
