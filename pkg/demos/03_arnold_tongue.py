"""
Arnold tongue of a single driven oscillator
===========================================

The locking half-width grows linearly with the binarizing strength Ke. Each
half-width is found by bisection on the drive frequency.
"""

import numpy as np

from dlim.dynamics import TWO_PI, MachineParams
from dlim.integrator import IntegratorConfig
from dlim.sweep import SweepSpec, locking_half_width, sweep_arnold

base = MachineParams(n=1, beta_r=0.3, beta_i=0.2, kappa=0.0)
cfg = IntegratorConfig(t_end=1000)

ke = np.array([0.002, 0.005, 0.01, 0.015, 0.02])
widths = []
for k in ke:
    w = locking_half_width(base.with_(Ke=TWO_PI * k), cfg, tol=1e-5)
    widths.append(w / TWO_PI)
    print(f"Ke/2pi = {k:.3f}: half-width {w / TWO_PI:.6f} cycles")

slope, icept = np.polyfit(ke, widths, 1)
pred = slope * ke + icept
r2 = 1 - np.sum((widths - pred) ** 2) / np.sum((widths - np.mean(widths)) ** 2)
print(f"linear fit: slope {slope:.3f}, intercept {icept:.2e}, R^2 = {r2:.5f}")

# A coarse map of the tongue itself: locked (1) or not (0) on a small grid.
spec = SweepSpec("arnold", base, None, axes={"Ke": [0.0, 0.005, 0.01], "detuning": (-0.006, 0.006, 0.002)},
                 trials_per_point=1, integrator=cfg)
summary = sweep_arnold(spec)
print("rows: detuning ascending, columns: Ke = 0, 0.005, 0.01")
print(summary.grid("locked_fraction", rows="detuning", cols="Ke"))
