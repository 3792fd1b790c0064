"""
GMP over the nonlinearity plane
===============================

A coarse beta-plane sweep on the Moebius ladder. Above a line
beta_i = nu_th * beta_r + const the GMP collapses to zero even though all
oscillators stay locked to the drive. The full-resolution map is
``dlim sweep --kind beta-plane --graph mobius8 --fast`` (tens of minutes).
"""

import numpy as np

from dlim.dynamics import MachineParams
from dlim.ising import named_graph
from dlim.sweep import SweepSpec, run_sweep

prob = named_graph("mobius8")
spec = SweepSpec("beta-plane", MachineParams(n=prob.n), prob,
                 axes={"beta_r": (0.1, 0.5, 0.1), "beta_i": (-0.4, 1.0, 0.1)},
                 trials_per_point=10, master_seed=1)
summary = run_sweep(spec)

gmp = summary.grid("gmp")
lock = summary.grid("locked_fraction")
print("GMP (rows beta_i descending, columns beta_r = 0.1 ... 0.5)")
for bi, row, lrow in zip(summary.values("beta_i")[::-1], gmp[::-1], lock[::-1]):
    cells = " ".join(f"{g:4.1f}{'*' if l < 0.5 else ' '}" for g, l in zip(row, lrow))
    print(f"{bi:5.1f}  {cells}")
print("(* = most trials not locked to the drive)")

if summary.fit is not None:
    f = summary.fit
    print(f"transition line: beta_i = {f.nu_th:.2f} beta_r + {f.intercept:.2f}"
          f" from {f.n_boundary_points} boundary points")
else:
    print("transition fit refused:", summary.fit_error)
print(f"lowest energy seen {summary.min_energy:g} vs exact {summary.ground.energy:g}")
