"""
Ising problems and the exact oracle
===================================

Builds the benchmark graphs used throughout the package and enumerates their
ground states. Every GMP number elsewhere is measured against this oracle.
"""

import numpy as np

from dlim.ising import brute_force_ground, ising_energy, mobius_ladder, named_graph, random_graph

# The Moebius ladder: a ring of 8 nodes plus the 4 antipodal chords, all
# antiferromagnetic. Every node has degree 3.
mob = mobius_ladder(8, coupling=-1)
print("Moebius ladder degrees:", mob.degrees())

# H = -sum_ij J_ij s_i s_j over ordered pairs, so each edge counts twice.
gt = brute_force_ground(mob)
print(f"ground energy {gt.energy:g}, degeneracy {gt.degeneracy}")
print("one ground state:", gt.configs[0])

# The three frozen random graphs ship with the package.
for name in ("fig1b", "fig1c", "fig1d"):
    p = named_graph(name)
    g = brute_force_ground(p)
    print(f"{name}: {len(p.edges())} edges, E0 = {g.energy:g}, {g.degeneracy} ground states")

# A random configuration is almost never optimal. Sampling shows how rare the
# ground state is for uniform random spins (the kappa = 0 baseline).
prob = named_graph("fig1d")
rng = np.random.default_rng(0)
samples = rng.choice([-1, 1], size=(20000, prob.n))
energies = np.array([ising_energy(prob, s) for s in samples])
g = brute_force_ground(prob)
print(f"random spins hit E0 with frequency {np.mean(energies == g.energy):.4f}"
      f" (exact: {g.degeneracy / 2 ** prob.n:.4f})")

# New problems: connected random graphs with weights drawn from a set.
p = random_graph(10, density=0.4, weight_set=(-1, 1), seed=5)
print("random graph with", len(p.edges()), "edges; E0 =", brute_force_ground(p).energy)
