"""Ising problem instances, benchmark graph generators and an exhaustive ground-state oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ENUMERATION_LIMIT = 24
_MAX_CONNECT_RETRIES = 1000


class EnumerationTooLarge(ValueError):
    pass


class GraphGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IsingProblem:
    """Symmetric couplings ``J`` (zero diagonal) and biases ``h`` for ``n`` spins."""

    J: np.ndarray
    h: np.ndarray = None
    label: str = ""

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError(f"J must be square, got shape {J.shape}")
        n = J.shape[0]
        if n < 2:
            raise ValueError(f"need at least 2 spins, got {n}")
        if not np.array_equal(J, J.T):
            raise ValueError("J must be symmetric")
        if np.any(np.diag(J) != 0):
            raise ValueError("J must have a zero diagonal")
        h = np.zeros(n) if self.h is None else np.array(self.h, dtype=float)
        if h.shape != (n,):
            raise ValueError(f"h must have length {n}, got shape {h.shape}")
        J.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def has_bias(self) -> bool:
        return bool(np.any(self.h != 0))

    def edges(self):
        """Unordered pairs ``(i, j, J_ij)`` with ``i < j`` and nonzero coupling."""
        iu, ju = np.nonzero(np.triu(self.J, 1))
        return [(int(i), int(j), float(self.J[i, j])) for i, j in zip(iu, ju)]

    def degrees(self) -> np.ndarray:
        return np.count_nonzero(self.J, axis=1)


def as_spins(config, n: int | None = None) -> np.ndarray:
    """Validate a spin configuration and return it as an int8 array of +-1."""
    s = np.asarray(config)
    if s.ndim != 1:
        raise ValueError("spin configuration must be one-dimensional")
    if n is not None and s.shape[0] != n:
        raise ValueError(f"configuration has length {s.shape[0]}, problem has {n} spins")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be exactly -1 or +1")
    return s.astype(np.int8)


@dataclass(frozen=True)
class GroundTruth:
    energy: float
    configs: tuple = field(default_factory=tuple)
    enumerated: int = 0

    @property
    def degeneracy(self) -> int:
        return len(self.configs)


def ising_energy(problem: IsingProblem, config) -> float:
    """H = -sum_{i != j} J_ij s_i s_j + sum_i h_i s_i.

    The pair sum runs over ordered pairs, so every edge contributes twice.
    """
    s = as_spins(config, problem.n).astype(float)
    return float(-(s @ problem.J @ s) + problem.h @ s)


def _energies(problem: IsingProblem, states: np.ndarray) -> np.ndarray:
    # states: (m, n) of +-1 floats
    return -np.einsum("ki,ij,kj->k", states, problem.J, states) + states @ problem.h


def brute_force_ground(problem: IsingProblem) -> GroundTruth:
    """Exact minimum of the Hamiltonian by enumerating every configuration.

    With no bias fields the last spin is pinned to +1 and the mirror images are
    added back, halving the work.
    """
    n = problem.n
    if n > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(
            f"enumeration too large: n={n} exceeds the limit of {ENUMERATION_LIMIT} spins"
        )
    symmetric = not problem.has_bias
    free = n - 1 if symmetric else n
    count = 1 << free
    best = np.inf
    winners = []
    chunk = 1 << 16
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count), dtype=np.int64)
        bits = (idx[:, None] >> np.arange(free)) & 1
        states = 1.0 - 2.0 * bits
        if symmetric:
            states = np.hstack([states, np.ones((len(idx), 1))])
        e = _energies(problem, states)
        # energies are sums of products of the inputs; round off last-bit noise
        e = np.round(e, 9)
        emin = e.min()
        if emin < best:
            best = emin
            winners = []
        if emin == best:
            winners.extend(states[e == best].astype(np.int8))
    configs = []
    for w in winners:
        configs.append(tuple(int(v) for v in w))
        if symmetric:
            configs.append(tuple(int(-v) for v in w))
    configs = tuple(sorted(set(configs), reverse=True))
    return GroundTruth(energy=float(best), configs=configs, enumerated=count)


def mobius_ladder(n_nodes: int, coupling: float = -1.0) -> IsingProblem:
    """Even cycle plus rungs joining antipodal vertices."""
    if n_nodes < 4 or n_nodes % 2:
        raise ValueError(f"Mobius ladder needs an even node count >= 4, got {n_nodes}")
    J = np.zeros((n_nodes, n_nodes))
    half = n_nodes // 2
    for i in range(n_nodes):
        for j in ((i + 1) % n_nodes, (i + half) % n_nodes):
            J[i, j] = J[j, i] = coupling
    return IsingProblem(J, label=f"mobius{n_nodes}")


def _connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return len(seen) == n


def random_graph(n: int, density: float, weight_set=(-1.0, 1.0), seed: int = 0) -> IsingProblem:
    """Erdos-Renyi couplings with weights drawn uniformly from ``weight_set``.

    Edges are redrawn until the graph is connected.
    """
    if n < 2:
        raise ValueError(f"need at least 2 spins, got {n}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    weights = np.asarray(list(weight_set), dtype=float)
    if weights.size == 0:
        raise ValueError("weight_set is empty")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    for _ in range(_MAX_CONNECT_RETRIES):
        keep = rng.random(iu.size) < density
        w = weights[rng.integers(weights.size, size=iu.size)]
        J = np.zeros((n, n))
        J[iu[keep], ju[keep]] = w[keep]
        J = J + J.T
        if _connected(J != 0):
            return IsingProblem(J, label=f"random{n}-d{density:g}-s{seed}")
    raise GraphGenerationError(
        f"no connected graph after {_MAX_CONNECT_RETRIES} draws (n={n}, density={density})"
    )


# --- plain-text problem files -------------------------------------------------

def save_problem(problem: IsingProblem, path) -> None:
    """Write ``n``, the ``n`` rows of J, then one row of h."""
    lines = [str(problem.n)]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in problem.J]
    lines.append(" ".join(f"{v:.17g}" for v in problem.h))
    Path(path).write_text("\n".join(lines) + "\n")


def load_problem(path, label: str | None = None) -> IsingProblem:
    path = Path(path)
    rows = [ln.split() for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty problem file")
    try:
        n = int(rows[0][0])
        J = np.array([[float(v) for v in r] for r in rows[1:n + 1]])
        h = np.array([float(v) for v in rows[n + 1]]) if len(rows) > n + 1 else np.zeros(n)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed problem file ({exc})") from exc
    if J.shape != (n, n):
        raise ValueError(f"{path}: expected {n}x{n} coupling rows, got {J.shape}")
    return IsingProblem(J, h, label=label or path.stem)


_DATA = Path(__file__).parent / "data"

# frozen random graphs, shipped as data files so results stay comparable across versions
FIXTURES = {
    "fig1b": dict(n=8, density=0.5, weight_set=(-1.0, 1.0), seed=11),
    "fig1c": dict(n=8, density=0.5, weight_set=(-1.0, 1.0), seed=7),
    "fig1d": dict(n=8, density=0.6, weight_set=(-1.0, 1.0), seed=23),
}


def named_graph(name: str) -> IsingProblem:
    """Resolve ``mobiusN``, ``ferro2`` or a frozen fixture name (``fig1b``/``fig1c``/``fig1d``)."""
    if name.startswith("mobius"):
        return mobius_ladder(int(name[len("mobius"):] or 8), -1.0)
    if name == "ferro2":
        return IsingProblem(np.array([[0.0, 1.0], [1.0, 0.0]]), label="ferro2")
    path = _DATA / f"{name}.txt"
    if path.exists():
        return load_problem(path, label=name)
    known = ["mobius<N>", "ferro2", *sorted(p.stem for p in _DATA.glob("*.txt"))]
    raise KeyError(f"unknown graph {name!r}; known: {', '.join(known)}")
