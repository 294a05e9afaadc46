"""Instance generators: path, grid, random-graph, dumbbell, expander-ish.

Every generated matrix passes validate_sddm by construction; weights and
surpluses are chosen so the diagonal never exceeds the declared U.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SddmMatrix, validate_sddm

FAMILIES = ("path", "grid", "random-graph", "dumbbell", "expander-ish")
SURPLUS_MODES = ("endpoint", "scattered", "single", "max")


@dataclass(frozen=True)
class InstanceSpec:
    family: str
    n: int
    U: int
    density: float = 0.1
    surplus: str = "scattered"
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.surplus not in SURPLUS_MODES:
            raise ValueError(f"unknown surplus mode {self.surplus!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.U < 2:
            raise ValueError("U must be at least 2")


def _apply_surplus(wdeg: np.ndarray, U: int, mode: str,
                   rng: np.random.Generator, labels: np.ndarray) -> np.ndarray:
    """Per-vertex surplus: diag <= U, at least one strictly dominant row
    in every connected component."""
    n = len(wdeg)
    room = U - wdeg
    surplus = np.zeros(n, dtype=np.int64)
    candidates = np.flatnonzero(room > 0)
    if len(candidates) == 0:
        raise ValueError("no room for dominance surplus; increase U")
    if mode == "endpoint":
        surplus[candidates[0]] = 1
        surplus[candidates[-1]] = 1
    elif mode == "single":
        surplus[candidates[0]] = 1
    elif mode == "max":
        surplus = room.copy()
    else:  # scattered
        want = max(1, n // 8)
        picks = rng.choice(candidates, size=min(want, len(candidates)), replace=False)
        surplus[picks] = 1
        bonus = candidates[rng.random(len(candidates)) < 0.1]
        surplus[bonus] = np.minimum(room[bonus], surplus[bonus] + 1)
    # invertibility needs surplus in every component
    for comp in range(labels.max() + 1):
        members = np.flatnonzero(labels == comp)
        if surplus[members].sum() == 0:
            open_room = members[room[members] > 0]
            if len(open_room) == 0:
                raise ValueError(
                    f"component of vertex {members[0]} has no surplus room; increase U"
                )
            surplus[open_room[0]] = 1
    return surplus


def _edges_to_matrix(n: int, U: int, edges: dict, surplus_mode: str,
                     rng: np.random.Generator) -> SddmMatrix:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    wdeg = np.zeros(n, dtype=np.int64)
    for (i, j), w in edges.items():
        wdeg[i] += w
        wdeg[j] += w
    if np.any(wdeg > U):
        raise ValueError("weighted degree exceeds U; generator bug")
    if edges:
        ii = [e[0] for e in edges]
        jj = [e[1] for e in edges]
        adj = coo_matrix((np.ones(len(edges)), (ii, jj)), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
    else:
        labels = np.arange(n)
    surplus = _apply_surplus(wdeg, U, surplus_mode, rng, labels)
    triples = []
    for (i, j), w in edges.items():
        triples.append((i, j, -w))
        triples.append((j, i, -w))
    for v in range(n):
        triples.append((v, v, int(wdeg[v] + surplus[v])))
    return validate_sddm(triples, U=U, n=n)


def _tree_edges(n: int, degree_cap: int, rng: np.random.Generator) -> dict:
    """Random spanning tree with a degree cap via sequential attachment."""
    edges = {}
    deg = np.zeros(n, dtype=np.int64)
    order = rng.permutation(n)
    attached = [int(order[0])]
    for v in order[1:]:
        v = int(v)
        open_hosts = [u for u in attached if deg[u] < degree_cap]
        u = int(rng.choice(open_hosts))
        edges[(min(u, v), max(u, v))] = 1
        deg[u] += 1
        deg[v] += 1
        attached.append(v)
    return edges


def generate_matrix(spec: InstanceSpec) -> SddmMatrix:
    rng = np.random.default_rng(spec.seed)
    n, U = spec.n, spec.U

    if spec.family == "path":
        edges = {(i, i + 1): 1 for i in range(n - 1)}
        return _edges_to_matrix(n, U, edges, spec.surplus, rng)

    if spec.family == "grid":
        cols = max(1, int(round(np.sqrt(n))))
        rows = (n + cols - 1) // cols
        coords = [(r, c) for r in range(rows) for c in range(cols)][:n]
        pos = {rc: i for i, rc in enumerate(coords)}
        if U < 5:
            raise ValueError("grid needs U >= 5 for interior rows plus surplus")
        edges = {}
        for (r, c), i in pos.items():
            for dr, dc in ((0, 1), (1, 0)):
                other = (r + dr, c + dc)
                if other in pos:
                    j = pos[other]
                    edges[(min(i, j), max(i, j))] = 1
        return _edges_to_matrix(n, U, edges, spec.surplus, rng)

    if spec.family == "random-graph":
        if n == 1:
            return validate_sddm([(0, 0, 1)], U=U, n=1)
        cap = max(2, min(n - 1, U - 1))
        edges = _tree_edges(n, cap, rng)
        deg = np.zeros(n, dtype=np.int64)
        for i, j in edges:
            deg[i] += 1
            deg[j] += 1
        extra = int(spec.density * n) if U > 2 else 0
        for _ in range(extra * 4):
            if extra <= 0:
                break
            i, j = rng.integers(0, n, size=2)
            i, j = int(min(i, j)), int(max(i, j))
            if i == j or (i, j) in edges or deg[i] >= cap or deg[j] >= cap:
                continue
            edges[(i, j)] = 1
            deg[i] += 1
            deg[j] += 1
            extra -= 1
        # upgrade weights where both endpoints have budget
        budget = (U - 1) // np.maximum(deg, 1)
        for (i, j) in list(edges):
            cap_w = int(min(budget[i], budget[j]))
            if cap_w > 1:
                edges[(i, j)] = int(rng.integers(1, cap_w + 1))
        return _edges_to_matrix(n, U, edges, spec.surplus, rng)

    if spec.family == "dumbbell":
        if n < 4:
            raise ValueError("dumbbell needs n >= 4")
        k = n // 2
        if U < k + 1:
            raise ValueError(f"dumbbell with n={n} needs U >= {k + 1}")
        w = max(1, (U - 2) // k)
        edges = {}
        for block in (range(k), range(k, n)):
            block = list(block)
            for a in range(len(block)):
                for b in range(a + 1, len(block)):
                    edges[(block[a], block[b])] = w
        edges[(k - 1, k)] = 1
        return _edges_to_matrix(n, U, edges, spec.surplus, rng)

    # expander-ish: union of random matchings, unit weights
    r = max(2, min(4, n - 1, U - 1))
    edges = {}
    deg = np.zeros(n, dtype=np.int64)
    for _ in range(r):
        perm = rng.permutation(n)
        for a in range(0, n - 1, 2):
            i, j = int(perm[a]), int(perm[a + 1])
            i, j = min(i, j), max(i, j)
            if (i, j) in edges or deg[i] >= U - 1 or deg[j] >= U - 1:
                continue
            edges[(i, j)] = 1
            deg[i] += 1
            deg[j] += 1
    # stitch components together with a path over representatives
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    if edges:
        ii = [e[0] for e in edges]
        jj = [e[1] for e in edges]
        adj = coo_matrix((np.ones(len(edges)), (ii, jj)), shape=(n, n))
    else:
        adj = coo_matrix((n, n))
    ncomp, labels = connected_components(adj, directed=False)
    reps = [int(np.argmax(labels == c)) for c in range(ncomp)]
    for a, b in zip(reps, reps[1:]):
        i, j = min(a, b), max(a, b)
        if (i, j) not in edges and deg[i] < U - 1 and deg[j] < U - 1:
            edges[(i, j)] = 1
            deg[i] += 1
            deg[j] += 1
    return _edges_to_matrix(n, U, edges, spec.surplus, rng)


def generate_rhs(n: int, U: int, seed: int = 0, density: float = 1.0) -> np.ndarray:
    """Random integer right-hand side in [0, U]."""
    rng = np.random.default_rng(seed)
    b = rng.integers(0, U + 1, size=n)
    if density < 1.0:
        b[rng.random(n) >= density] = 0
    if not b.any():
        b[int(rng.integers(0, n))] = max(1, U // 2)
    return b.astype(np.int64)
