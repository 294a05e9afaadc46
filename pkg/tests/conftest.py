"""Shared instance builders for the test suite."""

import numpy as np
import pytest

from entrysolve.core import validate_sddm
from entrysolve.generate import InstanceSpec, generate_matrix


def random_sddm(n, U, seed, family=None, surplus="scattered", density=0.15):
    """A validated connected instance compatible with the given U."""
    if family is None:
        if U < 5:
            family = "path" if seed % 2 else "random-graph"
        else:
            family = ("random-graph", "path", "grid", "expander-ish")[seed % 4]
    L = generate_matrix(InstanceSpec(
        family=family, n=n, U=U, density=density, surplus=surplus, seed=seed))
    if len(L.components()) > 1:
        # expander-ish stitching can occasionally leave islands; the
        # suites want connected instances
        L = generate_matrix(InstanceSpec(
            family="random-graph", n=n, U=U, density=density,
            surplus=surplus, seed=seed))
    return L


def dominance_chain(n, U):
    """Path with maximal dummy leakage: solution entries decay ~1/U per hop."""
    A = np.zeros((n, n), dtype=np.int64)
    for i in range(n - 1):
        A[i, i + 1] = A[i + 1, i] = -1
    np.fill_diagonal(A, U)
    return validate_sddm(A, U=U)


def separated_clusters(k=4, bridge=14, U=200):
    """Two K_k blocks joined by a weight-1 path, max dominance everywhere;
    the clusters sit far apart in probability distance."""
    n = 2 * k + bridge
    A = np.zeros((n, n), dtype=np.int64)
    w = (U - 2) // k
    for blk in (range(k), range(k + bridge, n)):
        blk = list(blk)
        for a in range(len(blk)):
            for b in range(a + 1, len(blk)):
                A[blk[a], blk[b]] = A[blk[b], blk[a]] = -w
    chain = [k - 1] + list(range(k, k + bridge)) + [k + bridge]
    for u, v in zip(chain, chain[1:]):
        A[u, v] = A[v, u] = -1
    np.fill_diagonal(A, U)
    return validate_sddm(A, U=U)


@pytest.fixture
def two_by_two():
    return validate_sddm([[2, -1], [-1, 2]], U=2)
