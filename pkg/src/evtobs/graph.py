"""Undirected communication topology and its spectral quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DisconnectedError,
    NonzeroDiagonalError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Topology:
    """Weighted undirected graph over the agent set.

    ``laplacian[i, i]`` is the weighted degree of agent ``i`` and
    ``laplacian[i, j] = -adjacency[i, j]`` off the diagonal, so every row
    sums to zero.  Agents are indexed from 0.
    """

    n_agents: int
    adjacency: np.ndarray
    laplacian: np.ndarray
    neighbor_sets: tuple[tuple[int, ...], ...]
    degree_counts: tuple[int, ...]

    def directed_edges(self) -> list[tuple[int, int]]:
        """All ordered pairs (i, j) with j a neighbor of i, sorted."""
        return [(i, j) for i in range(self.n_agents) for j in self.neighbor_sets[i]]


def build_topology(adjacency: np.ndarray, tol: float = DEFAULT_TOL) -> Topology:
    """Validate an adjacency matrix and assemble the topology.

    Raises NotSymmetricError, NonzeroDiagonalError or DisconnectedError.
    Connectivity is decided by the second-smallest Laplacian eigenvalue
    exceeding ``tol``.
    """
    adj = np.asarray(adjacency, dtype=float)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adj.shape}")
    if np.any(adj < 0):
        raise ValueError("adjacency weights must be nonnegative")
    if not np.allclose(adj, adj.T, atol=tol):
        raise NotSymmetricError("adjacency matrix must be symmetric")
    if np.any(np.abs(np.diag(adj)) > tol):
        raise NonzeroDiagonalError("self-loops are not allowed (nonzero diagonal)")

    n = adj.shape[0]
    lap = np.diag(adj.sum(axis=1)) - adj
    if n > 1:
        eigs = np.sort(sla.eigvalsh(lap))
        if eigs[1] <= tol:
            raise DisconnectedError(
                f"graph is not connected (algebraic connectivity {eigs[1]:.3e})"
            )
    neighbors = tuple(
        tuple(int(j) for j in np.nonzero(adj[i] > 0)[0]) for i in range(n)
    )
    return Topology(
        n_agents=n,
        adjacency=adj,
        laplacian=lap,
        neighbor_sets=neighbors,
        degree_counts=tuple(len(s) for s in neighbors),
    )


def lambda_min_block(
    topology: Topology, u_blocks: list[np.ndarray], tol: float = DEFAULT_TOL
) -> float:
    """Smallest eigenvalue of ``U^T (L (x) I_n) U`` for block-diagonal U.

    ``u_blocks[i]`` holds agent i's orthonormal basis of its undetectable
    subspace (n x p_i, possibly zero columns).  Returns ``inf`` when every
    block is empty: the consensus correction then acts on nothing and any
    coupling gain works.  Raises NotPositiveDefiniteError when the assembled
    matrix is not positive definite, which signals a violated connectivity
    or joint-detectability assumption.
    """
    if len(u_blocks) != topology.n_agents:
        raise ValueError("need one undetectable-subspace block per agent")
    widths = [b.shape[1] for b in u_blocks]
    if sum(widths) == 0:
        return math.inf
    n = u_blocks[0].shape[0]
    u = sla.block_diag(*[np.asarray(b, dtype=float) for b in u_blocks])
    big = u.T @ np.kron(topology.laplacian, np.eye(n)) @ u
    lam_min = float(sla.eigvalsh(big)[0])
    if lam_min <= tol:
        raise NotPositiveDefiniteError(
            f"U^T (L (x) I) U is not positive definite (lambda_min = {lam_min:.3e}); "
            "check connectivity and joint detectability"
        )
    return lam_min
