"""Built-in benchmark: a three-inertia torsional chain watched by four agents.

Three rotating inertias coupled by torsional springs give a sixth-order
marginally stable plant (state = angle/rate pairs).  Four agents each
measure one linear combination of angles; none of them can reconstruct
the state alone, but together they can.  The communication graph is the
four-cycle 1-2-4-3-1.
"""

from __future__ import annotations

import numpy as np

from .decomp import Plant
from .graph import Topology, build_topology

THREE_INERTIA_NAME = "three-inertia"


def three_inertia_plant(
    stiffness_over_inertia: float = 1.0, x0=None
) -> Plant:
    """Three-inertia chain with per-agent angle-difference measurements."""
    w = float(stiffness_over_inertia)
    a = np.array(
        [
            [0, 1, 0, 0, 0, 0],
            [-w, 0, w, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [w, 0, -2 * w, 0, w, 0],
            [0, 0, 0, 0, 0, 1],
            [0, 0, w, 0, -w, 0],
        ],
        dtype=float,
    )
    h = (
        np.array([[0.0, 0, 1, 0, 0, 0]]),
        np.array([[1.0, 0, -1, 0, 0, 0]]),
        np.array([[0.0, 0, 1, 0, -1, 0]]),
        np.array([[1.0, 0, 0, 0, -1, 0]]),
    )
    if x0 is None:
        x0 = np.zeros(6)
    return Plant(a=a, h=h, x0=np.asarray(x0, dtype=float))


def four_agent_cycle(weight: float = 1.0) -> Topology:
    """Unit-weight cycle over agents 1-2-4-3-1 (0-based: 0-1-3-2-0)."""
    adj = np.zeros((4, 4))
    for i, j in [(0, 1), (0, 2), (1, 3), (2, 3)]:
        adj[i, j] = adj[j, i] = float(weight)
    return build_topology(adj)


# Parameter sets of the three reference experiments, keyed by the scenario
# names the CLI accepts.
EXAMPLE_PARAMS = {
    "example1-node": dict(
        mode="node",
        coupling_gain=10.3,
        beta=0.9,
        kappa=0.03,
        delta=2.0,
        gamma=10.0,
        rho0=1.0,
    ),
    "example2-edge": dict(
        mode="edge",
        coupling_gain=5.3,
        epsilon=0.01,
        beta=0.9,
        kappa=100.0,
        delta=1.0,
        gamma=1.0,
        rho0=1.0,
    ),
    "example3-node": dict(
        mode="node",
        coupling_gain=10.3,
        beta=0.9,
        kappa=30.0,
        delta=6.0,
        gamma=10.0,
        rho0=1.0,
    ),
}
