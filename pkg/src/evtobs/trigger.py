"""Dynamic event-trigger evaluation and inter-event-time lower bounds.

Both mechanisms compare an accumulated sampling error against a filtered
threshold.  The broadcast (node) trigger for agent i fires when

    f_i = 4 l_ii ||e_u||^2 - beta * sum_j a_ij ||xbar_i - xbar_j||^2 - kappa_i rho_i

reaches zero, where ``e_u`` is the undetectable-subspace component of the
sampling error and ``rho_i > 0`` is an internal filter state.  The
per-link (edge) trigger mirrors this with per-edge weights and an
``1/N_i`` share of the disagreement sum.

The guaranteed minimum inter-event time is the time for the comparison
ratio to climb from 0 to its firing level, obtained as the integral of
``1/g`` over ``[0, kappa/(4w)]`` where ``g`` is an explicit quadratic with
positive coefficients.  The integral is evaluated in closed form and
cross-checked against adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .errors import NonpositiveCoefficientError, ValidationError
from .gains import ObserverDesign
from .graph import Topology

QUADRATURE_CHECK_RTOL = 1e-10
# below this relative discriminant the closed forms cancel badly; a short
# series in the discriminant is exact to machine precision there
SERIES_SWITCH = 1e-4


def _broadcast(value, count: int, name: str) -> tuple[float, ...]:
    if np.isscalar(value):
        out = (float(value),) * count
    else:
        out = tuple(float(v) for v in value)
        if len(out) != count:
            raise ValidationError(f"{name} needs {count} entries, got {len(out)}")
    if any(not math.isfinite(v) or v <= 0 for v in out):
        raise ValidationError(f"{name} entries must be positive and finite")
    return out


@dataclass(frozen=True)
class NodeTriggerParams:
    """Per-agent parameters of the broadcast triggering mechanism.

    ``tau_bar`` may be None, meaning timeouts default to ten times the
    guaranteed inter-event lower bound (resolved at simulation setup).
    """

    beta: float
    kappa: tuple[float, ...]
    delta: tuple[float, ...]
    gamma: tuple[float, ...]
    rho0: tuple[float, ...]
    tau_bar: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValidationError(f"beta must lie in (0,1), got {self.beta}")

    @classmethod
    def broadcast(cls, n_agents, *, beta, kappa, delta, gamma, rho0, tau_bar=None):
        return cls(
            beta=float(beta),
            kappa=_broadcast(kappa, n_agents, "kappa"),
            delta=_broadcast(delta, n_agents, "delta"),
            gamma=_broadcast(gamma, n_agents, "gamma"),
            rho0=_broadcast(rho0, n_agents, "rho0"),
            tau_bar=None if tau_bar is None else _broadcast(tau_bar, n_agents, "tau_bar"),
        )

    def with_timeouts(self, timeouts) -> "NodeTriggerParams":
        return replace(self, tau_bar=tuple(float(t) for t in timeouts))


@dataclass(frozen=True)
class EdgeTriggerParams:
    """Per-directed-edge parameters of the link triggering mechanism.

    Entry order follows ``edges``, which must list every ordered pair
    (i, j) with j a neighbor of i.
    """

    beta: float
    edges: tuple[tuple[int, int], ...]
    kappa: tuple[float, ...]
    delta: tuple[float, ...]
    gamma: tuple[float, ...]
    rho0: tuple[float, ...]
    tau_bar: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValidationError(f"beta must lie in (0,1), got {self.beta}")

    @classmethod
    def broadcast(cls, topology: Topology, *, beta, kappa, delta, gamma, rho0, tau_bar=None):
        edges = tuple(topology.directed_edges())
        ne = len(edges)
        return cls(
            beta=float(beta),
            edges=edges,
            kappa=_broadcast(kappa, ne, "kappa"),
            delta=_broadcast(delta, ne, "delta"),
            gamma=_broadcast(gamma, ne, "gamma"),
            rho0=_broadcast(rho0, ne, "rho0"),
            tau_bar=None if tau_bar is None else _broadcast(tau_bar, ne, "tau_bar"),
        )

    def with_timeouts(self, timeouts) -> "EdgeTriggerParams":
        return replace(self, tau_bar=tuple(float(t) for t in timeouts))

    def index(self, edge: tuple[int, int]) -> int:
        return self.edges.index(edge)


def node_trigger_value(
    x_tilde_u, held_diffs, rho: float, *, beta: float, kappa: float, l_ii: float
) -> float:
    """Broadcast trigger function; fires when the value reaches zero.

    ``held_diffs`` iterates over ``(a_ij, xbar_i - xbar_j)`` for the
    agent's neighbors.
    """
    err = float(np.dot(x_tilde_u, x_tilde_u))
    disagree = sum(w * float(np.dot(d, d)) for w, d in held_diffs)
    return 4.0 * l_ii * err - beta * disagree - kappa * rho


def node_rho_rate(
    x_tilde_u, held_diffs, rho: float, innovation, *,
    beta: float, delta: float, gamma: float, l_ii: float,
) -> float:
    """Right-hand side of the broadcast filter state rho_i."""
    err = float(np.dot(x_tilde_u, x_tilde_u))
    disagree = sum(w * float(np.dot(d, d)) for w, d in held_diffs)
    inn = float(np.dot(innovation, innovation))
    return -delta * rho - 4.0 * l_ii * err + beta * disagree + gamma * inn


def edge_trigger_value(
    x_tilde_u, held_diffs, rho: float, *, beta: float, kappa: float, a_ij: float, n_i: int
) -> float:
    """Per-link trigger function for the directed edge (i, j).

    ``held_diffs`` iterates over ``(a_ik, xbar_ik - xbar_ki)`` for every
    neighbor k of agent i, both communication directions held separately.
    """
    err = float(np.dot(x_tilde_u, x_tilde_u))
    disagree = sum(w * float(np.dot(d, d)) for w, d in held_diffs)
    return 4.0 * a_ij * err - (beta / n_i) * disagree - kappa * rho


def edge_rho_rate(
    x_tilde_u, held_diffs, rho: float, innovation, *,
    beta: float, delta: float, gamma: float, a_ij: float, n_i: int,
) -> float:
    """Right-hand side of the per-link filter state rho_ij."""
    err = float(np.dot(x_tilde_u, x_tilde_u))
    disagree = sum(w * float(np.dot(d, d)) for w, d in held_diffs)
    inn = float(np.dot(innovation, innovation))
    return -delta * rho - 4.0 * a_ij * err + (beta / n_i) * disagree + gamma * inn


@dataclass(frozen=True)
class MietBound:
    """Closed-form lower bound on a target's inter-event times.

    ``value`` equals the integral of ``1/(coeff_const + coeff_lin*s +
    coeff_quad*s^2)`` over ``[0, upper_limit]``.
    """

    target: int | tuple[int, int]
    coeff_const: float
    coeff_lin: float
    coeff_quad: float
    upper_limit: float
    value: float


def reciprocal_quadratic_integral(
    const: float, lin: float, quad_coeff: float, upper: float
) -> float:
    """Integral of 1/(const + lin*s + quad_coeff*s^2) over [0, upper].

    All coefficients must be strictly positive, which keeps the integrand
    smooth and positive on the interval.  The discriminant selects an
    arctan, logarithm or rational antiderivative; near zero discriminant a
    short series avoids catastrophic cancellation.
    """
    k, b, q, t = float(const), float(lin), float(quad_coeff), float(upper)
    if k <= 0 or b <= 0 or q <= 0:
        raise NonpositiveCoefficientError(
            f"coefficients must be positive, got const={k}, lin={b}, quad={q}"
        )
    if t < 0:
        raise ValueError("upper limit must be nonnegative")
    if t == 0:
        return 0.0
    disc = b * b - 4.0 * q * k
    scale = b * b + 4.0 * q * k
    if abs(disc) <= SERIES_SWITCH * scale:
        # complete the square: integral of 1/(q u^2 - d) du with small d
        r = b / (2.0 * q)
        d = disc / (4.0 * q * q)
        lo, hi = r, t + r
        total = 0.0
        for m in range(4):
            term = (lo ** -(2 * m + 1) - hi ** -(2 * m + 1)) / (2 * m + 1)
            total += (d ** m) * term
        return total / q
    if disc < 0:
        root = math.sqrt(-disc)
        return 2.0 / root * (
            math.atan((2.0 * q * t + b) / root) - math.atan(b / root)
        )
    root = math.sqrt(disc)
    # log form with the cancellation-free rewriting b - root = 4qk/(b + root)
    b_minus = 4.0 * q * k / (b + root)
    num = (2.0 * q * t + b_minus) * (b + root)
    den = (2.0 * q * t + b + root) * b_minus
    return math.log(num / den) / root


def _checked_integral(const, lin, quad_coeff, upper) -> float:
    value = reciprocal_quadratic_integral(const, lin, quad_coeff, upper)
    ref, _ = quad(
        lambda s: 1.0 / (const + lin * s + quad_coeff * s * s),
        0.0,
        upper,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    if abs(value - ref) > QUADRATURE_CHECK_RTOL * max(abs(ref), abs(value)):
        raise ArithmeticError(
            f"closed-form integral {value!r} disagrees with quadrature {ref!r}"
        )
    return value


def _gain_norms(design: ObserverDesign, agent: int) -> tuple[float, float]:
    proj = design.projectors[agent]
    inj = design.injection_gains[agent]
    norm_proj = float(np.linalg.norm(proj.T @ proj, 2)) if proj.size else 0.0
    norm_inj = float(np.linalg.norm(inj.T @ inj, 2)) if inj.size else 0.0
    return norm_proj, norm_inj


def miet_bound_node(
    agent: int,
    design: ObserverDesign,
    topology: Topology,
    params: NodeTriggerParams,
    norm_a_sym: float,
) -> MietBound:
    """Guaranteed minimum inter-event time for one broadcast target."""
    l_ii = float(topology.laplacian[agent, agent])
    if l_ii <= 0:
        raise NonpositiveCoefficientError(f"agent {agent} has no neighbors")
    norm_proj, norm_inj = _gain_norms(design, agent)
    c = design.node_gain
    const = norm_proj * l_ii * c * c / params.beta + norm_inj / params.gamma[agent]
    lin = norm_a_sym + params.delta[agent]
    quad_coeff = 4.0 * l_ii
    upper = params.kappa[agent] / (4.0 * l_ii)
    value = _checked_integral(const, lin, quad_coeff, upper)
    return MietBound(
        target=agent,
        coeff_const=const,
        coeff_lin=lin,
        coeff_quad=quad_coeff,
        upper_limit=upper,
        value=value,
    )


def miet_bound_edge(
    edge: tuple[int, int],
    design: ObserverDesign,
    topology: Topology,
    params: EdgeTriggerParams,
    norm_a_sym: float,
) -> MietBound:
    """Guaranteed minimum inter-event time for one directed-link target."""
    i, j = edge
    a_ij = float(topology.adjacency[i, j])
    if a_ij <= 0:
        raise NonpositiveCoefficientError(f"({i},{j}) is not an edge of the graph")
    k = params.index(edge)
    n_i = topology.degree_counts[i]
    l_ii = float(topology.laplacian[i, i])
    norm_proj, norm_inj = _gain_norms(design, i)
    c = design.edge_gain
    const = norm_proj * n_i * l_ii * c * c / params.beta + norm_inj / params.gamma[k]
    lin = norm_a_sym + params.delta[k]
    quad_coeff = 4.0 * a_ij
    upper = params.kappa[k] / (4.0 * a_ij)
    value = _checked_integral(const, lin, quad_coeff, upper)
    return MietBound(
        target=edge,
        coeff_const=const,
        coeff_lin=lin,
        coeff_quad=quad_coeff,
        upper_limit=upper,
        value=value,
    )
