"""Per-agent detectability decomposition of an LTI plant.

Each agent sees only a partial measurement.  Its undetectable subspace is
the set of modes that are both invisible to its own sensor and not
self-stabilizing: the intersection of the unobservable subspace of
``(A, H_i)`` with the invariant subspace of A for closed-right-half-plane
eigenvalues.  An orthonormal change of basis splits the dynamics into a
detectable block (handled by output injection) and an undetectable block
(handled by consensus with neighbors).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import BorderlineEigenvalueWarning, JointUndetectableError, SchurFailureError

# Numerical-rank threshold for kernels: singular values below
# RANK_RTOL * sigma_max count as zero.
RANK_RTOL = 1e-8

# Eigenvalues with Re >= -CLASSIFY_TOL count as closed-right-half-plane.
# A defective zero eigenvalue (Jordan block) perturbs its computed Schur
# eigenvalues by O(sqrt(eps) * ||A||) ~ 1e-8, so the boundary must sit
# clearly outside that cloud.
CLASSIFY_TOL = 1e-7


@dataclass(frozen=True)
class Plant:
    """Autonomous LTI plant ``xdot = A x`` observed by N partial sensors.

    ``h[i]`` is agent i's measurement matrix (m_i x n); ``y_i = h[i] @ x``.
    """

    a: np.ndarray
    h: tuple[np.ndarray, ...]
    x0: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"system matrix must be square, got {a.shape}")
        hs = tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in self.h)
        for k, m in enumerate(hs):
            if m.shape[1] != a.shape[0]:
                raise ValueError(
                    f"measurement matrix {k} has {m.shape[1]} columns, expected {a.shape[0]}"
                )
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape[0] != a.shape[0]:
            raise ValueError("initial state dimension mismatch")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "h", hs)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def n_agents(self) -> int:
        return len(self.h)

    @property
    def h_stacked(self) -> np.ndarray:
        return np.vstack(self.h)


@dataclass(frozen=True)
class AgentDecomposition:
    """Orthonormal split of the state space for one agent.

    ``change_of_basis = [detectable_basis, undetectable_basis]`` is
    orthonormal and block-triangularizes A:

        T' A T = [[a_det,      0     ],
                  [a_coupling, a_undet]],   H_i T = [h_det, 0]

    with ``(a_det, h_det)`` detectable.
    """

    detectable_basis: np.ndarray  # n x (n - p)
    undetectable_basis: np.ndarray  # n x p
    undetectable_dim: int  # p
    a_det: np.ndarray
    a_coupling: np.ndarray
    a_undet: np.ndarray
    h_det: np.ndarray

    @property
    def change_of_basis(self) -> np.ndarray:
        return np.hstack([self.detectable_basis, self.undetectable_basis])

    @property
    def n(self) -> int:
        return self.detectable_basis.shape[0]


def _kernel(mat: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of ker(mat) from the SVD, deterministic ranks."""
    mat = np.atleast_2d(mat)
    n = mat.shape[1]
    if mat.size == 0 or not np.any(mat):
        return np.eye(n)
    _, s, vt = sla.svd(mat)
    rank = int(np.sum(s > rtol * s[0]))
    return vt[rank:].T.copy()


def antistable_subspace(a: np.ndarray, tol: float = CLASSIFY_TOL) -> np.ndarray:
    """Orthonormal basis of the invariant subspace for Re(lambda) >= -tol.

    Uses an ordered real Schur decomposition: closed-right-half-plane
    eigenvalues are reordered into the leading block and the corresponding
    Schur vectors returned.  Warns when an eigenvalue sits within ``tol``
    of the boundary, where the classification is numerically ambiguous.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    try:
        _, z, ndim = sla.schur(a, output="real", sort=lambda re, im: re >= -tol)
    except sla.LinAlgError as exc:  # pragma: no cover - LAPACK nonconvergence
        raise SchurFailureError(str(exc)) from exc
    eigs = sla.eigvals(a)
    border = np.abs(eigs.real) < tol
    if np.any(border & (np.abs(eigs.real) > 0)):
        warnings.warn(
            "eigenvalue real part within classification tolerance of 0; "
            "half-plane assignment may be ambiguous",
            BorderlineEigenvalueWarning,
            stacklevel=2,
        )
    return z[:, :ndim].copy()


def unobservable_subspace(
    a: np.ndarray, h_i: np.ndarray, rtol: float = RANK_RTOL
) -> np.ndarray:
    """Orthonormal basis of the kernel of the observability matrix of (A, H_i)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    h_i = np.atleast_2d(np.asarray(h_i, dtype=float))
    n = a.shape[0]
    blocks = []
    row = h_i
    for _ in range(n):
        blocks.append(row)
        row = row @ a
    return _kernel(np.vstack(blocks), rtol)


def subspace_intersection(
    b1: np.ndarray, b2: np.ndarray, rtol: float = RANK_RTOL
) -> np.ndarray:
    """Orthonormal basis of span(b1) ∩ span(b2).

    Stacks the two complement projectors; the intersection is the common
    kernel, extracted by SVD.
    """
    b1 = np.atleast_2d(np.asarray(b1, dtype=float))
    b2 = np.atleast_2d(np.asarray(b2, dtype=float))
    n = b1.shape[0]
    if b1.shape[1] == 0 or b2.shape[1] == 0:
        return np.zeros((n, 0))
    p1c = np.eye(n) - b1 @ b1.T
    p2c = np.eye(n) - b2 @ b2.T
    return _kernel(np.vstack([p1c, p2c]), rtol)


def _decompose_pair(a: np.ndarray, h_i: np.ndarray, rtol: float) -> AgentDecomposition:
    n = a.shape[0]
    unobs = unobservable_subspace(a, h_i, rtol)
    anti = antistable_subspace(a)
    undet = subspace_intersection(unobs, anti, rtol)
    p = undet.shape[1]
    det = _kernel(undet.T, rtol) if p > 0 else np.eye(n)
    basis = np.hstack([det, undet])
    a_t = basis.T @ a @ basis
    return AgentDecomposition(
        detectable_basis=det,
        undetectable_basis=undet,
        undetectable_dim=p,
        a_det=a_t[: n - p, : n - p],
        a_coupling=a_t[n - p :, : n - p],
        a_undet=a_t[n - p :, n - p :],
        h_det=h_i @ det,
    )


def detectability_decompose(
    plant: Plant, agent: int, rtol: float = RANK_RTOL
) -> AgentDecomposition:
    """Detectability decomposition of ``(A, H_i)`` for one agent."""
    return _decompose_pair(plant.a, plant.h[agent], rtol)


def check_joint_detectability(plant: Plant, rtol: float = RANK_RTOL) -> None:
    """Raise JointUndetectableError unless the stacked pair (A, H) is detectable."""
    stacked = _decompose_pair(plant.a, plant.h_stacked, rtol)
    if stacked.undetectable_dim > 0:
        raise JointUndetectableError(
            f"stacked measurement model leaves a {stacked.undetectable_dim}-dimensional "
            "undetectable subspace; the network cannot reconstruct the state"
        )
