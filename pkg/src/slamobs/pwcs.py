"""Observability machinery for piece-wise constant linear systems.

A piece-wise constant system (PWCS) is a linear time-varying system whose
dynamics matrix F and observation matrix H are constant inside each time
segment.  This module provides the generic building blocks: the per-segment
(local) observability matrix, segment transition matrices, the stacked
multi-segment (total) observability matrix, and SVD-based rank / null-space
queries used to decide which linear functionals of the state the
measurements determine.

All operations are pure functions of their inputs; no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_RANK_TOL = 1e-10


def _as_finite_array(value, name, shape=None):
    arr = np.asarray(value, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def _as_square(value, name):
    arr = _as_finite_array(value, name)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


def skew(v) -> np.ndarray:
    """Return the 3x3 cross-product matrix S with ``S @ w == np.cross(v, w)``.

    S is antisymmetric with zero diagonal.
    """
    x, y, z = _as_finite_array(v, "v", (3,))
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(eq=False)
class PwcsStripe:
    """One segment of a piece-wise constant system.

    Attributes
    ----------
    F : (n, n) dynamics matrix, constant over the segment.
    H : (m, n) observation matrix, constant over the segment.  m may be 0.
    delta : segment duration in seconds, > 0.
    """

    F: np.ndarray
    H: np.ndarray
    delta: float

    def __post_init__(self):
        self.F = _as_square(self.F, "F")
        self.H = _as_finite_array(self.H, "H")
        if self.H.ndim != 2 or self.H.shape[1] != self.F.shape[0]:
            raise ValueError(
                f"H must have {self.F.shape[0]} columns to match F, "
                f"got shape {self.H.shape}"
            )
        self.delta = float(self.delta)
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @property
    def n(self) -> int:
        """State dimension."""
        return self.F.shape[0]


@dataclass(eq=False)
class NullSpaceBasis:
    """Orthonormal basis of a matrix kernel.

    ``vectors`` has shape (n, dim) with the basis vectors as columns.
    """

    dim: int
    vectors: np.ndarray

    def projection(self, w) -> np.ndarray:
        """Orthogonal projection of w onto the spanned subspace."""
        w = np.asarray(w, dtype=float)
        if self.dim == 0:
            return np.zeros_like(w)
        return self.vectors @ (self.vectors.T @ w)


def _nilpotency_index(F: np.ndarray):
    """Smallest p with F**p == 0 exactly, or None if F is not nilpotent."""
    n = F.shape[0]
    power = F
    for p in range(1, n + 1):
        if not power.any():
            return p
        power = power @ F
    return None


def state_transition(F, delta: float, mode: str = "exact") -> np.ndarray:
    """Transition matrix of a constant-dynamics segment of length delta.

    mode="first_order" returns I + F*delta.  mode="exact" returns the matrix
    exponential; when F is nilpotent (F**p == 0) the power series terminates
    and is summed exactly, otherwise a scaling-and-squaring exponential is
    used.
    """
    F = _as_square(F, "F")
    delta = float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    n = F.shape[0]
    if mode == "first_order":
        return np.eye(n) + F * delta
    if mode != "exact":
        raise ValueError(f"mode must be 'exact' or 'first_order', got {mode!r}")
    p = _nilpotency_index(F)
    if p is None:
        return scipy.linalg.expm(F * delta)
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, p):
        term = term @ F * (delta / k)
        out = out + term
    return out


def lom(stripe: PwcsStripe, max_power: int = 2) -> np.ndarray:
    """Local observability matrix of one segment.

    Stacks H, H F, H F**2, ..., H F**max_power, giving a matrix with
    (max_power + 1) * m rows and n columns.  The default of 2 covers the
    inertial SLAM dynamics used in this package, whose augmented F satisfies
    F**3 == 0 so that higher powers contribute only zero rows.
    """
    if int(max_power) != max_power or max_power < 1:
        raise ValueError("max_power must be an integer >= 1")
    blocks = [stripe.H]
    current = stripe.H
    for _ in range(int(max_power)):
        current = current @ stripe.F
        blocks.append(current)
    return np.vstack(blocks)


def tom(stripes, max_power: int = 2, mode: str = "exact") -> np.ndarray:
    """Total observability matrix of a sequence of segments.

    Stacks the per-segment local observability matrices, each right-multiplied
    by the accumulated transition of all earlier segments:

        [Q_1; Q_2 T_1; Q_3 T_2 T_1; ...]

    where Q_j = lom(stripes[j]) and T_j = state_transition(F_j, delta_j).
    For a single stripe the result equals lom(stripe) exactly.
    """
    stripes = list(stripes)
    if not stripes:
        raise ValueError("at least one stripe is required")
    n = stripes[0].n
    for j, stripe in enumerate(stripes[1:], start=1):
        if stripe.n != n:
            raise ValueError(
                f"stripe {j} has state dimension {stripe.n}, expected {n}"
            )
    blocks = []
    accumulated = None
    for j, stripe in enumerate(stripes):
        q = lom(stripe, max_power)
        blocks.append(q if accumulated is None else q @ accumulated)
        if j < len(stripes) - 1:
            step = state_transition(stripe.F, stripe.delta, mode)
            accumulated = step if accumulated is None else step @ accumulated
    return np.vstack(blocks)


def numerical_rank(M, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above rel_tol times the largest one.

    Returns 0 for empty and all-zero matrices.
    """
    M = _as_finite_array(M, "M")
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if M.ndim != 2:
        raise ValueError("M must be a matrix")
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def null_space(M, rel_tol: float = DEFAULT_RANK_TOL) -> NullSpaceBasis:
    """Orthonormal basis of the kernel of M.

    dim equals M.shape[1] - numerical_rank(M); each basis vector v satisfies
    ||M v|| <= rel_tol * ||M|| * ||v||.
    """
    M = _as_finite_array(M, "M")
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if M.ndim != 2:
        raise ValueError("M must be a matrix")
    n = M.shape[1]
    if M.shape[0] == 0 or not M.any():
        return NullSpaceBasis(dim=n, vectors=np.eye(n))
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    rank = int(np.count_nonzero(s > rel_tol * s[0]))
    return NullSpaceBasis(dim=n - rank, vectors=vt[rank:].T.copy())


def is_functional_observable(M, w, rel_tol: float = DEFAULT_RANK_TOL) -> bool:
    """Whether the linear functional w.T @ x is determined by measurements.

    True iff w lies in the row space of M, tested as: the projection of w
    onto the kernel of M has norm <= rel_tol * ||w||.
    """
    M = _as_finite_array(M, "M")
    w = _as_finite_array(w, "w")
    if w.ndim != 1 or w.shape[0] != M.shape[1]:
        raise ValueError(
            f"w must be a vector of length {M.shape[1]}, got shape {w.shape}"
        )
    basis = null_space(M, rel_tol)
    if basis.dim == 0:
        return True
    proj = basis.projection(w)
    return float(np.linalg.norm(proj)) <= rel_tol * float(np.linalg.norm(w))
