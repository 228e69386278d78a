"""Shifted deflation operators for computing distinct roots.

Given known roots r_1..r_k of a residual F, the deflated residual is
G(z) = alpha(z) F(z) with

    alpha(z) = prod_i ( ||z - r_i||^-p + shift )

so a Newton iteration on G cannot converge back to any deflated root, while
roots of F away from the r_i are preserved (alpha > 0).  With shift = 1 the
factor tends to 1 far away and G recovers F; shift = 0 gives the classical
unshifted operator.  The derivative of G is the scaled Jacobian plus a
rank-one term, which the solver exploits via Sherman-Morrison.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import cho_factor, cholesky_banded

from .linalg import BandedMatrix

DEFAULT_GUARD = 1e-10


class AtDeflatedRoot(Exception):
    """Evaluation point is inside the guard ball of a deflated root."""


@dataclass(frozen=True, eq=False)
class NormSpec:
    """Distance for deflation: Euclidean, or sqrt(v^T W v) with W symmetric
    positive definite (e.g. a finite-element mass matrix for the L2 norm)."""

    weight: Union[np.ndarray, BandedMatrix, None] = None

    def __post_init__(self):
        w = self.weight
        if w is None:
            return
        if isinstance(w, BandedMatrix):
            if not w.is_symmetric():
                raise ValueError("weight matrix must be symmetric")
            # upper triangle in solve_banded layout is exactly the top rows
            cholesky_banded(w.data[: w.hbw + 1], lower=False)
        else:
            w = np.asarray(w, dtype=float)
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError("weight matrix must be square")
            if not np.allclose(w, w.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(w).max())):
                raise ValueError("weight matrix must be symmetric")
            cho_factor(w)  # raises LinAlgError if not positive definite
            object.__setattr__(self, "weight", w)

    def apply_weight(self, v: np.ndarray) -> np.ndarray:
        if self.weight is None:
            return np.asarray(v, dtype=float)
        if isinstance(self.weight, BandedMatrix):
            return self.weight.matvec(v)
        return self.weight @ v

    def norm(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        if self.weight is None:
            return float(np.linalg.norm(v))
        return float(np.sqrt(max(v @ self.apply_weight(v), 0.0)))


EUCLIDEAN = NormSpec()


@dataclass
class DeflationState:
    """Roots deflated so far plus the operator parameters.

    Append roots between solves with :meth:`add_root`; never mutate during a
    solve.  ``power`` >= 1 and ``shift`` >= 0; defaults are power 2, shift 1.
    """

    power: float = 2.0
    shift: float = 1.0
    norm: NormSpec = field(default_factory=NormSpec)
    guard: float = DEFAULT_GUARD
    roots: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.power < 1.0:
            raise ValueError(f"deflation power must be >= 1, got {self.power}")
        if self.shift < 0.0:
            raise ValueError(f"deflation shift must be >= 0, got {self.shift}")
        roots, self.roots = list(self.roots), []
        for r in roots:
            self.add_root(r)

    def add_root(self, root: np.ndarray) -> None:
        root = np.array(root, dtype=float)
        for known in self.roots:
            if known.shape != root.shape:
                raise ValueError("all deflated roots must share one dimension")
            if self.norm.norm(root - known) <= self.guard:
                raise ValueError("new root coincides with an already deflated root")
        self.roots.append(root)


def _distances(state: DeflationState, z: np.ndarray) -> list[float]:
    out = []
    for r in state.roots:
        d = state.norm.norm(z - r)
        if d <= state.guard:
            raise AtDeflatedRoot(f"point within {state.guard:.1e} of a deflated root (d={d:.3e})")
        out.append(d)
    return out


def deflation_factor(state: DeflationState, z: np.ndarray) -> float:
    """alpha(z) = prod_i (||z - r_i||^-p + shift); 1.0 with no roots."""
    z = np.asarray(z, dtype=float)
    alpha = 1.0
    for d in _distances(state, z):
        alpha *= d ** (-state.power) + state.shift
    return alpha


def deflation_gradient(state: DeflationState, z: np.ndarray) -> np.ndarray:
    """Gradient of the deflation factor.

    Each factor m_i = ||z - r_i||^-p + shift contributes
    -p W(z - r_i) / ||z - r_i||^(p+2) times the product of the others,
    where W is the norm weight (identity for the Euclidean norm).
    """
    z = np.asarray(z, dtype=float)
    if not state.roots:
        return np.zeros_like(z)
    p = state.power
    distances = _distances(state, z)
    factors = [d ** (-p) + state.shift for d in distances]
    alpha = float(np.prod(factors))
    grad = np.zeros_like(z)
    for root, d, m in zip(state.roots, distances, factors):
        grad += (alpha / m) * (-p) * state.norm.apply_weight(z - root) / d ** (p + 2.0)
    return grad


def deflated_residual(state: DeflationState, f_value: np.ndarray, z: np.ndarray) -> np.ndarray:
    """G(z) = alpha(z) F(z) for a residual value F(z) already in hand."""
    return deflation_factor(state, z) * np.asarray(f_value, dtype=float)


def deflated_derivative_parts(
    state: DeflationState,
    f_value: np.ndarray,
    jac,
    z: np.ndarray,
):
    """Pieces of the deflated derivative H_G = alpha(z) H_F + F(z) grad(alpha)^T.

    Returns ``(scale, matrix, u, w)`` with scale = alpha(z), matrix = H_F,
    u = F(z) and w = grad(alpha); the caller solves the rank-one corrected
    system via :func:`deflated_newton.linalg.solve_rank_one_update`.
    """
    z = np.asarray(z, dtype=float)
    scale = deflation_factor(state, z)
    grad = deflation_gradient(state, z)
    return scale, jac, np.asarray(f_value, dtype=float), grad
