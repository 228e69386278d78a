"""Semismooth reformulation of mixed complementarity problems.

A problem MCP(F, l, u) asks for z with, componentwise, either z_i at a bound
with the residual signed accordingly, or F_i(z) = 0 in between.  An NCP
function turns each component into a scalar rootfinding condition; assembling
all components gives a semismooth system Phi(z) = 0 together with an element
of its generalized derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np


class NonFiniteResidual(Exception):
    """F(z) produced NaN or infinity."""


class DerivativeUnavailable(Exception):
    """No analytic derivative and the finite-difference fallback is disabled."""


class NcpFunction(Enum):
    """Scalar complementarity functions: phi(a, b) = 0 iff a, b >= 0 and ab = 0."""

    FISCHER_BURMEISTER = "fb"
    MIN_MAX = "mp"


# Generalized-derivative element chosen at the Fischer-Burmeister kink (0, 0):
# the limit along the direction (1, 1)/sqrt(2).
_FB_ORIGIN = 1.0 / math.sqrt(2.0) - 1.0


def phi(kind: NcpFunction, a: float, b: float) -> float:
    """Evaluate the NCP function ``kind`` at (a, b)."""
    if kind is NcpFunction.FISCHER_BURMEISTER:
        return math.hypot(a, b) - a - b
    # b - max(0, b - a), identically min(a, b); branch selection keeps the
    # value exact where the subtraction form would cancel
    return a if b - a > 0.0 else b


def phi_derivative(kind: NcpFunction, a: float, b: float) -> tuple[float, float]:
    """One element (d_a, d_b) of the generalized derivative of ``phi``.

    Fischer-Burmeister is smooth away from the origin; at the origin the
    selection documented in ``_FB_ORIGIN`` is returned.  The min function
    takes the (0, 1) branch on ties b - a = 0.
    """
    if kind is NcpFunction.FISCHER_BURMEISTER:
        r = math.hypot(a, b)
        if r == 0.0:
            return (_FB_ORIGIN, _FB_ORIGIN)
        return (a / r - 1.0, b / r - 1.0)
    if b - a > 0.0:
        return (1.0, 0.0)
    return (0.0, 1.0)


@dataclass(frozen=True, eq=False)
class MixedComplementarityProblem:
    """MCP(F, l, u) with an optional analytic derivative and scalar parameter.

    Args:
        dimension: number of unknowns n.
        residual: map z -> F(z) of length n.
        derivative: optional map z -> n-by-n Jacobian of F; when absent,
            forward differences are used if ``fd_fallback`` is enabled.
        lower: lower bounds (default all zero, the NCP case).
        upper: upper bounds (default all +inf).
        parameter: value of the problem's scalar parameter, if any.
        name: identifier used in logs and CLI output.
    """

    dimension: int
    residual: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    parameter: Optional[float] = None
    name: str = ""
    fd_fallback: bool = True

    def __post_init__(self):
        n = self.dimension
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValueError("bounds must have the problem dimension")
        if (lower > upper).any():
            raise ValueError("lower bounds must not exceed upper bounds")
        if (lower == np.inf).any() or (upper == -np.inf).any():
            raise ValueError("bounds leave no feasible value at some index")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


def evaluate(problem: MixedComplementarityProblem, z: np.ndarray) -> np.ndarray:
    """Evaluate F(z), raising :class:`NonFiniteResidual` on NaN or infinity."""
    z = np.asarray(z, dtype=float)
    if z.shape != (problem.dimension,):
        raise ValueError(f"z must have length {problem.dimension}")
    value = np.asarray(problem.residual(z), dtype=float)
    if value.shape != (problem.dimension,):
        raise ValueError("residual map returned the wrong length")
    if not np.isfinite(value).all():
        raise NonFiniteResidual(f"F(z) contains non-finite entries at z={z!r}")
    return value


def jacobian(problem: MixedComplementarityProblem, z: np.ndarray) -> np.ndarray:
    """Jacobian of F at z, analytic if provided, else forward differences."""
    z = np.asarray(z, dtype=float)
    if problem.derivative is not None:
        jac = np.asarray(problem.derivative(z), dtype=float)
        if jac.shape != (problem.dimension,) * 2:
            raise ValueError("derivative map returned the wrong shape")
    elif problem.fd_fallback:
        jac = _forward_difference_jacobian(problem, z)
    else:
        raise DerivativeUnavailable(
            f"problem {problem.name or '<anonymous>'} has no derivative and fd_fallback is off"
        )
    if not np.isfinite(jac).all():
        raise NonFiniteResidual(f"F'(z) contains non-finite entries at z={z!r}")
    return jac


def _forward_difference_jacobian(problem, z):
    base = evaluate(problem, z)
    n = problem.dimension
    jac = np.empty((n, n))
    sqrt_eps = math.sqrt(np.finfo(float).eps)
    for j in range(n):
        step = sqrt_eps * (1.0 + abs(z[j]))
        zp = z.copy()
        zp[j] += step
        jac[:, j] = (evaluate(problem, zp) - base) / step
    return jac


def assemble_residual(
    problem: MixedComplementarityProblem,
    z: np.ndarray,
    kind: NcpFunction = NcpFunction.FISCHER_BURMEISTER,
) -> np.ndarray:
    """Assemble the semismooth residual Phi(z) of the reformulated MCP.

    Componentwise, with l_i, u_i the bounds and F = F(z):

    * free (both bounds infinite):   Phi_i = F_i
    * finite lower bound only:       Phi_i = phi(z_i - l_i, F_i)
    * finite upper bound only:       Phi_i = -phi(u_i - z_i, -F_i)
    * both bounds finite:            Phi_i = phi(z_i - l_i, -phi(u_i - z_i, -F_i))
    """
    z = np.asarray(z, dtype=float)
    value = evaluate(problem, z)
    lower, upper = problem.lower, problem.upper
    out = np.empty(problem.dimension)
    for i in range(problem.dimension):
        lo_finite = math.isfinite(lower[i])
        up_finite = math.isfinite(upper[i])
        if not lo_finite and not up_finite:
            out[i] = value[i]
        elif lo_finite and not up_finite:
            out[i] = phi(kind, z[i] - lower[i], value[i])
        elif up_finite and not lo_finite:
            out[i] = -phi(kind, upper[i] - z[i], -value[i])
        else:
            inner = -phi(kind, upper[i] - z[i], -value[i])
            out[i] = phi(kind, z[i] - lower[i], inner)
    return out


def assemble_newton_derivative(
    problem: MixedComplementarityProblem,
    z: np.ndarray,
    kind: NcpFunction = NcpFunction.FISCHER_BURMEISTER,
) -> np.ndarray:
    """Assemble an element H(z) of the generalized derivative of Phi.

    Row i combines the chain rule through ``phi`` with the Jacobian of F;
    doubly bounded components compose the chain rule twice; free components
    copy the corresponding Jacobian row.
    """
    z = np.asarray(z, dtype=float)
    value = evaluate(problem, z)
    jac = jacobian(problem, z)
    lower, upper = problem.lower, problem.upper
    n = problem.dimension
    out = np.zeros((n, n))
    for i in range(n):
        lo_finite = math.isfinite(lower[i])
        up_finite = math.isfinite(upper[i])
        if not lo_finite and not up_finite:
            out[i, :] = jac[i, :]
            continue
        if lo_finite and not up_finite:
            d_a, d_b = phi_derivative(kind, z[i] - lower[i], value[i])
        elif up_finite and not lo_finite:
            # Phi_i = -phi(u_i - z_i, -F_i): both inner signs cancel the outer one
            d_a, d_b = phi_derivative(kind, upper[i] - z[i], -value[i])
        else:
            a2 = upper[i] - z[i]
            b2 = -value[i]
            d_a2, d_b2 = phi_derivative(kind, a2, b2)
            inner = -phi(kind, a2, b2)
            d_a1, d_b1 = phi_derivative(kind, z[i] - lower[i], inner)
            d_a = d_a1 + d_b1 * d_a2
            d_b = d_b1 * d_b2
        out[i, :] = d_b * jac[i, :]
        out[i, i] += d_a
    return out
