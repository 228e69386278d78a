"""Benchmark complementarity problems with analytic residuals and derivatives.

Four classic small problems with multiple solutions: a degenerate NCP
(Kojima-Shindoh), the KKT system of a nonconvex quadratic program (Gould),
a bimatrix-game equilibrium problem with an artificial continuation
parameter (Aggarwal), and a ten-variable risk-averse market equilibrium MCP
(Gerard-Leclere-Philpott).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .reformulate import MixedComplementarityProblem, NcpFunction
from .solver import SINGULAR_ERROR, SINGULAR_LEAST_SQUARES


class UnknownBenchmark(Exception):
    """Requested benchmark name is not in the registry."""


class Benchmark(Enum):
    KOJIMA_SHINDOH = "kojima-shindoh"
    GOULD = "gould"
    AGGARWAL = "aggarwal"
    GERARD = "gerard"


@dataclass(frozen=True)
class BenchmarkDefaults:
    """Recommended solver settings for a benchmark."""

    ncp: NcpFunction
    power: float
    shift: float
    line_search: bool
    singular_action: str = SINGULAR_ERROR
    parameterized: bool = False
    max_iter: int = 100


def _kojima_shindoh_f(z):
    z1, z2, z3, z4 = z
    return np.array(
        [
            3 * z1**2 + 2 * z1 * z2 + 2 * z2**2 + z3 + 3 * z4 - 6,
            2 * z1**2 + z2**2 + z1 + 10 * z3 + 2 * z4 - 2,
            3 * z1**2 + z1 * z2 + 2 * z2**2 + 2 * z3 + 9 * z4 - 9,
            z1**2 + 3 * z2**2 + 2 * z3 + 3 * z4 - 3,
        ]
    )


def _kojima_shindoh_jac(z):
    z1, z2 = z[0], z[1]
    return np.array(
        [
            [6 * z1 + 2 * z2, 2 * z1 + 4 * z2, 1.0, 3.0],
            [4 * z1 + 1, 2 * z2, 10.0, 2.0],
            [6 * z1 + z2, z1 + 4 * z2, 2.0, 9.0],
            [2 * z1, 6 * z2, 2.0, 3.0],
        ]
    )


def _gould_f(z):
    x1, x2, lam1, lam2 = z
    # KKT system of min -2(x1 - 1/4)^2 + 2(x2 - 1/2)^2 subject to
    # 3 x1 + x2 <= 3/2 and x1 + x2 <= 1 (x >= 0 handled by the NCP bounds).
    return np.array(
        [
            -4 * (x1 - 0.25) + 3 * lam1 + lam2,
            4 * (x2 - 0.5) + lam1 + lam2,
            1.5 - 3 * x1 - x2,
            1.0 - x1 - x2,
        ]
    )


_GOULD_JAC = np.array(
    [
        [-4.0, 0.0, 3.0, 1.0],
        [0.0, 4.0, 1.0, 1.0],
        [-3.0, -1.0, 0.0, 0.0],
        [-1.0, -1.0, 0.0, 0.0],
    ]
)

_AGGARWAL_A = np.array([[30.0, 20.0], [10.0, 25.0]])
_AGGARWAL_B = np.array([[30.0, 10.0], [20.0, 25.0]])


def _aggarwal_f(mu):
    def f(z):
        x = z[:2]
        y = z[2:]
        return np.concatenate([mu * (_AGGARWAL_A @ y) - 1.0, mu * (_AGGARWAL_B.T @ x) - 1.0])

    return f


def _aggarwal_jac(mu):
    jac = np.zeros((4, 4))
    jac[:2, 2:] = mu * _AGGARWAL_A
    jac[2:, :2] = mu * _AGGARWAL_B.T

    def deriv(z):
        return jac

    return deriv


def _gerard_f(z):
    x0, x11, x12, y1, y2, pi1, pi2, u4, u5, theta = z
    a1 = pi1 - 11.5 * x0
    a2 = pi2 - 11.5 * x0
    s1 = pi1 * (x0 + x11) - 5.75 * x0**2 - 0.5 * x11**2
    s2 = pi2 * (x0 + x12) - 5.75 * x0**2 - 1.75 * x12**2
    return np.array(
        [
            -(0.75 * a1 + 0.25 * a2) * u4 - (0.25 * a1 + 0.75 * a2) * u5,
            -(pi1 - x11) * (0.75 * u4 + 0.25 * u5),
            -(pi2 - 3.5 * x12) * (0.25 * u4 + 0.75 * u5),
            pi1 + 2 * y1 - 4.0,
            pi2 + 10 * y2 - 9.6,
            x0 + x11 - y1,
            x0 + x12 - y2,
            0.75 * s1 + 0.25 * s2 - theta,
            0.25 * s1 + 0.75 * s2 - theta,
            u4 + u5 - 1.0,
        ]
    )


def _gerard_jac(z):
    x0, x11, x12, y1, y2, pi1, pi2, u4, u5, theta = z
    a1 = pi1 - 11.5 * x0
    a2 = pi2 - 11.5 * x0
    jac = np.zeros((10, 10))
    # row 0: producer's expected marginal profit in the capacity good
    jac[0, 0] = 11.5 * (u4 + u5)
    jac[0, 5] = -(0.75 * u4 + 0.25 * u5)
    jac[0, 6] = -(0.25 * u4 + 0.75 * u5)
    jac[0, 7] = -(0.75 * a1 + 0.25 * a2)
    jac[0, 8] = -(0.25 * a1 + 0.75 * a2)
    # row 1
    jac[1, 1] = 0.75 * u4 + 0.25 * u5
    jac[1, 5] = -(0.75 * u4 + 0.25 * u5)
    jac[1, 7] = -0.75 * (pi1 - x11)
    jac[1, 8] = -0.25 * (pi1 - x11)
    # row 2
    jac[2, 2] = 3.5 * (0.25 * u4 + 0.75 * u5)
    jac[2, 6] = -(0.25 * u4 + 0.75 * u5)
    jac[2, 7] = -0.25 * (pi2 - 3.5 * x12)
    jac[2, 8] = -0.75 * (pi2 - 3.5 * x12)
    # rows 3, 4: inverse demand
    jac[3, 3] = 2.0
    jac[3, 5] = 1.0
    jac[4, 4] = 10.0
    jac[4, 6] = 1.0
    # rows 5, 6: market clearing
    jac[5, 0] = 1.0
    jac[5, 1] = 1.0
    jac[5, 3] = -1.0
    jac[6, 0] = 1.0
    jac[6, 2] = 1.0
    jac[6, 4] = -1.0
    # rows 7, 8: risk-adjusted profit vs. certainty equivalent
    ds1 = (pi1 - 11.5 * x0, pi1 - x11, 0.0, x0 + x11, 0.0)
    ds2 = (pi2 - 11.5 * x0, 0.0, pi2 - 3.5 * x12, 0.0, x0 + x12)
    for row, (w1, w2) in ((7, (0.75, 0.25)), (8, (0.25, 0.75))):
        jac[row, 0] = w1 * ds1[0] + w2 * ds2[0]
        jac[row, 1] = w1 * ds1[1]
        jac[row, 2] = w2 * ds2[2]
        jac[row, 5] = w1 * ds1[3]
        jac[row, 6] = w2 * ds2[4]
        jac[row, 9] = -1.0
    # row 9: probabilities sum to one
    jac[9, 7] = 1.0
    jac[9, 8] = 1.0
    return jac


_DEFAULTS = {
    Benchmark.KOJIMA_SHINDOH: BenchmarkDefaults(
        ncp=NcpFunction.FISCHER_BURMEISTER, power=2.0, shift=1.0, line_search=False
    ),
    Benchmark.GOULD: BenchmarkDefaults(
        ncp=NcpFunction.FISCHER_BURMEISTER, power=2.0, shift=1.0, line_search=False
    ),
    Benchmark.AGGARWAL: BenchmarkDefaults(
        ncp=NcpFunction.FISCHER_BURMEISTER, power=2.0, shift=1.0, line_search=False,
        parameterized=True,
        # the game is symmetric under swapping the players, the zero guess is
        # symmetric, and two of the equilibria are not: escaping the symmetric
        # subspace rides on rounding noise and needs a generous iteration cap
        max_iter=2000,
    ),
    Benchmark.GERARD: BenchmarkDefaults(
        ncp=NcpFunction.MIN_MAX, power=1.0, shift=1.0, line_search=True,
        # the all-zero start makes several rows of the Newton matrix vanish,
        # so singular systems are solved in the minimum-norm sense there
        singular_action=SINGULAR_LEAST_SQUARES,
    ),
}

_INITIAL_GUESSES = {
    Benchmark.KOJIMA_SHINDOH: np.full(4, 0.7),
    Benchmark.GOULD: np.array([0.2, 0.2, 0.0, 0.0]),
    Benchmark.AGGARWAL: np.zeros(4),
    Benchmark.GERARD: np.zeros(10),
}

_DIMENSIONS = {
    Benchmark.KOJIMA_SHINDOH: 4,
    Benchmark.GOULD: 4,
    Benchmark.AGGARWAL: 4,
    Benchmark.GERARD: 10,
}


def resolve(benchmark) -> Benchmark:
    if isinstance(benchmark, Benchmark):
        return benchmark
    try:
        return Benchmark(str(benchmark))
    except ValueError:
        raise UnknownBenchmark(f"unknown benchmark {benchmark!r}; see list_benchmarks()") from None


def build(benchmark, mu: Optional[float] = None) -> MixedComplementarityProblem:
    """Build a benchmark MCP.

    Args:
        benchmark: a :class:`Benchmark` or its string name.
        mu: continuation parameter, only meaningful for the Aggarwal game
            (defaults to 1, the original problem).

    Raises:
        UnknownBenchmark: for names outside the registry.
        ValueError: if ``mu`` is passed for a non-parameterized benchmark.
    """
    bench = resolve(benchmark)
    if mu is not None and bench is not Benchmark.AGGARWAL:
        raise ValueError(f"{bench.value} takes no parameter")
    if bench is Benchmark.KOJIMA_SHINDOH:
        return MixedComplementarityProblem(
            dimension=4, residual=_kojima_shindoh_f, derivative=_kojima_shindoh_jac,
            name=bench.value,
        )
    if bench is Benchmark.GOULD:
        return MixedComplementarityProblem(
            dimension=4, residual=_gould_f, derivative=lambda z: _GOULD_JAC, name=bench.value
        )
    if bench is Benchmark.AGGARWAL:
        value = 1.0 if mu is None else float(mu)
        return MixedComplementarityProblem(
            dimension=4, residual=_aggarwal_f(value), derivative=_aggarwal_jac(value),
            parameter=value, name=bench.value,
        )
    lower = np.zeros(10)
    lower[9] = -np.inf  # the certainty-equivalent variable is unconstrained
    return MixedComplementarityProblem(
        dimension=10, residual=_gerard_f, derivative=_gerard_jac, lower=lower, name=bench.value
    )


def defaults(benchmark) -> BenchmarkDefaults:
    return _DEFAULTS[resolve(benchmark)]


def initial_guess(benchmark) -> np.ndarray:
    return _INITIAL_GUESSES[resolve(benchmark)].copy()


def dimension(benchmark) -> int:
    return _DIMENSIONS[resolve(benchmark)]


def list_benchmarks() -> list[str]:
    return [b.value for b in Benchmark]


def gerard_prices(z: np.ndarray) -> tuple[float, float]:
    """Extract the equilibrium price pair (pi1, pi2) from a Gerard solution."""
    return float(z[5]), float(z[6])
