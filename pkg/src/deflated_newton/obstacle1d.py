"""Obstacle-constrained linearized beam in one dimension.

A compressed rod pinned at both ends inside a channel |y| <= alpha, after
linearization for small rotations: minimize

    J(y) = int_0^L B (y'')^2 - P (y')^2 - rho g y dx,   |y| <= alpha a.e.

over y in H^2 with y(0) = y(L) = 0.  The constraint indicator is replaced by
the quadratic penalty (gamma/2) int (y - alpha)_+^2 + (-alpha - y)_+^2 dx,
giving a semismooth residual whose roots approach the constrained equilibria
as gamma grows.  Discretization uses C^1 cubic Hermite elements (value and
slope unknowns per node); path-following drives gamma to gamma_max with the
mesh refined so that h <= 1/sqrt(gamma), deflating in the L2 norm to collect
distinct equilibria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .continuation import (
    AllBranchesLost,
    RootRecord,
    SolutionSet,
    _emit,
    deflated_search_callables,
    polish_root,
)
from .deflation import DeflationState, NormSpec
from .linalg import BandedMatrix
from .solver import SolveStatus, SolverConfig, plain_derivative, solve

HALF_BANDWIDTH = 3  # cubic Hermite couples the 4 unknowns of 2 adjacent nodes

# Absolute tolerance and divergence guard are anchored to the assembled
# operator scale: the bending block grows like B/h^3, so a fixed absolute
# tolerance cannot be satisfied in double precision on fine meshes.  The
# factor sits two orders above the observed rounding floor of a direct solve
# and several below the residual jump caused by one penalty update.
ATOL_SCALE_FACTOR = 30.0
DIVERGENCE_SCALE_FACTOR = 1e4

_GAUSS_XI, _GAUSS_W = np.polynomial.legendre.leggauss(4)
GAUSS_POINTS = 0.5 * (_GAUSS_XI + 1.0)
GAUSS_WEIGHTS = 0.5 * _GAUSS_W


@dataclass(frozen=True)
class BeamProblem:
    """Physical data of the channel-constrained beam."""

    bending_stiffness: float = 1.0
    load: float = 10.4
    density: float = 1.0
    gravity: float = 1.0
    length: float = 1.0
    half_width: float = 0.4

    def __post_init__(self):
        if self.bending_stiffness <= 0 or self.length <= 0 or self.half_width <= 0:
            raise ValueError("stiffness, length and channel half-width must be positive")

    def buckling_load(self) -> float:
        """Load at the first bifurcation of the unconstrained rod."""
        return self.bending_stiffness * math.pi**2 / self.length**2


@dataclass(frozen=True)
class HermiteMesh1D:
    """Uniform 1D mesh carrying (value, slope) unknowns per node.

    The value unknowns at both end nodes are pinned (y = 0); slopes stay
    free, which leaves 2 * elements unknowns.
    """

    elements: int
    length: float = 1.0

    def __post_init__(self):
        if self.elements < 1:
            raise ValueError("mesh needs at least one element")
        if self.length <= 0:
            raise ValueError("mesh length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.elements

    @property
    def num_nodes(self) -> int:
        return self.elements + 1

    @property
    def full_dofs(self) -> int:
        return 2 * self.num_nodes

    @property
    def dofs(self) -> int:
        return 2 * self.elements

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.num_nodes)

    def free_indices(self) -> np.ndarray:
        pinned = (0, 2 * self.elements)
        return np.array([i for i in range(self.full_dofs) if i not in pinned])

    def refined(self) -> "HermiteMesh1D":
        return HermiteMesh1D(2 * self.elements, self.length)


def hermite_basis(h: float, xi: np.ndarray):
    """Cubic Hermite shape functions and x-derivatives at reference points.

    Returns (N, dN, d2N) of shape (4, len(xi)); slope unknowns carry the
    element length so that the interpolated function is
    y(xi) = y_L N1 + y'_L N2 + y_R N3 + y'_R N4.
    """
    xi = np.asarray(xi, dtype=float)
    n = np.vstack(
        [
            1.0 - 3.0 * xi**2 + 2.0 * xi**3,
            h * (xi - 2.0 * xi**2 + xi**3),
            3.0 * xi**2 - 2.0 * xi**3,
            h * (xi**3 - xi**2),
        ]
    )
    dn = np.vstack(
        [
            6.0 * (xi**2 - xi) / h,
            1.0 - 4.0 * xi + 3.0 * xi**2,
            6.0 * (xi - xi**2) / h,
            3.0 * xi**2 - 2.0 * xi,
        ]
    )
    d2n = np.vstack(
        [
            (12.0 * xi - 6.0) / h**2,
            (6.0 * xi - 4.0) / h,
            (6.0 - 12.0 * xi) / h**2,
            (6.0 * xi - 2.0) / h,
        ]
    )
    return n, dn, d2n


class BeamDiscretization:
    """Assembled matrices and penalty evaluation for one problem and mesh."""

    def __init__(self, problem: BeamProblem, mesh: HermiteMesh1D, reduced: bool = True):
        self.problem = problem
        self.mesh = mesh
        self.reduced = reduced
        m, h = mesh.elements, mesh.h

        self.basis, self.basis_d1, self.basis_d2 = hermite_basis(h, GAUSS_POINTS)
        self.quad_weights = GAUSS_WEIGHTS * h  # physical weights, same per element

        elem = np.arange(m)
        self.elem_dofs = 2 * elem[:, None] + np.arange(4)[None, :]  # full numbering

        if reduced:
            freemap = np.full(mesh.full_dofs, -1, dtype=int)
            free = mesh.free_indices()
            freemap[free] = np.arange(free.size)
            self.free = free
            self.n = free.size
        else:
            freemap = np.arange(mesh.full_dofs)
            self.free = freemap
            self.n = mesh.full_dofs
        self._red = freemap[self.elem_dofs]  # (m, 4), -1 marks pinned unknowns

        rows = np.repeat(self._red[:, :, None], 4, axis=2)
        cols = np.repeat(self._red[:, None, :], 4, axis=1)
        mask = (rows >= 0) & (cols >= 0)
        self._band_rows = (HALF_BANDWIDTH + rows - cols)[mask]
        self._band_cols = cols[mask]
        self._pair_mask = mask

        wb = self.quad_weights
        ke = self.problem.bending_stiffness * (self.basis_d2 * wb) @ self.basis_d2.T
        ge = self.problem.load * (self.basis_d1 * wb) @ self.basis_d1.T
        me = (self.basis * wb) @ self.basis.T
        fe = self.problem.density * self.problem.gravity * self.basis @ wb

        self.stiffness = self._assemble_constant(ke)
        self.geometric = self._assemble_constant(ge)
        self.mass = self._assemble_constant(me)
        self.load_vector = self._assemble_load(fe)
        self._linear = 2.0 * self.stiffness - 2.0 * self.geometric
        self.operator_scale = self._linear.infinity_norm()

    def _assemble_constant(self, element_matrix: np.ndarray) -> BandedMatrix:
        m = self.mesh.elements
        out = BandedMatrix.zeros(self.n, HALF_BANDWIDTH)
        blocks = np.broadcast_to(element_matrix, (m, 4, 4))
        np.add.at(out.data, (self._band_rows, self._band_cols), blocks[self._pair_mask])
        return out

    def _assemble_load(self, element_vector: np.ndarray) -> np.ndarray:
        full = np.zeros(self.mesh.full_dofs)
        np.add.at(full, self.elem_dofs, np.broadcast_to(element_vector, (self.mesh.elements, 4)))
        return full[self.free]

    def _scatter_vector(self, contrib: np.ndarray) -> np.ndarray:
        full = np.zeros(self.mesh.full_dofs)
        np.add.at(full, self.elem_dofs, contrib)
        return full[self.free]

    def full_vector(self, y: np.ndarray) -> np.ndarray:
        full = np.zeros(self.mesh.full_dofs)
        full[self.free] = y
        return full

    def values_at_quadrature(self, y: np.ndarray) -> np.ndarray:
        """Trace of the finite element function at all quadrature points, (m, 4)."""
        return self.full_vector(y)[self.elem_dofs] @ self.basis

    def _penalty_terms(self, y):
        yq = self.values_at_quadrature(y)
        alpha = self.problem.half_width
        upper = np.maximum(yq - alpha, 0.0)
        lower = np.maximum(-alpha - yq, 0.0)
        return yq, upper, lower

    def residual(self, gamma: float, y: np.ndarray) -> np.ndarray:
        """Weak-form residual of the penalized energy at y."""
        y = np.asarray(y, dtype=float)
        out = self._linear.matvec(y) - self.load_vector
        if gamma != 0.0:
            _, upper, lower = self._penalty_terms(y)
            contrib = ((upper - lower) * self.quad_weights) @ self.basis.T
            out += gamma * self._scatter_vector(contrib)
        return out

    def derivative(self, gamma: float, y: np.ndarray) -> BandedMatrix:
        """Generalized derivative: the linear part plus the active penalty mass.

        Quadrature points sitting exactly on a bound count as inactive.
        """
        y = np.asarray(y, dtype=float)
        yq = self.values_at_quadrature(y)
        alpha = self.problem.half_width
        active = (yq > alpha) | (yq < -alpha)
        if gamma == 0.0 or not active.any():
            return self._linear.copy()
        weights = active * self.quad_weights
        blocks = np.einsum("eq,aq,bq->eab", weights, self.basis, self.basis)
        out = self._linear.copy()
        np.add.at(out.data, (self._band_rows, self._band_cols), gamma * blocks[self._pair_mask])
        return out

    def energy(self, gamma: float, y: np.ndarray) -> float:
        """Discrete penalized energy (quadrature consistent with the residual)."""
        y = np.asarray(y, dtype=float)
        value = float(
            y @ self.stiffness.matvec(y) - y @ self.geometric.matvec(y) - self.load_vector @ y
        )
        if gamma != 0.0:
            _, upper, lower = self._penalty_terms(y)
            value += 0.5 * gamma * float(((upper**2 + lower**2) * self.quad_weights).sum())
        return value

    def active_fraction(self, y: np.ndarray) -> float:
        yq = self.values_at_quadrature(y)
        alpha = self.problem.half_width
        return float(((yq > alpha) | (yq < -alpha)).mean())

    def node_table(self, y: np.ndarray) -> np.ndarray:
        """Per-node (coordinate, value, slope) table for export."""
        full = self.full_vector(y)
        return np.column_stack([self.mesh.nodes(), full[0::2], full[1::2]])


@lru_cache(maxsize=16)
def _discretization(problem: BeamProblem, mesh: HermiteMesh1D) -> BeamDiscretization:
    return BeamDiscretization(problem, mesh)


def assemble_beam_system(problem: BeamProblem, mesh: HermiteMesh1D, reduced: bool = True):
    """Assemble (stiffness, geometric, load, mass) for the beam energy.

    The energy reads J(y) = y'Ky - y'Gy - f'y, so the unconstrained
    equilibrium solves (2K - 2G) y = f.  With ``reduced`` the pinned end
    values are eliminated; otherwise the full nodal system is returned.
    """
    disc = _discretization(problem, mesh) if reduced else BeamDiscretization(problem, mesh, False)
    return disc.stiffness, disc.geometric, disc.load_vector, disc.mass


def moreau_yosida_residual(problem: BeamProblem, mesh: HermiteMesh1D, gamma: float, y) -> np.ndarray:
    """Residual of the penalized problem: J'(y) plus one-sided penalty terms."""
    return _discretization(problem, mesh).residual(gamma, y)


def moreau_yosida_derivative(problem: BeamProblem, mesh: HermiteMesh1D, gamma: float, y) -> BandedMatrix:
    """Generalized derivative of :func:`moreau_yosida_residual` at y."""
    return _discretization(problem, mesh).derivative(gamma, y)


def moreau_yosida_energy(problem: BeamProblem, mesh: HermiteMesh1D, gamma: float, y) -> float:
    """Penalized discrete energy whose gradient is the residual above."""
    return _discretization(problem, mesh).energy(gamma, y)


def prolong(mesh: HermiteMesh1D, y: np.ndarray) -> np.ndarray:
    """Transfer reduced unknowns to the uniformly refined mesh.

    Nested refinement keeps the old nodes and adds element midpoints, where
    the cubic is evaluated exactly, so prolongation is exact for the
    represented function.
    """
    coarse = _discretization_free(mesh)
    y_full = np.zeros(mesh.full_dofs)
    y_full[coarse] = np.asarray(y, dtype=float)

    mid_n, mid_dn, _ = hermite_basis(mesh.h, np.array([0.5]))
    elems = y_full[2 * np.arange(mesh.elements)[:, None] + np.arange(4)[None, :]]
    mid_values = elems @ mid_n[:, 0]
    mid_slopes = elems @ mid_dn[:, 0]

    fine = mesh.refined()
    fine_full = np.zeros(fine.full_dofs)
    fine_full[0::4] = y_full[0::2]  # old node values
    fine_full[1::4] = y_full[1::2]  # old node slopes
    fine_full[2::4] = mid_values
    fine_full[3::4] = mid_slopes
    return fine_full[_discretization_free(fine)]


@lru_cache(maxsize=32)
def _discretization_free(mesh: HermiteMesh1D) -> np.ndarray:
    return mesh.free_indices()


def gamma_schedule(gamma0: float, gamma_max: float, q: Optional[float] = None, steps: int = 9):
    """Geometric penalty schedule from gamma0 (exclusive) to gamma_max.

    Default ratio is (gamma_max / gamma0)^(1/steps); a custom ratio q > 1
    runs until gamma_max, with the final value clipped to hit it exactly.
    """
    if gamma_max <= gamma0:
        return []
    if q is None:
        q = (gamma_max / gamma0) ** (1.0 / steps)
    if q <= 1.0:
        raise ValueError("penalty growth ratio must exceed 1")
    values = []
    g = gamma0
    while True:
        g *= q
        if g >= gamma_max * (1.0 - 1e-12):
            values.append(gamma_max)
            return values
        values.append(g)


def beam_solver_config(disc: BeamDiscretization, base: Optional[SolverConfig] = None) -> SolverConfig:
    """Anchor the solver tolerances to the assembled operator scale."""
    cfg = base or SolverConfig()
    eps = float(np.finfo(float).eps)
    atol = max(cfg.atol, ATOL_SCALE_FACTOR * eps * disc.operator_scale)
    divergence = max(cfg.divergence_tol, DIVERGENCE_SCALE_FACTOR * disc.operator_scale)
    return cfg.with_(atol=atol, divergence_tol=divergence)


@dataclass
class PathState:
    """Final state of a penalty path: where it stopped and what it found."""

    gamma: float
    gamma_max: float
    mesh: HermiteMesh1D
    solutions: SolutionSet
    mass: BandedMatrix


def path_follow(
    problem: BeamProblem,
    guesses: Optional[Sequence[np.ndarray]] = None,
    gamma0: float = 10.0,
    gamma_max: float = 1e6,
    q: Optional[float] = None,
    steps: int = 9,
    initial_elements: int = 64,
    power: float = 2.0,
    shift: float = 1.0,
    config: Optional[SolverConfig] = None,
    max_roots: Optional[int] = None,
    events: Optional[list] = None,
) -> PathState:
    """Collect distinct penalized equilibria and continue them to gamma_max.

    At the initial penalty a deflated search runs from the supplied guesses
    (default: the flat beam), deflating in the L2 norm induced by the mass
    matrix.  The penalty then grows geometrically; before each re-solve the
    mesh is refined until h <= 1/sqrt(gamma) and all branches are prolonged.
    Each branch is re-solved from its prolonged point, and a deflated search
    from the previous points looks for newcomers.

    Returns:
        PathState with the solution set at gamma_max; record parameters hold
        the penalty value at discovery.

    Raises:
        AllBranchesLost: no solution at the initial penalty, or every branch
            failed to re-converge at some step.
    """
    mesh = HermiteMesh1D(initial_elements, problem.length)
    while mesh.h > 1.0 / math.sqrt(gamma0):
        mesh = mesh.refined()

    disc = _discretization(problem, mesh)
    cfg = beam_solver_config(disc, config)
    norm = NormSpec(disc.mass)
    deflation = DeflationState(power=power, shift=shift, norm=norm)
    solutions = SolutionSet(norm=norm)
    pool = [np.zeros(disc.n)] if guesses is None else [np.asarray(g, float) for g in guesses]

    deflated_search_callables(
        residual=lambda z: disc.residual(gamma0, z),
        jacobian=lambda z: disc.derivative(gamma0, z),
        guesses=pool,
        deflation=deflation,
        config=cfg,
        solutions=solutions,
        parameter=gamma0,
        max_roots=max_roots,
        events=events,
        step=0,
    )
    if len(solutions) == 0:
        raise AllBranchesLost(f"no solution found at the initial penalty {gamma0}")

    gamma = gamma0
    for step_idx, g in enumerate(gamma_schedule(gamma0, gamma_max, q, steps), start=1):
        while mesh.h > (1.0 + 1e-12) / math.sqrt(g):
            prolonged = [prolong(mesh, rec.z) for rec in solutions]
            pool = [prolong(mesh, guess) for guess in pool]
            mesh = mesh.refined()
            disc = _discretization(problem, mesh)
            cfg = beam_solver_config(disc, config)
            norm = NormSpec(disc.mass)
            refined_set = SolutionSet(distinctness_tol=solutions.distinctness_tol, norm=norm)
            for rec, z in zip(solutions, prolonged):
                refined_set.add_record(
                    RootRecord(z, rec.iterations, rec.parameter, refined_set.radius(z))
                )
            solutions = refined_set
            _emit(events, kind="refine", step=step_idx, parameter=g,
                  detail=f"elements={mesh.elements}")

        previous_points = solutions.vectors()
        residual = lambda z, g=g, disc=disc: disc.residual(g, z)  # noqa: E731
        jac = lambda z, g=g, disc=disc: disc.derivative(g, z)  # noqa: E731

        resolved = SolutionSet(distinctness_tol=solutions.distinctness_tol, norm=norm)
        for bi, rec in enumerate(solutions):
            result = solve(residual, plain_derivative(jac), rec.z, cfg)
            moved = None
            if result.status is SolveStatus.CONVERGED:
                moved = polish_root(residual, jac, result.solution, cfg)
            if moved is None:
                why = "unverified" if result.status is SolveStatus.CONVERGED else result.status.value
                _emit(events, kind="branch-lost", step=step_idx, parameter=g, branch=bi,
                      status=why)
                continue
            z_new, extra = moved
            if not resolved.is_distinct(z_new):
                _emit(events, kind="branch-collision", step=step_idx, parameter=g, branch=bi)
                continue
            resolved.add_record(
                RootRecord(z_new, rec.iterations, rec.parameter, resolved.radius(z_new))
            )
            _emit(events, kind="branch-resolved", step=step_idx, parameter=g, branch=bi,
                  iterations=result.iterations + extra, detail=f"elements={mesh.elements}")
        if len(resolved) == 0:
            raise AllBranchesLost(f"all branches failed at penalty {g}")

        deflation = DeflationState(power=power, shift=shift, norm=norm, roots=resolved.vectors())
        deflated_search_callables(
            residual=residual,
            jacobian=jac,
            # previous branch points first (cheap: they mostly re-hit their
            # own deflated continuation), then the original guess pool so
            # equilibria that only appear at larger penalties are picked up
            guesses=previous_points + pool,
            deflation=deflation,
            config=cfg,
            solutions=resolved,
            parameter=g,
            max_roots=max_roots,
            events=events,
            step=step_idx,
        )
        solutions = resolved
        gamma = g

    return PathState(gamma, gamma_max, mesh, solutions, disc.mass)
