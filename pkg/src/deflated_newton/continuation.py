"""Deflated search over a guess pool and zero-order parameter continuation.

The search loop follows a greedy protocol: solve the deflated problem from a
guess; on success verify the root against the undeflated residual, deflate
it, and retry the same guess; move on at the first failure.  Continuation
re-solves every known branch at each new parameter value and then runs a
deflated search from the previous branch points to pick up newcomers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .deflation import EUCLIDEAN, DeflationState, NormSpec, deflated_derivative_parts, deflated_residual
from .reformulate import (
    MixedComplementarityProblem,
    NcpFunction,
    assemble_newton_derivative,
    assemble_residual,
)
from .solver import SolveStatus, SolverConfig, plain_derivative, solve

DEFAULT_DISTINCTNESS_TOL = 1e-6

# A candidate root is polished with a few plain Newton steps before it is
# accepted: the deflated solve stops at max(atol, rtol * ||G(z0)||), while
# membership requires the undeflated residual to reach atol.  Warm-started
# polishing gets there in one or two steps; anything needing more than this
# cap was not actually a root.
POLISH_MAX_ITER = 5


class AllBranchesLost(Exception):
    """No branch could be re-solved at some continuation step."""


@dataclass
class RootRecord:
    """A root plus its discovery metadata."""

    z: np.ndarray
    iterations: int
    parameter: Optional[float]
    distinctness_radius: float


class SolutionSet:
    """Ordered collection of pairwise distinct roots.

    Distinctness is measured in ``norm`` with radius
    ``tol * (1 + ||z||)`` around each member; adding a vector inside an
    existing radius raises ValueError.
    """

    def __init__(
        self,
        distinctness_tol: float = DEFAULT_DISTINCTNESS_TOL,
        norm: NormSpec = EUCLIDEAN,
    ):
        self.distinctness_tol = distinctness_tol
        self.norm = norm
        self.records: list[RootRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[RootRecord]:
        return iter(self.records)

    def vectors(self) -> list[np.ndarray]:
        return [rec.z for rec in self.records]

    def radius(self, z: np.ndarray) -> float:
        return self.distinctness_tol * (1.0 + self.norm.norm(z))

    def is_distinct(self, z: np.ndarray) -> bool:
        return all(self.norm.norm(z - rec.z) > self.radius(z) for rec in self.records)

    def add(self, z: np.ndarray, iterations: int, parameter: Optional[float]) -> RootRecord:
        z = np.array(z, dtype=float)
        if not self.is_distinct(z):
            raise ValueError("root is not distinct from the set")
        record = RootRecord(z, iterations, parameter, self.radius(z))
        self.records.append(record)
        return record

    def add_record(self, record: RootRecord) -> RootRecord:
        if not self.is_distinct(record.z):
            raise ValueError("root is not distinct from the set")
        self.records.append(record)
        return record


@dataclass(frozen=True)
class Event:
    """Structured progress event for loggers and the CLI."""

    kind: str
    step: Optional[int] = None
    parameter: Optional[float] = None
    branch: Optional[int] = None
    status: Optional[str] = None
    iterations: Optional[int] = None
    detail: str = ""


def _emit(events: Optional[list], **kwargs) -> None:
    if events is not None:
        events.append(Event(**kwargs))


def polish_root(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable,
    z: np.ndarray,
    config: SolverConfig,
) -> Optional[tuple[np.ndarray, int]]:
    """Refine a candidate root on the undeflated problem down to atol.

    Returns the polished root and the number of extra Newton iterations, or
    None when the candidate cannot be verified as a root.
    """
    cfg = config.with_(max_iter=POLISH_MAX_ITER)
    result = solve(residual, plain_derivative(jacobian), z, cfg)
    if result.status is not SolveStatus.CONVERGED:
        return None
    if result.residual_history[-1] > config.atol:
        return None
    return result.solution, result.iterations


def deflated_search_callables(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable,
    guesses: Sequence[np.ndarray],
    deflation: DeflationState,
    config: SolverConfig,
    solutions: Optional[SolutionSet] = None,
    parameter: Optional[float] = None,
    max_roots: Optional[int] = None,
    events: Optional[list] = None,
    step: Optional[int] = None,
) -> SolutionSet:
    """Core deflated search over ``guesses`` for a residual given as callables.

    ``deflation`` must already contain the roots of ``solutions``; both are
    grown in place as new roots are found.
    """
    sols = solutions if solutions is not None else SolutionSet(norm=deflation.norm)

    def deflated_res(z):
        return deflated_residual(deflation, residual(z), z)

    def deflated_jac(z):
        return deflated_derivative_parts(deflation, residual(z), jacobian(z), z)

    for gi, guess in enumerate(guesses):
        while max_roots is None or len(sols) < max_roots:
            result = solve(deflated_res, deflated_jac, guess, config)
            _emit(
                events,
                kind="deflated-solve",
                step=step,
                parameter=parameter,
                branch=gi,
                status=result.status.value,
                iterations=result.iterations,
            )
            if result.status is not SolveStatus.CONVERGED:
                break
            polished = polish_root(residual, jacobian, result.solution, config)
            if polished is None:
                _emit(events, kind="rejected-unverified", step=step, parameter=parameter,
                      branch=gi)
                break
            root, extra = polished
            if not sols.is_distinct(root):
                # converged back into a known root's neighborhood despite deflation
                _emit(events, kind="rejected-duplicate", step=step, parameter=parameter, branch=gi)
                break
            iterations = result.iterations + extra
            sols.add(root, iterations=iterations, parameter=parameter)
            deflation.add_root(root)
            _emit(events, kind="root-found", step=step, parameter=parameter, branch=gi,
                  iterations=iterations)
        if max_roots is not None and len(sols) >= max_roots:
            break
    return sols


def deflated_search(
    problem: MixedComplementarityProblem,
    guesses: Sequence[np.ndarray],
    ncp: NcpFunction = NcpFunction.FISCHER_BURMEISTER,
    deflation: Optional[DeflationState] = None,
    config: Optional[SolverConfig] = None,
    solutions: Optional[SolutionSet] = None,
    max_roots: Optional[int] = None,
    events: Optional[list] = None,
) -> SolutionSet:
    """Deflated search for distinct roots of a complementarity problem.

    Args:
        problem: the MCP to solve.
        guesses: starting points, tried in order; each is retried after every
            root it produces, so one guess can yield several roots.
        ncp: NCP function used for the semismooth reformulation.
        deflation: operator state (fresh shifted p=2 state by default).
        config: solver settings.
        max_roots: optional cap on the number of roots returned.
        events: optional list collecting :class:`Event` records.

    Returns:
        A :class:`SolutionSet`; empty when no guess converged.
    """
    state = deflation if deflation is not None else DeflationState()
    cfg = config or SolverConfig()
    return deflated_search_callables(
        residual=lambda z: assemble_residual(problem, z, ncp),
        jacobian=lambda z: assemble_newton_derivative(problem, z, ncp),
        guesses=guesses,
        deflation=state,
        config=cfg,
        solutions=solutions,
        parameter=problem.parameter,
        max_roots=max_roots,
        events=events,
    )


@dataclass(frozen=True)
class ContinuationPlan:
    """Equispaced zero-order continuation from ``start`` to ``end``."""

    start: float
    end: float
    steps: int
    config: SolverConfig = field(default_factory=SolverConfig)
    ncp: NcpFunction = NcpFunction.FISCHER_BURMEISTER
    power: float = 2.0
    shift: float = 1.0
    norm: NormSpec = EUCLIDEAN
    distinctness_tol: float = DEFAULT_DISTINCTNESS_TOL

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("continuation needs at least one step")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.steps + 1)[1:]


def continue_parameter(
    family: Callable[[float], MixedComplementarityProblem],
    plan: ContinuationPlan,
    initial: SolutionSet,
    events: Optional[list] = None,
) -> SolutionSet:
    """Continue all branches of ``initial`` from plan.start to plan.end.

    At every step each branch is re-solved (undeflated) from its previous
    point; branches that fail to re-converge, or collide with an already
    re-solved branch, are dropped with an event.  A deflated search from the
    previous branch points then looks for newcomers.  Re-solved branches keep
    their discovery metadata; newcomers record the current parameter value.

    Raises:
        AllBranchesLost: when no branch re-converges at some step.
    """
    if len(initial) == 0:
        raise ValueError("continuation requires a nonempty initial solution set")
    current = initial
    cfg = plan.config
    for step_idx, value in enumerate(plan.values(), start=1):
        problem = family(float(value))
        residual = lambda z: assemble_residual(problem, z, plan.ncp)  # noqa: E731
        jac = lambda z: assemble_newton_derivative(problem, z, plan.ncp)  # noqa: E731

        previous_points = current.vectors()
        resolved = SolutionSet(distinctness_tol=plan.distinctness_tol, norm=plan.norm)
        for bi, record in enumerate(current):
            result = solve(residual, plain_derivative(jac), record.z, cfg)
            moved = None
            if result.status is SolveStatus.CONVERGED:
                moved = polish_root(residual, jac, result.solution, cfg)
            if moved is None:
                why = "unverified" if result.status is SolveStatus.CONVERGED else result.status.value
                _emit(events, kind="branch-lost", step=step_idx, parameter=float(value),
                      branch=bi, status=why)
                continue
            z_new, extra = moved
            if not resolved.is_distinct(z_new):
                _emit(events, kind="branch-collision", step=step_idx, parameter=float(value),
                      branch=bi)
                continue
            resolved.add_record(
                RootRecord(
                    z=z_new,
                    iterations=record.iterations,
                    parameter=record.parameter,
                    distinctness_radius=resolved.radius(z_new),
                )
            )
            _emit(events, kind="branch-resolved", step=step_idx, parameter=float(value),
                  branch=bi, iterations=result.iterations + extra)
        if len(resolved) == 0:
            raise AllBranchesLost(f"all branches failed at parameter {value}")

        deflation = DeflationState(
            power=plan.power, shift=plan.shift, norm=plan.norm, roots=resolved.vectors()
        )
        deflated_search_callables(
            residual=residual,
            jacobian=jac,
            guesses=previous_points,
            deflation=deflation,
            config=cfg,
            solutions=resolved,
            parameter=float(value),
            events=events,
            step=step_idx,
        )
        current = resolved
    return current
