"""Shared fixtures: the expensive searches run once per session."""

import pytest

from deflated_newton import (
    BeamProblem,
    DeflationState,
    SolverConfig,
    deflated_search,
    path_follow,
)
from deflated_newton import problems


@pytest.fixture(scope="session")
def kojima_roots():
    prob = problems.build("kojima-shindoh")
    sols = deflated_search(prob, [problems.initial_guess("kojima-shindoh")])
    return [rec.z for rec in sols]


@pytest.fixture(scope="session")
def gould_roots():
    prob = problems.build("gould")
    sols = deflated_search(prob, [problems.initial_guess("gould")])
    return [rec.z for rec in sols]


@pytest.fixture(scope="session")
def gerard_solutions():
    rec = problems.defaults("gerard")
    config = SolverConfig(
        line_search="backtracking", singular_action=rec.singular_action, max_iter=rec.max_iter
    )
    sols = deflated_search(
        problems.build("gerard"),
        [problems.initial_guess("gerard")],
        ncp=rec.ncp,
        deflation=DeflationState(power=rec.power, shift=rec.shift),
        config=config,
    )
    return sols


@pytest.fixture(scope="session")
def aggarwal_search():
    """Deflated search on the bimatrix game at the small parameter value."""
    rec = problems.defaults("aggarwal")
    config = SolverConfig(max_iter=rec.max_iter)
    events = []
    sols = deflated_search(
        problems.build("aggarwal", mu=1e-3),
        [problems.initial_guess("aggarwal")],
        config=config,
        events=events,
    )
    return sols, config, events


@pytest.fixture(scope="session")
def beam_path():
    """Full penalty path for the default beam, with its event log."""
    problem = BeamProblem()
    events = []
    state = path_follow(problem, events=events)
    return problem, state, events


@pytest.fixture(scope="session")
def beam_path_subcritical():
    """Path for a load below the first buckling load: a single equilibrium."""
    problem = BeamProblem(load=5.0)
    events = []
    state = path_follow(problem, events=events)
    return problem, state, events
