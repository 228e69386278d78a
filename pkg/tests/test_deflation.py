import numpy as np
import pytest

from deflated_newton import problems
from deflated_newton.deflation import (
    AtDeflatedRoot,
    DeflationState,
    NormSpec,
    deflated_derivative_parts,
    deflated_residual,
    deflation_factor,
    deflation_gradient,
)
from deflated_newton.reformulate import NcpFunction, assemble_residual

FB = NcpFunction.FISCHER_BURMEISTER


def spd_weight(rng, n):
    a = rng.randn(n, n)
    return a @ a.T + n * np.eye(n)


def test_factor_single_root_unit_distance():
    state = DeflationState()
    state.add_root(np.zeros(3))
    z = np.array([1.0, 0.0, 0.0])
    assert deflation_factor(state, z) == pytest.approx(2.0)


def test_factor_two_roots_product():
    state = DeflationState()
    state.add_root(np.array([1.0, 0.0]))
    state.add_root(np.array([-1.0, 0.0]))
    assert deflation_factor(state, np.array([0.0, 0.0])) == pytest.approx(4.0)


def test_factor_tends_to_one_far_away():
    state = DeflationState()
    state.add_root(np.zeros(2))
    far = deflation_factor(state, np.array([1e6, 0.0]))
    assert abs(far - 1.0) <= 1e-11


def test_factor_guard_raises():
    state = DeflationState()
    state.add_root(np.zeros(2))
    with pytest.raises(AtDeflatedRoot):
        deflation_factor(state, np.full(2, 1e-11))


def test_gradient_no_roots_is_zero():
    state = DeflationState()
    np.testing.assert_array_equal(deflation_gradient(state, np.ones(4)), np.zeros(4))
    assert deflation_factor(state, np.ones(4)) == 1.0


@pytest.mark.parametrize("weighted", [False, True])
@pytest.mark.parametrize("power,shift", [(2.0, 1.0), (1.0, 1.0), (2.0, 0.0), (3.0, 1.0)])
def test_gradient_matches_central_differences(weighted, power, shift):
    rng = np.random.RandomState(11)
    n = 5
    norm = NormSpec(spd_weight(rng, n)) if weighted else NormSpec()
    state = DeflationState(power=power, shift=shift, norm=norm)
    state.add_root(rng.randn(n))
    state.add_root(rng.randn(n) + 3.0)
    for _ in range(10):
        z = rng.randn(n) * 2.0
        grad = deflation_gradient(state, z)
        fd = np.zeros(n)
        for j in range(n):
            h = 1e-6 * (1.0 + abs(z[j]))
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            fd[j] = (deflation_factor(state, zp) - deflation_factor(state, zm)) / (2 * h)
        assert np.linalg.norm(fd - grad) <= 1e-7 * max(1.0, np.linalg.norm(grad))


def test_gradient_symmetry_between_two_roots():
    r1 = np.array([1.0, 0.0])
    r2 = np.array([-1.0, 0.0])
    state = DeflationState()
    state.add_root(r1)
    state.add_root(r2)
    z = np.array([0.0, 1.5])  # on the perpendicular bisector
    grad = deflation_gradient(state, z)
    # contributions along r1 - r2 cancel; swapping roots flips nothing else
    assert abs(grad[0]) <= 1e-14
    swapped = DeflationState()
    swapped.add_root(r2)
    swapped.add_root(r1)
    np.testing.assert_allclose(deflation_gradient(swapped, z), grad, atol=1e-14)


def test_residual_empty_state_passthrough():
    state = DeflationState()
    value = np.array([1.0, -2.0])
    np.testing.assert_array_equal(deflated_residual(state, value, np.zeros(2)), value)


def test_residual_zero_at_new_root():
    state = DeflationState()
    state.add_root(np.zeros(2))
    out = deflated_residual(state, np.zeros(2), np.array([5.0, 5.0]))
    np.testing.assert_array_equal(out, np.zeros(2))


def test_root_preservation():
    # alpha > 0 outside guard balls, so G vanishes exactly when F does
    rng = np.random.RandomState(12)
    state = DeflationState()
    state.add_root(rng.randn(3))
    for _ in range(50):
        z = rng.randn(3) * 3
        f_value = rng.randn(3)
        g_value = deflated_residual(state, f_value, z)
        assert (np.linalg.norm(g_value) == 0.0) == (np.linalg.norm(f_value) == 0.0)
        assert deflation_factor(state, z) > 0.0


def test_kojima_segment_no_decay_toward_root():
    """Approaching a deflated root along a ray, the deflated residual never
    sinks below its far-field level: deflation blocks re-convergence."""
    prob = problems.build("kojima-shindoh")
    root = np.array([1.0, 0.0, 3.0, 0.0])
    start = np.full(4, 0.7)
    for shift in (1.0, 0.0):
        state = DeflationState(power=2.0, shift=shift)
        state.add_root(root)
        norms = []
        for t in np.geomspace(1e-1, 1e-6, 16):
            z = root + t * (start - root)
            g_value = deflated_residual(state, assemble_residual(prob, z, FB), z)
            norms.append(np.linalg.norm(g_value))
        norms = np.array(norms)
        assert norms.min() > 0.0
        assert norms.min() >= 0.1 * norms[0]
        # with power 2 the norms in fact grow monotonically toward the root
        assert (np.diff(norms) > 0).all()


def test_blowup_min_median_invariant():
    """Sampled deflated-residual norms along rays into each benchmark root:
    min over the sequence >= 0.1 x its median (stated bound).

    With power 2 the deflated residual grows like 1/distance approaching the
    root, so a log-spaced sample spans five decades and its minimum (the
    far-field anchor) sits near 1e-2.5 x median.  The substance (no decay to
    zero) is covered by test_kojima_segment_no_decay_toward_root; this stated
    statistic cannot hold for power 2.
    """
    rng = np.random.RandomState(13)
    prob = problems.build("kojima-shindoh")
    root = np.array([1.0, 0.0, 3.0, 0.0])
    direction = rng.randn(4)
    direction /= np.linalg.norm(direction)
    worst = np.inf
    for shift in (1.0, 0.0):
        state = DeflationState(power=2.0, shift=shift)
        state.add_root(root)
        norms = []
        for t in np.geomspace(1e-1, 1e-6, 16):
            z = root + t * direction
            norms.append(
                np.linalg.norm(deflated_residual(state, assemble_residual(prob, z, FB), z))
            )
        worst = min(worst, np.min(norms) / np.median(norms))
    assert worst >= 0.1, (
        f"min/median = {worst:.2e}: the 1/distance growth of the power-2 deflated "
        "residual spreads the sampled norms over five decades"
    )


def test_far_field_relative_perturbation():
    # shifted deflation changes the residual by at most 2k/d_min^p far away
    rng = np.random.RandomState(14)
    for name, roots in (
        ("kojima-shindoh", [np.array([1.0, 0.0, 3.0, 0.0]), np.array([np.sqrt(6) / 2, 0, 0, 0.5])]),
        ("gould", [np.array([0.25, 0.5, 0, 0]), np.array([0.0, 0.5, 0, 0]),
                   np.array([11 / 32, 15 / 32, 1 / 8, 0])]),
    ):
        prob = problems.build(name)
        for power in (1.0, 2.0):
            state = DeflationState(power=power, shift=1.0)
            for r in roots:
                state.add_root(r)
            for _ in range(25):
                z = rng.randn(4) * 10.0
                d_min = min(np.linalg.norm(z - r) for r in roots)
                if d_min < 2.0:
                    continue
                f_value = assemble_residual(prob, z, FB)
                g_value = deflated_residual(state, f_value, z)
                lhs = np.linalg.norm(g_value - f_value)
                bound = 2.0 * len(roots) / d_min**power * np.linalg.norm(f_value)
                assert lhs <= bound + 1e-14


def test_derivative_parts_empty_state():
    state = DeflationState()
    f_value = np.zeros(3)
    scale, jac, u, w = deflated_derivative_parts(state, f_value, np.eye(3), np.ones(3))
    assert scale == 1.0
    np.testing.assert_array_equal(u, np.zeros(3))
    np.testing.assert_array_equal(w, np.zeros(3))


def test_rank_one_term_vanishes_at_other_root():
    # at a second root of F the update vector u = F = 0, so H_G = alpha H_F
    prob = problems.build("kojima-shindoh")
    state = DeflationState()
    state.add_root(np.array([1.0, 0.0, 3.0, 0.0]))
    second = np.array([np.sqrt(6) / 2, 0.0, 0.0, 0.5])
    f_value = assemble_residual(prob, second, FB)
    scale, _, u, w = deflated_derivative_parts(state, f_value, np.eye(4), second)
    assert np.linalg.norm(u) <= 1e-12
    assert scale > 1.0


def test_deflated_derivative_matches_differences():
    prob = problems.build("gould")
    state = DeflationState()
    state.add_root(np.array([0.25, 0.5, 0.0, 0.0]))
    rng = np.random.RandomState(15)

    def g_residual(z):
        return deflated_residual(state, assemble_residual(prob, z, FB), z)

    for _ in range(10):
        z = rng.uniform(0.2, 1.0, 4)
        from deflated_newton.reformulate import assemble_newton_derivative

        scale, jac, u, w = deflated_derivative_parts(
            state, assemble_residual(prob, z, FB), assemble_newton_derivative(prob, z, FB), z
        )
        assembled = scale * np.asarray(jac) + np.outer(u, w)
        fd = np.zeros((4, 4))
        for j in range(4):
            h = 1e-7 * (1.0 + abs(z[j]))
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            fd[:, j] = (g_residual(zp) - g_residual(zm)) / (2 * h)
        assert np.linalg.norm(fd - assembled) <= 1e-5 * np.linalg.norm(assembled)


def test_norm_spec_rejects_indefinite_weight():
    with pytest.raises(Exception):
        NormSpec(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        NormSpec(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_state_validation():
    with pytest.raises(ValueError):
        DeflationState(power=0.5)
    with pytest.raises(ValueError):
        DeflationState(shift=-1.0)
    state = DeflationState()
    state.add_root(np.zeros(2))
    with pytest.raises(ValueError):
        state.add_root(np.zeros(2))


def test_weighted_norm_value():
    weight = np.diag([4.0, 9.0])
    norm = NormSpec(weight)
    assert norm.norm(np.array([1.0, 1.0])) == pytest.approx(np.sqrt(13.0))
