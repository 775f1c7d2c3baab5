import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualsolver.core_dual import (
    AlgebraicSystem, SolverOptions, Status, base_state_continuation, check_jacobian,
    circle_line, dtp_solve, dual_gradient, dual_hessian, dual_objective, solve_dual,
)
from dualsolver.errors import NonConvexInner
from dualsolver.potential import AuxPotential


def fd_gradient(f, z, rel=1e-5):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    for i in range(z.size):
        h = rel * (1.0 + abs(z[i]))
        e = np.zeros_like(z)
        e[i] = h
        out[i] = (f(z + e) - f(z - e)) / (2 * h)
    return out


def closed_form_circle_line(alpha, xbar, ybar, sign):
    lam = 0.5 * (sign * abs(ybar) / np.sqrt(1 - alpha**2) - 1)
    gam = xbar - alpha * (2 * lam + 1)
    return np.array([lam, gam])


def bisect_lambda(alpha, ybar, lo=-0.5 + 1e-12, hi=1e6):
    f = lambda lam: (2 * lam + 1) ** 2 * (1 - alpha**2) - ybar**2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


LINEAR_A = np.array([[2.0, 0.0], [0.0, 3.0]])
LINEAR_B = np.array([4.0, 9.0])


class TestPotential:
    def test_base_is_minimum(self):
        pot = AuxPotential(a=[1.0, 2.0, 0.5], b=[3.0, 3.0, 3.0], p=4, base=[1.0, -1.0, 2.0])
        assert pot.value(pot.base) == 0.0
        np.testing.assert_array_equal(pot.grad(pot.base), 0.0)

    def test_grad_and_hess_match_differences(self):
        pot = AuxPotential(a=[1.0, 0.0, 0.5], b=[2.0, 2.0, 1.0], p=3.5, base=[0.1, 0.2, 0.3],
                           groups=[0, 0, 1])
        x = np.array([0.7, -0.4, 1.1])
        np.testing.assert_allclose(pot.grad(x), fd_gradient(pot.value, x), rtol=1e-7)
        H_fd = np.column_stack([fd_gradient(lambda y: pot.grad(y)[i], x) for i in range(3)]).T
        np.testing.assert_allclose(pot.hess(x), H_fd, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("kw", [dict(a=-1.0, b=0.0, p=4), dict(a=1.0, b=0.0, p=2.0),
                                    dict(a=0.0, b=0.0, p=4)])
    def test_rejects_bad_weights(self, kw):
        with pytest.raises(ValueError):
            AuxPotential(base=[0.0, 0.0], **kw)


class TestDtP:
    @pytest.mark.parametrize("z", [(0.3, 0.2), (-0.2, 1.5), (2.0, -3.0)])
    def test_circle_line_closed_form(self, z):
        xbar, ybar = 0.4, -0.7
        sys = circle_line(0.6)
        res = dtp_solve(sys, AuxPotential.quadratic([xbar, ybar]), z)
        lam, gam = z
        expected = [(xbar - gam) / (2 * lam + 1), ybar / (2 * lam + 1)]
        np.testing.assert_allclose(res.x, expected, rtol=1e-12, atol=1e-13)
        assert res.inner_residual_norm <= 1e-12 * max(1, np.linalg.norm(z))
        assert res.inner_hessian_min_eig == pytest.approx(2 * lam + 1)

    def test_zero_multiplier_returns_base(self):
        pot = AuxPotential(a=1.0, b=2.0, p=4, base=[0.3, -1.2])
        res = dtp_solve(circle_line(0.2), pot, [0.0, 0.0])
        np.testing.assert_allclose(res.x, pot.base, atol=1e-12)
        assert res.inner_iterations == 0

    def test_linear_example(self):
        sys = AlgebraicSystem.linear(LINEAR_A, LINEAR_B)
        res = dtp_solve(sys, AuxPotential.quadratic(np.zeros(2)), [-1.0, -1.0])
        np.testing.assert_allclose(res.x, [2.0, 3.0], atol=1e-13)

    def test_singular_multiplier_raises(self):
        with pytest.raises(NonConvexInner):
            dtp_solve(circle_line(0.6), AuxPotential.quadratic([0.0, 0.8]), [-0.5, 0.0])

    def test_concave_branch_needs_opt_in(self):
        sys, pot = circle_line(0.6), AuxPotential.quadratic([0.0, 0.8])
        with pytest.raises(NonConvexInner):
            dtp_solve(sys, pot, [-1.0, 0.6])
        res = dtp_solve(sys, pot, [-1.0, 0.6], require_convex=False)
        np.testing.assert_allclose(res.x, [0.6, -0.8], atol=1e-13)
        assert res.inner_hessian_min_eig < 0

    def test_finite_difference_second_derivative(self):
        exact = circle_line(0.3)
        fd = AlgebraicSystem(2, 2, exact.residual, exact.jacobian)
        x, z = np.array([0.2, 0.9]), np.array([0.4, -0.3])
        np.testing.assert_allclose(fd.second_directional(x, z),
                                   exact.second_directional(x, z), atol=1e-7)
        assert check_jacobian(exact, x) < 1e-6


class TestObjectiveAndDerivatives:
    def test_objective_zero_at_origin(self):
        pot = AuxPotential(a=[1, 2], b=[1, 1], p=3, base=[0.5, 0.1])
        assert dual_objective(circle_line(0.5), pot, [0.0, 0.0]) == 0.0

    def test_objective_at_circle_line_extremum(self):
        val = dual_objective(circle_line(0.6), AuxPotential.quadratic([0.0, 0.8]), [0.0, -0.6])
        assert val == pytest.approx(0.18, abs=1e-14)

    def test_linear_objective(self):
        sys = AlgebraicSystem.linear(LINEAR_A, LINEAR_B)
        pot = AuxPotential.quadratic(np.zeros(2))
        assert dual_objective(sys, pot, [-1.0, -1.0]) == pytest.approx(6.5, abs=1e-13)
        np.testing.assert_allclose(dual_gradient(sys, pot, [-1.0, -1.0]), 0.0, atol=1e-13)

    def test_gradient_at_base_is_residual(self):
        sys, pot = circle_line(0.6), AuxPotential.quadratic([0.1, 0.5])
        np.testing.assert_array_equal(dual_gradient(sys, pot, [0.0, 0.0]),
                                      sys.residual(pot.base))

    def test_gradient_vanishes_at_extremum(self):
        g = dual_gradient(circle_line(0.6), AuxPotential.quadratic([0.0, 0.8]), [0.0, -0.6])
        np.testing.assert_allclose(g, 0.0, atol=1e-14)

    def test_linear_hessian_is_minus_AAt(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((3, 4))
        sys = AlgebraicSystem.linear(A, rng.standard_normal(3))
        pot = AuxPotential.quadratic(np.zeros(4))
        for z in (np.zeros(3), rng.standard_normal(3)):
            np.testing.assert_allclose(dual_hessian(sys, pot, z), -A @ A.T, atol=1e-12)

    def test_circle_line_hessian_at_origin(self):
        xb, yb = 0.3, -0.6
        Hs = dual_hessian(circle_line(0.1), AuxPotential.quadratic([xb, yb]), [0.0, 0.0])
        expected = -np.array([[4 * xb**2 + 4 * yb**2, 2 * xb], [2 * xb, 1.0]])
        np.testing.assert_allclose(Hs, expected, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(-0.3, 2.0), gam=st.floats(-2.0, 2.0),
       xb=st.floats(-1.0, 1.0), yb=st.floats(-1.0, 1.0), alpha=st.floats(-0.95, 0.95))
def test_envelope_and_symmetry_circle_line(lam, gam, xb, yb, alpha):
    sys, pot = circle_line(alpha), AuxPotential.quadratic([xb, yb])
    z = np.array([lam, gam])
    g = dual_gradient(sys, pot, z)
    fd = fd_gradient(lambda w: dual_objective(sys, pot, w), z)
    assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))
    Hs = dual_hessian(sys, pot, z)
    assert np.array_equal(Hs, Hs.T)
    assert np.linalg.eigvalsh(Hs).max() <= 1e-10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_base_state_fixed_point(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    pot = AuxPotential(a=rng.uniform(0.5, 2, n), b=rng.uniform(0, 1, n), p=rng.uniform(2.5, 5),
                       base=rng.standard_normal(n), groups=np.arange(n))
    sys = AlgebraicSystem(n, 2, lambda x: np.array([np.sum(x**3), x[0]]),
                          lambda x: np.vstack([3 * x**2, np.eye(n)[0]]))
    res = dtp_solve(sys, pot, np.zeros(2))
    np.testing.assert_allclose(res.x, pot.base, atol=1e-12)


class TestSolveDual:
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.6, 0.9])
    def test_circle_line_converges_to_closed_form(self, alpha):
        xbar, ybar = 0.0, 0.8
        rep = solve_dual(circle_line(alpha), AuxPotential.quadratic([xbar, ybar]))
        assert rep.status is Status.CONVERGED
        expected = closed_form_circle_line(alpha, xbar, ybar, +1)
        np.testing.assert_allclose(rep.z, expected, atol=1e-8)
        x, y = rep.primal
        assert abs(x**2 + y**2 - 1) <= 1e-8 and abs(x - alpha) <= 1e-8
        lam = rep.z[0]
        assert abs((2 * lam + 1) ** 2 * (1 - alpha**2) - ybar**2) <= 1e-8

    def test_example_extremum(self):
        rep = solve_dual(circle_line(0.6), AuxPotential.quadratic([0.0, 0.8]))
        np.testing.assert_allclose(rep.z, [0.0, -0.6], atol=1e-10)
        np.testing.assert_allclose(rep.primal, [0.6, 0.8], atol=1e-10)

    @pytest.mark.parametrize("ybar", [0.8, -0.8])
    def test_negative_branch(self, ybar):
        opts = SolverOptions(require_convex=False)
        rep = solve_dual(circle_line(0.6), AuxPotential.quadratic([0.0, ybar]), [-1.5, 0.0], opts)
        assert rep.status is Status.CONVERGED
        np.testing.assert_allclose(rep.z, closed_form_circle_line(0.6, 0.0, ybar, -1), atol=1e-8)
        np.testing.assert_allclose(rep.primal, [0.6, ybar / -1.0], atol=1e-8)

    def test_identity_system(self):
        sys = AlgebraicSystem.linear(np.eye(2), [3.0, -1.0])
        rep = solve_dual(sys, AuxPotential.quadratic(np.zeros(2)))
        assert rep.converged
        np.testing.assert_allclose(rep.z, [-3.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(rep.primal, [3.0, -1.0], atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_linear_full_row_rank(self, seed):
        rng = np.random.default_rng(seed)
        N, n = 4, 7
        A = rng.standard_normal((N, n))
        b = rng.standard_normal(N)
        rep = solve_dual(AlgebraicSystem.linear(A, b),
                         AuxPotential.quadratic(rng.standard_normal(n)))
        assert rep.converged
        assert np.linalg.norm(A @ rep.primal - b) <= 1e-10

    @pytest.mark.parametrize("seed", range(5))
    def test_inconsistent_linear_stagnates(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 5))
        b = rng.standard_normal(5)
        rep = solve_dual(AlgebraicSystem.linear(A, b), AuxPotential.quadratic(np.zeros(5)))
        assert rep.status is Status.STAGNATION

    def test_jitter_off_singular_start(self):
        rep = solve_dual(circle_line(0.6), AuxPotential.quadratic([0.0, 0.8]), [-0.5, 0.0])
        assert rep.status in (Status.CONVERGED, Status.DTP_FAILURE)


class TestContinuation:
    def test_already_solved_base(self):
        rep = base_state_continuation(circle_line(0.6), AuxPotential.quadratic([0.6, 0.8]), 1)
        assert rep.converged and rep.outer_iterations == 0
        np.testing.assert_array_equal(rep.z, 0.0)

    def test_far_base_against_bisection(self):
        sys = circle_line(0.6)
        pot = AuxPotential.quadratic([2.0, 2.0])
        first = solve_dual(sys, pot)
        lam = bisect_lambda(0.6, 2.0)
        assert first.z[0] == pytest.approx(lam, abs=1e-8)
        rep = base_state_continuation(sys, pot, 3)
        assert rep.converged
        x, y = rep.primal
        assert x == pytest.approx(0.6, abs=1e-10) and abs(y) == pytest.approx(0.8, abs=1e-10)

    def test_linear_one_round(self):
        rng = np.random.default_rng(9)
        A, b = rng.standard_normal((3, 3)) + 3 * np.eye(3), rng.standard_normal(3)
        rep = base_state_continuation(AlgebraicSystem.linear(A, b),
                                      AuxPotential.quadratic(rng.standard_normal(3)), 1)
        assert rep.converged
        np.testing.assert_allclose(A @ rep.primal, b, atol=1e-10)

    def test_rounds_must_be_positive(self):
        with pytest.raises(ValueError):
            base_state_continuation(circle_line(0.6), AuxPotential.quadratic([0, 1]), 0)
