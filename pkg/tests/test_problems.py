import math

import numpy as np
import pytest

from ufgm import (
    CompositeProblem,
    ConfigError,
    HingeSum,
    HolderPower,
    LpTerm,
    NumericalError,
    Ridge,
    Scaled,
    SpectralPenalty,
    SquaredDistance,
    SummandSpec,
    eigen_max,
    estimate_constants,
    inexact_constant,
    max_singular_value,
    specproj_terms,
)


class TestEvaluate:
    def test_two_summand_sum(self):
        # f1(x) = x^2, f2(x) = |x| at x = -2
        f1 = Scaled(LpTerm(np.eye(1), np.zeros(1), 2.0), 1.0)
        f2 = LpTerm(np.eye(1), np.zeros(1), 1.0)
        prob = CompositeProblem([f1, f2])
        ev = prob.evaluate(np.array([-2.0]))
        assert ev.value == 6.0
        np.testing.assert_array_equal(ev.grad, [-5.0])

    def test_empty_sum(self):
        prob = CompositeProblem([], dimension=3)
        ev = prob.evaluate(np.zeros(3))
        assert ev.value == 0.0
        np.testing.assert_array_equal(ev.grad, np.zeros(3))

    def test_quadratic_plus_l1(self):
        f1 = Scaled(LpTerm(np.eye(2), np.zeros(2), 2.0), 0.5)
        f2 = LpTerm(np.eye(2), np.zeros(2), 1.0)
        prob = CompositeProblem([f1, f2])
        x = np.array([1.0, -1.0])
        ev = prob.evaluate(x)
        assert ev.value == pytest.approx(3.0, abs=1e-15)
        np.testing.assert_allclose(ev.grad, [2.0, -2.0])
        # directional finite-difference check along the subgradient
        h = 1e-6
        u = ev.grad / np.linalg.norm(ev.grad)
        f_plus = prob.evaluate(x + h * u).value
        assert abs(f_plus - ev.value - h * float(ev.grad @ u)) <= 1e-4 * h

    def test_counter_counts_evaluations_exactly(self):
        prob = CompositeProblem([HolderPower(1.0, 0.5)], dimension=2)
        x = np.ones(2)
        for expected in range(1, 8):
            prob.evaluate(x)
            assert prob.oracle_calls == expected

    def test_non_finite_summand_names_label(self):
        class Bad:
            label = "broken-term"
            dimension = 1

            def __call__(self, x):
                from ufgm.problems import FirstOrderEval

                return FirstOrderEval(math.inf, np.zeros(1))

        prob = CompositeProblem([Bad()])
        with pytest.raises(NumericalError, match="broken-term"):
            prob.evaluate(np.zeros(1))

    def test_sum_linearity(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((5, 3))
        b = rng.standard_normal(5)
        f1 = LpTerm(A, b, 1.5)
        f2 = HolderPower(2.0, 0.5)
        both = CompositeProblem([f1, f2], dimension=3)
        only1 = CompositeProblem([f1], dimension=3)
        only2 = CompositeProblem([f2], dimension=3)
        for _ in range(100):
            x = rng.standard_normal(3)
            e = both.evaluate(x)
            e1 = only1.evaluate(x)
            e2 = only2.evaluate(x)
            assert abs(e.value - (e1.value + e2.value)) <= 1e-12 * max(1, abs(e.value))
            np.testing.assert_allclose(e.grad, e1.grad + e2.grad, atol=1e-12)


class TestLpTerm:
    def test_p1(self):
        f = LpTerm(np.eye(2), np.zeros(2), 1.0)
        ev = f(np.array([1.0, -2.0]))
        assert ev.value == 3.0
        np.testing.assert_array_equal(ev.grad, [1.0, -1.0])

    def test_p2(self):
        f = LpTerm(np.eye(2), np.zeros(2), 2.0)
        ev = f(np.array([1.0, -2.0]))
        assert ev.value == 5.0
        np.testing.assert_array_equal(ev.grad, [2.0, -4.0])

    def test_p15_value_and_gradient(self):
        f = LpTerm(np.array([[1.0, 1.0]]), np.array([1.0]), 1.5)
        x = np.array([1.0, 1.0])
        ev = f(x)
        assert ev.value == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(ev.grad, [1.5, 1.5])
        # central finite differences, h = 1e-6
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            num = (f(x + e).value - f(x - e).value) / (2 * h)
            assert abs(num - ev.grad[i]) <= 1e-4

    def test_sign_zero_is_zero(self):
        f = LpTerm(np.eye(1), np.zeros(1), 1.0)
        np.testing.assert_array_equal(f(np.zeros(1)).grad, [0.0])

    def test_p_out_of_range(self):
        with pytest.raises(ConfigError):
            LpTerm(np.eye(2), np.zeros(2), 2.5)


class TestHingeAndRidge:
    def test_single_sample_active(self):
        f = HingeSum(np.array([[1.0, 0.0]]), np.array([1.0]))
        ev = f(np.zeros(2))
        assert ev.value == 1.0
        np.testing.assert_array_equal(ev.grad, [-1.0, 0.0])

    def test_inactive_sample(self):
        f = HingeSum(np.array([[1.0, 0.0]]), np.array([1.0]))
        ev = f(np.array([2.0, 0.0]))
        assert ev.value == 0.0
        np.testing.assert_array_equal(ev.grad, [0.0, 0.0])

    def test_kink_contributes_zero(self):
        f = HingeSum(np.array([[1.0, 0.0]]), np.array([1.0]))
        ev = f(np.array([1.0, 0.0]))  # margin term exactly zero
        assert ev.value == 0.0
        np.testing.assert_array_equal(ev.grad, [0.0, 0.0])

    def test_invalid_label(self):
        with pytest.raises(ConfigError):
            HingeSum(np.ones((2, 2)), np.array([1.0, 2.0]))

    def test_ridge(self):
        f = Ridge(2.0)
        ev = f(np.array([1.0, -1.0]))
        assert ev.value == 2.0
        np.testing.assert_array_equal(ev.grad, [2.0, -2.0])


class TestSpectralPenalty:
    def test_diagonal_case(self):
        pen = SpectralPenalty(np.diag([1.0, 5.0]), 1.0)
        ev = pen(np.array([2.0, 1.0]))
        assert ev.value == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(ev.grad, [1.0, 0.0], atol=1e-10)

    def test_strictly_feasible_is_zero(self):
        pen = SpectralPenalty(np.diag([1.0, 5.0]), 1.0)
        ev = pen(np.array([-1.0, 2.0]))
        assert ev.value == 0.0
        np.testing.assert_array_equal(ev.grad, [0.0, 0.0])

    def test_non_diagonal_eigvector(self):
        pen = SpectralPenalty(np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)
        ev = pen(np.zeros(2))
        # top eigenpair of -L is (1, (1,-1)/sqrt(2)); subgradient u*u
        assert ev.value == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(ev.grad, [0.5, 0.5], atol=1e-9)

    def test_oracle_pair(self):
        L = np.diag([1.0, 2.0])
        quad, pen = specproj_terms(L, 1.5, np.array([3.0, 3.0]))
        assert isinstance(quad, SquaredDistance)
        ev = quad(np.array([3.0, 3.0]))
        assert ev.value == 0.0
        assert pen.alpha == 1.5


class TestEigenMax:
    def test_diagonal(self):
        lam, u = eigen_max(np.diag([1.0, 5.0]))
        assert lam == pytest.approx(5.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(u), [0.0, 1.0], atol=1e-10)

    def test_two_by_two(self):
        lam, u = eigen_max(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert lam == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(u), [1 / math.sqrt(2)] * 2, atol=1e-10)

    def test_matches_dense_solver(self):
        rng = np.random.default_rng(8)
        for n in (5, 12, 33):
            B = rng.standard_normal((n, n))
            S = 0.5 * (B + B.T)
            lam, u = eigen_max(S)
            w = np.linalg.eigvalsh(S)
            assert abs(lam - w[-1]) <= 1e-8 * max(1.0, np.linalg.norm(S))
            resid = np.linalg.norm(S @ u - lam * u)
            assert resid <= 1e-8 * max(1.0, np.linalg.norm(S))
            assert abs(np.linalg.norm(u) - 1.0) <= 1e-12

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eigen_max(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestHolderPower:
    def test_v1_is_quadratic(self):
        f = HolderPower(1.0, 1.0)
        x = np.array([0.6, -0.8])
        ev = f(x)
        assert ev.value == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_allclose(ev.grad, x)

    def test_v0_is_norm(self):
        f = HolderPower(1.0, 0.0)
        x = np.array([3.0, 4.0])
        ev = f(x)
        assert ev.value == pytest.approx(5.0)
        np.testing.assert_allclose(ev.grad, [0.6, 0.8])
        at0 = f(np.zeros(2))
        assert at0.value == 0.0
        np.testing.assert_array_equal(at0.grad, [0.0, 0.0])

    def test_half_exponent(self):
        f = HolderPower(2.0, 0.5)
        x = np.array([4.0, 0.0])
        ev = f(x)
        assert ev.value == pytest.approx(2.0 / 1.5 * 8.0)
        assert np.linalg.norm(ev.grad) == pytest.approx(4.0)
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            num = (f(x + e).value - f(x - e).value) / (2 * h)
            assert abs(num - ev.grad[i]) <= 1e-4

    def test_attached_constant(self):
        f = HolderPower(3.0, 0.5)
        assert f.holder.M == pytest.approx(2 ** 0.5 * 3.0)
        assert f.holder.v == 0.5


def _sample_away_from_kinks(oracle, rng, dim, tries=50):
    for _ in range(tries):
        x = rng.standard_normal(dim)
        if np.linalg.norm(x) > 0.2:
            return x
    raise AssertionError("could not sample a differentiable point")


class TestFiniteDifferenceSuite:
    """Every oracle obeys |f(x+hu) - f(x) - h<g,u>| <= M h^{1+v} + noise."""

    @pytest.mark.parametrize(
        "factory,M,v,dim",
        [
            (lambda rng: LpTerm(rng.standard_normal((8, 4)), rng.standard_normal(8), 2.0), None, 1.0, 4),
            (lambda rng: LpTerm(rng.standard_normal((8, 4)), rng.standard_normal(8), 1.5), None, 0.5, 4),
            (lambda rng: HolderPower(1.0, 1.0), 1.0, 1.0, 3),
            (lambda rng: HolderPower(2.0, 0.5), 2 ** 0.5 * 2.0, 0.5, 3),
            (lambda rng: Ridge(1.7), 1.7, 1.0, 3),
            (lambda rng: SquaredDistance(np.array([0.3, -0.2, 0.9])), 1.0, 1.0, 3),
        ],
    )
    def test_hundred_random_points(self, factory, M, v, dim):
        rng = np.random.default_rng(17)
        oracle = factory(rng)
        if M is None:
            # safe constant from the data for the residual-map oracles
            A = oracle.A
            spec = estimate_constants(A, oracle.b, oracle.p)
            M = 4.0 * spec.M  # headroom for the estimate's halved convention
        h = 1e-5
        for _ in range(100):
            x = _sample_away_from_kinks(oracle, rng, dim)
            u = rng.standard_normal(dim)
            u /= np.linalg.norm(u)
            f0 = oracle(x)
            f1 = oracle(x + h * u)
            resid = abs(f1.value - f0.value - h * float(f0.grad @ u))
            tol = M * h ** (1.0 + v) + 1e-12 * (1.0 + abs(f0.value))
            if v == 1.0:
                tol = min(tol, 1e-6)
            assert resid <= tol

    def test_hinge_away_from_margins(self):
        rng = np.random.default_rng(23)
        X = rng.standard_normal((12, 4))
        y = np.where(rng.random(12) < 0.5, 1.0, -1.0)
        oracle = HingeSum(X, y)
        h = 1e-5
        checked = 0
        while checked < 100:
            w = rng.standard_normal(4)
            margins = 1.0 - y * (X @ w)
            if np.abs(margins).min() < 1e-3:
                continue
            u = rng.standard_normal(4)
            u /= np.linalg.norm(u)
            f0 = oracle(w)
            f1 = oracle(w + h * u)
            assert abs(f1.value - f0.value - h * float(f0.grad @ u)) <= 1e-10
            checked += 1

    def test_spectral_penalty_fd(self):
        rng = np.random.default_rng(29)
        L = rng.standard_normal((5, 5))
        L = 0.5 * (L + L.T)
        pen = SpectralPenalty(L, 1.3)
        h = 1e-5
        checked = 0
        while checked < 40:
            yv = rng.standard_normal(5)
            S = np.diag(yv) - pen.L
            w = np.linalg.eigvalsh(S)
            if w[-1] < 0.1 or w[-1] - w[-2] < 0.1:
                continue  # needs a simple positive top eigenvalue
            u = rng.standard_normal(5)
            u /= np.linalg.norm(u)
            f0 = pen(yv)
            f1 = pen(yv + h * u)
            assert abs(f1.value - f0.value - h * float(f0.grad @ u)) <= 1e-8
            checked += 1


class TestInexactQuadraticBound:
    @pytest.mark.parametrize("M,v", [(1.0, 0.0), (1.0, 0.5), (2.0, 0.5), (1.0, 1.0)])
    @pytest.mark.parametrize("delta", [1e-2, 1e-1])
    def test_holder_power_sampling(self, M, v, delta):
        f = HolderPower(M, v)
        L = inexact_constant(f.holder.M, v, delta)
        rng = np.random.default_rng(31)
        for _ in range(1000):
            x = 2.0 * rng.standard_normal(3)
            y = 2.0 * rng.standard_normal(3)
            fx = f(x)
            fy = f(y)
            d = y - x
            ub = fx.value + float(fx.grad @ d) + 0.5 * L * float(d @ d) + 0.5 * delta
            assert fy.value <= ub + 1e-12 * (1.0 + abs(ub))


class TestEstimateConstants:
    def test_identity_p1(self):
        spec = estimate_constants(np.eye(3), np.zeros(3), 1.0)
        assert spec.M == pytest.approx(math.sqrt(3.0), rel=1e-7)
        assert spec.v == 0.0

    def test_scaled_identity_p2(self):
        spec = estimate_constants(2.0 * np.eye(2), np.zeros(2), 2.0)
        assert spec.M == pytest.approx(4.0, rel=1e-7)
        assert spec.v == 1.0

    def test_sigma_matches_svd(self):
        rng = np.random.default_rng(12)
        A = rng.standard_normal((20, 10))
        sigma = max_singular_value(A)
        ref = np.linalg.svd(A, compute_uv=False)[0]
        assert abs(sigma - ref) <= 1e-6 * ref

    def test_interior_p_interpolates(self):
        A = np.eye(4)
        m1 = estimate_constants(A, np.zeros(4), 1.0).M
        m2 = estimate_constants(A, np.zeros(4), 2.0).M
        m15 = estimate_constants(A, np.zeros(4), 1.5).M
        assert m15 == pytest.approx(1.5 * 2 ** (-0.5) * 4 ** 0.25, rel=1e-7)
        assert min(m1, m2) * 0.5 <= m15 <= max(m1, m2) * 2.0

    def test_zero_matrix(self):
        assert max_singular_value(np.zeros((3, 2))) == 0.0


class TestSummandSpecValidation:
    def test_bad_exponent(self):
        with pytest.raises(ConfigError):
            SummandSpec(1.0, 1.5)

    def test_bad_constant(self):
        with pytest.raises(ConfigError):
            SummandSpec(-1.0, 0.5)

    def test_holder_specs_requires_metadata(self):
        prob = CompositeProblem([LpTerm(np.eye(2), np.zeros(2), 1.0)])
        with pytest.raises(ConfigError):
            prob.holder_specs()

    def test_holder_specs_collects(self):
        prob = CompositeProblem([HolderPower(1.0, 0.5), HolderPower(2.0, 1.0)],
                                dimension=3)
        specs = prob.holder_specs()
        assert [s.v for s in specs] == [0.5, 1.0]

    def test_dimension_conflict(self):
        with pytest.raises(ConfigError):
            CompositeProblem(
                [LpTerm(np.eye(2), np.zeros(2), 1.0), LpTerm(np.eye(3), np.zeros(3), 1.0)]
            )

    def test_simple_default_is_zero(self):
        prob = CompositeProblem([HolderPower(1.0, 1.0)], dimension=2)
        assert prob.simple.value(np.ones(2)) == 0.0
