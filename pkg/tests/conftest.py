"""Shared test helpers: independent oracles and common instance builders."""

import math
import os

import numpy as np
import pytest

from ufgm import CompositeProblem, HingeSum, Ridge

TESTDATA = os.path.join(os.path.dirname(__file__), "testdata")


def cert_violations(trace, epsilon, rel_slack=1e-7):
    """Iterations whose logged gap certificate A_k (obj - eps/2) <= phi_k^*
    fails beyond the relative slack."""
    bad = []
    for r in trace:
        if r.A_k <= 0.0:
            continue
        lhs = r.A_k * (r.obj - 0.5 * epsilon)
        if lhs > r.phi_star + rel_slack * max(1.0, abs(r.phi_star), abs(lhs)):
            bad.append(r.k)
    return bad


def oracle_budget_ok(calls, iterations, l_final, l0):
    """Amortized oracle-call budget: 4k + 2 max(0, log2(L_final / L0)) + 8."""
    allowance = 4 * iterations + 2 * max(0.0, math.log2(l_final / l0)) + 8
    return calls <= allowance, allowance


def finite_diff_residual(oracle, x, h=1e-5, rng=None):
    """|f(x + h u) - f(x) - h <g, u>| for a random unit direction u."""
    rng = rng or np.random.default_rng(0)
    u = rng.standard_normal(x.shape[0])
    u /= np.linalg.norm(u)
    f0 = oracle(x)
    f1 = oracle(x + h * u)
    return abs(f1.value - f0.value - h * float(f0.grad @ u)), f0


def grid_argmin(objective_batch, center, width, transform_batch=None,
                points=41, rounds=11):
    """Brute-force minimizer by successive grid refinement (dims 1 or 2).

    ``objective_batch`` maps an (N, d) array of candidates to N objective
    values; ``transform_batch`` optionally maps candidates into the feasible
    set (so curved boundaries stay searchable at full grid resolution).  The
    initial box [center - width, center + width] must contain the minimizer.
    """
    center = np.asarray(center, dtype=float).copy()
    d = center.shape[0]
    for _ in range(rounds):
        axes = [np.linspace(c - width, c + width, points) for c in center]
        if d == 1:
            grid = axes[0][:, None]
        else:
            gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
            grid = np.column_stack([gx.ravel(), gy.ravel()])
        if transform_batch is not None:
            grid = transform_batch(grid)
        vals = objective_batch(grid)
        best = int(np.argmin(vals))
        center = grid[best]
        width *= 0.15
    return center


def svm_dual_reference(X, y, lam):
    """Optimal value of the hinge + ridge problem via its box-QP dual,
    solved with an independent quasi-Newton method.  Returns the certified
    dual value (a lower bound on the optimum) after checking the duality
    gap is negligible."""
    from scipy.optimize import minimize

    n = X.shape[0]

    def dual_neg(alpha):
        w = X.T @ (alpha * y) / lam
        g = (X @ w) * y - 1.0
        return 0.5 * lam * float(w @ w) - float(alpha.sum()), g

    res = minimize(
        dual_neg,
        np.full(n, 0.5),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, 1.0)] * n,
        options={"maxiter": 20000, "ftol": 1e-18, "gtol": 1e-14},
    )
    d_val = -res.fun
    w_hat = X.T @ (res.x * y) / lam
    p_val = float(
        np.maximum(0.0, 1.0 - y * (X @ w_hat)).sum() + 0.5 * lam * (w_hat @ w_hat)
    )
    assert p_val - d_val <= 1e-8 * max(1.0, abs(p_val))
    return d_val


def make_desk_svm(seed=5, n=100, d=20, lam=1.0, n_active=60):
    """Classification instance whose optimum has margins strictly straddling
    the hinge kink (no sample sits exactly on it), built from the optimality
    conditions.  Margins start at the kink's far side from w0 = 0, so runs
    cross kinks on the way in but the optimum neighborhood is quadratic.

    Returns (X, y, w_star, p_star)."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    m_active = rng.uniform(0.2, 0.9, n_active)
    m_inactive = rng.uniform(1.1, 2.0, n - n_active)
    rho = math.sqrt(m_active.sum() / lam)
    w_hat = np.zeros(d)
    w_hat[0] = 1.0
    a = np.concatenate([m_active, m_inactive]) / rho
    Z = 0.5 * rng.standard_normal((n, d))
    Z[:, 0] = 0.0
    Z[:n_active] -= Z[:n_active].mean(axis=0)
    V = a[:, None] * w_hat + Z
    X = V * y[:, None]
    w_star = rho * w_hat
    p_star = float((1.0 - m_active).sum() + 0.5 * lam * rho**2)
    return X, y, w_star, p_star


@pytest.fixture(scope="session")
def desk_svm():
    X, y, w_star, p_direct = make_desk_svm()
    p_ref = svm_dual_reference(X, y, 1.0)
    assert abs(p_ref - p_direct) <= 1e-7 * max(1.0, abs(p_direct))
    problem = CompositeProblem([HingeSum(X, y), Ridge(1.0, X.shape[1])], p_star=p_ref)
    return {"X": X, "y": y, "w_star": w_star, "p_star": p_ref, "problem": problem}
