"""Closed-form and implicit iteration bounds, plus recurrence simulators.

Everything here is a pure function of smoothness metadata (M_j, v_j per
summand), accuracy targets, and initial-distance bounds.  Root finding is
bisection throughout: the objectives are strictly monotone, so bisection is
derivative-free and unconditionally convergent.  The convention 0^0 = 1 is
used where exponents vanish (v = 1 cases).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .problems import SummandSpec


@dataclass(frozen=True)
class RateInputs:
    """Inputs to the iteration-bound formulas.

    ``terms`` carries the per-summand (M_j, v_j); ``xi0`` is the value (or
    an upper bound) of the initial Bregman distance to a minimizer.
    """

    terms: tuple[SummandSpec, ...]
    epsilon: float
    xi0: float

    def __init__(self, terms, epsilon, xi0):
        object.__setattr__(self, "terms", tuple(terms))
        object.__setattr__(self, "epsilon", float(epsilon))
        object.__setattr__(self, "xi0", float(xi0))
        if not self.terms:
            raise ConfigError("at least one summand is required")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.xi0 < 0:
            raise ConfigError("xi0 must be nonnegative")

    @property
    def J(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class GrowthSpec:
    """Growth condition F + psi - p_star >= mu * xi(x, x_star)^{p/2}."""

    mu: float
    p: float
    initial_gap: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError("growth modulus mu must be positive")
        if self.p < 1:
            raise ConfigError("growth exponent p must be >= 1")
        if self.initial_gap <= 0:
            raise ConfigError("initial gap must be positive")


@dataclass(frozen=True)
class RecurrenceSpec:
    """Generic recurrence sum_j alpha_j (A' - A)^{1+q_j} / A'^{q_j} >= 1."""

    pairs: tuple[tuple[float, float], ...]

    def __init__(self, pairs):
        object.__setattr__(
            self, "pairs", tuple((float(a), float(q)) for a, q in pairs)
        )
        if not self.pairs:
            raise ConfigError("at least one (alpha, q) pair is required")
        for a, q in self.pairs:
            if a <= 0:
                raise ConfigError("alpha coefficients must be positive")
            if not (0.0 <= q <= 1.0):
                raise ConfigError("q exponents must lie in [0, 1]")


def _pow(base: float, e: float) -> float:
    """base**e with 0^0 = 1 and overflow mapped to +inf."""
    if e == 0.0:
        return 1.0
    try:
        return base**e
    except OverflowError:
        return math.inf


def inexact_constant(M: float, v: float, delta: float) -> float:
    """Smallest quadratic-model constant for a (M, v)-Holder-smooth gradient
    with additive slack delta/2:

        L(delta) = [ ((1-v)/(1+v)) * (1/delta) ]^{(1-v)/(1+v)} * M^{2/(1+v)}
    """
    if delta <= 0:
        raise ConfigError("delta must be positive")
    if not (0.0 <= v <= 1.0):
        raise ConfigError("v must lie in [0, 1]")
    e = (1.0 - v) / (1.0 + v)
    return _pow(e / delta, e) * _pow(M, 2.0 / (1.0 + v))


def sum_inexact_constant(terms, delta: float) -> float:
    """Quadratic-model constant for a sum: the per-term constants with the
    slack budget delta split evenly over the |J| summands."""
    if delta <= 0:
        raise ConfigError("delta must be positive")
    terms = list(terms)
    J = len(terms)
    return sum(inexact_constant(t.M, t.v, delta / J) for t in terms)


def explicit_bound_terms(inputs: RateInputs) -> list[float]:
    """Per-summand contributions to the closed-form iteration bound."""
    J = inputs.J
    out = []
    for t in inputs.terms:
        d = 1.0 + 3.0 * t.v
        c = ((d / (1.0 + t.v)) * _pow(2.0, (2.0 + 2.0 * t.v) / d)
             * _pow(float(J), (1.0 - t.v) / d))
        out.append(
            c * _pow(t.M / inputs.epsilon, 2.0 / d)
            * _pow(inputs.xi0, (1.0 + t.v) / d)
        )
    return out


def explicit_bound(inputs: RateInputs) -> float:
    """Closed-form iteration bound for reaching epsilon accuracy:

        sum_j c_j (M_j / eps)^{2/(1+3v_j)} xi0^{(1+v_j)/(1+3v_j)}

    with c_j = ((1+3v_j)/(1+v_j)) 2^{(2+2v_j)/(1+3v_j)} J^{(1-v_j)/(1+3v_j)}.
    """
    return sum(explicit_bound_terms(inputs))


def two_term_bound(M: float, L: float, xi0: float, eps: float) -> float:
    """Specialization to one Lipschitz (M, 0) plus one smooth (L, 1) term:
    8 (M/eps)^2 xi0 + 4 sqrt(L xi0 / eps)."""
    terms = (SummandSpec(M, 0.0, "nonsmooth"), SummandSpec(L, 1.0, "smooth"))
    return explicit_bound(RateInputs(terms, eps, xi0))


def _bisect_decreasing(f, f_tol: float = 1e-12, max_iter: int = 500) -> float:
    """Root of a strictly decreasing f with a sign change on (0, inf).

    The bracket is grown by doubling (or shrunk by halving) from 1 until it
    straddles the root; bisection then drives the residual |f| below f_tol,
    subject to the float resolution of the bracket.
    """
    f1 = f(1.0)
    if f1 == 0.0:
        return 1.0
    if f1 > 0:
        lo, hi = 1.0, 2.0
        while f(hi) > 0.0:
            lo, hi = hi, hi * 2.0
            if hi > 1e300:
                raise ConfigError("root bracket exceeded 1e300")
    else:
        lo, hi = 0.5, 1.0
        while f(lo) < 0.0:
            lo, hi = lo * 0.5, lo
            if lo < 1e-300:
                raise ConfigError("root bracket collapsed below 1e-300")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= f_tol:
            return mid
        if fmid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * hi:
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def implicit_bound(inputs: RateInputs) -> tuple[float, float]:
    """Implicit iteration bound: K solves

        sum_j J^{(1-v_j)/(1+v_j)} M_j^{2/(1+v_j)} xi0 / eps^{2/(1+v_j)}
              * K^{-(1+3v_j)/(1+v_j)}  =  1

    (left side strictly decreasing in K).  Returns (K, 5K); 5K iterations
    guarantee epsilon accuracy.
    """
    J = inputs.J
    coeffs = []
    for t in inputs.terms:
        if t.M == 0.0:
            continue
        beta = (_pow(float(J), (1.0 - t.v) / (1.0 + t.v))
                * _pow(t.M, 2.0 / (1.0 + t.v)) * inputs.xi0
                / _pow(inputs.epsilon, 2.0 / (1.0 + t.v)))
        coeffs.append((beta, (1.0 + 3.0 * t.v) / (1.0 + t.v)))
    if not coeffs:
        raise ConfigError("implicit bound needs at least one term with M > 0")

    def f(K: float) -> float:
        return sum(beta * _pow(K, -e) for beta, e in coeffs) - 1.0

    K = _bisect_decreasing(f)
    return K, 5.0 * K


def growth_bound(inputs: RateInputs, growth: GrowthSpec, target_eps: float) -> float:
    """Total-iteration bound for the restarted solver under (mu, p) growth.

    Evaluates, with N = ceil(log2(initial_gap / target_eps)) restarts and
    E_j = 2(p - 1 - v_j) / (p (1 + 3 v_j)):

        sum_j c''_j min{ 2^{E_j} / (2^{E_j} - 1), N / 2^{E_j} }
              * M_j^{2/(1+3v_j)} / ( mu^{2(1+v_j)/(p(1+3v_j))} eps^{E_j} )
        + N

    where c''_j = ((1+3v_j)/(1+v_j)) 2^{(v_j-1)(p-2)/(p(1+3v_j))}
    J^{(1-v_j)/(1+3v_j)}.  When E_j = 0 (v_j = p - 1) the geometric branch
    degenerates and the N branch applies: the logarithmic regime.
    """
    if target_eps <= 0:
        raise ConfigError("target accuracy must be positive")
    J = inputs.J
    p = growth.p
    N = max(0, math.ceil(math.log2(growth.initial_gap / target_eps)))
    total = float(N)
    for t in inputs.terms:
        d = 1.0 + 3.0 * t.v
        E = 2.0 * (p - 1.0 - t.v) / (p * d)
        c2 = ((d / (1.0 + t.v))
              * _pow(2.0, (t.v - 1.0) * (p - 2.0) / (p * d))
              * _pow(float(J), (1.0 - t.v) / d))
        twoE = _pow(2.0, E)
        geo = twoE / (twoE - 1.0) if twoE > 1.0 else math.inf
        factor = min(geo, N / twoE)
        total += (c2 * factor * _pow(t.M, 2.0 / d)
                  / (_pow(growth.mu, 2.0 * (1.0 + t.v) / (p * d))
                     * _pow(target_eps, E)))
    return total


def recurrence_extremal(spec: RecurrenceSpec, steps: int) -> list[float]:
    """Slowest-growing sequence admissible under the recurrence.

    A_0 = 0 and each A_{k+1} is the smallest value >= A_k satisfying
    sum_j alpha_j (A_{k+1} - A_k)^{1+q_j} / A_{k+1}^{q_j} = 1 (bisection to
    residual 1e-12).  A_1 = 1 / sum(alpha_j) in closed form.
    """
    if steps < 1:
        raise ConfigError("need at least one step")
    pairs = spec.pairs
    seq = [0.0]
    if steps >= 1:
        seq.append(1.0 / sum(a for a, _ in pairs))

    def increment(A: float, s_guess: float) -> float:
        def g(s: float) -> float:
            tot = 0.0
            denom = A + s
            for a, q in pairs:
                if q == 0.0:
                    tot += a * s
                elif q == 1.0:
                    tot += a * s * s / denom
                else:
                    tot += a * s ** (1.0 + q) / denom**q
            return tot - 1.0

        lo = 0.0
        hi = max(s_guess, 1e-300)
        while g(hi) < 0.0:
            lo = hi
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if abs(gm) <= 1e-12:
                return mid
            if gm < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-17 * hi:
                return 0.5 * (lo + hi)
        return 0.5 * (lo + hi)

    s_prev = seq[1]
    for _ in range(1, steps):
        s_prev = increment(seq[-1], s_prev)
        seq.append(seq[-1] + s_prev)
    return seq


def recurrence_count_bound(spec: RecurrenceSpec, A: float) -> float:
    """Upper bound on the number of steps any admissible sequence can take
    to first reach level A:  sum_j (1 + q_j) (alpha_j A)^{1 / (1 + q_j)}."""
    if A < 0:
        raise ValueError("A must be nonnegative")
    return sum((1.0 + q) * _pow(a * A, 1.0 / (1.0 + q)) for a, q in spec.pairs)


def recurrence_threshold_root(spec: RecurrenceSpec, delta: float) -> float:
    """Unique positive root C of sum_j alpha_j delta C^{-(1+q_j)} = 1.

    Any admissible sequence reaches level delta within 5C steps.  The root
    is returned for every delta > 0, including delta below 1/sum(alpha_j)
    where the guarantee is immediate.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")

    def f(C: float) -> float:
        return sum(a * delta * _pow(C, -(1.0 + q)) for a, q in spec.pairs) - 1.0

    return _bisect_decreasing(f)


def backtracking_ceiling(terms, eps: float, A_next: float, a_next: float) -> float:
    """Largest quadratic-model constant the doubling search can accept on a
    sum with the given smoothness metadata:

        2 * sum_j ( J * A_{k+1} / (eps * a_{k+1}) )^{(1-v_j)/(1+v_j)}
                  * M_j^{2/(1+v_j)}
    """
    terms = list(terms)
    J = len(terms)
    if eps <= 0 or a_next <= 0 or A_next <= 0:
        raise ValueError("eps, A_next and a_next must be positive")
    ratio = J * A_next / (eps * a_next)
    return 2.0 * sum(
        _pow(ratio, (1.0 - t.v) / (1.0 + t.v)) * _pow(t.M, 2.0 / (1.0 + t.v))
        for t in terms
    )
