"""First-order oracles, composite problems, and their data plumbing.

An oracle is any callable ``x -> FirstOrderEval``.  Oracles built here also
carry a ``label`` (used in error messages) and, when the smoothness class is
known, a ``holder`` attribute with a valid (M, v) pair.  Smoothness metadata
is consumed only by the bound calculators in :mod:`ufgm.theory`; the solver
itself never reads it.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ParseError
from .geometry import Geometry, SimpleTerm


@dataclass(frozen=True)
class FirstOrderEval:
    """One oracle answer: objective value and one (sub)gradient."""

    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class SummandSpec:
    """Holder smoothness class of one summand: ||g(x) - g(y)|| <= M ||x-y||^v."""

    M: float
    v: float
    label: str = ""

    def __post_init__(self):
        if not (0.0 <= self.v <= 1.0):
            raise ConfigError(f"holder exponent v={self.v} outside [0, 1]")
        if self.M < 0:
            raise ConfigError("holder constant M must be nonnegative")


def _finite(x) -> bool:
    return bool(np.all(np.isfinite(x)))


class LpTerm:
    """||A x - b||_p^p for p in [1, 2].

    Subgradient A^T (p |r|^{p-1} sign r) with r = A x - b and sign(0) = 0,
    the minimal-norm choice at kinks.
    """

    def __init__(self, A, b, p: float):
        if not (1.0 <= p <= 2.0):
            raise ConfigError(f"p={p} outside [1, 2]")
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.ndim != 2 or self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b shapes are inconsistent")
        self.p = float(p)
        self.label = f"lp{p:g}"
        self.holder = None

    @property
    def dimension(self) -> int:
        return self.A.shape[1]

    def __call__(self, x) -> FirstOrderEval:
        r = self.A @ np.asarray(x, dtype=float) - self.b
        p = self.p
        if p == 2.0:
            value = float(r @ r)
            s = 2.0 * r
        elif p == 1.0:
            value = float(np.abs(r).sum())
            s = np.sign(r)
        else:
            absr = np.abs(r)
            value = float((absr**p).sum())
            s = p * absr ** (p - 1.0) * np.sign(r)
        return FirstOrderEval(value, self.A.T @ s)


class HingeSum:
    """Sum of hinge losses max{0, 1 - y_i <x_i, w>} over the rows of X.

    A sample contributes zero to the subgradient when its margin term is
    exactly zero.
    """

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y shapes are inconsistent")
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ConfigError("labels must be -1 or +1")
        self.label = "hinge"
        self.holder = None

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def __call__(self, w) -> FirstOrderEval:
        margins = 1.0 - self.y * (self.X @ np.asarray(w, dtype=float))
        active = margins > 0.0
        value = float(margins[active].sum())
        grad = -self.X.T @ (self.y * active)
        return FirstOrderEval(value, grad)


class Ridge:
    """(lam / 2) ||w||^2; exactly (lam, 1)-smooth."""

    def __init__(self, lam: float, dimension: int | None = None):
        if lam < 0:
            raise ConfigError("ridge weight must be nonnegative")
        self.lam = float(lam)
        self._dim = dimension
        self.label = "ridge"
        self.holder = SummandSpec(self.lam, 1.0, "ridge")

    @property
    def dimension(self):
        return self._dim

    def __call__(self, w) -> FirstOrderEval:
        w = np.asarray(w, dtype=float)
        return FirstOrderEval(0.5 * self.lam * float(w @ w), self.lam * w)


class SquaredDistance:
    """||y - center||^2 / 2; exactly (1, 1)-smooth."""

    def __init__(self, center):
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.label = "sqdist"
        self.holder = SummandSpec(1.0, 1.0, "sqdist")

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def __call__(self, y) -> FirstOrderEval:
        d = np.asarray(y, dtype=float) - self.center
        return FirstOrderEval(0.5 * float(d @ d), d)


class SpectralPenalty:
    """alpha * max{lambda_max(diag(y) - L), 0} for a symmetric matrix L.

    Subgradient alpha * (u o u) for a top unit eigenvector u when the
    maximum eigenvalue is positive, zero otherwise (including at the tie).
    alpha is a user-supplied penalty weight; it is an alpha-Lipschitz
    nonsmooth term since ||u o u||_2 <= ||u||^2 = 1.
    """

    def __init__(self, L, alpha: float):
        if alpha <= 0:
            raise ConfigError("penalty weight alpha must be positive")
        L = np.asarray(L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("L must be a square matrix")
        self.L = 0.5 * (L + L.T)
        self.alpha = float(alpha)
        self.label = "specpen"
        self.holder = SummandSpec(self.alpha, 0.0, "specpen")

    @property
    def dimension(self) -> int:
        return self.L.shape[0]

    def __call__(self, y) -> FirstOrderEval:
        y = np.asarray(y, dtype=float)
        S = np.diag(y) - self.L
        lam, u = eigen_max(S)
        if lam > 0.0:
            return FirstOrderEval(self.alpha * lam, self.alpha * u * u)
        return FirstOrderEval(0.0, np.zeros_like(y))


def specproj_terms(L, alpha: float, y_bar) -> tuple[SquaredDistance, SpectralPenalty]:
    """Oracle pair for penalized projection onto {y | diag(y) <= L (psd order)}."""
    return SquaredDistance(y_bar), SpectralPenalty(L, alpha)


class HolderPower:
    """Calibrated synthetic summand f(x) = (M / (1+v)) ||x||^{1+v}.

    Gradient M ||x||^{v-1} x (zero at the origin).  The attached metadata
    uses 2^{1-v} M: the map x -> ||x||^{v-1} x is (2^{1-v}, v)-Holder (tight
    at antipodal pairs for v = 0), so this is a valid upper constant.
    """

    def __init__(self, M: float, v: float, label: str | None = None):
        if M < 0 or not (0.0 <= v <= 1.0):
            raise ConfigError("require M >= 0 and v in [0, 1]")
        self.M = float(M)
        self.v = float(v)
        self.label = label or f"power{v:g}"
        self.holder = SummandSpec(2.0 ** (1.0 - v) * M, v, self.label)

    def __call__(self, x) -> FirstOrderEval:
        x = np.asarray(x, dtype=float)
        nrm = float(np.linalg.norm(x))
        if nrm == 0.0:
            return FirstOrderEval(0.0, np.zeros_like(x))
        value = self.M / (1.0 + self.v) * nrm ** (1.0 + self.v)
        grad = self.M * nrm ** (self.v - 1.0) * x
        return FirstOrderEval(value, grad)


class Scaled:
    """c * f for an existing oracle f, with the metadata scaled to match."""

    def __init__(self, oracle, c: float):
        if c < 0:
            raise ConfigError("scale must be nonnegative")
        self.oracle = oracle
        self.c = float(c)
        self.label = f"{c:g}*{getattr(oracle, 'label', type(oracle).__name__)}"
        inner = getattr(oracle, "holder", None)
        self.holder = (
            SummandSpec(self.c * inner.M, inner.v, self.label) if inner else None
        )

    @property
    def dimension(self):
        return getattr(self.oracle, "dimension", None)

    def __call__(self, x) -> FirstOrderEval:
        ev = self.oracle(x)
        return FirstOrderEval(self.c * ev.value, self.c * ev.grad)


class CompositeProblem:
    """A sum of first-order oracles plus a simple term over a feasible set.

    Parameters
    ----------
    terms : sequence of oracles, or of (oracle, SummandSpec-or-None) pairs.
        Bare oracles contribute their own ``holder`` attribute (if any) as
        the attached smoothness metadata.
    simple : SimpleTerm, optional
        The additive simple term and constraint set; defaults to none/free.
    dimension : int, optional
        Required when no oracle exposes a ``dimension`` attribute.
    p_star : float, optional
        Known optimal value, when available.

    The call counter increments by exactly one per full-sum evaluation and
    is thread-safe.
    """

    def __init__(self, terms, simple=None, dimension=None, p_star=None,
                 geometry=Geometry.EUCLIDEAN):
        pairs = []
        for item in terms:
            if isinstance(item, tuple):
                oracle, spec = item
            else:
                oracle, spec = item, getattr(item, "holder", None)
            pairs.append((oracle, spec))
        self.terms = pairs
        self.simple = simple if simple is not None else SimpleTerm.zero()
        self.geometry = geometry
        self.p_star = p_star
        dims = {
            d for oracle, _ in pairs
            if (d := getattr(oracle, "dimension", None)) is not None
        }
        if len(dims) > 1:
            raise ConfigError(f"oracles disagree on dimension: {sorted(dims)}")
        if dimension is None:
            if not dims:
                raise ConfigError("dimension could not be inferred; pass it explicitly")
            dimension = dims.pop()
        elif dims and dimension not in dims:
            raise ConfigError(f"dimension {dimension} conflicts with oracles {dims}")
        self.dimension = int(dimension)
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def oracle_calls(self) -> int:
        return self._calls

    def evaluate(self, x) -> FirstOrderEval:
        """Full-sum value and subgradient at x; counts as one oracle call."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dimension},)")
        total = 0.0
        grad = np.zeros(self.dimension)
        # overflow shows up as a NumericalError below, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            for oracle, _ in self.terms:
                ev = oracle(x)
                if not (math.isfinite(ev.value) and _finite(ev.grad)):
                    label = getattr(oracle, "label", type(oracle).__name__)
                    raise NumericalError(
                        f"summand '{label}' returned a non-finite value"
                    )
                total += ev.value
                grad += ev.grad
        with self._lock:
            self._calls += 1
        return FirstOrderEval(total, grad)

    def objective(self, x) -> float:
        """F(x) + psi(x); consumes one oracle call."""
        return self.evaluate(x).value + self.simple.value(x)

    def holder_specs(self) -> list[SummandSpec]:
        specs = []
        for oracle, spec in self.terms:
            if spec is None:
                label = getattr(oracle, "label", type(oracle).__name__)
                raise ConfigError(f"summand '{label}' has no smoothness metadata")
            specs.append(spec)
        return specs


# ---------------------------------------------------------------------------
# dense symmetric eigensolver and singular value estimation
# ---------------------------------------------------------------------------


def _round_robin_pairs(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 rounds of disjoint index pairs covering all
    pairs exactly once (a bye slot handles odd n)."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps), np.array(qs)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def eigen_max(S, max_sweeps: int = 100) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and a unit eigenvector of a symmetric matrix.

    Jacobi rotations in a deterministic round-robin order, applied one
    round of disjoint pairs at a time so the updates vectorize.  Sweeps
    stop at an off-diagonal Frobenius norm of 1e-10 * max(1, ||S||_F),
    which guarantees ||S u - lam u|| <= 1e-8 * max(1, ||S||_F).
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A)))
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    if n == 1:
        return float(A[0, 0]), np.ones(1)
    V = np.eye(n)
    off_tol = 1e-10 * scale
    skip_tol = off_tol / n
    rounds = _round_robin_pairs(n)
    for _ in range(max_sweeps):
        off2 = 2.0 * float((np.triu(A, 1) ** 2).sum())
        if math.sqrt(off2) <= off_tol:
            break
        for ps, qs in rounds:
            apq = A[ps, qs]
            act = np.abs(apq) > skip_tol
            if not act.any():
                continue
            p = ps[act]
            q = qs[act]
            apq = apq[act]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.where(
                theta == 0.0,
                1.0,
                1.0 / (theta + np.copysign(np.sqrt(theta * theta + 1.0), theta)),
            )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # disjoint pairs: the round is one orthogonal transform A <- J^T A J
            Ap = A[:, p]
            Aq = A[:, q]
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap = A[p, :]
            Aq = A[q, :]
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp = V[:, p]
            Vq = V[:, q]
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    else:
        raise NumericalError(f"jacobi eigensolver did not converge in {max_sweeps} sweeps")
    i = int(np.argmax(np.diag(A)))
    return float(A[i, i]), V[:, i].copy()


def max_singular_value(A, rel_tol: float = 1e-8, max_iters: int = 10000) -> float:
    """Largest singular value via power iteration on the Gram matrix.

    Deterministic start vector; converges the Rayleigh quotient to the
    requested relative tolerance.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    m, n = A.shape
    if n <= m:
        mult = lambda v: A.T @ (A @ v)
        dim = n
    else:
        mult = lambda v: A @ (A.T @ v)
        dim = m

    v = np.linspace(1.0, 2.0, dim)
    v /= np.linalg.norm(v)
    w = mult(v)
    if not np.any(w):
        # deterministic fallback through the canonical basis
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = 1.0
            w = mult(e)
            if np.any(w):
                v = e
                break
        else:
            return 0.0
    lam_prev = math.inf
    for _ in range(max_iters):
        lam = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam - lam_prev) <= rel_tol * max(abs(lam), 1e-300):
            return math.sqrt(max(lam, 0.0))
        lam_prev = lam
        w = mult(v)
    raise NumericalError(f"power iteration did not converge in {max_iters} iterations")


def estimate_constants(A, b, p: float) -> SummandSpec:
    """Safe (over-estimated) smoothness metadata for an LpTerm on (A, b).

    v = p - 1.  For p = 2 returns sigma_max(A)^2, the gradient Lipschitz
    constant of ||Ax - b||^2 / 2 (scale by 2 for the unhalved power).  For
    p = 1 returns sigma_max(A) * sqrt(m), a Lipschitz bound on the
    objective.  Interior p interpolates both endpoints:
    p * 2^{1-p} * m^{(2-p)/2} * sigma_max^p.  Only A's shape and spectrum
    enter; b is accepted for interface symmetry.
    """
    if not (1.0 <= p <= 2.0):
        raise ConfigError(f"p={p} outside [1, 2]")
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    sigma = max_singular_value(A)
    if p == 2.0:
        M = sigma**2
    elif p == 1.0:
        M = sigma * math.sqrt(m)
    else:
        M = p * 2.0 ** (1.0 - p) * m ** ((2.0 - p) / 2.0) * sigma**p
    return SummandSpec(M, p - 1.0, f"lp{p:g}")


# ---------------------------------------------------------------------------
# instance generation and file ingestion
# ---------------------------------------------------------------------------


def gen_gaussian_instance(m: int, n: int, seed: int):
    """Standard-normal A (m x n) and planted x_star with b = A x_star exactly."""
    rng = np.random.default_rng(int(seed))
    A = rng.standard_normal((m, n))
    x_star = rng.standard_normal(n)
    return A, A @ x_star, x_star


def gen_svm_instance(n_samples: int, dim: int, seed: int, flip: float = 0.1):
    """Synthetic linearly-separable-with-noise classification data.

    Features are standard normal scaled by 1/sqrt(dim); a fraction ``flip``
    of the labels is inverted so the hinge loss stays active at the optimum.
    """
    rng = np.random.default_rng(int(seed))
    X = rng.standard_normal((n_samples, dim)) / math.sqrt(dim)
    w = rng.standard_normal(dim)
    y = np.where(X @ w >= 0.0, 1.0, -1.0)
    flips = rng.random(n_samples) < flip
    y[flips] *= -1.0
    return X, y


def gen_symmetric_instance(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(int(seed))
    B = rng.standard_normal((dim, dim))
    return 0.5 * (B + B.T)


def load_libsvm(path, dim: int | None = None):
    """Parse sparse ``label idx:val ...`` rows (1-indexed indices).

    Returns a dense (n_samples, dim) matrix and the label vector.  When
    ``dim`` is omitted it is inferred from the largest index seen.
    """
    labels = []
    rows = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise ParseError(f"bad label {parts[0]!r}", line_no) from None
            entries = {}
            for tok in parts[1:]:
                idx_s, _, val_s = tok.partition(":")
                if not val_s:
                    raise ParseError(f"expected idx:val, got {tok!r}", line_no)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"bad feature entry {tok!r}", line_no) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} is not 1-based", line_no)
                if dim is not None and idx > dim:
                    raise ParseError(f"feature index {idx} exceeds dim={dim}", line_no)
                entries[idx] = val
            labels.append(label)
            rows.append(entries)
            if entries:
                max_idx = max(max_idx, max(entries))
    d = dim if dim is not None else max_idx
    X = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return X, np.asarray(labels, dtype=float)


def load_symmetric_matrix(path) -> np.ndarray:
    """Symmetric matrix from an edge list (``i j w`` per line, 1-indexed)
    or a dense comma-separated square matrix.  Lines starting with ``#``
    are skipped."""
    data_lines = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            data_lines.append((line_no, line))
    if not data_lines:
        raise ParseError("no data lines found")
    if "," in data_lines[0][1]:
        rows = []
        for line_no, line in data_lines:
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError:
                raise ParseError("bad numeric entry", line_no) from None
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ParseError(f"expected a square matrix, got rows of mixed length vs {n}")
        M = np.asarray(rows)
        if not np.allclose(M, M.T, rtol=1e-9, atol=1e-12):
            raise ParseError("dense matrix is not symmetric")
        return 0.5 * (M + M.T)
    edges = []
    n = 0
    for line_no, line in data_lines:
        toks = line.split()
        if len(toks) != 3:
            raise ParseError(f"expected 'i j w', got {line!r}", line_no)
        try:
            i, j, w = int(toks[0]), int(toks[1]), float(toks[2])
        except ValueError:
            raise ParseError(f"bad edge entry {line!r}", line_no) from None
        if i < 1 or j < 1:
            raise ParseError("node indices are 1-based", line_no)
        edges.append((i - 1, j - 1, w))
        n = max(n, i, j)
    M = np.zeros((n, n))
    for i, j, w in edges:
        M[i, j] = w
        M[j, i] = w
    return M
