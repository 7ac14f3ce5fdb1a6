"""Iterative eigen- and linear solvers that accept dual-number operators.

LAPACK cannot see through operator overloading, so the eigenvectors needed by
classical MDS and LLE are computed here with power iteration, deflation,
inverse power iteration and conjugate gradients. Every routine is written
against :mod:`dimreader.dual`, so when the operator or right-hand side
carries a derivative channel the result does too.

Convergence tests look at both channels: a dual solve only stops once the
derivative residual is small as well. With all derivatives zero the
derivative residual is identically zero and the iteration sequence is the
same as for plain reals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dual as dn
from .exceptions import NegativeSpectrum, NoConvergence, SingularSystem

# The eigen-solver iteration cap is max(10 * dim, EIGEN_MIN_ITER): power
# iteration converges geometrically in the eigenvalue ratio, and 10 * dim
# steps are far too few for small matrices with a modest spectral gap.
EIGEN_MIN_ITER = 5000
CG_MIN_ITER = 50
STALL_ITERS = 100


@dataclass(frozen=True)
class MatVecOracle:
    """A linear operator given only through its action on vectors."""

    dim: int
    apply: Callable
    trace: float | None = None
    matrix: object = None

    @classmethod
    def from_matrix(cls, A) -> "MatVecOracle":
        """Wrap a dense (real or dual) square matrix."""
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        return cls(n, lambda x: A @ x, float(np.trace(dn.value(A))), A)

    def __call__(self, x):
        return self.apply(x)

    def estimate_trace(self) -> float:
        if self.trace is not None:
            return self.trace
        eye = np.eye(self.dim)
        return float(np.sum([dn.value(self.apply(eye[i]))[i] for i in range(self.dim)]))


def _eigen_max_iter(dim, max_iter):
    return max(10 * dim, EIGEN_MIN_ITER) if max_iter is None else max_iter


def _fix_sign(x):
    idx = int(np.argmax(np.abs(dn.value(x))))
    if dn.value(x)[idx] < 0:
        return -x
    return x


def _project_out(x, basis):
    for q in basis:
        x = x - q * dn.dot(q, x)
    return x


def _normalize(x):
    return x / dn.norm(x)


def _channel_norms(r):
    return float(np.linalg.norm(dn.value(r))), float(np.linalg.norm(dn.deriv(r)))


def _abs_pair(s):
    return abs(float(dn.value(s))), abs(float(dn.deriv(s)))


def power_iteration(oracle: MatVecOracle, tol=1e-10, max_iter=None, seed=0, orthogonal_to=(), scale=0.0):
    """Dominant eigenpair of a symmetric operator.

    Returns ``(eigenvalue, unit eigenvector)`` with the sign chosen so the
    largest-magnitude component is positive. ``orthogonal_to`` is a list of
    unit vectors the iterate is kept orthogonal to.

    Raises :class:`NoConvergence` if ``||A x - lambda x|| <= tol * max(|lambda|, scale)``
    is not reached within ``max_iter`` matrix-vector products. ``scale`` lets
    a deflated operator be judged against the norm of the original one, whose
    round-off it inherits. The residual is measured on the orthogonal
    complement of ``orthogonal_to``, where the iteration runs; otherwise the
    tolerance-level error of earlier pairs leaks into it.
    """
    dim = oracle.dim
    max_iter = _eigen_max_iter(dim, max_iter)
    basis = list(orthogonal_to)
    rng = np.random.default_rng(seed)
    x = _normalize(_project_out(rng.standard_normal(dim), basis))
    y = _project_out(oracle(x), basis)
    res = np.inf
    for _ in range(max_iter):
        lam = dn.dot(x, y)
        lam_v, lam_d = _abs_pair(lam)
        lam_v = max(lam_v, scale)
        r_v, r_d = _channel_norms(y - x * lam)
        res = r_v
        x_d = float(np.linalg.norm(dn.deriv(x)))
        y_d = float(np.linalg.norm(dn.deriv(y)))
        if r_v <= tol * lam_v and r_d <= tol * (lam_v * x_d + lam_d + y_d):
            return lam if dn.is_dual(lam) else float(lam), _fix_sign(x)
        if r_v == 0.0 and lam_v == 0.0:
            # The iterate is in the null space: every unit vector here is an eigenvector.
            return lam if dn.is_dual(lam) else float(lam), _fix_sign(x)
        x = _normalize(y)
        y = _project_out(oracle(x), basis)
    raise NoConvergence(
        f"power iteration did not converge in {max_iter} iterations (residual {res:.3e})",
        max_iter=max_iter,
        residual=res,
    )


def top_k_eigenpairs(oracle: MatVecOracle, k, tol=1e-10, max_iter=None, seed=0):
    """Leading ``k`` eigenpairs by power iteration with deflation.

    Each converged pair is removed from the operator by subtracting
    ``lambda * x x^T`` from its action. Pairs are returned in descending
    eigenvalue order as ``(eigenvalues, vectors)`` where ``vectors`` has the
    eigenvectors as columns.
    """
    if not 1 <= k <= oracle.dim:
        raise ValueError(f"k must be in [1, {oracle.dim}], got {k}")
    lams, vecs = [], []

    def deflated(x):
        y = oracle(x)
        for lam, v in zip(lams, vecs):
            y = y - v * (lam * dn.dot(v, x))
        return y

    op = MatVecOracle(oracle.dim, deflated)
    for i in range(k):
        scale = max((abs(float(dn.value(l))) for l in lams), default=0.0)
        lam, v = power_iteration(op, tol=tol, max_iter=max_iter, seed=seed + i, orthogonal_to=vecs, scale=scale)
        lams.append(lam)
        vecs.append(v)
    order = np.argsort(-np.array([float(dn.value(l)) for l in lams]), kind="stable")
    lams = [lams[i] for i in order]
    vecs = [vecs[i] for i in order]
    return dn.stack(lams), dn.stack(vecs, axis=1)


def conjugate_gradients(oracle: MatVecOracle, b, tol=1e-12, max_iter=None, x0=None):
    """Solve ``A x = b`` for a symmetric positive definite operator.

    Stops when ``||b - A x|| <= tol * ||b||``. For duals the derivative
    residual must also drop to ``tol`` times its largest value so far, a test
    that scales with the seed so derivatives stay exactly linear in it.
    Raises :class:`SingularSystem` on a non-positive curvature step and
    :class:`NoConvergence` after ``max_iter`` iterations.
    """
    dim = oracle.dim
    if max_iter is None:
        max_iter = max(4 * dim, CG_MIN_ITER)
    b_v, b_d = _channel_norms(b)
    scale_v = tol * b_v
    peak_d = b_d
    if x0 is None:
        x = dn.zeros(dim, like=b) if dn.is_dual(b) else np.zeros(dim)
        r = dn.copy(b)
    else:
        x = dn.copy(x0)
        r = b - oracle(x)
    if b_v == 0.0 and b_d == 0.0:
        return x
    p = dn.copy(r)
    rr = dn.dot(r, r)
    r_v = np.inf
    for _ in range(max_iter):
        r_v, r_d = _channel_norms(r)
        peak_d = max(peak_d, r_d)
        if r_v <= scale_v and r_d <= tol * peak_d:
            return x
        Ap = oracle(p)
        pAp = dn.dot(p, Ap)
        if float(dn.value(pAp)) <= 0.0:
            raise SingularSystem(
                "conjugate gradients met non-positive curvature; "
                "the operator is not positive definite (shift too small?)"
            )
        alpha = rr / pAp
        x = x + p * alpha
        r = r - Ap * alpha
        rr_new = dn.dot(r, r)
        if float(dn.value(rr_new)) == 0.0 and _channel_norms(r)[1] <= tol * peak_d:
            return x
        beta = rr_new / rr
        p = r + p * beta
        rr = rr_new
    raise NoConvergence(
        f"conjugate gradients did not converge in {max_iter} iterations (residual {r_v:.3e})",
        max_iter=max_iter,
        residual=r_v,
    )


def _shifted_lu_solver(A, shift):
    """``x -> (A + shift I)^{-1} x`` for real or dual ``A`` and ``x``."""
    from scipy.linalg import lu_factor, lu_solve

    A_v = np.asarray(dn.value(A), dtype=float)
    A_d = dn.deriv(A) if dn.is_dual(A) else None
    lu = lu_factor(A_v + shift * np.eye(A_v.shape[0]))

    def solve(x):
        y_v = lu_solve(lu, np.asarray(dn.value(x), dtype=float))
        rhs = np.array(dn.deriv(x), dtype=float) if dn.is_dual(x) else None
        if A_d is not None:
            rhs = (0.0 if rhs is None else rhs) - A_d @ y_v
        if rhs is None:
            return y_v
        return dn.DualArray(y_v, lu_solve(lu, rhs))

    return solve


def smallest_nonzero_eigenpairs(
    oracle: MatVecOracle,
    k,
    null_dim=0,
    shift=None,
    tol=1e-10,
    max_iter=None,
    seed=0,
    null_space=None,
    cg_tol=1e-12,
    cg_max_iter=None,
    solver="auto",
):
    """Smallest eigenpairs above a known null space, by inverse power iteration.

    Every inverse step solves ``(A + shift I) y = x`` with
    :func:`conjugate_gradients`. If ``null_space`` is given (a list of
    vectors spanning the kernel, e.g. the constant vector for LLE) it is used
    directly; otherwise the ``null_dim`` smallest eigenpairs are computed first
    and discarded. Each solve is restricted to the orthogonal complement of
    the vectors already found. Returns ``(eigenvalues, vectors)`` in
    ascending order.

    ``solver="direct"`` replaces the conjugate-gradient solves by one LU
    factorisation of the shifted value matrix, reused for both channels.
    It needs an oracle built with :meth:`MatVecOracle.from_matrix`; ``"auto"``
    picks it whenever the matrix is available. CG needs on the order of
    ``sqrt(cond)`` steps, which is hopeless for LLE matrices whose smallest
    nonzero eigenvalues sit near 1e-9.
    """
    dim = oracle.dim
    max_iter = _eigen_max_iter(dim, max_iter)
    scale = oracle.estimate_trace() / dim
    if shift is None:
        shift = 1e-9 * scale
    if solver == "auto":
        solver = "direct" if oracle.matrix is not None else "cg"
    if solver == "direct":
        if oracle.matrix is None:
            raise ValueError("the direct solver needs an oracle built from a matrix")
        direct = _shifted_lu_solver(oracle.matrix, shift)
    elif solver != "cg":
        raise ValueError(f"unknown solver {solver!r}")

    found = []
    # Restricting to the complement of the found vectors keeps the system
    # positive definite and stops round-off from amplifying null components.
    shifted = MatVecOracle(dim, lambda x: _project_out(oracle(_project_out(x, found)) + x * shift, found))

    if null_space is not None:
        for v in null_space:
            found.append(_normalize(_project_out(v, found)))
        if len(found) != null_dim:
            null_dim = len(found)
        n_compute = k
    else:
        n_compute = null_dim + k

    rng = np.random.default_rng(seed)
    lams = []
    # Residuals cannot drop below round-off in A x; for PSD A the trace bounds ||A||.
    res_tol_floor = 10.0 * np.finfo(float).eps * max(abs(scale) * dim, np.finfo(float).tiny)
    for i in range(n_compute):
        x = _normalize(_project_out(rng.standard_normal(dim), found))
        res = np.inf
        best, since_best = (np.inf, np.inf), 0
        for _ in range(max_iter):
            Ax = oracle(x)
            lam = dn.dot(x, Ax)
            lam_v, lam_d = _abs_pair(lam)
            r_v, r_d = _channel_norms(Ax - x * lam)
            res = r_v
            x_d = float(np.linalg.norm(dn.deriv(x)))
            thresh = max(tol * lam_v, res_tol_floor)
            rel = min(thresh / max(lam_v, np.finfo(float).tiny), 1e-2)
            Ax_d = float(np.linalg.norm(dn.deriv(Ax)))
            if r_v <= thresh and r_d <= thresh * x_d + tol * lam_d + rel * Ax_d:
                break
            # Round-off can hold residuals above any fixed floor (inverse steps
            # amplify derivative round-off by 1/lambda). A plateau in both
            # channels means the iterate is as good as it gets.
            if r_v < 0.99 * best[0] or r_d < 0.99 * best[1]:
                best, since_best = (min(r_v, best[0]), min(r_d, best[1])), 0
            else:
                since_best += 1
            if since_best >= STALL_ITERS and r_v <= 100.0 * res_tol_floor:
                break
            if solver == "direct":
                y = direct(x)
            else:
                y = conjugate_gradients(shifted, x, tol=cg_tol, max_iter=cg_max_iter)
            x = _normalize(_project_out(y, found))
        else:
            raise NoConvergence(
                f"inverse power iteration did not converge in {max_iter} iterations "
                f"(residual {res:.3e})",
                max_iter=max_iter,
                residual=res,
            )
        x = _fix_sign(x)
        found.append(x)
        lams.append(lam if dn.is_dual(lam) else float(lam))

    lams = lams[len(lams) - k :]
    vecs = found[len(found) - k :]
    return dn.stack(lams), dn.stack(vecs, axis=1)


def classical_mds(distances, k=2, tol=1e-10, max_iter=None, seed=0):
    """Embed a distance matrix in ``k`` dimensions by classical MDS.

    Double-centres ``-D**2 / 2`` and scales the top-``k`` eigenvectors by the
    square roots of their eigenvalues. Negative eigenvalues are clamped to
    zero with a :class:`NegativeSpectrum` warning.
    """
    n = distances.shape[0]
    D2 = distances * distances
    row = dn.sum(D2, axis=1, keepdims=True) * (1.0 / n)
    col = dn.sum(D2, axis=0, keepdims=True) * (1.0 / n)
    grand = dn.sum(D2) * (1.0 / (n * n))
    B = (D2 - row - col + grand) * -0.5
    lams, vecs = top_k_eigenpairs(MatVecOracle.from_matrix(B), k, tol=tol, max_iter=max_iter, seed=seed)
    cols = []
    for i in range(k):
        lam = lams[i]
        if float(dn.value(lam)) <= 0.0:
            warnings.warn(
                f"classical MDS eigenvalue {float(dn.value(lam)):.3e} is not positive; clamped to 0",
                NegativeSpectrum,
                stacklevel=2,
            )
            cols.append(vecs[:, i] * 0.0)
        else:
            cols.append(vecs[:, i] * dn.sqrt(lam))
    return dn.stack(cols, axis=1)
