"""PCA, Isomap, LLE and t-SNE written once for real and dual inputs.

Each method has a functional form (``pca_project`` and friends) and an
sklearn-style estimator. ``fit`` runs the method on plain data and freezes
whatever must stay fixed while differentiating: principal directions, the
kNN graph topology, or the converged t-SNE embedding. ``project`` then
re-runs the method on (possibly dual) data using that frozen state, which
is what the perturbation extractors call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import dual as dn
from . import graph
from .exceptions import DegenerateCovariance, FixedPointMismatch, NoConvergence
from .linalg import (
    MatVecOracle,
    classical_mds,
    conjugate_gradients,
    smallest_nonzero_eigenpairs,
    top_k_eigenpairs,
)
from .validation import check_data

METHODS = ("pca", "isomap", "lle", "tsne")


@dataclass
class ProjectionConfig:
    method: str = "tsne"
    k_neighbors: int = 8
    perplexity: float = 30.0
    learning_rate: float = 200.0
    max_iters: int = 100000
    grad_tol: float = 1e-5
    seed: int = 0
    lle_reg: float = 1e-3
    capture_margin: float = 0.5

    def validate(self, n=None):
        from .exceptions import ConfigError

        if self.method not in METHODS:
            raise ConfigError(f"unknown projection method {self.method!r}; expected one of {METHODS}")
        for name in ("k_neighbors", "perplexity", "learning_rate", "max_iters", "grad_tol", "lle_reg"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.capture_margin <= 1:
            raise ConfigError(f"capture_margin must be in (0, 1], got {self.capture_margin!r}")
        if n is not None:
            if n < 3:
                raise ConfigError(f"need at least 3 points, got {n}")
            if self.method in ("isomap", "lle") and self.k_neighbors >= n:
                raise ConfigError(f"k_neighbors={self.k_neighbors} must be < n={n}")
            if self.method == "tsne" and self.perplexity >= (n - 1) / 3:
                raise ConfigError(f"perplexity={self.perplexity} must be < (n-1)/3 = {(n - 1) / 3:.3f}")
        return self


# ---------------------------------------------------------------- PCA


def pca_directions(X, k=2):
    """Mean and top-``k`` principal directions (columns) of the value channel."""
    Xv = np.asarray(dn.value(X), dtype=float)
    mean = Xv.mean(axis=0)
    Xc = Xv - mean
    cov = Xc.T @ Xc / max(len(Xv) - 1, 1)
    d = cov.shape[0]
    if k > d:
        raise DegenerateCovariance(f"cannot take {k} components of {d}-dimensional data")
    lams, vecs = top_k_eigenpairs(MatVecOracle.from_matrix(cov), min(k + 1, d))
    lams = np.asarray(lams)
    gaps = -np.diff(lams)[: min(k, d - 1)]
    if np.any(lams[:k] <= 1e-12) or np.any(gaps <= 1e-12):
        raise DegenerateCovariance(f"top principal variances {lams[:k + 1]} are not distinct")
    return mean, np.asarray(vecs)[:, :k], lams


def pca_project(data, k=2, mean=None, components=None):
    """Project onto principal directions held fixed from the value channel.

    Both the mean and the directions are constants with respect to the
    perturbation, so the derivative of every projected point is the
    perturbation times the projection matrix.
    """
    if components is None:
        mean, components, _ = pca_directions(data, k)
    return (data - mean) @ components


class PCA(TransformerMixin, BaseEstimator):
    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_data(X)
        self.mean_, self.components_, lams = pca_directions(X, self.n_components)
        self.explained_variance_ = lams[: self.n_components]
        self.embedding_ = pca_project(X, mean=self.mean_, components=self.components_)
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        return pca_project(check_data(X), mean=self.mean_, components=self.components_)

    def project(self, X):
        check_is_fitted(self, "components_")
        return pca_project(X, mean=self.mean_, components=self.components_)

    def projection_matrix(self):
        """The 2 x d linear map from input perturbations to projected ones."""
        return self.components_.T


# ---------------------------------------------------------------- Isomap


def isomap_project(data, config: ProjectionConfig, edges=None):
    """Isomap: kNN graph, Dijkstra geodesics, classical MDS.

    ``edges`` freezes the graph topology; edge weights are recomputed from
    ``data`` so perturbations flow into the geodesic distances.
    """
    n = data.shape[0]
    if edges is None:
        edges = graph.knn_edges(data, config.k_neighbors)
        graph.check_connected(n, *edges)
    I, J = edges
    w = graph.edge_lengths(data, I, J)
    G = graph.all_pairs_shortest_paths(n, I, J, w)
    G = (G + G.T) * 0.5
    return classical_mds(G, 2, seed=config.seed)


class Isomap(TransformerMixin, BaseEstimator):
    def __init__(self, k_neighbors=8, seed=0):
        self.k_neighbors = k_neighbors
        self.seed = seed

    def _config(self):
        return ProjectionConfig(method="isomap", k_neighbors=self.k_neighbors, seed=self.seed)

    def fit(self, X, y=None):
        X = check_data(X)
        self._config().validate(len(X))
        self.edges_ = graph.knn_edges(X, self.k_neighbors)
        graph.check_connected(len(X), *self.edges_)
        self.embedding_ = isomap_project(X, self._config(), self.edges_)
        return self

    def project(self, X):
        check_is_fitted(self, "edges_")
        return isomap_project(X, self._config(), self.edges_)

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


# ---------------------------------------------------------------- LLE


def lle_weights(data, nbrs, reg=1e-3):
    """Reconstruction weights, one row per point, each row summing to one.

    The local Gram matrix is regularised by ``reg * trace(G) / k`` on the
    diagonal and solved with conjugate gradients so duals flow through.
    """
    n, k = nbrs.shape
    W = dn.zeros((n, n), like=data)
    ones = np.ones(k)
    for i in range(n):
        Z = data[nbrs[i]] - data[i]
        G = Z @ Z.T
        tr = dn.sum(Z * Z)
        G = G + np.eye(k) * (tr * (reg / k) if float(dn.value(tr)) > 0 else reg)
        w = conjugate_gradients(MatVecOracle(k, lambda x, G=G: G @ x), ones)
        W[i, nbrs[i]] = w / dn.sum(w)
    return W


def lle_project(data, config: ProjectionConfig, nbrs=None):
    """Locally linear embedding via inverse power iteration on (I-W)^T (I-W)."""
    n = data.shape[0]
    if nbrs is None:
        nbrs = graph.knn_indices(data, config.k_neighbors)
        graph.check_connected(n, np.repeat(np.arange(n), nbrs.shape[1]), nbrs.ravel())
    W = lle_weights(data, nbrs, config.lle_reg)
    IW = np.eye(n) - W
    M = IW.T @ IW
    ones = np.ones(n) / math.sqrt(n)
    _, vecs = smallest_nonzero_eigenpairs(
        MatVecOracle.from_matrix(M), 2, null_dim=1, null_space=[ones], seed=config.seed
    )
    return vecs * math.sqrt(n)


class LLE(TransformerMixin, BaseEstimator):
    def __init__(self, k_neighbors=8, reg=1e-3, seed=0):
        self.k_neighbors = k_neighbors
        self.reg = reg
        self.seed = seed

    def _config(self):
        return ProjectionConfig(method="lle", k_neighbors=self.k_neighbors, lle_reg=self.reg, seed=self.seed)

    def fit(self, X, y=None):
        X = check_data(X)
        self._config().validate(len(X))
        n = len(X)
        self.neighbors_ = graph.knn_indices(X, self.k_neighbors)
        graph.check_connected(n, np.repeat(np.arange(n), self.k_neighbors), self.neighbors_.ravel())
        self.embedding_ = lle_project(X, self._config(), self.neighbors_)
        return self

    def project(self, X):
        check_is_fitted(self, "neighbors_")
        return lle_project(X, self._config(), self.neighbors_)

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


# ---------------------------------------------------------------- t-SNE

BETA_BOUNDS = (1e-10, 1e10)
PERPLEXITY_TOL = 1e-5
BISECTION_STEPS = 30
# The gradient vanishes at the collapsed embedding, so a tiny random start can
# satisfy ||g|| <= grad_tol before descent begins; start a little wider.
INIT_SCALE = 1e-2


@dataclass(frozen=True)
class TsneFixedPoint:
    """A converged t-SNE embedding plus everything needed to replay it."""

    positions: np.ndarray
    affinities: np.ndarray
    betas: np.ndarray
    entropies: np.ndarray
    learning_rate: float
    grad_tol: float
    perplexity: float
    n_iter: int
    grad_norm: float
    converged: bool
    config: dict = field(default_factory=dict)
    capture_tol: float = 0.0


def squared_distances(X):
    """Pairwise squared Euclidean distances with an exact zero diagonal."""
    sq = dn.sum(X * X, axis=1)
    D = sq.reshape(-1, 1) + sq.reshape(1, -1) - (X @ X.T) * 2.0
    n = D.shape[0]
    off = ~np.eye(n, dtype=bool)
    D = dn.where(off & (dn.value(D) > 0.0), D, 0.0)
    return D


def _conditional_rows(D, betas):
    """Row-normalised Gaussian affinities and their entropies (natural log)."""
    n = D.shape[0]
    off = ~np.eye(n, dtype=bool)
    Dv = np.asarray(dn.value(D))
    shift = np.where(off, Dv, np.inf).min(axis=1, keepdims=True)
    Dc = dn.where(off, D - shift, 0.0)
    E = dn.where(off, dn.exp(Dc * (betas.reshape(-1, 1) * -1.0)), 0.0)
    Z = dn.sum(E, axis=1, keepdims=True)
    P = E / Z
    H = dn.log(Z).reshape(-1) + betas * dn.sum(P * Dc, axis=1)
    return P, H


def calibrate_bandwidths(D, perplexity):
    """Per-point bisection on the Gaussian precision to hit ``log(perplexity)``.

    Bisection runs in log space over ``BETA_BOUNDS`` for at most
    ``BISECTION_STEPS`` steps; points stop once their entropy is within
    ``PERPLEXITY_TOL`` of the target.
    """
    Dv = np.asarray(dn.value(D), dtype=float)
    n = Dv.shape[0]
    target = math.log(perplexity)
    lo = np.full(n, math.log(BETA_BOUNDS[0]))
    hi = np.full(n, math.log(BETA_BOUNDS[1]))
    log_beta = np.zeros(n)
    active = np.ones(n, dtype=bool)
    for _ in range(BISECTION_STEPS):
        _, H = _conditional_rows(Dv, np.exp(log_beta))
        err = H - target
        active &= np.abs(err) > PERPLEXITY_TOL
        if not active.any():
            break
        # Entropy decreases with precision: too much entropy means beta is too small.
        too_flat = active & (err > 0)
        too_sharp = active & (err < 0)
        lo[too_flat] = log_beta[too_flat]
        hi[too_sharp] = log_beta[too_sharp]
        log_beta = np.where(active, 0.5 * (lo + hi), log_beta)
    betas = np.exp(log_beta)
    _, H = _conditional_rows(Dv, betas)
    return betas, H


def _symmetrize(P_cond):
    n = P_cond.shape[0]
    return (P_cond + P_cond.T) * (1.0 / (2.0 * n))


def tsne_gradient(P, Y):
    """Gradient of KL(P || Q) with respect to the embedding ``Y``."""
    n = Y.shape[0]
    off = ~np.eye(n, dtype=bool)
    num = dn.where(off, 1.0 / (squared_distances(Y) + 1.0), 0.0)
    Q = num / dn.sum(num)
    PQn = (P - Q) * num
    return (Y * dn.sum(PQn, axis=1).reshape(-1, 1) - PQn @ Y) * 4.0


def _gd_loop(P, Y, rate, grad_tol, max_iters, at_least_once=False):
    g = tsne_gradient(P, Y)
    gn = float(np.linalg.norm(g))
    it = 0
    while (gn > grad_tol or (at_least_once and it == 0)) and it < max_iters:
        Y = Y - rate * g
        g = tsne_gradient(P, Y)
        gn = float(np.linalg.norm(g))
        it += 1
    return Y, gn, it


def tsne_converge(data, config: ProjectionConfig, initial=None) -> TsneFixedPoint:
    """Run plain-real t-SNE to a fixed point and capture it.

    Plain gradient descent (no momentum, no early exaggeration) from a small
    random start until ``||g|| <= capture_margin * grad_tol``. The margin
    matters: replays and re-convergence loop while ``||g|| > grad_tol``, and a
    fixed point captured right at ``grad_tol`` lets a tiny perturbation push
    the gradient back over it, so the loop no longer stops after one step.
    ``converged`` reports ``||g|| <= grad_tol``; a non-converged run is
    returned rather than raised, so callers can decide.
    """
    X = np.asarray(dn.value(data), dtype=float)
    n = len(X)
    D = squared_distances(X)
    betas, H = calibrate_bandwidths(D, config.perplexity)
    P_cond, _ = _conditional_rows(D, betas)
    P = _symmetrize(P_cond)
    if initial is None:
        rng = np.random.default_rng(config.seed)
        initial = rng.normal(scale=INIT_SCALE, size=(n, 2))
    capture_tol = config.capture_margin * config.grad_tol
    Y, gn, it = _gd_loop(P, np.asarray(initial, dtype=float), config.learning_rate, capture_tol, config.max_iters)
    Y = Y - Y.mean(axis=0)
    gn = float(np.linalg.norm(tsne_gradient(P, Y)))
    return TsneFixedPoint(
        positions=Y,
        affinities=P,
        betas=betas,
        entropies=H,
        learning_rate=config.learning_rate,
        grad_tol=config.grad_tol,
        perplexity=config.perplexity,
        n_iter=it,
        grad_norm=gn,
        converged=gn <= config.grad_tol,
        config={
            "perplexity": config.perplexity,
            "learning_rate": config.learning_rate,
            "grad_tol": config.grad_tol,
            "max_iters": config.max_iters,
            "seed": config.seed,
            "capture_margin": config.capture_margin,
        },
        capture_tol=capture_tol,
    )


def _replay_affinities(data, fixed: TsneFixedPoint):
    """Affinities of (dual) data with bandwidths warm-started at the fixed point.

    One Newton step on each point's entropy equation, aimed at the entropy the
    captured bandwidth achieves, leaves the value channel at the captured
    bandwidth and gives the bandwidth's derivative to first order.
    """
    D = squared_distances(data)
    betas = np.asarray(fixed.betas, dtype=float)
    if dn.is_dual(D):
        P_cond, H = _conditional_rows(D, betas)
        Pv = np.asarray(dn.value(P_cond))
        Dv = np.asarray(dn.value(D))
        mean_d = np.sum(Pv * Dv, axis=1)
        var_d = np.sum(Pv * Dv * Dv, axis=1) - mean_d**2
        slope = -betas * np.maximum(var_d, 1e-300)
        betas = dn.DualArray(betas) - (H - dn.value(H)) / slope
    P_cond, _ = _conditional_rows(D, betas)
    return _symmetrize(P_cond)


def tsne_dual_replay(data, fixed: TsneFixedPoint):
    """Exactly one gradient step from the captured fixed point, over duals.

    Positions start at ``fixed.positions`` with zero derivative; the data's
    derivative channel enters through the affinities. Raises
    :class:`FixedPointMismatch` if the value channel moves by more than
    ``10 * grad_tol * learning_rate``.
    """
    P = _replay_affinities(data, fixed)
    Y = fixed.positions
    g = tsne_gradient(P, Y)
    step = g * fixed.learning_rate
    moved = float(np.linalg.norm(dn.value(step)))
    if moved > 10.0 * fixed.grad_tol * fixed.learning_rate:
        raise FixedPointMismatch(
            f"replay step of size {moved:.3e} exceeds 10 * grad_tol * rate; "
            "the fixed point does not belong to this data"
        )
    return Y - step


def recalibrate_to_entropies(data, fixed: TsneFixedPoint, tol=1e-13, max_steps=100):
    """Plain-real bandwidths whose entropies equal the captured ones.

    Safeguarded Newton iteration from the captured bandwidths. Used to
    re-converge t-SNE on perturbed data without bisection noise.
    """
    D = squared_distances(np.asarray(dn.value(data), dtype=float))
    betas = np.array(fixed.betas, dtype=float)
    target = np.asarray(fixed.entropies)
    for _ in range(max_steps):
        P, H = _conditional_rows(D, betas)
        err = H - target
        if np.max(np.abs(err)) <= tol:
            break
        mean_d = np.sum(P * D, axis=1)
        var_d = np.sum(P * D * D, axis=1) - mean_d**2
        step = err / (betas * np.maximum(var_d, 1e-300))
        betas = np.clip(betas + step, betas * 0.5, betas * 2.0)
    return betas


def tsne_reconverge(data, fixed: TsneFixedPoint, max_iters=100000):
    """Re-run the t-SNE loop on plain ``data`` starting from the fixed point.

    Bandwidths are re-solved to the captured entropies, the loop body runs
    at least once, and the loop continues while ``||g|| > grad_tol``.
    Returns ``(positions, iterations)``.
    """
    X = np.asarray(dn.value(data), dtype=float)
    betas = recalibrate_to_entropies(X, fixed)
    P_cond, _ = _conditional_rows(squared_distances(X), betas)
    P = _symmetrize(P_cond)
    Y, gn, it = _gd_loop(P, fixed.positions, fixed.learning_rate, fixed.grad_tol, max_iters, at_least_once=True)
    if gn > fixed.grad_tol:
        raise NoConvergence(f"t-SNE re-convergence stopped at ||g|| = {gn:.3e}", max_iter=max_iters, residual=gn)
    return Y, it


class TSNE(TransformerMixin, BaseEstimator):
    """t-SNE by plain gradient descent with a reusable fixed point."""

    def __init__(
        self, perplexity=30.0, learning_rate=200.0, max_iters=100000, grad_tol=1e-5, seed=0, capture_margin=0.5
    ):
        self.perplexity = perplexity
        self.learning_rate = learning_rate
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.seed = seed
        self.capture_margin = capture_margin

    def _config(self):
        return ProjectionConfig(
            method="tsne",
            perplexity=self.perplexity,
            learning_rate=self.learning_rate,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            seed=self.seed,
            capture_margin=self.capture_margin,
        )

    def fit(self, X, y=None):
        X = check_data(X)
        self._config().validate(len(X))
        self.fixed_point_ = tsne_converge(X, self._config())
        if not self.fixed_point_.converged:
            raise NoConvergence(
                f"t-SNE did not reach ||g|| <= {self.grad_tol} in {self.max_iters} iterations "
                f"(||g|| = {self.fixed_point_.grad_norm:.3e})",
                max_iter=self.max_iters,
                residual=self.fixed_point_.grad_norm,
            )
        self.embedding_ = self.fixed_point_.positions
        return self

    def project(self, X):
        check_is_fitted(self, "fixed_point_")
        return tsne_dual_replay(X, self.fixed_point_)

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


def make_projection(config: ProjectionConfig):
    """Build the estimator for ``config.method``."""
    if config.method == "pca":
        return PCA()
    if config.method == "isomap":
        return Isomap(k_neighbors=config.k_neighbors, seed=config.seed)
    if config.method == "lle":
        return LLE(k_neighbors=config.k_neighbors, reg=config.lle_reg, seed=config.seed)
    if config.method == "tsne":
        return TSNE(
            perplexity=config.perplexity,
            learning_rate=config.learning_rate,
            max_iters=config.max_iters,
            grad_tol=config.grad_tol,
            seed=config.seed,
            capture_margin=config.capture_margin,
        )
    from .exceptions import ConfigError

    raise ConfigError(f"unknown projection method {config.method!r}")
