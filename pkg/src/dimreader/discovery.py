"""Find the input perturbations that move a projection the most.

Both searches work on the tangent map: the per-point ``2 x d`` Jacobian
blocks ``B_i`` with all cross-point blocks set to zero.

* Global: one shared direction ``u`` maximising ``sum_i ||B_i u||^2``, the
  top eigenvector of ``sum_i B_i^T B_i``.
* Per point: a direction per point maximising the same quantity minus a
  smoothness penalty ``lambda * sum_ij S_ij ||v_i - v_j||^2`` with Gaussian
  similarities ``S_ij`` of the projected points; the top eigenvector of
  ``M^T M - lambda L_s``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import NegativeObjective
from .extraction import PerturbationField, extract_one_at_a_time, extract_randomized_halves
from .linalg import MatVecOracle, power_iteration

DENSE_LIMIT = 2000
DOMINANCE_RATIO = 10.0
OVERSMOOTH_COSINE = 0.999


@dataclass
class TangentMap:
    blocks: np.ndarray  # (n, 2, d)
    runs: int = 0

    def __post_init__(self):
        self.blocks = np.asarray(self.blocks, dtype=float)
        if self.blocks.ndim != 3 or self.blocks.shape[1] != 2:
            raise ValueError(f"blocks must have shape (n, 2, d), got {self.blocks.shape}")
        if not np.all(np.isfinite(self.blocks)):
            raise ValueError("tangent map has non-finite entries")

    @property
    def n(self):
        return self.blocks.shape[0]

    @property
    def d(self):
        return self.blocks.shape[2]

    def apply(self, perturbation):
        """Perturbation vectors ``B_i p_i`` for an ``n x d`` perturbation."""
        return np.einsum("nkd,nd->nk", self.blocks, np.asarray(perturbation, dtype=float))

    def dense(self):
        """The block-diagonal ``2n x nd`` matrix."""
        n, _, d = self.blocks.shape
        M = np.zeros((2 * n, n * d))
        for i in range(n):
            M[2 * i : 2 * i + 2, d * i : d * i + d] = self.blocks[i]
        return M


@dataclass
class DiscoveryResult:
    perturbation: np.ndarray
    objective: float
    mode: str
    lambda_smooth: float = 0.0
    sigma: float | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "mode": self.mode,
            "lambda": self.lambda_smooth,
            "sigma": self.sigma,
            "objective": self.objective,
            "perturbation": self.perturbation.tolist(),
            "warnings": list(self.warnings),
        }


def build_tangent_map(projection, data, seed=0, scheme="halves", n_jobs=None) -> TangentMap:
    """Extract ``B_i`` column by column: one axis perturbation per input dimension."""
    data = np.asarray(data, dtype=float)
    n, d = data.shape
    blocks = np.zeros((n, 2, d))
    runs = 0
    for j in range(d):
        f = PerturbationField.axis(n, d, j)
        if scheme == "halves":
            pv = extract_randomized_halves(projection, data, f, seed=seed, n_jobs=n_jobs)
        elif scheme == "one-at-a-time":
            pv = extract_one_at_a_time(projection, data, f, n_jobs=n_jobs)
        else:
            raise ValueError(f"unknown extraction scheme {scheme!r}")
        blocks[:, :, j] = pv.vectors
        runs += pv.runs
    return TangentMap(blocks, runs)


def _fix_sign(x):
    idx = int(np.argmax(np.abs(x)))
    return -x if x[idx] < 0 else x


def discover_global(tmap: TangentMap, tol=1e-10, seed=0) -> DiscoveryResult:
    """Single direction applied to every point that moves the projection most."""
    C = np.einsum("nki,nkj->ij", tmap.blocks, tmap.blocks)
    if not np.any(C):
        raise ValueError("tangent map is identically zero")
    obj, u = power_iteration(MatVecOracle.from_matrix(C), tol=tol, seed=seed)
    u = np.asarray(u)
    return DiscoveryResult(np.tile(u, (tmap.n, 1)), float(obj), "global")


def default_sigma(coords):
    """Half the median pairwise distance between projected points."""
    return 0.5 * float(np.median(pdist(np.asarray(coords, dtype=float))))


def similarity(coords, sigma):
    S = np.exp(-squareform(pdist(np.asarray(coords, dtype=float), "sqeuclidean")) / sigma**2)
    np.fill_diagonal(S, 0.0)
    return S


def per_point_oracle(tmap: TangentMap, S, lambda_smooth, shift=0.0) -> MatVecOracle:
    """Matrix-free ``(M^T M - lambda L_s + shift I) v``; ``L_s`` is never formed."""
    n, d = tmap.n, tmap.d
    B = tmap.blocks
    degree = S.sum(axis=1)

    def apply(v):
        V = np.asarray(v, dtype=float).reshape(n, d)
        BV = np.einsum("nkd,nd->nk", B, V)
        MtM = np.einsum("nkd,nk->nd", B, BV)
        LV = degree[:, None] * V - S @ V
        return (MtM - lambda_smooth * LV + shift * V).ravel()

    return MatVecOracle(n * d, apply)


def per_point_matrix(tmap: TangentMap, S, lambda_smooth):
    """Dense ``M^T M - lambda L_s`` with ``d x d`` identity blocks in ``L_s``."""
    n, d = tmap.n, tmap.d
    M = tmap.dense()
    L = np.kron(np.diag(S.sum(axis=1)) - S, np.eye(d))
    return M.T @ M - lambda_smooth * L


def _diagnostics(P):
    notes = []
    norms = np.linalg.norm(P, axis=1)
    med = float(np.median(norms))
    if norms.max() > DOMINANCE_RATIO * med:
        notes.append(
            f"dominance: one point's perturbation is {norms.max() / max(med, 1e-300):.1f}x the median; "
            "lambda is likely too small"
        )
    unit = P[norms > 0] / norms[norms > 0, None]
    if len(unit) > 1:
        cos = unit @ unit.T
        if np.all(cos[np.triu_indices(len(unit), 1)] > OVERSMOOTH_COSINE):
            notes.append("over-smoothing: all points are perturbed almost identically; lambda may be too large")
    return notes


def discover_per_point(
    tmap: TangentMap, coords, lambda_smooth=1.0, sigma=None, seed=0, method="auto", tol=1e-10, max_iter=None
) -> DiscoveryResult:
    """Per-point perturbations, smoothed over nearby projected points.

    ``method`` is ``"dense"`` (eigendecomposition of the assembled
    ``nd x nd`` matrix), ``"matrix-free"`` (power iteration on the operator
    shifted to be positive semidefinite) or ``"auto"`` (dense up to
    ``DENSE_LIMIT`` unknowns).
    """
    if lambda_smooth < 0:
        raise ValueError("lambda_smooth must be non-negative")
    if sigma is None:
        sigma = default_sigma(coords)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    n, d = tmap.n, tmap.d
    S = similarity(coords, sigma)
    if method == "auto":
        method = "dense" if n * d <= DENSE_LIMIT else "matrix-free"
    if method == "dense":
        w, V = np.linalg.eigh(per_point_matrix(tmap, S, lambda_smooth))
        obj, v = float(w[-1]), _fix_sign(V[:, -1])
    elif method == "matrix-free":
        # Eigenvalues of lambda * L_s lie in [0, 2 * max degree]; shifting by that
        # bound makes the largest eigenvalue also the largest in magnitude.
        shift = 2.0 * lambda_smooth * float(S.sum(axis=1).max())
        lam, v = power_iteration(per_point_oracle(tmap, S, lambda_smooth, shift), tol=tol, max_iter=max_iter, seed=seed)
        obj, v = float(lam) - shift, np.asarray(v)
    else:
        raise ValueError(f"unknown method {method!r}")
    P = v.reshape(n, d)
    notes = _diagnostics(P)
    if obj < 0:
        warnings.warn(
            f"top eigenvalue {obj:.3e} is negative: smoothing dominates (lambda too large)",
            NegativeObjective,
            stacklevel=2,
        )
        notes.append("negative objective: smoothing dominates")
    return DiscoveryResult(P, obj, "per-point", float(lambda_smooth), float(sigma), notes)


def perturbation_report(result: DiscoveryResult, names=None, image_shape=None):
    """Per-dimension magnitude maps for plotting.

    ``maps[:, j]`` is ``|perturbation[:, j]|`` divided by the largest
    magnitude anywhere, so maps share one [0, 1] colour scale. With
    ``image_shape`` each point's row is also returned as an image.
    """
    P = np.asarray(result.perturbation, dtype=float)
    mag = np.abs(P)
    top = mag.max()
    maps = mag / top if top > 0 else np.zeros_like(mag)
    totals = mag.sum(axis=0)
    names = list(names) if names is not None else [f"dim{j}" for j in range(P.shape[1])]
    report = {
        "names": names,
        "maps": maps,
        "totals": totals,
        "dominant_dimension": names[int(np.argmax(totals))],
    }
    if image_shape is not None:
        report["images"] = P.reshape((P.shape[0],) + tuple(image_shape))
    return report
