"""sklearn-style front ends: :class:`DimReader` and :class:`PerturbationDiscovery`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from .discovery import build_tangent_map, discover_global, discover_per_point
from .extraction import PerturbationField, extract_one_at_a_time, extract_randomized_halves
from .field import fit_scalar_field, marching_squares
from .projections import ProjectionConfig, make_projection
from .render import render_axes
from .validation import check_data


def _resolve_projection(projection):
    if isinstance(projection, str):
        return make_projection(ProjectionConfig(method=projection))
    if isinstance(projection, ProjectionConfig):
        return make_projection(projection)
    return clone(projection)


def as_field(perturbation, n, d):
    """Accept an axis index, an ``n x d`` array or a :class:`PerturbationField`."""
    if isinstance(perturbation, PerturbationField):
        field = perturbation
    elif isinstance(perturbation, (int, np.integer)):
        if not 0 <= perturbation < d:
            raise ValueError(f"axis {perturbation} out of range for {d} dimensions")
        field = PerturbationField.axis(n, d, int(perturbation))
    else:
        field = PerturbationField.custom(perturbation)
    if field.shape != (n, d):
        raise ValueError(f"perturbation shape {field.shape} does not match data {(n, d)}")
    return field


class DimReader(TransformerMixin, BaseEstimator):
    """Generalised axes for a projection under a chosen input perturbation.

    ``fit(X, perturbation=...)`` projects ``X``, extracts one perturbation
    vector per point, fits the scalar field and extracts its isolines.
    After fitting, :meth:`explain` reuses the fitted projection for other
    perturbations, which matters for t-SNE where fitting dominates.

    Parameters
    ----------
    projection : str, ProjectionConfig or estimator
        ``"pca"``, ``"isomap"``, ``"lle"``, ``"tsne"`` or a configured
        estimator from :mod:`dimreader.projections`.
    extraction : {"halves", "one-at-a-time"}
    resolution, reg_weight, n_levels : field and isoline settings.
    seed : seed for the randomized-halves schedule.
    n_jobs : threads for extraction rounds (default from ``DIMREADER_THREADS``).
    """

    def __init__(
        self,
        projection="tsne",
        extraction="halves",
        resolution=10,
        reg_weight=0.01,
        n_levels=10,
        seed=0,
        n_jobs=None,
    ):
        self.projection = projection
        self.extraction = extraction
        self.resolution = resolution
        self.reg_weight = reg_weight
        self.n_levels = n_levels
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None, perturbation=0):
        X = check_data(X)
        self.projection_ = _resolve_projection(self.projection)
        self.projection_.fit(X)
        self.X_ = X
        self.embedding_ = np.asarray(self.projection_.embedding_)
        self.explain(perturbation, _store=True)
        return self

    def extract(self, perturbation):
        """Perturbation vectors for the fitted projection."""
        check_is_fitted(self, "projection_")
        n, d = self.X_.shape
        field = as_field(perturbation, n, d)
        if self.extraction == "halves":
            return extract_randomized_halves(self.projection_, self.X_, field, seed=self.seed, n_jobs=self.n_jobs)
        if self.extraction == "one-at-a-time":
            return extract_one_at_a_time(self.projection_, self.X_, field, n_jobs=self.n_jobs)
        raise ValueError(f"unknown extraction scheme {self.extraction!r}")

    def explain(self, perturbation, _store=False):
        """Vectors, field and isolines for ``perturbation``; returns a dict."""
        pv = self.extract(perturbation)
        return self.explain_vectors(pv.vectors, runs=pv.runs, _store=_store)

    def explain_vectors(self, vectors, runs=0, _store=False):
        """Field and isolines for already-known perturbation vectors."""
        check_is_fitted(self, "embedding_")
        grid = fit_scalar_field(self.embedding_, vectors, self.resolution, self.reg_weight)
        isolines = marching_squares(grid, self.n_levels)
        out = {"vectors": np.asarray(vectors), "grid": grid, "isolines": isolines, "runs": runs}
        if _store:
            self.perturbation_vectors_ = out["vectors"]
            self.grid_ = grid
            self.isolines_ = isolines
            self.n_projection_runs_ = runs
        return out

    def transform(self, X):
        """The fitted embedding; the projections are transductive, so ``X`` must be the training data."""
        check_is_fitted(self, "embedding_")
        if np.shape(X) != self.X_.shape:
            raise ValueError("transform only supports the data the estimator was fitted on")
        return self.embedding_

    def fit_transform(self, X, y=None, perturbation=0):
        return self.fit(X, y, perturbation=perturbation).embedding_

    def render(self, labels=None, show_vectors=True):
        """``(svg_text, json_document)`` for the fitted perturbation."""
        check_is_fitted(self, "grid_")
        return render_axes(
            self.embedding_, self.perturbation_vectors_, self.isolines_, labels, self.grid_, show_vectors
        )


class PerturbationDiscovery(BaseEstimator):
    """Perturbations that change a projection the most.

    ``mode="global"`` finds one direction shared by all points;
    ``mode="per-point"`` finds one per point, smoothed by ``lambda_smooth``
    over projected neighbours within about ``sigma``.
    """

    def __init__(
        self, projection="tsne", mode="global", lambda_smooth=1.0, sigma=None, extraction="halves", seed=0, n_jobs=None
    ):
        self.projection = projection
        self.mode = mode
        self.lambda_smooth = lambda_smooth
        self.sigma = sigma
        self.extraction = extraction
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_data(X)
        self.projection_ = _resolve_projection(self.projection)
        self.projection_.fit(X)
        self.embedding_ = np.asarray(self.projection_.embedding_)
        self.tangent_map_ = build_tangent_map(self.projection_, X, self.seed, self.extraction, self.n_jobs)
        self.result_ = self._discover()
        self.perturbation_ = self.result_.perturbation
        return self

    def _discover(self):
        if self.mode == "global":
            return discover_global(self.tangent_map_, seed=self.seed)
        if self.mode == "per-point":
            return discover_per_point(
                self.tangent_map_, self.embedding_, self.lambda_smooth, self.sigma, seed=self.seed
            )
        raise ValueError(f"unknown discovery mode {self.mode!r}")

    def perturbation_vectors(self):
        """Perturbation vectors of the discovered perturbation, from the tangent map."""
        check_is_fitted(self, "result_")
        return self.tangent_map_.apply(self.perturbation_)
