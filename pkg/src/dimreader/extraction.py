"""Turn an input perturbation into per-point perturbation vectors.

Two drivers run a fitted projection over dual-valued data:

* :func:`extract_one_at_a_time` seeds one point per run (``n`` runs);
* :func:`extract_randomized_halves` seeds a random half of the points per
  round and averages, needing O(log n) runs in expectation.

A projection here is anything with a ``project(X)`` method (the estimators
in :mod:`dimreader.projections`) or a plain callable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dual as dn
from .exceptions import DimReaderError, RoundLimitExceeded

MAX_ROUNDS = 64
THREADS_ENV = "DIMREADER_THREADS"


class ProjectionRunError(DimReaderError):
    """A dual projection run failed; ``point_index`` names the seeded point."""

    def __init__(self, message, point_index=None):
        super().__init__(message)
        self.point_index = point_index


@dataclass(frozen=True)
class PerturbationField:
    """Per-point input directions, one row per data point."""

    directions: np.ndarray
    mode: str = "custom"

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=float)
        if dirs.ndim != 2:
            raise ValueError(f"directions must be n x d, got shape {dirs.shape}")
        norms = np.linalg.norm(dirs, axis=1)
        if not np.any(norms > 0):
            raise ValueError("perturbation field has no nonzero rows")
        if not np.allclose(norms[norms > 0], 1.0, rtol=0, atol=1e-9):
            raise ValueError("nonzero perturbation rows must have unit norm")
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def axis(cls, n, d, dim):
        """Perturb every point along input dimension ``dim``."""
        dirs = np.zeros((n, d))
        dirs[:, dim] = 1.0
        return cls(dirs, mode="axis")

    @classmethod
    def custom(cls, directions):
        """Normalise each nonzero row of ``directions`` to unit length."""
        dirs = np.array(directions, dtype=float)
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.divide(dirs, norms, out=np.zeros_like(dirs), where=norms > 0)
        return cls(dirs, mode="custom")

    @property
    def shape(self):
        return self.directions.shape


@dataclass
class PerturbationVectors:
    vectors: np.ndarray
    counts: np.ndarray
    runs: int


def _directions(field):
    return field.directions if isinstance(field, PerturbationField) else np.asarray(field, dtype=float)


def _runner(projection):
    return projection.project if hasattr(projection, "project") else projection


def thread_count(n_jobs=None):
    if n_jobs is not None:
        return max(1, int(n_jobs))
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def _run(project, data, seeds, label):
    try:
        out = project(dn.DualArray(data, seeds))
    except DimReaderError as exc:
        raise ProjectionRunError(f"projection run {label} failed: {exc}", point_index=label) from exc
    return np.asarray(dn.deriv(out))


def _map(fn, items, n_jobs):
    if n_jobs == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def extract_one_at_a_time(projection, data, field, n_jobs=None) -> PerturbationVectors:
    """One dual run per point; keeps only the seeded point's derivative.

    Points whose perturbation row is zero are not run and get a zero vector.
    """
    project = _runner(projection)
    data = np.asarray(dn.value(data), dtype=float)
    dirs = _directions(field)
    n = len(data)
    vectors = np.zeros((n, 2))
    active = [i for i in range(n) if np.any(dirs[i] != 0.0)]

    def one(i):
        seeds = np.zeros_like(data)
        seeds[i] = dirs[i]
        return _run(project, data, seeds, i)[i]

    for i, v in zip(active, _map(one, active, thread_count(n_jobs))):
        vectors[i] = v
    return PerturbationVectors(vectors, np.ones(n, dtype=int), len(active))


def halves_schedule(n, seed, max_rounds=MAX_ROUNDS):
    """Boolean masks, one per round, until every point was chosen once.

    Round ``r`` draws from its own generator seeded with ``(seed, r)``, so the
    schedule does not depend on how rounds are later executed.
    """
    counts = np.zeros(n, dtype=int)
    masks = []
    while np.any(counts < 1):
        if len(masks) >= max_rounds:
            raise RoundLimitExceeded(
                f"randomized halves needed more than {max_rounds} rounds for n={n}; RNG defect?"
            )
        rng = np.random.default_rng([seed, len(masks)])
        mask = rng.random(n) < 0.5
        masks.append(mask)
        counts += mask
    return masks


def extract_randomized_halves(projection, data, field, seed=0, n_jobs=None, max_rounds=MAX_ROUNDS):
    """Perturb a random half of the points per run and average per point.

    Rounds in which no perturbed point was drawn need no projection run. The
    returned ``runs`` counts projection executions actually performed;
    ``counts`` is zero for points whose perturbation row is zero.
    """
    project = _runner(projection)
    data = np.asarray(dn.value(data), dtype=float)
    dirs = _directions(field)
    n = len(data)
    active = np.any(dirs != 0.0, axis=1)
    # Points without a perturbation would only collect cross-effects; leave them at zero.
    masks = [m & active for m in halves_schedule(n, seed, max_rounds)]
    masks = [m for m in masks if m.any()]

    def one(item):
        r, mask = item
        seeds = np.where(mask[:, None], dirs, 0.0)
        return _run(project, data, seeds, f"round {r}")

    results = _map(one, list(enumerate(masks)), thread_count(n_jobs))
    vectors = np.zeros((n, 2))
    counts = np.zeros(n, dtype=int)
    for mask, der in zip(masks, results):
        vectors[mask] += der[mask]
        counts += mask
    vectors = np.divide(vectors, counts[:, None], out=vectors, where=counts[:, None] > 0)
    return PerturbationVectors(vectors, counts, len(masks))


def measure_off_point_effects(projection, data, field, n_jobs=None):
    """Cross-effect magnitudes: entry ``[i, j]`` is ``|d v_j / d p_i|``.

    The diagonal holds each point's own effect; everything else is what the
    extractors discard.
    """
    project = _runner(projection)
    data = np.asarray(dn.value(data), dtype=float)
    dirs = _directions(field)
    n = len(data)

    def one(i):
        seeds = np.zeros_like(data)
        seeds[i] = dirs[i]
        return np.linalg.norm(_run(project, data, seeds, i), axis=1)

    return np.array(_map(one, list(range(n)), thread_count(n_jobs)))
