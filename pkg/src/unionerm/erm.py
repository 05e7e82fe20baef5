"""Empirical risk minimization over the union of linear classes.

Per-index least squares is solved through a symmetric eigendecomposition of
the sample covariance with pivot tolerance ``1e-12 * trace``; when the
sample covariance is singular the minimum-norm minimizer is returned and the
fit is flagged instead of raising, so experiment sweeps can proceed below
the sample-size thresholds and report the flag frequency.

Index selection breaks exact empirical-risk ties (within 1e-12 absolute) by
the identifier order of the collection; this is the single place where
selection nondeterminism is removed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, FeatureCollection
from .population import PopulationProfile

__all__ = ["FitResult", "ErmSolution", "fit_linear", "empirical_risk", "solve", "oracle_solve"]

PIVOT_TOL = 1e-12
TIE_TOL = 1e-12


@dataclass(frozen=True)
class FitResult:
    index: object
    weights: np.ndarray
    risk: float
    lam_min: float        # smallest eigenvalue of the (whitened) sample covariance
    singular: bool


@dataclass(frozen=True)
class ErmSolution:
    index: object
    weights: np.ndarray
    risk: float
    table: tuple[FitResult, ...]

    @property
    def singular(self) -> bool:
        return any(r.singular for r in self.table)

    def record(self, index) -> FitResult:
        for r in self.table:
            if r.index == index:
                return r
        raise KeyError(f"no fit for index {index!r}")


def empirical_risk(t, w, dataset: Dataset, collection: FeatureCollection) -> float:
    """Mean of (prediction - y)^2 / 2 over the dataset."""
    phi = collection.entry(t)(dataset.x)
    resid = phi @ np.asarray(w, dtype=float).ravel() - dataset.y
    return 0.5 * float(np.mean(resid**2))


def fit_linear(
    dataset: Dataset,
    t,
    collection: FeatureCollection,
    prof: PopulationProfile | None = None,
) -> FitResult:
    """Least squares for one feature map.

    Returns the unique minimizer when the sample covariance is nonsingular,
    otherwise the minimum-norm minimizer with ``singular`` set.  The
    ``lam_min`` diagnostic is the smallest eigenvalue of the population-
    whitened sample covariance when a profile is supplied, of the raw sample
    covariance otherwise.
    """
    entry = collection.entry(t)
    phi = entry(dataset.x)
    n = dataset.n
    sigma_n = phi.T @ phi / n
    rhs = phi.T @ dataset.y / n
    vals, vecs = np.linalg.eigh(sigma_n)
    pivot = PIVOT_TOL * max(float(np.trace(sigma_n)), 0.0)
    keep = vals > pivot
    singular = bool(not np.all(keep))
    inv = np.where(keep, 1.0 / np.where(keep, vals, 1.0), 0.0)
    w = vecs @ (inv * (vecs.T @ rhs))
    resid = phi @ w - dataset.y
    risk = 0.5 * float(np.mean(resid**2))
    if prof is not None:
        wh = prof.whitener(t)
        lam_min = float(np.linalg.eigvalsh(wh @ sigma_n @ wh)[0])
    else:
        lam_min = float(vals[0])
    return FitResult(index=t, weights=w, risk=risk, lam_min=lam_min, singular=singular)


def solve(
    dataset: Dataset,
    collection: FeatureCollection,
    prof: PopulationProfile | None = None,
) -> ErmSolution:
    """Fit every index and select the minimal empirical risk."""
    table = tuple(fit_linear(dataset, e.index, collection, prof) for e in collection)
    best = min(r.risk for r in table)
    for r in table:  # entries are in identifier order, so first tie wins
        if r.risk <= best + TIE_TOL:
            return ErmSolution(index=r.index, weights=r.weights, risk=r.risk, table=table)
    raise AssertionError("unreachable: no fit within tie tolerance of the minimum")


def oracle_solve(
    dataset: Dataset,
    collection: FeatureCollection,
    prof: PopulationProfile,
) -> ErmSolution:
    """Benchmark that fixes the least optimal index and fits only that class."""
    t0 = prof.least_optimal_index
    rec = fit_linear(dataset, t0, collection, prof)
    return ErmSolution(index=t0, weights=rec.weights, risk=rec.risk, table=(rec,))
