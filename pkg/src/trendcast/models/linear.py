"""Ridge regression on standardized, mean-imputed features.

The intercept is left unpenalized by augmenting the design matrix with a
constant column and zeroing its diagonal penalty entry. Penalty strength is
picked by contiguous k-fold cross validation; ties go to the smallest alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FeatureSchema, FeatureTable
from .base import conform_table

DEFAULT_ALPHA_GRID = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class Standardization:
    """Per-column means and population standard deviations.

    Columns that are constant (or entirely missing) get std 0 and transform
    to all zeros, which drops them from the fit without reindexing.
    """

    means: np.ndarray
    stds: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        imputed = np.where(np.isnan(x), self.means, x)
        scale = np.where(self.stds > 0.0, self.stds, 1.0)
        z = (imputed - self.means) / scale
        return np.where(self.stds > 0.0, z, 0.0)


def fit_standardization(x: np.ndarray) -> Standardization:
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("standardization needs a non-empty 2-d array")
    observed = ~np.isnan(x)
    counts = observed.sum(axis=0)
    sums = np.where(observed, x, 0.0).sum(axis=0)
    means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    sq = np.where(observed, (x - means) ** 2, 0.0).sum(axis=0)
    stds = np.sqrt(np.where(counts > 0, sq / np.maximum(counts, 1), 0.0))
    return Standardization(means=means, stds=stds)


def standardize_fit_apply(x: np.ndarray) -> tuple[Standardization, np.ndarray]:
    stats = fit_standardization(x)
    return stats, stats.apply(x)


@dataclass(frozen=True)
class RidgeModel:
    schema: FeatureSchema
    standardization: Standardization
    weights: np.ndarray
    intercept: float
    chosen_alpha: float
    alpha_grid: tuple[float, ...]
    k_folds: int

    model_kind = "ridge"

    def predict(self, table: FeatureTable) -> np.ndarray:
        table = conform_table(table, self.schema.feature_names)
        z = self.standardization.apply(table.X)
        return z @ self.weights + self.intercept


def _solve_ridge(z: np.ndarray, y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    n, d = z.shape
    g = np.empty((d + 1, d + 1))
    g[:d, :d] = z.T @ z + alpha * np.eye(d)
    col = z.sum(axis=0)
    g[:d, d] = col
    g[d, :d] = col
    g[d, d] = n
    rhs = np.empty(d + 1)
    rhs[:d] = z.T @ y
    rhs[d] = y.sum()
    try:
        beta = np.linalg.solve(g, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("ridge normal equations are singular") from exc
    return beta[:d], float(beta[d])


def _contiguous_folds(n: int, k: int) -> list[np.ndarray]:
    return np.array_split(np.arange(n), k)


def fit_ridge_cv(
    table: FeatureTable,
    targets: np.ndarray,
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID,
    k_folds: int = 5,
) -> RidgeModel:
    if len(alpha_grid) == 0:
        raise ValueError("alpha_grid must be non-empty")
    if any(a <= 0.0 for a in alpha_grid):
        raise ValueError("alpha values must be > 0")
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != (len(table),):
        raise ValueError("targets length does not match table rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if k_folds < 2:
        raise ValueError("k_folds must be >= 2")
    if len(table) < 2 * k_folds:
        raise ValueError(
            f"need at least {2 * k_folds} rows for {k_folds}-fold selection, "
            f"got {len(table)}"
        )

    grid = tuple(sorted(alpha_grid))
    x = table.X
    folds = _contiguous_folds(len(table), k_folds)
    all_idx = np.arange(len(table))

    best_alpha = None
    best_mse = None
    for alpha in grid:
        fold_mse = []
        for val_idx in folds:
            train_idx = np.setdiff1d(all_idx, val_idx, assume_unique=True)
            stats = fit_standardization(x[train_idx])
            w, b = _solve_ridge(stats.apply(x[train_idx]), y[train_idx], alpha)
            pred = stats.apply(x[val_idx]) @ w + b
            fold_mse.append(float(np.mean((y[val_idx] - pred) ** 2)))
        mse = float(np.mean(fold_mse))
        if best_mse is None or mse < best_mse:
            best_mse = mse
            best_alpha = alpha

    stats = fit_standardization(x)
    w, b = _solve_ridge(stats.apply(x), y, best_alpha)
    return RidgeModel(
        schema=table.schema,
        standardization=stats,
        weights=w,
        intercept=b,
        chosen_alpha=float(best_alpha),
        alpha_grid=grid,
        k_folds=k_folds,
    )


def fit_lag_baseline(
    table: FeatureTable,
    targets: np.ndarray,
    target_kind: str,
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID,
    k_folds: int = 5,
) -> RidgeModel:
    """Single-feature ridge: last observed level for pop targets, the
    five-year change feature for pct targets."""
    if target_kind not in ("pop", "pct"):
        raise ValueError("target_kind must be 'pop' or 'pct'")
    feature = "pop_lag0" if target_kind == "pop" else "lag5_pct_new"
    if feature not in table.schema.feature_names:
        raise ValueError(f"baseline needs feature {feature!r} in the table")
    return fit_ridge_cv(table.select([feature]), targets, alpha_grid, k_folds)
