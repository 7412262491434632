"""Split plans, metrics, lagged correlation, permutation importance, ranked
movers, and the fold-loop experiment runner that ties them together."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureTable, build_feature_rows
from .models import (
    TrainParams,
    fit_gbdt,
    fit_lag_baseline,
    fit_ridge_cv,
)
from .models.linear import DEFAULT_ALPHA_GRID

MODEL_KINDS = ("ridge", "gbdt", "baseline")
TARGET_KINDS = ("pop", "pct")
SPLIT_KINDS = ("temporal", "topic")


# ---------------------------------------------------------------------------
# split plans

@dataclass(frozen=True)
class SplitPlan:
    """Ordered folds of (train row indices, test row indices)."""

    kind: str
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    n_splits: int


def temporal_splits(base_years: np.ndarray, n_splits: int = 30) -> SplitPlan:
    """Step-forward splits over distinct base years.

    Years are cut into an initial training block plus n_splits test blocks of
    equal year count; the initial block absorbs any remainder, so every fold
    trains on strictly earlier years than it tests on.
    """
    years = np.unique(np.asarray(base_years))
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    if len(years) < n_splits + 1:
        raise ValueError(
            f"temporal splits need at least {n_splits + 1} distinct base years, "
            f"got {len(years)}"
        )
    test_size = len(years) // (n_splits + 1)
    first_test = len(years) - n_splits * test_size
    folds = []
    for i in range(n_splits):
        lo = first_test + i * test_size
        block = years[lo:lo + test_size]
        train_idx = np.flatnonzero(base_years < block[0])
        test_idx = np.flatnonzero(np.isin(base_years, block))
        folds.append((train_idx, test_idx))
    return SplitPlan(kind="temporal", folds=tuple(folds), n_splits=n_splits)


def topic_splits(topic_ids: np.ndarray, n_folds: int = 30, seed: int = 0) -> SplitPlan:
    """Groupwise splits: every row of a topic lands in the same test fold."""
    topics = sorted(set(topic_ids))
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    if len(topics) < n_folds:
        raise ValueError(
            f"topic splits need at least {n_folds} distinct topics, got {len(topics)}"
        )
    rng = np.random.default_rng(seed)
    shuffled = np.array(topics, dtype=object)
    rng.shuffle(shuffled)
    assignment = {topic: i % n_folds for i, topic in enumerate(shuffled)}
    fold_of_row = np.array([assignment[t] for t in topic_ids])
    folds = []
    for i in range(n_folds):
        test_idx = np.flatnonzero(fold_of_row == i)
        train_idx = np.flatnonzero(fold_of_row != i)
        folds.append((train_idx, test_idx))
    return SplitPlan(kind="topic_group", folds=tuple(folds), n_splits=n_folds)


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class MetricsReport:
    r2: float
    mae: float
    medae: float
    rmse: float
    binary_accuracy: float | None
    majority_baseline_accuracy: float | None
    n: int


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - SSE/SST; nan when y_true has zero variance."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        return math.nan
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot


def regression_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> MetricsReport:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("y_true and y_pred must be equal-length vectors")
    if len(y_true) == 0:
        raise ValueError("metrics need at least one point")
    if not (np.all(np.isfinite(y_true)) and np.all(np.isfinite(y_pred))):
        raise ValueError("metrics need finite values")
    err = np.abs(y_true - y_pred)
    return MetricsReport(
        r2=r2_score(y_true, y_pred),
        mae=float(err.mean()),
        medae=float(np.median(err)),
        rmse=float(np.sqrt(np.mean(err ** 2))),
        binary_accuracy=None,
        majority_baseline_accuracy=None,
        n=len(y_true),
    )


def binary_trend_accuracy(true_pct: np.ndarray, pred_pct: np.ndarray) -> tuple[float, float]:
    """Share of matching up/not-up directions plus the majority baseline.

    Exact zeros count as "not up" on both sides; the baseline is the better
    of always-up and always-not-up judged against the true vector.
    """
    true_pct = np.asarray(true_pct, dtype=np.float64)
    pred_pct = np.asarray(pred_pct, dtype=np.float64)
    if true_pct.shape != pred_pct.shape or true_pct.ndim != 1:
        raise ValueError("pct vectors must be equal-length")
    if len(true_pct) == 0:
        raise ValueError("no rows with a defined pct change")
    true_up = true_pct > 0
    pred_up = pred_pct > 0
    accuracy = float(np.mean(true_up == pred_up))
    share_up = float(np.mean(true_up))
    return accuracy, max(share_up, 1.0 - share_up)


# ---------------------------------------------------------------------------
# lagged correlation

def _aligned(a: Mapping[int, float], b: Mapping[int, float], lag: int):
    ts = sorted(t for t in a if (t - lag) in b)
    xs = np.array([a[t] for t in ts], dtype=np.float64)
    ys = np.array([b[t - lag] for t in ts], dtype=np.float64)
    return xs, ys


def pearson_lagged(a: Mapping[int, float], b: Mapping[int, float], lag: int) -> float:
    """Pearson r between a(t) and b(t - lag); positive lag means b leads.

    Returns nan when fewer than 3 years overlap or either side is constant.
    """
    xs, ys = _aligned(a, b, lag)
    if len(xs) < 3:
        return math.nan
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    sx = float(np.sqrt(np.sum(xc ** 2)))
    sy = float(np.sqrt(np.sum(yc ** 2)))
    if sx == 0.0 or sy == 0.0:
        return math.nan
    return float(np.sum(xc * yc) / (sx * sy))


@dataclass(frozen=True)
class CorrelationProfile:
    topic_id: str
    indicator: str
    lags: tuple[int, ...]
    r_values: tuple[float, ...]
    n_overlaps: tuple[int, ...]


def correlation_profile(
    topic_id: str,
    indicator: str,
    series: Mapping[int, float],
    indicator_series: Mapping[int, float],
    lags: Sequence[int],
) -> CorrelationProfile:
    rs = []
    ns = []
    for lag in lags:
        xs, _ = _aligned(series, indicator_series, lag)
        ns.append(len(xs))
        rs.append(pearson_lagged(series, indicator_series, lag))
    return CorrelationProfile(
        topic_id=topic_id,
        indicator=indicator,
        lags=tuple(int(v) for v in lags),
        r_values=tuple(rs),
        n_overlaps=tuple(ns),
    )


# ---------------------------------------------------------------------------
# permutation importance

def permutation_importance(
    model,
    table: FeatureTable,
    targets: np.ndarray,
    metric: Callable[[np.ndarray, np.ndarray], float] = r2_score,
    repeats: int = 5,
    seed: int = 0,
) -> dict[str, float]:
    """Mean drop in metric (higher = better) from scrambling each feature.

    Embedding components are reported individually and summed under the key
    "embedding". The shuffle for (feature, repeat) is seeded independently,
    so results do not depend on evaluation order.
    """
    table = table.select(list(model.schema.feature_names))
    targets = np.asarray(targets, dtype=np.float64)
    base = metric(targets, model.predict(table))
    out: dict[str, float] = {}
    for j, name in enumerate(table.schema.feature_names):
        drops = []
        for rep in range(repeats):
            rng = np.random.default_rng((seed, j, rep))
            perm = rng.permutation(len(table))
            x = table.X.copy()
            x[:, j] = x[perm, j]
            shuffled = dataclasses.replace(table, X=x)
            drops.append(base - metric(targets, model.predict(shuffled)))
        out[name] = float(np.mean(drops))
    if table.schema.embedding_dim:
        out["embedding"] = float(
            sum(out[f"embed_{i}"] for i in range(table.schema.embedding_dim))
        )
    return out


# ---------------------------------------------------------------------------
# ranked movers

@dataclass(frozen=True)
class MoverEntry:
    """One topic's predicted move from a common base year.

    trailing_pct is the observed change into the base year (t-1 to t); nan
    when that change is undefined.
    """

    topic_id: str
    base_year: int
    predicted_pct: float
    trailing_pct: float


@dataclass(frozen=True)
class MoversReport:
    base_year: int
    up: tuple[MoverEntry, ...]
    down: tuple[MoverEntry, ...]
    reversals: tuple[MoverEntry, ...]


def rank_movers(entries: Sequence[MoverEntry]) -> MoversReport:
    """Partition into predicted-up and predicted-not-up (zero counts as not
    up), each sorted by |predicted pct| descending; reversals are topics whose
    predicted sign differs from the trailing sign (zero is its own sign)."""
    if not entries:
        raise ValueError("rank_movers needs at least one forecast")
    base_years = {e.base_year for e in entries}
    if len(base_years) != 1:
        raise ValueError(f"forecasts span multiple base years: {sorted(base_years)}")
    order = lambda e: (-abs(e.predicted_pct), e.topic_id)
    up = tuple(sorted((e for e in entries if e.predicted_pct > 0), key=order))
    down = tuple(sorted((e for e in entries if not e.predicted_pct > 0), key=order))
    reversals = tuple(
        sorted(
            (
                e
                for e in entries
                if not math.isnan(e.trailing_pct)
                and np.sign(e.predicted_pct) != np.sign(e.trailing_pct)
            ),
            key=order,
        )
    )
    return MoversReport(
        base_year=base_years.pop(),
        up=up,
        down=down,
        reversals=reversals,
    )


# ---------------------------------------------------------------------------
# experiment runner

@dataclass(frozen=True)
class ExperimentConfig:
    horizon: int = 5
    n_splits: int = 30
    seed: int = 0
    embeddings: bool = False
    train: TrainParams = TrainParams()
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    cv_folds: int = 5


@dataclass(frozen=True)
class ExperimentResult:
    model_kind: str
    target_kind: str
    split_kind: str
    fold_reports: tuple[MetricsReport, ...]
    pooled: MetricsReport


def _fit(model_kind: str, table: FeatureTable, y: np.ndarray, target_kind: str,
         config: ExperimentConfig):
    if model_kind == "ridge":
        return fit_ridge_cv(table, y, config.alpha_grid, config.cv_folds)
    if model_kind == "gbdt":
        return fit_gbdt(table, y, config.train)
    if model_kind == "baseline":
        return fit_lag_baseline(table, y, target_kind, config.alpha_grid, config.cv_folds)
    raise ValueError(f"unknown model kind {model_kind!r}")


def _report(y_true: np.ndarray, y_pred: np.ndarray, target_kind: str) -> MetricsReport:
    report = regression_metrics(y_true, y_pred)
    if target_kind == "pct":
        acc, baseline = binary_trend_accuracy(y_true, y_pred)
        report = dataclasses.replace(
            report, binary_accuracy=acc, majority_baseline_accuracy=baseline
        )
    return report


def run_experiment_on_table(
    table: FeatureTable,
    model_kind: str,
    target_kind: str,
    split_kind: str,
    config: ExperimentConfig = ExperimentConfig(),
) -> ExperimentResult:
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}")
    if target_kind not in TARGET_KINDS:
        raise ValueError(f"unknown target kind {target_kind!r}")
    if split_kind not in SPLIT_KINDS:
        raise ValueError(f"unknown split kind {split_kind!r}")

    y_all = table.targets(target_kind)
    keep = ~np.isnan(y_all)
    table = table.filter(keep)
    y_all = y_all[keep]

    if split_kind == "temporal":
        plan = temporal_splits(table.base_years, config.n_splits)
    else:
        plan = topic_splits(table.topic_ids, config.n_splits, config.seed)

    fold_reports = []
    pooled_true = []
    pooled_pred = []
    for train_idx, test_idx in plan.folds:
        train = table.filter(train_idx)
        test = table.filter(test_idx)
        model = _fit(model_kind, train, y_all[train_idx], target_kind, config)
        pred = model.predict(test.select(list(model.schema.feature_names)))
        fold_reports.append(_report(y_all[test_idx], pred, target_kind))
        pooled_true.append(y_all[test_idx])
        pooled_pred.append(pred)

    pooled = _report(np.concatenate(pooled_true), np.concatenate(pooled_pred), target_kind)
    return ExperimentResult(
        model_kind=model_kind,
        target_kind=target_kind,
        split_kind=split_kind,
        fold_reports=tuple(fold_reports),
        pooled=pooled,
    )


def run_experiment(store, model_kind: str, target_kind: str, split_kind: str,
                   config: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    table = build_feature_rows(store, config.horizon, config.embeddings)
    return run_experiment_on_table(table, model_kind, target_kind, split_kind, config)


# ---------------------------------------------------------------------------
# report emission

REPORT_HEADER = ("model", "target", "split", "fold", "r2", "mae", "medae",
                 "rmse", "binary_acc", "baseline_acc", "n")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _report_row(result: ExperimentResult, fold, report: MetricsReport) -> list[str]:
    return [
        result.model_kind,
        result.target_kind,
        result.split_kind,
        str(fold),
        _cell(report.r2),
        _cell(report.mae),
        _cell(report.medae),
        _cell(report.rmse),
        _cell(report.binary_accuracy),
        _cell(report.majority_baseline_accuracy),
        str(report.n),
    ]


def experiment_csv(results: Sequence[ExperimentResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for result in results:
        for i, report in enumerate(result.fold_reports):
            writer.writerow(_report_row(result, i, report))
        writer.writerow(_report_row(result, "pooled", result.pooled))
    return buf.getvalue()


def write_experiment_csv(results: Sequence[ExperimentResult], path: str | Path) -> None:
    Path(path).write_text(experiment_csv(results), encoding="utf-8")


def _fmt4(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.4f}"


def experiment_text(results: Sequence[ExperimentResult]) -> str:
    """Pooled metrics, one aligned row per experiment."""
    rows = [("model", "target", "split", "r2", "mae", "medae", "rmse",
             "binary_acc", "baseline_acc", "n")]
    for r in results:
        p = r.pooled
        rows.append((
            r.model_kind, r.target_kind, r.split_kind,
            _fmt4(p.r2), _fmt4(p.mae), _fmt4(p.medae), _fmt4(p.rmse),
            _fmt4(p.binary_accuracy), _fmt4(p.majority_baseline_accuracy),
            str(p.n),
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


CORRELATION_HEADER = ("topic", "indicator", "lag", "r", "n_overlap")


def correlation_csv(profiles: Sequence[CorrelationProfile]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CORRELATION_HEADER)
    for p in profiles:
        for lag, r, n in zip(p.lags, p.r_values, p.n_overlaps):
            writer.writerow([p.topic_id, p.indicator, str(lag), _cell(r), str(n)])
    return buf.getvalue()


def write_correlation_csv(profiles: Sequence[CorrelationProfile], path: str | Path) -> None:
    Path(path).write_text(correlation_csv(profiles), encoding="utf-8")
