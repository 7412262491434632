"""Model-ready feature rows: lags, ratios, patents, lifecycle and embeddings.

Every feature at base year t reads corpus data from years <= t only; the two
targets (future popularity and percent change) are the only values allowed to
look ahead.  Missing values are carried as NaN all the way to the models.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import TRAINING_FLOOR, CorpusStore, POPULARITY_SCALE

logger = logging.getLogger(__name__)

MAX_HORIZON = 6

POP_LAGS = 5
PATENT_LAGS = 5

BASE_FEATURE_NAMES: tuple[str, ...] = (
    *(f"pop_lag{k}" for k in range(POP_LAGS + 1)),
    "pop_window_mean_5_10",
    "pct_diff",
    "lag5_pct_new",
    "y_raw",
    "review_pop",
    "research_pop",
    "research_review_ratio",
    "review_research_diff",
    "abs_publications",
    "us_fraction",
    "patent_yearly_total",
    "patent_fraction",
    *(f"patent_lag{k}" for k in range(1, PATENT_LAGS + 1)),
    "year_num",
    "years_since_first_occurrence",
    "years_since_first_valid",
    "valid_gap",
)

# features that are transforms of the topic's own popularity history;
# everything else counts as exogenous when ranking feature importances
OWN_HISTORY_FEATURES: frozenset[str] = frozenset(
    [f"pop_lag{k}" for k in range(POP_LAGS + 1)]
    + ["pop_window_mean_5_10", "pct_diff", "lag5_pct_new", "y_raw"]
)


def pct_change(current: float, past: float) -> float:
    """Percent change; NaN (missing) when the past value is zero."""
    if past == 0:
        return math.nan
    return 100.0 * (current - past) / past


@dataclass(frozen=True)
class FeatureSchema:
    feature_names: tuple[str, ...]
    embedding_dim: int = 0

    def __post_init__(self):
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")

    def index(self, name: str) -> int:
        return self.feature_names.index(name)


def make_schema(embedding_dim: int = 0) -> FeatureSchema:
    names = BASE_FEATURE_NAMES + tuple(f"embed_{i}" for i in range(embedding_dim))
    return FeatureSchema(feature_names=names, embedding_dim=embedding_dim)


@dataclass
class FeatureTable:
    """Rows of (topic, base_year) observations plus the two targets.

    X holds one column per schema feature (NaN = missing); the topic id is
    kept alongside as the categorical column.
    """

    schema: FeatureSchema
    topic_ids: np.ndarray
    base_years: np.ndarray
    X: np.ndarray
    target_pop: np.ndarray
    target_pct: np.ndarray
    horizon: int

    def __len__(self) -> int:
        return len(self.topic_ids)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.schema.feature_names

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.index(name)]

    def targets(self, kind: str) -> np.ndarray:
        if kind == "pop":
            return self.target_pop
        if kind == "pct":
            return self.target_pct
        raise ValueError(f"unknown target kind {kind!r}")

    def filter(self, mask: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            schema=self.schema,
            topic_ids=self.topic_ids[mask],
            base_years=self.base_years[mask],
            X=self.X[mask],
            target_pop=self.target_pop[mask],
            target_pct=self.target_pct[mask],
            horizon=self.horizon,
        )

    def restrict_years(self, from_year: int | None, to_year: int | None) -> "FeatureTable":
        mask = np.ones(len(self), dtype=bool)
        if from_year is not None:
            mask &= self.base_years >= from_year
        if to_year is not None:
            mask &= self.base_years <= to_year
        return self.filter(mask)

    def select(self, names: Sequence[str]) -> "FeatureTable":
        idx = [self.schema.index(n) for n in names]
        dim = sum(1 for n in names if n.startswith("embed_"))
        return FeatureTable(
            schema=FeatureSchema(tuple(names), embedding_dim=dim),
            topic_ids=self.topic_ids,
            base_years=self.base_years,
            X=self.X[:, idx],
            target_pop=self.target_pop,
            target_pct=self.target_pct,
            horizon=self.horizon,
        )


def _topic_feature_values(store: CorpusStore, topic_id: str, t: int,
                          embedding_dim: int) -> np.ndarray:
    meta = store.meta[topic_id]
    stats = store.global_stats[t]
    # lifecycle years are unknowable until reached: a first-valid year later
    # than t is derived from data after t and must not leak into the row
    first_occ = meta.first_occurrence_year
    first_occ = first_occ if first_occ is not None and first_occ <= t else None
    first_valid = meta.first_valid_year
    first_valid = first_valid if first_valid is not None and first_valid <= t else None
    pop = [store.popularity(topic_id, t - k) for k in range(POP_LAGS + 1)]
    window = [store.popularity(topic_id, y) for y in range(t - 10, t - 4)]
    review = store.review_popularity(topic_id, t)
    research = store.research_popularity(topic_id, t)
    patents_now = store.patent_count(topic_id, t)

    values = [
        *pop,
        sum(window) / len(window),
        pct_change(pop[0], pop[1]),
        pct_change(pop[0], pop[5]),
        pop[0],
        review,
        research,
        research / review if review > 0 else math.nan,
        review - research,
        pop[0] * stats.medline_total / POPULARITY_SCALE,
        stats.us_publication_fraction,
        float(patents_now),
        patents_now / stats.patents_total if stats.patents_total > 0 else math.nan,
        *(float(store.patent_count(topic_id, t - k)) for k in range(1, PATENT_LAGS + 1)),
        float(t - TRAINING_FLOOR),
        float(t - first_occ) if first_occ else math.nan,
        float(t - first_valid) if first_valid else math.nan,
        float(first_valid - first_occ) if first_valid and first_occ else math.nan,
    ]
    if embedding_dim:
        vec = store.embeddings.get(topic_id)
        if vec is None:
            values.extend([math.nan] * embedding_dim)
        else:
            values.extend(float(v) for v in vec)
    return np.array(values, dtype=np.float64)


def build_row(store: CorpusStore, topic_id: str, base_year: int,
              embedding_on: bool = False) -> np.ndarray:
    """Single feature vector for inference at an arbitrary base year."""
    dim = _embedding_dim(store, embedding_on)
    if base_year not in store.global_stats:
        raise ValueError(f"no global stats for base year {base_year}")
    return _topic_feature_values(store, topic_id, base_year, dim)


def _embedding_dim(store: CorpusStore, embedding_on: bool) -> int:
    if not embedding_on:
        return 0
    if store.embeddings is None:
        raise ValueError("embedding features requested but the store has no embedding table")
    return store.embeddings.dim


def build_feature_rows(store: CorpusStore, horizon: int,
                       embedding_on: bool = False) -> FeatureTable:
    """One row per (topic, base year) for every modeling-eligible base year.

    Topics without a training start are excluded (and logged); base years run
    from each topic's training start through last_global_year - horizon.
    """
    if not 1 <= horizon <= MAX_HORIZON:
        raise ValueError(f"horizon must be in [1,{MAX_HORIZON}], got {horizon}")
    dim = _embedding_dim(store, embedding_on)
    schema = make_schema(dim)

    topic_col: list[str] = []
    year_col: list[int] = []
    rows: list[np.ndarray] = []
    t_pop: list[float] = []
    t_pct: list[float] = []

    last_year = store.last_global_year()
    for topic_id in store.topics():
        meta = store.meta[topic_id]
        if meta.training_start_year is None:
            logger.info("topic %r has no training start year; excluded", topic_id)
            continue
        start = max(TRAINING_FLOOR, meta.training_start_year)
        for t in range(start, last_year - horizon + 1):
            if t not in store.global_stats or (t + horizon) not in store.global_stats:
                continue
            now = store.popularity(topic_id, t)
            future = store.popularity(topic_id, t + horizon)
            topic_col.append(topic_id)
            year_col.append(t)
            rows.append(_topic_feature_values(store, topic_id, t, dim))
            t_pop.append(future)
            t_pct.append(pct_change(future, now))

    n = len(rows)
    return FeatureTable(
        schema=schema,
        topic_ids=np.array(topic_col, dtype=object),
        base_years=np.array(year_col, dtype=np.int64),
        X=np.vstack(rows) if n else np.empty((0, len(schema.feature_names))),
        target_pop=np.array(t_pop, dtype=np.float64),
        target_pct=np.array(t_pct, dtype=np.float64),
        horizon=horizon,
    )


# --- CSV export / import -----------------------------------------------------


def _fmt(x: float) -> str:
    if math.isnan(x):
        return ""
    return repr(float(x))


def table_to_csv(table: FeatureTable) -> str:
    header = ["topic", "base_year", *table.feature_names, "target_pop", "target_pct"]
    lines = [",".join(header)]
    for i in range(len(table)):
        cells = [str(table.topic_ids[i]), str(int(table.base_years[i]))]
        cells.extend(_fmt(v) for v in table.X[i])
        cells.append(_fmt(table.target_pop[i]))
        cells.append(_fmt(table.target_pct[i]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_table(table: FeatureTable, path: str | Path) -> None:
    Path(path).write_text(table_to_csv(table), encoding="utf-8")


def read_table(path: str | Path, horizon: int = 0) -> FeatureTable:
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    if header[:2] != ["topic", "base_year"] or header[-2:] != ["target_pop", "target_pct"]:
        raise ValueError(f"unexpected feature CSV header: {header[:3]}...")
    names = tuple(header[2:-2])
    dim = sum(1 for n in names if n.startswith("embed_"))
    schema = FeatureSchema(names, embedding_dim=dim)

    def parse(cell: str) -> float:
        return math.nan if cell == "" else float(cell)

    topics, years, X, tp, tc = [], [], [], [], []
    for row in rows[1:]:
        topics.append(row[0])
        years.append(int(row[1]))
        X.append([parse(c) for c in row[2:-2]])
        tp.append(parse(row[-2]))
        tc.append(parse(row[-1]))
    return FeatureTable(
        schema=schema,
        topic_ids=np.array(topics, dtype=object),
        base_years=np.array(years, dtype=np.int64),
        X=np.array(X, dtype=np.float64) if X else np.empty((0, len(names))),
        target_pop=np.array(tp, dtype=np.float64),
        target_pct=np.array(tc, dtype=np.float64),
        horizon=horizon,
    )
