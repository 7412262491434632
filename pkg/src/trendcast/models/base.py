"""Shared model plumbing: schema conformance checks and training knobs."""

from __future__ import annotations

from dataclasses import dataclass

from ..features import FeatureTable


class SchemaMismatchError(ValueError):
    """Feature table does not provide the columns the model was trained on."""


def conform_table(table: FeatureTable, feature_names: tuple[str, ...]) -> FeatureTable:
    """Reorder ``table`` columns to match ``feature_names``.

    Missing or extra columns are an error; the message names the offending
    features so a caller can tell a stale table from a stale model.
    """
    have = set(table.schema.feature_names)
    want = set(feature_names)
    missing = [name for name in feature_names if name not in have]
    extra = [name for name in table.schema.feature_names if name not in want]
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing features: " + ", ".join(missing))
        if extra:
            parts.append("unexpected features: " + ", ".join(extra))
        raise SchemaMismatchError("; ".join(parts))
    if table.schema.feature_names == tuple(feature_names):
        return table
    return table.select(list(feature_names))


@dataclass(frozen=True)
class TrainParams:
    """Boosting hyper-parameters.

    min_samples_leaf counts rows on each side of a split, missing rows
    included, so every leaf sees at least that many training rows.
    """

    rounds: int = 500
    max_depth: int = 6
    learning_rate: float = 0.05
    min_samples_leaf: int = 20
    smoothing: float = 1.0
    seed: int = 42

    def validate(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.smoothing <= 0.0:
            raise ValueError("smoothing must be > 0")


def predict(model, table: FeatureTable):
    """Dispatch to the model's own predict; kept as a free function so callers
    can stay agnostic about the model kind."""
    return model.predict(table)
