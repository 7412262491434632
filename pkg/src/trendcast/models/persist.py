"""Model serialization: one self-describing JSON document per model."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..features import FeatureSchema
from .base import TrainParams
from .boosting import EncodingTable, GbdtModel, Tree
from .linear import RidgeModel, Standardization

SCHEMA_VERSION = 1


def _tree_doc(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "missing_left": tree.missing_left.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from_doc(doc: dict) -> Tree:
    return Tree(
        feature=np.array(doc["feature"], dtype=np.int64),
        threshold=np.array(doc["threshold"], dtype=np.float64),
        missing_left=np.array(doc["missing_left"], dtype=bool),
        left=np.array(doc["left"], dtype=np.int64),
        right=np.array(doc["right"], dtype=np.int64),
        value=np.array(doc["value"], dtype=np.float64),
    )


def _schema_doc(schema: FeatureSchema) -> dict:
    return {
        "feature_names": list(schema.feature_names),
        "embedding_dim": schema.embedding_dim,
    }


def _schema_from_doc(doc: dict) -> FeatureSchema:
    return FeatureSchema(
        feature_names=tuple(doc["feature_names"]),
        embedding_dim=int(doc["embedding_dim"]),
    )


def model_document(model) -> dict:
    if isinstance(model, RidgeModel):
        return {
            "schema_version": SCHEMA_VERSION,
            "model_kind": "ridge",
            "schema": _schema_doc(model.schema),
            "parameters": {
                "alpha_grid": list(model.alpha_grid),
                "k_folds": model.k_folds,
            },
            "payload": {
                "means": model.standardization.means.tolist(),
                "stds": model.standardization.stds.tolist(),
                "weights": model.weights.tolist(),
                "intercept": model.intercept,
                "chosen_alpha": model.chosen_alpha,
            },
        }
    if isinstance(model, GbdtModel):
        p = model.params
        return {
            "schema_version": SCHEMA_VERSION,
            "model_kind": "gbdt",
            "schema": _schema_doc(model.schema),
            "parameters": {
                "rounds": p.rounds,
                "max_depth": p.max_depth,
                "learning_rate": p.learning_rate,
                "min_samples_leaf": p.min_samples_leaf,
                "smoothing": p.smoothing,
                "seed": p.seed,
            },
            "payload": {
                "f0": model.f0,
                "learning_rate": model.learning_rate,
                "trees": [_tree_doc(t) for t in model.trees],
                "encoding": {
                    "values": model.encoding.values,
                    "prior_mean": model.encoding.prior_mean,
                    "smoothing": model.encoding.smoothing,
                },
                "train_mse": list(model.train_mse),
            },
        }
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def model_from_document(doc: dict):
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported model document version: {version!r}")
    kind = doc.get("model_kind")
    schema = _schema_from_doc(doc["schema"])
    payload = doc["payload"]
    if kind == "ridge":
        params = doc["parameters"]
        return RidgeModel(
            schema=schema,
            standardization=Standardization(
                means=np.array(payload["means"], dtype=np.float64),
                stds=np.array(payload["stds"], dtype=np.float64),
            ),
            weights=np.array(payload["weights"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            chosen_alpha=float(payload["chosen_alpha"]),
            alpha_grid=tuple(params["alpha_grid"]),
            k_folds=int(params["k_folds"]),
        )
    if kind == "gbdt":
        params = doc["parameters"]
        enc = payload["encoding"]
        return GbdtModel(
            schema=schema,
            f0=float(payload["f0"]),
            learning_rate=float(payload["learning_rate"]),
            trees=tuple(_tree_from_doc(t) for t in payload["trees"]),
            encoding=EncodingTable(
                values={str(k): float(v) for k, v in enc["values"].items()},
                prior_mean=float(enc["prior_mean"]),
                smoothing=float(enc["smoothing"]),
            ),
            params=TrainParams(
                rounds=int(params["rounds"]),
                max_depth=int(params["max_depth"]),
                learning_rate=float(params["learning_rate"]),
                min_samples_leaf=int(params["min_samples_leaf"]),
                smoothing=float(params["smoothing"]),
                seed=int(params["seed"]),
            ),
            train_mse=tuple(float(v) for v in payload["train_mse"]),
        )
    raise ValueError(f"unknown model_kind: {kind!r}")


def save_model(model, path: str | Path) -> None:
    doc = model_document(model)
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_model(path: str | Path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return model_from_document(doc)
