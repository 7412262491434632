"""HTTP JSON API over an immutable corpus snapshot and trained models.

Endpoints: GET /health, GET /topics, GET /topics/{id}/history,
POST /forecast.  All handlers read a ModelRegistry published on
``app.state``; replacing that attribute swaps every model and the corpus
snapshot atomically, so request handling never sees a half-updated
registry.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .corpus import CorpusError, CorpusStore, canonical_topic_id
from .features import MAX_HORIZON, FeatureTable, build_row, make_schema
from .models import GbdtModel, RidgeModel, load_model

logger = logging.getLogger(__name__)

AnyModel = Union[RidgeModel, GbdtModel]

TARGET_KINDS = ("pop", "pct")
MAX_TOPICS_PER_REQUEST = 10
HISTORY_TAIL_YEARS = 10


def registry_filename(horizon: int, target_kind: str) -> str:
    """Canonical artifact name inside a model directory."""
    return f"h{horizon}_{target_kind}.json"


@dataclass(frozen=True)
class ModelRegistry:
    """Maps (horizon, target kind) to a trained model over one corpus snapshot.

    Horizons must be contiguous from 1 and each horizon must carry both a
    "pop" and a "pct" model so a forecast can always report level and
    direction together.
    """

    store: CorpusStore
    models: Mapping[tuple[int, str], AnyModel]

    def __post_init__(self) -> None:
        if not self.models:
            raise ValueError("registry needs at least one model")
        horizons = sorted({h for h, _ in self.models})
        if horizons != list(range(1, len(horizons) + 1)):
            raise ValueError(f"registry horizons must be contiguous from 1, got {horizons}")
        if horizons[-1] > MAX_HORIZON:
            raise ValueError(f"registry horizon {horizons[-1]} exceeds {MAX_HORIZON}")
        for h in horizons:
            for kind in TARGET_KINDS:
                if (h, kind) not in self.models:
                    raise ValueError(f"registry is missing the ({h}, {kind!r}) model")
        for key, model in self.models.items():
            dim = model.schema.embedding_dim
            if dim > 0:
                if self.store.embeddings is None:
                    raise ValueError(f"model {key} expects embeddings but the corpus has none")
                if self.store.embeddings.dim != dim:
                    raise ValueError(
                        f"model {key} expects embedding dim {dim}, "
                        f"corpus has {self.store.embeddings.dim}"
                    )

    @property
    def max_horizon(self) -> int:
        return max(h for h, _ in self.models)

    def model(self, horizon: int, target_kind: str) -> AnyModel:
        return self.models[(horizon, target_kind)]


def load_registry(model_dir: Union[str, Path], store: CorpusStore) -> ModelRegistry:
    """Load h{1..H}_{pop,pct}.json from a directory, stopping at the first gap."""
    d = Path(model_dir)
    models: dict[tuple[int, str], AnyModel] = {}
    for h in range(1, MAX_HORIZON + 1):
        paths = {kind: d / registry_filename(h, kind) for kind in TARGET_KINDS}
        present = {kind: p.exists() for kind, p in paths.items()}
        if not any(present.values()):
            break
        if not all(present.values()):
            missing = [paths[k].name for k, ok in present.items() if not ok]
            raise ValueError(f"model directory {d} is missing {', '.join(missing)}")
        for kind, p in paths.items():
            models[(h, kind)] = load_model(p)
    if not models:
        raise ValueError(f"no h1_pop.json/h1_pct.json model pair under {d}")
    return ModelRegistry(store=store, models=models)


def _inference_table(store: CorpusStore, topic_id: str, base_year: int,
                     embedding_on: bool) -> FeatureTable:
    """Single-row table for one topic at one base year; targets undefined."""
    row = build_row(store, topic_id, base_year, embedding_on=embedding_on)
    dim = store.embeddings.dim if embedding_on and store.embeddings else 0
    return FeatureTable(
        schema=make_schema(dim),
        topic_ids=np.array([topic_id], dtype=object),
        base_years=np.array([base_year], dtype=np.int64),
        X=row[np.newaxis, :],
        target_pop=np.array([np.nan]),
        target_pct=np.array([np.nan]),
        horizon=1,
    )


def _predict_one(model: AnyModel, table: FeatureTable) -> float:
    conformed = table.select(list(model.schema.feature_names))
    return float(model.predict(conformed)[0])


def _history_point(store: CorpusStore, topic_id: str, year: int) -> dict[str, Any]:
    point = store.popularity_point(topic_id, year)
    return {
        "year": year,
        "popularity": point.popularity,
        "review_popularity": point.review_popularity,
        "research_popularity": point.research_popularity,
        "patent_count": store.patent_count(topic_id, year),
    }


def forecast_topic(registry: ModelRegistry, raw_topic: str,
                   max_horizon: int) -> dict[str, Any]:
    """History tail plus per-horizon predictions, or an inline error dict."""
    store = registry.store
    cid = canonical_topic_id(raw_topic)
    if cid not in store.records:
        return {"topic": raw_topic, "error": "unknown_topic"}
    base_year = store.last_observed_year(cid)
    if base_year is None:
        return {"topic": raw_topic, "error": "insufficient_history"}

    dims = {registry.model(h, k).schema.embedding_dim
            for h in range(1, max_horizon + 1) for k in TARGET_KINDS}
    tables: dict[int, FeatureTable] = {}
    try:
        for dim in dims:
            tables[dim] = _inference_table(store, cid, base_year, embedding_on=dim > 0)
    except (ValueError, CorpusError):
        return {"topic": raw_topic, "error": "insufficient_history"}

    forecast = []
    for h in range(1, max_horizon + 1):
        pop_model = registry.model(h, "pop")
        pct_model = registry.model(h, "pct")
        raw_pop = _predict_one(pop_model, tables[pop_model.schema.embedding_dim])
        pct = _predict_one(pct_model, tables[pct_model.schema.embedding_dim])
        forecast.append({
            "horizon": h,
            "year": base_year + h,
            "popularity": max(raw_pop, 0.0),
            "raw": raw_pop,
            "pct_change": pct,
            "direction": "up" if pct > 0 else "down",
        })

    observed = store.years(cid)
    tail = observed[-HISTORY_TAIL_YEARS:]
    return {
        "topic": cid,
        "display_name": store.meta[cid].display_name,
        "base_year": base_year,
        "history": [_history_point(store, cid, y) for y in tail],
        "forecast": forecast,
    }


def _error(status: int, payload: dict[str, Any]) -> JSONResponse:
    return JSONResponse(status_code=status, content=payload)


def create_app(registry: ModelRegistry,
               app_dir: Union[str, Path, None] = None) -> FastAPI:
    """Wire the endpoints around an immutable registry snapshot."""
    app = FastAPI(title="trendcast", docs_url=None, redoc_url=None)
    app.state.registry = registry

    @app.exception_handler(RequestValidationError)
    async def _validation_as_400(request: Request, exc: RequestValidationError):
        return _error(400, {"error": "bad_request"})

    @app.get("/health")
    def handle_health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/topics")
    def handle_topics() -> list[dict[str, Any]]:
        store: CorpusStore = app.state.registry.store
        metas = [dataclasses.asdict(store.meta[t]) for t in store.topics()]
        metas.sort(key=lambda m: (m["display_name"], m["topic_id"]))
        return metas

    @app.get("/topics/{topic_id}/history")
    def handle_history(topic_id: str):
        store: CorpusStore = app.state.registry.store
        cid = canonical_topic_id(topic_id)
        if cid not in store.records:
            return _error(404, {"error": "unknown_topic", "topic": topic_id})
        return {
            "topic": cid,
            "display_name": store.meta[cid].display_name,
            "points": [_history_point(store, cid, y) for y in store.years(cid)],
        }

    @app.post("/forecast")
    async def handle_forecast(request: Request):
        reg: ModelRegistry = app.state.registry
        try:
            body = await request.json()
        except Exception:
            return _error(400, {"error": "bad_request"})
        if not isinstance(body, dict):
            return _error(400, {"error": "bad_request"})
        topics = body.get("topics")
        if not isinstance(topics, list) or not all(isinstance(t, str) for t in topics):
            return _error(400, {"error": "bad_request"})
        if len(topics) > MAX_TOPICS_PER_REQUEST:
            return _error(400, {"error": "too_many_topics"})
        max_horizon = body.get("max_horizon", reg.max_horizon)
        if (not isinstance(max_horizon, int) or isinstance(max_horizon, bool)
                or not 1 <= max_horizon <= reg.max_horizon):
            return _error(400, {"error": "horizon_out_of_range"})
        return {"results": [forecast_topic(reg, t, max_horizon) for t in topics]}

    if app_dir is not None and Path(app_dir).is_dir():
        app.mount("/app", StaticFiles(directory=str(app_dir), html=True), name="app")
    elif app_dir is not None:
        logger.warning("static app directory %s not found; /app not mounted", app_dir)

    return app
