"""Operator entry point.

Subcommands: ingest, featurize, train, evaluate, predict, correlate,
importance, rank-movers, serve, fetch-patents.  Every flag can also be
supplied through a TRENDCAST_<FLAG> environment variable; explicit flags
win.  Exit codes: 0 success, 1 validation error, 2 I/O error.  Errors go
to stderr as one-line JSON objects; usage problems get click's usage text.
"""

from __future__ import annotations

import json
import logging
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from .corpus import CorpusError, canonical_topic_id, export_corpus, ingest
from .evaluation import (
    ExperimentConfig,
    MoverEntry,
    _fit as fit_model,
    correlation_csv,
    correlation_profile,
    experiment_csv,
    experiment_text,
    permutation_importance,
    rank_movers,
    run_experiment_on_table,
)
from .features import MAX_HORIZON, build_feature_rows, build_row, table_to_csv
from .models import TrainParams, load_model, save_model
from .service import create_app, forecast_topic, load_registry

logger = logging.getLogger(__name__)

DEFAULT_FROM = 1979
DEFAULT_TO = 2019

# starlette renders JSON with these exact options; `predict` mirrors them so
# its file output is byte-identical to a served /forecast body.
_JSON_KW = dict(ensure_ascii=False, allow_nan=False, indent=None,
                separators=(",", ":"))


def _check_horizon(horizon: int) -> int:
    if not 1 <= horizon <= MAX_HORIZON:
        raise ValueError(f"horizon must be in [1,{MAX_HORIZON}]")
    return horizon


def _load_store(counts, global_, patents, embeddings, no_embeddings):
    emb = None if no_embeddings else embeddings
    return ingest(counts, global_, patents, emb)


def corpus_options(fn):
    fn = click.option("--counts", envvar="TRENDCAST_COUNTS", required=True,
                      help="topic_counts.csv path")(fn)
    fn = click.option("--global", "global_", envvar="TRENDCAST_GLOBAL",
                      required=True, help="global_stats.csv path")(fn)
    fn = click.option("--patents", envvar="TRENDCAST_PATENTS", required=True,
                      help="patents.csv path")(fn)
    fn = click.option("--embeddings", envvar="TRENDCAST_EMBEDDINGS",
                      default=None, help="embeddings.csv path (optional)")(fn)
    fn = click.option("--no-embeddings", is_flag=True,
                      envvar="TRENDCAST_NO_EMBEDDINGS",
                      help="ignore any embeddings input")(fn)
    return fn


def window_options(fn):
    fn = click.option("--from", "from_year", type=int, default=DEFAULT_FROM,
                      envvar="TRENDCAST_FROM", show_default=True,
                      help="first base year kept")(fn)
    fn = click.option("--to", "to_year", type=int, default=DEFAULT_TO,
                      envvar="TRENDCAST_TO", show_default=True,
                      help="last base year kept")(fn)
    return fn


def boosting_options(fn):
    fn = click.option("--rounds", type=int, default=None,
                      envvar="TRENDCAST_ROUNDS",
                      help="boosting rounds (default: 500)")(fn)
    fn = click.option("--max-depth", type=int, default=None,
                      envvar="TRENDCAST_MAX_DEPTH",
                      help="tree depth cap (default: 6)")(fn)
    return fn


def _train_params(seed, rounds, max_depth) -> TrainParams:
    overrides = {"seed": seed}
    if rounds is not None:
        overrides["rounds"] = rounds
    if max_depth is not None:
        overrides["max_depth"] = max_depth
    return TrainParams(**overrides)


def _fmt(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _write_or_echo(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group()
def cli():
    """Forecast the popularity of scientific topics."""


@cli.command(name="ingest")
@corpus_options
@click.option("--out", envvar="TRENDCAST_OUT", required=True,
              help="directory for the canonical corpus export")
def ingest_cmd(counts, global_, patents, embeddings, no_embeddings, out):
    """Validate raw CSVs and export a canonical corpus directory."""
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    written = export_corpus(store, out)
    click.echo(json.dumps({
        "topics": len(store.topics()),
        "global_years": [min(store.global_stats), max(store.global_stats)],
        "files": sorted(written),
        "out": str(out),
    }))


@cli.command()
@corpus_options
@click.option("--horizon", type=int, default=5, envvar="TRENDCAST_HORIZON",
              show_default=True)
@click.option("--from", "from_year", type=int, default=None,
              envvar="TRENDCAST_FROM", help="first base year kept")
@click.option("--to", "to_year", type=int, default=None,
              envvar="TRENDCAST_TO", help="last base year kept")
@click.option("--out", envvar="TRENDCAST_OUT", default=None,
              help="features CSV path (default: stdout)")
def featurize(counts, global_, patents, embeddings, no_embeddings,
              horizon, from_year, to_year, out):
    """Emit one feature row per (topic, base year) as CSV."""
    _check_horizon(horizon)
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    table = build_feature_rows(store, horizon, embedding_on=embeddings is not None
                               and not no_embeddings)
    table = table.restrict_years(from_year, to_year)
    _write_or_echo(table_to_csv(table), out)


@cli.command()
@corpus_options
@window_options
@click.option("--horizon", type=int, default=5, envvar="TRENDCAST_HORIZON",
              show_default=True)
@click.option("--model", "model_kind", envvar="TRENDCAST_MODEL",
              type=click.Choice(["ridge", "gbdt", "baseline"]), default="gbdt",
              show_default=True)
@click.option("--target", "target_kind", envvar="TRENDCAST_TARGET",
              type=click.Choice(["pop", "pct"]), default="pop", show_default=True)
@click.option("--seed", type=int, default=42, envvar="TRENDCAST_SEED",
              show_default=True)
@boosting_options
@click.option("--out", envvar="TRENDCAST_OUT", required=True,
              help="model JSON path")
def train(counts, global_, patents, embeddings, no_embeddings, from_year,
          to_year, horizon, model_kind, target_kind, seed, rounds, max_depth,
          out):
    """Fit one model for one (horizon, target) pair and save it."""
    _check_horizon(horizon)
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    table = build_feature_rows(store, horizon, embedding_on=embeddings is not None
                               and not no_embeddings)
    table = table.restrict_years(from_year, to_year)
    y = table.targets(target_kind)
    keep = ~np.isnan(y)
    table, y = table.filter(keep), y[keep]
    config = ExperimentConfig(horizon=horizon, seed=seed,
                              train=_train_params(seed, rounds, max_depth))
    model = fit_model(model_kind, table, y, target_kind, config)
    save_model(model, out)
    click.echo(json.dumps({"model": model_kind, "target": target_kind,
                           "horizon": horizon, "rows": int(len(table)),
                           "out": str(out)}))


@cli.command()
@corpus_options
@window_options
@click.option("--horizon", type=int, default=5, envvar="TRENDCAST_HORIZON",
              show_default=True)
@click.option("--model", "model_kind", envvar="TRENDCAST_MODEL",
              type=click.Choice(["ridge", "gbdt", "baseline"]), default="gbdt",
              show_default=True)
@click.option("--target", "target_kind", envvar="TRENDCAST_TARGET",
              type=click.Choice(["pop", "pct"]), default="pop", show_default=True)
@click.option("--split", "split_kind", envvar="TRENDCAST_SPLIT",
              type=click.Choice(["temporal", "topic"]), default="temporal",
              show_default=True)
@click.option("--n-splits", type=int, default=30, envvar="TRENDCAST_N_SPLITS",
              show_default=True)
@click.option("--seed", type=int, default=42, envvar="TRENDCAST_SEED",
              show_default=True)
@boosting_options
@click.option("--out", envvar="TRENDCAST_OUT", default=None,
              help="report CSV path (default: CSV to stdout)")
def evaluate(counts, global_, patents, embeddings, no_embeddings, from_year,
             to_year, horizon, model_kind, target_kind, split_kind, n_splits,
             seed, rounds, max_depth, out):
    """Cross-validated metrics for one model/target/split combination."""
    _check_horizon(horizon)
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    table = build_feature_rows(store, horizon, embedding_on=embeddings is not None
                               and not no_embeddings)
    table = table.restrict_years(from_year, to_year)
    config = ExperimentConfig(horizon=horizon, n_splits=n_splits, seed=seed,
                              train=_train_params(seed, rounds, max_depth))
    result = run_experiment_on_table(table, model_kind, target_kind,
                                     split_kind, config)
    csv_text = experiment_csv([result])
    if out:
        Path(out).write_text(csv_text, encoding="utf-8")
        click.echo(experiment_text([result]))
    else:
        click.echo(csv_text, nl=False)


@cli.command()
@corpus_options
@click.option("--model-dir", envvar="TRENDCAST_MODEL_DIR", required=True,
              help="directory of h{N}_{pop,pct}.json artifacts")
@click.option("--topics", envvar="TRENDCAST_TOPICS", required=True,
              help="comma-separated topic names (max 10)")
@click.option("--horizon", type=int, default=None, envvar="TRENDCAST_HORIZON",
              help="max horizon (default: all the registry has)")
@click.option("--out", envvar="TRENDCAST_OUT", default=None,
              help="JSON path; written byte-identical to POST /forecast")
def predict(counts, global_, patents, embeddings, no_embeddings, model_dir,
            topics, horizon, out):
    """Forecast listed topics exactly as the HTTP service would."""
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    registry = load_registry(model_dir, store)
    names = [t for t in (s.strip() for s in topics.split(",")) if t]
    if not names:
        raise ValueError("no topics given")
    if len(names) > 10:
        raise ValueError("too many topics: at most 10 per run")
    max_horizon = registry.max_horizon if horizon is None else _check_horizon(horizon)
    if max_horizon > registry.max_horizon:
        raise ValueError(f"no trained model for horizon {max_horizon} "
                         f"(registry stops at {registry.max_horizon})")
    payload = {"results": [forecast_topic(registry, t, max_horizon)
                           for t in names]}
    text = json.dumps(payload, **_JSON_KW)
    if out:
        Path(out).write_bytes(text.encode("utf-8"))
    else:
        click.echo(text)


@cli.command()
@corpus_options
@click.option("--indicator", envvar="TRENDCAST_INDICATOR",
              type=click.Choice(["patents", "review"]), default="patents",
              show_default=True)
@click.option("--topics", envvar="TRENDCAST_TOPICS", default=None,
              help="comma-separated topic names (default: all)")
@click.option("--lags", envvar="TRENDCAST_LAGS", default="-5,-4,-3,-2,-1,0,1,2,3,4,5",
              show_default=True, help="comma-separated lags; positive = indicator leads")
@click.option("--out", envvar="TRENDCAST_OUT", default=None,
              help="CSV path (default: stdout)")
def correlate(counts, global_, patents, embeddings, no_embeddings, indicator,
              topics, lags, out):
    """Lagged Pearson correlation between popularity and an indicator."""
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    lag_list = [int(s) for s in lags.split(",") if s.strip()]
    if topics is None:
        ids = store.topics()
    else:
        ids = [canonical_topic_id(t) for t in topics.split(",") if t.strip()]
        unknown = [t for t in ids if t not in store.records]
        if unknown:
            raise ValueError(f"unknown topics: {', '.join(unknown)}")
    profiles = []
    for cid in ids:
        years = store.years(cid)
        if not years:
            continue
        series = {y: store.popularity(cid, y) for y in years}
        if indicator == "patents":
            span = years + sorted(store.patents.get(cid, {}))
            ind = {y: float(store.patent_count(cid, y))
                   for y in range(min(span), max(span) + 1)}
        else:
            ind = {y: store.review_popularity(cid, y) for y in years}
        profiles.append(correlation_profile(cid, indicator, series, ind, lag_list))
    _write_or_echo(correlation_csv(profiles), out)


@cli.command()
@corpus_options
@window_options
@click.option("--model-file", envvar="TRENDCAST_MODEL_FILE", required=True,
              help="trained model JSON")
@click.option("--horizon", type=int, default=5, envvar="TRENDCAST_HORIZON",
              show_default=True, help="horizon the model was trained for")
@click.option("--target", "target_kind", envvar="TRENDCAST_TARGET",
              type=click.Choice(["pop", "pct"]), default="pop", show_default=True)
@click.option("--repeats", type=int, default=5, envvar="TRENDCAST_REPEATS",
              show_default=True)
@click.option("--seed", type=int, default=42, envvar="TRENDCAST_SEED",
              show_default=True)
@click.option("--out", envvar="TRENDCAST_OUT", default=None,
              help="CSV path (default: stdout)")
def importance(counts, global_, patents, embeddings, no_embeddings, from_year,
               to_year, model_file, horizon, target_kind, repeats, seed, out):
    """Permutation importance of every feature under a trained model."""
    _check_horizon(horizon)
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    model = load_model(model_file)
    table = build_feature_rows(store, horizon,
                               embedding_on=model.schema.embedding_dim > 0)
    table = table.restrict_years(from_year, to_year)
    y = table.targets(target_kind)
    keep = ~np.isnan(y)
    table, y = table.filter(keep), y[keep]
    table = table.select(list(model.schema.feature_names))
    scores = permutation_importance(model, table, y, repeats=repeats, seed=seed)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    text = "feature,importance\n" + "".join(
        f"{name},{_fmt(val)}\n" for name, val in ranked)
    _write_or_echo(text, out)


@cli.command(name="rank-movers")
@corpus_options
@click.option("--model-file", envvar="TRENDCAST_MODEL_FILE", required=True,
              help="trained pct-target model JSON")
@click.option("--base-year", type=int, default=None, envvar="TRENDCAST_BASE_YEAR",
              help="common forecast base year (default: last global year)")
@click.option("--out", envvar="TRENDCAST_OUT", default=None,
              help="CSV path (default: stdout)")
def rank_movers_cmd(counts, global_, patents, embeddings, no_embeddings,
                    model_file, base_year, out):
    """Rank topics by predicted pct change at one shared base year."""
    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    model = load_model(model_file)
    year = store.last_global_year() if base_year is None else base_year
    if year not in store.global_stats:
        raise ValueError(f"no global stats for base year {year}")
    entries = []
    feature_names = list(model.schema.feature_names)
    embedding_on = model.schema.embedding_dim > 0
    for cid in store.topics():
        observed = [y for y in store.years(cid) if y <= year]
        if not observed:
            continue
        row = build_row(store, cid, year, embedding_on=embedding_on)
        table = _single_row_table(store, cid, year, row, embedding_on)
        pred = float(model.predict(table.select(feature_names))[0])
        prev = store.popularity(cid, year - 1) if year - 1 in store.global_stats else 0.0
        cur = store.popularity(cid, year)
        trailing = 100.0 * (cur - prev) / prev if prev > 0 else float("nan")
        entries.append(MoverEntry(topic_id=cid, base_year=year,
                                  predicted_pct=pred, trailing_pct=trailing))
    if not entries:
        raise ValueError(f"no topic has observations at or before {year}")
    report = rank_movers(entries)
    lines = ["section,rank,topic_id,predicted_pct,trailing_pct"]
    for section, seq in [("up", report.up), ("down", report.down),
                         ("reversals", report.reversals)]:
        for rank, e in enumerate(seq, start=1):
            lines.append(f"{section},{rank},{e.topic_id},"
                         f"{_fmt(e.predicted_pct)},{_fmt(e.trailing_pct)}")
    _write_or_echo("\n".join(lines) + "\n", out)


def _single_row_table(store, cid, year, row, embedding_on):
    from .features import FeatureTable, make_schema
    dim = store.embeddings.dim if embedding_on and store.embeddings else 0
    return FeatureTable(schema=make_schema(dim),
                        topic_ids=np.array([cid], dtype=object),
                        base_years=np.array([year]),
                        X=row[np.newaxis, :],
                        target_pop=np.array([np.nan]),
                        target_pct=np.array([np.nan]),
                        horizon=1)


@cli.command()
@corpus_options
@click.option("--model-dir", envvar="TRENDCAST_MODEL_DIR", required=True)
@click.option("--port", type=int, default=8000, envvar="TRENDCAST_PORT",
              show_default=True)
@click.option("--host", default="127.0.0.1", envvar="TRENDCAST_HOST",
              show_default=True)
@click.option("--app-dir", envvar="TRENDCAST_APP_DIR", default="webapp/dist",
              show_default=True, help="static UI directory mounted at /app")
def serve(counts, global_, patents, embeddings, no_embeddings, model_dir,
          port, host, app_dir):
    """Run the forecast HTTP service."""
    import uvicorn

    store = _load_store(counts, global_, patents, embeddings, no_embeddings)
    registry = load_registry(model_dir, store)
    app = create_app(registry, app_dir=app_dir)
    uvicorn.run(app, host=host, port=port)


@cli.command(name="fetch-patents")
@click.option("--query", envvar="TRENDCAST_QUERY", required=True,
              help="topic/search term; becomes the topic id")
@click.option("--from", "from_year", type=int, required=True,
              envvar="TRENDCAST_FROM")
@click.option("--to", "to_year", type=int, required=True, envvar="TRENDCAST_TO")
@click.option("--api-url", envvar="TRENDCAST_API_URL", required=True,
              help="endpoint answering GET ?query=..&year=.. with {\"count\": N}")
@click.option("--out", envvar="TRENDCAST_OUT", required=True,
              help="patents.csv path; existing years are kept (resumable)")
@click.option("--rate-limit", type=float, default=1.0, envvar="TRENDCAST_RATE_LIMIT",
              show_default=True, help="seconds to wait between requests")
@click.option("--retries", type=int, default=3, envvar="TRENDCAST_RETRIES",
              show_default=True, help="retries per year after the first attempt")
def fetch_patents(query, from_year, to_year, api_url, out, rate_limit, retries):
    """Fetch per-year patent counts into the patents.csv schema."""
    import requests

    if from_year > to_year:
        raise ValueError(f"year range reversed: {from_year} > {to_year}")
    if not query.strip():
        raise ValueError("query must be non-empty")
    cid = canonical_topic_id(query)
    path = Path(out)
    rows: dict[int, int] = {}
    others: list[tuple[str, int, int]] = []
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines()[1:]:
            topic, year, count = line.split(",")
            if topic == cid:
                rows[int(year)] = int(count)
            else:
                others.append((topic, int(year), int(count)))

    def flush():
        all_rows = others + [(cid, y, rows[y]) for y in sorted(rows)]
        all_rows.sort()
        text = "topic,year,patent_count\n" + "".join(
            f"{t},{y},{c}\n" for t, y, c in all_rows)
        path.write_text(text, encoding="utf-8")

    first = True
    try:
        for year in range(from_year, to_year + 1):
            if year in rows:
                continue
            last_error = None
            for attempt in range(1 + retries):
                if not first:
                    time.sleep(rate_limit)
                first = False
                try:
                    resp = requests.get(api_url,
                                        params={"query": query, "year": year},
                                        timeout=30)
                    if resp.status_code == 200:
                        body = resp.json() or {}
                        rows[year] = int(body.get("count", 0))
                        last_error = None
                        break
                    last_error = f"HTTP {resp.status_code}"
                except requests.RequestException as exc:
                    last_error = str(exc)
            if last_error is not None:
                raise OSError(f"patent fetch failed for {year} after "
                              f"{1 + retries} attempts: {last_error}")
    finally:
        if rows:
            flush()
    click.echo(json.dumps({"topic": cid, "years": [from_year, to_year],
                           "rows": len(rows), "out": str(out)}))


def run(argv=None) -> int:
    """Dispatch argv; 0 success, 1 validation error, 2 I/O error."""
    try:
        rv = cli.main(args=list(argv) if argv is not None else None,
                      standalone_mode=False)
        return int(rv) if isinstance(rv, int) else 0
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(json.dumps({"error": exc.format_message()}), err=True)
        return 1
    except click.Abort:
        click.echo(json.dumps({"error": "aborted"}), err=True)
        return 1
    except OSError as exc:
        click.echo(json.dumps({"error": str(exc)}), err=True)
        return 2
    except (CorpusError, ValueError) as exc:
        click.echo(json.dumps({"error": str(exc)}), err=True)
        # unreadable/missing files surface as wrapped CorpusError: still I/O
        return 2 if isinstance(exc.__cause__, OSError) else 1


def main() -> None:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
