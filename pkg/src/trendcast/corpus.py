"""Corpus ingestion: raw count files -> validated, normalized popularity store.

Input files (all UTF-8 CSV, plain decimal numbers, 4-digit years):
  topic_counts.csv  topic,year,publications,review_publications
  global_stats.csv  year,medline_total,us_publication_fraction,patents_total
  patents.csv       topic,year,patent_count
  embeddings.csv    topic,e0,e1,...,e{D-1}

Missing (topic, year) rows inside a topic's span are read as zero counts:
a literature query that matches nothing returns zero hits, not null.
"""

from __future__ import annotations

import csv
import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

logger = logging.getLogger(__name__)

EARLIEST_YEAR = 1946
LATEST_YEAR = 2035
TRAINING_FLOOR = 1979

POPULARITY_SCALE = 100_000.0

TOPIC_COUNTS_HEADER = ["topic", "year", "publications", "review_publications"]
GLOBAL_STATS_HEADER = ["year", "medline_total", "us_publication_fraction", "patents_total"]
PATENTS_HEADER = ["topic", "year", "patent_count"]

_WHITESPACE = re.compile(r"\s+")


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus input data."""

    def __init__(self, message: str, *, file: str | None = None,
                 line: int | None = None, column: str | None = None):
        loc = ""
        if file is not None:
            loc = file
            if line is not None:
                loc += f":{line}"
            loc += ": "
        if column is not None:
            loc += f"column '{column}': "
        super().__init__(loc + message)
        self.file = file
        self.line = line
        self.column = column


def canonical_topic_id(name: str) -> str:
    """Stable join key: lowercased, trimmed, inner whitespace collapsed."""
    return _WHITESPACE.sub(" ", name.strip()).lower()


def popularity(count: int, total: int) -> float:
    """Publications per 100,000 indexed publications."""
    if total <= 0:
        raise CorpusError(f"popularity denominator must be positive, got {total}")
    return POPULARITY_SCALE * count / total


@dataclass(frozen=True)
class YearlyTopicCount:
    topic_id: str
    year: int
    publications: int
    review_publications: int
    patent_count: int = 0

    @property
    def research_publications(self) -> int:
        return self.publications - self.review_publications


@dataclass(frozen=True)
class GlobalYearStats:
    year: int
    medline_total: int
    us_publication_fraction: float
    patents_total: int


@dataclass(frozen=True)
class TopicMeta:
    topic_id: str
    display_name: str
    domain_tag: Optional[str] = None
    first_occurrence_year: Optional[int] = None
    first_valid_year: Optional[int] = None
    training_start_year: Optional[int] = None


@dataclass(frozen=True)
class PopularityPoint:
    topic_id: str
    year: int
    popularity: float
    review_popularity: float
    research_popularity: float


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: Mapping[str, np.ndarray]

    def get(self, topic_id: str) -> Optional[np.ndarray]:
        return self.vectors.get(topic_id)


# --- topic lifecycle dates ------------------------------------------------
#
# The first-valid rule filters annotation noise: a topic only becomes
# "real" once it has appeared in at least 4 of the 5 years of a window.
# Whether that window includes the year under test is ambiguous in the
# source data conventions, so both readings are supported; the default is
# the strictly-preceding window [y-5, y-1].  training_start_year applies
# the same window rule (plus the post-1978 accumulation rule), which keeps
# first_occurrence <= first_valid <= training_start for every series.


def _active_years(series: Mapping[int, int]) -> list[int]:
    return sorted(y for y, c in series.items() if c > 0 and y >= EARLIEST_YEAR)


def _window_occupancy(active: set[int], year: int, include_current: bool) -> int:
    lo, hi = (year - 4, year) if include_current else (year - 5, year - 1)
    return sum(1 for w in range(lo, hi + 1) if w in active)


def first_occurrence_year(series: Mapping[int, int]) -> Optional[int]:
    """Earliest year (>= 1946) with a nonzero publication count."""
    active = _active_years(series)
    return active[0] if active else None


def first_valid_year(series: Mapping[int, int], include_current: bool = False) -> Optional[int]:
    """First active year whose 5-year window holds >= 4 active years."""
    active = _active_years(series)
    active_set = set(active)
    for y in active:
        if _window_occupancy(active_set, y, include_current) >= 4:
            return y
    return None


def training_start_year(series: Mapping[int, int], include_current: bool = False) -> Optional[int]:
    """First modeling-eligible year: valid per the window rule, >= 1979,
    with at least 5 active years accumulated since 1979."""
    active = _active_years(series)
    active_set = set(active)
    post = [y for y in active if y >= TRAINING_FLOOR]
    for i, y in enumerate(post):
        if i + 1 < 5:
            continue
        if _window_occupancy(active_set, y, include_current) >= 4:
            return y
    return None


# --- the store -------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStore:
    """Immutable snapshot of ingested counts, global stats, patents and
    embeddings.  Safe to share read-only across concurrent consumers."""

    records: Mapping[str, Mapping[int, YearlyTopicCount]]
    global_stats: Mapping[int, GlobalYearStats]
    patents: Mapping[str, Mapping[int, int]]
    meta: Mapping[str, TopicMeta]
    embeddings: Optional[EmbeddingTable] = None
    missing_embeddings: tuple[str, ...] = ()

    def topics(self) -> list[str]:
        return sorted(self.records)

    def years(self, topic_id: str) -> list[int]:
        return sorted(self.records.get(topic_id, {}))

    def last_observed_year(self, topic_id: str) -> Optional[int]:
        years = self.years(topic_id)
        return years[-1] if years else None

    def last_global_year(self) -> int:
        return max(self.global_stats)

    def publications(self, topic_id: str, year: int) -> int:
        rec = self.records.get(topic_id, {}).get(year)
        return rec.publications if rec is not None else 0

    def review_publications(self, topic_id: str, year: int) -> int:
        rec = self.records.get(topic_id, {}).get(year)
        return rec.review_publications if rec is not None else 0

    def research_publications(self, topic_id: str, year: int) -> int:
        rec = self.records.get(topic_id, {}).get(year)
        return rec.research_publications if rec is not None else 0

    def patent_count(self, topic_id: str, year: int) -> int:
        return self.patents.get(topic_id, {}).get(year, 0)

    def counts_series(self, topic_id: str) -> dict[int, int]:
        return {y: r.publications for y, r in self.records.get(topic_id, {}).items()}

    def _normalized(self, count: int, year: int) -> float:
        if count == 0:
            return 0.0
        stats = self.global_stats.get(year)
        if stats is None:
            raise CorpusError(f"no global stats for year {year} (needed as denominator)")
        return popularity(count, stats.medline_total)

    def popularity(self, topic_id: str, year: int) -> float:
        return self._normalized(self.publications(topic_id, year), year)

    def review_popularity(self, topic_id: str, year: int) -> float:
        return self._normalized(self.review_publications(topic_id, year), year)

    def research_popularity(self, topic_id: str, year: int) -> float:
        return self._normalized(self.research_publications(topic_id, year), year)

    def popularity_point(self, topic_id: str, year: int) -> PopularityPoint:
        return PopularityPoint(
            topic_id=topic_id,
            year=year,
            popularity=self.popularity(topic_id, year),
            review_popularity=self.review_popularity(topic_id, year),
            research_popularity=self.research_popularity(topic_id, year),
        )

    def series(self, topic_id: str) -> list[PopularityPoint]:
        return [self.popularity_point(topic_id, y) for y in self.years(topic_id)]

    def mean_popularity_by_year(self) -> dict[int, float]:
        """Arithmetic mean popularity over topics with a record that year."""
        sums: dict[int, float] = {}
        counts: dict[int, int] = {}
        for topic_id, by_year in self.records.items():
            for year in by_year:
                sums[year] = sums.get(year, 0.0) + self.popularity(topic_id, year)
                counts[year] = counts.get(year, 0) + 1
        return {y: sums[y] / counts[y] for y in sorted(sums)}

    @staticmethod
    def from_tables(
        counts: Iterable[tuple[str, int, int, int]],
        global_stats: Iterable[tuple[int, int, float, int]],
        patents: Iterable[tuple[str, int, int]] = (),
        embeddings: Optional[EmbeddingTable] = None,
        include_current: bool = False,
    ) -> "CorpusStore":
        """Build a store from in-memory rows, running the same validation
        as file ingestion.  counts rows are (topic, year, publications,
        review_publications); patents rows are (topic, year, patent_count)."""
        gs = {}
        for year, medline_total, us_frac, patents_total in global_stats:
            gs[year] = GlobalYearStats(year, medline_total, us_frac, patents_total)
        count_rows = [(canonical_topic_id(t), t, y, p, r) for t, y, p, r in counts]
        patent_rows = [(canonical_topic_id(t), y, c) for t, y, c in patents]
        return _assemble(count_rows, gs, patent_rows, embeddings,
                         include_current=include_current)


def _assemble(
    count_rows: list[tuple[str, str, int, int, int]],
    global_stats: dict[int, GlobalYearStats],
    patent_rows: list[tuple[str, int, int]],
    embeddings: Optional[EmbeddingTable],
    include_current: bool = False,
    counts_file: str = "<memory>",
) -> CorpusStore:
    patents: dict[str, dict[int, int]] = {}
    seen_topics = {cid for cid, *_ in count_rows}
    for cid, year, count in patent_rows:
        if cid not in seen_topics:
            logger.debug("patent row for unknown topic %r ignored", cid)
            continue
        patents.setdefault(cid, {})[year] = count

    records: dict[str, dict[int, YearlyTopicCount]] = {}
    display: dict[str, str] = {}
    for cid, raw_name, year, pubs, review in count_rows:
        by_year = records.setdefault(cid, {})
        by_year[year] = YearlyTopicCount(
            topic_id=cid, year=year, publications=pubs, review_publications=review,
            patent_count=patents.get(cid, {}).get(year, 0),
        )
        if cid not in display:
            display[cid] = _WHITESPACE.sub(" ", raw_name.strip())

    for cid, by_year in records.items():
        for year, rec in by_year.items():
            if rec.publications > 0 and year not in global_stats:
                raise CorpusError(
                    f"topic '{cid}' has publications in {year} but global_stats "
                    f"has no row for {year}", file=counts_file)

    missing_embeddings: list[str] = []
    if embeddings is not None:
        missing_embeddings = [cid for cid in sorted(records) if cid not in embeddings.vectors]
        if missing_embeddings:
            logger.warning("%d topics absent from the embedding table: %s",
                           len(missing_embeddings), ", ".join(missing_embeddings[:5]))

    meta = {}
    for cid in records:
        series = {y: r.publications for y, r in records[cid].items()}
        meta[cid] = TopicMeta(
            topic_id=cid,
            display_name=display[cid],
            first_occurrence_year=first_occurrence_year(series),
            first_valid_year=first_valid_year(series, include_current),
            training_start_year=training_start_year(series, include_current),
        )

    return CorpusStore(
        records=records,
        global_stats=global_stats,
        patents=patents,
        meta=meta,
        embeddings=embeddings,
        missing_embeddings=tuple(missing_embeddings),
    )


# --- file parsing ----------------------------------------------------------


def _read_rows(path: str | Path, expected_header: list[str] | None):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read file: {exc}", file=str(path)) from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CorpusError("file is empty", file=str(path))
    header = [h.strip() for h in rows[0]]
    if expected_header is not None and header != expected_header:
        raise CorpusError(
            f"bad header {header!r}, expected {expected_header!r}",
            file=str(path), line=1)
    return str(path), header, rows[1:]


def _parse_int(value: str, *, file: str, line: int, column: str,
               minimum: int | None = None, maximum: int | None = None) -> int:
    try:
        parsed = int(value)
    except ValueError:
        raise CorpusError(f"not an integer: {value!r}", file=file, line=line, column=column)
    if minimum is not None and parsed < minimum:
        raise CorpusError(f"value {parsed} below minimum {minimum}",
                          file=file, line=line, column=column)
    if maximum is not None and parsed > maximum:
        raise CorpusError(f"value {parsed} above maximum {maximum}",
                          file=file, line=line, column=column)
    return parsed


def _parse_float(value: str, *, file: str, line: int, column: str,
                 lo: float | None = None, hi: float | None = None) -> float:
    try:
        parsed = float(value)
    except ValueError:
        raise CorpusError(f"not a number: {value!r}", file=file, line=line, column=column)
    if not np.isfinite(parsed):
        raise CorpusError(f"not finite: {value!r}", file=file, line=line, column=column)
    if lo is not None and parsed < lo or hi is not None and parsed > hi:
        raise CorpusError(f"value {parsed} outside [{lo}, {hi}]",
                          file=file, line=line, column=column)
    return parsed


def _load_topic_counts(path: str | Path) -> tuple[str, list[tuple[str, str, int, int, int]]]:
    file, _, rows = _read_rows(path, TOPIC_COUNTS_HEADER)
    parsed: list[tuple[str, str, int, int, int]] = []
    seen: set[tuple[str, int]] = set()
    for i, row in enumerate(rows, start=2):
        if len(row) != 4:
            raise CorpusError(f"expected 4 fields, got {len(row)}", file=file, line=i,
                              column=TOPIC_COUNTS_HEADER[min(len(row), 3)])
        raw_name = row[0]
        cid = canonical_topic_id(raw_name)
        if not cid:
            raise CorpusError("empty topic name", file=file, line=i, column="topic")
        year = _parse_int(row[1], file=file, line=i, column="year",
                          minimum=EARLIEST_YEAR, maximum=LATEST_YEAR)
        pubs = _parse_int(row[2], file=file, line=i, column="publications", minimum=0)
        review = _parse_int(row[3], file=file, line=i, column="review_publications", minimum=0)
        if review > pubs:
            raise CorpusError(
                f"review count {review} exceeds publications {pubs}",
                file=file, line=i, column="review_publications")
        if (cid, year) in seen:
            raise CorpusError(f"duplicate record for topic '{cid}', year {year}",
                              file=file, line=i, column="topic")
        seen.add((cid, year))
        parsed.append((cid, raw_name, year, pubs, review))
    return file, parsed


def _load_global_stats(path: str | Path) -> dict[int, GlobalYearStats]:
    file, _, rows = _read_rows(path, GLOBAL_STATS_HEADER)
    stats: dict[int, GlobalYearStats] = {}
    for i, row in enumerate(rows, start=2):
        if len(row) != 4:
            raise CorpusError(f"expected 4 fields, got {len(row)}", file=file, line=i,
                              column=GLOBAL_STATS_HEADER[min(len(row), 3)])
        year = _parse_int(row[0], file=file, line=i, column="year", minimum=1000, maximum=9999)
        total = _parse_int(row[1], file=file, line=i, column="medline_total", minimum=1)
        frac = _parse_float(row[2], file=file, line=i, column="us_publication_fraction",
                            lo=0.0, hi=1.0)
        patents_total = _parse_int(row[3], file=file, line=i, column="patents_total", minimum=0)
        if year in stats:
            raise CorpusError(f"duplicate year {year}", file=file, line=i, column="year")
        stats[year] = GlobalYearStats(year, total, frac, patents_total)
    return stats


def _load_patents(path: str | Path) -> list[tuple[str, int, int]]:
    file, _, rows = _read_rows(path, PATENTS_HEADER)
    parsed: list[tuple[str, int, int]] = []
    seen: set[tuple[str, int]] = set()
    for i, row in enumerate(rows, start=2):
        if len(row) != 3:
            raise CorpusError(f"expected 3 fields, got {len(row)}", file=file, line=i,
                              column=PATENTS_HEADER[min(len(row), 2)])
        cid = canonical_topic_id(row[0])
        year = _parse_int(row[1], file=file, line=i, column="year", minimum=1000, maximum=9999)
        count = _parse_int(row[2], file=file, line=i, column="patent_count", minimum=0)
        if (cid, year) in seen:
            raise CorpusError(f"duplicate record for topic '{cid}', year {year}",
                              file=file, line=i, column="topic")
        seen.add((cid, year))
        parsed.append((cid, year, count))
    return parsed


def _load_embeddings(path: str | Path) -> EmbeddingTable:
    file, header, rows = _read_rows(path, None)
    if len(header) < 2 or header[0] != "topic":
        raise CorpusError(f"bad header {header!r}, expected topic,e0,...", file=file, line=1)
    dim = len(header) - 1
    expected = ["topic"] + [f"e{i}" for i in range(dim)]
    if header != expected:
        raise CorpusError(f"bad header {header!r}, expected {expected!r}", file=file, line=1)
    vectors: dict[str, np.ndarray] = {}
    for i, row in enumerate(rows, start=2):
        if len(row) != dim + 1:
            raise CorpusError(f"expected {dim + 1} fields, got {len(row)}",
                              file=file, line=i, column="topic")
        cid = canonical_topic_id(row[0])
        if cid in vectors:
            raise CorpusError(f"duplicate topic '{cid}'", file=file, line=i, column="topic")
        values = np.array(
            [_parse_float(v, file=file, line=i, column=f"e{j}") for j, v in enumerate(row[1:])],
            dtype=np.float64)
        vectors[cid] = values
    return EmbeddingTable(dim=dim, vectors=vectors)


def ingest(
    counts_path: str | Path,
    global_path: str | Path,
    patents_path: str | Path,
    embeddings_path: str | Path | None = None,
    include_current: bool = False,
) -> CorpusStore:
    """Read and validate the four input files into an immutable store."""
    counts_file, count_rows = _load_topic_counts(counts_path)
    global_stats = _load_global_stats(global_path)
    patent_rows = _load_patents(patents_path)
    embeddings = _load_embeddings(embeddings_path) if embeddings_path is not None else None
    return _assemble(count_rows, global_stats, patent_rows, embeddings,
                     include_current=include_current, counts_file=counts_file)


# --- canonical serialization ------------------------------------------------


def _format_float(x: float) -> str:
    return repr(float(x))


def topic_counts_csv(store: CorpusStore) -> str:
    lines = [",".join(TOPIC_COUNTS_HEADER)]
    for topic_id in store.topics():
        for year in store.years(topic_id):
            rec = store.records[topic_id][year]
            lines.append(f"{topic_id},{year},{rec.publications},{rec.review_publications}")
    return "\n".join(lines) + "\n"


def global_stats_csv(store: CorpusStore) -> str:
    lines = [",".join(GLOBAL_STATS_HEADER)]
    for year in sorted(store.global_stats):
        s = store.global_stats[year]
        lines.append(f"{year},{s.medline_total},{_format_float(s.us_publication_fraction)},"
                     f"{s.patents_total}")
    return "\n".join(lines) + "\n"


def patents_csv(store: CorpusStore) -> str:
    lines = [",".join(PATENTS_HEADER)]
    for topic_id in sorted(store.patents):
        for year in sorted(store.patents[topic_id]):
            lines.append(f"{topic_id},{year},{store.patents[topic_id][year]}")
    return "\n".join(lines) + "\n"


def embeddings_csv(store: CorpusStore) -> str:
    if store.embeddings is None:
        raise CorpusError("store has no embeddings to serialize")
    dim = store.embeddings.dim
    lines = [",".join(["topic"] + [f"e{i}" for i in range(dim)])]
    for topic_id in sorted(store.embeddings.vectors):
        vec = store.embeddings.vectors[topic_id]
        lines.append(",".join([topic_id] + [_format_float(v) for v in vec]))
    return "\n".join(lines) + "\n"


def export_corpus(store: CorpusStore, out_dir: str | Path) -> dict[str, Path]:
    """Write the canonical CSV files (sorted by topic, year) to a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, producer in [("topic_counts.csv", topic_counts_csv),
                           ("global_stats.csv", global_stats_csv),
                           ("patents.csv", patents_csv)]:
        path = out / name
        path.write_text(producer(store), encoding="utf-8")
        written[name] = path
    if store.embeddings is not None:
        path = out / "embeddings.csv"
        path.write_text(embeddings_csv(store), encoding="utf-8")
        written["embeddings.csv"] = path
    return written


def load_corpus_dir(corpus_dir: str | Path, include_current: bool = False) -> CorpusStore:
    """Ingest a directory holding the canonical CSV files."""
    d = Path(corpus_dir)
    embeddings = d / "embeddings.csv"
    return ingest(
        d / "topic_counts.csv",
        d / "global_stats.csv",
        d / "patents.csv",
        embeddings if embeddings.exists() else None,
        include_current=include_current,
    )
