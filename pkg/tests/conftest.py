import numpy as np
import pytest

from trendcast.corpus import CorpusStore, EmbeddingTable


def write_corpus_files(tmp_path, counts_rows, global_rows, patent_rows, embed_rows=None):
    """Write raw CSV inputs and return the four paths (embeddings may be None)."""
    counts = tmp_path / "topic_counts.csv"
    counts.write_text(
        "topic,year,publications,review_publications\n"
        + "".join(f"{t},{y},{p},{r}\n" for t, y, p, r in counts_rows))
    glob = tmp_path / "global_stats.csv"
    glob.write_text(
        "year,medline_total,us_publication_fraction,patents_total\n"
        + "".join(f"{y},{m},{f},{pt}\n" for y, m, f, pt in global_rows))
    patents = tmp_path / "patents.csv"
    patents.write_text(
        "topic,year,patent_count\n"
        + "".join(f"{t},{y},{c}\n" for t, y, c in patent_rows))
    embeds = None
    if embed_rows is not None:
        dim = len(embed_rows[0]) - 1
        embeds = tmp_path / "embeddings.csv"
        embeds.write_text(
            "topic," + ",".join(f"e{i}" for i in range(dim)) + "\n"
            + "".join(",".join(str(v) for v in row) + "\n" for row in embed_rows))
    return counts, glob, patents, embeds


def constant_popularity_store(level=100.0, start=1970, end=2024, topics=("alpha",)):
    """Store where every topic's popularity is exactly `level` each year."""
    total = 100_000
    count = int(level)
    assert count == level, "level must be integral for exact popularity"
    global_rows = [(y, total, 0.4, 50) for y in range(start, end + 1)]
    counts = [(t, y, count, count // 4) for t in topics for y in range(start, end + 1)]
    return CorpusStore.from_tables(counts, global_rows)


def ramp_popularity_store(start=1979, end=2024, topics=("ramp",)):
    """popularity(t) == t - 1978 exactly (medline_total fixed at 100000)."""
    global_rows = [(y, 100_000, 0.5, 10) for y in range(start - 12, end + 1)]
    counts = [(t, y, y - 1978, 0) for t in topics for y in range(start, end + 1)]
    return CorpusStore.from_tables(counts, global_rows)


@pytest.fixture
def three_topic_store():
    global_rows = [(y, 200_000 + 1_000 * (y - 2000), 0.4, 100 + y - 2000)
                   for y in range(1995, 2021)]
    counts = []
    for t, base in [("Stem Cells", 40), ("crispr", 10), ("Opioids", 25)]:
        for y in range(1995, 2021):
            pubs = base + (y - 1995) * 3
            counts.append((t, y, pubs, pubs // 5))
    patents = [("crispr", y, 2 * (y - 1995)) for y in range(1996, 2021)]
    return CorpusStore.from_tables(counts, global_rows, patents)


@pytest.fixture
def embedding_table():
    rng = np.random.default_rng(7)
    vectors = {t: rng.normal(size=4) for t in ["stem cells", "crispr", "opioids"]}
    return EmbeddingTable(dim=4, vectors=vectors)
