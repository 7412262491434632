"""Seeded synthetic corpus with engineered leading indicators.

The generator doubles as the benchmark oracle: popularity growth follows an
AR(1) process plus a coupling to the topic's patent activity from two years
earlier, and a burst of review articles is injected three years before each
engineered decline. A model that reads the exogenous columns therefore has
strictly more signal available than the pure momentum baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CorpusStore


@dataclass(frozen=True)
class SyntheticConfig:
    n_topics: int = 50
    start_year: int = 1975
    n_years: int = 45
    seed: int = 42
    ar_coefficient: float = 0.7
    patent_coupling: float = 10.0
    growth_noise: float = 1.2
    decline_fraction: float = 0.4
    decline_rate: float = -12.0
    decline_duration: int = 5
    review_base_share: float = 0.15
    review_excess_share: float = 0.35
    review_lead: int = 3
    medline_total: int = 1_000_000


@dataclass(frozen=True)
class SyntheticCorpus:
    store: CorpusStore
    decline_year: dict[str, int | None]
    config: SyntheticConfig


def _patent_series(rng, n_years: int) -> tuple[np.ndarray, float]:
    """Autocorrelated patent counts around a topic-specific mean."""
    mean = rng.uniform(8.0, 60.0)
    level = mean
    out = np.empty(n_years)
    for i in range(n_years):
        level = mean + 0.8 * (level - mean) + rng.normal(0.0, 0.18 * mean)
        out[i] = max(0.0, round(level))
    return out.astype(np.int64), mean


def make_leading_indicator_corpus(config: SyntheticConfig = SyntheticConfig()) -> SyntheticCorpus:
    rng = np.random.default_rng(config.seed)
    years = list(range(config.start_year, config.start_year + config.n_years))
    last_year = years[-1]

    n_decliners = round(config.decline_fraction * config.n_topics)
    decliner_idx = set(rng.choice(config.n_topics, size=n_decliners, replace=False).tolist())

    counts_rows = []
    patent_rows = []
    decline_year: dict[str, int | None] = {}
    patents_by_year = {y: 0 for y in years}

    for i in range(config.n_topics):
        topic = f"topic{i:02d}"
        patents, patent_mean = _patent_series(rng, config.n_years)
        # relative deviation of patent activity; feeds growth two years later
        q = (patents - patent_mean) / patent_mean

        d_year: int | None = None
        if i in decliner_idx:
            d_year = int(rng.integers(1993, 2011))
        decline_year[topic] = d_year

        drift = rng.normal(1.0, 2.0)
        growth = drift
        level = rng.uniform(80.0, 400.0)
        for k, y in enumerate(years):
            in_decline = d_year is not None and d_year <= y < d_year + config.decline_duration
            if in_decline:
                growth = config.decline_rate + rng.normal(0.0, 1.0)
            else:
                coupled = config.patent_coupling * q[k - 2] if k >= 2 else 0.0
                growth = (
                    drift
                    + config.ar_coefficient * (growth - drift)
                    + coupled
                    + rng.normal(0.0, config.growth_noise)
                )
            growth = float(np.clip(growth, -30.0, 40.0))
            level = max(20.0, level * (1.0 + growth / 100.0))

            pre_decline = (
                d_year is not None
                and d_year - config.review_lead <= y < d_year + 2
            )
            share = config.review_excess_share if pre_decline else config.review_base_share
            share = float(np.clip(share + rng.normal(0.0, 0.01), 0.05, 0.5))

            pubs = int(round(level))
            reviews = int(round(pubs * share))
            counts_rows.append((topic, y, pubs, reviews))
            patent_rows.append((topic, y, int(patents[k])))
            patents_by_year[y] += int(patents[k])

    global_rows = [
        (y, config.medline_total, 0.45, patents_by_year[y] + 500)
        for y in years
    ]
    store = CorpusStore.from_tables(counts_rows, global_rows, patent_rows)
    return SyntheticCorpus(store=store, decline_year=decline_year, config=config)
