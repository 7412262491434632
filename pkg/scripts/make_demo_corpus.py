#!/usr/bin/env python3
"""Write the synthetic leading-indicator corpus as raw CSV inputs.

The output directory will hold topic_counts.csv, global_stats.csv and
patents.csv, the same shapes `trendcast ingest` expects, so the demo
pipeline can be driven end to end without any real data.
"""

import argparse
from pathlib import Path

from trendcast.corpus import global_stats_csv, patents_csv, topic_counts_csv
from trendcast.synthetic import SyntheticConfig, make_leading_indicator_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output directory")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--topics", type=int, default=50)
    args = ap.parse_args()

    corpus = make_leading_indicator_corpus(
        SyntheticConfig(seed=args.seed, n_topics=args.topics))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "topic_counts.csv").write_text(topic_counts_csv(corpus.store))
    (out / "global_stats.csv").write_text(global_stats_csv(corpus.store))
    (out / "patents.csv").write_text(patents_csv(corpus.store))
    declining = sum(1 for y in corpus.decline_year.values() if y is not None)
    print(f"wrote {args.topics} topics to {out} ({declining} with engineered declines)")


if __name__ == "__main__":
    main()
