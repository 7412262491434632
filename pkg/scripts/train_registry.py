#!/usr/bin/env python3
"""Train the full serving registry: one pop and one pct model per horizon.

Writes h{N}_pop.json / h{N}_pct.json into --out, which is exactly the
layout `trendcast serve --model-dir` loads.  Level models are ridge fits;
direction models are boosted trees.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from trendcast.corpus import ingest
from trendcast.features import build_feature_rows
from trendcast.models import TrainParams, fit_gbdt, fit_ridge_cv, save_model
from trendcast.service import registry_filename


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--counts", required=True)
    ap.add_argument("--global", dest="global_", required=True)
    ap.add_argument("--patents", required=True)
    ap.add_argument("--embeddings", default=None)
    ap.add_argument("--out", required=True, help="registry directory")
    ap.add_argument("--horizons", type=int, default=6)
    ap.add_argument("--from", dest="from_year", type=int, default=1979)
    ap.add_argument("--to", dest="to_year", type=int, default=2019)
    ap.add_argument("--rounds", type=int, default=300)
    ap.add_argument("--max-depth", type=int, default=4)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    store = ingest(args.counts, args.global_, args.patents, args.embeddings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = TrainParams(rounds=args.rounds, max_depth=args.max_depth,
                         seed=args.seed)

    for h in range(1, args.horizons + 1):
        t0 = time.time()
        table = build_feature_rows(store, h,
                                   embedding_on=args.embeddings is not None)
        table = table.restrict_years(args.from_year, args.to_year)

        y_pop = table.targets("pop")
        keep = ~np.isnan(y_pop)
        pop_model = fit_ridge_cv(table.filter(keep), y_pop[keep],
                                 alpha_grid=(0.1, 1.0, 10.0), k_folds=5)
        save_model(pop_model, out / registry_filename(h, "pop"))

        y_pct = table.targets("pct")
        keep = ~np.isnan(y_pct)
        pct_model = fit_gbdt(table.filter(keep), y_pct[keep], params)
        save_model(pct_model, out / registry_filename(h, "pct"))

        print(f"h={h}: {int(keep.sum())} pct rows, "
              f"alpha={pop_model.chosen_alpha}, {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
