"""Least-squares gradient boosting with regression trees built from scratch.

Trees split greedily on variance reduction over sorted unique feature values,
thresholds at midpoints, missing values routed to the gain-maximizing side.
The topic categorical enters through an ordered target encoding appended as
one extra numeric column during fitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import FeatureSchema, FeatureTable
from .base import TrainParams, conform_table

# smallest gain worth a split; guards against float-noise partitions
_GAIN_TOL = 1e-12


@dataclass(frozen=True)
class EncodingTable:
    """Per-topic smoothed target means for inference plus the global fallback."""

    values: dict[str, float]
    prior_mean: float
    smoothing: float

    def lookup(self, topic_id: str) -> float:
        return self.values.get(topic_id, self.prior_mean)

    def column(self, topic_ids: np.ndarray) -> np.ndarray:
        return np.array([self.lookup(t) for t in topic_ids], dtype=np.float64)


def ordered_target_encode(
    topic_ids: np.ndarray,
    targets: np.ndarray,
    smoothing: float = 1.0,
) -> tuple[np.ndarray, EncodingTable]:
    """Encode topics against strictly earlier rows only.

    Rows must already be ordered by (base_year, topic_id). Row i gets
    (sum of earlier own targets + running prior mean * a) / (count + a);
    the very first row has no prior at all and falls back to 0.
    """
    if smoothing <= 0.0:
        raise ValueError("smoothing must be > 0")
    n = len(targets)
    encoded = np.empty(n, dtype=np.float64)
    own_sum: dict[str, float] = {}
    own_cnt: dict[str, int] = {}
    seen_sum = 0.0
    for i in range(n):
        tid = topic_ids[i]
        prior = seen_sum / i if i else 0.0
        s = own_sum.get(tid, 0.0)
        c = own_cnt.get(tid, 0)
        encoded[i] = (s + prior * smoothing) / (c + smoothing)
        t = float(targets[i])
        own_sum[tid] = s + t
        own_cnt[tid] = c + 1
        seen_sum += t
    global_mean = seen_sum / n if n else 0.0
    values = {
        tid: (own_sum[tid] + global_mean * smoothing) / (own_cnt[tid] + smoothing)
        for tid in own_sum
    }
    return encoded, EncodingTable(values=values, prior_mean=global_mean, smoothing=smoothing)


@dataclass(frozen=True)
class Tree:
    """Flat-array regression tree. feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def walk(i: int) -> int:
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)


def route_tree(tree: Tree, x: np.ndarray) -> np.ndarray:
    """Leaf node index for every row; x < threshold goes left, NaN follows
    the recorded direction."""
    node = np.zeros(x.shape[0], dtype=np.int64)
    while True:
        feat = tree.feature[node]
        live = np.flatnonzero(feat >= 0)
        if live.size == 0:
            break
        cur = node[live]
        xv = x[live, feat[live]]
        go_left = (xv < tree.threshold[cur]) | (np.isnan(xv) & tree.missing_left[cur])
        node[live] = np.where(go_left, tree.left[cur], tree.right[cur])
    return node


def predict_tree(tree: Tree, x: np.ndarray) -> np.ndarray:
    return tree.value[route_tree(tree, x)]


def _best_split(x: np.ndarray, resid: np.ndarray, rows: np.ndarray, min_leaf: int):
    """Return ((feature, threshold, missing_left), gain) or (None, 0).

    Gain = sum_L^2/n_L + sum_R^2/n_R - sum^2/n, the SSE drop from splitting.
    Ties break toward the lowest feature index, then missing-left, then the
    lowest threshold.
    """
    rr = resid[rows]
    total_sum = float(rr.sum())
    total_cnt = rows.size
    parent = total_sum * total_sum / total_cnt
    best = None
    best_gain = _GAIN_TOL
    for j in range(x.shape[1]):
        col = x[rows, j]
        miss = np.isnan(col)
        m_cnt = int(miss.sum())
        if total_cnt - m_cnt < 2:
            continue
        xo = col[~miss]
        ro = rr[~miss]
        order = np.argsort(xo, kind="stable")
        xs = xo[order]
        rs = ro[order]
        # candidate split points sit between consecutive distinct values
        bound = np.flatnonzero(xs[1:] != xs[:-1]) + 1
        if bound.size == 0:
            continue
        csum = np.cumsum(rs)
        left_obs_sum = csum[bound - 1]
        left_obs_cnt = bound
        m_sum = float(rr[miss].sum())
        thresholds = 0.5 * (xs[bound - 1] + xs[bound])
        for miss_left in (True, False):
            if miss_left:
                lsum = left_obs_sum + m_sum
                lcnt = left_obs_cnt + m_cnt
            else:
                lsum = left_obs_sum
                lcnt = left_obs_cnt
            rcnt = total_cnt - lcnt
            rsum = total_sum - lsum
            ok = (lcnt >= min_leaf) & (rcnt >= min_leaf)
            if ok.any():
                gain = np.where(
                    ok,
                    lsum * lsum / np.maximum(lcnt, 1)
                    + rsum * rsum / np.maximum(rcnt, 1)
                    - parent,
                    -np.inf,
                )
                gi = int(np.argmax(gain))
                if float(gain[gi]) > best_gain:
                    best_gain = float(gain[gi])
                    best = (j, float(thresholds[gi]), miss_left)
            if m_cnt == 0:
                break  # no missing rows: both directions are the same split
    if best is None:
        return None, 0.0
    return best, best_gain


def _grow_tree(x: np.ndarray, resid: np.ndarray, params: TrainParams) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    missing_left: list[bool] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def build(rows: np.ndarray, depth: int) -> int:
        idx = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        missing_left.append(True)
        left.append(-1)
        right.append(-1)
        value.append(float(resid[rows].mean()))
        if depth >= params.max_depth or rows.size < 2 * params.min_samples_leaf:
            return idx
        split, _ = _best_split(x, resid, rows, params.min_samples_leaf)
        if split is None:
            return idx
        f, thr, mleft = split
        col = x[rows, f]
        go_left = (col < thr) | (np.isnan(col) & mleft)
        li = build(rows[go_left], depth + 1)
        ri = build(rows[~go_left], depth + 1)
        feature[idx] = f
        threshold[idx] = thr
        missing_left[idx] = mleft
        left[idx] = li
        right[idx] = ri
        return idx

    build(np.arange(x.shape[0]), 0)
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        missing_left=np.array(missing_left, dtype=bool),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


@dataclass(frozen=True)
class GbdtModel:
    schema: FeatureSchema
    f0: float
    learning_rate: float
    trees: tuple[Tree, ...]
    encoding: EncodingTable
    params: TrainParams
    train_mse: tuple[float, ...]

    model_kind = "gbdt"

    def _design(self, table: FeatureTable) -> np.ndarray:
        enc = self.encoding.column(table.topic_ids)
        return np.concatenate([table.X, enc[:, None]], axis=1)

    def predict(self, table: FeatureTable) -> np.ndarray:
        table = conform_table(table, self.schema.feature_names)
        x = self._design(table)
        out = np.full(x.shape[0], self.f0, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * predict_tree(tree, x)
        return out


def _temporal_order(table: FeatureTable) -> np.ndarray:
    tids = np.asarray(table.topic_ids, dtype="U")
    return np.lexsort((tids, table.base_years))


def fit_gbdt(
    table: FeatureTable,
    targets: np.ndarray,
    params: TrainParams = TrainParams(),
) -> GbdtModel:
    params.validate()
    y = np.asarray(targets, dtype=np.float64)
    if len(table) == 0:
        raise ValueError("cannot fit on zero rows")
    if y.shape != (len(table),):
        raise ValueError("targets length does not match table rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")

    order = _temporal_order(table)
    enc_sorted, enc_table = ordered_target_encode(
        table.topic_ids[order], y[order], params.smoothing
    )
    enc = np.empty(len(table), dtype=np.float64)
    enc[order] = enc_sorted
    x = np.concatenate([table.X, enc[:, None]], axis=1)

    f0 = float(y.mean())
    current = np.full(len(table), f0, dtype=np.float64)
    trees: list[Tree] = []
    mse_curve: list[float] = []
    prev = float(np.mean((y - current) ** 2))
    for _ in range(params.rounds):
        resid = y - current
        tree = _grow_tree(x, resid, params)
        current = current + params.learning_rate * predict_tree(tree, x)
        mse = float(np.mean((y - current) ** 2))
        if mse > prev * (1.0 + 1e-12) + 1e-12:
            raise AssertionError("training MSE increased between rounds")
        prev = mse
        mse_curve.append(mse)
        trees.append(tree)
    return GbdtModel(
        schema=table.schema,
        f0=f0,
        learning_rate=params.learning_rate,
        trees=tuple(trees),
        encoding=enc_table,
        params=params,
        train_mse=tuple(mse_curve),
    )
