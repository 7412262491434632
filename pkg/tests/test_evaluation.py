import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from trendcast.corpus import CorpusStore
from trendcast.evaluation import (
    ExperimentConfig,
    MoverEntry,
    binary_trend_accuracy,
    correlation_csv,
    correlation_profile,
    experiment_csv,
    experiment_text,
    pearson_lagged,
    permutation_importance,
    rank_movers,
    regression_metrics,
    run_experiment,
    run_experiment_on_table,
    temporal_splits,
    topic_splits,
)
from trendcast.features import FeatureSchema, FeatureTable
from trendcast.models import TrainParams, fit_gbdt, fit_ridge_cv


def make_table(X, names=None, topic_ids=None, base_years=None):
    n, d = X.shape
    names = tuple(names or (f"f{i}" for i in range(d)))
    dim = sum(1 for nm in names if nm.startswith("embed_"))
    return FeatureTable(
        schema=FeatureSchema(feature_names=names, embedding_dim=dim),
        topic_ids=np.array(topic_ids if topic_ids is not None else ["t"] * n, dtype=object),
        base_years=np.array(base_years if base_years is not None else np.arange(n), dtype=np.int64),
        X=np.asarray(X, dtype=np.float64),
        target_pop=np.zeros(n),
        target_pct=np.zeros(n),
        horizon=1,
    )


class TestTemporalSplits:
    def test_41_years_30_splits(self):
        base_years = np.repeat(np.arange(1979, 2020), 3)
        plan = temporal_splits(base_years, 30)
        assert plan.n_splits == 30
        assert len(plan.folds) == 30
        train0, test0 = plan.folds[0]
        assert set(base_years[train0]) == set(range(1979, 1990))
        assert set(base_years[test0]) == {1990}
        for i, (_, test_idx) in enumerate(plan.folds):
            assert set(base_years[test_idx]) == {1990 + i}
        _, last_test = plan.folds[-1]
        assert set(base_years[last_test]) == {2019}

    def test_minimal_two_years(self):
        base_years = np.array([2000, 2000, 2001])
        plan = temporal_splits(base_years, 1)
        train, test = plan.folds[0]
        assert set(base_years[train]) == {2000}
        assert set(base_years[test]) == {2001}

    def test_too_few_years_message_states_minimum(self):
        with pytest.raises(ValueError, match="31"):
            temporal_splits(np.arange(1990, 2000), 30)

    @settings(max_examples=100, deadline=None)
    @given(
        years=st.lists(st.integers(1950, 2030), min_size=3, max_size=60),
        n_splits=st.integers(1, 5),
    )
    def test_order_invariant(self, years, n_splits):
        base_years = np.array(years)
        assume(len(np.unique(base_years)) >= n_splits + 1)
        plan = temporal_splits(base_years, n_splits)
        seen_tests = []
        prev_train_size = -1
        for train_idx, test_idx in plan.folds:
            assert len(test_idx) > 0
            if len(train_idx):
                assert base_years[train_idx].max() < base_years[test_idx].min()
            seen_tests.append(set(test_idx.tolist()))
            assert len(train_idx) > prev_train_size
            prev_train_size = len(train_idx)
            # train is exactly everything strictly before the test block
            expected = np.flatnonzero(base_years < base_years[test_idx].min())
            assert np.array_equal(np.sort(train_idx), expected)
        for i in range(len(seen_tests)):
            for j in range(i + 1, len(seen_tests)):
                assert not (seen_tests[i] & seen_tests[j])


class TestTopicSplits:
    def test_125_topics_30_folds_sizes(self):
        topics = np.array([f"topic{i:03d}" for i in range(125)], dtype=object)
        plan = topic_splits(topics, 30, seed=5)
        sizes = sorted(len(test) for _, test in plan.folds)
        assert sizes == [4] * 25 + [5] * 5

    def test_two_topics_two_folds(self):
        rows = np.array(["a", "b", "a", "b"], dtype=object)
        plan = topic_splits(rows, 2, seed=0)
        test_topic_sets = [set(rows[test]) for _, test in plan.folds]
        assert sorted(map(tuple, test_topic_sets)) == [("a",), ("b",)]

    def test_too_few_topics(self):
        with pytest.raises(ValueError, match="30"):
            topic_splits(np.array(["a", "b"], dtype=object), 30)

    def test_seed_changes_assignment(self):
        topics = np.array([f"t{i}" for i in range(40)], dtype=object)
        p1 = topic_splits(topics, 4, seed=1)
        p2 = topic_splits(topics, 4, seed=2)
        sets1 = [set(topics[test]) for _, test in p1.folds]
        sets2 = [set(topics[test]) for _, test in p2.folds]
        assert sets1 != sets2

    @settings(max_examples=100, deadline=None)
    @given(
        assignment=st.lists(st.integers(0, 9), min_size=2, max_size=50),
        n_folds=st.integers(2, 6),
        seed=st.integers(0, 100),
    )
    def test_groupwise_invariants(self, assignment, n_folds, seed):
        topic_ids = np.array([f"topic{a}" for a in assignment], dtype=object)
        assume(len(set(topic_ids)) >= n_folds)
        plan = topic_splits(topic_ids, n_folds, seed)
        tested_topics = []
        for train_idx, test_idx in plan.folds:
            train_topics = set(topic_ids[train_idx])
            test_topics = set(topic_ids[test_idx])
            assert not (train_topics & test_topics)
            tested_topics.extend(test_topics)
            assert len(train_idx) + len(test_idx) == len(topic_ids)
        assert sorted(tested_topics) == sorted(set(topic_ids))


def brute_metrics(y, p):
    n = len(y)
    errs = sorted(abs(a - b) for a, b in zip(y, p))
    mae = sum(errs) / n
    medae = (errs[(n - 1) // 2] + errs[n // 2]) / 2
    rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(y, p)) / n)
    ybar = sum(y) / n
    sst = sum((a - ybar) ** 2 for a in y)
    r2 = 1 - sum((a - b) ** 2 for a, b in zip(y, p)) / sst if sst else math.nan
    return r2, mae, medae, rmse


class TestRegressionMetrics:
    def test_perfect_prediction(self):
        m = regression_metrics(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0]))
        assert m.r2 == 1.0
        assert m.mae == 0.0
        assert m.medae == 0.0
        assert m.rmse == 0.0
        assert m.n == 3

    def test_mean_predictor_hand_values(self):
        m = regression_metrics(np.array([1.0, 2.0, 3.0]), np.array([2.0, 2.0, 2.0]))
        assert m.r2 == pytest.approx(0.0, abs=1e-12)
        assert m.mae == pytest.approx(2 / 3)
        assert m.medae == pytest.approx(1.0)
        assert m.rmse == pytest.approx(math.sqrt(2 / 3))

    def test_zero_variance_r2_undefined(self):
        m = regression_metrics(np.array([4.0, 4.0, 4.0]), np.array([4.0, 5.0, 3.0]))
        assert math.isnan(m.r2)
        assert m.mae == pytest.approx(2 / 3)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            regression_metrics(np.array([]), np.array([]))
        with pytest.raises(ValueError):
            regression_metrics(np.array([1.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            regression_metrics(np.array([np.nan]), np.array([1.0]))

    @settings(max_examples=200, deadline=None)
    @given(
        pairs=st.lists(
            st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)),
            min_size=1,
            max_size=100,
        )
    )
    def test_matches_brute_force_and_rmse_dominates_mae(self, pairs):
        y = np.array([a for a, _ in pairs])
        p = np.array([b for _, b in pairs])
        m = regression_metrics(y, p)
        r2, mae, medae, rmse = brute_metrics(list(y), list(p))
        assert math.isclose(m.mae, mae, rel_tol=1e-9, abs_tol=1e-9)
        assert math.isclose(m.medae, medae, rel_tol=1e-9, abs_tol=1e-9)
        assert math.isclose(m.rmse, rmse, rel_tol=1e-9, abs_tol=1e-9)
        if math.isnan(r2):
            assert math.isnan(m.r2)
        else:
            assert math.isclose(m.r2, r2, rel_tol=1e-9, abs_tol=1e-9)
        assert m.rmse >= m.mae - 1e-12


class TestBinaryTrend:
    def test_identical(self):
        v = np.array([1.0, -2.0, 3.0])
        acc, _ = binary_trend_accuracy(v, v)
        assert acc == 1.0

    def test_hand_count(self):
        true = np.array([5.0, -3.0, 2.0, 1.0])
        pred = np.ones(4)
        acc, base = binary_trend_accuracy(true, pred)
        assert acc == 0.75
        assert base == 0.75

    def test_sign_inversion(self):
        true = np.array([1.0, -2.0, 3.0, -4.0])
        acc, _ = binary_trend_accuracy(true, -true)
        assert acc == 0.0

    def test_zero_is_not_up(self):
        acc, base = binary_trend_accuracy(np.array([0.0, 1.0]), np.array([-1.0, 2.0]))
        assert acc == 1.0
        assert base == 0.5

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            binary_trend_accuracy(np.array([]), np.array([]))


class TestPearsonLagged:
    def test_self_correlation(self):
        a = {y: float(y % 7) for y in range(2000, 2020)}
        assert pearson_lagged(a, a, 0) == pytest.approx(1.0)

    def test_constructed_lead(self):
        rng = np.random.default_rng(0)
        a = {y: float(v) for y, v in zip(range(2000, 2030), rng.normal(size=30))}
        b = {y - 2: a[y] for y in a}
        assert pearson_lagged(a, b, 2) == pytest.approx(1.0)

    def test_independent_noise_band(self):
        rng = np.random.default_rng(1)
        a = {y: float(v) for y, v in zip(range(3000), rng.normal(size=3000))}
        b = {y: float(v) for y, v in zip(range(3000), rng.normal(size=3000))}
        assert abs(pearson_lagged(a, b, 0)) < 0.1

    def test_insufficient_overlap_flagged(self):
        a = {2000: 1.0, 2001: 2.0}
        assert math.isnan(pearson_lagged(a, a, 0))
        far = {1900: 1.0, 1901: 2.0, 1902: 3.0}
        near = {2000: 1.0, 2001: 2.0, 2002: 3.0}
        assert math.isnan(pearson_lagged(near, far, 0))

    def test_zero_variance_flagged(self):
        a = {y: 5.0 for y in range(2000, 2010)}
        b = {y: float(y) for y in range(2000, 2010)}
        assert math.isnan(pearson_lagged(a, b, 0))

    @settings(max_examples=100, deadline=None)
    @given(
        vals_a=st.lists(st.floats(-100, 100), min_size=8, max_size=25),
        vals_b=st.lists(st.floats(-100, 100), min_size=8, max_size=25),
        lag=st.integers(-4, 4),
    )
    def test_symmetry(self, vals_a, vals_b, lag):
        a = {2000 + i: v for i, v in enumerate(vals_a)}
        b = {2000 + i: v for i, v in enumerate(vals_b)}
        ab = pearson_lagged(a, b, lag)
        ba = pearson_lagged(b, a, -lag)
        if math.isnan(ab):
            assert math.isnan(ba)
        else:
            assert math.isclose(ab, ba, rel_tol=1e-9, abs_tol=1e-12)

    def test_profile_collects_lags(self):
        rng = np.random.default_rng(2)
        a = {y: float(v) for y, v in zip(range(2000, 2040), rng.normal(size=40))}
        b = {y - 3: a[y] for y in a}
        profile = correlation_profile("crispr", "patents", a, b, [-1, 0, 3])
        assert profile.lags == (-1, 0, 3)
        assert profile.r_values[2] == pytest.approx(1.0)
        assert profile.n_overlaps[2] == 40
        # lag -1 pairs a(t) with b(t+1), which exists for t <= 2035
        assert profile.n_overlaps[0] == 36


class TestPermutationImportance:
    def test_unused_feature_zero_degradation(self):
        rng = np.random.default_rng(3)
        x = np.column_stack([rng.normal(size=120), np.zeros(120)])
        y = np.where(x[:, 0] > 0, 4.0, -4.0)
        model = fit_gbdt(make_table(x), y, TrainParams(rounds=20, max_depth=2, min_samples_leaf=5))
        imp = permutation_importance(model, make_table(x), y, seed=1)
        assert abs(imp["f1"]) < 1e-9
        assert imp["f0"] > 0.5

    def test_single_feature_collapse(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(300, 1))
        y = 3.0 * x[:, 0]
        model = fit_ridge_cv(make_table(x), y, alpha_grid=(0.1,), k_folds=3)
        imp = permutation_importance(model, make_table(x), y, seed=2)
        assert imp["f0"] > 0.8

    def test_same_seed_identical(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(80, 3))
        y = x @ np.array([1.0, -2.0, 0.5]) + rng.normal(0, 0.1, 80)
        model = fit_ridge_cv(make_table(x), y, alpha_grid=(1.0,), k_folds=2)
        i1 = permutation_importance(model, make_table(x), y, seed=9)
        i2 = permutation_importance(model, make_table(x), y, seed=9)
        assert i1 == i2

    def test_embedding_group_aggregate(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(100, 3))
        y = x @ np.array([0.5, 2.0, -1.0])
        names = ("pop_lag0", "embed_0", "embed_1")
        table = make_table(x, names=names)
        model = fit_ridge_cv(table, y, alpha_grid=(0.1,), k_folds=2)
        imp = permutation_importance(model, table, y, seed=3)
        assert "embedding" in imp
        assert imp["embedding"] == pytest.approx(imp["embed_0"] + imp["embed_1"])


class TestRankMovers:
    def fixture(self):
        return [
            MoverEntry("alpha", 2017, 10.0, 5.0),
            MoverEntry("beta", 2017, -20.0, -3.0),
            MoverEntry("gamma", 2017, 3.0, -1.0),
            MoverEntry("delta", 2017, -1.0, 2.0),
            MoverEntry("epsilon", 2017, 0.0, 4.0),
        ]

    def test_hand_sorted_sections(self):
        report = rank_movers(self.fixture())
        assert [e.topic_id for e in report.up] == ["alpha", "gamma"]
        assert [e.topic_id for e in report.down] == ["beta", "delta", "epsilon"]
        assert [e.topic_id for e in report.reversals] == ["gamma", "delta", "epsilon"]

    def test_partition_property(self):
        report = rank_movers(self.fixture())
        listed = sorted(e.topic_id for e in report.up + report.down)
        assert listed == sorted(e.topic_id for e in self.fixture())

    def test_all_positive_empty_down(self):
        entries = [MoverEntry(f"t{i}", 2020, float(i + 1), 1.0) for i in range(4)]
        report = rank_movers(entries)
        assert report.down == ()
        assert len(report.up) == 4

    def test_rising_into_base_predicted_fall_is_reversal(self):
        entries = [MoverEntry("hot", 2020, -5.0, 12.0)]
        report = rank_movers(entries)
        assert [e.topic_id for e in report.reversals] == ["hot"]

    def test_nan_trailing_excluded_from_reversals(self):
        entries = [MoverEntry("new", 2020, 5.0, math.nan)]
        report = rank_movers(entries)
        assert report.reversals == ()
        assert [e.topic_id for e in report.up] == ["new"]

    def test_mixed_base_years_error(self):
        entries = [MoverEntry("a", 2019, 1.0, 1.0), MoverEntry("b", 2020, 1.0, 1.0)]
        with pytest.raises(ValueError):
            rank_movers(entries)


def persistent_store(levels=(("alpha", 50), ("beta", 200)), start=1946, end=2019):
    total = 100_000
    global_rows = [(y, total, 0.4, 10) for y in range(start, end + 1)]
    counts = [(t, y, c, c // 5) for t, c in levels for y in range(start, end + 1)]
    return CorpusStore.from_tables(counts, global_rows)


class TestRunExperiment:
    def test_persistent_baseline_pooled_r2_is_one(self):
        store = persistent_store()
        config = ExperimentConfig(horizon=5, n_splits=5, cv_folds=2)
        result = run_experiment(store, "baseline", "pop", "temporal", config)
        assert result.pooled.r2 == pytest.approx(1.0, abs=1e-3)
        assert result.pooled.r2 > 0.999
        assert result.pooled.mae < 0.5
        assert len(result.fold_reports) == 5

    def test_same_seed_identical_reports(self):
        store = persistent_store()
        config = ExperimentConfig(
            horizon=3, n_splits=4, cv_folds=2, seed=11,
            train=TrainParams(rounds=10, max_depth=2, min_samples_leaf=5),
        )
        r1 = run_experiment(store, "gbdt", "pop", "temporal", config)
        r2 = run_experiment(store, "gbdt", "pop", "temporal", config)
        assert r1 == r2

    def test_pct_rows_with_undefined_target_excluded(self):
        total = 100_000
        years = [y for y in range(1979, 2020) if y != 1990]
        global_rows = [(y, total, 0.4, 10) for y in range(1979, 2020)]
        counts = [("ramp", y, y - 1978, 0) for y in years]
        store = CorpusStore.from_tables(counts, global_rows)
        config = ExperimentConfig(horizon=1, n_splits=5, cv_folds=2)
        pop_run = run_experiment(store, "baseline", "pop", "temporal", config)
        pct_run = run_experiment(store, "baseline", "pct", "temporal", config)
        # pop: 36 base years -> test blocks of 6; pct drops the zero-pop 1990 row
        assert pop_run.pooled.n == 30
        assert pct_run.pooled.n == 25

    def test_topic_split_run(self):
        store = persistent_store(
            levels=(("a", 10), ("b", 40), ("c", 160), ("d", 640)),
        )
        config = ExperimentConfig(
            horizon=2, n_splits=2, seed=3, cv_folds=2,
            train=TrainParams(rounds=15, max_depth=2, min_samples_leaf=5),
        )
        result = run_experiment(store, "gbdt", "pop", "topic", config)
        assert result.split_kind == "topic"
        assert len(result.fold_reports) == 2
        total_rows = sum(r.n for r in result.fold_reports)
        assert result.pooled.n == total_rows

    def test_unknown_kinds_rejected(self):
        store = persistent_store()
        with pytest.raises(ValueError):
            run_experiment(store, "forest", "pop", "temporal")
        with pytest.raises(ValueError):
            run_experiment(store, "ridge", "level", "temporal")
        with pytest.raises(ValueError):
            run_experiment(store, "ridge", "pop", "random")


class TestReportEmission:
    def _result(self):
        store = persistent_store()
        config = ExperimentConfig(horizon=5, n_splits=3, cv_folds=2)
        return run_experiment(store, "baseline", "pct", "temporal", config)

    def test_csv_layout(self):
        result = self._result()
        text = experiment_csv([result])
        lines = text.strip().split("\n")
        assert lines[0] == "model,target,split,fold,r2,mae,medae,rmse,binary_acc,baseline_acc,n"
        assert len(lines) == 1 + 3 + 1
        assert lines[1].startswith("baseline,pct,temporal,0,")
        assert lines[-1].split(",")[3] == "pooled"
        # every numeric cell parses back (empty = undefined)
        for line in lines[1:]:
            for cell in line.split(",")[4:]:
                if cell:
                    float(cell)

    def test_text_table_alignment(self):
        result = self._result()
        text = experiment_text([result])
        lines = text.strip().split("\n")
        assert lines[0].split()[:4] == ["model", "target", "split", "r2"]
        assert len(lines) == 2
        assert "baseline" in lines[1]

    def test_correlation_csv(self):
        rng = np.random.default_rng(8)
        a = {y: float(v) for y, v in zip(range(2000, 2020), rng.normal(size=20))}
        profile = correlation_profile("crispr", "patents", a, a, [0, 1])
        text = correlation_csv([profile])
        lines = text.strip().split("\n")
        assert lines[0] == "topic,indicator,lag,r,n_overlap"
        assert lines[1].split(",")[0] == "crispr"
        assert len(lines) == 3
