import numpy as np
import pytest

from spc import (DotCounter, LabeledRecord, PrototypeSet, SpcError, Strategy,
                 SynthConfig, bucket_report, cross_validate_w, evaluate,
                 generate_synthetic, group_by_user, mean_accuracy, normalize,
                 run_streams, run_user_stream, sweep_table, sweep_w, sweep_ws)

SMALL = dict(dim=16, num_common_classes=12, users=6, records_per_user=40,
             novel_classes_per_user=2, confusable_group_count=2, group_size=2,
             train_records_per_class=4, train_modes_per_class=2, seed=9)


def rec(user, t, cls, vec):
    return LabeledRecord(user=user, t=t, class_id=cls, vec=normalize(vec))


@pytest.fixture(scope="module")
def synth():
    from spc import SubsetSpec, TrainIndex, build_prototypes, select_classes
    train, stream, registry, manifest = generate_synthetic(SynthConfig(**SMALL))
    protos = build_prototypes(
        train, select_classes(TrainIndex.from_records(train), SubsetSpec()),
        SubsetSpec())
    return group_by_user(stream), protos


class TestProtocol:
    """Hand-traced three-record stream against a one-class prototype set."""

    def setup_method(self):
        self.protos = PrototypeSet(2, class_ids=[0], vectors=[[1.0, 0.0]])
        self.records = [rec("u", 1, 0, [1.0, 0.0]),
                        rec("u", 2, 1, [0.0, 1.0]),
                        rec("u", 3, 1, [0.0, 1.0])]

    def test_predict_before_learn(self):
        out = run_user_stream(self.records, self.protos,
                              Strategy(kind="spc", w=0.85))
        assert [o.predicted for o in out] == [0, 0, 1]
        assert [o.hits[1] for o in out] == [True, False, True]

    def test_initial_and_union_flags(self):
        out = run_user_stream(self.records, self.protos,
                              Strategy(kind="spc", w=0.85))
        assert [o.in_initial for o in out] == [True, False, False]
        # class 1 first appears at t=2, so it joins the union at t=3
        assert [o.in_union for o in out] == [True, False, True]

    def test_cold_start_without_prototypes(self):
        out = run_user_stream(self.records, None, Strategy(kind="1nn-star"))
        assert out[0].predicted is None
        assert not out[0].hits[1] and not out[0].hits[5]
        assert [o.predicted for o in out[1:]] == [0, 1]

    def test_learn_disabled_never_improves(self):
        out = run_user_stream(self.records, self.protos,
                              Strategy(kind="spc", w=0.85, learn=False))
        assert [o.predicted for o in out] == [0, 0, 0]

    def test_non_contiguous_t_rejected(self):
        bad = [self.records[0], self.records[2]]
        with pytest.raises(SpcError, match="contiguous"):
            run_user_stream(bad, self.protos, Strategy(kind="spc"))

    def test_empty_stream(self):
        assert run_user_stream([], self.protos, Strategy(kind="spc")) == []


class TestInvariants:
    def test_hit1_implies_hit5(self, synth):
        streams, protos = synth
        for kind in ("spc", "ncm-fixed", "1nn", "1nn-star", "spc-sum"):
            outcomes = run_streams(streams, protos, Strategy(kind=kind))
            for user_out in outcomes.values():
                for o in user_out:
                    assert not o.hits[1] or o.hits[5]
                    assert not o.in_initial or o.in_union

    def test_dot_count_is_prototypes_plus_history(self, synth):
        streams, protos = synth
        user = sorted(streams)[0]
        counter = DotCounter()
        run_user_stream(streams[user], protos, Strategy(kind="spc"),
                        counter=counter)
        n = len(streams[user])
        assert counter.per_call == [len(protos) + t for t in range(n)]
        assert counter.total == sum(counter.per_call)

    def test_users_evaluated_independently(self, synth):
        streams, protos = synth
        user = sorted(streams)[0]
        alone = run_user_stream(streams[user], protos, Strategy(kind="spc"))
        together = run_streams(streams, protos, Strategy(kind="spc"))
        assert alone == together[user]


class TestReductionIdentities:
    """Different strategy labels that must traverse identical outcomes."""

    def assert_same(self, streams, protos_a, a, protos_b, b):
        out_a = run_streams(streams, protos_a, a)
        out_b = run_streams(streams, protos_b, b)
        assert out_a == out_b

    def test_w_one_equals_plain_nearest_neighbor(self, synth):
        streams, protos = synth
        self.assert_same(streams, protos, Strategy(kind="spc", w=1.0),
                         protos, Strategy(kind="1nn"))

    def test_no_prototypes_equals_user_only(self, synth):
        streams, protos = synth
        self.assert_same(streams, None, Strategy(kind="spc", w=0.85),
                         None, Strategy(kind="1nn-star"))

    def test_user_only_scoring_ignores_prototypes(self, synth):
        # 1nn-star keeps the prototype set for the initial-class bookkeeping
        # but never scores against it
        streams, protos = synth
        with_p = run_streams(streams, protos, Strategy(kind="1nn-star"))
        without = run_streams(streams, None, Strategy(kind="1nn-star"))
        for user in with_p:
            assert [o.predicted for o in with_p[user]] == \
                [o.predicted for o in without[user]]
            assert [o.hits for o in with_p[user]] == \
                [o.hits for o in without[user]]

    def test_sum_weight_zero_equals_user_only(self, synth):
        streams, _ = synth
        self.assert_same(streams, None, Strategy(kind="spc-sum", w_s=0.0),
                         None, Strategy(kind="1nn-star"))

    def test_sum_weight_one_equals_prototype_only(self, synth):
        streams, protos = synth
        out_a = run_streams(streams, protos, Strategy(kind="spc-sum", w_s=1.0))
        out_b = run_streams(streams, protos, Strategy(kind="ncm-fixed"))
        for user in out_a:
            assert [o.predicted for o in out_a[user]] == \
                [o.predicted for o in out_b[user]]
            assert [o.hits[1] for o in out_a[user]] == \
                [o.hits[1] for o in out_b[user]]

    def test_learn_disabled_equals_fixed_prototypes(self, synth):
        streams, protos = synth
        self.assert_same(streams, protos,
                         Strategy(kind="spc", w=0.85, learn=False),
                         protos, Strategy(kind="ncm-fixed"))


class TestNcmIncrModes:
    def test_modes_diverge_on_real_streams(self, synth):
        streams, protos = synth
        full = run_streams(streams, protos,
                           Strategy(kind="ncm-incr", mean_mode="full-history"))
        one = run_streams(streams, protos,
                          Strategy(kind="ncm-incr", mean_mode="mean-as-one"))
        assert full != one

    def test_needs_prototypes(self, synth):
        streams, _ = synth
        with pytest.raises(SpcError):
            run_streams(streams, None, Strategy(kind="ncm-incr"))


class TestMeanAccuracy:
    def outcomes(self, synth):
        streams, protos = synth
        return run_streams(streams, protos, Strategy(kind="spc"))

    def test_matches_direct_average(self, synth):
        outcomes = self.outcomes(synth)
        for t in (1, 7, 40):
            want = np.mean([o[t - 1].hits[1] for o in outcomes.values()])
            assert mean_accuracy(outcomes, t, 1) == pytest.approx(want)

    def test_excludes_short_streams(self, synth):
        outcomes = dict(self.outcomes(synth))
        short_user = sorted(outcomes)[0]
        outcomes[short_user] = outcomes[short_user][:5]
        others = [u for u in outcomes if u != short_user]
        want = np.mean([outcomes[u][9].hits[1] for u in others])
        assert mean_accuracy(outcomes, 10, 1) == pytest.approx(want)

    def test_beyond_every_stream_is_an_error(self, synth):
        with pytest.raises(SpcError):
            mean_accuracy(self.outcomes(synth), 1000, 1)


class TestBucketReport:
    def test_bucket_boundaries_and_flags(self, synth):
        outcomes = self.make(synth)
        report = bucket_report(outcomes, bucket_width=15)
        assert report.buckets == [(1, 15), (16, 30), (31, 40)]
        assert report.partial_final_bucket and not report.ragged
        even = bucket_report(outcomes, bucket_width=10)
        assert not even.partial_final_bucket

    def make(self, synth):
        streams, protos = synth
        return run_streams(streams, protos, Strategy(kind="spc"))

    def test_accuracy_is_mean_of_per_t_means(self, synth):
        outcomes = self.make(synth)
        report = bucket_report(outcomes, bucket_width=10)
        want = np.mean([mean_accuracy(outcomes, t, 1) for t in range(1, 11)])
        assert report.accuracy[1][0] == pytest.approx(want)

    def test_union_upper_limit_dominates_initial(self, synth):
        report = bucket_report(self.make(synth), bucket_width=10)
        for b in range(len(report.buckets)):
            assert report.in_union[b] >= report.in_initial[b] - 1e-12
            for k in report.k_list:
                assert report.accuracy[k][b] <= report.in_union[b] + 1e-12

    def test_ragged_flagged(self, synth):
        outcomes = dict(self.make(synth))
        u = sorted(outcomes)[0]
        outcomes[u] = outcomes[u][:12]
        assert bucket_report(outcomes, bucket_width=10).ragged

    def test_table_shape(self, synth):
        report = bucket_report(self.make(synth), bucket_width=20)
        table = report.to_table("spc (w=0.85)")
        assert len(table.columns) == len(report.buckets) * len(report.k_list)
        labels = [name for name, _ in table.rows]
        assert labels == ["spc (w=0.85)", "upper limit (initial)",
                          "upper limit (union)", "within initial classes",
                          "outside initial classes"]

    def test_empty_rejected(self):
        with pytest.raises(SpcError):
            bucket_report({})


class TestSweeps:
    def test_sweep_w_rejects_zero(self, synth):
        streams, protos = synth
        with pytest.raises(SpcError):
            sweep_w(streams, protos, [0.0, 0.5])

    def test_sweep_ws_allows_zero(self, synth):
        streams, protos = synth
        results = sweep_ws(streams, protos, [0.0, 1.0], bucket_width=20)
        assert [v for v, _ in results] == [0.0, 1.0]

    def test_sweep_matches_single_evaluation(self, synth):
        streams, protos = synth
        results = sweep_w(streams, protos, [0.7, 1.0], bucket_width=20)
        direct = evaluate(streams, protos, Strategy(kind="spc", w=0.7),
                          bucket_width=20)
        assert results[0][1].accuracy == direct.accuracy

    def test_sweep_table_rows(self, synth):
        streams, protos = synth
        results = sweep_w(streams, protos, [0.7, 0.85], bucket_width=20)
        table = sweep_table(results, "w", k_list=(1, 5), bucket_width=20)
        assert [name for name, _ in table.rows] == ["w=0.7", "w=0.85"]


class TestCrossValidation:
    GRID = [0.5, 0.85, 1.0]

    def test_deterministic_and_in_grid(self, synth):
        streams, protos = synth
        a = cross_validate_w(streams, protos, self.GRID, seed=3)
        b = cross_validate_w(streams, protos, self.GRID, seed=3)
        assert a == b
        assert a.chosen_w in self.GRID
        assert sorted(u for f in a.folds for u in f) == sorted(streams)

    def test_choice_matches_recomputed_objective(self, synth):
        streams, protos = synth
        result = cross_validate_w(streams, protos, self.GRID, seed=3)
        # independent recomputation: per-user mean top-1 hit rate, averaged
        # over the held-out users of each fold, then across folds
        per_user = {}
        for w in self.GRID:
            outs = run_streams(streams, protos, Strategy(kind="spc", w=w))
            per_user[w] = {u: np.mean([o.hits[1] for o in outs[u]])
                           for u in outs}
        mean_held = {}
        for w in self.GRID:
            fold_means = [np.mean([per_user[w][u] for u in fold])
                          for fold in result.folds]
            mean_held[w] = np.mean(fold_means)
            for i, fold in enumerate(result.folds):
                assert result.heldout_accuracy[i][w] == pytest.approx(
                    np.mean([per_user[w][u] for u in fold]))
        best = min(self.GRID, key=lambda w: (-mean_held[w], w))
        assert result.chosen_w == best

    def test_fold_count_validated(self, synth):
        streams, protos = synth
        with pytest.raises(SpcError):
            cross_validate_w(streams, protos, self.GRID, folds=1)
        with pytest.raises(SpcError):
            cross_validate_w(streams, protos, self.GRID,
                             folds=len(streams) + 1)
