import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ciex import isoforest
from ciex.classifier import ClassifierSpec
from ciex.data import GROUND_TRUTH, INFERRED, TrainState, from_arrays, synth_credit
from ciex.framework import (
    CiexSpec,
    IterationRecord,
    StallError,
    expand_dataset,
    inferred_rows,
    retrieve_confident,
    run_ciex,
    select_iteration,
    split_counts,
)
from ciex.isoforest import IsoForestSpec
from oracles import literal_retrieve

FAST = IsoForestSpec(n_trees=25, subsample_size=64)


def toy_state(seed, n_lab=60, n_rej=40, dim=2):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n_lab)
    y[:2] = [0, 1]
    y[2:4] = [0, 1]
    Xl = rng.standard_normal((n_lab, dim)) + y[:, None]
    Xr = rng.standard_normal((n_rej, dim)) * 1.5 + 0.5
    lab = from_arrays(Xl, y)
    rej = from_arrays(Xr, row_ids=np.arange(n_lab, n_lab + n_rej) * 2 + 1)
    return TrainState.initial(lab, rej)


def synthetic_state(seed, n_acc=600, n_rej=1200, bias=0.5):
    acc, rej, hidden = synth_credit(n_acc, n_rej, bias, seed)
    val_acc, _, val_hidden = synth_credit(300, 600, bias, seed + 1000)
    val_acc = val_acc.replace(row_ids=val_acc.row_ids + 10_000)
    val_rej = val_hidden.without_labels().replace(row_ids=val_hidden.row_ids + 10_000)
    return TrainState.initial(acc, rej), (val_acc, val_rej)


def oracle_for(state, delta, c, forest, clf=ClassifierSpec()):
    lab = state.labeled
    iso = isoforest.fit(forest, lab.X[lab.labels == delta])
    score = clf.fit(lab.X, lab.labels, lab.weights).predict_proba(state.rejects.X)
    inlier = iso.is_inlier(state.rejects.X)
    return literal_retrieve(list(state.rejects.row_ids), score, inlier, delta, c), score, inlier


class TestSplitCounts:
    @pytest.mark.parametrize("eta,rho,want", [(1000, 0.07, (930, 70)), (1000, 0.2, (800, 200)), (10, 0.25, (7, 3)), (1, 0.4, (1, 0))])
    def test_counts(self, eta, rho, want):
        assert split_counts(eta, rho) == want
        assert sum(split_counts(eta, rho)) == eta

    @given(st.integers(1, 5000), st.floats(0.001, 0.999))
    def test_sum_is_eta(self, eta, rho):
        c0, c1 = split_counts(eta, rho)
        assert c0 + c1 == eta and c0 >= 0 and c1 >= 0

    @pytest.mark.parametrize("kw", [{"eta": 0}, {"bad_fraction": 0.0}, {"bad_fraction": 1.0}, {"max_iterations": -1}])
    def test_bad_spec(self, kw):
        with pytest.raises(ValueError):
            CiexSpec(**kw)

    def test_contamination_synced(self):
        spec = CiexSpec(contamination=0.2)
        assert spec.forest.contamination == 0.2


class TestRetrieve:
    @pytest.mark.parametrize("seed", range(12))
    @pytest.mark.parametrize("delta", [0, 1])
    def test_matches_literal_loop(self, seed, delta):
        rng = np.random.default_rng(seed)
        state = toy_state(seed, n_rej=int(rng.integers(1, 200)))
        c = int(rng.integers(0, 60))
        forest = IsoForestSpec(n_trees=20, subsample_size=32, seed=seed)
        (ids, labels, rest), _, _ = oracle_for(state, delta, c, forest)
        got = retrieve_confident(state, delta, c, forest)
        assert list(got.row_ids) == ids
        assert list(got.labels) == labels
        assert list(got.rejects.row_ids) == rest

    def test_zero_budget(self):
        state = toy_state(0)
        got = retrieve_confident(state, 1, 0, FAST)
        assert len(got) == 0 and got.n_examined == 0
        np.testing.assert_array_equal(got.rejects.row_ids, state.rejects.row_ids)

    def test_all_outliers(self):
        rng = np.random.default_rng(1)
        lab = from_arrays(rng.standard_normal((40, 2)), np.tile([0, 1], 20))
        rej = from_arrays(rng.standard_normal((10, 2)) + 500.0, row_ids=np.arange(100, 110))
        got = retrieve_confident(TrainState.initial(lab, rej), 1, 5, FAST)
        assert len(got) == 0
        assert got.n_examined == 10
        assert len(got.rejects) == 10

    def test_hand_toy(self):
        # six rejects; two sit inside the class-1 cloud, the rest are far away
        lab_X = np.array([[0.0, 0.0], [0.2, 0.1], [0.1, 0.3], [-0.1, 0.2],
                          [5.0, 5.0], [5.2, 5.1], [5.1, 5.3], [4.9, 5.2]])
        lab = from_arrays(lab_X, [0, 0, 0, 0, 1, 1, 1, 1])
        rej_X = np.array([[5.1, 5.15], [5.05, 5.2], [40.0, 40.0], [-30.0, 9.0], [0.1, 0.1], [60.0, -5.0]])
        rej = from_arrays(rej_X, row_ids=np.arange(10, 16))
        state = TrainState.initial(lab, rej)
        forest = IsoForestSpec(n_trees=50, subsample_size=4, contamination=0.25, seed=3)
        (ids, labels, rest), score, inlier = oracle_for(state, 1, 3, forest)
        assert inlier.sum() == 2 and (score[inlier] >= 0.5).all()
        got = retrieve_confident(state, 1, 3, forest)
        assert sorted(got.row_ids.tolist()) == [10, 11] == sorted(ids)
        assert (got.labels == 1).all()
        assert got.cross_labeled == 0

    def test_needs_two_of_class(self):
        lab = from_arrays(np.random.default_rng(0).random((5, 2)), [0, 0, 0, 0, 1])
        rej = from_arrays(np.zeros((2, 2)), row_ids=[7, 8])
        with pytest.raises(ValueError):
            retrieve_confident(TrainState.initial(lab, rej), 1, 1, FAST)

    def test_bad_arguments(self):
        state = toy_state(0)
        with pytest.raises(ValueError):
            retrieve_confident(state, 2, 1, FAST)
        with pytest.raises(ValueError):
            retrieve_confident(state, 0, -1, FAST)


class TestExpand:
    def test_conservation_and_provenance(self):
        state, _ = synthetic_state(0, 300, 400)
        spec = CiexSpec(eta=100, forest=FAST)
        new, rec = expand_dataset(state, spec)
        assert new.total == state.total
        assert rec.added_good <= 93 and rec.added_bad <= 7
        assert rec.added == len(new.labeled) - len(state.labeled)
        added = inferred_rows(new)
        assert len(added) == rec.added
        assert (added.provenance == INFERRED).all()
        np.testing.assert_array_equal(added.weights, 1.0)
        assert (new.labeled.provenance[: len(state.labeled)] == GROUND_TRUTH).all()
        assert new.iteration == 1

    def test_small_pool_empties(self):
        state, _ = synthetic_state(1, 300, 50, bias=0.0)
        spec = CiexSpec(eta=1000, contamination=0.01, forest=FAST)
        s = state
        while len(s.rejects):
            s, rec = expand_dataset(s, spec)
            assert rec.added <= 50
            if rec.stalled:
                break
        assert s.total == state.total

    def test_cross_label_counter(self):
        state, _ = synthetic_state(2, 300, 600)
        new, rec = expand_dataset(state, CiexSpec(eta=200, bad_fraction=0.3, forest=FAST))
        added = inferred_rows(new)
        # the first added_good rows were retrieved for class 0, the rest for class 1
        wrong = (added.labels[: rec.added_good] != 0).sum() + (added.labels[rec.added_good:] != 1).sum()
        assert rec.cross_labeled == wrong

    def test_empty_pool_rejected(self):
        state, _ = synthetic_state(0, 100, 10)
        empty = TrainState(state.labeled, state.rejects.take(np.zeros(0, np.int64)))
        with pytest.raises(ValueError):
            expand_dataset(empty, CiexSpec())


class TestRun:
    def test_records_and_conservation(self, tmp_path):
        state, val = synthetic_state(3)
        spec = CiexSpec(eta=150, max_iterations=5, forest=FAST)
        log = tmp_path / "ciex.jsonl"
        run = run_ciex(state, spec, val, log_path=log)
        recs = run.records
        assert recs[0].iteration == 0 and recs[0].val_auk == 0.0 and recs[0].val_kickout == 0.0
        assert len(recs) == len(run.states) == len(run.models)
        for prev, cur in zip(recs, recs[1:]):
            assert cur.labeled_size + cur.reject_size == prev.labeled_size + prev.reject_size
            assert 0 < cur.labeled_size - prev.labeled_size <= spec.eta
        for s in run.states:
            assert s.total == state.total
        lines = [json.loads(x) for x in log.read_text().splitlines()]
        assert [x["iteration"] for x in lines] == [r.iteration for r in recs]

    def test_zero_iterations(self):
        state, val = synthetic_state(4, 300, 300)
        run = run_ciex(state, CiexSpec(max_iterations=0, forest=FAST), val)
        assert len(run.records) == 1
        assert run.records[0].val_auk == 0.0

    def test_deterministic(self):
        state, val = synthetic_state(5, 300, 500)
        spec = CiexSpec(eta=100, max_iterations=3, forest=FAST, seed=11)
        a = run_ciex(state, spec, val)
        b = run_ciex(state, spec, val)
        assert [r.to_dict() for r in a.records] == [r.to_dict() for r in b.records]
        np.testing.assert_array_equal(a.states[-1].labeled.row_ids, b.states[-1].labeled.row_ids)

    def test_keep_states_false(self):
        state, val = synthetic_state(6, 300, 400)
        run = run_ciex(state, CiexSpec(eta=100, max_iterations=2, forest=FAST), val, keep_states=False)
        assert len(run.states) == 2
        assert run.states[-1].iteration == 2

    def test_stall_on_first_iteration(self):
        rng = np.random.default_rng(0)
        lab = from_arrays(rng.standard_normal((60, 2)), np.tile([0, 1], 30))
        rej = from_arrays(rng.standard_normal((5, 2)) + 1e3, row_ids=np.arange(100, 105))
        val = (lab.replace(row_ids=lab.row_ids + 500), rej.replace(row_ids=rej.row_ids + 500))
        with pytest.raises(StallError):
            run_ciex(TrainState.initial(lab, rej), CiexSpec(eta=10, forest=FAST), val)

    def test_unbiased_inferred_labels_beat_chance(self):
        # with no sample bias the retrieved labels should mostly be right
        acc, rej, hidden = synth_credit(800, 800, 0.0, 9)
        new, rec = expand_dataset(TrainState.initial(acc, rej), CiexSpec(eta=300, forest=FAST))
        added = inferred_rows(new)
        truth = hidden.select_ids(added.row_ids).labels
        assert (added.labels == truth).mean() > 0.8


class TestSelectIteration:
    def rec(self, i, a, k):
        return IterationRecord(i, 0, 0, 0, 0, val_auc=a, val_kickout=k, val_auk=k)

    def test_single_record(self):
        assert select_iteration([self.rec(0, 0.8, 0.0)]) == 0

    def test_prefers_kickout(self):
        recs = [self.rec(0, 0.80, 0.01), self.rec(1, 0.79, 0.05)]
        assert select_iteration(recs, (1, 10)) == 1
        assert select_iteration(recs, (1, 10), criterion="kickout") == 1

    def test_constant_columns_fall_back(self):
        recs = [self.rec(0, 0.8, 0.0), self.rec(1, 0.8, 0.0)]
        assert select_iteration(recs) == 0

    def test_unknown_criterion(self):
        with pytest.raises(ValueError):
            select_iteration([self.rec(0, 0.8, 0.0)], criterion="auc")
