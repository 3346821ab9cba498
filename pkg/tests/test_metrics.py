import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netlsm import FitConfig, SimConfig, evaluate_refinement, mean_log_prob, rmse, sign_accuracy
from netlsm.metrics import format_eval_table
from netlsm.simulate import simulate_train_test
from netlsm._util import substream

from helpers import random_network

HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestRmse:
    def test_examples(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert rmse([2.0, 3.0], [1.0, 2.0]) == pytest.approx(1.0)
        assert rmse([0.0, 2.0], [0.0, 0.0]) == pytest.approx(math.sqrt(2.0))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])


class TestMeanLogProb:
    def test_at_mean_unit_se(self):
        assert mean_log_prob([1.0, -2.0], [1.0, -2.0], [1.0, 1.0]) == pytest.approx(
            -HALF_LN_2PI
        )

    def test_one_sigma(self):
        se = np.array([0.5, 2.0])
        expect = np.mean(-0.5 * np.log(2 * math.pi * se**2) - 0.5)
        assert mean_log_prob(se, [0.0, 0.0], se) == pytest.approx(expect, abs=1e-12)

    def test_per_term_oracle(self):
        pred = [0.3, -1.2, 4.0]
        obs = [0.1, -1.0, 3.5]
        se = [0.2, 0.7, 1.3]
        oracle = sum(
            -0.5 * math.log(2 * math.pi * s * s) - (p - o) ** 2 / (2 * s * s)
            for p, o, s in zip(pred, obs, se)
        ) / 3
        assert abs(mean_log_prob(pred, obs, se) - oracle) <= 1e-12

    def test_nonpositive_se_rejected(self):
        with pytest.raises(ValueError):
            mean_log_prob([0.0], [0.0], [0.0])

    def test_strictly_decreases_with_deviation(self):
        pred = np.array([0.5, 1.0, -0.3])
        obs = np.zeros(3)
        se = np.array([0.4, 1.0, 2.0])
        base = mean_log_prob(pred, obs, se)
        worse = pred.copy()
        worse[1] += 0.5
        assert mean_log_prob(worse, obs, se) < base


class TestSignAccuracy:
    def test_examples(self):
        assert sign_accuracy([1.0, -1.0], [2.0, -3.0]) == 1.0
        assert sign_accuracy([1.0, -1.0], [-2.0, -3.0]) == 0.5
        assert sign_accuracy([0.0], [0.1]) == 1.0  # zero counts as positive


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite, st.floats(0.01, 10.0)), min_size=1, max_size=30),
       st.randoms(use_true_random=False))
def test_metrics_permutation_invariant(triples, rnd):
    pred, obs, se = (np.array(v) for v in zip(*triples))
    idx = list(range(len(pred)))
    rnd.shuffle(idx)
    assert rmse(pred[idx], obs[idx]) == pytest.approx(rmse(pred, obs), rel=1e-12)
    assert sign_accuracy(pred[idx], obs[idx]) == sign_accuracy(pred, obs)
    assert mean_log_prob(pred[idx], obs[idx], se[idx]) == pytest.approx(
        mean_log_prob(pred, obs, se), rel=1e-12, abs=1e-12
    )


class TestEvaluateRefinement:
    def test_raw_self_evaluation(self):
        net = random_network(substream(0, "eval"), 5, 4, mask_frac=0.2)
        ev = evaluate_refinement(net, net, "raw", [2])
        rep = ev.selected_report()
        assert rep.rmse == 0.0
        assert rep.sign_accuracy == 1.0
        assert rep.n_pairs == int(net.edge_mask.sum())
        assert ev.selected_dim is None

    def test_raw_independent_of_dim_grid(self):
        net = random_network(substream(1, "eval"), 5, 4)
        a = evaluate_refinement(net, net, "raw", [1])
        b = evaluate_refinement(net, net, "raw", [1, 2, 3])
        assert a.selected_report() == b.selected_report()

    def test_single_entry_grid_selected(self):
        net = random_network(substream(2, "eval"), 6, 6)
        ev = evaluate_refinement(net, net, "pca", [3])
        assert ev.selected_dim == 3
        assert list(ev.reports) == [3]

    def test_grid_selection_maximizes_mlp(self):
        truth, train, test = simulate_train_test(SimConfig(n_d=10, n_r=10, seed=3))
        ev = evaluate_refinement(train, test, "pca", [1, 2, 4, 8])
        best = max(ev.reports.values(), key=lambda r: r.mean_log_prob)
        assert ev.reports[ev.selected_dim].mean_log_prob == best.mean_log_prob

    def test_lsm_beats_raw_on_shared_truth(self):
        truth, train, test = simulate_train_test(SimConfig(seed=0))
        raw = evaluate_refinement(train, test, "raw", [2]).selected_report()
        lsm = evaluate_refinement(
            train, test, "lsm", [2],
            fit_config=FitConfig(dim=2, restarts=1, seed=0),
        ).selected_report()
        assert lsm.rmse < raw.rmse
        assert lsm.mean_log_prob > raw.mean_log_prob

    def test_label_mismatch_rejected(self):
        a = random_network(substream(3, "eval"), 3, 3)
        b = random_network(substream(4, "eval"), 4, 3)
        with pytest.raises(ValueError, match="labels"):
            evaluate_refinement(a, b, "raw", [1])

    def test_no_common_pairs_rejected(self):
        rng = substream(5, "eval")
        a = random_network(rng, 2, 2)
        mask_a = np.array([[True, False], [False, False]])
        mask_b = np.array([[False, True], [True, True]])
        na = type(a)(a.donor_labels, a.recipient_labels, a.donor_weight, a.donor_se,
                     a.recipient_weight, a.recipient_se, a.edge_weight, a.edge_se, mask_a)
        nb = type(a)(a.donor_labels, a.recipient_labels, a.donor_weight, a.donor_se,
                     a.recipient_weight, a.recipient_se, a.edge_weight, a.edge_se, mask_b)
        with pytest.raises(ValueError, match="observed in both"):
            evaluate_refinement(na, nb, "raw", [1])

    def test_unknown_method(self):
        net = random_network(substream(6, "eval"), 3, 3)
        with pytest.raises(ValueError, match="method"):
            evaluate_refinement(net, net, "ols", [1])

    def test_table_formatting(self):
        net = random_network(substream(7, "eval"), 5, 5)
        evs = [evaluate_refinement(net, net, m, [2]) for m in ("raw", "pca")]
        text = format_eval_table(evs)
        assert "rmse" in text and "raw" in text and "pca" in text
