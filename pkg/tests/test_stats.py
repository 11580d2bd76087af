import math

import numpy as np
import pytest

import exitbound as eb
from exitbound.errors import HeaderMismatchError, UnlabeledTraceError

from conftest import make_trace


def assignment_from_depths(depths, K, policy=None):
    return eb.DepthAssignment(
        K=K,
        policy=policy or eb.PolicyConfig.fixed(1),
        depths=np.asarray(depths, dtype=np.int64),
    )


class TestDepthStats:
    def test_all_samples_at_full_depth(self):
        st = eb.depth_stats(assignment_from_depths([6] * 10, K=6))
        np.testing.assert_array_equal(st.p, [0, 0, 0, 0, 0, 1])
        assert st.H_marginal == 0.0
        assert st.expected_depth == 6.0
        assert st.mutual_information == 0.0

    def test_uniform_over_two_depths(self):
        st = eb.depth_stats(assignment_from_depths([1, 1, 2, 2], K=2))
        np.testing.assert_array_equal(st.p, [0.5, 0.5])
        assert st.H_marginal == pytest.approx(math.log(2), rel=1e-12)
        assert st.expected_depth == pytest.approx(1.5, abs=0)

    def test_known_entropy_from_frequencies(self):
        depths = [1] * 7 + [2] * 2 + [3]
        st = eb.depth_stats(assignment_from_depths(depths, K=3))
        np.testing.assert_allclose(st.p, [0.7, 0.2, 0.1], atol=1e-15)
        assert st.H_marginal == pytest.approx(0.8018185525433373, rel=1e-12)

    def test_counts_sum_to_n(self):
        rng = np.random.default_rng(4)
        depths = rng.integers(1, 5, size=37)
        st = eb.depth_stats(assignment_from_depths(depths, K=4))
        assert st.counts.sum() == 37
        assert st.n == 37

    def test_expected_depth_two_routes_agree(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            depths = rng.integers(1, 7, size=200)
            st = eb.depth_stats(assignment_from_depths(depths, K=6))
            assert st.expected_depth == pytest.approx(depths.mean(), abs=1e-12)

    def test_entropy_upper_bound_and_uniform_equality(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            K = int(rng.integers(2, 9))
            depths = rng.integers(1, K + 1, size=300)
            st = eb.depth_stats(assignment_from_depths(depths, K=K))
            assert st.H_marginal <= math.log(K) + 1e-12
        uniform = np.repeat(np.arange(1, 5), 25)
        st = eb.depth_stats(assignment_from_depths(uniform, K=4))
        assert st.H_marginal == pytest.approx(math.log(4), rel=1e-12)

    def test_deterministic_mutual_information_equals_marginal(self):
        rng = np.random.default_rng(9)
        depths = rng.integers(1, 4, size=100)
        st = eb.depth_stats(assignment_from_depths(depths, K=3))
        assert st.mutual_information == st.H_marginal
        assert st.H_conditional == 0.0

    def test_stochastic_case(self):
        table = np.array([[0.25, 0.75], [0.25, 0.75]])
        a = eb.DepthAssignment(
            K=2, policy=eb.PolicyConfig.stochastic(table), table=table
        )
        st = eb.depth_stats(a)
        np.testing.assert_allclose(st.p, [0.25, 0.75], atol=0)
        row_h = eb.predictive_entropy([0.25, 0.75])
        assert st.H_conditional == pytest.approx(row_h, rel=1e-12)
        assert st.mutual_information == pytest.approx(st.H_marginal - row_h, abs=1e-15)
        # round-half-even of n * p = [0.5, 1.5]
        assert st.counts.tolist() == [0, 2]

    def test_fixed_policy_yields_zero_entropy_downstream(self, small_trace):
        a = eb.apply_policy(small_trace, eb.PolicyConfig.fixed(2))
        st = eb.depth_stats(a)
        assert st.H_marginal == 0.0
        assert st.expected_depth == 2.0


class TestEce:
    def test_single_bin_arithmetic(self):
        # two samples, confidence 0.9 each, one right one wrong
        header = eb.TraceHeader(K=1, C=2, loss_kind="zero-one", labeled=True, split="test")
        logit = math.log(9.0)  # softmax([log 9, 0]) = (0.9, 0.1)
        samples = [
            eb.SampleRecord("a", 1, (eb.ExitRecord(1, (logit, 0.0)),)),
            eb.SampleRecord("b", 2, (eb.ExitRecord(1, (logit, 0.0)),)),
        ]
        trace = eb.ExitTrace(header, samples)
        a = assignment_from_depths([1, 1], K=1)
        rep = eb.ece(trace, a, bins=1)
        assert rep.ece == pytest.approx(0.4, abs=1e-12)
        rep15 = eb.ece(trace, a, bins=15)
        assert rep15.ece == pytest.approx(0.4, abs=1e-12)

    def test_perfectly_calibrated_degenerate(self):
        header = eb.TraceHeader(K=1, C=2, loss_kind="zero-one", labeled=True, split="test")
        samples = [
            eb.SampleRecord(f"s{i}", 1, (eb.ExitRecord(1, (800.0, -800.0)),))
            for i in range(5)
        ]
        trace = eb.ExitTrace(header, samples)
        rep = eb.ece(trace, assignment_from_depths([1] * 5, K=1), bins=15)
        assert rep.ece == pytest.approx(0.0, abs=1e-12)

    def test_matches_brute_force_binning(self):
        trace = make_trace(n=100, K=3, C=4, seed=21, sharpen=0.6)
        a = eb.apply_policy(trace, eb.PolicyConfig.entropy(0.9))
        bins = 10
        rep = eb.ece(trace, a, bins=bins)

        # independent brute-force oracle: recompute confidence per sample,
        # assign right-closed bins by scanning, accumulate by hand
        conf, correct = [], []
        for i, sample in enumerate(trace.samples):
            depth = int(a.depths[i])
            probs = eb.stable_softmax(sample.exits[depth - 1].logits)
            conf.append(max(probs))
            correct.append(int(np.argmax(probs)) + 1 == sample.label)
        expected = 0.0
        for b in range(bins):
            lo, hi = b / bins, (b + 1) / bins
            members = [
                (c, ok) for c, ok in zip(conf, correct)
                if (lo < c <= hi) or (b == 0 and c <= lo)
            ]
            if members:
                mean_conf = sum(c for c, _ in members) / len(members)
                acc = sum(ok for _, ok in members) / len(members)
                expected += (len(members) / 100) * abs(acc - mean_conf)
        assert rep.ece == pytest.approx(expected, abs=1e-12)
        assert sum(b.count for b in rep.bins) == 100

    def test_unlabeled_trace_rejected(self):
        trace = make_trace(n=4, labeled=False)
        a = eb.apply_policy(trace, eb.PolicyConfig.fixed(1))
        with pytest.raises(UnlabeledTraceError):
            eb.ece(trace, a)


class TestEpsilonEstimate:
    def _two_class_trace(self, depth_by_label):
        header = eb.TraceHeader(K=2, C=2, loss_kind="zero-one", labeled=True, split="train")
        samples, depths = [], []
        for i in range(20):
            label = 1 if i < 10 else 2
            samples.append(
                eb.SampleRecord(
                    f"s{i}",
                    label,
                    (eb.ExitRecord(1, (1.0, 0.0)), eb.ExitRecord(2, (1.0, 0.0))),
                )
            )
            depths.append(depth_by_label[label])
        return eb.ExitTrace(header, samples), assignment_from_depths(depths, K=2)

    def test_label_independent_depths_give_zero(self):
        trace, _ = self._two_class_trace({1: 1, 2: 1})
        depths = [1, 2] * 10  # identical depth distribution per class
        a = assignment_from_depths(depths, K=2)
        est = eb.epsilon_estimate(trace, a)
        assert est.value == pytest.approx(0.0, abs=1e-12)
        assert not est.warning

    def test_fully_label_dependent_balanced(self):
        trace, a = self._two_class_trace({1: 1, 2: 2})
        est = eb.epsilon_estimate(trace, a)
        assert est.value == pytest.approx(0.5, abs=1e-12)

    def test_missing_class_flagged(self):
        header = eb.TraceHeader(K=2, C=3, loss_kind="zero-one", labeled=True, split="train")
        samples = [
            eb.SampleRecord(
                f"s{i}", 1 + i % 2,
                (eb.ExitRecord(1, (1.0, 0.0, 0.0)), eb.ExitRecord(2, (1.0, 0.0, 0.0))),
            )
            for i in range(10)
        ]
        trace = eb.ExitTrace(header, samples)
        est = eb.epsilon_estimate(trace, assignment_from_depths([1] * 10, K=2))
        assert est.excluded_labels == (3,)
        assert est.warning

    def test_invariant_under_relabeling(self):
        trace = make_trace(n=60, K=3, C=3, seed=17)
        a = eb.apply_policy(trace, eb.PolicyConfig.entropy(0.7))
        base = eb.epsilon_estimate(trace, a).value
        relabeled = eb.ExitTrace(
            trace.header,
            [
                eb.SampleRecord(s.sample_id, (s.label % 3) + 1, s.exits)
                for s in trace.samples
            ],
        )
        assert eb.epsilon_estimate(relabeled, a).value == pytest.approx(base, abs=1e-12)


class TestGap:
    def test_identical_traces_give_zero(self, small_trace):
        assert eb.gap(small_trace, small_trace, eb.PolicyConfig.fixed(2)) == 0.0

    def test_hand_fixture_arithmetic(self):
        def fixed_loss_trace(mean_loss, n=10):
            header = eb.TraceHeader(K=1, C=2, loss_kind="cross-entropy", labeled=True, split="train")
            samples = [
                eb.SampleRecord(
                    f"s{i}", 1, (eb.ExitRecord(1, (1.0, 0.0), loss=mean_loss),)
                )
                for i in range(n)
            ]
            return eb.ExitTrace(header, samples)

        train = fixed_loss_trace(0.02)
        ev = fixed_loss_trace(0.05)
        got = eb.gap(train, ev, eb.PolicyConfig.fixed(1))
        assert got == pytest.approx(0.03, abs=1e-15)

    def test_header_mismatch(self):
        a = make_trace(n=5, K=2, C=2, seed=0)
        b = make_trace(n=5, K=3, C=2, seed=0)
        with pytest.raises(HeaderMismatchError):
            eb.gap(a, b, eb.PolicyConfig.fixed(1))

    def test_unlabeled_rejected(self):
        a = make_trace(n=5, K=2, C=2, seed=0, labeled=False)
        b = make_trace(n=5, K=2, C=2, seed=1, labeled=False)
        with pytest.raises(UnlabeledTraceError):
            eb.gap(a, b, eb.PolicyConfig.fixed(1))

    def test_stochastic_policy_uses_expected_loss(self):
        trace = make_trace(n=6, K=2, C=2, seed=2, store_loss=True)
        table = np.full((6, 2), 0.5)
        policy = eb.PolicyConfig.stochastic(table)
        a = eb.apply_policy(trace, policy)
        losses = trace.loss_matrix()
        expected = float((losses * table).sum(axis=1).mean())
        assert eb.mean_policy_loss(trace, a) == pytest.approx(expected, rel=1e-12)
