import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_coord.exceptions import PreconditionError, StateCorruptionError
from bandit_coord.learners import Exp3IX, PinnedStrategy, ShiftingBandit, Strategy

EXT, BSG = Strategy.EXT_COMM, Strategy.BSG
rewards = st.floats(0.0, 1.0)


class TestExp3IXInit:
    def test_horizon_one(self):
        m = Exp3IX(1)
        assert m.eta == pytest.approx(0.83255, abs=5e-6)
        assert m.gamma == pytest.approx(0.41628, abs=5e-6)

    def test_horizon_hundred(self):
        assert Exp3IX(100).eta == pytest.approx(0.083255, abs=5e-7)

    @given(st.integers(1, 10**6))
    def test_starts_uniform(self, T):
        m = Exp3IX(T)
        assert m.t == 1 and list(m.distribution()) == [0.5, 0.5]
        assert m.eta == math.sqrt(math.log(2) / T) and m.gamma == m.eta / 2

    def test_zero_horizon(self):
        with pytest.raises(PreconditionError):
            Exp3IX(0)

    def test_unknown_mode(self):
        with pytest.raises(PreconditionError):
            Exp3IX(10, mode="other")


class TestExp3IXDistribution:
    @pytest.mark.parametrize("z, q", [((1, 1), (0.5, 0.5)), ((3, 1), (0.75, 0.25)),
                                      ((math.e, math.e), (0.5, 0.5))])
    def test_ratio(self, z, q):
        m = Exp3IX(10)
        m.z = np.array(z, dtype=float)
        assert m.distribution() == pytest.approx(q)

    @pytest.mark.parametrize("bad", [(np.nan, 1.0), (np.inf, 1.0), (0.0, 1.0), (-1.0, 2.0)])
    def test_corruption_detected(self, bad):
        m = Exp3IX(10)
        m.z = np.array(bad)
        with pytest.raises(StateCorruptionError):
            m.distribution()


class TestExp3IXUpdate:
    def make(self, mode="paper"):
        m = Exp3IX(100, mode=mode)
        m.gamma = 0.1
        return m

    def test_reward_one_keeps_distribution(self):
        m = self.make()
        m.update(EXT, 1.0)
        assert m.z == pytest.approx([math.exp(m.eta / 2)] * 2)
        assert list(m.distribution()) == [0.5, 0.5]
        assert m.t == 2

    def test_reward_zero_hand_trace(self):
        m = self.make()
        assert m.estimates(EXT, 0.0) == pytest.approx([-2 / 3, 1.0])
        m.update(EXT, 0.0)
        assert m.z == pytest.approx([math.exp(-0.4 * m.eta), math.exp(0.6 * m.eta)])
        assert m.distribution()[BSG] > 0.5

    def test_standard_mode_skips_norm(self):
        m = self.make("standard")
        m.update(EXT, 0.0)
        assert m.z == pytest.approx([math.exp(-2 / 3 * m.eta), math.exp(m.eta)])

    def test_bsg_reward_one(self):
        m = self.make()
        m.update(BSG, 1.0)
        assert m.distribution() == pytest.approx([0.5, 0.5])

    @pytest.mark.parametrize("r", [-0.1, 1.1, math.nan])
    def test_reward_out_of_range(self, r):
        with pytest.raises(PreconditionError):
            Exp3IX(10).update(EXT, r)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.sampled_from([EXT, BSG]), rewards), max_size=60),
           st.sampled_from([EXT, BSG]), st.floats(0.0, 1.0))
    def test_optimistic_bias(self, history, chosen, reward):
        m = Exp3IX(50)
        for s, r in history:
            m.update(s, r)
        est = m.estimates(chosen, reward)
        assert est[1 - chosen] == 1.0
        assert est[chosen] <= 1.0

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.sampled_from([EXT, BSG]), rewards), max_size=60),
           st.sampled_from([EXT, BSG]))
    def test_zero_loss_neutral(self, history, chosen):
        m = Exp3IX(50)
        for s, r in history:
            m.update(s, r)
        before = m.distribution()
        m.update(chosen, 1.0)
        assert m.distribution() == pytest.approx(before, rel=1e-12)

    @settings(max_examples=30)
    @given(st.lists(st.tuples(st.sampled_from([EXT, BSG]), rewards), min_size=1, max_size=200),
           st.sampled_from(["paper", "standard"]))
    def test_distribution_valid(self, history, mode):
        m = Exp3IX(3, mode=mode)
        for s, r in history:
            m.update(s, r)
            q = m.distribution()
            assert abs(q.sum() - 1.0) <= 1e-12 and np.all(q >= 0)
            assert np.all(np.isfinite(m.z)) and np.all(m.z > 0)

    def test_adversarial_stress(self):
        # one arm always loses, the other always wins: weights must stay finite
        m = Exp3IX(1, mode="standard")
        for k in range(10**5):
            m.update(EXT if k % 2 else BSG, 0.0 if k % 2 else 1.0)
        assert np.all(np.isfinite(m.z)) and np.all(m.z > 0)
        assert m.distribution().sum() == pytest.approx(1.0, abs=1e-12)

    def test_deterministic(self):
        def run():
            rng = np.random.default_rng(5)
            m = Exp3IX(300)
            for _ in range(300):
                s = m.draw(rng)
                m.update(s, float(rng.random()))
            return m.z

        assert np.array_equal(run(), run())


class TestPinned:
    def test_pinned(self):
        p = PinnedStrategy(BSG)
        assert list(p.distribution()) == [0.0, 1.0]
        assert p.draw(None) is BSG
        with pytest.raises(PreconditionError):
            p.update(BSG, 2.0)


class TestShiftingBandit:
    def test_parameters(self):
        b = ShiftingBandit(2, 100)
        assert b.eta == math.sqrt(2 * math.log(200) / 200)
        assert b.eta == pytest.approx(0.23022, abs=1e-4)
        assert b.gamma == b.eta / 2 and b.alpha == 1 / 100

    @pytest.mark.parametrize("K, T", [(0, 10), (3, 0)])
    def test_invalid(self, K, T):
        with pytest.raises(PreconditionError):
            ShiftingBandit(K, T)

    def test_uniform_start(self):
        assert ShiftingBandit(8, 1234).distribution() == pytest.approx([1 / 8] * 8)

    @given(st.lists(rewards, max_size=50))
    def test_single_arm(self, rs):
        b = ShiftingBandit(1, 10)
        for r in rs:
            b.update(0, r)
            assert list(b.distribution()) == [1.0]

    def test_reward_one_only_mixes(self):
        b = ShiftingBandit(3, 10)
        b.w = np.array([4.0, 1.0, 1.0])
        p = b.distribution()
        b.update(1, 1.0)
        assert b.distribution() == pytest.approx((1 - b.alpha) * p + b.alpha / 3)
        assert b.w.mean() == pytest.approx(1.0)

    def test_hand_trace_loss(self):
        b = ShiftingBandit(2, 10)
        b.update(0, 0.0)
        est0 = 1 - 1 / (0.5 + b.gamma)
        w = np.exp(b.eta * np.array([est0, 1.0]))
        w = (1 - b.alpha) * w + b.alpha / 2 * w.sum()
        assert b.w == pytest.approx(w / w.mean())

    @settings(max_examples=30)
    @given(st.lists(st.tuples(st.integers(0, 3), rewards), min_size=1, max_size=200))
    def test_floor_after_sharing(self, history):
        b = ShiftingBandit(4, 20)
        for a, r in history:
            b.update(a, r)
            p = b.distribution()
            assert abs(p.sum() - 1) <= 1e-12
            assert np.all(p >= b.alpha / 4 - 1e-15)

    def test_bernoulli_best_arm(self):
        wins = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            b = ShiftingBandit(2, 5000)
            for _ in range(5000):
                a = b.draw(rng)
                b.update(a, float(rng.random() < (0.8, 0.2)[a]))
            wins += b.distribution()[0] > 0.9
        assert wins >= 45

    def test_snapshot_independent(self):
        b = ShiftingBandit(3, 10)
        snap = copy.deepcopy(b)
        b.update(0, 0.0)
        assert not np.array_equal(snap.w, b.w)
