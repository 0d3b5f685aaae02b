import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_coord.exceptions import (
    BanditFeedbackViolation,
    ContractError,
    EnumerationBudgetError,
    PreconditionError,
)
from bandit_coord.submodular import (
    TOL,
    CoverageFunction,
    FeedbackGate,
    SetFunction,
    enumeration_cost,
    gated_evaluate,
    is_subset,
    joint_key,
    marginal_gain,
    normalize,
    random_coverage,
    verify_submodular,
)
from bandit_coord.tracksim import (
    RobotSpec,
    TargetSpec,
    WorldConfig,
    initial_state,
    random_tracking_objective,
    sense_and_fuse,
    tracking_objective,
)


def all_partial(counts):
    for choice in itertools.product(*[range(-1, k) for k in counts]):
        yield {i: a for i, a in enumerate(choice) if a >= 0}


@pytest.fixture
def small_coverage():
    # agent 0: action 0 covers {0,1,2}, action 1 covers {3}
    # agent 1: action 0 covers {2}, action 1 covers {0,1}
    return CoverageFunction([[[0, 1, 2], [3]], [[2], [0, 1]]], [1.0, 1.0, 1.0, 1.0])


class TestMarginalGain:
    def test_gain_from_empty(self, small_coverage):
        assert marginal_gain(small_coverage, 0, (0, 0), {}) == 3.0

    def test_fully_overlapped_gain_is_zero(self, small_coverage):
        assert marginal_gain(small_coverage, 0, (1, 1), {0: 0}) == 0.0

    def test_assigned_agent_rejected(self, small_coverage):
        with pytest.raises(PreconditionError):
            marginal_gain(small_coverage, 0, (0, 1), {0: 0})

    def test_diminishing_returns_random_two_agent(self):
        rng = np.random.default_rng(7)
        f = random_coverage(rng, 2, 4)
        for a in range(4):
            for b in range(4):
                assert marginal_gain(f, 0, (0, a), {}) >= marginal_gain(f, 0, (0, a), {1: b}) - TOL


class TestVerify:
    def test_coverage_passes(self, small_coverage):
        assert verify_submodular(normalize(small_coverage, 4.0), 0) is None

    def test_square_of_size_is_caught(self):
        f = SetFunction(lambda t, A: len(A) ** 2, [2, 2])
        cex = verify_submodular(f, 0)
        assert cex is not None and cex.kind == "submodularity"
        i, a = cex.element
        A, B = cex.A, cex.B
        assert is_subset(A, B) and i not in B
        assert cex.values[0] < cex.values[1]
        assert "submodularity" in str(cex)

    def test_unnormalized_is_caught(self):
        f = SetFunction(lambda t, A: 1.0 + len(A), [2])
        assert verify_submodular(f, 0).kind == "normalization"

    def test_decreasing_is_caught(self):
        f = SetFunction(lambda t, A: -float(len(A)), [2, 2])
        assert verify_submodular(f, 0).kind == "monotonicity"

    def test_tracking_objective_passes(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            assert verify_submodular(random_tracking_objective(rng), 0) is None

    def test_budget_refusal(self):
        f = SetFunction(lambda t, A: 0.0, [8] * 6)
        with pytest.raises(EnumerationBudgetError) as info:
            verify_submodular(f, 0)
        assert info.value.required == 17 ** 6
        assert info.value.budget == 10 ** 6

    def test_enumeration_cost_counts_subset_pairs(self):
        counts = (2, 3)
        pairs = sum(1 for B in all_partial(counts) for A in all_partial(counts) if is_subset(A, B))
        assert enumeration_cost(counts) == pairs == 5 * 7

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
    def test_random_coverage_always_passes(self, seed, n_agents, n_actions):
        f = random_coverage(np.random.default_rng(seed), n_agents, n_actions)
        assert verify_submodular(normalize(f, f.upper_bound), 0) is None


class TestNormalize:
    def test_constant_maps_to_zero(self):
        g = normalize(SetFunction(lambda t, A: -7.0, [3]), 5.0)
        assert all(g(0, A) == 0.0 for A in all_partial([3]))

    def test_upper_bound_maps_to_one(self):
        g = normalize(SetFunction(lambda t, A: -3.0 + (5.0 if A else 0.0), [2]), 5.0)
        assert g(0, {0: 1}) == 1.0

    def test_tracking_single_robot_at_distance_two(self):
        cfg = WorldConfig([RobotSpec((0.0, 0.0), fov=10.0, range_sigma0=0.0, bearing_sigma0=0.0)],
                          [TargetSpec([(3.0, 0.0)], speed=0.0)], T=1)
        state = sense_and_fuse(initial_state(cfg), cfg, np.random.default_rng(0))
        # one step right leaves the robot 2 m from the noiseless estimate
        state.previous = state.robots.copy()
        right = 3
        raw = SetFunction(lambda t, A: tracking_objective(state, A, cfg), [8])
        assert raw(0, {}) == -40.0
        assert raw(0, {0: right}) == pytest.approx(-2.0)
        g = normalize(raw, cfg.r_max)
        assert cfg.r_max == 40.0
        assert g(0, {0: right}) == pytest.approx(0.95)

    def test_out_of_bounds_raises_with_location(self):
        g = normalize(SetFunction(lambda t, A: 10.0 * len(A), [2]), 5.0)
        with pytest.raises(ContractError, match=r"t=4"):
            g(4, {0: 1})

    def test_non_positive_rmax(self):
        with pytest.raises(PreconditionError):
            normalize(SetFunction(lambda t, A: 0.0, [1]), 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-50, 50), st.floats(1.0, 10.0))
    def test_argmax_preserved(self, seed, shift, scale):
        f = random_coverage(np.random.default_rng(seed), 2, 3)
        raw = SetFunction(lambda t, A: shift + scale * f(t, A), f.action_counts)
        g = normalize(raw, scale * f.upper_bound)
        joints = [dict(enumerate(c)) for c in itertools.product(range(3), range(3))]
        best_raw = max(raw(0, A) for A in joints)
        best_g = max(g(0, A) for A in joints)
        arg_raw = {joint_key(A) for A in joints if raw(0, A) >= best_raw - 1e-9}
        arg_g = {joint_key(A) for A in joints if g(0, A) >= best_g - 1e-9 / scale}
        assert arg_raw == arg_g


class TestGate:
    def test_full_and_empty_queries(self, small_coverage):
        gate = FeedbackGate()
        gate.register({0: 0, 1: 1})
        assert gated_evaluate(gate, small_coverage, 0, {0: 0, 1: 1}) == 3.0
        assert gated_evaluate(gate, small_coverage, 0, {}) == 0.0
        assert gate.query_log == [((0, 0), (1, 1)), ()]

    def test_unexecuted_action_raises(self, small_coverage):
        gate = FeedbackGate()
        gate.register({0: 0, 1: 1})
        with pytest.raises(BanditFeedbackViolation):
            gated_evaluate(gate, small_coverage, 0, {0: 1})
        assert gate.query_log == []

    def test_unregistered_gate_raises(self, small_coverage):
        with pytest.raises(BanditFeedbackViolation):
            FeedbackGate().evaluate(small_coverage, 0, {})

    def test_register_resets_log(self, small_coverage):
        gate = FeedbackGate()
        gate.register({0: 0})
        gate.evaluate(small_coverage, 0, {0: 0})
        gate.register({0: 1})
        assert gate.query_log == []


class TestCoverage:
    def test_time_varying_weights(self):
        f = CoverageFunction([[[0], [1]]], [[1.0, 0.0], [0.0, 2.0]])
        assert f.horizon == 2
        assert (f(0, {0: 0}), f(1, {0: 0}), f(1, {0: 1})) == (1.0, 0.0, 2.0)
        assert f.upper_bound == 2.0

    def test_negative_weights_rejected(self):
        with pytest.raises(PreconditionError):
            CoverageFunction([[[0]]], [-1.0])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.permutations([0, 1, 2]))
    def test_monotone_along_any_prefix_chain(self, seed, order):
        f = random_coverage(np.random.default_rng(seed), 3, 3)
        joint = {0: seed % 3, 1: (seed // 3) % 3, 2: (seed // 9) % 3}
        A, values = {}, [f(0, {})]
        for i in order:
            A[i] = joint[i]
            values.append(f(0, A))
        assert all(b >= a for a, b in zip(values, values[1:]))
