"""Set functions over partial joint actions.

A joint action is a ``dict`` mapping agent index to action index. Partial
joint actions (some agents unassigned) play the role of subsets of the
ground set; the one-action-per-agent rule is enforced by construction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .exceptions import (
    BanditFeedbackViolation,
    ContractError,
    EnumerationBudgetError,
    PreconditionError,
)

TOL = 1e-9
ENUMERATION_BUDGET = 10**6

JointAction = Mapping[int, int]


def joint_key(A: JointAction) -> tuple:
    """Hashable, order-independent key for a joint action."""
    return tuple(sorted(A.items()))


def is_subset(A: JointAction, B: JointAction) -> bool:
    return all(B.get(i) == a for i, a in A.items())


class SetFunction:
    """Time-indexed set function ``f_t(A)`` over partial joint actions.

    ``action_counts[i]`` is the size of agent ``i``'s action set.
    ``upper_bound`` is the per-step bound ``R_max`` on values.
    """

    def __init__(
        self,
        evaluate: Callable[[int, JointAction], float],
        action_counts: Sequence[int],
        horizon: int | None = None,
        upper_bound: float = 1.0,
    ):
        self._evaluate = evaluate
        self.action_counts = tuple(int(k) for k in action_counts)
        self.horizon = horizon
        self.upper_bound = float(upper_bound)

    @property
    def n_agents(self) -> int:
        return len(self.action_counts)

    def evaluate(self, t: int, A: JointAction) -> float:
        return float(self._evaluate(t, A))

    __call__ = evaluate


class CoverageFunction(SetFunction):
    """Weighted coverage: ``f(A) = sum of weights of elements covered by A``.

    ``covers[i][a]`` lists the element ids covered by action ``a`` of agent
    ``i``. ``weights`` is either one vector (static) or a ``(T, n)`` array
    giving the element weights at each step.
    """

    def __init__(self, covers, weights, horizon=None):
        self.covers = [[frozenset(c) for c in agent] for agent in covers]
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights < 0):
            raise PreconditionError("coverage weights must be non-negative")
        if self.weights.ndim == 2:
            horizon = self.weights.shape[0] if horizon is None else horizon
            bound = float(self.weights.sum(axis=1).max())
        else:
            bound = float(self.weights.sum())
        super().__init__(
            self._coverage,
            [len(agent) for agent in self.covers],
            horizon=horizon,
            upper_bound=max(bound, TOL),
        )

    def _coverage(self, t, A):
        w = self.weights[t] if self.weights.ndim == 2 else self.weights
        covered = set()
        for i, a in A.items():
            covered |= self.covers[i][a]
        return float(sum(w[e] for e in covered))


def random_coverage(rng, n_agents, n_actions, n_elements=8, density=0.35, weights=None):
    """Random coverage instance with ``n_actions`` actions per agent."""
    covers = []
    for _ in range(n_agents):
        agent = []
        for _ in range(n_actions):
            mask = rng.random(n_elements) < density
            agent.append(np.flatnonzero(mask).tolist())
        covers.append(agent)
    if weights is None:
        weights = rng.random(n_elements)
    return CoverageFunction(covers, weights)


def normalize(f_raw: SetFunction, r_max: float, tol: float = TOL) -> SetFunction:
    """Shift and scale ``f_raw`` so that ``g(t, {}) = 0`` and ``g <= 1``.

    Raises ContractError if a raw value falls outside
    ``[f_raw(t, {}), f_raw(t, {}) + r_max]``.
    """
    if not r_max > 0:
        raise PreconditionError("r_max must be positive")

    def g(t, A):
        base = f_raw.evaluate(t, {})
        value = (f_raw.evaluate(t, A) - base) / r_max
        if value < -tol or value > 1.0 + tol:
            raise ContractError(
                f"raw value at t={t}, A={joint_key(A)} is outside the declared bounds "
                f"(normalized {value!r})"
            )
        return value

    return SetFunction(g, f_raw.action_counts, horizon=f_raw.horizon, upper_bound=1.0)


def marginal_gain(f: SetFunction, t: int, a: tuple[int, int], A: JointAction) -> float:
    """``f_t(A + {a}) - f_t(A)`` where ``a = (agent, action)``."""
    agent, action = a
    if agent in A:
        raise PreconditionError(f"agent {agent} already assigned in {joint_key(A)}")
    bigger = dict(A)
    bigger[agent] = action
    return f.evaluate(t, bigger) - f.evaluate(t, A)


@dataclass
class Counterexample:
    """A violation found by :func:`verify_submodular`.

    ``kind`` is one of ``"normalization"``, ``"monotonicity"`` or
    ``"submodularity"``. For submodularity violations ``element`` is the
    added ``(agent, action)`` and ``values`` holds the two marginal gains.
    """

    kind: str
    A: dict
    B: dict
    element: tuple | None = None
    values: tuple = ()

    def __str__(self):
        return (
            f"{self.kind} violated: A={joint_key(self.A)}, B={joint_key(self.B)}, "
            f"element={self.element}, values={self.values}"
        )


def enumeration_cost(action_counts: Sequence[int]) -> int:
    """Number of ``(A, B)`` pairs with ``A`` a subset of ``B``."""
    return int(np.prod([1 + 2 * k for k in action_counts], dtype=object))


def verify_submodular(
    f: SetFunction, t: int, tol: float = TOL, budget: int = ENUMERATION_BUDGET
) -> Counterexample | None:
    """Exhaustively check normalization, monotonicity and diminishing returns.

    Returns ``None`` on success, otherwise the first violation found. Never
    samples: refuses with EnumerationBudgetError when the number of subset
    pairs exceeds ``budget``.
    """
    counts = f.action_counts
    required = enumeration_cost(counts)
    if required > budget:
        raise EnumerationBudgetError(required, budget)

    cache = {}

    def value(A):
        key = joint_key(A)
        if key not in cache:
            cache[key] = f.evaluate(t, A)
        return cache[key]

    empty = value({})
    if abs(empty) > tol:
        return Counterexample("normalization", {}, {}, values=(empty,))

    n = len(counts)
    for choice in itertools.product(*[range(-1, k) for k in counts]):
        B = {i: a for i, a in enumerate(choice) if a >= 0}
        fB = value(B)
        free = [i for i in range(n) if i not in B]
        assigned = sorted(B)
        for keep in itertools.product((False, True), repeat=len(assigned)):
            A = {i: B[i] for i, k in zip(assigned, keep) if k}
            fA = value(A)
            if fA > fB + tol:
                return Counterexample("monotonicity", A, dict(B), values=(fA, fB))
            for i in free:
                for a in range(counts[i]):
                    gain_A = value({**A, i: a}) - fA
                    gain_B = value({**B, i: a}) - fB
                    if gain_A < gain_B - tol:
                        return Counterexample(
                            "submodularity", A, dict(B), (i, a), (gain_A, gain_B)
                        )
    return None


@dataclass
class FeedbackGate:
    """Enforces bandit feedback: only subsets of the executed action are visible."""

    executed: dict | None = None
    query_log: list = field(default_factory=list)

    def register(self, executed: JointAction):
        self.executed = dict(executed)
        self.query_log = []

    def evaluate(self, f: SetFunction, t: int, A: JointAction) -> float:
        if self.executed is None:
            raise BanditFeedbackViolation("no executed joint action registered")
        if not is_subset(A, self.executed):
            raise BanditFeedbackViolation(
                f"query {joint_key(A)} is not a subset of executed "
                f"{joint_key(self.executed)}"
            )
        self.query_log.append(joint_key(A))
        return f.evaluate(t, A)


def gated_evaluate(gate: FeedbackGate, f: SetFunction, t: int, A: JointAction) -> float:
    return gate.evaluate(f, t, A)
