"""Sequential Greedy, BSG and MetaBSG coordinators plus the episode driver.

An episode runs against an *environment*: an object with

- ``action_counts``: action-set size per agent,
- ``reset(noise_rng)``: start a new episode,
- ``begin(t)``: advance exogenous state to step ``t`` and return an
  observation for command sources,
- ``full_information(t)``: the step objective before anything is executed
  (only Sequential Greedy uses this),
- ``execute(t, joint)``: apply the joint action and return the step
  objective ``f_t`` as a :class:`SetFunction`,
- ``metric()``: a task metric after execution (``nan`` if none).

A stateless :class:`SetFunction` is wrapped by :class:`FunctionEnvironment`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import ContractError, PreconditionError
from .learners import Exp3IX, PinnedStrategy, ShiftingBandit, Strategy
from .submodular import TOL, FeedbackGate, SetFunction, joint_key

ALGORITHMS = ("SG", "BSG", "MetaBSG", "CommandOnly")

CommandSource = Callable[[int, object], dict]


class FunctionEnvironment:
    """Environment backed by a fixed time-indexed set function."""

    def __init__(self, f: SetFunction):
        self.f = f
        self.action_counts = f.action_counts

    def reset(self, noise_rng=None):
        pass

    def begin(self, t):
        return None

    def full_information(self, t):
        return self.f

    def execute(self, t, joint):
        return self.f

    def metric(self):
        return math.nan


def rng_streams(seed: int, n_agents: int) -> dict:
    """Independent named generators derived from one root seed."""

    def stream(k):
        return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))

    return {
        "meta": stream(0),
        "noise": stream(1),
        "agents": [stream(2 + i) for i in range(n_agents)],
    }


@dataclass
class StepRecord:
    t: int
    executed: dict
    rewards: np.ndarray
    value: float
    bsg_draw: dict | None = None
    command: dict | None = None
    strategy: Strategy | None = None
    q: np.ndarray | None = None
    p: list | None = None
    queries: list = field(default_factory=list)
    metric: float = math.nan
    objective: SetFunction | None = None


@dataclass
class EpisodeTrace:
    algorithm: str
    seed: int
    records: list
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def total(self) -> float:
        return float(sum(r.value for r in self.records))

    @property
    def metrics(self) -> np.ndarray:
        return np.array([r.metric for r in self.records])

    def strategy_mass(self, strategy=Strategy.EXT_COMM) -> np.ndarray:
        return np.array([r.q[strategy] for r in self.records])


def sequential_greedy(f: SetFunction, t: int, ordering: Sequence[int] | None = None) -> dict:
    """Each agent in turn takes the action with the largest marginal gain.

    Ties go to the lowest action index.
    """
    order = range(f.n_agents) if ordering is None else ordering
    A = {}
    current = f.evaluate(t, A)
    for i in order:
        if f.action_counts[i] < 1:
            raise PreconditionError(f"agent {i} has an empty action set")
        best, best_value = 0, -math.inf
        for a in range(f.action_counts[i]):
            v = f.evaluate(t, {**A, i: a})
            if v - current > best_value:
                best, best_value = a, v - current
        A[i] = best
        current += best_value
    return A


def _prefix_rewards(f, t, executed, gate, ordering):
    """Walk the prefix chain; one gated query per agent."""
    rewards = np.zeros(len(ordering))
    A = {}
    previous = 0.0
    for i in ordering:
        A[i] = executed[i]
        value = gate.evaluate(f, t, A)
        gain = value - previous
        if gain < -TOL or gain > 1.0 + TOL:
            raise ContractError(f"marginal gain {gain!r} of agent {i} at t={t} outside [0, 1]")
        rewards[i] = min(max(gain, 0.0), 1.0)
        previous = value
    return rewards, previous


def bsg_step(learners, env, t, gate, agent_rngs, ordering=None, keep_objective=False):
    """One step of Bandit Sequential Greedy."""
    ordering = list(range(len(learners))) if ordering is None else list(ordering)
    p = [learner.distribution() for learner in learners]
    draw = {i: learners[i].draw(agent_rngs[i]) for i in range(len(learners))}
    f = env.execute(t, draw)
    gate.register(draw)
    rewards, value = _prefix_rewards(f, t, draw, gate, ordering)
    for i in ordering:
        learners[i].update(draw[i], rewards[i])
    return StepRecord(
        t=t,
        executed=draw,
        rewards=rewards,
        value=value,
        bsg_draw=draw,
        p=p,
        queries=list(gate.query_log),
        metric=env.metric(),
        objective=f if keep_objective else None,
    )


def metabsg_step(meta, learners, env, t, command, gate, rngs, ordering=None, keep_objective=False):
    """One step of MetaBSG: draw BSG candidates, pick a strategy, execute,
    then update the agent learners and the meta-learner."""
    ordering = list(range(len(learners))) if ordering is None else list(ordering)
    p = [learner.distribution() for learner in learners]
    draw = {i: learners[i].draw(rngs["agents"][i]) for i in range(len(learners))}
    command = dict(command)
    if sorted(command) != list(range(len(learners))):
        raise PreconditionError(f"command {joint_key(command)} is not a complete joint action")
    q = meta.distribution()
    strategy = meta.draw(rngs["meta"])
    executed = draw if strategy == Strategy.BSG else command
    f = env.execute(t, executed)
    gate.register(executed)
    rewards, value = _prefix_rewards(f, t, executed, gate, ordering)
    for i in ordering:
        learners[i].update(executed[i], rewards[i])
    meta.update(strategy, min(max(value, 0.0), 1.0))
    return StepRecord(
        t=t,
        executed=executed,
        rewards=rewards,
        value=value,
        bsg_draw=draw,
        command=command,
        strategy=strategy,
        q=q,
        p=p,
        queries=list(gate.query_log),
        metric=env.metric(),
        objective=f if keep_objective else None,
    )


def run_episode(
    algorithm: str,
    env,
    T: int,
    command_source: CommandSource | None = None,
    seed: int = 0,
    meta_mode: str = "paper",
    ordering: Sequence[int] | None = None,
    meta=None,
    keep_objectives: bool = False,
) -> EpisodeTrace:
    """Run one episode of ``algorithm`` for ``T`` steps.

    ``env`` may be a SetFunction (wrapped automatically) or an environment.
    ``meta`` overrides the MetaBSG meta-learner, e.g. with a
    :class:`PinnedStrategy`.
    """
    if algorithm not in ALGORITHMS:
        raise PreconditionError(f"unknown algorithm {algorithm!r}")
    if isinstance(env, SetFunction):
        env = FunctionEnvironment(env)
    counts = env.action_counts
    n = len(counts)
    ordering = list(range(n)) if ordering is None else list(ordering)
    if sorted(ordering) != list(range(n)):
        raise PreconditionError("ordering must be a permutation of the agents")
    if algorithm in ("MetaBSG", "CommandOnly") and command_source is None:
        raise PreconditionError(f"{algorithm} needs a command source")

    rngs = rng_streams(seed, n)
    env.reset(rngs["noise"])
    config = {"algorithm": algorithm, "T": T, "seed": seed, "meta_mode": meta_mode,
              "ordering": ordering}
    records = []
    if T == 0:
        return EpisodeTrace(algorithm, seed, records, config)

    learners = [ShiftingBandit(k, T) for k in counts]
    if algorithm == "MetaBSG" and meta is None:
        meta = Exp3IX(T, mode=meta_mode)
    gate = FeedbackGate()

    for t in range(T):
        observation = env.begin(t)
        if algorithm == "BSG":
            rec = bsg_step(learners, env, t, gate, rngs["agents"], ordering, keep_objectives)
        elif algorithm == "MetaBSG":
            command = command_source(t, observation)
            rec = metabsg_step(meta, learners, env, t, command, gate, rngs, ordering,
                               keep_objectives)
        else:
            if algorithm == "SG":
                executed = sequential_greedy(env.full_information(t), t, ordering)
            else:
                executed = dict(command_source(t, observation))
            f = env.execute(t, executed)
            value = f.evaluate(t, executed)
            rewards = np.zeros(n)
            A, previous = {}, 0.0
            for i in ordering:
                A[i] = executed[i]
                v = f.evaluate(t, A)
                rewards[i] = v - previous
                previous = v
            rec = StepRecord(t=t, executed=executed, rewards=rewards, value=value,
                             command=executed if algorithm == "CommandOnly" else None,
                             metric=env.metric(),
                             objective=f if keep_objectives else None)
        records.append(rec)
    return EpisodeTrace(algorithm, seed, records, config)
