"""Hindsight-optimal brute force and regret analytics.

Actions do not couple across steps, so the hindsight optimum of a sequence
of objectives is the per-step argmax, computed independently for each t.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import EnumerationBudgetError, PreconditionError
from .submodular import ENUMERATION_BUDGET, TOL, SetFunction

PER_STEP_BUDGET = ENUMERATION_BUDGET


@dataclass
class HindsightSolution:
    """Per-step optimal joint actions.

    ``ties[t]`` lists every joint action (as a tuple of action indices)
    whose value is within ``TOL`` of the step maximum; ``per_step_optimal``
    holds the lexicographically first of them.
    """

    per_step_optimal: list
    per_step_value: np.ndarray
    ties: list = field(default_factory=list)

    def __len__(self):
        return len(self.per_step_optimal)

    @property
    def total_value(self) -> float:
        return float(np.sum(self.per_step_value))


def _objectives(f, T):
    if isinstance(f, SetFunction):
        if T is None:
            if f.horizon is None:
                raise PreconditionError("horizon T is required for a SetFunction without one")
            T = f.horizon
        return [f] * int(T), list(range(int(T)))
    fs = list(f)
    if T is not None and T != len(fs):
        raise PreconditionError(f"got {len(fs)} objectives for horizon {T}")
    return fs, list(range(len(fs)))


def hindsight_optimal(f, T: int | None = None, budget: int = PER_STEP_BUDGET) -> HindsightSolution:
    """Exact per-step argmax over complete joint actions.

    ``f`` is either one SetFunction evaluated at ``t = 0..T-1`` or a
    sequence of per-step SetFunctions (as recorded in an episode trace,
    each evaluated at its own index). Ties go to the lexicographically
    smallest joint action.
    """
    fs, steps = _objectives(f, T)
    optimal, values, ties = [], [], []
    for t, ft in zip(steps, fs):
        counts = ft.action_counts
        size = math.prod(counts)
        if size > budget:
            raise EnumerationBudgetError(size, budget)
        scored = []
        for combo in itertools.product(*[range(k) for k in counts]):
            scored.append((combo, ft.evaluate(t, dict(enumerate(combo)))))
        best = max(v for _, v in scored)
        tied = [c for c, v in scored if v >= best - TOL]
        # first strict maximum in lexicographic order
        first = next(c for c, v in scored if v == best)
        optimal.append(dict(enumerate(first)))
        values.append(best)
        ties.append(tied)
    return HindsightSolution(optimal, np.array(values, dtype=float), ties)


def _shifts(a: dict, b: dict) -> int:
    return sum(1 for i in a if a[i] != b.get(i))


def delta_T(solution: HindsightSolution) -> int:
    """Number of per-agent shifts in the optimal action sequence."""
    if len(solution) == 0:
        raise PreconditionError("solution must cover at least one step")
    seq = solution.per_step_optimal
    return int(sum(_shifts(seq[t], seq[t + 1]) for t in range(len(seq) - 1)))


def min_shift_delta(solution: HindsightSolution) -> int:
    """Smallest shift count over all sequences of tied optima."""
    if len(solution) == 0:
        raise PreconditionError("solution must cover at least one step")
    if not solution.ties:
        return delta_T(solution)
    prev_states = solution.ties[0]
    cost = np.zeros(len(prev_states), dtype=np.int64)
    for states in solution.ties[1:]:
        a = np.array(prev_states)
        b = np.array(states)
        hamming = (a[:, None, :] != b[None, :, :]).sum(axis=2)
        cost = (cost[:, None] + hamming).min(axis=0)
        prev_states = states
    return int(cost.min())


def _total(trace) -> float:
    if hasattr(trace, "values"):
        trace = trace.values
    return float(np.sum(np.asarray(trace, dtype=float)))


def _length(trace) -> int:
    if hasattr(trace, "records"):
        return len(trace.records)
    return len(trace)


def empirical_beta(command_trace, solution: HindsightSolution) -> float:
    """Command value as a fraction of the hindsight optimum, clamped to [0, 1].

    ``command_trace`` is an EpisodeTrace or the per-step command values.
    """
    opt = solution.total_value
    if not opt > 0:
        raise PreconditionError("empirical beta is undefined when the optimum total is 0")
    return min(max(_total(command_trace) / opt, 0.0), 1.0)


@dataclass
class RegretReport:
    opt_total: float
    bsg_total: float
    command_total: float
    meta_total: float
    delta_T: int
    min_shift_delta: int
    empirical_beta: float
    delta: float
    c: float
    T: int

    @property
    def meta_slack(self) -> float:
        """``meta - max(bsg, command)``; negative means MetaBSG fell short."""
        return self.meta_total - max(self.bsg_total, self.command_total)

    @property
    def half_slack(self) -> float:
        return self.bsg_total - 0.5 * self.opt_total

    @property
    def within_sqrt_T(self) -> bool:
        return self.meta_slack >= -self.c * math.sqrt(self.T)

    def as_dict(self) -> dict:
        return {
            "opt_total": self.opt_total,
            "bsg_total": self.bsg_total,
            "command_total": self.command_total,
            "meta_total": self.meta_total,
            "delta_T": self.delta_T,
            "min_shift_delta": self.min_shift_delta,
            "empirical_beta": self.empirical_beta,
            "delta": self.delta,
            "c": self.c,
            "T": self.T,
            "meta_slack": self.meta_slack,
            "half_slack": self.half_slack,
            "within_sqrt_T": self.within_sqrt_T,
        }


def bound_report(
    meta_trace,
    bsg_trace,
    command_trace,
    solution: HindsightSolution,
    delta: float = 0.05,
    c: float = 8.0,
    command_solution: HindsightSolution | None = None,
) -> RegretReport:
    """Totals, Δ(T), empirical β and the two bound slacks.

    When the command trace ran on a different objective sequence (the
    tracking world reacts to the robots), pass its own hindsight solution
    as ``command_solution`` so β compares like with like.
    """
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    T = len(solution)
    lengths = {_length(meta_trace), _length(bsg_trace), _length(command_trace), T}
    if command_solution is not None:
        lengths.add(len(command_solution))
    if len(lengths) != 1:
        raise PreconditionError(f"traces and solution disagree on the horizon: {sorted(lengths)}")
    beta_ref = solution if command_solution is None else command_solution
    beta = empirical_beta(command_trace, beta_ref) if beta_ref.total_value > 0 else math.nan
    return RegretReport(
        opt_total=solution.total_value,
        bsg_total=_total(bsg_trace),
        command_total=_total(command_trace),
        meta_total=_total(meta_trace),
        delta_T=delta_T(solution) if T else 0,
        min_shift_delta=min_shift_delta(solution) if T else 0,
        empirical_beta=beta,
        delta=delta,
        c=c,
        T=T,
    )


def objectives_of(trace) -> Sequence[SetFunction]:
    """Per-step objectives kept by ``run_episode(..., keep_objectives=True)``."""
    fs = [r.objective for r in trace.records]
    if any(f is None for f in fs):
        raise PreconditionError("trace was recorded without objectives")
    return fs
