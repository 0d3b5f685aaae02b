"""Bandit learners: EXP3-IX over the two strategies and a per-agent
shifting bandit.

Both learners keep their state as plain attributes and are updated in
place; ``copy.deepcopy`` gives an independent snapshot.
"""
from __future__ import annotations

import enum
import math

import numpy as np

from .exceptions import PreconditionError, StateCorruptionError

_RESCALE_AT = 1e150
# smallest weight ratio kept; below this the weaker arm would underflow to 0
_FLOOR = 1e-300


class Strategy(enum.IntEnum):
    EXT_COMM = 0
    BSG = 1


def _check_reward(reward):
    if not 0.0 <= reward <= 1.0:
        raise PreconditionError(f"reward {reward!r} outside [0, 1]")


def _draw(rng, p):
    # inverse-CDF draw; one uniform per call keeps streams aligned
    u = rng.random()
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, u * c[-1], side="right"), len(p) - 1))


class Exp3IX:
    """EXP3-IX over ``{EXT_COMM, BSG}``.

    ``mode="paper"`` divides the exponent by the l1 norm of the reward
    estimate vector; ``mode="standard"`` omits that division.
    """

    n_arms = 2

    def __init__(self, T: int, mode: str = "paper"):
        if T < 1:
            raise PreconditionError("horizon T must be >= 1")
        if mode not in ("paper", "standard"):
            raise PreconditionError(f"unknown update mode {mode!r}")
        self.T = int(T)
        self.mode = mode
        self.eta = math.sqrt(math.log(2) / T)
        self.gamma = self.eta / 2
        self.z = np.ones(2)
        self.t = 1

    def distribution(self) -> np.ndarray:
        z = self.z
        if not (np.all(np.isfinite(z)) and np.all(z > 0)):
            raise StateCorruptionError(f"invalid weights {z}")
        return z / z.sum()

    def draw(self, rng) -> Strategy:
        return Strategy(_draw(rng, self.distribution()))

    def estimates(self, chosen: Strategy, reward: float) -> np.ndarray:
        """Optimistically biased reward estimates for both strategies."""
        q = self.distribution()
        r = np.ones(2)
        r[chosen] = 1.0 - (1.0 - reward) / (q[chosen] + self.gamma)
        return r

    def update(self, chosen: Strategy, reward: float):
        _check_reward(reward)
        r = self.estimates(chosen, reward)
        if self.mode == "paper":
            norm = np.abs(r).sum()
            # unchosen estimate is exactly 1, so the norm never vanishes
            assert norm > 0
            r = r / norm
        self.z = self.z * np.exp(self.eta * r)
        top = self.z.max()
        if top > _RESCALE_AT:
            self.z = self.z / top
            top = 1.0
        self.z = np.maximum(self.z, top * _FLOOR)
        self.t += 1
        return self


class PinnedStrategy:
    """Degenerate meta-learner that always plays one strategy."""

    def __init__(self, strategy: Strategy):
        self.strategy = Strategy(strategy)
        self.t = 1

    def distribution(self):
        q = np.zeros(2)
        q[self.strategy] = 1.0
        return q

    def draw(self, rng) -> Strategy:
        return self.strategy

    def update(self, chosen, reward):
        _check_reward(reward)
        self.t += 1
        return self


class ShiftingBandit:
    """Per-agent learner over ``K`` actions.

    A stand-in for a shifting-regret bandit learner; it is not a
    reproduction of any particular published variant.

    Implicit-exploration reward estimates, exponential weights, then a
    fixed-share mix toward uniform so the learner can follow a best action
    that moves over time. Weights are rescaled to mean 1 after each update.
    """

    def __init__(self, K: int, T: int):
        if K < 1 or T < 1:
            raise PreconditionError("need K >= 1 and T >= 1")
        self.K = int(K)
        self.T = int(T)
        self.eta = math.sqrt(2 * math.log(K * T) / (K * T))
        self.gamma = self.eta / 2
        self.alpha = 1.0 / T
        self.w = np.ones(K)
        self.t = 1

    def distribution(self) -> np.ndarray:
        w = self.w
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise StateCorruptionError(f"invalid weights {w}")
        return w / w.sum()

    def draw(self, rng) -> int:
        return _draw(rng, self.distribution())

    def update(self, chosen: int, reward: float):
        _check_reward(reward)
        p = self.distribution()
        r = np.ones(self.K)
        r[chosen] = 1.0 - (1.0 - reward) / (p[chosen] + self.gamma)
        w = self.w * np.exp(self.eta * r)
        w = (1.0 - self.alpha) * w + (self.alpha / self.K) * w.sum()
        self.w = w / w.mean()
        self.t += 1
        return self
