"""Bandit submodular multi-agent coordination with untrustworthy external commands."""
from .coordination import (
    ALGORITHMS,
    EpisodeTrace,
    FunctionEnvironment,
    StepRecord,
    bsg_step,
    metabsg_step,
    rng_streams,
    run_episode,
    sequential_greedy,
)
from .exceptions import (
    BanditFeedbackViolation,
    ContractError,
    EnumerationBudgetError,
    PreconditionError,
    StateCorruptionError,
)
from .learners import Exp3IX, PinnedStrategy, ShiftingBandit, Strategy
from .oracle import (
    HindsightSolution,
    RegretReport,
    bound_report,
    delta_T,
    empirical_beta,
    hindsight_optimal,
    min_shift_delta,
)
from .submodular import (
    CoverageFunction,
    FeedbackGate,
    SetFunction,
    gated_evaluate,
    marginal_gain,
    normalize,
    random_coverage,
    verify_submodular,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
