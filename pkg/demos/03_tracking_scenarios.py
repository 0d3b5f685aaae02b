# %% [markdown]
# # Tracking with untrustworthy commands
#
# Scenario A: two robots, two targets, and a command that parks both robots in
# a corner of the arena. Scenario B: two robots, four targets, and a command
# that flies each robot down the middle of a crossing pair.
#
# Full-size runs (50 trials, T=2000) are what the CLI does:
#
#     python -m bandit_coord simulate --config demos/configs/scenario_a.json
#
# Here we use a handful of trials so the notebook runs in about a minute.

# %%
import numpy as np

from bandit_coord import harness
from bandit_coord.oracle import delta_T, hindsight_optimal, objectives_of
from bandit_coord.coordination import run_episode
from bandit_coord.tracksim import TrackingEnvironment, scenario_suboptimal

for scenario in ("twoVtwo_suboptimal", "twoVfour_nearoptimal"):
    cfg = harness.ExperimentConfig(scenario=scenario, trials=4, T=2000)
    summary = harness.summarize(harness.simulate(cfg))
    print(scenario)
    for name, entry in summary["algorithms"].items():
        value = entry["cumulative_value"]["mean"]
        dist = entry["final_quartile_total_min_distance"]["mean"]
        print(f"  {name:12s} cumulative value {value:7.1f}   final-quartile distance {dist:8.2f}")
    mass = summary["algorithms"]["MetaBSG"]["final_quartile_strategy_mass"]
    print(f"  MetaBSG mass on BSG {mass['BSG']['mean']:.2f}, on ExtComm {mass['EXT_COMM']['mean']:.2f}")

# %% [markdown]
# The hindsight optimum of a tracking trace is taken over that trace's own
# objectives, since the objective at each step depends on where the robots
# already are.

# %%
world, command = scenario_suboptimal(T=200)
trace = run_episode("MetaBSG", TrackingEnvironment(world), 200, command, seed=0,
                    keep_objectives=True)
sol = hindsight_optimal(objectives_of(trace))
print(f"MetaBSG {trace.total:.1f} of hindsight optimum {sol.total_value:.1f}; "
      f"optimal actions shift {delta_T(sol)} times")
print("BSG mass over the last 50 steps:", np.round(trace.strategy_mass(1)[-50:].mean(), 2))
