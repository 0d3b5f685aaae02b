"""2-D multi-robot multi-target tracking world.

Robots pick one of eight compass moves per step, sense targets inside a
disk field of view with range/bearing noise that grows with distance, and
share measurements. The per-step objective rewards keeping targets in view
and close to a robot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionError
from .submodular import SetFunction, normalize

DIRECTIONS = ("up", "down", "left", "right", "upleft", "upright", "downleft", "downright")
_S = 1 / math.sqrt(2)
UNIT_MOVES = np.array(
    [(0, 1), (0, -1), (-1, 0), (1, 0), (-_S, _S), (_S, _S), (-_S, -_S), (_S, -_S)]
)
_MOVE_ANGLES = [math.atan2(y, x) for x, y in UNIT_MOVES]
_EPS_D = 1e-9


@dataclass
class RobotSpec:
    start: tuple
    speed: float = 1.0
    fov: float = 10.0
    range_sigma0: float = 0.1
    bearing_sigma0: float = 0.02


@dataclass
class TargetSpec:
    waypoints: list
    speed: float = 0.5


@dataclass
class WorldConfig:
    robots: list
    targets: list
    T: int = 2000
    step_hz: float = 20.0
    smoothing: float = 0.0
    bounds: tuple | None = None

    def __post_init__(self):
        self.robots = [r if isinstance(r, RobotSpec) else RobotSpec(**r) for r in self.robots]
        self.targets = [g if isinstance(g, TargetSpec) else TargetSpec(**g) for g in self.targets]
        if not self.robots:
            raise PreconditionError("need at least one robot")
        if any(r.speed <= 0 or r.fov <= 0 for r in self.robots):
            raise PreconditionError("robot speeds and fields of view must be positive")
        slowest = min(r.speed for r in self.robots)
        if any(not 0 <= g.speed < slowest for g in self.targets):
            raise PreconditionError("every target must be slower than every robot")
        if any(len(g.waypoints) < 1 for g in self.targets):
            raise PreconditionError("target trajectories need at least one waypoint")
        if not 0 <= self.smoothing < 1:
            raise PreconditionError("smoothing must lie in [0, 1)")

    @property
    def d_max(self) -> float:
        return max(r.fov for r in self.robots)

    @property
    def r_max(self) -> float:
        return 4 * self.d_max * len(self.targets)

    @property
    def speeds(self) -> np.ndarray:
        return np.array([r.speed for r in self.robots])

    @property
    def fovs(self) -> np.ndarray:
        return np.array([r.fov for r in self.robots])


@dataclass
class WorldState:
    t: int
    robots: np.ndarray
    previous: np.ndarray
    targets: np.ndarray
    progress: np.ndarray
    estimates: np.ndarray
    observed: np.ndarray = field(default=None)

    def copy(self):
        return WorldState(
            self.t, self.robots.copy(), self.previous.copy(), self.targets.copy(),
            self.progress.copy(), self.estimates.copy(), self.observed.copy(),
        )


def polyline_point(waypoints, s: float) -> np.ndarray:
    """Point at arclength ``s`` along ``waypoints``; holds at the last one."""
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    for a, b in zip(pts[:-1], pts[1:]):
        seg = float(np.hypot(*(b - a)))
        if s <= seg:
            return a + (b - a) * (s / seg) if seg > 0 else a.copy()
        s -= seg
    return pts[-1].copy()


def initial_state(config: WorldConfig) -> WorldState:
    robots = np.array([r.start for r in config.robots], dtype=float)
    targets = np.array([polyline_point(g.waypoints, 0.0) for g in config.targets])
    m = len(config.targets)
    return WorldState(
        t=0,
        robots=robots,
        previous=robots.copy(),
        targets=targets.reshape(m, 2),
        progress=np.zeros(m),
        estimates=np.full((m, 2), np.nan),
        observed=np.zeros(m, dtype=bool),
    )


def step_targets(state: WorldState, config: WorldConfig) -> WorldState:
    """Advance every target by its speed along its predefined polyline."""
    out = state.copy()
    for j, g in enumerate(config.targets):
        out.progress[j] += g.speed
        out.targets[j] = polyline_point(g.waypoints, out.progress[j])
    out.t += 1
    return out


def apply_actions(state: WorldState, actions: dict, config: WorldConfig) -> WorldState:
    """Move each robot ``speed`` meters in its chosen compass direction."""
    out = state.copy()
    out.previous = state.robots.copy()
    for i, a in actions.items():
        out.robots[i] = state.robots[i] + config.robots[i].speed * UNIT_MOVES[a]
    if config.bounds is not None:
        xmin, xmax, ymin, ymax = config.bounds
        np.clip(out.robots[:, 0], xmin, xmax, out=out.robots[:, 0])
        np.clip(out.robots[:, 1], ymin, ymax, out=out.robots[:, 1])
    return out


def sense_and_fuse(state: WorldState, config: WorldConfig, rng) -> WorldState:
    """Noisy range/bearing sensing inside each field of view, fused by
    inverse-variance weighting into one shared estimate per target.

    One standard-normal pair is drawn per robot-target pair every step, so
    the noise stream does not depend on which targets are in view.
    """
    n, m = len(config.robots), len(config.targets)
    z = rng.standard_normal((n, m, 2))
    d_max = config.d_max
    fresh = np.full((m, 2), np.nan)
    observed = np.zeros(m, dtype=bool)
    for j in range(m):
        num = np.zeros(2)
        den = 0.0
        for i, r in enumerate(config.robots):
            delta = state.targets[j] - state.robots[i]
            d = float(np.hypot(*delta))
            if d > r.fov:
                continue
            scale = 1 + d / d_max
            sr, sb = r.range_sigma0 * scale, r.bearing_sigma0 * scale
            rng_meas = d + sr * z[i, j, 0]
            bearing = math.atan2(delta[1], delta[0]) + sb * z[i, j, 1]
            point = state.robots[i] + rng_meas * np.array([math.cos(bearing), math.sin(bearing)])
            var = sr * sr + (d * sb) ** 2
            w = 1.0 / var if var > 0 else 1e300
            num += w * point
            den += w
        if den > 0:
            observed[j] = True
            fresh[j] = num / den
    out = state.copy()
    lam = config.smoothing
    for j in range(m):
        if observed[j] and lam > 0 and state.observed[j]:
            out.estimates[j] = lam * state.estimates[j] + (1 - lam) * fresh[j]
        else:
            out.estimates[j] = fresh[j]
    out.observed = observed
    return out


def objective_value(positions, fovs, truth, estimates, d_max) -> float:
    """Raw tracking objective for robots at ``positions``.

    A target's term is ``-1 / sum(1/d_i)`` over robots that see it, with
    ``d_i`` the distance to the target's estimate (the truth is used when a
    target has no estimate); ``-4 d_max`` when no robot sees it. Terms are
    floored at ``-4 d_max``.
    """
    floor = -4.0 * d_max
    total = 0.0
    for j in range(len(truth)):
        tx, ty = truth[j]
        ex, ey = estimates[j]
        if ex != ex:
            ex, ey = tx, ty
        inv = 0.0
        seen = False
        zero = False
        for (px, py), fov in zip(positions, fovs):
            if math.hypot(tx - px, ty - py) > fov:
                continue
            seen = True
            d = math.hypot(ex - px, ey - py)
            if d == 0.0:
                zero = True
                break
            inv += 1.0 / max(d, _EPS_D)
        if not seen:
            total += floor
        elif not zero:
            total += max(-1.0 / inv, floor)
    return total


def moved_position(position, action, speed, bounds=None):
    x, y = position + speed * UNIT_MOVES[action]
    if bounds is not None:
        x = min(max(x, bounds[0]), bounds[1])
        y = min(max(y, bounds[2]), bounds[3])
    return (x, y)


def tracking_objective(state: WorldState, actions: dict, config: WorldConfig) -> float:
    """Raw objective of moving the robots in ``actions`` from their
    pre-step positions ``state.previous``; other robots are left out."""
    positions = [moved_position(state.previous[i], a, config.robots[i].speed, config.bounds)
                 for i, a in actions.items()]
    fovs = [config.robots[i].fov for i in actions]
    return objective_value(positions, fovs, state.targets, state.estimates, config.d_max)


def step_objective(state: WorldState, config: WorldConfig) -> SetFunction:
    """Normalized objective of the current step as a set function."""
    frozen = state.copy()
    n = len(config.robots)
    raw = SetFunction(lambda t, A: tracking_objective(frozen, A, config), [8] * n,
                      upper_bound=config.r_max)
    return normalize(raw, config.r_max)


def total_min_distance(state: WorldState) -> float:
    """Sum over targets of the distance to the nearest robot (true positions)."""
    diff = state.targets[:, None, :] - state.robots[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).min(axis=1).sum())


def best_direction(vector) -> int:
    """Compass move with the smallest angle to ``vector``; earlier move wins ties."""
    angle = math.atan2(vector[1], vector[0])
    best, best_err = 0, math.inf
    for k, a in enumerate(_MOVE_ANGLES):
        err = abs((angle - a + math.pi) % (2 * math.pi) - math.pi)
        if err < best_err - 1e-9:
            best, best_err = k, err
    return best


class WaypointCommand:
    """Command source steering each robot toward a point moving along its
    desired polyline at ``speeds[i]`` meters per step."""

    def __init__(self, polylines, speeds):
        if any(len(p) == 0 for p in polylines):
            raise PreconditionError("command polylines must be non-empty")
        self.polylines = [np.asarray(p, dtype=float).reshape(-1, 2) for p in polylines]
        self.speeds = list(speeds)

    def desired(self, i, t):
        return polyline_point(self.polylines[i], self.speeds[i] * t)

    def __call__(self, t, observation) -> dict:
        robots = observation.robots
        joint = {}
        for i in range(len(self.polylines)):
            delta = self.desired(i, t + 1) - robots[i]
            if math.hypot(*delta) < 1e-12:
                delta = self.desired(i, t + 2) - self.desired(i, t + 1)
                if math.hypot(*delta) < 1e-12:
                    delta = np.array([1.0, 0.0])
            joint[i] = best_direction(delta)
        return joint


def command_waypoint(polylines, speeds) -> WaypointCommand:
    return WaypointCommand(polylines, speeds)


class TrackingEnvironment:
    """Episode environment for the coordinators."""

    def __init__(self, config: WorldConfig):
        self.config = config
        self.action_counts = (8,) * len(config.robots)
        self.state = initial_state(config)
        self._rng = None

    def reset(self, noise_rng=None):
        self.state = initial_state(self.config)
        self._rng = noise_rng if noise_rng is not None else np.random.default_rng(0)

    def begin(self, t):
        if t > 0:
            self.state = step_targets(self.state, self.config)
        self.state.previous = self.state.robots.copy()
        return self.state

    def full_information(self, t):
        # full-knowledge objective: noiseless estimates at the true positions
        s = self.state.copy()
        s.previous = s.robots.copy()
        s.estimates = s.targets.copy()
        return step_objective(s, self.config)

    def execute(self, t, joint):
        moved = apply_actions(self.state, joint, self.config)
        self.state = sense_and_fuse(moved, self.config, self._rng)
        return step_objective(self.state, self.config)

    def metric(self):
        return total_min_distance(self.state)


def back_and_forth(a, b, speed, T):
    """Waypoints shuttling between ``a`` and ``b`` long enough for ``T`` steps."""
    a, b = tuple(map(float, a)), tuple(map(float, b))
    length = math.hypot(b[0] - a[0], b[1] - a[1])
    legs = int(math.ceil(speed * T / length)) + 1 if length > 0 else 1
    return [a if k % 2 == 0 else b for k in range(legs + 1)]


def scenario_suboptimal(T=2000, robot_speed=1.0, fov=4.0, target_speed=0.02,
                        half_width=3.0, spread=1.0):
    """Two robots, two targets; the command parks both robots far from the targets.

    The targets shuttle along two crossing lines near the middle of a
    bounded square arena. The command points every robot at a fixed spot
    far beyond the arena's lower-left corner, so command-following robots
    pin themselves in that corner and lose the targets at the far end of
    their oscillation.
    """
    h = spread
    lines = [((-h, -h / 2), (h, h / 2)), ((-h, h / 2), (h, -h / 2))]
    targets = [TargetSpec(back_and_forth(a, b, target_speed, T), target_speed) for a, b in lines]
    robots = [RobotSpec((-h, -h / 2 - 1), robot_speed, fov), RobotSpec((-h, h / 2 + 1), robot_speed, fov)]
    W = half_width
    config = WorldConfig(robots, targets, T=T, bounds=(-W, W, -W, W))
    far = (-50.0, -50.0)
    return config, WaypointCommand([[far], [far]], [0.0, 0.0])


def scenario_nearoptimal(T=2000, robot_speed=1.0, fov=5.0, target_speed=0.05,
                         crossing=0.85, gap=None):
    """Two robots, four targets in two crossing pairs; the command intercepts.

    Each pair of targets crosses on an X-shaped path around a horizontal
    line; the command moves each robot along the midpoint of its pair, which
    keeps both targets of the pair inside its field of view.
    """
    s = crossing * fov
    L = target_speed * T
    g = 3 * fov if gap is None else gap
    targets, polylines, robots = [], [], []
    for y0 in (-g, g):
        targets.append(TargetSpec([(-L / 2, y0 - s), (L / 2, y0 + s)], target_speed))
        targets.append(TargetSpec([(-L / 2, y0 + s), (L / 2, y0 - s)], target_speed))
        polylines.append([(-L / 2, y0), (L / 2, y0)])
        robots.append(RobotSpec((-L / 2 - 1, y0), robot_speed, fov))
    # the midpoint advances at the targets' horizontal speed
    mid_speed = target_speed * math.cos(math.atan2(2 * s, L))
    config = WorldConfig(robots, targets, T=T)
    return config, WaypointCommand(polylines, [mid_speed, mid_speed])


def random_tracking_objective(rng, n_robots=2, n_targets=2, extent=8.0):
    """Normalized objective of one step of a random small world."""
    robots = [RobotSpec(tuple(rng.uniform(-extent, extent, 2)), 1.0, float(rng.uniform(3, 8)))
              for _ in range(n_robots)]
    targets = [TargetSpec([tuple(rng.uniform(-extent, extent, 2))], 0.0) for _ in range(n_targets)]
    config = WorldConfig(robots, targets, T=1)
    state = initial_state(config)
    state = sense_and_fuse(state, config, rng)
    state.previous = state.robots.copy()
    return step_objective(state, config)
