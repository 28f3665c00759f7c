"""Deterministic 2D rollout engine: bicycle dynamics, collision tests,
ray sensing, reward shaping, and episode rollouts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import inverse_actions
from .errors import OverrideError
from .geometry import (Polyline, obb_corners, obb_overlap, polygon_segments,
                       ray_hits, wrap_angle)
from .scenario import Scenario, Track, Vec2, VehicleState

N_RAYS = 16
RAY_MAX = 30.0
NAV_LOOKAHEAD = 5.0
FINISH_TOLERANCE = 0.25

# reward coefficients (progress-dominant shaping)
W_PROGRESS = 1.0
W_SPEED = 0.1
P_OFFROAD = 5.0
P_COLLISION = 10.0
B_FINISH = 10.0


@dataclass(frozen=True)
class SimConfig:
    a_max: float = 3.0
    a_brake: float = 6.0
    max_steer_angle: float = 0.5
    wheelbase: float = 2.8
    offroad_terminates: bool = True


@dataclass(frozen=True)
class AgentAction:
    steer: float
    accel_cmd: float

    def clamped(self) -> "AgentAction":
        return AgentAction(min(max(self.steer, -1.0), 1.0),
                           min(max(self.accel_cmd, -1.0), 1.0))


@dataclass(frozen=True)
class Observation:
    ego_speed: float
    heading_error: float
    lateral_offset: float
    nav_distance: float
    nav_bearing: float
    rays: tuple[float, ...]  # N_RAYS distances, capped at RAY_MAX


@dataclass(frozen=True)
class RolloutResult:
    ego_track: Track
    collided: bool
    collision_step: int | None
    offroad: bool
    finished: bool
    route_completion: float
    total_return: float
    per_step: tuple[tuple[Observation, AgentAction, float], ...] | None
    final_obs: Observation | None = None  # observation at the last state (recorded runs)

    def to_jsonable(self) -> dict:
        steps = None
        if self.per_step is not None:
            steps = [{
                "obs": {
                    "ego_speed": o.ego_speed,
                    "heading_error": o.heading_error,
                    "lateral_offset": o.lateral_offset,
                    "nav": [o.nav_distance, o.nav_bearing],
                    "rays": list(o.rays),
                },
                "action": [a.steer, a.accel_cmd],
                "reward": r,
            } for o, a, r in self.per_step]
        return {
            "ego_track": {
                "vehicle_id": self.ego_track.vehicle_id,
                "length": self.ego_track.length,
                "width": self.ego_track.width,
                "samples": [[s.position.x, s.position.y, s.heading, s.speed, s.accel]
                            for s in self.ego_track.samples],
            },
            "collided": self.collided,
            "collision_step": self.collision_step,
            "offroad": self.offroad,
            "finished": self.finished,
            "route_completion": self.route_completion,
            "total_return": self.total_return,
            "per_step": steps,
        }


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

def step_bicycle(state: VehicleState, action: AgentAction, cfg: SimConfig,
                 dt: float) -> VehicleState:
    """Kinematic bicycle update; inputs are clamped, speed never goes negative."""
    act = action.clamped()
    a = act.accel_cmd * cfg.a_max if act.accel_cmd >= 0 else act.accel_cmd * cfg.a_brake
    new_speed = max(0.0, state.speed + a * dt)
    effective_a = (new_speed - state.speed) / dt
    yaw_rate = state.speed / cfg.wheelbase * math.tan(act.steer * cfg.max_steer_angle)
    new_heading = wrap_angle(state.heading + yaw_rate * dt)
    mean_heading = state.heading + 0.5 * yaw_rate * dt
    dist = 0.5 * (state.speed + new_speed) * dt
    return VehicleState(
        Vec2(state.position.x + dist * math.cos(mean_heading),
             state.position.y + dist * math.sin(mean_heading)),
        new_heading, new_speed, effective_a)


def detect_collision(a: VehicleState, a_dims: tuple[float, float],
                     b: VehicleState, b_dims: tuple[float, float]) -> bool:
    """Oriented-rectangle overlap (separating-axis test); symmetric in arguments."""
    return obb_overlap(a.position.x, a.position.y, a.heading, a_dims[0], a_dims[1],
                       b.position.x, b.position.y, b.heading, b_dims[0], b_dims[1])


# ---------------------------------------------------------------------------
# sensing
# ---------------------------------------------------------------------------

def _ray_dirs(heading: float) -> np.ndarray:
    ang = heading + np.arange(N_RAYS) * (2.0 * math.pi / N_RAYS)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _cast(ego: VehicleState, ego_dims: tuple[float, float], dirs: np.ndarray,
          segments: np.ndarray) -> tuple[float, ...]:
    origin = (ego.position.x, ego.position.y)
    # rays start at the ego body boundary, not the center
    own = polygon_segments(obb_corners(ego.position.x, ego.position.y, ego.heading,
                                       ego_dims[0], ego_dims[1]))
    p = own[:, 0, :]
    e = own[:, 1, :] - p
    w = p - np.asarray(origin)
    denom = dirs[:, None, 0] * e[None, :, 1] - dirs[:, None, 1] * e[None, :, 0]
    num_t = w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]
    num_u = (w[None, :, 0] * dirs[:, None, 1] - w[None, :, 1] * dirs[:, None, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num_t[None, :] / denom
        u = num_u / denom
    valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= -1e-9) & (u <= 1.0 + 1e-9)
    exit_t = np.where(valid, t, 0.0).max(axis=1)

    hit = ray_hits(origin, dirs, segments, RAY_MAX + exit_t.max() + 1.0)
    d = np.clip(hit - exit_t, 0.0, RAY_MAX)
    return tuple(float(v) for v in d)


def raycast(ego: VehicleState, others, road, ego_dims=(4.5, 2.0),
            static_segments: np.ndarray | None = None) -> tuple[float, ...]:
    """16 evenly spaced distances in the ego frame, capped at RAY_MAX.

    ``others`` is an iterable of (VehicleState, (length, width)).
    ``static_segments`` may carry the precomputed road outline.
    """
    segs = []
    if static_segments is None:
        static_segments = polygon_segments(road.area_array())
    segs.append(static_segments)
    for state, dims in others:
        segs.append(polygon_segments(obb_corners(
            state.position.x, state.position.y, state.heading, dims[0], dims[1])))
    segments = np.concatenate(segs, axis=0) if segs else np.zeros((0, 2, 2))
    return _cast(ego, ego_dims, _ray_dirs(ego.heading), segments)


# ---------------------------------------------------------------------------
# reward
# ---------------------------------------------------------------------------

def _reward_value(progress_delta: float, speed: float, collided: bool,
                  offroad: bool, finished: bool) -> float:
    r = W_PROGRESS * progress_delta + W_SPEED * (speed / 10.0)
    if offroad:
        r -= P_OFFROAD
    if collided:
        r -= P_COLLISION
    if finished:
        r += B_FINISH
    return r


def reward(prev: VehicleState, cur: VehicleState, events: dict, route) -> float:
    """Per-step reward: progress along the route, small speed bonus, event terms.

    ``events`` carries booleans ``collided``, ``offroad``, ``finished``;
    ``route`` is a waypoint sequence or Polyline.
    """
    line = route if isinstance(route, Polyline) else Polyline([[p.x, p.y] for p in route])
    s_prev, _, _, _ = line.project(prev.position.x, prev.position.y)
    s_cur, _, _, _ = line.project(cur.position.x, cur.position.y)
    return _reward_value(s_cur - s_prev, cur.speed,
                         bool(events.get("collided")), bool(events.get("offroad")),
                         bool(events.get("finished")))


# ---------------------------------------------------------------------------
# agents
# ---------------------------------------------------------------------------

class ReplayAgent:
    """Ego driver that re-emits the logged ego track verbatim."""

    def act(self, obs: Observation) -> AgentAction:  # pragma: no cover - not used
        return AgentAction(0.0, 0.0)


# ---------------------------------------------------------------------------
# rollout
# ---------------------------------------------------------------------------

@dataclass
class _SceneCache:
    """Precomputed per-scenario geometry reused across many rollouts."""
    route: Polyline
    road_segments: np.ndarray
    area: np.ndarray
    _px: np.ndarray = None
    _py: np.ndarray = None
    _qx: np.ndarray = None
    _qy: np.ndarray = None

    @classmethod
    def build(cls, scenario: Scenario) -> "_SceneCache":
        area = scenario.road.area_array()
        nxt = np.roll(area, -1, axis=0)
        return cls(route=Polyline([[p.x, p.y] for p in scenario.route]),
                   road_segments=polygon_segments(area), area=area,
                   _px=area[:, 0], _py=area[:, 1], _qx=nxt[:, 0], _qy=nxt[:, 1])

    def inside(self, x: float, y: float) -> bool:
        # vectorized even-odd crossing test (no boundary tolerance; the
        # validation path keeps the tolerant variant)
        cond = (self._py > y) != (self._qy > y)
        if not cond.any():
            return False
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = self._qx + (y - self._qy) * (self._px - self._qx) / (self._py - self._qy)
        return bool(np.count_nonzero(cond & (x < x_cross)) & 1)


_scene_cache: dict[int, tuple[str, _SceneCache]] = {}


def _cache_for(scenario: Scenario) -> _SceneCache:
    key = id(scenario)
    hit = _scene_cache.get(key)
    if hit is not None and hit[0] == scenario.id:
        return hit[1]
    built = _SceneCache.build(scenario)
    if len(_scene_cache) > 512:
        _scene_cache.clear()
    _scene_cache[key] = (scenario.id, built)
    return built


def _observe(state: VehicleState, others, cache: _SceneCache,
             ego_dims: tuple[float, float]) -> Observation:
    s, lat, tangent, _ = cache.route.project(state.position.x, state.position.y)
    nx, ny, _ = cache.route.point_at(min(s + NAV_LOOKAHEAD, cache.route.length))
    dxn, dyn = nx - state.position.x, ny - state.position.y
    nav_dist = math.hypot(dxn, dyn)
    nav_bearing = wrap_angle(math.atan2(dyn, dxn) - state.heading) if nav_dist > 1e-9 else 0.0
    rays = raycast(state, others, None, ego_dims=ego_dims,
                   static_segments=cache.road_segments)
    return Observation(ego_speed=state.speed,
                       heading_error=wrap_angle(state.heading - tangent),
                       lateral_offset=lat,
                       nav_distance=nav_dist,
                       nav_bearing=nav_bearing,
                       rays=rays)


def rollout(scenario: Scenario, agent, cfg: SimConfig = SimConfig(),
            plan=None, record_steps: bool = True) -> RolloutResult:
    """Roll an episode: ego driven by ``agent`` (or replayed), background
    replayed from logs with optional adversarial overrides from attack_start on.

    Terminates at collision, off-road (if configured), route completion, or
    horizon. Deterministic given a deterministic agent.
    """
    cache = _cache_for(scenario)
    T = scenario.horizon_steps
    t0 = scenario.attack_start
    dt = scenario.dt
    bg = scenario.background
    overrides: dict[int, tuple[VehicleState, ...]] = {}
    if plan is not None:
        known = {t.vehicle_id for t in bg}
        for vid in plan.selections:
            if vid not in known:
                raise OverrideError(f"override for unknown vehicle_id {vid}")
        overrides = {vid: tuple(states) for vid, states in plan.selections.items()}

    def bg_state(track: Track, k: int) -> VehicleState:
        ov = overrides.get(track.vehicle_id)
        if ov is not None and k >= t0:
            j = k - t0
            return ov[j] if j < len(ov) else ov[-1]
        return track.samples[k]

    replay = isinstance(agent, ReplayAgent)
    ego_dims = scenario.ego.dims
    ego_states = [scenario.ego.samples[0]]
    per_step: list[tuple[Observation, AgentAction, float]] = []
    total = 0.0
    collided = False
    collision_step: int | None = None
    offroad_hit = False
    s_raw, _, _, _ = cache.route.project(ego_states[0].position.x, ego_states[0].position.y)
    progress_max = s_raw
    finished = False

    for k in range(T - 1):
        state = ego_states[-1]
        others = [(bg_state(t, k), t.dims) for t in bg]
        obs = None
        if record_steps or not replay:
            obs = _observe(state, others, cache, ego_dims)
        if replay:
            nxt = scenario.ego.samples[k + 1]
            if record_steps:
                steer, accel_cmd = inverse_actions(state, nxt, dt, cfg.wheelbase,
                                                   cfg.max_steer_angle, cfg.a_max, cfg.a_brake)
                action = AgentAction(steer, accel_cmd)
            else:
                action = AgentAction(0.0, 0.0)
        else:
            action = agent.act(obs).clamped()
            nxt = step_bicycle(state, action, cfg, dt)
        ego_states.append(nxt)

        others_next = [(bg_state(t, k + 1), t.dims) for t in bg]
        hit = False
        for st, dims in others_next:
            if detect_collision(nxt, ego_dims, st, dims):
                hit = True
                break
        off = not cache.inside(nxt.position.x, nxt.position.y)
        s_new, _, _, _ = cache.route.project(nxt.position.x, nxt.position.y)
        fin = s_new >= cache.route.length - FINISH_TOLERANCE
        r = _reward_value(s_new - s_raw, nxt.speed, hit, off, fin)
        total += r
        s_raw = s_new
        progress_max = max(progress_max, s_new)
        if record_steps:
            per_step.append((obs if obs is not None else
                             _observe(state, others, cache, ego_dims), action, r))
        if hit:
            collided = True
            collision_step = k + 1
            break
        if off:
            offroad_hit = True
            if cfg.offroad_terminates:
                break
        if fin:
            finished = True
            break

    completion = min(max(progress_max / cache.route.length, 0.0), 1.0) \
        if cache.route.length > 0 else 0.0
    final_obs = None
    if record_steps:
        k_last = len(ego_states) - 1
        final_obs = _observe(ego_states[-1],
                             [(bg_state(t, k_last), t.dims) for t in bg],
                             cache, ego_dims)
    ego_track = Track(vehicle_id=scenario.ego.vehicle_id, samples=tuple(ego_states),
                      length=ego_dims[0], width=ego_dims[1])
    return RolloutResult(ego_track=ego_track, collided=collided,
                         collision_step=collision_step, offroad=offroad_hit,
                         finished=finished, route_completion=completion,
                         total_return=total,
                         per_step=tuple(per_step) if record_steps else None,
                         final_obs=final_obs)


def ego_window(states: tuple[VehicleState, ...], attack_start: int,
               horizon_steps: int) -> tuple[VehicleState, ...]:
    """Ego trajectory over steps [attack_start, horizon), padded by holding
    the last state when the episode ended early."""
    want = horizon_steps - attack_start
    win = list(states[attack_start:attack_start + want])
    if not win:
        win = [states[-1]]
    while len(win) < want:
        win.append(win[-1])
    return tuple(win)
