"""Synthetic scenario corpus generator.

Builds collision-free "normal" traffic over four road templates (straight,
ramp, T-intersection, intersection). Background vehicles follow lane
centerlines with an IDM-style car-following rule; the logged ego track is
produced the same way so it can be replayed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import (clamp, curvature_speed_limit, idm_accel,
                      lat_limited_steer, pure_pursuit_steer)
from .engine import SimConfig, AgentAction, step_bicycle
from .errors import ConfigError
from .geometry import Polyline, obb_overlap, resample_polyline, wrap_angle
from .scenario import (DEFAULT_VEHICLE_LENGTH, DEFAULT_VEHICLE_WIDTH, ROAD_TEMPLATES,
                       RoadGeometry, Scenario, ScenarioSet, Track, Vec2, VehicleState,
                       q6, validate_scenario)

LANE_W = 3.5
X0, X1 = -30.0, 260.0
HORIZON_STEPS = 80
DT = 0.1
ATTACK_FRACTION = 0.2
LAT_ACC_MAX = 4.0
MIN_BG, MAX_BG = 3, 12
ROUTE_SPACING = 5.0

_CFG = SimConfig()


def _q_heading(h: float) -> float:
    """Quantize a heading without leaving (-pi, pi]."""
    hq = q6(wrap_angle(h))
    if hq > math.pi:
        hq = 3.141592
    elif hq <= -math.pi:
        hq = -3.141592
    return hq


def _arc(cx: float, cy: float, r: float, a0_deg: float, a1_deg: float, n: int = 9):
    ang = np.radians(np.linspace(a0_deg, a1_deg, n))
    return np.stack([cx + r * np.cos(ang), cy + r * np.sin(ang)], axis=1)


def _rect(x0, x1, y0, y1):
    return [Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)]


@dataclass
class _TemplateLayout:
    road: RoadGeometry
    routes: list[np.ndarray]        # traffic route polylines, direction of travel
    ego_route_ids: list[int]        # indices into routes the ego may take


def _lanes_to_vecs(lines) -> tuple[tuple[Vec2, ...], ...]:
    return tuple(tuple(Vec2(float(x), float(y)) for x, y in line) for line in lines)


def _build_straight(rng: np.random.Generator) -> _TemplateLayout:
    n_lanes = int(rng.integers(2, 4))
    top = (n_lanes - 1) * LANE_W + LANE_W / 2
    area = tuple(_rect(X0, X1, -LANE_W / 2, top))
    lanes = [np.array([[X0 + 0.5, i * LANE_W], [X1 - 0.5, i * LANE_W]])
             for i in range(n_lanes)]
    routes = [resample_polyline(l, ROUTE_SPACING) for l in lanes]
    road = RoadGeometry(_lanes_to_vecs(lanes), area, "straight")
    return _TemplateLayout(road, routes, list(range(n_lanes)))


def _build_ramp(rng: np.random.Generator) -> _TemplateLayout:
    area_pts = [
        Vec2(X0, -LANE_W / 2), Vec2(90.4, -LANE_W / 2),
        Vec2(38.85, -23.23), Vec2(41.15, -28.77),
        Vec2(106.0, -LANE_W / 2), Vec2(X1, -LANE_W / 2),
        Vec2(X1, LANE_W * 1.5), Vec2(X0, LANE_W * 1.5),
    ]
    lanes = [np.array([[X0 + 0.5, 0.0], [X1 - 0.5, 0.0]]),
             np.array([[X0 + 0.5, LANE_W], [X1 - 0.5, LANE_W]]),
             np.array([[40.0, -26.0], [88.0, -6.0], [96.0, -2.6]])]
    ramp_route = np.array([
        [40.0, -26.0], [70.0, -13.5], [88.0, -6.0], [96.0, -2.6],
        [104.0, -0.6], [112.0, 0.0], [X1 - 0.5, 0.0]])
    routes = [resample_polyline(lanes[0], ROUTE_SPACING),
              resample_polyline(lanes[1], ROUTE_SPACING),
              resample_polyline(ramp_route, ROUTE_SPACING)]
    road = RoadGeometry(_lanes_to_vecs(lanes), tuple(area_pts), "ramp")
    return _TemplateLayout(road, routes, [0, 1, 2])


def _t_junction_routes() -> list[np.ndarray]:
    east = np.array([[X0 + 0.5, 0.0], [X1 - 0.5, 0.0]])
    west = np.array([[X1 - 0.5, LANE_W], [X0 + 0.5, LANE_W]])
    north_leg = np.array([[38.25, -69.0], [38.25, -6.0]])
    right_arc = _arc(44.25, -6.0, 6.0, 180.0, 90.0)
    north_right = np.vstack([north_leg, right_arc[1:], [[X1 - 0.5, 0.0]]])
    left_leg = np.array([[38.25, -69.0], [38.25, -4.5]])
    left_arc = _arc(30.25, -4.5, 8.0, 0.0, 90.0)
    north_left = np.vstack([left_leg, left_arc[1:], [[X0 + 0.5, LANE_W]]])
    er_leg = np.array([[X0 + 0.5, 0.0], [35.75, 0.0]])
    er_arc = _arc(35.75, -6.0, 6.0, 90.0, 0.0)
    east_right = np.vstack([er_leg, er_arc[1:], [[41.75, -69.0]]])
    return [resample_polyline(r, ROUTE_SPACING)
            for r in (east, west, north_right, north_left, east_right)]


def _build_t_intersection(rng: np.random.Generator) -> _TemplateLayout:
    area = (Vec2(X0, -LANE_W / 2), Vec2(36.5, -LANE_W / 2), Vec2(36.5, -70.0),
            Vec2(43.5, -70.0), Vec2(43.5, -LANE_W / 2), Vec2(X1, -LANE_W / 2),
            Vec2(X1, LANE_W * 1.5), Vec2(X0, LANE_W * 1.5))
    lanes = [np.array([[X0 + 0.5, 0.0], [X1 - 0.5, 0.0]]),
             np.array([[X0 + 0.5, LANE_W], [X1 - 0.5, LANE_W]]),
             np.array([[38.25, -69.5], [38.25, -2.5]]),
             np.array([[41.75, -2.5], [41.75, -69.5]])]
    routes = _t_junction_routes()
    road = RoadGeometry(_lanes_to_vecs(lanes), area, "t_intersection")
    return _TemplateLayout(road, routes, [0, 2, 3])


def _build_intersection(rng: np.random.Generator) -> _TemplateLayout:
    area = (Vec2(X0, -LANE_W / 2), Vec2(36.5, -LANE_W / 2), Vec2(36.5, -70.0),
            Vec2(43.5, -70.0), Vec2(43.5, -LANE_W / 2), Vec2(X1, -LANE_W / 2),
            Vec2(X1, LANE_W * 1.5), Vec2(43.5, LANE_W * 1.5), Vec2(43.5, 70.0),
            Vec2(36.5, 70.0), Vec2(36.5, LANE_W * 1.5), Vec2(X0, LANE_W * 1.5))
    lanes = [np.array([[X0 + 0.5, 0.0], [X1 - 0.5, 0.0]]),
             np.array([[X0 + 0.5, LANE_W], [X1 - 0.5, LANE_W]]),
             np.array([[38.25, -69.5], [38.25, 69.5]]),
             np.array([[41.75, 69.5], [41.75, -69.5]])]
    north_through = np.array([[38.25, -69.0], [38.25, 69.0]])
    south_through = np.array([[41.75, 69.0], [41.75, -69.0]])
    routes = _t_junction_routes()[:4] + [
        resample_polyline(north_through, ROUTE_SPACING),
        resample_polyline(south_through, ROUTE_SPACING)]
    road = RoadGeometry(_lanes_to_vecs(lanes), area, "intersection")
    return _TemplateLayout(road, routes, [0, 2, 3, 4])


_BUILDERS = {
    "straight": _build_straight,
    "ramp": _build_ramp,
    "t_intersection": _build_t_intersection,
    "intersection": _build_intersection,
}


# ---------------------------------------------------------------------------
# traffic simulation
# ---------------------------------------------------------------------------

@dataclass
class _Mover:
    route_idx: int
    route: Polyline
    s: float
    state: VehicleState
    v0: float
    is_ego: bool = False
    states: list[VehicleState] | None = None

    def __post_init__(self):
        self.states = []


def _spawn(route: Polyline, s: float, speed: float) -> VehicleState:
    x, y, ang = route.point_at(s)
    return VehicleState(Vec2(x, y), wrap_angle(ang), speed, 0.0)


def _simulate(movers: list[_Mover], steps: int) -> None:
    for _ in range(steps):
        for m in movers:
            m.states.append(m.state)
        controls = []
        for m in movers:
            gap = None
            closing = 0.0
            for o in movers:
                if o is m or o.route_idx != m.route_idx:
                    continue
                if o.s > m.s:
                    g = o.s - m.s - DEFAULT_VEHICLE_LENGTH
                    if gap is None or g < gap:
                        gap = g
                        closing = m.state.speed - o.state.speed
            # stop short of the route end
            end_gap = m.route.length - 4.0 - m.s
            if gap is None or end_gap < gap:
                if end_gap < 60.0 and not m.is_ego:
                    gap, closing = max(end_gap, 0.1), m.state.speed
            v_lim = curvature_speed_limit(m.route, m.s, LAT_ACC_MAX)
            a = idm_accel(m.state.speed, min(m.v0, v_lim), gap, closing)
            accel_cmd = clamp(a / _CFG.a_max, -1.0, 1.0) if a >= 0 else \
                clamp(a / _CFG.a_brake, -1.0, 0.0)
            steer = pure_pursuit_steer(m.state, m.route, _CFG.wheelbase,
                                       _CFG.max_steer_angle)
            steer = lat_limited_steer(steer, m.state.speed, _CFG.wheelbase,
                                      _CFG.max_steer_angle, LAT_ACC_MAX)
            controls.append(AgentAction(steer, accel_cmd))
        for m, act in zip(movers, controls):
            m.state = step_bicycle(m.state, act, _CFG, DT)
            m.s = m.route.project(m.state.x, m.state.y)[0]


def _to_track(vehicle_id: int, states: list[VehicleState]) -> Track:
    samples = tuple(
        VehicleState(Vec2(q6(s.position.x), q6(s.position.y)),
                     _q_heading(s.heading), q6(max(s.speed, 0.0)), q6(s.accel))
        for s in states)
    return Track(vehicle_id=vehicle_id, samples=samples,
                 length=DEFAULT_VEHICLE_LENGTH, width=DEFAULT_VEHICLE_WIDTH)


def _tracks_overlap(a: Track, b: Track) -> bool:
    for sa, sb in zip(a.samples, b.samples):
        if obb_overlap(sa.position.x, sa.position.y, sa.heading, a.length, a.width,
                       sb.position.x, sb.position.y, sb.heading, b.length, b.width):
            return True
    return False


def _place_arcs(rng: np.random.Generator, length: float, count: int,
                occupied: list[float], min_gap: float = 24.0) -> list[float]:
    lo, hi = 3.0, max(4.0, length - 45.0)
    out = []
    for _ in range(count):
        for _ in range(40):
            s = float(rng.uniform(lo, hi))
            if all(abs(s - o) >= min_gap for o in occupied + out):
                out.append(s)
                break
    return out


def _generate_one(seed: int, index: int, template: str, split: str) -> Scenario:
    for attempt in range(10):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(index, attempt)))
        layout = _BUILDERS[template](rng)
        routes = [Polyline(r) for r in layout.routes]

        ego_route_idx = int(rng.choice(layout.ego_route_ids))
        ego_route = routes[ego_route_idx]
        s_hi = max(6.0, ego_route.length - 160.0)
        ego_s0 = float(rng.uniform(5.0, s_hi))
        ego_v0 = float(rng.uniform(8.0, 12.0))
        ego_speed0 = min(ego_v0 * float(rng.uniform(0.7, 0.95)),
                         curvature_speed_limit(ego_route, ego_s0, LAT_ACC_MAX))
        movers = [_Mover(ego_route_idx, ego_route, ego_s0,
                         _spawn(ego_route, ego_s0, ego_speed0), ego_v0, is_ego=True)]

        m_target = int(rng.integers(MIN_BG + 1, MAX_BG - 1)) + 2
        occupied: dict[int, list[float]] = {ego_route_idx: [ego_s0]}
        route_order = rng.permutation(len(routes))
        placed = 0
        while placed < m_target:
            progressed = False
            for ri in route_order:
                if placed >= m_target:
                    break
                ri = int(ri)
                arcs = _place_arcs(rng, routes[ri].length, 1, occupied.setdefault(ri, []))
                if not arcs:
                    continue
                s = arcs[0]
                occupied[ri].append(s)
                base_v0 = float(rng.uniform(6.0, 13.0))
                speed0 = min(base_v0 * float(rng.uniform(0.6, 0.95)),
                             curvature_speed_limit(routes[ri], s, LAT_ACC_MAX))
                movers.append(_Mover(ri, routes[ri], s,
                                     _spawn(routes[ri], s, speed0), base_v0))
                placed += 1
                progressed = True
            if not progressed:
                break

        _simulate(movers, HORIZON_STEPS)

        ego_track = _to_track(0, movers[0].states)
        bg_tracks = [_to_track(i + 1, m.states) for i, m in enumerate(movers[1:])]
        bg_tracks = [t for t in bg_tracks if not _tracks_overlap(ego_track, t)]

        # remove residual initial overlaps among background vehicles
        kept: list[Track] = []
        for t in bg_tracks:
            sa = t.samples[0]
            clash = any(obb_overlap(sa.position.x, sa.position.y, sa.heading,
                                    t.length, t.width,
                                    o.samples[0].position.x, o.samples[0].position.y,
                                    o.samples[0].heading, o.length, o.width)
                        for o in kept)
            if not clash:
                kept.append(t)
        kept = kept[:MAX_BG]
        if len(kept) < MIN_BG:
            continue
        kept = [Track(vehicle_id=i + 1, samples=t.samples, length=t.length,
                      width=t.width) for i, t in enumerate(kept)]

        # route starts at the ego spawn point
        sub = [ego_route.point_at(ego_s0)[:2]]
        s_next = ego_s0 + ROUTE_SPACING
        while s_next < ego_route.length:
            sub.append(ego_route.point_at(s_next)[:2])
            s_next += ROUTE_SPACING
        sub.append(ego_route.point_at(ego_route.length)[:2])
        route = tuple(Vec2(q6(x), q6(y)) for x, y in sub)

        scenario = Scenario(
            id=f"scn-{seed}-{index:04d}",
            road=layout.road,
            ego=ego_track,
            background=tuple(kept),
            route=route,
            dt=DT,
            horizon_steps=HORIZON_STEPS,
            attack_start=max(1, int(round(ATTACK_FRACTION * HORIZON_STEPS))),
        )
        try:
            validate_scenario(scenario)
        except Exception:
            continue
        return scenario
    raise RuntimeError(f"could not generate a valid scenario for seed={seed} index={index}")


def _apportion(n: int, weights: dict[str, float]) -> list[str]:
    """Largest-remainder split of n scenarios over templates (within +-1 of exact)."""
    for name, w in weights.items():
        if name not in ROAD_TEMPLATES:
            raise ConfigError(f"unknown template {name!r}")
        if w < 0:
            raise ConfigError(f"negative weight for template {name!r}")
    total = sum(weights.values())
    if total <= 0:
        raise ConfigError("template weights must not all be zero")
    names = [t for t in ROAD_TEMPLATES if weights.get(t, 0.0) > 0]
    exact = [n * weights[t] / total for t in names]
    base = [int(math.floor(e)) for e in exact]
    leftover = n - sum(base)
    order = sorted(range(len(names)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    out = []
    for t, c in zip(names, base):
        out.extend([t] * c)
    return out


def generate_corpus(seed: int, n: int, templates: dict[str, float] | None = None,
                    split: str = "train") -> ScenarioSet:
    """Generate ``n`` validated, replay-collision-free scenarios.

    Pure function of (seed, n, templates): the same inputs always produce an
    identical ScenarioSet.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    if templates is None:
        templates = {t: 1.0 for t in ROAD_TEMPLATES}
    plan = _apportion(n, templates)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xC0FFEE,)))
    order = rng.permutation(n)
    assigned = [None] * n
    for slot, tmpl in zip(order, plan):
        assigned[int(slot)] = tmpl
    scenarios = tuple(_generate_one(seed, i, assigned[i], split) for i in range(n))
    return ScenarioSet(scenarios=scenarios, split=split)
