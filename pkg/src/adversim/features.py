"""Per-vehicle interaction features feeding the attacker-scoring programs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Polyline
from .scenario import Scenario

TTC_CAP = 99.0
CLOSING_EPS = 0.1
PATH_CROSS_RADIUS = 2.0

FEATURE_NAMES = (
    "dist", "min_dist", "rel_speed", "closing_speed", "ttc",
    "heading_align", "lateral_offset", "ahead", "speed", "path_cross",
)


@dataclass(frozen=True)
class FeatureVector:
    dist: float
    min_dist: float
    rel_speed: float
    closing_speed: float
    ttc: float
    heading_align: float
    lateral_offset: float
    ahead: float
    speed: float
    path_cross: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


def extract_features(scenario: Scenario) -> dict[int, FeatureVector]:
    """One FeatureVector per background vehicle, taken at attack_start using
    the history up to that step."""
    t = scenario.attack_start
    ego = scenario.ego.samples[t]
    vex, vey = ego.velocity()
    ce, se = math.cos(ego.heading), math.sin(ego.heading)
    route = Polyline([[p.x, p.y] for p in scenario.route])
    remaining = scenario.horizon_steps - 1 - t

    out: dict[int, FeatureVector] = {}
    for track in scenario.background:
        s = track.samples[t]
        rx = s.position.x - ego.position.x
        ry = s.position.y - ego.position.y
        dist = max(math.hypot(rx, ry), 1e-9)
        vbx, vby = s.velocity()
        rvx, rvy = vbx - vex, vby - vey
        rel_speed = math.hypot(rvx, rvy)
        closing = -(rx * rvx + ry * rvy) / dist
        if closing > CLOSING_EPS:
            ttc = min(dist / closing, TTC_CAP)
        else:
            ttc = TTC_CAP
        ux, uy = -rx / dist, -ry / dist  # bearing from the vehicle toward the ego
        align = math.cos(s.heading) * ux + math.sin(s.heading) * uy
        align = min(max(align, -1.0), 1.0)
        ahead = rx * ce + ry * se
        lateral = -rx * se + ry * ce

        min_dist = dist
        for k in range(t + 1):
            pe = scenario.ego.samples[k].position
            pb = track.samples[k].position
            d = math.hypot(pb.x - pe.x, pb.y - pe.y)
            if d < min_dist:
                min_dist = d

        cross = 0.0
        if remaining > 0:
            steps = np.arange(1, remaining + 1, dtype=float) * scenario.dt
            px = s.position.x + vbx * steps
            py = s.position.y + vby * steps
            pts = np.stack([px, py], axis=1)
            if route.min_distance(pts, below=PATH_CROSS_RADIUS) < PATH_CROSS_RADIUS:
                cross = 1.0

        out[track.vehicle_id] = FeatureVector(
            dist=dist, min_dist=min_dist, rel_speed=rel_speed,
            closing_speed=closing, ttc=ttc, heading_align=align,
            lateral_offset=lateral, ahead=ahead, speed=s.speed, path_cross=cross)
    return out
