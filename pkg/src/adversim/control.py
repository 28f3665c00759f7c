"""Low-level steering/speed controllers shared by the corpus generator and
the maneuver-library candidate generator."""

from __future__ import annotations

import math

from .geometry import Polyline, wrap_angle
from .scenario import VehicleState


def clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def pure_pursuit_steer(state: VehicleState, path: Polyline, wheelbase: float,
                       max_steer: float, lookahead: float | None = None) -> float:
    """Steering command in [-1, 1] chasing a lookahead point on ``path``."""
    if lookahead is None:
        lookahead = clamp(0.8 * state.speed, 3.0, 10.0)
    s, _, _, _ = path.project(state.x, state.y)
    tx, ty, _ = path.point_at(min(s + lookahead, path.length))
    alpha = wrap_angle(math.atan2(ty - state.y, tx - state.x) - state.heading)
    delta = math.atan2(2.0 * wheelbase * math.sin(alpha), lookahead)
    return clamp(delta / max_steer, -1.0, 1.0)


def speed_tracking_accel(speed: float, target: float, dt: float,
                         a_max: float, a_brake: float) -> float:
    """Acceleration command in [-1, 1] that tracks ``target`` within limits."""
    a = (target - speed) / dt
    if a >= 0:
        return clamp(a / a_max, 0.0, 1.0)
    return clamp(a / a_brake, -1.0, 0.0)


def lat_limited_steer(steer_cmd: float, speed: float, wheelbase: float,
                      max_steer: float, lat_acc_max: float) -> float:
    """Clamp a steering command so lateral acceleration stays plausible.

    The kinematic model happily takes 5 m turns at highway speed; candidate
    and corpus trajectories are held to |v * yaw_rate| <= lat_acc_max.
    """
    if speed < 1e-6:
        return steer_cmd
    # yaw_rate = v/L * tan(steer * max_steer)
    tan_lim = lat_acc_max * wheelbase / (speed * speed)
    lim = math.atan(tan_lim) / max_steer
    return clamp(steer_cmd, -lim, lim)


def curvature_speed_limit(path: Polyline, s: float, lat_acc_max: float,
                          horizon_m: float = 25.0, step_m: float = 5.0) -> float:
    """Speed cap from the sharpest curvature within ``horizon_m`` ahead."""
    limit = math.inf
    prev = path.point_at(min(s, path.length))[2]
    d = step_m
    while d <= horizon_m:
        ang = path.point_at(min(s + d, path.length))[2]
        dd = abs(wrap_angle(ang - prev))
        if dd > 1e-6:
            radius = step_m / dd
            limit = min(limit, math.sqrt(lat_acc_max * radius))
        prev = ang
        d += step_m
    return limit


def inverse_actions(prev: VehicleState, cur: VehicleState, dt: float,
                    wheelbase: float, max_steer: float,
                    a_max: float, a_brake: float) -> tuple[float, float]:
    """Recover (steer, accel_cmd) that reproduce a logged transition under the
    bicycle model. Exact when the transition was generated by the same model."""
    a = (cur.speed - prev.speed) / dt
    accel_cmd = a / a_max if a >= 0 else a / a_brake
    accel_cmd = clamp(accel_cmd, -1.0, 1.0)
    if prev.speed < 1e-9:
        steer = 0.0  # heading cannot change at zero speed in this model
    else:
        dyaw = wrap_angle(cur.heading - prev.heading)
        tan_delta = dyaw * wheelbase / (prev.speed * dt)
        steer = clamp(math.atan(tan_delta) / max_steer, -1.0, 1.0)
    return steer, accel_cmd


def idm_accel(speed: float, target_speed: float, gap: float | None,
              closing: float, a_max: float = 2.0, b_comf: float = 2.5,
              s0: float = 2.5, headway: float = 1.2) -> float:
    """Intelligent-driver-model longitudinal acceleration (free road when no leader)."""
    v0 = max(target_speed, 0.1)
    free = 1.0 - (speed / v0) ** 4
    if gap is None:
        return a_max * free
    gap = max(gap, 0.1)
    s_star = s0 + max(0.0, speed * headway + speed * closing / (2.0 * math.sqrt(a_max * b_comf)))
    return a_max * (free - (s_star / gap) ** 2)
