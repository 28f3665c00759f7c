"""Adversarial trajectory selection: maneuver-library candidates with
naturalness priors, ego-hypothesis handling, and the per-attacker argmax of
prior times expected collision likelihood."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .control import clamp, lat_limited_steer, pure_pursuit_steer, speed_tracking_accel
from .engine import AgentAction, SimConfig, detect_collision, step_bicycle
from .errors import EmptyBuffer, LengthMismatch
from .geometry import Polyline, wrap_angle
from .scenario import Scenario, Track, Vec2, VehicleState

MANEUVERS = ("maintain", "hard_accel", "hard_brake", "swerve_left",
             "swerve_right", "cut_toward_ego", "intercept_ego_prediction")
SPEED_SCALES = (0.7, 1.0, 1.3)

LIKELIHOOD_SIGMA = 0.5
GAP_FLOOR = 1e-6          # keeps soft likelihood strictly below 1 without a hard hit
CANDIDATE_V_CAP = 22.0
CANDIDATE_LAT_ACC = 4.0

COST_W_YAWRATE = 0.5
COST_W_ACCEL = 0.2


@dataclass(frozen=True)
class Candidate:
    states: tuple[VehicleState, ...]
    prior: float
    maneuver: str


@dataclass(frozen=True)
class CandidateSet:
    attacker_id: int
    length: float
    width: float
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class AdversarialPlan:
    selections: dict[int, tuple[VehicleState, ...]]
    objectives: dict[int, float]

    def to_jsonable(self) -> dict:
        return {
            "selections": {
                str(vid): [[s.position.x, s.position.y, s.heading, s.speed, s.accel]
                           for s in states]
                for vid, states in sorted(self.selections.items())
            },
            "objectives": {str(vid): obj
                           for vid, obj in sorted(self.objectives.items())},
        }


def plan_from_jsonable(obj: dict) -> AdversarialPlan:
    selections = {}
    for vid, rows in obj["selections"].items():
        selections[int(vid)] = tuple(
            VehicleState(Vec2(r[0], r[1]), r[2], r[3], r[4]) for r in rows)
    objectives = {int(vid): float(v) for vid, v in obj.get("objectives", {}).items()}
    return AdversarialPlan(selections=selections, objectives=objectives)


# ---------------------------------------------------------------------------
# ego hypotheses
# ---------------------------------------------------------------------------

class EgoBuffer:
    """Per-scenario ring buffer of recent ego trajectories with
    recency-geometric weights (newest first)."""

    def __init__(self, capacity: int = 8, decay: float = 0.5):
        if capacity < 1 or not 0 < decay <= 1:
            raise ValueError("capacity >= 1 and 0 < decay <= 1 required")
        self.capacity = capacity
        self.decay = decay
        self._items: deque[tuple[VehicleState, ...]] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, trajectory: tuple[VehicleState, ...]) -> None:
        self._items.append(tuple(trajectory))

    def hypotheses(self) -> list[tuple[tuple[VehicleState, ...], float]]:
        if not self._items:
            raise EmptyBuffer("ego buffer is empty")
        raw = [self.decay ** age for age in range(len(self._items))]
        norm = sum(raw)
        newest_first = list(reversed(self._items))
        return [(traj, w / norm) for traj, w in zip(newest_first, raw)]


def ego_predict(scenario: Scenario, *, buffer: EgoBuffer | None = None,
                agent=None, cfg: SimConfig = SimConfig()):
    """Ego hypotheses for the optimizer.

    Training mode (buffer): every buffered trajectory with its weight.
    Testing mode (agent): the single deterministic rollout, probability 1.
    """
    from .engine import ego_window, rollout  # local import avoids a cycle

    if buffer is not None:
        return buffer.hypotheses()
    if agent is None:
        raise EmptyBuffer("neither a buffer nor an agent was provided")
    result = rollout(scenario, agent, cfg, record_steps=False)
    window = ego_window(result.ego_track.samples, scenario.attack_start,
                        scenario.horizon_steps)
    return [(window, 1.0)]


# ---------------------------------------------------------------------------
# candidate generation
# ---------------------------------------------------------------------------

def _control_profile(states, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Yaw-rate and acceleration sequences implied by a state sequence."""
    yaw = np.array([wrap_angle(b.heading - a.heading) / dt
                    for a, b in zip(states[:-1], states[1:])])
    acc = np.array([(b.speed - a.speed) / dt
                    for a, b in zip(states[:-1], states[1:])])
    return yaw, acc


def _offset_path(path_pts: np.ndarray, start_s: float, line: Polyline,
                 offset: float, ramp_m: float = 30.0) -> Polyline:
    """Path shifted laterally by a smooth 0 -> offset ramp beginning at start_s."""
    out = []
    s_acc = line.cum
    for i, p in enumerate(path_pts):
        s = s_acc[i] if i < len(s_acc) else s_acc[-1]
        frac = clamp((s - start_s) / ramp_m, 0.0, 1.0)
        if i < len(path_pts) - 1:
            tx, ty = path_pts[i + 1] - p
        else:
            tx, ty = p - path_pts[i - 1]
        n = math.hypot(tx, ty)
        if n < 1e-9:
            out.append(p)
            continue
        nx, ny = -ty / n, tx / n
        out.append(p + frac * offset * np.array([nx, ny]))
    return Polyline(np.array(out))


def _simulate_candidate(start: VehicleState, n_steps: int, dt: float,
                        cfg: SimConfig, steer_fn, target_fn) -> tuple[VehicleState, ...]:
    states = [start]
    for k in range(n_steps):
        s = states[-1]
        target = min(target_fn(k, s), CANDIDATE_V_CAP)
        accel_cmd = speed_tracking_accel(s.speed, target, dt, cfg.a_max, cfg.a_brake)
        steer = steer_fn(k, s)
        steer = lat_limited_steer(steer, s.speed, cfg.wheelbase,
                                  cfg.max_steer_angle, CANDIDATE_LAT_ACC)
        states.append(step_bicycle(s, AgentAction(steer, accel_cmd), cfg, dt))
    return tuple(states)


def generate_candidates(scenario: Scenario, attacker_id: int,
                        t: int | None = None,
                        cfg: SimConfig = SimConfig()) -> CandidateSet:
    """Maneuver library x speed scalings rolled out from the attacker's logged
    state at attack_start; priors are a softmax over deviation-from-log costs."""
    if t is None:
        t = scenario.attack_start
    track = scenario.background_by_id()[attacker_id]
    dt = scenario.dt
    T = scenario.horizon_steps
    n_steps = T - 1 - t
    logged = track.samples
    start = logged[t]

    path_pts = np.array([[s.position.x, s.position.y] for s in logged])
    # degenerate logged paths (parked vehicle) still need a followable line
    if float(np.max(np.ptp(path_pts, axis=0))) < 0.5:
        hx, hy = math.cos(start.heading), math.sin(start.heading)
        path_pts = np.array([[start.x - 5 * hx, start.y - 5 * hy],
                             [start.x + 60 * hx, start.y + 60 * hy]])
    path = Polyline(path_pts)
    start_s = path.project(start.x, start.y)[0]

    log_window = logged[t:]
    yaw_log, acc_log = _control_profile(log_window, dt)
    v_log = [s.speed for s in log_window]

    ego_log = scenario.ego.samples
    vex, vey = ego_log[t].velocity()

    def follow(line: Polyline):
        def steer_fn(k, s):
            return pure_pursuit_steer(s, line, cfg.wheelbase, cfg.max_steer_angle)
        return steer_fn

    def v_logged(scale):
        def target_fn(k, s):
            idx = min(k + 1, len(v_log) - 1)
            return scale * v_log[idx]
        return target_fn

    def chase(point_fn, lead_steps: int):
        def steer_fn(k, s):
            px, py = point_fn(min(k + lead_steps, n_steps))
            alpha = wrap_angle(math.atan2(py - s.y, px - s.x) - s.heading)
            dist = max(math.hypot(px - s.x, py - s.y), 1.0)
            delta = math.atan2(2.0 * cfg.wheelbase * math.sin(alpha), min(dist, 12.0))
            return clamp(delta / cfg.max_steer_angle, -1.0, 1.0)
        return steer_fn

    def ego_logged_point(k):
        s = ego_log[min(t + k, T - 1)]
        return s.position.x, s.position.y

    def ego_predicted_point(k):
        return (ego_log[t].position.x + vex * k * dt,
                ego_log[t].position.y + vey * k * dt)

    candidates: list[tuple[str, tuple[VehicleState, ...]]] = []
    for scale in SPEED_SCALES:
        tag = f"@{scale:g}"
        if scale == 1.0:
            maintain = tuple(log_window)
        else:
            maintain = _simulate_candidate(start, n_steps, dt, cfg,
                                           follow(path), v_logged(scale))
        candidates.append((f"maintain{tag}", maintain))

        base = scale * start.speed

        def accel_target(k, s, base=base):
            return base + cfg.a_max * (k + 1) * dt

        def brake_target(k, s, base=base):
            return max(0.0, base - cfg.a_brake * (k + 1) * dt)

        candidates.append((f"hard_accel{tag}", _simulate_candidate(
            start, n_steps, dt, cfg, follow(path), accel_target)))
        candidates.append((f"hard_brake{tag}", _simulate_candidate(
            start, n_steps, dt, cfg, follow(path), brake_target)))
        left = _offset_path(path.pts, start_s, path, 3.0)
        right = _offset_path(path.pts, start_s, path, -3.0)
        candidates.append((f"swerve_left{tag}", _simulate_candidate(
            start, n_steps, dt, cfg, follow(left), v_logged(scale))))
        candidates.append((f"swerve_right{tag}", _simulate_candidate(
            start, n_steps, dt, cfg, follow(right), v_logged(scale))))

        def cut_target(k, s, scale=scale):
            ego_v = ego_log[min(t + k, T - 1)].speed
            return scale * max(start.speed, ego_v + 2.0)

        candidates.append((f"cut_toward_ego{tag}", _simulate_candidate(
            start, n_steps, dt, cfg, chase(ego_logged_point, 5), cut_target)))

        def intercept_target(k, s, scale=scale):
            px, py = ego_predicted_point(min(k + 5, n_steps))
            remain = max((n_steps - k) * dt, 0.5)
            need = math.hypot(px - s.x, py - s.y) / remain
            return scale * max(start.speed, need)

        candidates.append((f"intercept_ego_prediction{tag}", _simulate_candidate(
            start, n_steps, dt, cfg, chase(ego_predicted_point, 8), intercept_target)))

    costs = []
    for _, states in candidates:
        yaw, acc = _control_profile(states, dt)
        m = min(len(yaw), len(yaw_log))
        if m == 0:
            costs.append(0.0)
            continue
        cost = (COST_W_YAWRATE * float(np.mean(np.abs(yaw[:m] - yaw_log[:m]))) +
                COST_W_ACCEL * float(np.mean(np.abs(acc[:m] - acc_log[:m]))))
        costs.append(cost)
    costs_arr = np.array(costs)
    logits = -(costs_arr - costs_arr.min())
    weights = np.exp(logits)
    priors = weights / weights.sum()

    return CandidateSet(
        attacker_id=attacker_id, length=track.length, width=track.width,
        candidates=tuple(Candidate(states=st, prior=float(p), maneuver=tag)
                         for (tag, st), p in zip(candidates, priors)))


# ---------------------------------------------------------------------------
# likelihood and selection
# ---------------------------------------------------------------------------

def collision_likelihood(y_ego, y_adv, ego_dims: tuple[float, float],
                         adv_dims: tuple[float, float]) -> float:
    """1.0 on a hard overlap at any aligned step, else exp(-gap/sigma) from the
    smallest bounding-circle gap. Always in (0, 1]."""
    if len(y_ego) != len(y_adv):
        raise LengthMismatch(f"trajectory lengths differ: {len(y_ego)} vs {len(y_adv)}")
    re_ = 0.5 * math.hypot(*ego_dims)
    ra = 0.5 * math.hypot(*adv_dims)
    rsum = re_ + ra
    pe = np.array([[s.position.x, s.position.y] for s in y_ego])
    pa = np.array([[s.position.x, s.position.y] for s in y_adv])
    d = np.hypot(pe[:, 0] - pa[:, 0], pe[:, 1] - pa[:, 1])
    gaps = d - rsum
    for k in np.flatnonzero(gaps <= 0.0):
        if detect_collision(y_ego[int(k)], ego_dims, y_adv[int(k)], adv_dims):
            return 1.0
    g = max(float(gaps.min()), GAP_FLOOR)
    return math.exp(-g / LIKELIHOOD_SIGMA)


def select_adversarial(candidate_sets, egos, ego_dims: tuple[float, float]
                       ) -> AdversarialPlan:
    """Independent per-attacker argmax of prior x expected collision likelihood
    over the ego hypotheses; ties break toward the lowest candidate index."""
    selections: dict[int, tuple[VehicleState, ...]] = {}
    objectives: dict[int, float] = {}
    for cset in candidate_sets:
        best_idx = -1
        best_val = -math.inf
        adv_dims = (cset.length, cset.width)
        for idx, cand in enumerate(cset.candidates):
            expect = 0.0
            for traj, p in egos:
                expect += p * collision_likelihood(traj, cand.states,
                                                   ego_dims, adv_dims)
            val = cand.prior * expect
            if val > best_val:
                best_val = val
                best_idx = idx
        chosen = cset.candidates[best_idx]
        selections[cset.attacker_id] = chosen.states
        objectives[cset.attacker_id] = best_val
    return AdversarialPlan(selections=selections, objectives=objectives)


def splice_attacker_track(track: Track, plan_states, t: int) -> Track:
    """Logged history up to t combined with the planned trajectory after it."""
    samples = tuple(track.samples[:t]) + tuple(plan_states)
    return Track(vehicle_id=track.vehicle_id, samples=samples,
                 length=track.length, width=track.width)
