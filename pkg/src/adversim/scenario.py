"""Scenario data model, canonical JSON file format, and validation."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import IoError, SchemaError, ValidationError
from .geometry import point_in_polygon, polygon_is_simple, wrap_angle

ROAD_TEMPLATES = ("straight", "ramp", "t_intersection", "intersection")
DEFAULT_VEHICLE_LENGTH = 4.5
DEFAULT_VEHICLE_WIDTH = 2.0

# canonical float precision used by save_scenario / generate_corpus
_FLOAT_DECIMALS = 6


def q6(x: float) -> float:
    """Quantize a float to the canonical 6-decimal file precision."""
    v = round(float(x), _FLOAT_DECIMALS)
    return 0.0 if v == 0.0 else v  # fold -0.0


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class VehicleState:
    """Pose plus longitudinal speed/accel at one timestep."""
    position: Vec2
    heading: float  # radians, normalized to (-pi, pi]
    speed: float    # m/s, >= 0
    accel: float    # m/s^2, signed longitudinal

    @property
    def x(self) -> float:
        return self.position.x

    @property
    def y(self) -> float:
        return self.position.y

    def velocity(self) -> tuple[float, float]:
        return self.speed * math.cos(self.heading), self.speed * math.sin(self.heading)


@dataclass(frozen=True)
class Track:
    vehicle_id: int
    samples: tuple[VehicleState, ...]
    length: float = DEFAULT_VEHICLE_LENGTH
    width: float = DEFAULT_VEHICLE_WIDTH

    @property
    def dims(self) -> tuple[float, float]:
        return self.length, self.width


@dataclass(frozen=True)
class RoadGeometry:
    lane_centerlines: tuple[tuple[Vec2, ...], ...]
    drivable_area: tuple[Vec2, ...]
    template: str

    def area_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.drivable_area])


@dataclass(frozen=True)
class Scenario:
    id: str
    road: RoadGeometry
    ego: Track
    background: tuple[Track, ...]
    route: tuple[Vec2, ...]
    dt: float
    horizon_steps: int
    attack_start: int

    @property
    def n_background(self) -> int:
        return len(self.background)

    def background_by_id(self) -> dict[int, Track]:
        return {t.vehicle_id: t for t in self.background}


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    split: str  # "train" or "test"


def state_at(track: Track, step: int) -> VehicleState:
    """The stored sample at ``step``; raises IndexError outside [0, len)."""
    if not 0 <= step < len(track.samples):
        raise IndexError(f"step {step} outside track of length {len(track.samples)}")
    return track.samples[step]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"{name}: non-finite value {v!r}")


def validate_track(track: Track, dt: float, name: str) -> None:
    if len(track.samples) < 2:
        raise ValidationError(f"{name}: track needs at least 2 samples")
    if track.length <= 0 or track.width <= 0:
        raise ValidationError(f"{name}: dims must be positive")
    prev = None
    for k, s in enumerate(track.samples):
        _check_finite(f"{name}[{k}]", s.position.x, s.position.y, s.heading, s.speed, s.accel)
        if s.speed < 0:
            raise ValidationError(f"{name}[{k}]: speed must be >= 0")
        if not (-math.pi < s.heading <= math.pi):
            raise ValidationError(f"{name}[{k}]: heading not normalized to (-pi, pi]")
        if prev is not None:
            d = math.hypot(s.position.x - prev.position.x, s.position.y - prev.position.y)
            bound = 2.0 * dt * max(prev.speed, s.speed) + 1e-4
            if d > bound:
                raise ValidationError(
                    f"{name}[{k}]: position jump {d:.3f} m inconsistent with speed "
                    f"(allowed {bound:.3f} m)")
        prev = s


def validate_scenario(s: Scenario) -> None:
    """Enforce all structural invariants; raises ValidationError naming the first failure."""
    if s.dt <= 0 or not math.isfinite(s.dt):
        raise ValidationError("dt must be positive and finite")
    if s.horizon_steps < 2:
        raise ValidationError("horizon_steps must be >= 2")
    if not (0 < s.attack_start < s.horizon_steps):
        raise ValidationError(
            f"attack_start {s.attack_start} must lie strictly inside (0, horizon_steps)")
    if s.road.template not in ROAD_TEMPLATES:
        raise ValidationError(f"unknown road template {s.road.template!r}")
    area = s.road.area_array()
    if len(area) < 3:
        raise ValidationError("drivable_area needs at least 3 vertices")
    if not polygon_is_simple(area):
        raise ValidationError("drivable_area polygon is not simple")
    for li, lane in enumerate(s.road.lane_centerlines):
        if len(lane) < 2:
            raise ValidationError(f"lane {li}: centerline needs at least 2 points")
        for p in lane:
            if not point_in_polygon(p.x, p.y, area):
                raise ValidationError(f"lane {li}: centerline leaves drivable_area")
    if len(s.route) < 2:
        raise ValidationError("route needs at least 2 waypoints")

    validate_track(s.ego, s.dt, "ego")
    if len(s.ego.samples) != s.horizon_steps:
        raise ValidationError("ego: track length differs from horizon_steps")
    start = s.ego.samples[0].position
    if not point_in_polygon(start.x, start.y, area):
        raise ValidationError("ego: start position outside drivable_area")

    seen = {s.ego.vehicle_id}
    for t in s.background:
        if t.vehicle_id in seen:
            raise ValidationError(f"duplicate vehicle_id {t.vehicle_id}")
        seen.add(t.vehicle_id)
        validate_track(t, s.dt, f"background {t.vehicle_id}")
        if len(t.samples) != s.horizon_steps:
            raise ValidationError(
                f"background {t.vehicle_id}: track length differs from horizon_steps")


def validate_scenario_set(ss: ScenarioSet) -> None:
    if not ss.scenarios:
        raise ValidationError("scenario set is empty")
    if ss.split not in ("train", "test"):
        raise ValidationError(f"unknown split {ss.split!r}")
    ids = [s.id for s in ss.scenarios]
    if len(set(ids)) != len(ids):
        raise ValidationError("scenario ids are not unique")
    for s in ss.scenarios:
        validate_scenario(s)


# ---------------------------------------------------------------------------
# JSON conversion
# ---------------------------------------------------------------------------

def _track_to_obj(t: Track) -> dict:
    return {
        "vehicle_id": t.vehicle_id,
        "length": q6(t.length),
        "width": q6(t.width),
        "samples": [[q6(s.position.x), q6(s.position.y), q6(s.heading),
                     q6(s.speed), q6(s.accel)] for s in t.samples],
    }


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "id": s.id,
        "dt": q6(s.dt),
        "horizon_steps": s.horizon_steps,
        "attack_start": s.attack_start,
        "road": {
            "template": s.road.template,
            "drivable_area": [[q6(p.x), q6(p.y)] for p in s.road.drivable_area],
            "lanes": [[[q6(p.x), q6(p.y)] for p in lane] for lane in s.road.lane_centerlines],
        },
        "route": [[q6(p.x), q6(p.y)] for p in s.route],
        "ego": _track_to_obj(s.ego),
        "background": [_track_to_obj(t) for t in s.background],
    }


def _require(obj: dict, key: str, kind, where: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in obj:
        raise SchemaError(f"{where}: missing required field {key!r}")
    v = obj[key]
    if kind is float:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaError(f"{where}.{key}: expected a number")
        return float(v)
    if kind is int:
        if not isinstance(v, int) or isinstance(v, bool):
            raise SchemaError(f"{where}.{key}: expected an integer")
        return v
    if not isinstance(v, kind):
        raise SchemaError(f"{where}.{key}: expected {kind.__name__}")
    return v


def _points_from(raw, where: str) -> tuple[Vec2, ...]:
    if not isinstance(raw, list):
        raise SchemaError(f"{where}: expected a list of [x, y] pairs")
    out = []
    for i, p in enumerate(raw):
        if (not isinstance(p, list) or len(p) != 2
                or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in p)):
            raise SchemaError(f"{where}[{i}]: expected [x, y] numbers")
        out.append(Vec2(float(p[0]), float(p[1])))
    return tuple(out)


def _track_from_obj(obj: dict, where: str) -> Track:
    vid = _require(obj, "vehicle_id", int, where)
    length = _require(obj, "length", float, where)
    width = _require(obj, "width", float, where)
    raw = _require(obj, "samples", list, where)
    samples = []
    for i, row in enumerate(raw):
        if (not isinstance(row, list) or len(row) != 5
                or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in row)):
            raise SchemaError(f"{where}.samples[{i}]: expected [x, y, heading, speed, accel]")
        samples.append(VehicleState(Vec2(float(row[0]), float(row[1])),
                                    float(row[2]), float(row[3]), float(row[4])))
    return Track(vehicle_id=vid, samples=tuple(samples), length=length, width=width)


def scenario_from_dict(obj: dict) -> Scenario:
    sid = _require(obj, "id", str, "scenario")
    dt = _require(obj, "dt", float, "scenario")
    horizon = _require(obj, "horizon_steps", int, "scenario")
    attack = _require(obj, "attack_start", int, "scenario")
    road_obj = _require(obj, "road", dict, "scenario")
    template = _require(road_obj, "template", str, "road")
    area = _points_from(_require(road_obj, "drivable_area", list, "road"), "road.drivable_area")
    lanes_raw = _require(road_obj, "lanes", list, "road")
    lanes = tuple(_points_from(l, f"road.lanes[{i}]") for i, l in enumerate(lanes_raw))
    route = _points_from(_require(obj, "route", list, "scenario"), "route")
    ego = _track_from_obj(_require(obj, "ego", dict, "scenario"), "ego")
    bg_raw = _require(obj, "background", list, "scenario")
    background = tuple(_track_from_obj(t, f"background[{i}]") for i, t in enumerate(bg_raw))
    s = Scenario(id=sid, road=RoadGeometry(lanes, area, template), ego=ego,
                 background=background, route=route, dt=dt,
                 horizon_steps=horizon, attack_start=attack)
    validate_scenario(s)
    return s


# ---------------------------------------------------------------------------
# file IO (canonical: sorted keys, 6-decimal floats, byte-stable)
# ---------------------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def save_scenario(s: Scenario, path: str) -> None:
    validate_scenario(s)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(scenario_to_dict(s)))
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(obj)


def save_scenario_set(ss: ScenarioSet, path: str) -> None:
    validate_scenario_set(ss)
    obj = {"split": ss.split, "scenarios": [scenario_to_dict(s) for s in ss.scenarios]}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(obj))
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_scenario_set(path: str) -> ScenarioSet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    split = _require(obj, "split", str, "set")
    raw = _require(obj, "scenarios", list, "set")
    scenarios = tuple(scenario_from_dict(o) for o in raw)
    ss = ScenarioSet(scenarios=scenarios, split=split)
    validate_scenario_set(ss)
    return ss


def quantized(s: Scenario) -> Scenario:
    """Scenario with every float snapped to file precision (save/load fixed point)."""
    def qv(p: Vec2) -> Vec2:
        return Vec2(q6(p.x), q6(p.y))

    def qs(st: VehicleState) -> VehicleState:
        return VehicleState(qv(st.position), q6(st.heading), q6(st.speed), q6(st.accel))

    def qt(t: Track) -> Track:
        return Track(t.vehicle_id, tuple(qs(x) for x in t.samples), q6(t.length), q6(t.width))

    road = RoadGeometry(
        tuple(tuple(qv(p) for p in lane) for lane in s.road.lane_centerlines),
        tuple(qv(p) for p in s.road.drivable_area),
        s.road.template,
    )
    return replace(s, road=road, ego=qt(s.ego),
                   background=tuple(qt(t) for t in s.background),
                   route=tuple(qv(p) for p in s.route), dt=q6(s.dt))


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
