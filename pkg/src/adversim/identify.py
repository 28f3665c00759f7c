"""Attacker identification: the scoring-program path plus three baselines."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .dsl import ScoreProgram, eval_program
from .errors import TooFewVehicles
from .features import FeatureVector, extract_features
from .scenario import Scenario


@dataclass(frozen=True)
class RandomMethod:
    seed: int = 0


@dataclass(frozen=True)
class MinTTCMethod:
    pass


@dataclass(frozen=True)
class KineticFieldMethod:
    g: float = 1.0
    k1: float = 1.0
    k2: float = 0.05


@dataclass(frozen=True)
class ProgramMethod:
    program: ScoreProgram


IdentifierMethod = RandomMethod | MinTTCMethod | KineticFieldMethod | ProgramMethod


def kinetic_field_score(fv: FeatureVector, g: float = 1.0, k1: float = 1.0,
                        k2: float = 0.05) -> float:
    """Distance-decaying risk score amplified by speed pointed at the ego."""
    return g / max(fv.dist, 0.5) ** k1 * math.exp(k2 * fv.speed * fv.heading_align)


def _stable_seed(seed: int, scenario_id: str) -> int:
    digest = hashlib.sha256(f"{seed}|{scenario_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def identify(scenario: Scenario, method: IdentifierMethod, n: int,
             features: dict[int, FeatureVector] | None = None) -> list[int]:
    """Ordered ids of the ``n`` background vehicles chosen as attackers.

    Deterministic; score ties break by ascending vehicle_id.
    """
    ids = sorted(t.vehicle_id for t in scenario.background)
    if not 1 <= n <= len(ids):
        raise TooFewVehicles(
            f"asked for {n} attackers but scenario {scenario.id} has {len(ids)}")

    if isinstance(method, RandomMethod):
        rng = np.random.default_rng(_stable_seed(method.seed, scenario.id))
        perm = rng.permutation(len(ids))
        return [ids[int(i)] for i in perm[:n]]

    if features is None:
        features = extract_features(scenario)

    if isinstance(method, MinTTCMethod):
        ranked = sorted(ids, key=lambda vid: (features[vid].ttc, vid))
    elif isinstance(method, KineticFieldMethod):
        ranked = sorted(ids, key=lambda vid: (-kinetic_field_score(
            features[vid], method.g, method.k1, method.k2), vid))
    elif isinstance(method, ProgramMethod):
        ranked = sorted(ids, key=lambda vid: (-eval_program(
            method.program, features[vid]), vid))
    else:
        raise TypeError(f"unknown identifier method {method!r}")
    return ranked[:n]
