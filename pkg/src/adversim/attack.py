"""Shared attack pipeline: turn a normal scenario into an adversarial one for
a given identification method and ego agent, with per-corpus caching."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import ReplayAgent, RolloutResult, SimConfig, ego_window, rollout
from .errors import EmptyInput
from .features import FeatureVector, extract_features
from .identify import IdentifierMethod, identify
from .optimizer import (AdversarialPlan, CandidateSet, ego_predict,
                        generate_candidates, select_adversarial, splice_attacker_track)
from .scenario import Scenario, Track


@dataclass
class AttackContext:
    """Caches for feature maps, candidate sets, and replay-ego hypotheses.

    Candidate sets and features depend only on the scenario, so one context
    can serve many identification methods and many search iterations.
    """
    sim_cfg: SimConfig = field(default_factory=SimConfig)
    _features: dict[str, dict[int, FeatureVector]] = field(default_factory=dict)
    _candidates: dict[tuple[str, int], CandidateSet] = field(default_factory=dict)
    _replay_windows: dict[str, tuple] = field(default_factory=dict)

    def features(self, scenario: Scenario) -> dict[int, FeatureVector]:
        hit = self._features.get(scenario.id)
        if hit is None:
            hit = extract_features(scenario)
            self._features[scenario.id] = hit
        return hit

    def candidates(self, scenario: Scenario, attacker_id: int) -> CandidateSet:
        key = (scenario.id, attacker_id)
        hit = self._candidates.get(key)
        if hit is None:
            hit = generate_candidates(scenario, attacker_id, cfg=self.sim_cfg)
            self._candidates[key] = hit
        return hit

    def replay_hypotheses(self, scenario: Scenario):
        hit = self._replay_windows.get(scenario.id)
        if hit is None:
            window = ego_window(scenario.ego.samples, scenario.attack_start,
                                scenario.horizon_steps)
            hit = ((window, 1.0),)
            self._replay_windows[scenario.id] = hit
        return list(hit)


def plan_for(scenario: Scenario, attacker_ids, egos, ctx: AttackContext
             ) -> AdversarialPlan:
    sets = [ctx.candidates(scenario, vid) for vid in attacker_ids]
    return select_adversarial(sets, egos, scenario.ego.dims)


def attack_scenario(scenario: Scenario, method: IdentifierMethod, n: int,
                    agent, ctx: AttackContext,
                    null_optimizer: bool = False
                    ) -> tuple[RolloutResult, AdversarialPlan | None]:
    """Identify n attackers, plan their trajectories against the agent's own
    predicted behavior, and roll the attacked episode."""
    attacker_ids = identify(scenario, method, n, features=ctx.features(scenario))
    if null_optimizer:
        plan = None
    else:
        if isinstance(agent, ReplayAgent):
            egos = ctx.replay_hypotheses(scenario)
        else:
            egos = ego_predict(scenario, agent=agent, cfg=ctx.sim_cfg)
        plan = plan_for(scenario, attacker_ids, egos, ctx)
    result = rollout(scenario, agent, ctx.sim_cfg, plan=plan, record_steps=False)
    return result, plan


def attack_success(scenarios, method: IdentifierMethod, n: int, agent,
                   ctx: AttackContext, null_optimizer: bool = False) -> float:
    """Fraction of scenarios in which the attacked ego collides."""
    if not scenarios:
        raise EmptyInput("no scenarios to attack")
    hits = 0
    for s in scenarios:
        result, _ = attack_scenario(s, method, n, agent, ctx,
                                    null_optimizer=null_optimizer)
        if result.collided:
            hits += 1
    return hits / len(scenarios)


def attacked_tracks(scenarios, method: IdentifierMethod, n: int, agent,
                    ctx: AttackContext) -> list[Track]:
    """Spliced attacker tracks (log history + planned future) for realism metrics."""
    out: list[Track] = []
    for s in scenarios:
        _, plan = attack_scenario(s, method, n, agent, ctx)
        if plan is None:
            continue
        by_id = s.background_by_id()
        for vid, states in sorted(plan.selections.items()):
            out.append(splice_attacker_track(by_id[vid], states, s.attack_start))
    return out
