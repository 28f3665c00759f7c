"""Closed-loop adversarial training of the ego policy and the evaluation pass."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import torch

from .attack import AttackContext, plan_for
from .engine import ReplayAgent, SimConfig, ego_window, rollout
from .errors import EmptyInput
from .identify import IdentifierMethod, identify
from .metrics import mean_and_half_variance
from .optimizer import EgoBuffer
from .scenario import Scenario
from .td3 import ReplayBuffer, TD3Policy, config_hash, obs_to_vec

CONDITIONS = ("normal", "one_attacker", "two_attackers")
_CONDITION_N = {"normal": 0, "one_attacker": 1, "two_attackers": 2}


@dataclass(frozen=True)
class TrainConfig:
    max_steps: int = 100_000
    adversarial_fraction: float = 0.5
    seed: int = 0
    hidden: int = 64
    lr: float = 1e-3
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    target_noise: float = 0.1
    noise_clip: float = 0.3
    explore_noise: float = 0.15
    batch_size: int = 128
    replay_capacity: int = 100_000
    warmup_steps: int = 1_000
    eval_every: int = 1_000
    buffer_capacity: int = 8
    buffer_decay: float = 0.5

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0.0 <= self.adversarial_fraction <= 1.0:
            raise ValueError("adversarial_fraction must lie in [0, 1]")

    def hash(self) -> str:
        return config_hash(asdict(self))


@dataclass(frozen=True)
class ConditionMetrics:
    crash_rate: float
    route_completion: float
    crash_half_variance: float = 0.0
    completion_half_variance: float = 0.0


@dataclass(frozen=True)
class EvalMetrics:
    conditions: dict[str, ConditionMetrics]

    def to_jsonable(self) -> dict:
        return {name: {
            "crash_rate": m.crash_rate,
            "crash_half_variance": m.crash_half_variance,
            "route_completion": m.route_completion,
            "completion_half_variance": m.completion_half_variance,
        } for name, m in sorted(self.conditions.items())}


@dataclass
class Snapshot:
    step: int
    metrics: dict[str, tuple[float, float]]  # condition -> (crash, completion)

    def csv_rows(self) -> list[str]:
        return [f"{self.step},{cond},{crash:.6g},{comp:.6g}"
                for cond, (crash, comp) in sorted(self.metrics.items())]


class _ExploreAgent:
    def __init__(self, policy: TD3Policy):
        self.policy = policy

    def act(self, obs):
        return self.policy.act(obs, explore=True)


class _RandomAgent:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, obs):
        from .engine import AgentAction
        a = self.rng.uniform(-1.0, 1.0, size=2)
        return AgentAction(float(a[0]), float(a[1]))


def _transitions(result, offroad_terminates: bool):
    """(obs_vec, act_vec, reward, next_obs_vec, done) tuples from a recorded rollout.

    ``done`` marks true terminal events only; horizon truncation bootstraps.
    """
    steps = result.per_step
    out = []
    terminal = result.collided or result.finished or \
        (result.offroad and offroad_terminates)
    final_vec = obs_to_vec(result.final_obs) if result.final_obs is not None else None
    for k, (obs, act, rew) in enumerate(steps):
        if k + 1 < len(steps):
            nxt_vec = obs_to_vec(steps[k + 1][0])
            done = 0.0
        else:
            nxt_vec = final_vec if final_vec is not None else obs_to_vec(obs)
            done = 1.0 if terminal else 0.0
        out.append((obs_to_vec(obs), np.array([act.steer, act.accel_cmd],
                                              dtype=np.float32), rew, nxt_vec, done))
    return out


def train_adversarial(cfg: TrainConfig, train_set, method: IdentifierMethod,
                      n_attackers: int, sim_cfg: SimConfig = SimConfig(),
                      eval_set=None, eval_conditions=("normal", "two_attackers"),
                      eval_method: IdentifierMethod | None = None,
                      ) -> tuple[TD3Policy, list[Snapshot]]:
    """Run the closed-loop training half: sample scenarios, with probability
    ``adversarial_fraction`` substitute attacker trajectories optimized against
    the scenario's ego buffer, push rollouts into replay, and update the
    learner once per collected environment step."""
    scenarios = list(train_set)
    if not scenarios:
        raise EmptyInput("empty training set")
    torch.set_num_threads(1)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed,
                                                       spawn_key=(0x7EA1A,)))
    policy = TD3Policy(seed=cfg.seed, hidden=cfg.hidden, lr=cfg.lr,
                       gamma=cfg.gamma, tau=cfg.tau, policy_delay=cfg.policy_delay,
                       target_noise=cfg.target_noise, noise_clip=cfg.noise_clip,
                       explore_noise=cfg.explore_noise)
    replay = ReplayBuffer(cfg.replay_capacity)
    ctx = AttackContext(sim_cfg=sim_cfg)

    use_attacks = cfg.adversarial_fraction > 0.0
    attackers: dict[str, list[int]] = {}
    buffers: dict[str, EgoBuffer] = {}
    if use_attacks:
        for s in scenarios:
            attackers[s.id] = identify(s, method, n_attackers,
                                       features=ctx.features(s))
            buf = EgoBuffer(cfg.buffer_capacity, cfg.buffer_decay)
            # seed with the logged ego so the first plans target replay behavior
            buf.push(ego_window(s.ego.samples, s.attack_start, s.horizon_steps))
            buffers[s.id] = buf

    explore_agent = _ExploreAgent(policy)
    random_agent = _RandomAgent(np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0xD1CE,))))

    snapshots: list[Snapshot] = []
    steps = 0
    next_snap = cfg.eval_every
    while steps < cfg.max_steps:
        scenario = scenarios[int(rng.integers(len(scenarios)))]
        adversarial = use_attacks and rng.random() < cfg.adversarial_fraction
        plan = None
        if adversarial:
            plan = plan_for(scenario, attackers[scenario.id],
                            buffers[scenario.id].hypotheses(), ctx)
        agent = explore_agent if replay.size >= cfg.warmup_steps else random_agent
        result = rollout(scenario, agent, sim_cfg, plan=plan, record_steps=True)
        episode = _transitions(result, sim_cfg.offroad_terminates)
        for obs_v, act_v, rew, nxt_v, done in episode:
            replay.push(obs_v, act_v, rew, nxt_v, done)
        steps += len(episode)
        if use_attacks:
            buffers[scenario.id].push(ego_window(
                result.ego_track.samples, scenario.attack_start,
                scenario.horizon_steps))
        if replay.size >= cfg.warmup_steps:
            for _ in range(len(episode)):
                policy.learn(replay.sample(cfg.batch_size, rng))
        while eval_conditions and steps >= next_snap and next_snap <= cfg.max_steps:
            snapshots.append(_snapshot(next_snap, policy,
                                       eval_set if eval_set is not None else scenarios,
                                       eval_conditions,
                                       eval_method or method, ctx))
            next_snap += cfg.eval_every
    return policy, snapshots


def _snapshot(step: int, policy, scenarios, conditions,
              method: IdentifierMethod, ctx: AttackContext) -> Snapshot:
    metrics = {}
    ev = evaluate(policy, scenarios, conditions, method, sim_cfg=ctx.sim_cfg, ctx=ctx)
    for cond, m in ev.conditions.items():
        metrics[cond] = (m.crash_rate, m.route_completion)
    return Snapshot(step=step, metrics=metrics)


def evaluate(policy, test_set, conditions, method: IdentifierMethod,
             sim_cfg: SimConfig = SimConfig(),
             ctx: AttackContext | None = None) -> EvalMetrics:
    """Deterministic testing pass: adversarial conditions plan against the
    policy's own normal-scenario rollout, then replay the attack."""
    scenarios = list(test_set)
    if not scenarios:
        raise EmptyInput("empty test set")
    for cond in conditions:
        if cond not in CONDITIONS:
            raise ValueError(f"unknown condition {cond!r}")
    if ctx is None:
        ctx = AttackContext(sim_cfg=sim_cfg)
    out: dict[str, ConditionMetrics] = {}
    normal_results = {}
    windows = {}
    for s in scenarios:
        res = rollout(s, policy, sim_cfg, record_steps=False)
        normal_results[s.id] = res
        windows[s.id] = ego_window(res.ego_track.samples, s.attack_start,
                                   s.horizon_steps)
    for cond in conditions:
        n = _CONDITION_N[cond]
        crashes = 0
        completions = []
        for s in scenarios:
            if n == 0:
                res = normal_results[s.id]
            else:
                ids = identify(s, method, n, features=ctx.features(s))
                plan = plan_for(s, ids, [(windows[s.id], 1.0)], ctx)
                res = rollout(s, policy, sim_cfg, plan=plan, record_steps=False)
            crashes += 1 if res.collided else 0
            completions.append(res.route_completion)
        out[cond] = ConditionMetrics(
            crash_rate=crashes / len(scenarios),
            route_completion=sum(completions) / len(completions))
    return EvalMetrics(conditions=out)


def aggregate_eval_metrics(runs: list[EvalMetrics]) -> EvalMetrics:
    """Mean and half-variance across repeated runs, per condition and metric."""
    if not runs:
        raise EmptyInput("no runs to aggregate")
    conditions = runs[0].conditions.keys()
    out = {}
    for cond in conditions:
        crash_m, crash_hv = mean_and_half_variance(
            [r.conditions[cond].crash_rate for r in runs])
        comp_m, comp_hv = mean_and_half_variance(
            [r.conditions[cond].route_completion for r in runs])
        out[cond] = ConditionMetrics(crash_rate=crash_m, route_completion=comp_m,
                                     crash_half_variance=crash_hv,
                                     completion_half_variance=comp_hv)
    return EvalMetrics(conditions=out)


def run_repeats(cfg: TrainConfig, k: int, train_set, test_set,
                method: IdentifierMethod, n_attackers: int,
                conditions=CONDITIONS, sim_cfg: SimConfig = SimConfig(),
                vary_seed: bool = True) -> EvalMetrics:
    """Train and evaluate ``k`` times; report mean and half of the variance.

    With ``vary_seed`` the repeat index offsets the seed; without it the runs
    are bit-identical and the spread is exactly zero.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    runs = []
    for i in range(k):
        seed = cfg.seed + i if vary_seed else cfg.seed
        cfg_i = TrainConfig(**{**asdict(cfg), "seed": seed})
        policy, _ = train_adversarial(cfg_i, train_set, method, n_attackers,
                                      sim_cfg=sim_cfg, eval_set=test_set,
                                      eval_conditions=())
        runs.append(evaluate(policy, test_set, conditions, method, sim_cfg=sim_cfg))
    return aggregate_eval_metrics(runs)


def curves_csv(snapshots: list[Snapshot]) -> str:
    lines = ["step,condition,crash_rate,route_completion"]
    for snap in snapshots:
        lines.extend(snap.csv_rows())
    return "\n".join(lines) + "\n"
