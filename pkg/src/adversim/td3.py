"""Twin-critic delayed-actor learner with a numpy replay ring buffer and a
byte-stable checkpoint format."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np
import torch
import torch.nn as nn

from .engine import AgentAction, Observation

OBS_DIM = 5 + 16
ACT_DIM = 2

CKPT_MAGIC = b"ADVSIMCKPT1\n"


def obs_to_vec(obs: Observation) -> np.ndarray:
    """Normalize an observation into the policy input vector."""
    head = (obs.ego_speed / 10.0, obs.heading_error, obs.lateral_offset / 5.0,
            obs.nav_distance / 30.0, obs.nav_bearing)
    rays = tuple(r / 30.0 for r in obs.rays)
    return np.asarray(head + rays, dtype=np.float32)


class _MLP(nn.Module):
    def __init__(self, in_dim: int, out_dim: int, hidden: int, tanh_out: bool):
        super().__init__()
        layers = [nn.Linear(in_dim, hidden), nn.ReLU(),
                  nn.Linear(hidden, hidden), nn.ReLU(),
                  nn.Linear(hidden, out_dim)]
        if tanh_out:
            layers.append(nn.Tanh())
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros((capacity, 1), dtype=np.float32)
        self.nxt = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.done = np.zeros((capacity, 1), dtype=np.float32)
        self.size = 0
        self.ptr = 0

    def push(self, obs, act, rew, nxt, done):
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.nxt[i] = nxt
        self.done[i] = done
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.nxt[idx], self.done[idx])


class TD3Policy:
    """Deterministic actor with twin critics; exploration noise comes from a
    numpy generator so rollout randomness is independent of torch state."""

    def __init__(self, seed: int, hidden: int = 64, lr: float = 1e-3,
                 gamma: float = 0.99, tau: float = 0.005, policy_delay: int = 2,
                 target_noise: float = 0.1, noise_clip: float = 0.3,
                 explore_noise: float = 0.1):
        torch.manual_seed(seed)
        self.hidden = hidden
        self.gamma = gamma
        self.tau = tau
        self.policy_delay = policy_delay
        self.target_noise = target_noise
        self.noise_clip = noise_clip
        self.explore_noise = explore_noise
        self.actor = _MLP(OBS_DIM, ACT_DIM, hidden, tanh_out=True)
        self.critic1 = _MLP(OBS_DIM + ACT_DIM, 1, hidden, tanh_out=False)
        self.critic2 = _MLP(OBS_DIM + ACT_DIM, 1, hidden, tanh_out=False)
        self.actor_t = _MLP(OBS_DIM, ACT_DIM, hidden, tanh_out=True)
        self.critic1_t = _MLP(OBS_DIM + ACT_DIM, 1, hidden, tanh_out=False)
        self.critic2_t = _MLP(OBS_DIM + ACT_DIM, 1, hidden, tanh_out=False)
        self.actor_t.load_state_dict(self.actor.state_dict())
        self.critic1_t.load_state_dict(self.critic1.state_dict())
        self.critic2_t.load_state_dict(self.critic2.state_dict())
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=lr)
        self.critic_opt = torch.optim.Adam(
            list(self.critic1.parameters()) + list(self.critic2.parameters()), lr=lr)
        self.noise_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(0xAC7104,)))
        self.updates = 0

    # -- acting ------------------------------------------------------------

    def act(self, obs: Observation, explore: bool = False) -> AgentAction:
        vec = obs_to_vec(obs)
        with torch.no_grad():
            a = self.actor(torch.from_numpy(vec).unsqueeze(0)).numpy()[0]
        if explore:
            a = a + self.noise_rng.normal(0.0, self.explore_noise, size=ACT_DIM)
        a = np.clip(a, -1.0, 1.0)
        return AgentAction(float(a[0]), float(a[1]))

    # -- learning ----------------------------------------------------------

    def learn(self, batch) -> dict[str, float]:
        obs, act, rew, nxt, done = (torch.from_numpy(x) for x in batch)
        with torch.no_grad():
            noise = self.noise_rng.normal(0.0, self.target_noise,
                                          size=(len(act), ACT_DIM))
            noise = np.clip(noise, -self.noise_clip, self.noise_clip)
            next_a = self.actor_t(nxt) + torch.from_numpy(noise.astype(np.float32))
            next_a = next_a.clamp(-1.0, 1.0)
            q_in = torch.cat([nxt, next_a], dim=1)
            target_q = torch.minimum(self.critic1_t(q_in), self.critic2_t(q_in))
            y = rew + self.gamma * (1.0 - done) * target_q
        sa = torch.cat([obs, act], dim=1)
        q1 = self.critic1(sa)
        q2 = self.critic2(sa)
        critic_loss = ((q1 - y) ** 2).mean() + ((q2 - y) ** 2).mean()
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        losses = {"critic": float(critic_loss.item())}
        self.updates += 1
        if self.updates % self.policy_delay == 0:
            pa = self.actor(obs)
            actor_loss = -self.critic1(torch.cat([obs, pa], dim=1)).mean()
            self.actor_opt.zero_grad()
            actor_loss.backward()
            self.actor_opt.step()
            losses["actor"] = float(actor_loss.item())
            with torch.no_grad():
                for tgt, src in ((self.actor_t, self.actor),
                                 (self.critic1_t, self.critic1),
                                 (self.critic2_t, self.critic2)):
                    for pt, ps in zip(tgt.parameters(), src.parameters()):
                        pt.mul_(1.0 - self.tau).add_(self.tau * ps)
        return losses

    # -- serialization -----------------------------------------------------

    def _param_items(self):
        for net_name in ("actor", "critic1", "critic2", "actor_t",
                         "critic1_t", "critic2_t"):
            net = getattr(self, net_name)
            for pname, tensor in net.state_dict().items():
                yield f"{net_name}.{pname}", tensor

    def serialize(self, meta: dict) -> bytes:
        entries = []
        blobs = []
        offset = 0
        for name, tensor in self._param_items():
            raw = tensor.detach().numpy().astype(np.float32).tobytes()
            entries.append({"name": name, "shape": list(tensor.shape),
                            "offset": offset, "nbytes": len(raw)})
            blobs.append(raw)
            offset += len(raw)
        header = dict(meta)
        header["hidden"] = self.hidden
        header["params"] = entries
        hjson = json.dumps(header, sort_keys=True).encode()
        return (CKPT_MAGIC + len(hjson).to_bytes(8, "big") + hjson + b"".join(blobs))

    @classmethod
    def deserialize(cls, blob: bytes) -> tuple["TD3Policy", dict]:
        if not blob.startswith(CKPT_MAGIC):
            raise ValueError("not a policy checkpoint")
        n = int.from_bytes(blob[len(CKPT_MAGIC):len(CKPT_MAGIC) + 8], "big")
        start = len(CKPT_MAGIC) + 8
        header = json.loads(blob[start:start + n].decode())
        body = blob[start + n:]
        policy = cls(seed=int(header.get("seed", 0)),
                     hidden=int(header.get("hidden", 64)))
        tensors = {}
        for e in header["params"]:
            raw = body[e["offset"]:e["offset"] + e["nbytes"]]
            arr = np.frombuffer(raw, dtype=np.float32).reshape(e["shape"]).copy()
            tensors[e["name"]] = torch.from_numpy(arr)
        for net_name in ("actor", "critic1", "critic2", "actor_t",
                         "critic1_t", "critic2_t"):
            net = getattr(policy, net_name)
            state = {k.split(".", 1)[1]: v for k, v in tensors.items()
                     if k.startswith(net_name + ".")}
            net.load_state_dict(state)
        return policy, header


def config_hash(obj: dict) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]
