"""Centralized-critic multi-agent DDPG on numpy.

Each agent owns a decentralized actor (its own observation in, action in
``[-1, 1]`` out) and a centralized critic scoring the joint observation
and joint action.  Training follows the usual recipe: TD targets from
slow-moving target networks, critic regression, then an actor step along
the critic's gradient with respect to that agent's own action slice only,
and Polyak averaging of the targets.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import NumericalAbort
from .mlp import IDENTITY, TANH, Mlp, clone_mlp, mlp_backward, mlp_forward, sgd_step, soft_update
from .replay import ReplayBuffer, Transition, TransitionBatch

_CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one MADDPG trainer."""

    gamma: float = 0.0
    tau: float = 0.005
    lr_actor: float = 1e-3
    lr_critic: float = 1e-2
    batch_size: int = 256
    buffer_capacity: int = 100_000
    noise_sigma: float = 0.2
    noise_decay: float = 0.999
    noise_floor: float = 0.02
    grad_clip: float = 1.0
    actor_hidden: tuple[int, ...] = (128, 64)
    critic_hidden: tuple[int, ...] = (256, 128)
    share_actor: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        for name in ("lr_actor", "lr_critic", "grad_clip"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.noise_sigma < 0 or self.noise_floor < 0:
            raise ValueError("noise levels must be >= 0")
        if not 0.0 < self.noise_decay <= 1.0:
            raise ValueError(f"noise_decay must be in (0, 1], got {self.noise_decay}")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need buffer_capacity >= batch_size >= 1")
        object.__setattr__(self, "actor_hidden", tuple(int(h) for h in self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(int(h) for h in self.critic_hidden))


@dataclass(eq=False)
class AgentPolicy:
    """One agent's networks: actor/critic and their target copies."""

    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    obs_dim: int
    act_dim: int

    @classmethod
    def create(
        cls,
        obs_dim: int,
        act_dim: int,
        joint_obs_dim: int,
        joint_act_dim: int,
        cfg: TrainConfig,
        rng: np.random.Generator,
    ) -> "AgentPolicy":
        from .mlp import mlp_init

        actor = mlp_init((obs_dim, *cfg.actor_hidden, act_dim), TANH, rng)
        critic = mlp_init((joint_obs_dim + joint_act_dim, *cfg.critic_hidden, 1), IDENTITY, rng)
        return cls(
            actor=actor,
            critic=critic,
            actor_target=clone_mlp(actor),
            critic_target=clone_mlp(critic),
            obs_dim=obs_dim,
            act_dim=act_dim,
        )


def actor_act(
    policy: AgentPolicy,
    obs: np.ndarray,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Deterministic policy output plus optional exploration noise, clipped."""
    a, _ = mlp_forward(policy.actor, np.asarray(obs, dtype=float))
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("exploration noise needs an explicit rng")
        a = a + rng.normal(0.0, noise_sigma, size=a.shape)
    return np.clip(a, -1.0, 1.0)


def _slices(dims: list[int]) -> list[slice]:
    out, start = [], 0
    for d in dims:
        out.append(slice(start, start + d))
        start += d
    return out


def maddpg_update(
    agents: list[AgentPolicy],
    batch: TransitionBatch,
    cfg: TrainConfig,
    obs_slices: list[slice],
    act_slices: list[slice],
) -> list[tuple[float, float]]:
    """One gradient step for every agent on a sampled batch.

    Per agent, in order: TD target from target networks, critic descent on
    the squared TD error, actor ascent on the critic value with the
    gradient flowing only through that agent's action slice.  Target
    networks are left untouched; the trainer soft-updates them afterwards.

    Returns per-agent ``(critic_loss, actor_objective)`` measured before
    the respective steps.
    """
    n = batch.size
    joint_obs_dim = batch.joint_obs.shape[1]
    # Joint target action under the slow policies, shared by every critic.
    next_actions = np.empty_like(batch.joint_action)
    for j, agent in enumerate(agents):
        mu, _ = mlp_forward(agent.actor_target, batch.joint_next_obs[:, obs_slices[j]])
        next_actions[:, act_slices[j]] = mu
    next_in = np.concatenate([batch.joint_next_obs, next_actions], axis=1)
    now_in = np.concatenate([batch.joint_obs, batch.joint_action], axis=1)

    losses = []
    for i, agent in enumerate(agents):
        q_next, _ = mlp_forward(agent.critic_target, next_in)
        y = batch.rewards[:, i] + cfg.gamma * (1.0 - batch.done.astype(float)) * q_next[:, 0]

        q, cache = mlp_forward(agent.critic, now_in)
        err = q[:, 0] - y
        critic_loss = float(np.mean(err**2))
        if not np.isfinite(critic_loss):
            raise NumericalAbort(f"agent {i} critic loss is not finite")
        grads, _ = mlp_backward(agent.critic, cache, (2.0 * err / n)[:, None])
        sgd_step(agent.critic, grads, cfg.lr_critic, cfg.grad_clip)

        # Actor step: ascend mean Q with the batch's other actions frozen.
        mu, mu_cache = mlp_forward(agent.actor, batch.joint_obs[:, obs_slices[i]])
        act_pi = batch.joint_action.copy()
        act_pi[:, act_slices[i]] = mu
        q_pi, cache_pi = mlp_forward(agent.critic, np.concatenate([batch.joint_obs, act_pi], axis=1))
        actor_objective = float(np.mean(q_pi[:, 0]))
        if not np.isfinite(actor_objective):
            raise NumericalAbort(f"agent {i} actor objective is not finite")
        _, din = mlp_backward(agent.critic, cache_pi, np.full((n, 1), 1.0 / n))
        act_slice = act_slices[i]
        da = din[:, joint_obs_dim + act_slice.start : joint_obs_dim + act_slice.stop]
        a_grads, _ = mlp_backward(agent.actor, mu_cache, da)
        ascent = [(-dw, -db) for dw, db in a_grads]
        sgd_step(agent.actor, ascent, cfg.lr_actor, cfg.grad_clip)

        losses.append((critic_loss, actor_objective))
    return losses


class MaddpgTrainer:
    """Owns the agents, buffer, exploration schedule, and RNG stream.

    ``obs_dims``/``act_dims`` give each agent's slice of the joint
    vectors, in agent order.  With ``cfg.share_actor`` every agent holds
    the same actor object, so each agent's gradient step moves the shared
    parameters; observation and action dims must then agree.
    """

    def __init__(self, obs_dims: list[int], act_dims: list[int], cfg: TrainConfig):
        if len(obs_dims) != len(act_dims) or not obs_dims:
            raise ValueError("need one obs and action dim per agent")
        self.cfg = cfg
        self.obs_dims = [int(d) for d in obs_dims]
        self.act_dims = [int(d) for d in act_dims]
        self.n_agents = len(obs_dims)
        self.joint_obs_dim = sum(self.obs_dims)
        self.joint_act_dim = sum(self.act_dims)
        self.obs_slices = _slices(self.obs_dims)
        self.act_slices = _slices(self.act_dims)
        self.rng = np.random.default_rng(cfg.seed)
        if cfg.share_actor and (len(set(self.obs_dims)) > 1 or len(set(self.act_dims)) > 1):
            raise ValueError("share_actor requires homogeneous agent dimensions")
        self.agents = []
        shared: AgentPolicy | None = None
        for i in range(self.n_agents):
            agent = AgentPolicy.create(
                self.obs_dims[i], self.act_dims[i], self.joint_obs_dim, self.joint_act_dim,
                cfg, self.rng,
            )
            if cfg.share_actor:
                if shared is None:
                    shared = agent
                else:
                    agent.actor = shared.actor
                    agent.actor_target = shared.actor_target
            self.agents.append(agent)
        self.buffer = ReplayBuffer(
            cfg.buffer_capacity, self.joint_obs_dim, self.joint_act_dim, self.n_agents
        )
        self.noise_sigma = cfg.noise_sigma
        self.step_count = 0

    def act(self, obs_list: list[np.ndarray], explore: bool = True) -> list[np.ndarray]:
        """Per-agent actions; exploration noise only when asked."""
        sigma = self.noise_sigma if explore else 0.0
        return [
            actor_act(agent, obs, sigma, self.rng) for agent, obs in zip(self.agents, obs_list)
        ]

    def observe(self, transition: Transition) -> None:
        self.buffer.push(transition)

    def ready(self) -> bool:
        return len(self.buffer) >= self.cfg.batch_size

    def update(self) -> list[tuple[float, float]]:
        """Sample, step every agent, soft-update targets, decay noise."""
        batch = self.buffer.sample(self.cfg.batch_size, self.rng)
        losses = maddpg_update(self.agents, batch, self.cfg, self.obs_slices, self.act_slices)
        seen: set[int] = set()
        for agent in self.agents:
            for target, online in (
                (agent.actor_target, agent.actor),
                (agent.critic_target, agent.critic),
            ):
                if id(target) not in seen:
                    soft_update(target, online, self.cfg.tau)
                    seen.add(id(target))
        self.noise_sigma = max(self.cfg.noise_floor, self.noise_sigma * self.cfg.noise_decay)
        self.step_count += 1
        return losses

    # -- checkpointing ----------------------------------------------------

    def save_checkpoint(self, path, extra_state: dict | None = None) -> None:
        """Write parameters, buffer, and RNG state for exact resume."""
        arrays: dict[str, np.ndarray] = {}
        for i, agent in enumerate(self.agents):
            for net_name in ("actor", "critic", "actor_target", "critic_target"):
                net: Mlp = getattr(agent, net_name)
                for l, (w, b) in enumerate(zip(net.weights, net.biases)):
                    arrays[f"agent{i}_{net_name}_w{l}"] = w
                    arrays[f"agent{i}_{net_name}_b{l}"] = b
        n = len(self.buffer)
        arrays["buf_obs"] = self.buffer._obs[:n]
        arrays["buf_act"] = self.buffer._act[:n]
        arrays["buf_rew"] = self.buffer._rew[:n]
        arrays["buf_next_obs"] = self.buffer._next_obs[:n]
        arrays["buf_done"] = self.buffer._done[:n]
        meta = {
            "version": _CKPT_VERSION,
            "cfg": asdict(self.cfg),
            "obs_dims": self.obs_dims,
            "act_dims": self.act_dims,
            "step_count": self.step_count,
            "noise_sigma": self.noise_sigma,
            "buffer_cursor": self.buffer._cursor,
            "rng_state": self.rng.bit_generator.state,
            "extra": extra_state or {},
        }
        with open(path, "wb") as f:
            np.savez(f, meta=json.dumps(meta), **arrays)

    @classmethod
    def load_checkpoint(cls, path) -> tuple["MaddpgTrainer", dict]:
        """Rebuild a trainer in the exact state it was saved in."""
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != _CKPT_VERSION:
                raise ValueError(f"unsupported checkpoint version in {path}")
            cfg_dict = dict(meta["cfg"])
            cfg_dict["actor_hidden"] = tuple(cfg_dict["actor_hidden"])
            cfg_dict["critic_hidden"] = tuple(cfg_dict["critic_hidden"])
            cfg = TrainConfig(**cfg_dict)
            trainer = cls(meta["obs_dims"], meta["act_dims"], cfg)
            for i, agent in enumerate(trainer.agents):
                for net_name in ("actor", "critic", "actor_target", "critic_target"):
                    net: Mlp = getattr(agent, net_name)
                    for l in range(len(net.weights)):
                        net.weights[l][:] = data[f"agent{i}_{net_name}_w{l}"]
                        net.biases[l][:] = data[f"agent{i}_{net_name}_b{l}"]
            n = data["buf_obs"].shape[0]
            trainer.buffer._obs[:n] = data["buf_obs"]
            trainer.buffer._act[:n] = data["buf_act"]
            trainer.buffer._rew[:n] = data["buf_rew"]
            trainer.buffer._next_obs[:n] = data["buf_next_obs"]
            trainer.buffer._done[:n] = data["buf_done"]
            trainer.buffer._size = n
            trainer.buffer._cursor = meta["buffer_cursor"]
            trainer.noise_sigma = meta["noise_sigma"]
            trainer.step_count = meta["step_count"]
            trainer.rng.bit_generator.state = meta["rng_state"]
        return trainer, meta["extra"]
