"""Power control environments: single-layer and double-layer (budgeted).

The transmitting entity is the UE by default: agents set powers on the
uplink transmitters.  The alternative ``bs`` mode keeps transmit powers
fixed and lets per-BS agents scale their receive paths instead, which is
the only physically consistent uplink reading of per-BS power agents;
outputs always label the mode in use.
"""
from __future__ import annotations

import numpy as np

from ..channel import SceneChannel
from ..combining import PowerAllocation, SelectionAssignment
from .common import (
    SE_NORM,
    ReceiveChain,
    evaluate_drop,
    entity_groups,
    probe_reference,
    shaped_reward,
    stream_obs_base,
)

SOFTMAX_SCALE = 4.0
UE_ENTITY = "ue"
BS_ENTITY = "bs"


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _affine_unit(action: float) -> float:
    """[-1, 1] action to [0, 1], clipped against stray numerics."""
    return float(np.clip((action + 1.0) / 2.0, 0.0, 1.0))


class _PcBase:
    """Scene plumbing shared by both power-control envs."""

    def __init__(self, scene: SceneChannel, chain: ReceiveChain, seed: int, entity: str):
        if entity not in (UE_ENTITY, BS_ENTITY):
            raise ValueError(f"entity must be '{UE_ENTITY}' or '{BS_ENTITY}', got {entity!r}")
        self.scene = scene
        self.chain = chain
        self.entity = entity
        topo = scene.topology
        self.num_streams = topo.num_streams
        self.num_bs = topo.num_bs
        self.assignment = SelectionAssignment.all_active(
            topo.num_streams, topo.num_bs, topo.bs_antennas_per_panel
        )
        self._stream_obs = stream_obs_base(scene)
        ss = np.random.SeedSequence(seed)
        drop_ss, probe_ss = ss.spawn(2)
        self.rng = np.random.default_rng(drop_ss)
        self.ref_sum_se = probe_reference(scene, chain, np.random.default_rng(probe_ss))
        self._last_sum_se = 0.0
        if entity == UE_ENTITY:
            self.groups = entity_groups(scene, UE_ENTITY)
        else:
            self.groups = [
                np.arange(topo.bs_antennas_per_panel) for _ in range(topo.num_bs)
            ]

    @property
    def n_entities(self) -> int:
        return len(self.groups)

    def _entity_obs(self, extras: list[list[float]]) -> list[np.ndarray]:
        """Entity features plus the drop-level and per-entity extras."""
        last = self._last_sum_se / (self.num_streams * SE_NORM)
        obs = []
        for e, extra in enumerate(extras):
            if self.entity == UE_ENTITY:
                base = self._stream_obs[self.groups[e]].mean(axis=0)
            else:
                col = self._stream_obs[:, e]  # this BS's scaled beta column
                base = np.array([col.mean(), col.min(), col.max()])
            obs.append(np.concatenate([base, [last], extra]))
        return obs

    def _stream_extras_obs(self, extras: list[list[float]]) -> list[np.ndarray]:
        last = self._last_sum_se / (self.num_streams * SE_NORM)
        return [
            np.concatenate([self._stream_obs[u], [last], extras[u]])
            for u in range(self.num_streams)
        ]

    def _evaluate(self, powers: PowerAllocation, rx_weights: np.ndarray | None):
        drop_seed = int(self.rng.integers(0, 2**63 - 1))
        metrics = evaluate_drop(
            self.scene, drop_seed, self.assignment, powers, self.chain, rx_weights
        )
        self._last_sum_se = metrics.sum_se
        return metrics


class PowerControlEnv(_PcBase):
    """One scalar agent per entity; the action maps affinely onto a level.

    UE mode: the level is the transmit power in ``[0, p_max]``, applied to
    each of the UE's antennas.  BS mode: transmit powers stay at ``p_max``
    and the level is the BS's receive weight in ``[0, 1]``.
    """

    def __init__(self, scene, chain, seed, entity: str = UE_ENTITY, power_penalty: float = 0.0):
        super().__init__(scene, chain, seed, entity)
        if power_penalty < 0:
            raise ValueError(f"power_penalty must be >= 0, got {power_penalty}")
        self.power_penalty = power_penalty
        self.n_agents = self.n_entities
        self.obs_dim = (self.num_bs + 4) if entity == UE_ENTITY else 5
        self.act_dim = 1
        self._last_level = np.zeros(self.n_agents)

    @property
    def obs_dims(self) -> list[int]:
        return [self.obs_dim] * self.n_agents

    @property
    def act_dims(self) -> list[int]:
        return [1] * self.n_agents

    def _observations(self) -> list[np.ndarray]:
        return self._entity_obs([[self._last_level[e]] for e in range(self.n_agents)])

    def reset(self) -> list[np.ndarray]:
        self._last_sum_se = 0.0
        self._last_level[:] = 0.0
        return self._observations()

    def decode(self, actions: list[np.ndarray]) -> tuple[PowerAllocation, np.ndarray | None]:
        levels = np.array([_affine_unit(np.asarray(a).reshape(-1)[0]) for a in actions])
        if self.entity == UE_ENTITY:
            p = np.zeros(self.num_streams)
            for e, group in enumerate(self.groups):
                p[group] = levels[e] * self.chain.p_max_w
            return PowerAllocation(p, self.chain.p_max_w), None
        powers = PowerAllocation(
            np.full(self.num_streams, self.chain.p_max_w), self.chain.p_max_w
        )
        return powers, levels

    def step(self, actions: list[np.ndarray]):
        powers, rx_weights = self.decode(actions)
        metrics = self._evaluate(powers, rx_weights)
        reward = shaped_reward(metrics.sum_se, self.ref_sum_se)
        if self.power_penalty > 0:
            reward -= self.power_penalty * metrics.total_power_w
        rewards = np.full(self.n_agents, reward)
        levels = rx_weights if rx_weights is not None else powers.p[[g[0] for g in self.groups]] / self.chain.p_max_w
        self._last_level = np.asarray(levels, dtype=float)
        info = {"powers": powers, "rx_weights": rx_weights, "entity": self.entity}
        return self._observations(), rewards, metrics, info


class DoubleLayerPowerControlEnv(_PcBase):
    """Budget layer over entities, allocation layer over their antennas.

    Layer-1 agents (one per entity) emit a scalar that maps onto a budget
    in ``[0, cap * n_e]``; layer-2 agents (one per entity antenna) emit a
    logit, and each entity's budget is split by the softmax of its
    antennas' logits.  The split conserves the budget exactly.
    """

    def __init__(self, scene, chain, seed, entity: str = UE_ENTITY, power_penalty: float = 0.0):
        super().__init__(scene, chain, seed, entity)
        if power_penalty < 0:
            raise ValueError(f"power_penalty must be >= 0, got {power_penalty}")
        self.power_penalty = power_penalty
        self.n_layer1 = self.n_entities
        self.n_layer2 = sum(len(g) for g in self.groups)
        # Unit budget per antenna: transmit power cap for UEs, unit
        # receive weight for BSs.
        self.unit_cap = chain.p_max_w if entity == UE_ENTITY else 1.0
        self.layer1_obs_dim = (self.num_bs + 4) if entity == UE_ENTITY else 5
        self.layer2_obs_dim = (
            (self.num_bs + 5) if entity == UE_ENTITY else 6
        )
        self._owner = np.concatenate(
            [np.full(len(g), e, dtype=int) for e, g in enumerate(self.groups)]
        )
        self._last_budgets = np.zeros(self.n_layer1)
        self._last_alloc = np.zeros(self.n_layer2)

    @property
    def layer1_obs_dims(self) -> list[int]:
        return [self.layer1_obs_dim] * self.n_layer1

    @property
    def layer1_act_dims(self) -> list[int]:
        return [1] * self.n_layer1

    @property
    def layer2_obs_dims(self) -> list[int]:
        return [self.layer2_obs_dim] * self.n_layer2

    @property
    def layer2_act_dims(self) -> list[int]:
        return [1] * self.n_layer2

    def reset(self) -> list[np.ndarray]:
        self._last_sum_se = 0.0
        self._last_budgets[:] = 0.0
        self._last_alloc[:] = 0.0
        return self.layer1_observations()

    def layer1_observations(self) -> list[np.ndarray]:
        caps = np.array([self.unit_cap * len(g) for g in self.groups])
        return self._entity_obs(
            [[self._last_budgets[e] / caps[e]] for e in range(self.n_layer1)]
        )

    def budgets_from_actions(self, actions: list[np.ndarray]) -> np.ndarray:
        if len(actions) != self.n_layer1:
            raise ValueError(f"expected {self.n_layer1} layer-1 actions, got {len(actions)}")
        return np.array(
            [
                _affine_unit(np.asarray(a).reshape(-1)[0]) * self.unit_cap * len(g)
                for a, g in zip(actions, self.groups)
            ]
        )

    def layer2_observations(self, budgets: np.ndarray) -> list[np.ndarray]:
        caps = np.array([self.unit_cap * len(g) for g in self.groups])
        norm_budget = budgets / caps
        if self.entity == UE_ENTITY:
            extras = [
                [norm_budget[self._owner[i]], self._last_alloc[i]] for i in range(self.n_layer2)
            ]
            return self._stream_extras_obs(extras)
        # BS mode: per-antenna agents observe their BS's summary features.
        last = self._last_sum_se / (self.num_streams * SE_NORM)
        obs = []
        for i in range(self.n_layer2):
            e = self._owner[i]
            col = self._stream_obs[:, e]
            obs.append(
                np.array(
                    [col.mean(), col.min(), col.max(), last, norm_budget[e], self._last_alloc[i]]
                )
            )
        return obs

    def allocate(self, budgets: np.ndarray, layer2_actions: list[np.ndarray]) -> np.ndarray:
        """Per-antenna levels: each entity's budget split by softmax."""
        if len(layer2_actions) != self.n_layer2:
            raise ValueError(f"expected {self.n_layer2} layer-2 actions, got {len(layer2_actions)}")
        logits = np.array([float(np.asarray(a).reshape(-1)[0]) for a in layer2_actions])
        levels = np.zeros(self.n_layer2)
        start = 0
        for e, group in enumerate(self.groups):
            n = len(group)
            share = _softmax(SOFTMAX_SCALE * logits[start : start + n])
            levels[start : start + n] = budgets[e] * share
            total = float(levels[start : start + n].sum())
            if budgets[e] > 0 and abs(total - budgets[e]) > 1e-9 * budgets[e]:
                raise AssertionError(f"entity {e} allocation {total} broke its budget {budgets[e]}")
            start += n
        return levels

    def step(self, layer1_actions: list[np.ndarray], layer2_actions: list[np.ndarray]):
        """One drop: budgets, split, evaluate; both layers share the reward."""
        budgets = self.budgets_from_actions(layer1_actions)
        levels = self.allocate(budgets, layer2_actions)
        if self.entity == UE_ENTITY:
            # Streams are entity-major, so levels map onto powers directly.
            # A concentrated budget may push one antenna past p_max, so the
            # allocation cap is the entity budget ceiling.
            powers = PowerAllocation(levels.copy(), self.unit_cap * max(len(g) for g in self.groups))
            rx_weights = None
        else:
            powers = PowerAllocation(
                np.full(self.num_streams, self.chain.p_max_w), self.chain.p_max_w
            )
            rx_weights = levels.reshape(self.num_bs, -1)
        metrics = self._evaluate(powers, rx_weights)
        reward = shaped_reward(metrics.sum_se, self.ref_sum_se)
        if self.power_penalty > 0:
            reward -= self.power_penalty * metrics.total_power_w
        rewards1 = np.full(self.n_layer1, reward)
        rewards2 = np.full(self.n_layer2, reward)
        self._last_budgets = budgets
        self._last_alloc = levels / np.maximum(self.unit_cap, 1e-12)
        info = {
            "budgets": budgets,
            "levels": levels,
            "entity": self.entity,
            "powers": powers,
        }
        return self.layer1_observations(), rewards1, rewards2, metrics, info
