"""Shared evaluation pipeline and observation features for both tasks.

Every task episode is one fresh channel drop evaluated through the same
chain: local combining per BS over the active antennas, single-drop
fusion, SINR to SE, and the network power model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import SceneChannel
from ..combining import (
    EQUAL_WEIGHT,
    LSFD_OPTIMAL,
    MMSE,
    MR,
    EpisodeMetrics,
    PowerAllocation,
    PowerModel,
    SelectionAssignment,
    dbm_to_watt,
    fuse_lsfd,
    fused_sinr,
    local_statistics,
    spectral_efficiency,
    total_power,
)

# Observation feature scaling, shared by all envs so policies see
# comparable ranges across scenes.
OBS_BETA_OFFSET_DB = 120.0
OBS_BETA_SCALE_DB = 60.0
SE_NORM = 10.0

# Reward shaping: team reward is the relative sum-SE gain over an
# all-on/equal-power probe of the same scene, clipped for critic
# conditioning.  The map is fixed per scene, so it preserves argmax.
REWARD_GAIN = 4.0
REWARD_CLIP = 3.0
INFEASIBLE_REWARD = -REWARD_CLIP
_PROBE_DROPS = 16


@dataclass(frozen=True)
class ReceiveChain:
    """Everything the receive side needs to turn a drop into metrics."""

    combiner: str = MMSE
    fusion: str = LSFD_OPTIMAL
    bandwidth_hz: float = 20e6
    noise_power_w: float = field(default_factory=lambda: dbm_to_watt(-94.0))
    power_model: PowerModel = field(default_factory=PowerModel)
    p_max_w: float = 0.2

    def __post_init__(self) -> None:
        if self.combiner not in (MR, MMSE):
            raise ValueError(f"combiner must be '{MR}' or '{MMSE}', got {self.combiner!r}")
        if self.fusion not in (EQUAL_WEIGHT, LSFD_OPTIMAL):
            raise ValueError(
                f"fusion must be '{EQUAL_WEIGHT}' or '{LSFD_OPTIMAL}', got {self.fusion!r}"
            )
        if self.bandwidth_hz <= 0 or self.noise_power_w <= 0 or self.p_max_w <= 0:
            raise ValueError("bandwidth, noise power, and p_max must all be > 0")


def evaluate_drop(
    scene: SceneChannel,
    drop_seed: int,
    assignment: SelectionAssignment,
    powers: PowerAllocation,
    chain: ReceiveChain,
    rx_weights: np.ndarray | None = None,
) -> EpisodeMetrics:
    """Metrics of one drop: single-realization statistics, fused per drop."""
    realization = scene.realize(drop_seed)
    stats = local_statistics(
        [realization], assignment.active, chain.combiner, powers, chain.noise_power_w, rx_weights
    )
    fused = fuse_lsfd(stats, chain.fusion, powers, chain.noise_power_w)
    se = spectral_efficiency(fused_sinr(fused, powers, chain.noise_power_w))
    consumed = total_power(powers, assignment, chain.power_model)
    return EpisodeMetrics.compute(se, chain.bandwidth_hz, consumed, assignment.active_count)


def evaluate_batch(
    scene: SceneChannel,
    drop_seeds,
    assignment: SelectionAssignment,
    powers: PowerAllocation,
    chain: ReceiveChain,
    rx_weights: np.ndarray | None = None,
) -> list[EpisodeMetrics]:
    return [
        evaluate_drop(scene, int(s), assignment, powers, chain, rx_weights) for s in drop_seeds
    ]


def infeasible_metrics(scene: SceneChannel, chain: ReceiveChain) -> EpisodeMetrics:
    """Zero-rate record for an episode whose decode found no assignment."""
    se = np.zeros(scene.topology.num_streams)
    consumed = total_power(
        PowerAllocation(np.zeros(scene.topology.num_streams), chain.p_max_w), 0, chain.power_model
    )
    return EpisodeMetrics(
        se_per_stream=se,
        sum_se=0.0,
        total_power_w=consumed,
        ee=0.0,
        active_antennas=0,
        infeasible=True,
    )


def stream_obs_base(scene: SceneChannel) -> np.ndarray:
    """Static per-stream features: scaled LSF row and normalized position.

    Shape ``(num_streams, num_bs + 2)``.
    """
    beta_db = 10.0 * np.log10(scene.lsf.beta)
    beta_feat = (beta_db + OBS_BETA_OFFSET_DB) / OBS_BETA_SCALE_DB
    xy = scene.topology.ue_antenna_positions[:, :2] / scene.topology.area_side
    return np.concatenate([beta_feat, xy], axis=1)


def entity_groups(scene: SceneChannel, entity: str) -> list[np.ndarray]:
    """Stream indices owned by each transmitting entity.

    ``ue`` groups a UE panel's streams; ``bs`` has no stream ownership
    (BS entities act on the receive side) and is handled by the envs.
    """
    if entity != "ue":
        raise ValueError(f"stream grouping only exists for entity='ue', got {entity!r}")
    n_s = scene.topology.ue_antennas_per_panel
    return [
        np.arange(k * n_s, (k + 1) * n_s) for k in range(scene.topology.num_ue)
    ]


def probe_reference(scene: SceneChannel, chain: ReceiveChain, rng: np.random.Generator) -> float:
    """Mean all-antennas-on equal-power sum SE, the reward reference."""
    topo = scene.topology
    assignment = SelectionAssignment.all_active(
        topo.num_streams, topo.num_bs, topo.bs_antennas_per_panel
    )
    powers = PowerAllocation(np.full(topo.num_streams, chain.p_max_w), chain.p_max_w)
    seeds = rng.integers(0, 2**63 - 1, size=_PROBE_DROPS)
    metrics = evaluate_batch(scene, seeds, assignment, powers, chain)
    ref = float(np.mean([m.sum_se for m in metrics]))
    return ref if ref > 0 else 1.0


def shaped_reward(sum_se: float, ref_sum_se: float) -> float:
    """Clipped relative improvement over the probe reference."""
    raw = REWARD_GAIN * (sum_se - ref_sum_se) / ref_sum_se
    return float(np.clip(raw, -REWARD_CLIP, REWARD_CLIP))
