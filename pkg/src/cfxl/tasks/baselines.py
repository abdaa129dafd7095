"""Non-learned reference strategies for both tasks.

All three are pure functions of the scene and explicit drop seeds.
"""
from __future__ import annotations

import numpy as np

from ..channel import SceneChannel
from ..combining import EpisodeMetrics, PowerAllocation, SelectionAssignment
from ..errors import InfeasibleError
from .antenna_selection import assignment_from_flat
from .common import ReceiveChain, evaluate_batch


def no_selection(
    scene: SceneChannel, chain: ReceiveChain, drop_seeds
) -> tuple[SelectionAssignment, list[EpisodeMetrics]]:
    """Every antenna active, equal data power on every stream."""
    topo = scene.topology
    assignment = SelectionAssignment.all_active(
        topo.num_streams, topo.num_bs, topo.bs_antennas_per_panel
    )
    powers = PowerAllocation(np.full(topo.num_streams, chain.p_max_w), chain.p_max_w)
    return assignment, evaluate_batch(scene, drop_seeds, assignment, powers, chain)


def lsf_selection_assignment(scene: SceneChannel) -> SelectionAssignment:
    """Greedy one-antenna-per-stream pick by large-scale fading.

    Streams are served in descending order of their best LSF (ties to the
    lower stream index); each takes its strongest-LSF remaining visible
    antenna, ranked per BS by beta and within a BS by antenna index.
    """
    topo = scene.topology
    num_streams, num_bs = scene.lsf.beta.shape
    n_ant = topo.bs_antennas_per_panel
    visible = np.transpose(scene.visible, (2, 0, 1)).reshape(num_streams, -1)
    order = np.argsort(-scene.lsf.beta.max(axis=1), kind="stable")
    claimed = np.zeros(num_bs * n_ant, dtype=bool)
    flat = np.full(num_streams, -1, dtype=int)
    for u in order:
        # Flat candidates ranked by the owning BS's beta, antenna index
        # breaking ties inside a panel.
        bs_rank = np.argsort(-scene.lsf.beta[u], kind="stable")
        for m in bs_rank:
            candidates = np.flatnonzero(visible[u, m * n_ant : (m + 1) * n_ant] & ~claimed[m * n_ant : (m + 1) * n_ant])
            if candidates.size:
                a = m * n_ant + int(candidates[0])
                flat[u] = a
                claimed[a] = True
                break
        if flat[u] < 0:
            raise InfeasibleError(f"stream {u} has no unclaimed visible antenna")
    return assignment_from_flat(flat, num_bs, n_ant)


def lsf_selection(
    scene: SceneChannel, chain: ReceiveChain, drop_seeds
) -> tuple[SelectionAssignment, list[EpisodeMetrics]]:
    assignment = lsf_selection_assignment(scene)
    topo = scene.topology
    powers = PowerAllocation(np.full(topo.num_streams, chain.p_max_w), chain.p_max_w)
    return assignment, evaluate_batch(scene, drop_seeds, assignment, powers, chain)


def equal_power_allocation(
    scene: SceneChannel, chain: ReceiveChain, drop_seeds, fill_fraction: float = 1.0
) -> tuple[PowerAllocation, list[EpisodeMetrics]]:
    """Power-control baseline: every stream at ``p_max * fill_fraction``."""
    if not 0.0 <= fill_fraction <= 1.0:
        raise ValueError(f"fill_fraction must be in [0, 1], got {fill_fraction}")
    topo = scene.topology
    assignment = SelectionAssignment.all_active(
        topo.num_streams, topo.num_bs, topo.bs_antennas_per_panel
    )
    powers = PowerAllocation(
        np.full(topo.num_streams, chain.p_max_w * fill_fraction), chain.p_max_w
    )
    return powers, evaluate_batch(scene, drop_seeds, assignment, powers, chain)
