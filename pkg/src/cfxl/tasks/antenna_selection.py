"""Antenna selection as a multi-agent episode, plus the exhaustive oracle.

Each stream is an agent scoring every antenna in the network; scores are
decoded into a conflict-free assignment, the assigned antennas form the
active set, and the team is rewarded with the drop's sum SE.
"""
from __future__ import annotations

from dataclasses import replace
from typing import NamedTuple

import numpy as np

from ..channel import SceneChannel
from ..combining import (
    MR,
    PowerAllocation,
    SelectionAssignment,
    fuse_lsfd,
    fused_sinr,
    local_statistics,
    spectral_efficiency,
)
from ..errors import InfeasibleError
from .common import (
    INFEASIBLE_REWARD,
    SE_NORM,
    ReceiveChain,
    evaluate_drop,
    infeasible_metrics,
    probe_reference,
    shaped_reward,
    stream_obs_base,
)


def decode_selection(scores: np.ndarray, visible: np.ndarray) -> np.ndarray | None:
    """Turn per-agent antenna scores into a conflict-free assignment.

    Runs an auction: every unassigned agent proposes its best-scored
    unclaimed visible antenna; the highest score wins each contested
    antenna (ties to the lower agent index) and losers re-propose.
    Returns the flat antenna index per agent, or None when some agent
    runs out of visible antennas.

    Parameters
    ----------
    scores : np.ndarray
        Shape ``(n_agents, n_antennas)``.
    visible : np.ndarray
        Boolean, same shape; an agent can only claim visible antennas.
    """
    scores = np.asarray(scores, dtype=float)
    visible = np.asarray(visible, dtype=bool)
    if scores.shape != visible.shape:
        raise ValueError(f"scores shape {scores.shape} != visibility shape {visible.shape}")
    n_agents, n_ant = scores.shape
    prefs = np.argsort(-scores, axis=1, kind="stable")
    ptr = np.zeros(n_agents, dtype=int)
    assigned = np.full(n_agents, -1, dtype=int)
    claimed = np.zeros(n_ant, dtype=bool)
    pending = list(range(n_agents))
    while pending:
        proposals: dict[int, tuple[float, int]] = {}
        for u in pending:
            while ptr[u] < n_ant and (
                claimed[prefs[u, ptr[u]]] or not visible[u, prefs[u, ptr[u]]]
            ):
                ptr[u] += 1
            if ptr[u] >= n_ant:
                return None
            a = int(prefs[u, ptr[u]])
            bid = (float(scores[u, a]), -u)
            if a not in proposals or bid > proposals[a]:
                proposals[a] = bid
        next_pending = []
        winners = {a: -bid_u for a, (_, bid_u) in proposals.items()}
        for u in pending:
            a = int(prefs[u, ptr[u]])
            if winners.get(a) == u:
                assigned[u] = a
                claimed[a] = True
            else:
                next_pending.append(u)
        pending = next_pending
    return assigned


def assignment_from_flat(flat: np.ndarray, num_bs: int, antennas_per_panel: int) -> SelectionAssignment:
    """Flat antenna indices (BS-major) to a SelectionAssignment."""
    flat = np.asarray(flat, dtype=int)
    pairs = np.stack([flat // antennas_per_panel, flat % antennas_per_panel], axis=1)
    pairs[flat < 0] = -1
    return SelectionAssignment.from_pairs(pairs, num_bs, antennas_per_panel)


class AntennaSelectionEnv:
    """Single-step selection episodes on a fixed scene.

    Agents are the ``num_streams`` UE antennas.  Observations are the
    static scene features plus the previous drop's normalized sum SE;
    actions are score vectors over all ``num_bs * antennas_per_panel``
    antennas.
    """

    def __init__(self, scene: SceneChannel, chain: ReceiveChain, seed: int):
        self.scene = scene
        self.chain = chain
        topo = scene.topology
        self.n_agents = topo.num_streams
        self.n_antennas = topo.num_bs * topo.bs_antennas_per_panel
        self.obs_dim = topo.num_bs + 3
        self.act_dim = self.n_antennas
        # (U, M*N) stream-major visibility over flat antenna indices.
        self.visible = np.transpose(scene.visible, (2, 0, 1)).reshape(self.n_agents, -1)
        self.powers = PowerAllocation(np.full(self.n_agents, chain.p_max_w), chain.p_max_w)
        self._base_obs = stream_obs_base(scene)
        ss = np.random.SeedSequence(seed)
        drop_ss, probe_ss = ss.spawn(2)
        self.rng = np.random.default_rng(drop_ss)
        self.ref_sum_se = probe_reference(scene, chain, np.random.default_rng(probe_ss))
        self._last_sum_se = 0.0

    @property
    def obs_dims(self) -> list[int]:
        return [self.obs_dim] * self.n_agents

    @property
    def act_dims(self) -> list[int]:
        return [self.act_dim] * self.n_agents

    def _observations(self) -> list[np.ndarray]:
        last = self._last_sum_se / (self.n_agents * SE_NORM)
        return [
            np.concatenate([self._base_obs[u], [last]]) for u in range(self.n_agents)
        ]

    def reset(self) -> list[np.ndarray]:
        self._last_sum_se = 0.0
        return self._observations()

    def decode(self, actions: list[np.ndarray]) -> SelectionAssignment | None:
        scores = np.stack([np.asarray(a, dtype=float).reshape(-1) for a in actions])
        if scores.shape != (self.n_agents, self.n_antennas):
            raise ValueError(f"joint action shape {scores.shape} does not match the env")
        flat = decode_selection(scores, self.visible)
        if flat is None:
            return None
        topo = self.scene.topology
        return assignment_from_flat(flat, topo.num_bs, topo.bs_antennas_per_panel)

    def step(self, actions: list[np.ndarray]):
        """Returns (next_obs, rewards, metrics, info) for one drop."""
        assignment = self.decode(actions)
        if assignment is None:
            metrics = infeasible_metrics(self.scene, self.chain)
            reward = INFEASIBLE_REWARD
        else:
            drop_seed = int(self.rng.integers(0, 2**63 - 1))
            metrics = evaluate_drop(self.scene, drop_seed, assignment, self.powers, self.chain)
            reward = shaped_reward(metrics.sum_se, self.ref_sum_se)
        rewards = np.full(self.n_agents, reward)
        self._last_sum_se = metrics.sum_se
        info = {"assignment": assignment, "infeasible": assignment is None}
        return self._observations(), rewards, metrics, info


class OracleResult(NamedTuple):
    assignment: SelectionAssignment
    sum_se: float
    n_assignments: int


def _enumerate_assignments(visible: np.ndarray, cap: int) -> list[np.ndarray]:
    """All conflict-free complete assignments, refusing past ``cap``."""
    n_agents, n_ant = visible.shape
    out: list[np.ndarray] = []
    current = np.full(n_agents, -1, dtype=int)
    claimed = np.zeros(n_ant, dtype=bool)

    def recurse(u: int) -> None:
        if u == n_agents:
            if len(out) >= cap:
                raise InfeasibleError(
                    f"more than {cap} conflict-free assignments; shrink the instance"
                )
            out.append(current.copy())
            return
        for a in np.flatnonzero(visible[u] & ~claimed):
            current[u] = a
            claimed[a] = True
            recurse(u + 1)
            claimed[a] = False
        current[u] = -1

    recurse(0)
    return out


def brute_force_selection_oracle(
    scene: SceneChannel, chain: ReceiveChain, drop_seeds, cap: int = 20000
) -> OracleResult:
    """Exhaustive search over assignments, scored by batch-mean sum SE.

    Scoring always uses MR combining so the oracle is a fixed yardstick
    regardless of the chain's configured combiner.  Raises
    :class:`InfeasibleError` when the assignment count exceeds ``cap`` or
    no complete assignment exists.
    """
    topo = scene.topology
    visible = np.transpose(scene.visible, (2, 0, 1)).reshape(topo.num_streams, -1)
    candidates = _enumerate_assignments(visible, cap)
    if not candidates:
        raise InfeasibleError("no conflict-free complete assignment exists")
    chain_mr = replace(chain, combiner=MR)
    powers = PowerAllocation(np.full(topo.num_streams, chain.p_max_w), chain.p_max_w)
    realizations = [scene.realize(int(s)) for s in drop_seeds]
    best_val, best_assignment = -np.inf, None
    for flat in candidates:
        assignment = assignment_from_flat(flat, topo.num_bs, topo.bs_antennas_per_panel)
        total = 0.0
        for real in realizations:
            stats = local_statistics(
                [real], assignment.active, chain_mr.combiner, powers, chain_mr.noise_power_w
            )
            fused = fuse_lsfd(stats, chain_mr.fusion, powers, chain_mr.noise_power_w)
            total += float(
                spectral_efficiency(fused_sinr(fused, powers, chain_mr.noise_power_w)).sum()
            )
        mean_se = total / len(realizations)
        if mean_se > best_val:
            best_val, best_assignment = mean_se, assignment
    return OracleResult(best_assignment, best_val, len(candidates))
