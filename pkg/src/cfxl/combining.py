"""Uplink receive combining, two-layer fusion, and the SE/EE metrics.

The receive chain is: per-BS combining of each stream (MR or MMSE over
the BS's active antennas), then a network-level fusion of the per-BS
estimates with either equal weights or statistically optimal weights
learned from a batch of realizations.  Combiners are always applied as
``v^H y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .errors import NumericalAbort

MR = "mr"
MMSE = "mmse"
EQUAL_WEIGHT = "equal"
LSFD_OPTIMAL = "lsfd"

_RIDGE = 1e-12


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Per-stream transmit powers in watts, each within ``[0, p_max]``."""

    p: np.ndarray
    p_max: float

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if self.p_max <= 0 or not math.isfinite(self.p_max):
            raise ValueError(f"p_max must be a positive number, got {self.p_max}")
        slack = 1e-12 * self.p_max
        if not np.all(np.isfinite(p)) or np.any(p < -slack) or np.any(p > self.p_max + slack):
            raise ValueError(f"powers must lie in [0, {self.p_max}]")
        object.__setattr__(self, "p", np.clip(p, 0.0, self.p_max))

    @property
    def total_transmit(self) -> float:
        return float(self.p.sum())


@dataclass(frozen=True, eq=False)
class SelectionAssignment:
    """A conflict-free stream-to-antenna assignment.

    ``pairs[u] = (bs, antenna)`` or ``(-1, -1)`` for an unassigned stream.
    ``active`` marks the powered antennas, shape ``(num_bs, antennas)``.
    """

    pairs: np.ndarray
    active: np.ndarray

    def __post_init__(self) -> None:
        pairs = np.asarray(self.pairs, dtype=int)
        active = np.asarray(self.active, dtype=bool)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError(f"pairs must have shape (streams, 2), got {pairs.shape}")
        assigned = pairs[pairs[:, 0] >= 0]
        if len(assigned) != len({tuple(r) for r in assigned.tolist()}):
            raise ValueError("two streams claim the same antenna")
        for bs, ant in assigned.tolist():
            if not (0 <= bs < active.shape[0] and 0 <= ant < active.shape[1]):
                raise ValueError(f"pair ({bs}, {ant}) is outside the antenna grid")
            if not active[bs, ant]:
                raise ValueError(f"assigned antenna ({bs}, {ant}) is not marked active")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "active", active)

    @classmethod
    def from_pairs(cls, pairs, num_bs: int, antennas_per_panel: int) -> "SelectionAssignment":
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        active = np.zeros((num_bs, antennas_per_panel), dtype=bool)
        for bs, ant in pairs.tolist():
            if bs >= 0:
                active[bs, ant] = True
        return cls(pairs=pairs, active=active)

    @classmethod
    def all_active(cls, num_streams: int, num_bs: int, antennas_per_panel: int) -> "SelectionAssignment":
        """No selection: every antenna powered, no per-stream ownership."""
        pairs = np.full((num_streams, 2), -1, dtype=int)
        active = np.ones((num_bs, antennas_per_panel), dtype=bool)
        return cls(pairs=pairs, active=active)

    @property
    def active_count(self) -> int:
        return int(self.active.sum())

    def check_visibility(self, stream_visible: np.ndarray) -> None:
        """Raise if any stream was assigned an antenna it cannot see."""
        for u, (bs, ant) in enumerate(self.pairs.tolist()):
            if bs >= 0 and not stream_visible[u, bs, ant]:
                raise ValueError(f"stream {u} assigned invisible antenna ({bs}, {ant})")


@dataclass(frozen=True)
class PowerModel:
    """Network power accounting: PA efficiency, per-antenna circuit, fixed."""

    amplifier_efficiency: float = 0.4
    antenna_circuit_w: float = 0.2
    fixed_overhead_w: float = 5.0

    def __post_init__(self) -> None:
        if not 0.0 < self.amplifier_efficiency <= 1.0:
            raise ValueError(
                f"amplifier_efficiency must be in (0, 1], got {self.amplifier_efficiency}"
            )
        if self.antenna_circuit_w < 0 or self.fixed_overhead_w < 0:
            raise ValueError("circuit and overhead powers must be >= 0")


def total_power(
    powers: PowerAllocation, active: "SelectionAssignment | int", model: PowerModel
) -> float:
    """Consumed network power: transmit over PA efficiency plus circuits."""
    n_active = active.active_count if isinstance(active, SelectionAssignment) else int(active)
    if n_active < 0:
        raise ValueError(f"active antenna count must be >= 0, got {n_active}")
    return (
        powers.total_transmit / model.amplifier_efficiency
        + n_active * model.antenna_circuit_w
        + model.fixed_overhead_w
    )


def spectral_efficiency(sinr: np.ndarray) -> np.ndarray:
    """Per-stream SE in bit/s/Hz, ``log2(1 + sinr)``."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0) or not np.all(np.isfinite(sinr)):
        raise ValueError("SINR values must be finite and >= 0")
    return np.log2(1.0 + sinr)


def energy_efficiency(sum_se: float, bandwidth_hz: float, total_power_w: float) -> float:
    """Network EE in bit/J: rate over consumed power."""
    if bandwidth_hz <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth_hz}")
    if total_power_w <= 0:
        raise ValueError(f"total power must be > 0, got {total_power_w}")
    return bandwidth_hz * sum_se / total_power_w


@dataclass(frozen=True, eq=False)
class EpisodeMetrics:
    """Outcome of one evaluated drop."""

    se_per_stream: np.ndarray
    sum_se: float
    total_power_w: float
    ee: float
    active_antennas: int
    infeasible: bool = False

    @classmethod
    def compute(
        cls,
        se_per_stream: np.ndarray,
        bandwidth_hz: float,
        total_power_w: float,
        active_antennas: int,
        infeasible: bool = False,
    ) -> "EpisodeMetrics":
        se = np.asarray(se_per_stream, dtype=float)
        if np.any(se < 0):
            raise ValueError("per-stream SE must be >= 0")
        sum_se = float(se.sum())
        return cls(
            se_per_stream=se,
            sum_se=sum_se,
            total_power_w=float(total_power_w),
            ee=energy_efficiency(sum_se, bandwidth_hz, total_power_w),
            active_antennas=int(active_antennas),
            infeasible=infeasible,
        )


def mr_combiner(realization: ChannelRealization, bs: int, active: np.ndarray) -> np.ndarray:
    """Maximum-ratio combiner, one column per stream.

    Column ``u`` holds the BS's active-antenna channel of stream ``u``;
    applying it as ``v^H y`` matched-filters that stream.

    Returns
    -------
    np.ndarray
        Shape ``(n_active, num_streams)``.
    """
    idx = np.flatnonzero(np.asarray(active[bs], dtype=bool))
    if idx.size == 0:
        raise ValueError(f"BS {bs} has no active antennas")
    return realization.h[bs][idx, :].copy()


def mmse_combiner(
    realization: ChannelRealization,
    bs: int,
    active: np.ndarray,
    powers: PowerAllocation,
    noise_power_w: float,
) -> np.ndarray:
    """Local MMSE combiner over a BS's active antennas.

    Column ``u`` is ``(sum_u' p_u' h_u' h_u'^H + noise * I)^-1 h_u``.
    """
    if noise_power_w <= 0:
        raise ValueError(f"noise power must be > 0, got {noise_power_w}")
    idx = np.flatnonzero(np.asarray(active[bs], dtype=bool))
    if idx.size == 0:
        raise ValueError(f"BS {bs} has no active antennas")
    h = realization.h[bs][idx, :]
    cov = (h * powers.p) @ h.conj().T + noise_power_w * np.eye(idx.size)
    try:
        v = np.linalg.solve(cov, h)
    except np.linalg.LinAlgError as exc:
        raise NumericalAbort(f"MMSE covariance solve failed at BS {bs}: {exc}") from None
    if not np.all(np.isfinite(v.view(float))):
        raise NumericalAbort(f"MMSE combiner at BS {bs} is not finite")
    return v


@dataclass(frozen=True, eq=False)
class LocalStats:
    """Per-realization post-combining statistics.

    ``gain[r, m, u, u']`` is ``v_{m,u}^H h_{m,u'}`` and
    ``noise_amp[r, m, u]`` is ``||v_{m,u}||^2``; BSs with no active
    antenna contribute zero rows.
    """

    gain: np.ndarray
    noise_amp: np.ndarray

    @property
    def num_realizations(self) -> int:
        return self.gain.shape[0]


def local_statistics(
    realizations: list[ChannelRealization],
    active: np.ndarray,
    combiner: str,
    powers: PowerAllocation,
    noise_power_w: float,
    rx_weights: np.ndarray | None = None,
) -> LocalStats:
    """Combine every realization at every BS and collect fusion inputs.

    ``rx_weights`` optionally scales the combiners by nonnegative learned
    receive weights, either one scalar per BS (shape ``(num_bs,)``) or one
    per antenna (shape ``(num_bs, antennas)``).
    """
    if combiner not in (MR, MMSE):
        raise ValueError(f"combiner must be '{MR}' or '{MMSE}', got {combiner!r}")
    if not realizations:
        raise ValueError("need at least one realization")
    num_bs, _, num_streams = realizations[0].h.shape
    active = np.asarray(active, dtype=bool)
    if rx_weights is not None:
        rx_weights = np.asarray(rx_weights, dtype=float)
        if np.any(rx_weights < 0):
            raise ValueError("receive weights must be >= 0")
    gain = np.zeros((len(realizations), num_bs, num_streams, num_streams), dtype=complex)
    noise_amp = np.zeros((len(realizations), num_bs, num_streams))
    for r, real in enumerate(realizations):
        for m in range(num_bs):
            if not active[m].any():
                continue
            if combiner == MR:
                v = mr_combiner(real, m, active)
            else:
                v = mmse_combiner(real, m, active, powers, noise_power_w)
            idx = np.flatnonzero(active[m])
            if rx_weights is not None:
                if rx_weights.ndim == 1:
                    v = v * rx_weights[m]
                else:
                    v = v * rx_weights[m, idx][:, None]
            h = real.h[m][idx, :]
            gain[r, m] = v.conj().T @ h
            noise_amp[r, m] = np.sum(np.abs(v) ** 2, axis=0)
    return LocalStats(gain=gain, noise_amp=noise_amp)


def per_bs_sinr(stats: LocalStats, powers: PowerAllocation, noise_power_w: float) -> np.ndarray:
    """SINR of each stream at each BS before fusion.

    Shape ``(num_realizations, num_bs, num_streams)``; BSs with no active
    antennas get zeros.
    """
    if noise_power_w <= 0:
        raise ValueError(f"noise power must be > 0, got {noise_power_w}")
    gain, noise_amp = stats.gain, stats.noise_amp
    num_streams = gain.shape[2]
    u_idx = np.arange(num_streams)
    signal = powers.p * np.abs(gain[:, :, u_idx, u_idx]) ** 2  # (R, M, U)
    cross = np.abs(gain) ** 2 * powers.p  # (R, M, U, U')
    interference = cross.sum(axis=3) - cross[:, :, u_idx, u_idx]
    denom = interference + noise_power_w * noise_amp
    with np.errstate(invalid="ignore"):
        sinr = np.where(denom > 0, signal / denom, 0.0)
    if not np.all(np.isfinite(sinr)):
        raise NumericalAbort("per-BS SINR is not finite")
    return sinr


@dataclass(frozen=True, eq=False)
class FusedStats:
    """Network-level fusion outcome for each stream.

    ``desired[u]`` is the fused effective gain ``w_u^H g_u``;
    ``cross_power[u, u']`` the mean squared fused leakage from stream
    ``u'``; ``noise_amp[u]`` the fused noise amplification; ``weights``
    the per-BS fusion weights actually used.
    """

    desired: np.ndarray
    cross_power: np.ndarray
    noise_amp: np.ndarray
    weights: np.ndarray


def fuse_lsfd(
    stats: LocalStats, mode: str, powers: PowerAllocation, noise_power_w: float
) -> FusedStats:
    """Fuse per-BS statistics across the network.

    ``equal`` uses unit weights; ``lsfd`` solves, per stream, the weight
    vector maximizing the fused SINR from batch statistics (the
    interference-plus-noise covariance is regularized with a relative
    ridge before the solve).
    """
    if mode not in (EQUAL_WEIGHT, LSFD_OPTIMAL):
        raise ValueError(f"fusion mode must be '{EQUAL_WEIGHT}' or '{LSFD_OPTIMAL}', got {mode!r}")
    gain, noise_amp = stats.gain, stats.noise_amp
    _, num_bs, num_streams, _ = gain.shape
    g_mean = gain.mean(axis=0)  # (M, U, U)
    noise_mean = noise_amp.mean(axis=0)  # (M, U)
    desired = np.zeros(num_streams, dtype=complex)
    cross_power = np.zeros((num_streams, num_streams))
    noise_out = np.zeros(num_streams)
    weights = np.zeros((num_streams, num_bs), dtype=complex)
    for u in range(num_streams):
        g_u = g_mean[:, u, u]  # (M,)
        cov = noise_power_w * np.diag(noise_mean[:, u]).astype(complex)
        for up in range(num_streams):
            if up == u:
                continue
            z = gain[:, :, u, up]  # (R, M)
            cov += powers.p[up] * (z.T @ z.conj()) / stats.num_realizations
        if mode == EQUAL_WEIGHT:
            w = np.ones(num_bs, dtype=complex)
        else:
            trace = float(np.trace(cov).real)
            if trace <= 0:
                w = np.ones(num_bs, dtype=complex)
            else:
                ridge = _RIDGE * trace / num_bs
                w = np.linalg.solve(cov + ridge * np.eye(num_bs), g_u)
        weights[u] = w
        desired[u] = np.vdot(w, g_u)
        noise_out[u] = float(np.sum(np.abs(w) ** 2 * noise_mean[:, u]))
        for up in range(num_streams):
            if up == u:
                continue
            fused = gain[:, :, u, up] @ w.conj()
            cross_power[u, up] = float(np.mean(np.abs(fused) ** 2))
    return FusedStats(
        desired=desired, cross_power=cross_power, noise_amp=noise_out, weights=weights
    )


def fused_sinr(fused: FusedStats, powers: PowerAllocation, noise_power_w: float) -> np.ndarray:
    """Per-stream SINR implied by fused batch statistics."""
    if noise_power_w <= 0:
        raise ValueError(f"noise power must be > 0, got {noise_power_w}")
    num_streams = fused.desired.shape[0]
    sinr = np.zeros(num_streams)
    for u in range(num_streams):
        signal = powers.p[u] * np.abs(fused.desired[u]) ** 2
        interference = float(np.dot(powers.p, fused.cross_power[u]))
        denom = interference + noise_power_w * fused.noise_amp[u]
        sinr[u] = 0.0 if denom == 0 else signal / denom
    if not np.all(np.isfinite(sinr)):
        raise NumericalAbort("fused SINR is not finite")
    return sinr


def per_drop_sinr(
    stats: LocalStats, weights: np.ndarray, powers: PowerAllocation, noise_power_w: float
) -> np.ndarray:
    """SINR of each realization under fixed fusion weights.

    Returns shape ``(num_realizations, num_streams)``.  Averaging SE over
    this axis gives per-drop statistics at the operating point picked by
    a batch-level fusion.
    """
    gain, noise_amp = stats.gain, stats.noise_amp
    n_r, _, num_streams, _ = gain.shape
    sinr = np.zeros((n_r, num_streams))
    for u in range(num_streams):
        w = weights[u]
        fused = np.einsum("rmx,m->rx", gain[:, :, u, :], w.conj())  # (R, U)
        signal = powers.p[u] * np.abs(fused[:, u]) ** 2
        mask = np.ones(num_streams, dtype=bool)
        mask[u] = False
        interference = (np.abs(fused[:, mask]) ** 2 * powers.p[mask]).sum(axis=1)
        noise = noise_power_w * (np.abs(w) ** 2 * noise_amp[:, :, u]).sum(axis=1)
        denom = interference + noise
        with np.errstate(invalid="ignore"):
            sinr[:, u] = np.where(denom > 0, signal / denom, 0.0)
    if not np.all(np.isfinite(sinr)):
        raise NumericalAbort("per-drop SINR is not finite")
    return sinr


def uplink_sinr(
    realizations: list[ChannelRealization],
    active: np.ndarray,
    combiner: str,
    fusion_mode: str,
    powers: PowerAllocation,
    noise_power_w: float,
    rx_weights: np.ndarray | None = None,
) -> np.ndarray:
    """Batch-level per-stream SINR for the full receive chain."""
    stats = local_statistics(realizations, active, combiner, powers, noise_power_w, rx_weights)
    fused = fuse_lsfd(stats, fusion_mode, powers, noise_power_w)
    return fused_sinr(fused, powers, noise_power_w)
