"""Uplink channel synthesis: pathloss, spherical wavefronts, visibility.

Channels are indexed ``h[bs, antenna, stream]`` with streams in UE-major
order (see :class:`cfxl.geometry.NetworkTopology`).  All randomness flows
through explicit integer seeds.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import NetworkTopology

PATHLOSS_REF_DB = -30.5
PATHLOSS_EXPONENT = 36.7
PURE_LOS_KAPPA = 1e6

_CHANNEL_MAGIC = b"XLCH"
_CHANNEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class LargeScaleFading:
    """Per (stream, BS) large-scale power gains.

    ``beta`` is linear power, shape ``(num_streams, num_bs)``; the
    shadowing realisation that produced it is kept for reporting.
    """

    beta: np.ndarray
    shadowing_db: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 2:
            raise ValueError(f"beta must be 2-D (streams x BSs), got shape {beta.shape}")
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
            raise ValueError("beta entries must be finite and > 0")
        object.__setattr__(self, "beta", beta)


def pathloss_db(distance: float | np.ndarray) -> np.ndarray:
    """Distance-dependent pathloss in dB, without shadowing."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("pathloss is undefined at zero distance")
    return PATHLOSS_REF_DB - PATHLOSS_EXPONENT * np.log10(d)


def large_scale_fading(
    topology: NetworkTopology, shadowing_std_db: float, seed: int
) -> LargeScaleFading:
    """Sample large-scale gains between every stream and BS panel center.

    Log-normal shadowing with the given dB standard deviation is added on
    top of the deterministic pathloss.  A zero deviation bypasses the RNG
    entirely, so the result is then independent of the seed.
    """
    if shadowing_std_db < 0:
        raise ValueError(f"shadowing_std_db must be >= 0, got {shadowing_std_db}")
    d = np.linalg.norm(
        topology.ue_antenna_positions[:, None, :] - topology.bs_centers[None, :, :], axis=-1
    )
    if np.any(d <= 0):
        raise ValueError("a stream antenna coincides with a BS panel center")
    if shadowing_std_db == 0:
        shadowing = np.zeros_like(d)
    else:
        rng = np.random.default_rng(seed)
        shadowing = rng.normal(0.0, shadowing_std_db, size=d.shape)
    beta = 10.0 ** ((pathloss_db(d) + shadowing) / 10.0)
    return LargeScaleFading(beta=beta, shadowing_db=shadowing, seed=seed)


def spherical_wave_response(
    source: np.ndarray,
    rx_positions: np.ndarray,
    wavelength: float,
    ref_point: np.ndarray | None = None,
) -> np.ndarray:
    """Spherical-wavefront array response of a point source.

    Element ``n`` gets ``(d_ref / d_n) * exp(-1j * 2 * pi * d_n / wavelength)``
    where ``d_n`` is the exact source-to-element distance and ``d_ref`` the
    source-to-reference distance.  Both amplitude curvature and phase
    curvature across the array are kept, unlike a plane-wave steering
    vector.

    Parameters
    ----------
    source : np.ndarray
        Source position, shape ``(3,)``.
    rx_positions : np.ndarray
        Receive element positions, shape ``(n, 3)``.
    wavelength : float
        Carrier wavelength, strictly positive.
    ref_point : np.ndarray, optional
        Amplitude reference.  Defaults to the centroid of ``rx_positions``.

    Returns
    -------
    np.ndarray
        Complex response, shape ``(n,)``.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    src = np.asarray(source, dtype=float).reshape(3)
    rx = np.asarray(rx_positions, dtype=float)
    if rx.ndim != 2 or rx.shape[1] != 3:
        raise ValueError(f"rx_positions must have shape (n, 3), got {rx.shape}")
    d = np.linalg.norm(rx - src, axis=1)
    if np.any(d == 0):
        raise ValueError("source coincides with a receive element")
    ref = rx.mean(axis=0) if ref_point is None else np.asarray(ref_point, dtype=float).reshape(3)
    d_ref = float(np.linalg.norm(ref - src))
    if d_ref == 0:
        raise ValueError("source coincides with the reference point")
    return (d_ref / d) * np.exp(-2j * np.pi * d / wavelength)


@dataclass(frozen=True)
class VrConfig:
    """Visibility-region generator settings.

    ``mode`` is ``"full"`` (all antennas visible) or ``"random_blocks"``
    (one contiguous rectangular sub-grid per UE/BS pair covering roughly
    ``block_fraction`` of the panel).
    """

    mode: str = "full"
    block_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("full", "random_blocks"):
            raise ConfigError(f"channel.vr_mode must be 'full' or 'random_blocks', got {self.mode!r}")
        if not 0.0 < self.block_fraction <= 1.0:
            raise ConfigError(
                f"channel.vr_block_fraction must be in (0, 1], got {self.block_fraction}"
            )


@dataclass(frozen=True, eq=False)
class VisibilityMask:
    """Which BS antennas each UE's wavefront reaches.

    ``visible`` has shape ``(num_ue, num_bs, antennas_per_panel)``; every
    UE must see at least one antenna somewhere in the network.
    """

    visible: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.visible, dtype=bool)
        if v.ndim != 3:
            raise ValueError(f"visible must be 3-D (UE x BS x antenna), got shape {v.shape}")
        blind = ~v.any(axis=(1, 2))
        if np.any(blind):
            raise ValueError(f"UEs {np.flatnonzero(blind).tolist()} see no antenna at all")
        object.__setattr__(self, "visible", v)

    @property
    def num_ue(self) -> int:
        return self.visible.shape[0]

    def stream_visible(self, ue_antennas_per_panel: int) -> np.ndarray:
        """Visibility broadcast from UEs to their streams, same panel mask."""
        return np.repeat(self.visible, ue_antennas_per_panel, axis=0)


def _block_shape(rows: int, cols: int, fraction: float) -> tuple[int, int]:
    """Rectangle whose area best matches ``fraction`` of the panel.

    Ties go to the most square shape, then to the fewest rows.
    """
    target = fraction * rows * cols
    best = None
    for r in range(1, rows + 1):
        for c in range(1, cols + 1):
            key = (abs(r * c - target), abs(r - c), r)
            if best is None or key < best[0]:
                best = (key, (r, c))
    return best[1]


def generate_visibility_mask(topology: NetworkTopology, vr: VrConfig) -> VisibilityMask:
    """Sample visibility regions for every UE/BS panel pair.

    ``random_blocks`` places, independently per pair, a fixed-shape
    contiguous rectangle of visible antennas uniformly at random on the
    panel grid.  Same seed, same mask.
    """
    bs = topology.bs_panels[0]
    shape = (topology.num_ue, topology.num_bs, topology.bs_antennas_per_panel)
    if vr.mode == "full":
        return VisibilityMask(np.ones(shape, dtype=bool))
    rng = np.random.default_rng(vr.seed)
    block_r, block_c = _block_shape(bs.rows, bs.cols, vr.block_fraction)
    visible = np.zeros(shape, dtype=bool)
    grid = np.zeros((bs.rows, bs.cols), dtype=bool)
    for k in range(topology.num_ue):
        for m in range(topology.num_bs):
            r0 = int(rng.integers(0, bs.rows - block_r + 1))
            c0 = int(rng.integers(0, bs.cols - block_c + 1))
            grid[:] = False
            grid[r0 : r0 + block_r, c0 : c0 + block_c] = True
            visible[k, m] = grid.reshape(-1)
    return VisibilityMask(visible)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One small-scale fading draw.

    ``h`` has shape ``(num_bs, antennas_per_panel, num_streams)`` and is
    exactly zero wherever the visibility mask blocks a link.
    """

    h: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        h = np.asarray(self.h)
        if h.ndim != 3 or not np.iscomplexobj(h):
            raise ValueError(f"h must be complex 3-D (BS x antenna x stream), got {h.shape}")
        if not np.all(np.isfinite(h.view(float))):
            raise ValueError("channel realization contains non-finite entries")
        object.__setattr__(self, "h", h)

    @property
    def num_bs(self) -> int:
        return self.h.shape[0]

    @property
    def num_streams(self) -> int:
        return self.h.shape[2]


class SceneChannel:
    """Channel generator for a fixed scene (layout, fading, visibility).

    Precomputes the deterministic line-of-sight responses once so that
    per-drop synthesis only draws the diffuse component.  ``ricean_kappa``
    is linear; at :data:`PURE_LOS_KAPPA` and above the diffuse part is
    dropped entirely and realizations become seed-independent.
    """

    def __init__(
        self,
        topology: NetworkTopology,
        lsf: LargeScaleFading,
        mask: VisibilityMask,
        ricean_kappa: float = 2.0,
    ) -> None:
        if ricean_kappa < 0:
            raise ValueError(f"ricean_kappa must be >= 0, got {ricean_kappa}")
        u, m = lsf.beta.shape
        if u != topology.num_streams or m != topology.num_bs:
            raise ValueError(
                f"beta shape {lsf.beta.shape} does not match "
                f"({topology.num_streams}, {topology.num_bs})"
            )
        if mask.visible.shape != (
            topology.num_ue,
            topology.num_bs,
            topology.bs_antennas_per_panel,
        ):
            raise ValueError("visibility mask shape does not match the topology")
        self.topology = topology
        self.lsf = lsf
        self.mask = mask
        self.ricean_kappa = float(ricean_kappa)
        # (num_bs, antennas, streams) stream visibility, broadcast from UEs.
        self.visible = np.transpose(
            mask.stream_visible(topology.ue_antennas_per_panel), (1, 2, 0)
        )
        bs_pos = topology.bs_antenna_positions  # (M, N, 3)
        ue_pos = topology.ue_antenna_positions  # (U, 3)
        d = np.linalg.norm(bs_pos[:, :, None, :] - ue_pos[None, None, :, :], axis=-1)
        if np.any(d == 0):
            raise ValueError("a BS antenna coincides with a stream antenna")
        d_ref = np.linalg.norm(
            topology.bs_centers[:, None, :] - ue_pos[None, :, :], axis=-1
        )  # (M, U)
        self.los = (d_ref[:, None, :] / d) * np.exp(-2j * np.pi * d / topology.wavelength)
        self.sqrt_beta = np.sqrt(lsf.beta.T)[:, None, :]  # (M, 1, U)

    def realize(self, seed: int) -> ChannelRealization:
        """Draw one Ricean channel realization."""
        kappa = self.ricean_kappa
        if kappa >= PURE_LOS_KAPPA:
            h = self.sqrt_beta * self.los
        else:
            rng = np.random.default_rng(seed)
            shape = self.los.shape
            diffuse = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
            los_w = np.sqrt(kappa / (1.0 + kappa))
            nlos_w = np.sqrt(1.0 / (1.0 + kappa))
            h = self.sqrt_beta * (los_w * self.los + nlos_w * diffuse)
        h = np.where(self.visible, h, 0.0 + 0.0j)
        return ChannelRealization(h=h, seed=seed)

    def realize_batch(self, seeds: np.ndarray) -> list[ChannelRealization]:
        return [self.realize(int(s)) for s in seeds]


def realize_channel(
    topology: NetworkTopology,
    lsf: LargeScaleFading,
    mask: VisibilityMask,
    ricean_kappa: float,
    seed: int,
) -> ChannelRealization:
    """One-shot wrapper around :class:`SceneChannel` for a single draw."""
    return SceneChannel(topology, lsf, mask, ricean_kappa).realize(seed)


def dump_channel(realization: ChannelRealization, path) -> None:
    """Write a realization as little-endian interleaved re/im float64.

    The header records shape and seed so a dump is self-describing.
    """
    h = np.ascontiguousarray(realization.h.astype("<c16"))
    header = struct.pack(
        "<4sIqqqq", _CHANNEL_MAGIC, _CHANNEL_VERSION, h.shape[0], h.shape[1], h.shape[2],
        realization.seed,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(h.tobytes(order="C"))


def load_channel(path) -> ChannelRealization:
    """Read a realization written by :func:`dump_channel`."""
    with open(path, "rb") as f:
        raw = f.read()
    head = struct.calcsize("<4sIqqqq")
    magic, version, m, n, u, seed = struct.unpack("<4sIqqqq", raw[:head])
    if magic != _CHANNEL_MAGIC or version != _CHANNEL_VERSION:
        raise ValueError(f"unrecognized channel dump header in {path}")
    h = np.frombuffer(raw[head:], dtype="<c16").reshape(m, n, u).copy()
    return ChannelRealization(h=h, seed=seed)


def scene_metadata(scene: SceneChannel) -> str:
    """JSON snippet describing a scene, for manifests and debugging."""
    return json.dumps(
        {
            "ricean_kappa": scene.ricean_kappa,
            "lsf_seed": scene.lsf.seed,
            "visible_fraction": float(scene.visible.mean()),
        },
        sort_keys=True,
    )
