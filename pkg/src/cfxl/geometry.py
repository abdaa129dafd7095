"""Scene geometry: antenna panels, field-region calculators, topology sampling.

Distances are metres, angles radians.  Every array of positions is an
``(n, 3)`` float64 array in a shared Cartesian frame with the ground plane
at z = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

import numpy as np

from .errors import ConfigError

_UNIT_TOL = 1e-9


class FieldRegion(IntEnum):
    """Propagation regions ordered by distance from the array."""

    REACTIVE_NEAR_FIELD = 0
    RADIATIVE_NEAR_FIELD = 1
    FAR_FIELD = 2


def rayleigh_distance(aperture_diagonal: float, wavelength: float) -> float:
    """Boundary between the radiative near field and the far field.

    Parameters
    ----------
    aperture_diagonal : float
        Largest physical dimension of the array in metres.
    wavelength : float
        Carrier wavelength in metres, strictly positive.

    Returns
    -------
    float
        ``2 * D**2 / wavelength``.  Zero aperture gives zero.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    if aperture_diagonal < 0:
        raise ValueError(f"aperture_diagonal must be >= 0, got {aperture_diagonal}")
    return 2.0 * aperture_diagonal**2 / wavelength


def fresnel_distance(aperture_diagonal: float, wavelength: float) -> float:
    """Boundary between the reactive and radiative near field.

    Uses the ``0.62 * sqrt(D**3 / wavelength)`` convention.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    if aperture_diagonal < 0:
        raise ValueError(f"aperture_diagonal must be >= 0, got {aperture_diagonal}")
    return 0.62 * math.sqrt(aperture_diagonal**3 / wavelength)


def classify_field_region(
    distance: float, aperture_diagonal: float, wavelength: float
) -> FieldRegion:
    """Classify a propagation distance relative to an aperture.

    Boundaries belong to the farther region, so a distance exactly at the
    Rayleigh distance is far field.
    """
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    if distance >= rayleigh_distance(aperture_diagonal, wavelength):
        return FieldRegion.FAR_FIELD
    if distance >= fresnel_distance(aperture_diagonal, wavelength):
        return FieldRegion.RADIATIVE_NEAR_FIELD
    return FieldRegion.REACTIVE_NEAR_FIELD


def edof_planar(side_a: float, side_b: float, wavelength: float) -> float:
    """Effective degrees of freedom of a planar aperture.

    ``pi * side_a * side_b / wavelength**2``; symmetric in the two sides.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    if side_a < 0 or side_b < 0:
        raise ValueError(f"panel sides must be >= 0, got {side_a} x {side_b}")
    return math.pi * side_a * side_b / wavelength**2


@dataclass(frozen=True, eq=False)
class Panel:
    """A uniform rectangular antenna array.

    Parameters
    ----------
    rows, cols : int
        Element grid shape, both at least 1.
    spacing : float
        Element pitch in metres along both grid axes.
    center : np.ndarray
        Geometric center of the grid, shape ``(3,)``.
    normal : np.ndarray
        Unit boresight vector, shape ``(3,)``.
    """

    rows: int
    cols: int
    spacing: float
    center: np.ndarray
    normal: np.ndarray

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"panel grid must be >= 1x1, got {self.rows}x{self.cols}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")
        center = np.asarray(self.center, dtype=float).reshape(3)
        normal = np.asarray(self.normal, dtype=float).reshape(3)
        n = np.linalg.norm(normal)
        if not math.isfinite(n) or n < _UNIT_TOL:
            raise ValueError("panel normal must be a nonzero finite vector")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "normal", normal / n)

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    @property
    def diagonal(self) -> float:
        """Corner-to-corner extent of the element grid."""
        return self.spacing * math.hypot(self.rows - 1, self.cols - 1)

    @property
    def side_lengths(self) -> tuple[float, float]:
        """Extent of the element grid along (row axis, column axis)."""
        return (self.rows - 1) * self.spacing, (self.cols - 1) * self.spacing


def _panel_axes(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane (row, column) axes for a panel normal."""
    n = normal / np.linalg.norm(normal)
    # Pick a helper that is never parallel to the normal.
    helper = np.array([0.0, 1.0, 0.0]) if abs(n[2]) > 0.9 else np.array([0.0, 0.0, 1.0])
    axis_row = np.cross(helper, n)
    axis_row /= np.linalg.norm(axis_row)
    axis_col = np.cross(n, axis_row)
    return axis_row, axis_col


def antenna_positions(panel: Panel) -> np.ndarray:
    """Element positions of a panel in row-major order.

    Element ``(r, c)`` lands at index ``r * cols + c``.  The grid is
    centered on ``panel.center`` and lies in the plane orthogonal to
    ``panel.normal``.

    Returns
    -------
    np.ndarray
        Shape ``(rows * cols, 3)``.
    """
    axis_row, axis_col = _panel_axes(panel.normal)
    r = (np.arange(panel.rows) - (panel.rows - 1) / 2.0) * panel.spacing
    c = (np.arange(panel.cols) - (panel.cols - 1) / 2.0) * panel.spacing
    offsets = r[:, None, None] * axis_row + c[None, :, None] * axis_col
    return (panel.center + offsets).reshape(panel.rows * panel.cols, 3)


@dataclass(frozen=True)
class TopologyConfig:
    """Knobs for sampling a network layout.

    ``bs_spacing``/``ue_spacing`` default to half the wavelength when left
    as None.
    """

    num_bs: int = 1
    bs_rows: int = 9
    bs_cols: int = 9
    num_ue: int = 6
    ue_rows: int = 3
    ue_cols: int = 3
    area_side: float = 1000.0
    wavelength: float = 0.1
    bs_spacing: float | None = None
    ue_spacing: float | None = None
    bs_height: float = 10.0
    ue_height: float = 1.5

    def __post_init__(self) -> None:
        for name in ("num_bs", "bs_rows", "bs_cols", "num_ue", "ue_rows", "ue_cols"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"topology.{name} must be a positive integer, got {v!r}")
        for name in ("area_side", "wavelength", "bs_height", "ue_height"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"topology.{name} must be a positive number, got {v!r}")
        for name in ("bs_spacing", "ue_spacing"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigError(f"topology.{name} must be a positive number or None, got {v!r}")

    @property
    def bs_antennas_per_panel(self) -> int:
        return self.bs_rows * self.bs_cols

    @property
    def ue_antennas_per_panel(self) -> int:
        return self.ue_rows * self.ue_cols

    @property
    def num_streams(self) -> int:
        return self.num_ue * self.ue_antennas_per_panel

    def resolved_bs_spacing(self) -> float:
        return self.wavelength / 2.0 if self.bs_spacing is None else self.bs_spacing

    def resolved_ue_spacing(self) -> float:
        return self.wavelength / 2.0 if self.ue_spacing is None else self.ue_spacing


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """A sampled layout: BS panels on a grid, UE panels at random drops.

    Stream index ``u = k * ue_antennas_per_panel + j`` maps UE ``k``'s
    ``j``-th element (row-major within its panel) onto a flat stream axis.
    """

    wavelength: float
    area_side: float
    bs_panels: tuple[Panel, ...]
    ue_panels: tuple[Panel, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.wavelength <= 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.bs_panels or not self.ue_panels:
            raise ValueError("topology needs at least one BS panel and one UE panel")
        for p in self.bs_panels + self.ue_panels:
            xy = p.center[:2]
            if np.any(xy < -1e-9) or np.any(xy > self.area_side + 1e-9):
                raise ValueError("panel center lies outside the service area")

    @property
    def num_bs(self) -> int:
        return len(self.bs_panels)

    @property
    def num_ue(self) -> int:
        return len(self.ue_panels)

    @property
    def bs_antennas_per_panel(self) -> int:
        return self.bs_panels[0].n_elements

    @property
    def ue_antennas_per_panel(self) -> int:
        return self.ue_panels[0].n_elements

    @property
    def num_streams(self) -> int:
        return self.num_ue * self.ue_antennas_per_panel

    @cached_property
    def bs_antenna_positions(self) -> np.ndarray:
        """Shape ``(num_bs, bs_antennas_per_panel, 3)``."""
        return np.stack([antenna_positions(p) for p in self.bs_panels])

    @cached_property
    def ue_antenna_positions(self) -> np.ndarray:
        """Shape ``(num_streams, 3)``, streams in UE-major order."""
        return np.concatenate([antenna_positions(p) for p in self.ue_panels])

    @cached_property
    def bs_centers(self) -> np.ndarray:
        return np.stack([p.center for p in self.bs_panels])

    @cached_property
    def ue_centers(self) -> np.ndarray:
        return np.stack([p.center for p in self.ue_panels])

    def stream_to_ue(self, stream: int) -> int:
        return stream // self.ue_antennas_per_panel


def generate_topology(config: TopologyConfig, seed: int) -> NetworkTopology:
    """Sample a network layout.

    BS panels sit on a regular grid over the square area at ``bs_height``,
    facing +x.  UE panel centers are drawn uniformly over the area at
    ``ue_height``, facing +z.  The same seed always returns the same
    layout.

    Raises
    ------
    ConfigError
        If the stream count exceeds the total BS antenna budget, which
        would make exhaustive antenna selection infeasible.
    """
    total_bs_antennas = config.num_bs * config.bs_antennas_per_panel
    if config.num_streams > total_bs_antennas:
        raise ConfigError(
            f"{config.num_streams} streams exceed the {total_bs_antennas} "
            "available BS antennas; shrink the UE panels or grow the BS grid"
        )
    bs_spacing = config.resolved_bs_spacing()
    ue_spacing = config.resolved_ue_spacing()
    rng = np.random.default_rng(seed)

    grid = math.ceil(math.sqrt(config.num_bs))
    cell = config.area_side / grid
    bs_panels = []
    for m in range(config.num_bs):
        i, j = divmod(m, grid)
        center = np.array([(j + 0.5) * cell, (i + 0.5) * cell, config.bs_height])
        bs_panels.append(
            Panel(config.bs_rows, config.bs_cols, bs_spacing, center, np.array([1.0, 0.0, 0.0]))
        )

    ue_panels = []
    for _ in range(config.num_ue):
        xy = rng.uniform(0.0, config.area_side, size=2)
        center = np.array([xy[0], xy[1], config.ue_height])
        ue_panels.append(
            Panel(config.ue_rows, config.ue_cols, ue_spacing, center, np.array([0.0, 0.0, 1.0]))
        )

    return NetworkTopology(
        wavelength=config.wavelength,
        area_side=config.area_side,
        bs_panels=tuple(bs_panels),
        ue_panels=tuple(ue_panels),
        seed=seed,
    )


def topology_summary(topology: NetworkTopology) -> dict:
    """Plain-dict description used by the CLI and run manifests."""
    bs = topology.bs_panels[0]
    return {
        "wavelength_m": topology.wavelength,
        "area_side_m": topology.area_side,
        "num_bs": topology.num_bs,
        "bs_grid": [bs.rows, bs.cols],
        "bs_antennas_per_panel": topology.bs_antennas_per_panel,
        "num_ue": topology.num_ue,
        "ue_antennas_per_panel": topology.ue_antennas_per_panel,
        "num_streams": topology.num_streams,
        "bs_panel_diagonal_m": bs.diagonal,
        "rayleigh_distance_m": rayleigh_distance(bs.diagonal, topology.wavelength),
        "fresnel_distance_m": fresnel_distance(bs.diagonal, topology.wavelength),
        "edof": edof_planar(*bs.side_lengths, topology.wavelength),
        "bs_centers": topology.bs_centers.tolist(),
        "ue_centers": topology.ue_centers.tolist(),
        "seed": topology.seed,
    }
