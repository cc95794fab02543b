"""
RIS geometry, subarrays, spatial beamformers, space-time code and beampattern.

Elements sit on a ``rows x cols`` grid and are numbered row-major,
``m = row * cols + col``. The horizontal (column) coordinate carries the
azimuth phase term and the vertical (row) coordinate the elevation term.
Subarray selection matrices are kept as integer index arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .codebook import Codebook, MessageSubset

__all__ = [
    "RisGeometry",
    "Direction",
    "SubarrayPartition",
    "BeamformerSet",
    "SpaceTimeCode",
    "steering_vector",
    "steering_matrix",
    "square_partition",
    "block_partition",
    "matched_beamformers",
    "space_time_code",
    "code_from_sum",
    "beampattern",
    "beampattern_explicit",
    "direction_grid",
]


@dataclass(frozen=True)
class RisGeometry:
    rows: int
    cols: int
    spacing: float = 0.5  # wavelengths

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("RIS needs at least one row and one column")
        if not self.spacing > 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class Direction:
    azimuth: float  # degrees
    elevation: float  # degrees

    def __post_init__(self):
        for name in ("azimuth", "elevation"):
            v = getattr(self, name)
            if not -90.0 <= v <= 90.0:
                raise ValueError(f"{name} {v} outside [-90, 90] degrees")


@dataclass(frozen=True, eq=False)
class SubarrayPartition:
    """``members[n]`` lists the (0-based) RIS elements of subarray ``n``."""

    n_elements: int
    members: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        sizes = {len(m) for m in self.members}
        if len(sizes) != 1:
            raise ValueError("subarrays must all have the same size")
        flat = np.concatenate(self.members)
        if flat.size != self.n_elements or not np.array_equal(np.sort(flat), np.arange(self.n_elements)):
            raise ValueError("subarrays must be disjoint and cover every element")

    @property
    def n_subarrays(self) -> int:
        return len(self.members)

    @property
    def subarray_size(self) -> int:
        return len(self.members[0])


@dataclass(frozen=True, eq=False)
class BeamformerSet:
    vectors: tuple[np.ndarray, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.vectors)

    def stacked(self) -> np.ndarray:
        """Beamformers as an ``(N, M)`` array."""
        return np.vstack(self.vectors)


@dataclass(frozen=True, eq=False)
class SpaceTimeCode:
    """The L x M_RIS code matrix and the codeword (1-based) on each subarray."""

    matrix: np.ndarray = field(repr=False)
    assignment: tuple[int, ...]

    @property
    def subset(self) -> MessageSubset:
        return MessageSubset.from_iterable(self.assignment)


def _grid_coords(geometry: RisGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal and vertical element coordinates in row-major order."""
    row, col = np.divmod(np.arange(geometry.n_elements), geometry.cols)
    return col.astype(float), row.astype(float)


def steering_matrix(geometry: RisGeometry, azimuth, elevation) -> np.ndarray:
    """Steering vectors for arrays of angles (degrees), shape (..., M_RIS)."""
    az = np.deg2rad(np.asarray(azimuth, dtype=float))[..., None]
    el = np.deg2rad(np.asarray(elevation, dtype=float))[..., None]
    h, v = _grid_coords(geometry)
    k = np.pi * geometry.spacing / 0.5
    return np.exp(1j * k * (h * np.sin(az) * np.cos(el) + v * np.sin(el)))


def steering_vector(geometry: RisGeometry, direction: Direction) -> np.ndarray:
    """Unit-modulus steering vector psi(theta) toward ``direction``."""
    return steering_matrix(geometry, direction.azimuth, direction.elevation)


def square_partition(geometry: RisGeometry, tiles_per_side: int) -> SubarrayPartition:
    """Split the grid into ``tiles_per_side**2`` equal tiles, row-major."""
    t = int(tiles_per_side)
    if t < 1 or geometry.rows % t or geometry.cols % t:
        raise ValueError(
            f"a {geometry.rows}x{geometry.cols} grid cannot be cut into {t}x{t} equal tiles"
        )
    th, tw = geometry.rows // t, geometry.cols // t
    index = np.arange(geometry.n_elements).reshape(geometry.rows, geometry.cols)
    members = tuple(
        index[i * th:(i + 1) * th, j * tw:(j + 1) * tw].ravel()
        for i in range(t)
        for j in range(t)
    )
    return SubarrayPartition(geometry.n_elements, members)


def block_partition(geometry: RisGeometry, n_subarrays: int) -> SubarrayPartition:
    """Split the row-major element list into ``n_subarrays`` contiguous blocks.

    Used when N is not a square number of equal tiles.
    """
    n = int(n_subarrays)
    if n < 1 or geometry.n_elements % n:
        raise ValueError(f"{n} subarrays do not divide {geometry.n_elements} elements")
    return SubarrayPartition(geometry.n_elements,
                             tuple(np.arange(geometry.n_elements).reshape(n, -1)))


def tiled_partition(geometry: RisGeometry, n_subarrays: int) -> SubarrayPartition:
    """Square tiles when N = t^2 fits the grid, contiguous blocks otherwise."""
    t = math.isqrt(int(n_subarrays))
    if t * t == n_subarrays and geometry.rows % t == 0 and geometry.cols % t == 0:
        return square_partition(geometry, t)
    return block_partition(geometry, n_subarrays)


def matched_beamformers(
    partition: SubarrayPartition,
    geometry: RisGeometry,
    theta_st: Direction,
    theta_bar: Direction,
) -> BeamformerSet:
    """b_n = P_n^T (psi(theta_st) * psi(theta_bar)), without conjugation.

    With the ST channel proportional to psi(theta_st) this aligns every
    subarray term of the beampattern at ``theta_bar``.
    """
    w = steering_vector(geometry, theta_st) * steering_vector(geometry, theta_bar)
    return BeamformerSet(tuple(w[m] for m in partition.members))


def space_time_code(
    codebook: Codebook,
    subset: MessageSubset,
    partition: SubarrayPartition,
    beamformers: BeamformerSet,
    assignment_order: Sequence[int] | None = None,
) -> SpaceTimeCode:
    """Build X with column mu_{n,j} equal to c_n * conj(b_n[j]).

    ``assignment_order[n]`` is the codeword (1-based) sent by subarray
    ``n``; by default subarrays take the subset in ascending order.
    """
    n_sub = partition.n_subarrays
    if len(subset) != n_sub:
        raise ValueError(f"subset has {len(subset)} codewords for {n_sub} subarrays")
    if len(beamformers) != n_sub:
        raise ValueError("one beamformer per subarray is required")
    order = tuple(subset.indices) if assignment_order is None else tuple(int(i) for i in assignment_order)
    if sorted(order) != list(subset.indices):
        raise ValueError(f"assignment {order} is not a permutation of {subset.indices}")
    X = np.empty((codebook.length, partition.n_elements), dtype=complex)
    for n, members in enumerate(partition.members):
        b = beamformers.vectors[n]
        if b.shape != (len(members),):
            raise ValueError(f"beamformer {n} has shape {b.shape}, expected ({len(members)},)")
        X[:, members] = np.outer(codebook.codeword(order[n]), np.conj(b))
    return SpaceTimeCode(X, order)


def code_from_sum(
    codebook: Codebook,
    assignment: Sequence[int],
    partition: SubarrayPartition,
    beamformers: BeamformerSet,
) -> np.ndarray:
    """Reference construction X = sum_n c_n (P_n b_n)^H with dense P_n."""
    M, L = partition.n_elements, codebook.length
    X = np.zeros((L, M), dtype=complex)
    for n, members in enumerate(partition.members):
        P = np.zeros((M, len(members)))
        P[members, np.arange(len(members))] = 1.0
        X += np.outer(codebook.codeword(assignment[n]), np.conj(P @ beamformers.vectors[n]))
    return X


def direction_grid(az_points: int = 37, el_points: int = 13) -> tuple[np.ndarray, np.ndarray]:
    """Regular (azimuth, elevation) grid over [-90, 90]^2 degrees, flattened."""
    az, el = np.meshgrid(
        np.linspace(-90.0, 90.0, az_points),
        np.linspace(-90.0, 90.0, el_points),
        indexing="ij",
    )
    return az.ravel(), el.ravel()


def beampattern(
    beamformers: BeamformerSet,
    partition: SubarrayPartition,
    gamma_st: np.ndarray,
    geometry: RisGeometry,
    azimuth,
    elevation,
    frame_length: int,
) -> np.ndarray:
    """B(theta) = L sum_n |(gamma_st * psi(theta))^H P_n b_n|^2.

    Codeword-free closed form; valid for any selection of orthogonal
    codewords with squared norm L.
    """
    gamma_st = np.asarray(gamma_st, dtype=complex)
    if gamma_st.shape != (partition.n_elements,):
        raise ValueError("gamma_st must have one entry per RIS element")
    g = gamma_st * steering_matrix(geometry, azimuth, elevation)  # (..., M_RIS)
    total = np.zeros(g.shape[:-1])
    for members, b in zip(partition.members, beamformers.vectors):
        total += np.abs(np.conj(g[..., members]) @ b) ** 2
    return frame_length * total


def beampattern_explicit(
    code: SpaceTimeCode,
    gamma_st: np.ndarray,
    geometry: RisGeometry,
    azimuth,
    elevation,
) -> np.ndarray:
    """||X (gamma_st * psi(theta))||^2 evaluated from the code matrix."""
    gamma_st = np.asarray(gamma_st, dtype=complex)
    if gamma_st.shape != (code.matrix.shape[1],):
        raise ValueError("gamma_st must have one entry per RIS element")
    g = gamma_st * steering_matrix(geometry, azimuth, elevation)
    field_ = g @ code.matrix.T  # (..., L)
    return np.sum(np.abs(field_) ** 2, axis=-1)
