"""
Noncoherent reader: matched-filter energy bank and top-N subset decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ReceivedFrame
from .codebook import Codebook, MessageSubset, decode_message

__all__ = [
    "EnergyStatistics",
    "matched_filter_energies",
    "energies_from_samples",
    "detect_subset",
    "top_n_mask",
    "decode_frame",
]


@dataclass(frozen=True, eq=False)
class EnergyStatistics:
    """T_l = ||u_l^H Y||^2 / normalization for l = 1..L-1.

    ``complex_macs`` counts the multiply-accumulates spent on the
    correlations, (L-1) * L * K_R.
    """

    values: np.ndarray = field(repr=False)
    normalization: float
    complex_macs: int = 0

    def __len__(self) -> int:
        return self.values.size


def energies_from_samples(y: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Raw energies ||u_l^H Y||^2; ``y`` may carry leading batch axes.

    The first PRI row is subtracted before correlating. Every codeword is
    orthogonal to the all-ones vector, so this leaves the energies
    unchanged, but a component common to all rows (the direct-path
    interference) then cancels exactly instead of leaving rounding residue.
    """
    if y.shape[-2] != codebook.length:
        raise ValueError(f"frame has {y.shape[-2]} PRIs, codebook length is {codebook.length}")
    z = codebook.matrix.conj().T @ (y - y[..., :1, :])  # (..., L-1, K_R)
    return np.sum(z.real ** 2 + z.imag ** 2, axis=-1)


def matched_filter_energies(frame: ReceivedFrame, codebook: Codebook) -> EnergyStatistics:
    """Correlate every PRI row against each codeword and sum the energy.

    Normalized by L sigma^2; a noiseless frame (sigma^2 = 0) is normalized
    by 1, i.e. raw energies are returned.
    """
    L, K = frame.y.shape
    norm = L * frame.noise_variance if frame.noise_variance > 0 else 1.0
    raw = energies_from_samples(frame.y, codebook)
    return EnergyStatistics(raw / norm, norm, (L - 1) * L * K)


def top_n_mask(values: np.ndarray, n: int) -> np.ndarray:
    """Boolean mask of the ``n`` largest entries along the last axis.

    Ties go to the lower index (stable sort of the negated values).
    """
    values = np.asarray(values)
    if not 1 <= n <= values.shape[-1]:
        raise ValueError(f"N={n} outside 1..{values.shape[-1]}")
    order = np.argsort(-values, axis=-1, kind="stable")[..., :n]
    mask = np.zeros(values.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=-1)
    return mask


def detect_subset(stats: EnergyStatistics | np.ndarray, n: int) -> MessageSubset:
    """Codewords (1-based) with the ``n`` largest statistics.

    >>> detect_subset(np.array([5.0, 1.0, 9.0, 2.0]), 2)
    MessageSubset(indices=(1, 3))
    """
    values = stats.values if isinstance(stats, EnergyStatistics) else np.asarray(stats, dtype=float)
    if values.ndim != 1:
        raise ValueError("expected a single vector of statistics")
    idx = np.flatnonzero(top_n_mask(values, n)) + 1
    return MessageSubset(tuple(int(i) for i in idx))


def decode_frame(frame: ReceivedFrame, codebook: Codebook, n: int) -> tuple[MessageSubset, str | None]:
    """Detected subset and its payload bits (``None`` on erasure)."""
    subset = detect_subset(matched_filter_energies(frame, codebook), n)
    return subset, decode_message(subset, codebook.length, n)
