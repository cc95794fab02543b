"""
Slow-time codebook, message <-> subset mapping, rates and the probe pulse.

Messages are unordered sets of ``N`` distinct codewords drawn from the
``L - 1`` non-DC columns of the L-point DFT. The mapping from integers to
subsets is the lexicographic combinatorial number system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Codebook",
    "MessageSubset",
    "ProbePulse",
    "build_codebook",
    "subset_rank",
    "subset_unrank",
    "n_messages",
    "transmission_rate",
    "bits_per_frame",
    "encode_message",
    "decode_message",
    "lfsr_sequence",
    "msequence_pulse",
    "default_pulse",
]

# x^4 + x + 1, all-ones seed: G = 15.
DEFAULT_REGISTER_LENGTH = 4
DEFAULT_TAPS = (4, 1)
MAX_EXACT_L = 512


@dataclass(frozen=True, eq=False)
class Codebook:
    """The ``L - 1`` slow-time codewords, stored as the columns of ``matrix``.

    ``matrix[:, l - 1]`` is codeword ``u_l`` (1-based codeword labels, as
    used by :class:`MessageSubset`).
    """

    length: int
    matrix: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[1]

    @property
    def ones_direction(self) -> np.ndarray:
        return np.ones(self.length, dtype=complex)

    def codeword(self, index: int) -> np.ndarray:
        if not 1 <= index <= self.size:
            raise IndexError(f"codeword index {index} outside 1..{self.size}")
        return self.matrix[:, index - 1]


@dataclass(frozen=True)
class MessageSubset:
    """Sorted tuple of distinct 1-based codeword indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"subset indices must be strictly increasing: {idx}")
        if idx and idx[0] < 1:
            raise ValueError("subset indices are 1-based")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_iterable(cls, indices: Iterable[int]) -> "MessageSubset":
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate codeword indices: {idx}")
        return cls(tuple(sorted(idx)))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def validate(self, L: int, N: int) -> None:
        if len(self.indices) != N:
            raise ValueError(f"subset has {len(self.indices)} elements, expected N={N}")
        if self.indices and self.indices[-1] > L - 1:
            raise ValueError(f"codeword index {self.indices[-1]} exceeds L-1={L - 1}")


@dataclass(frozen=True, eq=False)
class ProbePulse:
    """Phase-coded pulse: ``G`` chips of duration ``1/W`` each."""

    chips: np.ndarray = field(repr=False)
    chip_rate: float

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=complex)
        if chips.ndim != 1 or chips.size == 0:
            raise ValueError("chips must be a nonempty vector")
        if np.max(np.abs(np.abs(chips) - 1.0)) > 1e-12:
            raise ValueError("chips must be unit modulus")
        if not self.chip_rate > 0:
            raise ValueError("chip rate must be positive")
        object.__setattr__(self, "chips", chips)

    @property
    def n_chips(self) -> int:
        return self.chips.size

    @property
    def duration(self) -> float:
        return self.n_chips / self.chip_rate

    def __call__(self, t) -> np.ndarray:
        """Evaluate the piecewise-constant waveform a(t) at times ``t``.

        Chip ``i`` occupies ``[i/W, (i+1)/W)``; the pulse is zero outside
        ``[0, T)``.
        """
        return self.at_samples(np.asarray(t, dtype=float) * self.chip_rate)

    def at_samples(self, s) -> np.ndarray:
        """Evaluate a(s/W), with ``s`` in units of chip periods."""
        s = np.asarray(s, dtype=float)
        idx = np.floor(s)
        inside = (idx >= 0) & (idx < self.n_chips)
        safe = np.where(inside, idx, 0).astype(np.int64)
        return np.where(inside, self.chips[safe], 0.0)


# ---------------------------------------------------------------------------
# Codebook
# ---------------------------------------------------------------------------
def build_codebook(L: int) -> Codebook:
    """DFT codebook: ``u_l[k] = exp(j 2 pi l k / L)`` for ``l = 1..L-1``.

    Every codeword is unit modulus, orthogonal to the all-ones vector and to
    every other codeword, with squared norm ``L``.
    """
    if int(L) != L or L < 2:
        raise ValueError(f"codeword length must be an integer >= 2, got {L!r}")
    L = int(L)
    k = np.arange(L)
    ell = np.arange(1, L)
    # Reduce the exponent mod L in integers so the phases stay exact.
    phase = 2.0 * np.pi * ((np.outer(k, ell) % L) / L)
    matrix = np.exp(1j * phase)
    matrix.setflags(write=False)
    return Codebook(L, matrix)


# ---------------------------------------------------------------------------
# Combinatorial number system (lexicographic)
# ---------------------------------------------------------------------------
def _check_LN(L: int, N: int) -> None:
    if L < 2 or N < 1 or N > L - 1:
        raise ValueError(f"need 1 <= N <= L-1, got L={L}, N={N}")


def n_messages(L: int, N: int) -> int:
    """Number of distinct messages, C(L-1, N)."""
    _check_LN(L, N)
    return math.comb(L - 1, N)


def subset_rank(subset: MessageSubset | Sequence[int], L: int, N: int) -> int:
    """Lexicographic rank of ``subset`` among the N-subsets of {1..L-1}.

    >>> subset_rank(MessageSubset((1, 2)), 5, 2), subset_rank(MessageSubset((3, 4)), 5, 2)
    (0, 5)
    """
    _check_LN(L, N)
    if not isinstance(subset, MessageSubset):
        subset = MessageSubset(tuple(subset))
    subset.validate(L, N)
    n = L - 1
    rank = 0
    prev = 0
    for pos, c in enumerate(subset.indices):
        remaining = N - pos - 1
        # all subsets whose element at this position is smaller than c
        for v in range(prev + 1, c):
            rank += math.comb(n - v, remaining)
        prev = c
    return rank


def subset_unrank(rank: int, L: int, N: int) -> MessageSubset:
    """Inverse of :func:`subset_rank`."""
    total = n_messages(L, N)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, {total})")
    n = L - 1
    out = []
    v = 1
    for pos in range(N):
        remaining = N - pos - 1
        while True:
            block = math.comb(n - v, remaining)
            if rank < block:
                break
            rank -= block
            v += 1
        out.append(v)
        v += 1
    return MessageSubset(tuple(out))


def transmission_rate(L: int, N: int) -> float:
    """Rate (1/L) log2 C(L-1, N) in bit per PRI.

    The binomial is an exact integer; ``math.log2`` of a Python int is
    accurate even beyond the float range.
    """
    if L > MAX_EXACT_L:
        raise ValueError(f"L above {MAX_EXACT_L} is not supported")
    return math.log2(n_messages(L, N)) / L


def bits_per_frame(L: int, N: int) -> int:
    """Payload bits per frame, floor(log2 C(L-1, N))."""
    return n_messages(L, N).bit_length() - 1


def encode_message(bits: str, L: int, N: int) -> MessageSubset:
    """Map a payload bit string (MSB first) to its codeword subset."""
    width = bits_per_frame(L, N)
    if len(bits) != width or any(ch not in "01" for ch in bits):
        raise ValueError(f"expected a {width}-character binary string")
    return subset_unrank(int(bits, 2) if bits else 0, L, N)


def decode_message(subset: MessageSubset, L: int, N: int) -> str | None:
    """Payload bits carried by ``subset``.

    Returns ``None`` (an erasure) when the subset's rank lies outside the
    ``2**bits_per_frame`` payload region; the encoder never produces such
    subsets, so an erasure is always a detection error.
    """
    width = bits_per_frame(L, N)
    rank = subset_rank(subset, L, N)
    if rank >= 1 << width:
        return None
    return format(rank, f"0{width}b") if width else ""


# ---------------------------------------------------------------------------
# m-sequence probe pulse
# ---------------------------------------------------------------------------
def lfsr_sequence(register_length: int, taps: Sequence[int], state: Sequence[int]) -> np.ndarray:
    """One period (``2**r - 1`` bits) of a Fibonacci LFSR output.

    ``taps`` are the nonzero exponents of the characteristic polynomial
    besides the constant term, e.g. ``(4, 1)`` for x^4 + x + 1, which gives
    the recurrence s[n+4] = s[n+1] ^ s[n]. The highest tap must equal
    ``register_length``. ``state`` holds s[0..r-1]. Raises ``ValueError``
    if the register returns to its start state early (non-primitive taps).
    """
    r = int(register_length)
    if r < 1:
        raise ValueError("register length must be positive")
    taps = sorted({int(t) for t in taps})
    if not taps or taps[-1] != r or taps[0] < 1:
        raise ValueError(f"taps must lie in 1..{r} and include {r}")
    reg = [int(b) & 1 for b in state]
    if len(reg) != r:
        raise ValueError(f"initial state must have {r} bits")
    if not any(reg):
        raise ValueError("initial state must be nonzero")
    period = (1 << r) - 1
    start = list(reg)
    out = np.empty(period, dtype=np.int8)
    for i in range(period):
        out[i] = reg[0]
        fb = reg[0]
        for t in taps[:-1]:
            fb ^= reg[t]
        reg = reg[1:] + [fb]
        if reg == start and i < period - 1:
            raise ValueError(f"taps {tuple(taps)} are not primitive: period {i + 1} < {period}")
    return out


def msequence_pulse(
    register_length: int = DEFAULT_REGISTER_LENGTH,
    taps: Sequence[int] = DEFAULT_TAPS,
    initial_state: Sequence[int] | None = None,
    chip_rate: float = 50e6,
) -> ProbePulse:
    """BPSK pulse from an m-sequence: bit 0 -> +1, bit 1 -> -1."""
    if initial_state is None:
        initial_state = [1] * register_length
    bits = lfsr_sequence(register_length, taps, initial_state)
    return ProbePulse(1.0 - 2.0 * bits.astype(float), chip_rate)


def default_pulse(chip_rate: float = 50e6) -> ProbePulse:
    return msequence_pulse(chip_rate=chip_rate)
