"""
Stochastic channels and synthesis of the reader's received frame.

Random draws follow a fixed stream contract: every trial index owns one
independent generator per stochastic entity (ST phase, TR taps, noise,
message), derived from the run seed with ``numpy.random.SeedSequence``.
Any code path that needs trial ``t``'s channel therefore sees the same
numbers, whatever order or batch the trial is processed in.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .codebook import ProbePulse
from .config import SystemConfig
from .ris import (BeamformerSet, Direction, RisGeometry, SpaceTimeCode,
                  SubarrayPartition, steering_matrix, steering_vector)

__all__ = [
    "STREAMS",
    "stream",
    "StChannel",
    "TrTap",
    "TrChannel",
    "CompositeSignature",
    "ReceivedFrame",
    "draw_st_channel",
    "draw_tr_channel",
    "tap_samples",
    "assemble_composite",
    "beamformer_matrix",
    "direct_path",
    "interference_vector",
    "noise_variance_from_snr",
    "synthesize_frame",
    "draw_noise",
    "channel_csv",
]

STREAMS = {"st": 0, "tr": 1, "noise": 2, "message": 3}


def stream(seed: int, trial: int, name: str) -> np.random.Generator:
    """Generator for entity ``name`` of trial ``trial`` under run ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(trial), STREAMS[name]))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class StChannel:
    sigma: float
    phase: float
    direction: Direction
    vector: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class TrTap:
    amplitude: complex
    direction: Direction
    delay: float  # seconds, relative to the start of the observation window


@dataclass(frozen=True)
class TrChannel:
    taps: tuple[TrTap, ...]
    kappa: float
    sigma: float

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([t.amplitude for t in self.taps], dtype=complex)

    @property
    def delays(self) -> np.ndarray:
        return np.array([t.delay for t in self.taps])


@dataclass(frozen=True, eq=False)
class CompositeSignature:
    """Sampled indirect-path signatures and the direct-path interference.

    ``a_str`` is K_R x M_RIS; ``betas`` is K_R x N with column n equal to
    A_STR P_n b_n; ``i_sr`` has length K_R.
    """

    a_str: np.ndarray = field(repr=False)
    betas: np.ndarray = field(repr=False)
    i_sr: np.ndarray = field(repr=False)

    @property
    def beta_norms_sq(self) -> np.ndarray:
        return np.sum(np.abs(self.betas) ** 2, axis=0)


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    y: np.ndarray = field(repr=False)
    noise_variance: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.y.shape


# ---------------------------------------------------------------------------
# Channel draws
# ---------------------------------------------------------------------------
def draw_st_channel(config: SystemConfig, rng: np.random.Generator) -> StChannel:
    """gamma_ST = sigma_ST exp(j phi) psi(theta_ST), phi ~ U[0, 2 pi)."""
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    direction = Direction(*config.theta_st)
    vec = config.sigma_st * np.exp(1j * phase) * steering_vector(config.geometry, direction)
    return StChannel(config.sigma_st, phase, direction, vec)


def _draw_tr_arrays(config: SystemConfig, rng: np.random.Generator):
    q = config.q_tr
    kappa = config.kappa_tr
    phi = rng.uniform(0.0, 2.0 * np.pi, q)
    g = (rng.standard_normal(q) + 1j * rng.standard_normal(q)) / np.sqrt(2.0)
    az = rng.uniform(*config.tr_azimuth_range, q)
    el = rng.uniform(*config.tr_elevation_range, q)
    delay = rng.uniform(0.0, config.delay_spread, q)
    if np.isinf(kappa):
        amp = config.sigma_tr * np.exp(1j * phi)
    else:
        amp = config.sigma_tr * (np.sqrt(kappa / (1.0 + kappa)) * np.exp(1j * phi)
                                 + np.sqrt(1.0 / (1.0 + kappa)) * g)
    return amp, az, el, delay


def draw_tr_channel(config: SystemConfig, rng: np.random.Generator) -> TrChannel:
    """Independent Rician taps with uniform departure angle and delay.

    Each amplitude is sigma_TR (sqrt(k/(1+k)) e^{j phi} + sqrt(1/(1+k)) g)
    with phi uniform and g standard circular complex Gaussian, so that
    E|amplitude|^2 = sigma_TR^2.
    """
    amp, az, el, delay = _draw_tr_arrays(config, rng)
    taps = tuple(
        TrTap(complex(a), Direction(float(z), float(e)), float(d))
        for a, z, e, d in zip(amp, az, el, delay)
    )
    return TrChannel(taps, config.kappa_tr, config.sigma_tr)


# ---------------------------------------------------------------------------
# Composite signatures
# ---------------------------------------------------------------------------
def tap_samples(pulse: ProbePulse, delays, n_samples: int) -> np.ndarray:
    """a(k/W - tau) for k < n_samples, one column per delay (exact chips)."""
    k = np.arange(n_samples, dtype=float)[:, None]
    shift = np.asarray(delays, dtype=float)[None, :] * pulse.chip_rate
    return pulse.at_samples(k - shift)


def beamformer_matrix(partition: SubarrayPartition, beamformers: BeamformerSet) -> np.ndarray:
    """M_RIS x N matrix whose column n is P_n b_n."""
    out = np.zeros((partition.n_elements, partition.n_subarrays), dtype=complex)
    for n, (members, b) in enumerate(zip(partition.members, beamformers.vectors)):
        out[members, n] = b
    return out


def direct_path(pulse: ProbePulse, amplitude: complex, delay: float, n_samples: int) -> np.ndarray:
    """Samples of amplitude * a(k/W - delay) on the reader grid."""
    window = n_samples / pulse.chip_rate
    if not 0.0 <= delay < window:
        raise ValueError(f"delay {delay!r} s outside the observation window [0, {window!r})")
    return amplitude * tap_samples(pulse, [delay], n_samples)[:, 0]


def interference_vector(config: SystemConfig) -> np.ndarray:
    return direct_path(config.pulse, config.interference_amplitude,
                       config.interference_delay_samples / config.bandwidth,
                       config.samples_per_pri)


def assemble_composite(
    pulse: ProbePulse,
    st: StChannel,
    tr: TrChannel,
    geometry: RisGeometry,
    partition: SubarrayPartition,
    beamformers: BeamformerSet,
    n_samples: int,
    i_sr: np.ndarray | None = None,
    pulse_power: float = 1.0,
) -> CompositeSignature:
    """Sample alpha_STR,m(t) = a * gamma_ST,m * gamma_TR,m on the reader grid.

    Column m of A_STR is gamma_ST,m sum_q gamma_q psi_m(theta_q) a(k/W - tau_q),
    with the pulse scaled to power ``pulse_power``.
    """
    if st.vector.shape != (geometry.n_elements,):
        raise ValueError("ST channel does not match the RIS size")
    amps = tr.amplitudes
    az = [t.direction.azimuth for t in tr.taps]
    el = [t.direction.elevation for t in tr.taps]
    spatial = amps[:, None] * steering_matrix(geometry, az, el)  # (Q, M)
    samples = np.sqrt(pulse_power) * tap_samples(pulse, tr.delays, n_samples)
    a_str = (samples @ spatial) * st.vector[None, :]
    betas = a_str @ beamformer_matrix(partition, beamformers)
    if i_sr is None:
        i_sr = np.zeros(n_samples, dtype=complex)
    i_sr = np.asarray(i_sr, dtype=complex)
    if i_sr.shape != (n_samples,):
        raise ValueError("interference vector must have K_R samples")
    return CompositeSignature(a_str, betas, i_sr)


# ---------------------------------------------------------------------------
# Noise and frame synthesis
# ---------------------------------------------------------------------------
def noise_variance_from_snr(snr_linear: float, config: SystemConfig,
                            beampattern_at_target: float | None = None) -> float:
    """sigma^2 = P G B(theta_bar) sigma_TR^2 / (L N snr)."""
    if not snr_linear > 0:
        raise ValueError("SNR must be positive")
    b = config.beampattern_at_target if beampattern_at_target is None else beampattern_at_target
    return (config.pulse_power * config.processing_gain * b * config.sigma_tr ** 2
            / (config.codeword_length * config.n_subarrays * snr_linear))


def draw_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    z = rng.standard_normal((2,) + tuple(shape))
    return (z[0] + 1j * z[1]) / np.sqrt(2.0)


def synthesize_frame(code: SpaceTimeCode, sig: CompositeSignature, noise_variance: float,
                     rng: np.random.Generator | None = None) -> ReceivedFrame:
    """Y_R = X A_STR^H + 1 i_SR^H + Omega_R.

    With ``noise_variance == 0`` no random numbers are consumed and ``rng``
    may be omitted.
    """
    X = code.matrix
    if X.shape[1] != sig.a_str.shape[1]:
        raise ValueError(f"code has {X.shape[1]} columns, A_STR has {sig.a_str.shape[1]}")
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    L, K = X.shape[0], sig.a_str.shape[0]
    y = X @ sig.a_str.conj().T + np.conj(sig.i_sr)[None, :]
    if noise_variance > 0:
        if rng is None:
            raise ValueError("a generator is needed for noisy frames")
        y = y + np.sqrt(noise_variance) * draw_noise(rng, (L, K))
    return ReceivedFrame(y, float(noise_variance))


def channel_csv(tr: TrChannel) -> str:
    """TR taps as CSV: tap, re, im, az_deg, el_deg, delay_s."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tap", "re", "im", "az_deg", "el_deg", "delay_s"])
    for q, t in enumerate(tr.taps):
        w.writerow([q, repr(t.amplitude.real), repr(t.amplitude.imag),
                    repr(t.direction.azimuth), repr(t.direction.elevation), repr(t.delay)])
    return buf.getvalue()
