"""
Error-probability evaluation: semi-analytic quadrature and Monte Carlo.

The semi-analytic estimator averages, over channel draws, the exact
conditional error probability

    1 - int_0^inf prod_n Q_K(sqrt(2 L |beta_n|^2 / s2), sqrt(2x))
              (L-N-1) f(x) F(x)^(L-N-2) dx

where f, F are the Erlang(K) density and CDF. The Monte Carlo estimator
simulates whole frames and counts subset errors. Both walk the same
per-trial random streams, so trial ``t`` of one sees the channel of draw
``t`` of the other.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import specfun
from .channel import (_draw_tr_arrays, beamformer_matrix, draw_noise,
                      interference_vector, noise_variance_from_snr, stream)
from .codebook import (MessageSubset, bits_per_frame, build_codebook,
                       decode_message, subset_unrank, transmission_rate)
from .config import SystemConfig
from .detector import energies_from_samples, top_n_mask
from .ris import Direction, steering_matrix, steering_vector
from .specfun import ConvergenceError, QuadratureResult

__all__ = [
    "PeEstimate",
    "conditional_error_prob",
    "conditional_correct_prob",
    "channel_batch",
    "semianalytic_pe",
    "monte_carlo_pe",
    "rate_curve",
    "sweep_pe_vs_L",
    "sweep_pe_vs_delay_spread",
    "snr_to_noise_variance",
]

CHUNK = 512
SKIP_LIMIT = 0.01


@dataclass(frozen=True)
class PeEstimate:
    value: float
    std_error: float
    n: int
    method: str  # "semi-analytic" or "monte-carlo"
    snr_db: float | None = None
    noise_variance: float | None = None
    bit_error_rate: float | None = None
    erasures: int = 0
    skipped: int = 0


# ---------------------------------------------------------------------------
# Conditional error probability
# ---------------------------------------------------------------------------
@lru_cache(maxsize=256)
def _upper_limit(K: int, n_competitors: int, tail: float) -> float:
    return specfun.erlang_max_support(K, n_competitors, tail)


def _integration_tail(rel_tol: float) -> float:
    return min(rel_tol / 10.0, 1e-16)


def conditional_error_prob(
    beta_norms_sq: Sequence[float],
    noise_variance: float,
    L: int,
    N: int,
    K: int,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-15,
    full_output: bool = False,
):
    """Probability that the detected subset is wrong given the signatures.

    Integrates the miss probability ``1 - prod_n Q_K(...)`` against the
    density of the largest of the ``L-N-1`` inactive statistics. The miss
    probability is formed from the lower Marcum tails directly, so small
    error probabilities keep their relative accuracy.

    Returns the probability, or a :class:`QuadratureResult` when
    ``full_output`` is set.
    """
    norms = np.asarray(beta_norms_sq, dtype=float)
    if norms.shape != (N,):
        raise ValueError(f"need {N} signature energies, got shape {norms.shape}")
    if np.any(norms < 0) or not np.all(np.isfinite(norms)):
        raise ValueError("signature energies must be finite and nonnegative")
    if not noise_variance > 0:
        raise ValueError("noise variance must be positive")
    if L < N + 1 or K < 1:
        raise ValueError("need L >= N+1 and K >= 1")
    n_comp = L - N - 1
    if n_comp == 0:
        res = QuadratureResult(0.0, 0.0, 0)
        return res if full_output else 0.0

    lam = L * norms / noise_variance  # Poisson mean = noncentrality / 2
    lo = specfun.poisson_window(float(lam.min()))[0]
    hi = specfun.poisson_window(float(lam.max()))[1]
    tail = _integration_tail(rel_tol)
    x_max = _upper_limit(K, n_comp, tail)
    m_max = specfun._table_size(K + hi + 1, x_max)
    weights = specfun._poisson_pmf(lam, m_max)[:, lo:hi + 1].T  # (J, N)
    cols = slice(K + lo, K + hi + 1)

    def integrand(x):
        pmf = specfun._poisson_pmf(x, m_max)
        upper = np.cumsum(pmf[:, ::-1], axis=1)[:, ::-1]
        # Pr(T_n <= x) for each active codeword
        below = np.clip(upper[:, cols] @ weights, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            miss = -np.expm1(np.sum(np.log1p(-below), axis=1))
        dens = pmf[:, K - 1]  # Erlang(K) density at x
        cdf = upper[:, K]     # Erlang(K) CDF at x
        g = n_comp * dens * cdf ** (n_comp - 1)
        return miss * g

    res = specfun.integrate_adaptive(integrand, 0.0, x_max, rel_tol=rel_tol, abs_tol=abs_tol)
    value = min(max(res.value, 0.0), 1.0)
    res = QuadratureResult(value, res.abs_error_estimate + tail, res.evaluations)
    return res if full_output else value


def conditional_correct_prob(beta_norms_sq, noise_variance, L, N, K, rel_tol=1e-8) -> float:
    """1 - :func:`conditional_error_prob`; exactly 1 when L = N + 1."""
    return 1.0 - conditional_error_prob(beta_norms_sq, noise_variance, L, N, K, rel_tol)


# ---------------------------------------------------------------------------
# Batched channel draws
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ChannelBatch:
    trials: np.ndarray
    phases: np.ndarray      # (B,)
    amplitudes: np.ndarray  # (B, Q)
    azimuths: np.ndarray    # (B, Q)
    elevations: np.ndarray  # (B, Q)
    delays: np.ndarray      # (B, Q)
    betas: np.ndarray       # (B, K_R, N)


def channel_batch(config: SystemConfig, trials: Iterable[int], seed: int | None = None) -> ChannelBatch:
    """Channel draws of the listed trials and their signatures beta_n.

    Uses the same streams and draw order as ``draw_st_channel`` and
    ``draw_tr_channel``; the signatures are contracted subarray-first
    (beamformer before pulse), which is algebraically A_STR P_n b_n.
    """
    seed = config.seed if seed is None else seed
    trials = np.asarray(list(trials), dtype=np.int64)
    B, Q = trials.size, config.q_tr
    phases = np.empty(B)
    amps = np.empty((B, Q), dtype=complex)
    az = np.empty((B, Q))
    el = np.empty((B, Q))
    dl = np.empty((B, Q))
    for i, t in enumerate(trials):
        phases[i] = stream(seed, t, "st").uniform(0.0, 2.0 * np.pi)
        amps[i], az[i], el[i], dl[i] = _draw_tr_arrays(config, stream(seed, t, "tr"))
    psi_st = steering_vector(config.geometry, Direction(*config.theta_st))
    bmat = beamformer_matrix(config.partition, config.beamformers) * psi_st[:, None]  # (M, N)
    spatial = amps[..., None] * steering_matrix(config.geometry, az, el)  # (B, Q, M)
    per_tap = (spatial @ bmat) * (config.sigma_st * np.exp(1j * phases))[:, None, None]  # (B, Q, N)
    k = np.arange(config.samples_per_pri, dtype=float)
    samples = config.pulse.at_samples(k[None, :, None] - dl[:, None, :] * config.bandwidth)
    samples = samples * np.sqrt(config.pulse_power)  # (B, K, Q)
    betas = samples @ per_tap
    return ChannelBatch(trials, phases, amps, az, el, dl, betas)


def snr_to_noise_variance(config: SystemConfig, snr_db: float) -> float:
    return noise_variance_from_snr(10.0 ** (snr_db / 10.0), config)


def _noise_levels(config, snr_db, noise_variance):
    if noise_variance is not None:
        levels = np.atleast_1d(np.asarray(noise_variance, dtype=float))
        return [None] * levels.size, [float(v) for v in levels]
    snrs = [float(s) for s in np.atleast_1d(snr_db)]
    return snrs, [snr_to_noise_variance(config, s) for s in snrs]


def _chunks(n: int, size: int = CHUNK):
    return [range(s, min(s + size, n)) for s in range(0, n, size)]


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# Semi-analytic estimator
# ---------------------------------------------------------------------------
def semianalytic_pe(
    config: SystemConfig,
    snr_db: float | Sequence[float] | None = None,
    n_channel_draws: int | None = None,
    seed: int | None = None,
    noise_variance: float | Sequence[float] | None = None,
    rel_tol: float | None = None,
    workers: int = 1,
) -> PeEstimate | list[PeEstimate]:
    """Average the conditional error probability over channel draws.

    Draw ``d`` uses the ST/TR streams of trial ``d``. Several SNRs share
    the draws. A scalar SNR (or noise variance) returns one estimate, a
    sequence returns a list. Draws whose quadrature fails are skipped and
    counted; more than 1% skipped raises :class:`ConvergenceError`.
    """
    scalar = np.ndim(snr_db if noise_variance is None else noise_variance) == 0
    snrs, levels = _noise_levels(config, snr_db, noise_variance)
    n = config.channel_draws if n_channel_draws is None else int(n_channel_draws)
    if n < 1:
        raise ValueError("need at least one channel draw")
    seed = config.seed if seed is None else seed
    tol = config.rel_tol if rel_tol is None else rel_tol
    L, N, K = config.codeword_length, config.n_subarrays, config.samples_per_pri

    def work(chunk):
        batch = channel_batch(config, chunk, seed)
        norms = np.sum(np.abs(batch.betas) ** 2, axis=1)  # (B, N)
        out = np.full((len(levels), len(chunk)), np.nan)
        for i, s2 in enumerate(levels):
            for j in range(len(chunk)):
                try:
                    out[i, j] = conditional_error_prob(norms[j], s2, L, N, K, tol)
                except ConvergenceError:
                    pass
        return out

    values = np.concatenate(_map(work, _chunks(n), workers), axis=1)
    results = []
    for i, (snr, s2) in enumerate(zip(snrs, levels)):
        ok = values[i][~np.isnan(values[i])]
        skipped = n - ok.size
        if skipped > SKIP_LIMIT * n:
            raise ConvergenceError(
                f"{skipped} of {n} channel draws failed to integrate",
                QuadratureResult(float("nan"), float("inf"), 0),
            )
        mean = math.fsum(ok) / ok.size
        if ok.size > 1:
            var = math.fsum((v - mean) ** 2 for v in ok) / (ok.size - 1)
            se = math.sqrt(var / ok.size)
        else:
            se = 0.0
        results.append(PeEstimate(mean, se, int(ok.size), "semi-analytic", snr, s2, skipped=skipped))
    return results[0] if scalar else results


# ---------------------------------------------------------------------------
# Monte Carlo estimator
# ---------------------------------------------------------------------------
def monte_carlo_pe(
    config: SystemConfig,
    snr_db: float | Sequence[float] | None = None,
    n_trials: int | None = None,
    seed: int | None = None,
    noise_variance: float | Sequence[float] | None = None,
    workers: int = 1,
) -> PeEstimate | list[PeEstimate]:
    """Simulate frames end to end and count subset errors.

    Per trial: uniform payload, fresh ST/TR channel and noise from the
    trial's streams; the same unit-variance noise realization is scaled to
    every requested level. Errors are integer counts, so the estimate does
    not depend on ``workers`` or on how trials are chunked.
    """
    scalar = np.ndim(snr_db if noise_variance is None else noise_variance) == 0
    snrs, levels = _noise_levels(config, snr_db, noise_variance)
    n = config.trials if n_trials is None else int(n_trials)
    if n < 1:
        raise ValueError("need at least one trial")
    seed = config.seed if seed is None else seed
    L, N, K = config.codeword_length, config.n_subarrays, config.samples_per_pri
    codebook = build_codebook(L)
    width = bits_per_frame(L, N)
    i_row = np.conj(interference_vector(config))[None, None, :]
    scales = np.sqrt(levels)

    def work(chunk):
        batch = channel_batch(config, chunk, seed)
        B = len(chunk)
        sent = np.zeros((B, L - 1), dtype=bool)
        payload = np.empty(B, dtype=object)
        noise = np.empty((B, L, K), dtype=complex)
        for j, t in enumerate(chunk):
            rank = int(stream(seed, t, "message").integers(0, 1 << width)) if width else 0
            payload[j] = rank
            sent[j, np.asarray(subset_unrank(rank, L, N).indices) - 1] = True
            noise[j] = draw_noise(stream(seed, t, "noise"), (L, K))
        # codeword of subarray n = n-th smallest selected index
        chosen = np.nonzero(sent)[1].reshape(B, N)
        C = codebook.matrix.T[chosen].transpose(0, 2, 1)  # (B, L, N)
        clean = C @ np.conj(batch.betas).transpose(0, 2, 1) + i_row  # (B, L, K)
        errors = np.zeros(len(levels), dtype=np.int64)
        bit_errors = np.zeros(len(levels), dtype=np.int64)
        erasures = np.zeros(len(levels), dtype=np.int64)
        for i, s in enumerate(scales):
            y = clean + s * noise if s > 0 else clean
            detected = top_n_mask(energies_from_samples(y, codebook), N)
            wrong = np.flatnonzero(np.any(detected != sent, axis=1))
            errors[i] = wrong.size
            for j in wrong:
                subset = tuple(np.flatnonzero(detected[j]) + 1)
                bits = decode_message(MessageSubset(subset), L, N)
                if bits is None:
                    erasures[i] += 1
                    bit_errors[i] += width
                else:
                    bit_errors[i] += bin(int(bits, 2) ^ payload[j]).count("1")
        return errors, bit_errors, erasures

    parts = _map(work, _chunks(n), workers)
    errors = sum(p[0] for p in parts)
    bit_errors = sum(p[1] for p in parts)
    erasures = sum(p[2] for p in parts)
    results = []
    for i, (snr, s2) in enumerate(zip(snrs, levels)):
        p = float(errors[i]) / n
        se = math.sqrt(p * (1.0 - p) / n)
        ber = float(bit_errors[i]) / (n * width) if width else None
        results.append(PeEstimate(p, se, n, "monte-carlo", snr, s2, ber, int(erasures[i])))
    return results[0] if scalar else results


# ---------------------------------------------------------------------------
# Curves and sweeps
# ---------------------------------------------------------------------------
def rate_curve(N: int, L_values: Iterable[int]) -> tuple[list[tuple[int, float]], int | None]:
    """Transmission rate over ``L_values`` and the maximizing L."""
    rows = []
    for L in L_values:
        if L < N + 1:
            raise ValueError(f"L={L} is below N+1={N + 1}")
        rows.append((int(L), transmission_rate(int(L), N)))
    best = max(rows, key=lambda r: r[1])[0] if rows else None
    return rows, best


def _sweep(configs, variable, snr_list, trials, seed, overlay, channel_draws, workers):
    rows = []
    for value, cfg in zip(variable, configs):
        ests = monte_carlo_pe(cfg, list(snr_list), trials, seed, workers=workers) if snr_list else []
        for est in ests:
            rows.append(dict(sweep_var=value, snr_db=est.snr_db, pe=est.value,
                             std_err=est.std_error, trials=est.n, method=est.method, seed=seed))
        if overlay and snr_list:
            for est in semianalytic_pe(cfg, list(snr_list), channel_draws, seed, workers=workers):
                rows.append(dict(sweep_var=value, snr_db=est.snr_db, pe=est.value,
                                 std_err=est.std_error, trials=est.n, method=est.method, seed=seed))
    return rows


def sweep_pe_vs_L(config: SystemConfig, snr_list: Sequence[float], L_list: Sequence[int],
                  trials: int | None = None, seed: int | None = None, overlay: bool = False,
                  channel_draws: int | None = None, workers: int = 1) -> list[dict]:
    """Monte Carlo P_e over codeword lengths; rows follow the CSV schema."""
    seed = config.seed if seed is None else seed
    configs = [config.replace(codeword_length=int(L)) for L in L_list]
    return _sweep(configs, [int(L) for L in L_list], snr_list, trials, seed, overlay, channel_draws, workers)


def sweep_pe_vs_delay_spread(config: SystemConfig, snr_list: Sequence[float], spread_list: Sequence[int],
                             trials: int | None = None, seed: int | None = None, overlay: bool = False,
                             channel_draws: int | None = None, workers: int = 1) -> list[dict]:
    """Monte Carlo P_e over delay spreads in samples (K_R = G + spread)."""
    seed = config.seed if seed is None else seed
    configs = [config.replace(delay_spread_samples=int(s)) for s in spread_list]
    return _sweep(configs, [int(s) for s in spread_list], snr_list, trials, seed, overlay, channel_draws, workers)
