"""Quick self-checks run by ``risbackscatter validate``.

Each check returns ``(passed, detail)``; they are small versions of the
test-suite oracles and finish in a few seconds together.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import specfun
from .analysis import conditional_correct_prob, monte_carlo_pe, rate_curve
from .channel import assemble_composite, draw_st_channel, draw_tr_channel, stream, synthesize_frame
from .codebook import MessageSubset, build_codebook, subset_rank, subset_unrank
from .config import SystemConfig
from .detector import detect_subset, matched_filter_energies
from .ris import beampattern, beampattern_explicit, direction_grid, space_time_code

__all__ = ["CHECKS", "run_checks"]


def check_marcum_closed_forms():
    worst = 0.0
    for b in (0.0, 0.5, 1.0, 2.0, 4.0):
        worst = max(worst, abs(specfun.marcum_q(1, 0.0, b) - math.exp(-b * b / 2)))
    for k, b in itertools.product((1, 4, 30, 64), (0.3, 2.0, 7.0, 12.0)):
        worst = max(worst, abs(specfun.marcum_q(k, 0.0, b) - (1 - specfun.erlang_cdf(k, b * b / 2))))
    return worst <= 1e-12, f"max deviation {worst:.2e}"


def check_erlang():
    err = max(abs(specfun.erlang_cdf(2, 1.0) - (1 - 2 * math.exp(-1))),
              abs(specfun.erlang_cdf(1, math.log(2)) - 0.5),
              abs(specfun.erlang_pdf(2, 1.0) - math.exp(-1)))
    return err <= 1e-12, f"max deviation {err:.2e}"


def check_codebook():
    worst = 0.0
    for L in range(2, 65):
        U = build_codebook(L).matrix
        G = U.conj().T @ U
        worst = max(worst, np.max(np.abs(G - L * np.eye(L - 1))) / L,
                    np.max(np.abs(U.sum(axis=0))) / L)
    return worst <= 1e-9, f"max Gram/DC deviation {worst:.2e} (relative to L)"


def check_ranking():
    for L in range(2, 13):
        for N in range(1, min(5, L - 1) + 1):
            for r in range(math.comb(L - 1, N)):
                if subset_rank(subset_unrank(r, L, N), L, N) != r:
                    return False, f"round trip failed at L={L}, N={N}, rank={r}"
    return True, "bijective for L<=12, N<=5"


def check_rate_optimum():
    _, best = rate_curve(9, range(10, 61))
    return best == 21, f"argmax L = {best}"


def check_beampattern(config: SystemConfig):
    rng = np.random.default_rng(0)
    L, N = config.codeword_length, config.n_subarrays
    cb = build_codebook(L)
    gamma = draw_st_channel(config, stream(config.seed, 0, "st")).vector
    az, el = direction_grid()
    closed = beampattern(config.beamformers, config.partition, gamma, config.geometry, az, el, L)
    worst = 0.0
    for _ in range(3):
        picks = rng.choice(np.arange(1, L), N, replace=False)
        code = space_time_code(cb, MessageSubset.from_iterable(picks), config.partition,
                               config.beamformers, assignment_order=list(picks))
        explicit = beampattern_explicit(code, gamma, config.geometry, az, el)
        worst = max(worst, np.max(np.abs(explicit - closed) / np.maximum(closed.max(), 1e-300)))
    return worst <= 1e-9, f"max relative deviation {worst:.2e}"


def check_noiseless(config: SystemConfig, frames: int = 50):
    est = monte_carlo_pe(config, n_trials=frames, noise_variance=0.0)
    return est.value == 0.0, f"{int(round(est.value * frames))} errors in {frames} noiseless frames"


def check_interference(config: SystemConfig):
    cb = build_codebook(config.codeword_length)
    st = draw_st_channel(config, stream(config.seed, 0, "st"))
    tr = draw_tr_channel(config, stream(config.seed, 0, "tr"))
    subset = MessageSubset(tuple(range(1, config.n_subarrays + 1)))
    code = space_time_code(cb, subset, config.partition, config.beamformers)
    decisions = set()
    for amp in (0.0, 1.0, 1e3, 1e6):
        i_sr = amp * config.pulse.at_samples(np.arange(config.samples_per_pri))
        sig = assemble_composite(config.pulse, st, tr, config.geometry, config.partition,
                                 config.beamformers, config.samples_per_pri, i_sr)
        frame = synthesize_frame(code, sig, 9375.0, stream(config.seed, 0, "noise"))
        decisions.add(detect_subset(matched_filter_energies(frame, cb), config.n_subarrays).indices)
    return len(decisions) == 1, f"{len(decisions)} distinct decision(s) across interference levels"


def check_zero_signal():
    v = conditional_correct_prob(np.zeros(2), 1.0, 5, 2, 4)
    return abs(v - 1 / 6) <= 1e-6, f"P(correct | no signal) = {v:.9f} (expected 1/6)"


CHECKS = {
    "marcum_closed_forms": lambda cfg: check_marcum_closed_forms(),
    "erlang_closed_forms": lambda cfg: check_erlang(),
    "codebook_orthogonality": lambda cfg: check_codebook(),
    "subset_ranking": lambda cfg: check_ranking(),
    "rate_optimum": lambda cfg: check_rate_optimum(),
    "beampattern_invariance": check_beampattern,
    "noiseless_detection": check_noiseless,
    "interference_immunity": check_interference,
    "zero_signal_symmetry": lambda cfg: check_zero_signal(),
}


def run_checks(config: SystemConfig | None = None):
    """Run every check; yields ``(name, passed, detail)``."""
    config = SystemConfig() if config is None else config
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn(config)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield name, bool(ok), detail
