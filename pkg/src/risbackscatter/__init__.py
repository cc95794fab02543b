"""Index-modulated backscatter through an RIS-based MIMO radar.

Encoding of messages as unordered subsets of orthogonal slow-time
codewords, channel and frame synthesis, matched-filter detection and
error-probability analysis (semi-analytic and Monte Carlo).
"""

from .analysis import (PeEstimate, channel_batch, conditional_correct_prob,
                       conditional_error_prob, monte_carlo_pe, rate_curve,
                       semianalytic_pe, sweep_pe_vs_delay_spread,
                       sweep_pe_vs_L)
from .channel import (assemble_composite, direct_path, draw_st_channel,
                      draw_tr_channel, noise_variance_from_snr, stream,
                      synthesize_frame)
from .codebook import (Codebook, MessageSubset, ProbePulse, bits_per_frame,
                       build_codebook, decode_message, encode_message,
                       msequence_pulse, subset_rank, subset_unrank,
                       transmission_rate)
from .config import SystemConfig, load_config, save_config
from .detector import (EnergyStatistics, decode_frame, detect_subset,
                       matched_filter_energies)
from .ris import (Direction, RisGeometry, beampattern, beampattern_explicit,
                  matched_beamformers, space_time_code, square_partition,
                  steering_vector)
from .specfun import (erlang_cdf, erlang_pdf, integrate_adaptive, marcum_p,
                      marcum_q)

__version__ = "0.1.0"
