# # Rate versus frame length, and the RIS beampattern
#
# With N subarrays each picking a distinct codeword from L-1, a frame of L
# PRIs carries log2 C(L-1, N) bits. Longer frames offer more subsets but
# cost more PRIs; the trade-off peaks at a single L.

import numpy as np

from risbackscatter import SystemConfig
from risbackscatter.analysis import rate_curve
from risbackscatter.codebook import MessageSubset, build_codebook
from risbackscatter.ris import (Direction, beampattern, beampattern_explicit, direction_grid,
                                space_time_code, steering_vector)

rows, best = rate_curve(9, range(10, 61))
for L, r in rows[::5]:
    print(f"L={L:2d}  rate={r:.4f} bit/PRI")
print("best L:", best)

# ## Beampattern
# The matched beamformers steer the reflected power toward the reader at
# (45, 0) degrees; with unit ST gain the peak is L N M^2.
cfg = SystemConfig()
gamma = steering_vector(cfg.geometry, Direction(*cfg.theta_st))
az, el = direction_grid(37, 13)
B = beampattern(cfg.beamformers, cfg.partition, gamma, cfg.geometry, az, el, cfg.codeword_length)
i = int(np.argmax(B))
print(f"peak {B[i]:.1f} at az={az[i]:.0f}, el={el[i]:.0f}; L*N*M^2 = {21 * 9 * 25 ** 2}")

# Which codewords are sent does not matter: the explicit pattern of any
# code matrix reproduces the closed form.
rng = np.random.default_rng(1)
cb = build_codebook(21)
for _ in range(3):
    picks = rng.choice(np.arange(1, 21), 9, replace=False)
    code = space_time_code(cb, MessageSubset.from_iterable(picks), cfg.partition, cfg.beamformers,
                           assignment_order=[int(p) for p in picks])
    Bx = beampattern_explicit(code, gamma, cfg.geometry, az, el)
    print(sorted(picks.tolist()), "max deviation / peak:", np.max(np.abs(Bx - B)) / B.max())

# Elevation cut through the peak, coarse text plot.
cut = B.reshape(37, 13)[27]
for e, v in zip(np.linspace(-90, 90, 13), cut):
    print(f"el={e:+5.0f} " + "#" * int(60 * v / B.max()))
