"""
From decay map to reverberator and back
=======================================

Design a directional FDN from a 12-direction map, render its impulse
response and analyse each output channel again.
"""

import numpy as np

from dirverb import BandSpec, analyze_dirirs, default_grid
from dirverb.dfdn import DesignRequest, design, render
from dirverb.synth import synthetic_map

grid = default_grid(12)
c = (grid.vectors[:, 0] + 1) / 2
target = np.stack([1.5 + 1.0 * c, 1.5 + 0.8 * c, 1.5 + 0.6 * c])
m = synthetic_map(target, grid, BandSpec.default())

###############################################################################
# 16 delay groups of 12 lines, one line per direction
cfg = design(m, DesignRequest(num_groups=16, channels_per_group=12, seed=0))
print("delays (samples):", cfg.delays.min(), "to", cfg.delays.max())
print("all filters below unity gain:", cfg.is_decaying())

###############################################################################
# 4 s impulse response, one channel per direction
fs = cfg.sample_rate_hz
y = render(cfg, np.ones(1), 4 * fs)
achieved = analyze_dirirs(y, m.bands, fs, grid)

err = achieved.t60_s / target - 1
for b, band in enumerate(m.bands.bands):
    print(f"{band.low_hz:.0f}-{band.high_hz:.0f} Hz: worst error {100 * np.abs(err[b]).max():.1f} %,"
          f" mean T60 {achieved.mean_t60_s[b]:.3f} s (target {target[b].mean():.3f} s)")
