"""
Moving listener, block by block
===============================

Render in 256-sample blocks while a listener walks from a dry corner to a
reverberant one; new absorbent filters are handed to the renderer and
crossfaded over 4096 samples.
"""

import numpy as np

from dirverb import default_grid, idw_weights, interpolate_map
from dirverb.dfdn import DesignRequest, DfdnRenderer, design
from dirverb.dfdn.network import design_filters, input_gains_from_edc0, resample_map
from dirverb.synth import synthetic_map

grid = default_grid(12)
positions = np.array([[0.0, 0, 0], [6.0, 0, 0]])
maps = [synthetic_map(0.8, grid, position=positions[0]),
        synthetic_map(2.4, grid, position=positions[1])]

cfg = design(maps[0], DesignRequest(16, 12, seed=1))
renderer = DfdnRenderer(cfg, block_size=256)
fs, block = cfg.sample_rate_hz, 256

rng = np.random.default_rng(0)
source = rng.standard_normal(3 * fs) * (np.arange(3 * fs) < fs // 4)
energy = []
for i in range(0, len(source), block):
    # every 100 ms the listener has moved on; update the reverberator
    if i % (fs // 10) == 0:
        x = 6.0 * i / len(source)
        m = interpolate_map(maps, idw_weights([x, 0.1, 0], positions, 2))
        t60, e0 = resample_map(m, cfg.group_directions)
        renderer.retarget(input_gains=input_gains_from_edc0(e0, 16),
                          filters=design_filters(t60, cfg.delays, m.bands.centers_hz, fs))
    y = renderer.process(source[i:i + block])
    energy.append(np.sum(y**2))

frames = np.add.reduceat(np.array(energy), np.arange(0, len(energy), len(energy) // 10))
for k, e in enumerate(frames):
    print(f"{0.3 * k:3.1f} s  {10 * np.log10(e + 1e-30):7.1f} dB")
print("hard switches:", renderer.hard_switches)
