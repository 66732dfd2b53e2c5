"""
Decay maps between measurement positions
========================================

Four positions around a listener carry different decay maps; the map at
the listener blends them with inverse-distance weights.
"""

import numpy as np

from dirverb import default_grid, idw_weights, interpolate_map
from dirverb.synth import synthetic_map

grid = default_grid(12)
positions = np.array([[2.0, 1.0, 1.5], [-3.0, 1.5, 1.5], [1.0, -2.5, 1.5], [-2.0, -3.0, 1.5],
                      [12.0, 9.0, 1.5]])
base = [1.4, 1.8, 1.6, 2.1, 3.0]
maps = [synthetic_map(t * (1 + 0.1 * grid.vectors[:, 0]), grid, position=p)
        for t, p in zip(base, positions)]

listener = np.array([0.0, 0.0, 1.5])
q = idw_weights(listener, positions, m_nearest=4)
for i, d, w in zip(q.neighbor_ids, q.distances, q.weights):
    print(f"position {i}: {d:.3f} m away, weight {w:.4f}")

blended = interpolate_map(maps, q)
print("band-mean T60 at the listener:", np.round(blended.mean_t60_s, 3))

###############################################################################
# Standing on a measured position reproduces its map exactly
assert interpolate_map(maps, idw_weights(positions[2], positions)) == maps[2]
