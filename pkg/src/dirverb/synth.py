"""Synthetic SRIRs and decay maps with known ground truth.

Used by the tests, the demos and ``dirverb verify``.
"""

from __future__ import annotations

import numpy as np

from .decay import BandSpec, DirectionalDecayMap
from .spherical import DirectionGrid, default_grid, num_channels, sh_matrix
from .srir_io import Srir


def exponential_decay(t60_s: float, fs: float, duration_s: float, noise: bool = False,
                      seed: int = 0) -> np.ndarray:
    """Amplitude envelope ``10^(-3 t / T60)``, optionally times white noise."""
    t = np.arange(int(round(duration_s * fs))) / fs
    env = 10.0 ** (-3.0 * t / t60_s)
    if noise:
        env = env * np.random.default_rng(seed).standard_normal(len(t))
    return env


def plane_wave_srir(order: int, direction, signal, fs: int = 48000,
                    position=(0, 0, 0)) -> Srir:
    """N3D encoding of a single plane wave from `direction` (a Direction)."""
    y = sh_matrix(order, direction.azimuth_rad, direction.elevation_rad)[0]
    return Srir(np.outer(y, np.asarray(signal, dtype=float)), fs, position, order)


def isotropic_srir(order: int, t60_s: float, fs: int = 48000, duration_s: float = 1.5,
                   seed: int = 0, position=(0, 0, 0)) -> Srir:
    """Diffuse decaying noise: independent, equal-power N3D channels."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    env = exponential_decay(t60_s, fs, duration_s)
    s = rng.standard_normal((num_channels(order), n)) * env
    return Srir(s, fs, position, order)


def directional_noise_srir(order: int, t60_of_direction, fs: int = 48000,
                           duration_s: float = 3.0, seed: int = 0,
                           sources: DirectionGrid | None = None,
                           position=(0, 0, 0)) -> Srir:
    """Encode independent decaying noise from many directions.

    `t60_of_direction` maps unit vectors ``(Q, 3)`` to decay times ``(Q,)``.
    Sources default to the 240-point t-design.
    """
    sources = sources or default_grid(240)
    t60 = np.asarray(t60_of_direction(sources.vectors), dtype=float)
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    Y = sh_matrix(order, sources.azimuth, sources.elevation)
    s = np.zeros((num_channels(order), n))
    for q in range(len(sources)):
        sig = rng.standard_normal(n) * 10.0 ** (-3.0 * t / t60[q])
        s += np.outer(Y[q], sig)
    s /= np.sqrt(len(sources))
    return Srir(s, fs, position, order)


def synthetic_map(t60_s, grid: DirectionGrid, bands: BandSpec | None = None,
                  edc0_db=None, position=(0, 0, 0)) -> DirectionalDecayMap:
    """Decay map with prescribed ``[bands x directions]`` T60 values."""
    bands = bands or BandSpec.default()
    t60 = np.broadcast_to(np.asarray(t60_s, dtype=float), (len(bands), len(grid))).copy()
    e0 = np.zeros(len(grid)) if edc0_db is None else np.asarray(edc0_db, dtype=float)
    return DirectionalDecayMap(grid, bands, t60, t60.copy(), e0, t60.mean(axis=1),
                               position)


def anisotropic_t60(vectors, low: float = 1.5, high: float = 2.5, axis=(1, 0, 0)):
    """T60 varying smoothly from `low` (toward -axis) to `high` (toward +axis)."""
    c = np.asarray(vectors, dtype=float) @ np.asarray(axis, dtype=float)
    return low + (high - low) * (c + 1) / 2
