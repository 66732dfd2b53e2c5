"""DFDN parameters and their design from a directional decay map."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..decay import DirectionalDecayMap
from ..spherical import SHIPPED_TDESIGNS, DirectionGrid, default_grid
from .geq import FilterCascade, design_cascade

log = logging.getLogger(__name__)

CONFIG_SCHEMA = "dirverb-dfdn/1"
DEFAULT_DELAY_RANGE = (1009, 4093)
REFERENCE_RATE = 48000
MAX_RESAMPLE_ERROR_DEG = 10.0


def per_sample_gain(t60_s, fs) -> np.ndarray | float:
    """Attenuation in dB per sample for a decay time, ``-60 / (T60 fs)``.

    ``t60_s = inf`` gives the lossless limit of 0 dB.
    """
    t60 = np.asarray(t60_s, dtype=float)
    if np.any(t60 <= 0) or fs <= 0:
        raise ValueError("T60 and sample rate must be positive")
    g = -60.0 / (t60 * fs)
    return float(g) if g.ndim == 0 else g


def line_gain(g_db_per_sample, m):
    """Per-pass dB attenuation of a delay line of `m` samples."""
    m = np.asarray(m)
    if np.any(m < 1):
        raise ValueError("delay lengths must be at least one sample")
    return np.asarray(g_db_per_sample, dtype=float) * m


def db_to_lin(g_db):
    return 10.0 ** (np.asarray(g_db, dtype=float) / 20.0)


def random_orthogonal(n: int, seed: int = 0) -> np.ndarray:
    """Haar-distributed orthogonal matrix, deterministic in `seed`."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q *= np.sign(np.diag(r))
    return q


def _primes_between(lo: int, hi: int) -> np.ndarray:
    sieve = np.ones(hi + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(hi**0.5) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.flatnonzero(sieve[lo:hi + 1]) + lo


def coprime_delays(n_lines: int, delay_range, fs, seed: int = 0) -> np.ndarray:
    """Distinct prime (hence mutually co-prime) delays, drawn at random.

    `delay_range` is given at 48 kHz and scaled to `fs`.
    """
    scale = fs / REFERENCE_RATE
    lo, hi = int(round(delay_range[0] * scale)), int(round(delay_range[1] * scale))
    primes = _primes_between(max(lo, 2), hi)
    if len(primes) < n_lines:
        raise ValueError(f"only {len(primes)} primes in [{lo}, {hi}] for {n_lines} delay lines; "
                         "widen the delay range")
    rng = np.random.default_rng(seed)
    return rng.choice(primes, size=n_lines, replace=False)


@dataclass
class DfdnConfig:
    """Complete reverberator description.

    Arrays indexed ``[group i, channel k]``; `filters` is a nested list of
    the same shape.
    """

    group_directions: DirectionGrid
    delays: np.ndarray
    feedback_matrix: np.ndarray
    input_gains: np.ndarray
    output_gains: np.ndarray
    direct_gain: np.ndarray
    filters: list
    sample_rate_hz: int
    seed: int = 0
    band_centers_hz: np.ndarray | None = None

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=np.int64)
        self.feedback_matrix = np.asarray(self.feedback_matrix, dtype=float)
        self.input_gains = np.asarray(self.input_gains, dtype=float)
        self.output_gains = np.asarray(self.output_gains, dtype=float)
        self.direct_gain = np.asarray(self.direct_gain, dtype=float)
        self.validate()

    @property
    def num_groups(self) -> int:
        return self.delays.shape[0]

    @property
    def channels_per_group(self) -> int:
        return self.delays.shape[1]

    def validate(self) -> None:
        N, K = self.delays.shape
        if len(self.group_directions) != K:
            raise ValueError("one group direction per channel required")
        for name in ("input_gains", "output_gains"):
            if getattr(self, name).shape != (N, K):
                raise ValueError(f"{name} must be {N}x{K}")
        if self.direct_gain.shape != (K,):
            raise ValueError(f"direct_gain must have {K} entries")
        if self.feedback_matrix.shape != (N, N):
            raise ValueError(f"feedback matrix must be {N}x{N}")
        A = self.feedback_matrix
        if np.max(np.abs(A.T @ A - np.eye(N))) >= 1e-9:
            raise ValueError("feedback matrix is not orthogonal")
        if np.any(self.delays < 1):
            raise ValueError("delays must be at least one sample")
        if len(self.filters) != N or any(len(row) != K for row in self.filters):
            raise ValueError(f"filters must be an {N}x{K} nested list")
        for row in self.filters:
            for f in row:
                if not f.is_stable():
                    raise ValueError("unstable absorbent filter")

    def broadband_gains(self, n_freqs: int = 512) -> np.ndarray:
        """Peak magnitude of every absorbent filter over [0, Nyquist]."""
        f = np.linspace(0, self.sample_rate_hz / 2, n_freqs)
        return np.array([[np.abs(flt.response(f, self.sample_rate_hz)).max()
                          for flt in row] for row in self.filters])

    def is_decaying(self) -> bool:
        return bool(np.all(self.broadband_gains() < 1.0))

    def to_dict(self) -> dict:
        g = self.group_directions
        return {
            "schema": CONFIG_SCHEMA,
            "sample_rate_hz": self.sample_rate_hz,
            "seed": self.seed,
            "group_directions": {"kind": g.kind, "azimuth_rad": g.azimuth.tolist(),
                                 "elevation_rad": g.elevation.tolist()},
            "delays": self.delays.tolist(),
            "feedback_matrix": self.feedback_matrix.tolist(),
            "input_gains": self.input_gains.tolist(),
            "output_gains": self.output_gains.tolist(),
            "direct_gain": self.direct_gain.tolist(),
            "filters": [[f.to_dict() for f in row] for row in self.filters],
            "band_centers_hz": None if self.band_centers_hz is None
            else list(map(float, self.band_centers_hz)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DfdnConfig":
        if d.get("schema") != CONFIG_SCHEMA:
            from ..srir_io import SchemaVersionError
            raise SchemaVersionError(f"expected schema {CONFIG_SCHEMA!r}, got {d.get('schema')!r}")
        g = d["group_directions"]
        return cls(DirectionGrid(np.array(g["azimuth_rad"]), np.array(g["elevation_rad"]),
                                 kind=g["kind"]),
                   d["delays"], d["feedback_matrix"], d["input_gains"], d["output_gains"],
                   d["direct_gain"],
                   [[FilterCascade.from_dict(f) for f in row] for row in d["filters"]],
                   int(d["sample_rate_hz"]), int(d["seed"]),
                   None if d["band_centers_hz"] is None else np.array(d["band_centers_hz"]))

    def save(self, path) -> None:
        from ..srir_io import _atomic_write
        text = json.dumps(self.to_dict())
        _atomic_write(path, lambda f: f.write(text))

    @classmethod
    def load(cls, path) -> "DfdnConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class DesignRequest:
    num_groups: int = 16
    channels_per_group: int = 12
    delay_range: tuple[int, int] = DEFAULT_DELAY_RANGE
    seed: int = 0
    sample_rate_hz: int = 48000


def resample_map(m: DirectionalDecayMap, grid: DirectionGrid):
    """Map values at `grid` directions by nearest-direction lookup.

    Returns ``(t60 [bands x K], edc0 [K])``.
    """
    if m.grid == grid:
        return m.t60_s, m.edc0_db
    idx, err = m.grid.nearest(grid.vectors)
    worst = np.degrees(err.max())
    if worst > MAX_RESAMPLE_ERROR_DEG:
        log.warning("map grid misses DFDN directions by up to %.1f deg", worst)
    return m.t60_s[:, idx], m.edc0_db[idx]


def filter_targets(t60_s, delays, fs) -> np.ndarray:
    """Per-pass dB targets ``[..., bands]`` for T60 ``[bands, K]`` and delays ``[N, K]``."""
    g = per_sample_gain(t60_s, fs)  # [B, K]
    return np.moveaxis(line_gain(g[:, None, :], delays[None]), 0, -1)  # [N, K, B]


def input_gains_from_edc0(edc0_db, num_groups: int) -> np.ndarray:
    """Amplitude ``10^(EDC0/20)`` per direction, unit energy within each group."""
    e = np.asarray(edc0_db, dtype=float)
    amp = 10.0 ** ((e - e.max()) / 20.0)
    amp /= np.sqrt(np.sum(amp**2))
    return np.tile(amp, (num_groups, 1))


def design_filters(t60_s, delays, centers_hz, fs) -> list:
    targets = filter_targets(t60_s, delays, fs)
    return [[design_cascade(targets[i, k], centers_hz, fs) for k in range(delays.shape[1])]
            for i in range(delays.shape[0])]


def design(m: DirectionalDecayMap, req: DesignRequest | None = None) -> DfdnConfig:
    """Build a DFDN whose channel k decays like the map in direction k."""
    req = req or DesignRequest()
    N, K, fs = req.num_groups, req.channels_per_group, req.sample_rate_hz
    if N < 4:
        raise ValueError("a DFDN needs at least 4 delay groups")
    if K not in SHIPPED_TDESIGNS and K != len(m.grid):
        raise ValueError(f"K={K} has no shipped grid; choose from {SHIPPED_TDESIGNS}")
    grid = m.grid if K == len(m.grid) and K not in SHIPPED_TDESIGNS else default_grid(K)
    t60, e0 = resample_map(m, grid)
    rng = np.random.default_rng(req.seed)
    seed_delays, seed_matrix = (int(s) for s in rng.integers(0, 2**31, size=2))
    delays = coprime_delays(N * K, req.delay_range, fs, seed_delays).reshape(N, K)
    centers = m.bands.centers_hz
    return DfdnConfig(grid, delays, random_orthogonal(N, seed_matrix),
                      input_gains_from_edc0(e0, N), np.full((N, K), 1 / np.sqrt(N)),
                      np.zeros(K), design_filters(t60, delays, centers, fs), fs, req.seed,
                      centers)
