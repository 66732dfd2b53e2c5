"""Energy-decay analysis of directional impulse responses.

Covers the Schroeder energy-decay curve (EDC), its banded and directional
forms, the energy-decay deviation (EDD), reverberation-time estimators and
the per-position :class:`DirectionalDecayMap`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy.ndimage import uniform_filter1d

from .spherical import DirectionGrid, beam_weights, order_from_channels

log = logging.getLogger(__name__)

# cell flags of a DirectionalDecayMap
OK, FALLBACK_T20, FAILED = 0, 1, 2


class DecayRangeError(ValueError):
    """The decay curve does not span enough dynamic range for the fit."""

    def __init__(self, achieved_db: float, required_db: float):
        self.achieved_db = achieved_db
        self.required_db = required_db
        super().__init__(f"decay range {achieved_db:.1f} dB, need {required_db:.1f} dB")


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Band:
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz:
            raise ValueError(f"invalid band {self.low_hz}-{self.high_hz} Hz")

    @property
    def center_hz(self) -> float:
        """Geometric-mean centre frequency."""
        return float(np.sqrt(self.low_hz * self.high_hz))


@dataclass(frozen=True)
class BandSpec:
    """Analysis filter bank. `order` is the band-pass order (even)."""

    bands: tuple[Band, ...]
    order: int = 6
    allow_overlap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        if not self.bands:
            raise ValueError("at least one band required")
        if self.order < 2 or self.order % 2:
            raise ValueError("band-pass order must be a positive even number")
        if not self.allow_overlap:
            for a, b in zip(self.bands, self.bands[1:]):
                if b.low_hz < a.high_hz:
                    raise ValueError(f"bands {a} and {b} overlap; set allow_overlap")

    @classmethod
    def default(cls) -> "BandSpec":
        return cls((Band(200, 800), Band(1000, 2000), Band(2000, 6000)))

    @classmethod
    def parse(cls, text: str, order: int = 6) -> "BandSpec":
        """Parse ``"200-800,1000-2000,2000-6000"``."""
        bands = []
        for part in text.split(","):
            lo, hi = part.strip().split("-")
            bands.append(Band(float(lo), float(hi)))
        return cls(tuple(bands), order=order)

    def __len__(self) -> int:
        return len(self.bands)

    @property
    def centers_hz(self) -> np.ndarray:
        return np.array([b.center_hz for b in self.bands])

    def check_nyquist(self, fs: float) -> None:
        for b in self.bands:
            if b.high_hz >= fs / 2:
                raise ValueError(f"band {b.low_hz}-{b.high_hz} Hz exceeds Nyquist at {fs} Hz")

    def to_dict(self) -> dict:
        return {"bands": [[float(b.low_hz), float(b.high_hz)] for b in self.bands],
                "order": self.order, "allow_overlap": self.allow_overlap}

    @classmethod
    def from_dict(cls, d: dict) -> "BandSpec":
        return cls(tuple(Band(float(lo), float(hi)) for lo, hi in d["bands"]),
                   order=int(d["order"]), allow_overlap=bool(d["allow_overlap"]))


@dataclass
class EdcCurve:
    """Energy-decay curve in dB; ``-inf`` once the energy is exhausted.

    `floor_db` is the level, relative to the first value, below which the
    curve is not trusted (noise floor). ``-inf`` means no known floor.
    """

    values_db: np.ndarray
    sample_rate_hz: float
    floor_db: float = -np.inf

    @property
    def relative_db(self) -> np.ndarray:
        return self.values_db - self.values_db[0]

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(len(self.values_db)) / self.sample_rate_hz

    def decay_range_db(self) -> float:
        rel = self.relative_db
        finite = rel[np.isfinite(rel)]
        lowest = finite.min() if len(finite) else 0.0
        return float(-max(lowest, self.floor_db))


def _edc_db(y: np.ndarray) -> np.ndarray:
    energy = np.cumsum(np.square(y)[..., ::-1], axis=-1)[..., ::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy)


def edc(y, sample_rate_hz: float = 1.0) -> EdcCurve:
    """Backward-integrated energy ``10 log10 sum_{i>=n} y(i)^2``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("edc expects a non-empty 1-D signal")
    if not np.all(np.isfinite(y)):
        raise ValueError("signal contains non-finite samples")
    if not np.any(y):
        raise ValueError("all-zero signal has no decay to analyse")
    return EdcCurve(_edc_db(y), sample_rate_hz)


def band_filter(y, band: Band, sample_rate_hz: float, order: int = 6) -> np.ndarray:
    """Causal Butterworth band-pass of total order `order` along the last axis."""
    if band.high_hz >= sample_rate_hz / 2:
        raise ValueError(f"band {band.low_hz}-{band.high_hz} Hz exceeds Nyquist")
    sos = sps.butter(order // 2, [band.low_hz, band.high_hz], btype="bandpass",
                     fs=sample_rate_hz, output="sos")
    return sps.sosfilt(sos, np.asarray(y, dtype=float), axis=-1)


def truncate_noise(y, sample_rate_hz: float, smoothing_s: float = 0.01):
    """Cut `y` after the last point where its energy envelope clears the noise floor.

    The floor is the median envelope energy over the last 10 % of the
    response, raised by 10 dB. The envelope is a `smoothing_s` moving
    average of the squared signal.

    Returns
    -------
    truncated : ndarray
    floor_db : float
        Threshold relative to the envelope peak.
    """
    y = np.asarray(y, dtype=float)
    win = max(1, int(round(smoothing_s * sample_rate_hz)))
    env = uniform_filter1d(np.square(y), win, mode="constant")
    tail = env[int(0.9 * len(env)):]
    threshold = 10.0 * np.median(tail) if len(tail) else 0.0
    peak = env.max()
    if peak <= 0:
        return y, 0.0
    above = np.flatnonzero(env > threshold)
    end = above[-1] + 1 if len(above) else len(y)
    with np.errstate(divide="ignore"):
        floor_db = 10 * np.log10(threshold / peak) if threshold > 0 else -np.inf
    return y[:end], float(floor_db)


@dataclass
class DecayFit:
    t60_s: float
    method: str
    range_db: float


def _line_fit_t60(curve: EdcCurve, top_db: float, bottom_db: float) -> float:
    rel = curve.relative_db
    idx = np.flatnonzero((rel <= top_db) & (rel >= bottom_db))
    if len(idx) < 2:
        raise DecayRangeError(curve.decay_range_db(), -bottom_db)
    t = idx / curve.sample_rate_hz
    slope = np.polyfit(t, rel[idx], 1)[0]
    if not slope < 0:
        raise DecayRangeError(curve.decay_range_db(), -bottom_db)
    return float(-60.0 / slope)


def fit_decay(curve: EdcCurve, allow_t20: bool = True) -> DecayFit:
    """T60 from the [-5, -35] dB segment, or [-5, -25] dB if only 25 dB is usable."""
    achieved = curve.decay_range_db()
    if achieved >= 35.0:
        return DecayFit(_line_fit_t60(curve, -5.0, -35.0), "T30", achieved)
    if allow_t20 and achieved >= 25.0:
        return DecayFit(_line_fit_t60(curve, -5.0, -25.0), "T20", achieved)
    raise DecayRangeError(achieved, 35.0 if not allow_t20 else 25.0)


def estimate_t60(curve: EdcCurve) -> float:
    """Reverberation time in seconds from a T30 line fit."""
    return fit_decay(curve, allow_t20=False).t60_s


def estimate_edt(curve: EdcCurve) -> float:
    """Early decay time: the [0, -10] dB slope extrapolated to 60 dB."""
    if curve.decay_range_db() < 10.0:
        raise DecayRangeError(curve.decay_range_db(), 10.0)
    return _line_fit_t60(curve, 0.0, -10.0)


def edc0(y) -> float:
    """Total energy of a response in dB (the EDC at its first sample)."""
    y = np.asarray(getattr(y, "samples", y), dtype=float)
    e = float(np.sum(np.square(y)))
    if e <= 0:
        raise ValueError("all-zero signal has no energy")
    return 10.0 * np.log10(e)


@dataclass
class DecaySurface:
    """EDC or EDD values over ``[bands x directions x time]`` in dB.

    `bands` is None for a broadband surface (a single pseudo-band).
    """

    values_db: np.ndarray
    grid: DirectionGrid
    sample_rate_hz: float
    bands: BandSpec | None = None
    kind: str = "edc"

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(self.values_db.shape[-1]) / self.sample_rate_hz


def _signals_of(dirirs):
    samples = np.asarray(getattr(dirirs, "samples", dirirs), dtype=float)
    return np.atleast_2d(samples)


def directional_edc(dirirs, bands: BandSpec | None, sample_rate_hz: float | None = None,
                    grid: DirectionGrid | None = None) -> DecaySurface:
    """Banded EDC of every directional response.

    `dirirs` is a :class:`~dirverb.spherical.DirirSet` or a
    ``[directions x N]`` array (then `sample_rate_hz` and `grid` are needed).
    With ``bands=None`` the surface is broadband.
    """
    y = _signals_of(dirirs)
    fs = sample_rate_hz if sample_rate_hz is not None else dirirs.sample_rate_hz
    grid = grid if grid is not None else dirirs.grid
    if len(grid) != y.shape[0]:
        raise ValueError("grid size does not match number of responses")
    if bands is None:
        filtered = y[None]
    else:
        bands.check_nyquist(fs)
        filtered = np.stack([band_filter(y, b, fs, bands.order) for b in bands.bands])
    if not np.all(np.any(filtered != 0, axis=-1)):
        raise ValueError("a directional response is all zero")
    return DecaySurface(_edc_db(filtered), grid, fs, bands, kind="edc")


def mean_edc(surface: DecaySurface, mean_over=None) -> np.ndarray:
    """Direction average of the dB values, ``[bands x time]``."""
    v = surface.values_db if mean_over is None else surface.values_db[:, mean_over]
    return v.mean(axis=1)


def edd(surface: DecaySurface, mean_over=None) -> DecaySurface:
    """Energy-decay deviation: each directional EDC minus the direction mean.

    `mean_over` optionally restricts the directions entering the mean.
    Samples where any EDC is ``-inf`` are left as NaN.
    """
    if surface.values_db.shape[1] < 2:
        raise ValueError("EDD needs at least two directions")
    with np.errstate(invalid="ignore"):
        dev = surface.values_db - mean_edc(surface, mean_over)[:, None, :]
    dev[~np.isfinite(dev)] = np.nan
    return DecaySurface(dev, surface.grid, surface.sample_rate_hz, surface.bands, kind="edd")


@dataclass
class DirectionalDecayMap:
    """Directional decay parameters of one listening position."""

    grid: DirectionGrid
    bands: BandSpec
    t60_s: np.ndarray
    edt_s: np.ndarray
    edc0_db: np.ndarray
    mean_t60_s: np.ndarray
    position: np.ndarray
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        nb, nd = len(self.bands), len(self.grid)
        self.t60_s = np.asarray(self.t60_s, dtype=float).reshape(nb, nd)
        self.edt_s = np.asarray(self.edt_s, dtype=float).reshape(nb, nd)
        self.edc0_db = np.asarray(self.edc0_db, dtype=float).reshape(nd)
        self.mean_t60_s = np.asarray(self.mean_t60_s, dtype=float).reshape(nb)
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if self.flags is None:
            self.flags = np.zeros((nb, nd), dtype=int)
        self.flags = np.asarray(self.flags, dtype=int).reshape(nb, nd)
        if not (np.all(np.isfinite(self.t60_s)) and np.all(self.t60_s > 0)):
            raise ValueError("T60 values must be positive and finite")
        if not np.all(np.isfinite(self.edc0_db)):
            raise ValueError("EDC0 values must be finite")

    def __eq__(self, other):
        if not isinstance(other, DirectionalDecayMap):
            return NotImplemented
        return (self.grid == other.grid and self.bands == other.bands
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("t60_s", "edt_s", "edc0_db", "mean_t60_s",
                                  "position", "flags")))


def _analyze_cell(y, fs):
    truncated, floor_db = truncate_noise(y, fs)
    if not np.any(truncated):
        raise DecayRangeError(0.0, 25.0)
    curve = EdcCurve(_edc_db(truncated), fs, floor_db)
    fit = fit_decay(curve)
    return fit, estimate_edt(curve)


def _analyze(rows, nd, fs, grid, bands, position, max_failed, chunk):
    bands.check_nyquist(fs)
    nb = len(bands)
    t60 = np.full((nb, nd), np.nan)
    edt = np.full((nb, nd), np.nan)
    e0 = np.empty(nd)
    flags = np.zeros((nb, nd), dtype=int)
    for start in range(0, nd, chunk):
        block = rows(start, min(start + chunk, nd))
        e0[start:start + len(block)] = [edc0(row) for row in block]
        for bi, band in enumerate(bands.bands):
            filtered = band_filter(block, band, fs, bands.order)
            for j, row in enumerate(filtered):
                k = start + j
                try:
                    fit, edt_k = _analyze_cell(row, fs)
                except DecayRangeError as err:
                    log.debug("cell (%d, %d) failed: %s", bi, k, err)
                    flags[bi, k] = FAILED
                    continue
                t60[bi, k], edt[bi, k] = fit.t60_s, edt_k
                if fit.method == "T20":
                    flags[bi, k] = FALLBACK_T20
    n_failed = int(np.sum(flags == FAILED))
    if n_failed > max_failed * flags.size:
        raise AnalysisError(f"{n_failed} of {flags.size} decay cells failed")
    if n_failed:
        log.warning("%d decay cells failed and carry the band median", n_failed)
        for bi in range(nb):
            bad = flags[bi] == FAILED
            if bad.all():
                raise AnalysisError(f"every direction failed in band {bi}")
            t60[bi, bad] = np.median(t60[bi, ~bad])
            edt[bi, bad] = np.median(edt[bi, ~bad])
    return DirectionalDecayMap(grid, bands, t60, edt, e0, t60.mean(axis=1),
                               np.asarray(position, dtype=float), flags)


def analyze_dirirs(dirirs, bands: BandSpec, sample_rate_hz: float | None = None,
                   grid: DirectionGrid | None = None, position=(0.0, 0.0, 0.0),
                   max_failed: float = 0.2, chunk: int = 32) -> DirectionalDecayMap:
    """Fill a decay map from directional responses (beams or DFDN channels).

    Each (band, direction) cell is band-filtered, noise-truncated and fitted.
    Cells that fall back to a T20 fit or fail outright are flagged; failed
    cells carry the band median of the successful cells. More than
    `max_failed` failed cells rejects the whole map.
    """
    y = _signals_of(dirirs)
    fs = sample_rate_hz if sample_rate_hz is not None else dirirs.sample_rate_hz
    grid = grid if grid is not None else dirirs.grid
    if len(grid) != y.shape[0]:
        raise ValueError("grid size does not match number of responses")
    return _analyze(lambda a, b: y[a:b], len(grid), fs, grid, bands, position,
                    max_failed, chunk)


def analyze_position(srir, grid: DirectionGrid, bands: BandSpec | None = None,
                     degree_weights=None, max_failed: float = 0.2,
                     chunk: int = 32) -> DirectionalDecayMap:
    """Decompose an SRIR into beams on `grid` and analyse every beam.

    Beams are formed `chunk` directions at a time, so dense grids never
    hold the full decomposition in memory.
    """
    bands = bands or BandSpec.default()
    s = np.asarray(srir.samples, dtype=float)
    W = beam_weights(order_from_channels(s.shape[0]), grid, degree_weights)

    def rows(a, b):
        return np.stack([W[k] @ s for k in range(a, b)])

    return _analyze(rows, len(grid), srir.sample_rate_hz, grid, bands, srir.position,
                    max_failed, chunk)
