"""Absorbent-filter design: a broadband gain times a cascade of shelving and
peak biquads fitted to per-band dB targets.

For L bands the cascade is a low shelf between bands 1 and 2, peaks at the
interior band centres and a high shelf between bands L-1 and L. Two bands
use a single high shelf, one band is a pure gain. Section gains come from a
least-squares fit on a log-spaced control grid: a linearised solve,
refined twice around the current gains, then a bounded nonlinear fit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.optimize import least_squares

log = logging.getLogger(__name__)

MAX_ADJACENT_SPREAD_DB = 24.0
SHELF_SLOPE = 1.0
MAX_SECTION_DB = 48.0
CENTER_TOLERANCE_DB = 0.5


class FilterDesignError(ValueError):
    pass


def peak_sos(f0, gain_db, q, fs):
    A = 10.0 ** (gain_db / 40.0)
    w0 = 2 * np.pi * f0 / fs
    alpha = np.sin(w0) / (2 * q)
    c = np.cos(w0)
    b = [1 + alpha * A, -2 * c, 1 - alpha * A]
    a = [1 + alpha / A, -2 * c, 1 - alpha / A]
    return _normalise(b, a)


def low_shelf_sos(f0, gain_db, fs, slope=SHELF_SLOPE):
    A = 10.0 ** (gain_db / 40.0)
    w0 = 2 * np.pi * f0 / fs
    c = np.cos(w0)
    alpha = np.sin(w0) / 2 * np.sqrt((A + 1 / A) * (1 / slope - 1) + 2)
    k = 2 * np.sqrt(A) * alpha
    b = [A * ((A + 1) - (A - 1) * c + k), 2 * A * ((A - 1) - (A + 1) * c),
         A * ((A + 1) - (A - 1) * c - k)]
    a = [(A + 1) + (A - 1) * c + k, -2 * ((A - 1) + (A + 1) * c), (A + 1) + (A - 1) * c - k]
    return _normalise(b, a)


def high_shelf_sos(f0, gain_db, fs, slope=SHELF_SLOPE):
    A = 10.0 ** (gain_db / 40.0)
    w0 = 2 * np.pi * f0 / fs
    c = np.cos(w0)
    alpha = np.sin(w0) / 2 * np.sqrt((A + 1 / A) * (1 / slope - 1) + 2)
    k = 2 * np.sqrt(A) * alpha
    b = [A * ((A + 1) + (A - 1) * c + k), -2 * A * ((A - 1) + (A + 1) * c),
         A * ((A + 1) + (A - 1) * c - k)]
    a = [(A + 1) - (A - 1) * c + k, 2 * ((A - 1) - (A + 1) * c), (A + 1) - (A - 1) * c - k]
    return _normalise(b, a)


def _normalise(b, a):
    b, a = np.asarray(b, dtype=float), np.asarray(a, dtype=float)
    return np.concatenate([b / a[0], a / a[0]])


@dataclass
class FilterCascade:
    """``G(z) = G0 * prod_l G_l(z)``; `sos` rows are ``b0 b1 b2 1 a1 a2``."""

    g0: float
    sos: np.ndarray

    def __post_init__(self):
        self.sos = np.asarray(self.sos, dtype=float).reshape(-1, 6)

    def response(self, freqs_hz, fs) -> np.ndarray:
        """Complex frequency response at `freqs_hz`."""
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
        h = np.full(f.shape, self.g0, dtype=complex)
        if len(self.sos):
            h *= sps.sosfreqz(self.sos, worN=f, fs=fs)[1]
        return h

    def magnitude_db(self, freqs_hz, fs) -> np.ndarray:
        return 20 * np.log10(np.abs(self.response(freqs_hz, fs)))

    def is_stable(self) -> bool:
        return all(np.all(np.abs(np.roots(s[3:])) < 1.0) for s in self.sos)

    def to_dict(self) -> dict:
        return {"g0": self.g0, "sos": self.sos.tolist()}

    @classmethod
    def from_dict(cls, d) -> "FilterCascade":
        return cls(float(d["g0"]), np.asarray(d["sos"], dtype=float).reshape(-1, 6))


def _sections(centers, fs):
    """(kind, frequency, q) for each section of an L-band design."""
    L = len(centers)
    if L == 1:
        return []
    if L == 2:
        return [("hs", np.sqrt(centers[0] * centers[1]), None)]
    secs = [("ls", np.sqrt(centers[0] * centers[1]), None)]
    for i in range(1, L - 1):
        lo, hi = np.sqrt(centers[i - 1] * centers[i]), np.sqrt(centers[i] * centers[i + 1])
        bw_oct = np.log2(hi / lo)
        q = np.sqrt(2.0**bw_oct) / (2.0**bw_oct - 1)
        secs.append(("pk", centers[i], q))
    secs.append(("hs", np.sqrt(centers[-2] * centers[-1]), None))
    return secs


def _section_sos(kind, f0, q, gain_db, fs):
    if kind == "ls":
        return low_shelf_sos(f0, gain_db, fs)
    if kind == "hs":
        return high_shelf_sos(f0, gain_db, fs)
    return peak_sos(f0, gain_db, q, fs)


def _section_db(kind, f0, q, gain_db, freqs, fs):
    sos = _section_sos(kind, f0, q, gain_db, fs)
    return 20 * np.log10(np.abs(sps.sosfreqz(sos[None], worN=freqs, fs=fs)[1]))


def design_cascade(targets_db, centers_hz, fs, iterations: int = 2,
                   points_per_octave: int = 12) -> FilterCascade:
    """Fit a cascade to dB targets at ascending band centres.

    The fit runs on a log-frequency control grid from one octave below the
    lowest centre to one octave above the highest (capped below Nyquist),
    with the target interpolated linearly in log frequency and held flat
    outside the centres. Centre points are weighted heavily, so centre
    errors stay far below the control-grid error.

    Raises
    ------
    FilterDesignError
        If adjacent targets differ by more than 24 dB.
    """
    t = np.asarray(targets_db, dtype=float).ravel()
    fc = np.asarray(centers_hz, dtype=float).ravel()
    if t.size < 1 or t.size != fc.size:
        raise ValueError("one target per band centre required")
    if np.any(np.diff(fc) <= 0):
        raise ValueError("band centres must be ascending")
    if np.any(fc >= fs / 2):
        raise ValueError("band centre beyond Nyquist")
    if np.any(np.abs(np.diff(t)) > MAX_ADJACENT_SPREAD_DB):
        raise FilterDesignError("adjacent band targets differ by more than 24 dB")
    if t.size == 1 or np.all(t == t[0]):
        secs = [(k, f, q, 0.0) for k, f, q in _sections(fc, fs)]
        sos = [_section_sos(k, f, q, 0.0, fs) for k, f, q, _ in secs]
        return FilterCascade(10.0 ** (t[0] / 20.0), np.array(sos).reshape(-1, 6))

    secs = _sections(fc, fs)
    f_lo, f_hi = fc[0] / 2, min(fc[-1] * 2, 0.45 * fs)
    n_ctrl = int(np.ceil(np.log2(f_hi / f_lo) * points_per_octave)) + 1
    ctrl = np.unique(np.concatenate([np.geomspace(f_lo, f_hi, n_ctrl), fc]))
    target = np.interp(np.log(ctrl), np.log(fc), t)
    wts = np.where(np.isin(ctrl, fc), 100.0, 1.0)

    def response_db(params):
        out = np.full_like(ctrl, params[0])
        for (kind, f0, q), g in zip(secs, params[1:]):
            out += _section_db(kind, f0, q, g, ctrl, fs)
        return out

    # linearised solve: unknowns are a broadband dB offset plus one dB gain
    # per section, each section's response scaled from a unit-gain probe
    gains = np.zeros(len(secs))
    for _ in range(iterations):
        cols = [np.ones_like(ctrl)]
        base = np.zeros_like(ctrl)
        for (kind, f0, q), g in zip(secs, gains):
            here = _section_db(kind, f0, q, g, ctrl, fs)
            step = _section_db(kind, f0, q, g + 1.0, ctrl, fs) - here
            cols.append(step)
            base += here - step * g
        B = np.stack(cols, axis=1)
        sol, *_ = np.linalg.lstsq(B * wts[:, None], (target - base) * wts, rcond=None)
        offset, gains = sol[0], np.clip(sol[1:], -MAX_SECTION_DB, MAX_SECTION_DB)
    # the dB responses are not linear in the section gains; finish with a
    # bounded nonlinear fit, which also rescues closely spaced bands
    lim = np.full(len(secs), MAX_SECTION_DB)
    fit = least_squares(lambda p: (response_db(p) - target) * wts,
                        np.concatenate([[offset], gains]),
                        bounds=(np.concatenate([[-np.inf], -lim]), np.concatenate([[np.inf], lim])),
                        x_scale=1.0, xtol=1e-10, ftol=1e-10)
    offset, gains = fit.x[0], fit.x[1:]
    # final broadband correction pins the mean centre error to zero
    sos = np.array([_section_sos(k, f, q, g, fs) for (k, f, q), g in zip(secs, gains)])
    cascade = FilterCascade(10.0 ** (offset / 20.0), sos)
    err = t - cascade.magnitude_db(fc, fs)
    cascade.g0 *= 10.0 ** (err.mean() / 20.0)
    worst = np.abs(err - err.mean()).max()
    if worst > CENTER_TOLERANCE_DB:
        log.warning("absorbent filter misses a band target by %.2f dB; "
                    "bands may be too closely spaced for the target spread", worst)
    return cascade
