"""Real spherical harmonics, direction grids and plane-wave decomposition.

Conventions
-----------
* Channel order is ACN, ``acn = l**2 + l + m``.
* Normalisation is N3D without the Condon-Shortley phase, so that the mean of
  ``Y_lm**2`` over the sphere is 1 and the order-1 channels are
  ``sqrt(3) * (y, z, x)``.
* Azimuth is measured counter-clockwise from +x in the horizontal plane,
  elevation upwards from the horizontal plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy import special

MAX_ORDER = 10
SHIPPED_TDESIGNS = (12, 24, 240, 840)


def num_channels(order: int) -> int:
    return (order + 1) ** 2


def order_from_channels(n: int) -> int:
    """Inverse of :func:`num_channels`, raising if `n` is not a square."""
    order = math.isqrt(n) - 1
    if order < 0 or num_channels(order) != n:
        raise ValueError(f"{n} channels is not a full spherical-harmonic set")
    return order


def channel_degrees(order: int) -> np.ndarray:
    """Degree ``l`` of every ACN channel up to `order`."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(order + 1)])


def _wrap_azimuth(az):
    return (np.asarray(az, dtype=float) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class Direction:
    azimuth_rad: float
    elevation_rad: float

    def __post_init__(self):
        if not -np.pi <= self.azimuth_rad < np.pi:
            raise ValueError(f"azimuth {self.azimuth_rad} outside [-pi, pi)")
        if not -np.pi / 2 <= self.elevation_rad <= np.pi / 2:
            raise ValueError(f"elevation {self.elevation_rad} outside [-pi/2, pi/2]")

    @classmethod
    def from_angles(cls, azimuth_rad: float, elevation_rad: float) -> "Direction":
        """Build a direction, wrapping the azimuth into range."""
        return cls(float(_wrap_azimuth(azimuth_rad)), float(elevation_rad))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        x, y, z = np.asarray(v, dtype=float) / np.linalg.norm(v)
        return cls.from_angles(math.atan2(y, x), math.asin(min(1.0, max(-1.0, z))))

    def unit_vector(self) -> np.ndarray:
        return angles_to_vectors(self.azimuth_rad, self.elevation_rad)


def angles_to_vectors(azimuth, elevation) -> np.ndarray:
    """Unit vectors of shape ``(..., 3)`` for the given angles in radians."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def vectors_to_angles(vectors):
    v = np.asarray(vectors, dtype=float)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    az = np.arctan2(v[..., 1], v[..., 0])
    el = np.arcsin(np.clip(v[..., 2], -1.0, 1.0))
    return _wrap_azimuth(az), el


@dataclass
class DirectionGrid:
    """A set of directions with optional quadrature weights summing to 4*pi."""

    azimuth: np.ndarray
    elevation: np.ndarray
    weights: np.ndarray | None = None
    kind: str = "custom"

    def __post_init__(self):
        self.azimuth = _wrap_azimuth(np.atleast_1d(self.azimuth))
        self.elevation = np.atleast_1d(np.asarray(self.elevation, dtype=float))
        if self.azimuth.ndim != 1 or self.azimuth.shape != self.elevation.shape:
            raise ValueError("azimuth and elevation must be 1-D arrays of equal length")
        if len(self.azimuth) == 0:
            raise ValueError("a direction grid needs at least one direction")
        if np.any(np.abs(self.elevation) > np.pi / 2 + 1e-12):
            raise ValueError("elevation outside [-pi/2, pi/2]")
        self.elevation = np.clip(self.elevation, -np.pi / 2, np.pi / 2)
        if self.kind not in ("t_design", "fibonacci", "custom"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.azimuth.shape:
                raise ValueError("one weight per direction required")
            if np.any(self.weights <= 0):
                raise ValueError("quadrature weights must be positive")
            if abs(self.weights.sum() - 4 * np.pi) > 1e-6 * 4 * np.pi:
                raise ValueError(f"weights sum to {self.weights.sum()}, expected 4*pi")

    def __len__(self) -> int:
        return len(self.azimuth)

    def __eq__(self, other):
        if not isinstance(other, DirectionGrid):
            return NotImplemented
        same_w = (self.weights is None and other.weights is None) or (
            self.weights is not None and other.weights is not None
            and np.array_equal(self.weights, other.weights))
        return (self.kind == other.kind and same_w
                and np.array_equal(self.azimuth, other.azimuth)
                and np.array_equal(self.elevation, other.elevation))

    @property
    def vectors(self) -> np.ndarray:
        return angles_to_vectors(self.azimuth, self.elevation)

    @property
    def directions(self) -> list[Direction]:
        return [Direction(float(a), float(e)) for a, e in zip(self.azimuth, self.elevation)]

    def nearest(self, vectors):
        """Index of the nearest grid direction and the angular error in radians.

        `vectors` is ``(3,)`` or ``(M, 3)``.
        """
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        cos = np.clip(v @ self.vectors.T, -1.0, 1.0)
        idx = np.argmax(cos, axis=1)
        err = np.arccos(cos[np.arange(len(v)), idx])
        return idx, err

    def neighbour_angle(self) -> np.ndarray:
        """Angular distance from every point to its closest other point."""
        if len(self) == 1:
            return np.array([np.pi])
        cos = self.vectors @ self.vectors.T
        np.fill_diagonal(cos, -2.0)
        return np.arccos(np.clip(cos.max(axis=1), -1.0, 1.0))


def fibonacci_grid(n: int) -> DirectionGrid:
    """Spherical Fibonacci lattice of exactly `n` points with equal weights."""
    if n < 1:
        raise ValueError("n must be positive")
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    az = np.pi * (1.0 + 5.0**0.5) * i
    return DirectionGrid(az, np.arcsin(z), np.full(n, 4 * np.pi / n), kind="fibonacci")


def read_grid(path, kind: str = "custom") -> DirectionGrid:
    """Read a grid file with ``azimuth_deg elevation_deg [weight]`` rows."""
    rows = np.atleast_2d(np.loadtxt(path, comments="#", ndmin=2))
    if rows.shape[1] not in (2, 3):
        raise ValueError(f"{path}: expected 2 or 3 columns, got {rows.shape[1]}")
    weights = rows[:, 2] if rows.shape[1] == 3 else None
    return DirectionGrid(np.radians(rows[:, 0]), np.radians(rows[:, 1]), weights, kind=kind)


def write_grid(grid: DirectionGrid, path) -> None:
    lines = ["# azimuth_deg elevation_deg" + (" weight" if grid.weights is not None else "")]
    for i in range(len(grid)):
        row = f"{np.degrees(grid.azimuth[i]):.17g} {np.degrees(grid.elevation[i]):.17g}"
        if grid.weights is not None:
            row += f" {grid.weights[i]:.17g}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def default_grid(n: int) -> DirectionGrid:
    """Shipped t-design when one has `n` points, else a Fibonacci grid."""
    if n < 1:
        raise ValueError("n must be positive")
    if n in SHIPPED_TDESIGNS:
        ref = resources.files("dirverb") / "data" / f"tdesign_{n:04d}.txt"
        with resources.as_file(ref) as path:
            return read_grid(path, kind="t_design")
    return fibonacci_grid(n)


def sh_matrix(order: int, azimuth, elevation) -> np.ndarray:
    """Real N3D spherical harmonics in ACN order.

    Parameters
    ----------
    order : int
        Maximum degree, at most ``MAX_ORDER``.
    azimuth, elevation : array_like
        Angles in radians, broadcast against each other.

    Returns
    -------
    Y : ndarray, shape ``(Q, (order+1)**2)``
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order {order} outside [0, {MAX_ORDER}]")
    az, el = np.broadcast_arrays(np.atleast_1d(np.asarray(azimuth, dtype=float)),
                                 np.atleast_1d(np.asarray(elevation, dtype=float)))
    az, el = az.ravel(), el.ravel()
    x = np.sin(el)
    Y = np.empty((len(az), num_channels(order)))
    for l in range(order + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            # lpmv carries the Condon-Shortley phase (-1)^m; undo it
            p = (-1.0) ** am * special.lpmv(am, l, x)
            norm = math.sqrt((2 * l + 1) * (2 - (m == 0))
                             * math.factorial(l - am) / math.factorial(l + am))
            trig = np.cos(m * az) if m >= 0 else np.sin(am * az)
            Y[:, l * l + l + m] = norm * p * trig
    return Y


def sh_eval(order: int, d: Direction) -> np.ndarray:
    """SH vector of length ``(order+1)**2`` for a single direction."""
    return sh_matrix(order, d.azimuth_rad, d.elevation_rad)[0]


def rotate_z(sh_signals: np.ndarray, angle: float) -> np.ndarray:
    """Re-express SH signals in a listener frame turned by `angle` about +z.

    A source at azimuth ``phi`` appears at ``phi - angle`` afterwards.
    `sh_signals` has channels on axis 0.
    """
    s = np.asarray(sh_signals, dtype=float)
    order = order_from_channels(s.shape[0])
    out = s.copy()
    for l in range(1, order + 1):
        for m in range(1, l + 1):
            c, sn = math.cos(m * angle), math.sin(m * angle)
            pos, neg = l * l + l + m, l * l + l - m
            out[pos] = c * s[pos] + sn * s[neg]
            out[neg] = -sn * s[pos] + c * s[neg]
    return out


@dataclass
class Dirir:
    """Directional impulse response extracted from an SRIR."""

    samples: np.ndarray
    direction: Direction
    source: object = field(default=None, repr=False)


@dataclass
class DirirSet:
    """All beams of one decomposition, stored as a ``[directions x N]`` matrix."""

    samples: np.ndarray
    grid: DirectionGrid
    sample_rate_hz: int
    source: object = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __getitem__(self, k: int) -> Dirir:
        return Dirir(self.samples[k], Direction(float(self.grid.azimuth[k]),
                                                float(self.grid.elevation[k])), self.source)

    def __iter__(self) -> Iterator[Dirir]:
        return (self[k] for k in range(len(self)))


def beam_weights(order: int, grid: DirectionGrid, degree_weights=None) -> np.ndarray:
    """Beamformer matrix ``[directions x channels]`` used by :func:`pwd`."""
    W = sh_matrix(order, grid.azimuth, grid.elevation)
    if degree_weights is not None:
        dw = np.asarray(degree_weights, dtype=float)
        if dw.shape != (order + 1,):
            raise ValueError(f"need {order + 1} per-degree weights")
        W = W * dw[channel_degrees(order)]
    return W


def max_re_weights(order: int) -> np.ndarray:
    """Per-degree max-rE taper ``P_l(r)``, `r` the largest root of ``P_{order+1}``.

    Pass as `degree_weights` to :func:`pwd` for narrower side lobes at the
    cost of a slightly wider main lobe.
    """
    r = np.polynomial.legendre.legroots([0] * (order + 1) + [1]).max()
    return np.array([special.eval_legendre(l, r) for l in range(order + 1)])


def pwd(srir, grid: DirectionGrid, degree_weights=None) -> DirirSet:
    """Plane-wave decomposition ``y(n, dir) = Y(dir)^T s(n)``.

    `srir` must be in N3D normalisation (as returned by the loaders).
    `degree_weights` optionally tapers each degree, e.g. max-rE weights;
    the default is the plain transpose beamformer.
    """
    s = np.asarray(srir.samples, dtype=float)
    order = order_from_channels(s.shape[0])
    W = beam_weights(order, grid, degree_weights)
    # row-by-row products keep a fixed reduction order per direction
    out = np.empty((len(grid), s.shape[1]))
    for k in range(len(grid)):
        out[k] = W[k] @ s
    return DirirSet(out, grid, srir.sample_rate_hz, srir)
