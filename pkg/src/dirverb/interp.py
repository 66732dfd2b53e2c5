"""Inverse-distance-weighted interpolation of decay maps between positions.

Interpolation happens on the analysed parameters (T60, EDT, EDC0), never on
audio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decay import DirectionalDecayMap

EXACT_HIT_M = 1e-6


@dataclass
class IdwQuery:
    target: np.ndarray
    neighbor_ids: list[int]
    distances: np.ndarray
    weights: np.ndarray

    @property
    def M(self) -> int:
        return len(self.neighbor_ids)


def weights_from_distances(distances, power: float = 1.0) -> np.ndarray:
    """``w_i = d_i^-p / sum_j d_j^-p`` for strictly positive distances."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0 or np.any(d <= 0):
        raise ValueError("distances must be non-empty and positive")
    inv = d ** -power
    return inv / inv.sum()


def idw_weights(target, positions, m_nearest: int | None = 4,
                power: float = 1.0) -> IdwQuery:
    """Weights of the `m_nearest` closest positions to `target`.

    ``m_nearest=None`` uses every position. A target within 1 um of a data
    point returns that point alone with weight 1.
    """
    p = np.atleast_2d(np.asarray(positions, dtype=float))
    if p.size == 0:
        raise ValueError("no positions to interpolate from")
    if m_nearest is not None and m_nearest < 1:
        raise ValueError("m_nearest must be at least 1")
    target = np.asarray(target, dtype=float).reshape(3)
    d = np.linalg.norm(p - target, axis=1)
    # stable sort: ties resolve by input order
    order = np.argsort(d, kind="stable")
    if d[order[0]] < EXACT_HIT_M:
        return IdwQuery(target, [int(order[0])], d[order[:1]], np.ones(1))
    m = len(p) if m_nearest is None else min(m_nearest, len(p))
    sel = order[:m]
    return IdwQuery(target, [int(i) for i in sel], d[sel], weights_from_distances(d[sel], power))


def interpolate_map(maps, query: IdwQuery) -> DirectionalDecayMap:
    """Weighted average of neighbour maps, cell by cell.

    `maps` is the full list the query indices refer to. T60, EDT and EDC0
    (in dB) are averaged with the query weights; the result sits at the
    query target. An exact hit returns an unmodified copy of that map.
    """
    chosen = [maps[i] for i in query.neighbor_ids]
    ref = chosen[0]
    for m in chosen[1:]:
        if m.grid != ref.grid or m.bands != ref.bands:
            raise ValueError("maps must share direction grid and bands")
    if query.M == 1:
        return DirectionalDecayMap(ref.grid, ref.bands, ref.t60_s.copy(), ref.edt_s.copy(),
                                   ref.edc0_db.copy(), ref.mean_t60_s.copy(),
                                   ref.position.copy(), ref.flags.copy())
    w = query.weights

    def blend(attr):
        stack = np.stack([getattr(m, attr) for m in chosen])
        return np.tensordot(w, stack, axes=1)

    t60 = blend("t60_s")
    flags = np.max(np.stack([m.flags for m in chosen]), axis=0)
    return DirectionalDecayMap(ref.grid, ref.bands, t60, blend("edt_s"), blend("edc0_db"),
                               t60.mean(axis=1), query.target, flags)
