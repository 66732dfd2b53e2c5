"""Block-based DFDN rendering.

Every delay group holds K delay lines, one per direction. Line ``(i, k)``
is read, passed through its absorbent filter ``G_ik`` and then

* tapped to output channel k with gain ``c_ik``,
* fed back into line ``(j, k)`` of every group j with gain ``A_ji``.

Channels never mix inside the loop, so channel k behaves as an ordinary FDN
tuned to the decay of direction k.

Blocks are split internally into sub-blocks no longer than the shortest
delay, so a whole sub-block of delay outputs is available before any of it
is written back. Results do not depend on the schedule in which callers
hand in blocks, only on the block size.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .network import DfdnConfig

log = logging.getLogger(__name__)

DEFAULT_BLOCK = 256
DEFAULT_RAMP = 4096
DENORMAL = 1e-30


def check_block_size(block_size: int) -> int:
    if block_size < 64 or block_size > 4096 or block_size & (block_size - 1):
        raise ValueError("block size must be a power of two in [64, 4096]")
    return block_size


@njit(cache=True)
def _cascade(x, g0, sos, zi, out):
    """Direct-form-II-transposed biquad cascade per line, in place on `zi`.

    x, out: [lines, n]; sos: [lines, sections, 6]; zi: [lines, sections, 2].
    """
    n_lines, n = x.shape
    n_sec = sos.shape[1]
    for l in range(n_lines):
        for t in range(n):
            v = x[l, t]
            for s in range(n_sec):
                y = sos[l, s, 0] * v + zi[l, s, 0]
                zi[l, s, 0] = sos[l, s, 1] * v - sos[l, s, 4] * y + zi[l, s, 1]
                zi[l, s, 1] = sos[l, s, 2] * v - sos[l, s, 5] * y
                v = y
            out[l, t] = g0[l] * v
        for s in range(n_sec):
            for j in range(2):
                if abs(zi[l, s, j]) < DENORMAL:
                    zi[l, s, j] = 0.0


@njit(cache=True)
def _read_lines(buf, pos, m, out):
    """out[l, t] = sample written m[l] steps before position pos + t."""
    n_lines, size = buf.shape
    n = out.shape[1]
    for l in range(n_lines):
        r = (pos - m[l]) % size
        for t in range(n):
            out[l, t] = buf[l, r]
            r += 1
            if r == size:
                r = 0


@njit(cache=True)
def _write_lines(buf, pos, new):
    n_lines, size = buf.shape
    n = new.shape[1]
    for l in range(n_lines):
        w = pos
        for t in range(n):
            v = new[l, t]
            buf[l, w] = v if abs(v) >= DENORMAL else 0.0
            w += 1
            if w == size:
                w = 0


_IDENTITY = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])


def _stack_filters(filters):
    """Flatten an N x K filter grid to (g0 [L], sos [L, S, 6]), identity padded."""
    flat = [f for row in filters for f in row]
    n_sec = max(1, max(len(f.sos) for f in flat))
    sos = np.tile(_IDENTITY, (len(flat), n_sec, 1))
    for l, f in enumerate(flat):
        sos[l, :len(f.sos)] = f.sos
    return np.array([f.g0 for f in flat]), sos


@dataclass
class _Update:
    input_gains: np.ndarray | None
    filters: list | None
    ramp: int


class DfdnRenderer:
    """Stateful single-stream renderer.

    Only one thread may call :meth:`process`; any thread may call
    :meth:`retarget`, whose update is picked up at the next block boundary.
    """

    def __init__(self, config: DfdnConfig, block_size: int = DEFAULT_BLOCK):
        self.config = config
        self.block_size = check_block_size(block_size)
        N, K = config.delays.shape
        self._N, self._K = N, K
        self._m = config.delays.ravel()
        self._sub = int(min(block_size, self._m.min()))
        self._len = int(self._m.max()) + self._sub
        self._buf = np.zeros((N * K, self._len))
        self._pos = 0
        self._b = config.input_gains.ravel().copy()
        self._c = config.output_gains.ravel().copy()
        self._set_filters(config.filters)
        self._zi = np.zeros(self._sos.shape[:2] + (2,))
        self._lock = threading.Lock()
        self._pending: _Update | None = None
        self._ramp = None
        self.hard_switches = 0

    def _set_filters(self, filters):
        g0, sos = _stack_filters(filters)
        if hasattr(self, "_sos") and sos.shape != self._sos.shape:
            raise ValueError("new filters must keep the number of sections")
        self._g0, self._sos = g0, sos

    def retarget(self, input_gains=None, filters=None, ramp: int = DEFAULT_RAMP) -> None:
        """Stage new input gains and/or absorbent filters.

        Input gains move linearly over `ramp` samples. Filters run with old and
        new coefficients side by side over the same ramp and their outputs are
        crossfaded. ``ramp=0`` switches at once and is counted in
        ``hard_switches``.
        """
        N, K = self._N, self._K
        if input_gains is not None:
            input_gains = np.asarray(input_gains, dtype=float)
            if input_gains.shape != (N, K):
                raise ValueError(f"input gains must be {N}x{K}")
        if filters is not None and (len(filters) != N or any(len(r) != K for r in filters)):
            raise ValueError(f"filters must be an {N}x{K} nested list")
        if ramp < 0:
            raise ValueError("ramp must be non-negative")
        with self._lock:
            self._pending = _Update(input_gains, filters, int(ramp))

    def _consume_update(self):
        with self._lock:
            upd, self._pending = self._pending, None
        if upd is None:
            return
        if self._ramp is not None:
            self._finish_ramp()
        new_b = self._b if upd.input_gains is None else upd.input_gains.ravel().copy()
        new_filters = upd.filters
        if upd.ramp == 0:
            self.hard_switches += 1
            log.warning("DFDN retarget without ramp")
            self._b = new_b
            if new_filters is not None:
                self._set_filters(new_filters)
            self._commit(new_filters, upd.input_gains)
            return
        ramp = {"n": 0, "len": upd.ramp, "b_old": self._b, "b_new": new_b, "filters": None}
        if new_filters is not None:
            g0, sos = _stack_filters(new_filters)
            if sos.shape != self._sos.shape:
                raise ValueError("new filters must keep the number of sections")
            ramp.update(filters=new_filters, g0=g0, sos=sos, zi=self._zi.copy())
        self._ramp = ramp

    def _finish_ramp(self):
        r, self._ramp = self._ramp, None
        self._b = r["b_new"]
        if r["filters"] is not None:
            self._g0, self._sos, self._zi = r["g0"], r["sos"], r["zi"]
        self._commit(r["filters"], r["b_new"].reshape(self._N, self._K))

    def _commit(self, filters, input_gains):
        changes = {}
        if filters is not None:
            changes["filters"] = filters
        if input_gains is not None:
            changes["input_gains"] = np.asarray(input_gains).reshape(self._N, self._K)
        if changes:
            self.config = replace(self.config, **changes)

    @staticmethod
    def _run_filters(x, g0, sos, zi):
        out = np.empty_like(x)
        _cascade(np.ascontiguousarray(x), g0, sos, zi, out)
        return out

    def process(self, x) -> np.ndarray:
        """Render one block of mono input to ``[K x len(x)]`` output."""
        x = np.asarray(x, dtype=float).ravel()
        if len(x) > self.block_size:
            raise ValueError(f"block longer than {self.block_size} samples")
        self._consume_update()
        y = np.empty((self._K, len(x)))
        for a in range(0, len(x), self._sub):
            y[:, a:a + self._sub] = self._process_sub(x[a:a + self._sub])
        return y

    def _process_sub(self, x):
        n = len(x)
        N, K = self._N, self._K
        ar = np.arange(n)
        s = np.empty((N * K, n))
        _read_lines(self._buf, self._pos, self._m, s)
        b = np.broadcast_to(self._b[:, None], (N * K, n))
        r = self._ramp
        if r is None:
            g = self._run_filters(s, self._g0, self._sos, self._zi)
        else:
            alpha = np.minimum((r["n"] + ar + 1) / r["len"], 1.0)
            g = self._run_filters(s, self._g0, self._sos, self._zi)
            if r["filters"] is not None:
                g_new = self._run_filters(s, r["g0"], r["sos"], r["zi"])
                g = g + alpha * (g_new - g)
            b = r["b_old"][:, None] + alpha * (r["b_new"] - r["b_old"])[:, None]
            r["n"] += n
            if r["n"] >= r["len"]:
                self._finish_ramp()
        g3 = g.reshape(N, K, n)
        y = np.einsum("ik,ikn->kn", self._c.reshape(N, K), g3)
        y += self.config.direct_gain[:, None] * x
        fb = np.tensordot(self.config.feedback_matrix, g3, axes=1).reshape(N * K, n)
        _write_lines(self._buf, self._pos, b * x + fb)
        self._pos = (self._pos + n) % self._len
        return y

    def state_energy(self) -> float:
        """Energy held in the delay lines (the last m_l samples of each)."""
        idx = (self._pos - 1 - np.arange(self._m.max())) % self._len
        live = np.arange(self._m.max())[None, :] < self._m[:, None]
        return float(np.sum(np.square(self._buf[:, idx]) * live))


def render(config: DfdnConfig, x, out_length: int | None = None,
           block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """Render mono `x` (zero-padded to `out_length`) to ``[K x out_length]``."""
    x = np.asarray(x, dtype=float).ravel()
    out_length = len(x) if out_length is None else int(out_length)
    if out_length <= 0:
        raise ValueError("output length must be positive")
    xin = np.zeros(out_length)
    xin[:min(len(x), out_length)] = x[:out_length]
    r = DfdnRenderer(config, block_size)
    y = np.empty((config.channels_per_group, out_length))
    for a in range(0, out_length, block_size):
        y[:, a:a + block_size] = r.process(xin[a:a + block_size])
    return y


def impulse(n: int) -> np.ndarray:
    x = np.zeros(n)
    x[0] = 1.0
    return x
