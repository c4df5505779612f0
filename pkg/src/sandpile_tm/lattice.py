"""Sparse stabilization on Z^3 (or Z^2) over a periodic background.

Only sites that receive a chip are materialized.  Each materialized site
lives in an open-addressing hash table keyed by its packed coordinates; the
worklist is a FIFO ring of keys.  A site's initial chip count is the
background tile value plus any finite delta.

A simulation window may be given.  Sites outside it are frozen: they collect
chips but never topple.  Compiled designs use this to emulate a finite slab
of an infinite periodic circuit.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numba as nb
import numpy as np

from .core import Outcome

OFF = 1 << 20
_MASK = (1 << 21) - 1
_SX = 1 << 42
_SY = 1 << 21
_HASH_MUL = np.uint64(11400714819323198485)

Site = tuple[int, int, int]


def pack(x: int, y: int, z: int) -> int:
    return ((x + OFF) << 42) | ((y + OFF) << 21) | (z + OFF)


def unpack(key: int) -> Site:
    return ((key >> 42) - OFF, ((key >> 21) & _MASK) - OFF, (key & _MASK) - OFF)


@nb.njit(cache=True)
def _slot(keys, key, bits):
    mask = keys.shape[0] - 1
    h = (np.uint64(key) * _HASH_MUL) >> np.uint64(64 - bits)
    i = np.int64(h)
    while True:
        k = keys[i]
        if k == key or k == -1:
            return i
        i = (i + 1) & mask


@nb.njit(cache=True)
def _background(key, tile, periods):
    x = (key >> 42) - OFF
    y = ((key >> 21) & _MASK) - OFF
    z = (key & _MASK) - OFF
    return tile[x % periods[0], y % periods[1], z % periods[2]]


@nb.njit(cache=True)
def _inside(key, lo, hi):
    x = (key >> 42) - OFF
    y = ((key >> 21) & _MASK) - OFF
    z = (key & _MASK) - OFF
    return lo[0] <= x <= hi[0] and lo[1] <= y <= hi[1] and lo[2] <= z <= hi[2]


@nb.njit(cache=True)
def _grow(keys, chips, odo, inq, bits):
    nbits = bits + 1
    size = 1 << nbits
    nkeys = np.full(size, -1, np.int64)
    nchips = np.zeros(size, np.int32)
    nodo = np.zeros(size, np.int32)
    ninq = np.zeros(size, np.uint8)
    for i in range(keys.shape[0]):
        k = keys[i]
        if k != -1:
            j = _slot(nkeys, k, nbits)
            nkeys[j] = k
            nchips[j] = chips[i]
            nodo[j] = odo[i]
            ninq[j] = inq[i]
    return nkeys, nchips, nodo, ninq, nbits


@nb.njit(cache=True)
def _lookup(keys, chips, odo, inq, count, bits, key, tile, periods):
    """Slot for ``key``, materializing it from the background if needed."""
    i = _slot(keys, key, bits)
    if keys[i] == -1:
        if 4 * (count + 1) > 3 * keys.shape[0]:
            keys, chips, odo, inq, bits = _grow(keys, chips, odo, inq, bits)
            i = _slot(keys, key, bits)
        keys[i] = key
        chips[i] = _background(key, tile, periods)
        count += 1
    return i, keys, chips, odo, inq, count, bits


@nb.njit(cache=True)
def _run(keys, chips, odo, inq, count, bits, queue, qhead, qlen,
         tile, periods, lo, hi, dims, budget, watch):
    deg = 2 * dims
    nbr = np.empty(6, np.int64)
    nbr[0] = _SX
    nbr[1] = -_SX
    nbr[2] = _SY
    nbr[3] = -_SY
    nbr[4] = 1
    nbr[5] = -1
    done = 0
    watch_step = -1
    while qlen > 0 and done < budget:
        key = queue[qhead]
        qhead = (qhead + 1) & (queue.shape[0] - 1)
        qlen -= 1
        i = _slot(keys, key, bits)
        inq[i] = 0
        if chips[i] < deg or not _inside(key, lo, hi):
            continue
        chips[i] -= deg
        odo[i] += 1
        done += 1
        if key == watch and watch_step < 0:
            watch_step = done
        if chips[i] >= deg:
            inq[i] = 1
            if qlen == queue.shape[0]:
                queue, qhead = _grow_queue(queue, qhead, qlen)
            queue[(qhead + qlen) & (queue.shape[0] - 1)] = key
            qlen += 1
        for d in range(deg):
            nk = key + nbr[d]
            j, keys, chips, odo, inq, count, bits = _lookup(
                keys, chips, odo, inq, count, bits, nk, tile, periods)
            chips[j] += 1
            if chips[j] >= deg and inq[j] == 0 and _inside(nk, lo, hi):
                inq[j] = 1
                if qlen == queue.shape[0]:
                    queue, qhead = _grow_queue(queue, qhead, qlen)
                queue[(qhead + qlen) & (queue.shape[0] - 1)] = nk
                qlen += 1
    return keys, chips, odo, inq, count, bits, queue, qhead, qlen, done, watch_step


@nb.njit(cache=True)
def _grow_queue(queue, qhead, qlen):
    size = queue.shape[0]
    nq = np.empty(2 * size, np.int64)
    for k in range(qlen):
        nq[k] = queue[(qhead + k) & (size - 1)]
    return nq, 0


class WindowError(RuntimeError):
    """Toppling came too close to the edge of a dense simulation box."""


class LatticeResult:
    """Outcome of a run.

    The odometer dict is built on first access (large runs are usually
    queried site by site), so read it before resuming the simulator.
    """

    def __init__(self, odometer, outcome: Outcome, topplings: int, watch_step: int | None = None):
        self._odometer = odometer
        self.outcome = outcome
        self.topplings = topplings
        self.watch_step = watch_step

    @property
    def odometer(self) -> dict[Site, int]:
        if callable(self._odometer):
            self._odometer = self._odometer()
        return self._odometer


class LatticeSim:
    """Resumable sparse simulation of background + delta on Z^3 or Z^2.

    ``tile`` is the periodic background (shape (nx, ny, nz); for Z^2 use
    nz = 1 and ``dims=2``).  ``window`` is an optional (lo, hi) pair of
    inclusive corner sites outside which nothing topples.
    """

    def __init__(
        self,
        tile: np.ndarray,
        delta: Mapping[Site, int] | Iterable[tuple[Site, int]] = (),
        *,
        dims: int = 3,
        window: tuple[Site, Site] | None = None,
    ):
        tile = np.asarray(tile)
        if tile.ndim == 2:
            tile = tile[:, :, None]
        if tile.ndim != 3:
            raise ValueError("tile must be 3-dimensional")
        if dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        if dims == 2 and tile.shape[2] != 1:
            raise ValueError("Z^2 tiles need nz == 1")
        self.tile = np.ascontiguousarray(tile, dtype=np.int32)
        self.periods = np.array(self.tile.shape, dtype=np.int64)
        self.dims = dims
        big = OFF - 8
        if window is None:
            self.lo = np.array([-big, -big, -big], np.int64)
            self.hi = np.array([big, big, big], np.int64)
        else:
            self.lo = np.array(window[0], np.int64)
            self.hi = np.array(window[1], np.int64)
        if dims == 2:
            self.lo[2] = 0
            self.hi[2] = 0
        self.bits = 10
        self.keys = np.full(1 << self.bits, -1, np.int64)
        self.chips = np.zeros(1 << self.bits, np.int32)
        self.odo = np.zeros(1 << self.bits, np.int32)
        self.inq = np.zeros(1 << self.bits, np.uint8)
        self.count = 0
        self.queue = np.empty(1 << 10, np.int64)
        self.qhead = 0
        self.qlen = 0
        self.topplings = 0
        items = delta.items() if isinstance(delta, Mapping) else delta
        for site, k in sorted(items):
            self.add_chips(site, k)

    def _site_key(self, site) -> int:
        x, y, z = (tuple(site) + (0,))[:3]
        if self.dims == 2 and z != 0:
            raise ValueError("Z^2 sites must have z == 0")
        return pack(int(x), int(y), int(z))

    def _slot(self, key: int) -> int:
        i, self.keys, self.chips, self.odo, self.inq, self.count, self.bits = _lookup(
            self.keys, self.chips, self.odo, self.inq, self.count, self.bits,
            np.int64(key), self.tile, self.periods)
        return int(i)

    def add_chips(self, site, k: int = 1) -> None:
        key = self._site_key(site)
        i = self._slot(key)
        self.chips[i] += k
        if self.chips[i] >= 2 * self.dims and not self.inq[i] and _inside(key, self.lo, self.hi):
            self.inq[i] = 1
            if self.qlen == self.queue.shape[0]:
                self.queue, self.qhead = _grow_queue(self.queue, self.qhead, self.qlen)
            self.queue[(self.qhead + self.qlen) % self.queue.shape[0]] = key
            self.qlen += 1

    def chips_at(self, site) -> int:
        key = self._site_key(site)
        i = int(_slot(self.keys, np.int64(key), self.bits))
        if self.keys[i] == -1:
            return int(_background(np.int64(key), self.tile, self.periods))
        return int(self.chips[i])

    def odometer_at(self, site) -> int:
        key = self._site_key(site)
        i = int(_slot(self.keys, np.int64(key), self.bits))
        return 0 if self.keys[i] == -1 else int(self.odo[i])

    def set_window(self, window: tuple[Site, Site]) -> None:
        """Move the window.

        Queued sites that fall outside it are dropped and stay frozen; unstable
        sites that come inside are queued.
        """
        self.lo = np.array(window[0], np.int64)
        self.hi = np.array(window[1], np.int64)
        if self.dims == 2:
            self.lo[2] = self.hi[2] = 0
        cand = np.flatnonzero((self.keys != -1) & (self.chips >= 2 * self.dims) & (self.inq == 0))
        for i in cand:
            key = self.keys[i]
            if _inside(key, self.lo, self.hi):
                self.inq[i] = 1
                if self.qlen == self.queue.shape[0]:
                    self.queue, self.qhead = _grow_queue(self.queue, self.qhead, self.qlen)
                self.queue[(self.qhead + self.qlen) % self.queue.shape[0]] = key
                self.qlen += 1

    def run(self, budget: int, watch: Site | None = None) -> LatticeResult:
        if budget < 0:
            raise ValueError("budget must be non-negative")
        wkey = np.int64(self._site_key(watch)) if watch is not None else np.int64(-1)
        (self.keys, self.chips, self.odo, self.inq, self.count, self.bits, self.queue,
         self.qhead, self.qlen, done, wstep) = _run(
            self.keys, self.chips, self.odo, self.inq, self.count, self.bits,
            self.queue, self.qhead, self.qlen, self.tile, self.periods,
            self.lo, self.hi, self.dims, np.int64(budget), wkey)
        wstep = int(wstep) + self.topplings if wstep >= 0 else None
        self.topplings += int(done)
        outcome = Outcome.STABLE if self.qlen == 0 else Outcome.BUDGET_EXHAUSTED
        return LatticeResult(self.odometer, outcome, self.topplings, wstep)

    def stable(self) -> bool:
        return self.qlen == 0

    def odometer(self) -> dict[Site, int]:
        idx = np.flatnonzero((self.keys != -1) & (self.odo > 0))
        return {unpack(int(k)): int(c) for k, c in zip(self.keys[idx], self.odo[idx])}

    def materialized(self) -> dict[Site, int]:
        """Chip counts of every materialized site."""
        idx = np.flatnonzero(self.keys != -1)
        return {unpack(int(k)): int(c) for k, c in zip(self.keys[idx], self.chips[idx])}

    def odometer_array(self, sites: np.ndarray) -> np.ndarray:
        """Vectorized odometer lookup for an (m, 3) array of sites."""
        sites = np.asarray(sites, dtype=np.int64)
        keys = ((sites[:, 0] + OFF) << 42) | ((sites[:, 1] + OFF) << 21) | (sites[:, 2] + OFF)
        return _odo_many(self.keys, self.odo, keys, self.bits)


@nb.njit(cache=True)
def _odo_many(keys, odo, query, bits):
    out = np.zeros(query.shape[0], np.int64)
    for q in range(query.shape[0]):
        i = _slot(keys, query[q], bits)
        if keys[i] != -1:
            out[q] = odo[i]
    return out


def stabilize_dense_box(
    tile: np.ndarray,
    delta: Mapping[Site, int],
    lo: Site,
    hi: Site,
    budget: int,
    margin: int = 2,
) -> LatticeResult:
    """Plain dense simulation on an explicit box, used as an oracle.

    Raises :class:`WindowError` if any toppling happens within ``margin``
    sites of the box boundary, since the clipped result could then differ
    from the infinite one.
    """
    tile = np.asarray(tile)
    lo_a, hi_a = np.array(lo), np.array(hi)
    shape = tuple(hi_a - lo_a + 1)
    grids = np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo_a, hi_a)], indexing="ij")
    chips = tile[grids[0] % tile.shape[0], grids[1] % tile.shape[1], grids[2] % tile.shape[2]].astype(np.int64)
    for (x, y, z), k in delta.items():
        chips[x - lo_a[0], y - lo_a[1], z - lo_a[2]] += k
    odo = np.zeros(shape, np.int64)
    done = 0
    from collections import deque

    work = deque(map(tuple, np.argwhere(chips >= 6)))
    while work and done < budget:
        p = work.popleft()
        if chips[p] < 6:
            continue
        if min(p[a] for a in range(3)) < margin or any(p[a] > shape[a] - 1 - margin for a in range(3)):
            raise WindowError(f"toppling at {tuple(np.array(p) + lo_a)} within {margin} of the box edge")
        chips[p] -= 6
        odo[p] += 1
        done += 1
        if chips[p] >= 6:
            work.append(p)
        for a in range(3):
            for s in (-1, 1):
                q = list(p)
                q[a] += s
                q = tuple(q)
                chips[q] += 1
                if chips[q] == 6:
                    work.append(q)
    odometer = {tuple(int(c) for c in np.array(p) + lo_a): int(odo[p]) for p in map(tuple, np.argwhere(odo > 0))}
    outcome = Outcome.STABLE if not np.any(chips >= 6) else Outcome.BUDGET_EXHAUSTED
    return LatticeResult(odometer, outcome, done)


def stabilize_dense_auto(tile, delta, budget: int, start_radius: int = 8, max_radius: int = 256) -> LatticeResult:
    """Dense box oracle that doubles its box whenever toppling nears the edge."""
    sites = list(delta) or [(0, 0, 0)]
    cx = [int(np.mean([s[a] for s in sites])) for a in range(3)]
    spread = max((abs(s[a] - cx[a]) for s in sites for a in range(3)), default=0)
    r = max(start_radius, spread + 4)
    while True:
        lo = tuple(c - r for c in cx)
        hi = tuple(c + r for c in cx)
        try:
            return stabilize_dense_box(tile, delta, lo, hi, budget)
        except WindowError:
            if 2 * r > max_radius:
                raise
            r *= 2
