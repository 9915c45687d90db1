"""Channel realizations, feasible-rate regions and the cellular loss process.

Randomness is organized as independent streams, one per process (channel
states, cellular data loss, control-report loss, local loss).  Each stream
is addressable by slot: the uniforms for slot ``t`` depend only on
``(seed, stream, t)``, so any consumer positioned at slot ``t`` sees the
same draws regardless of what it read before.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ScheduleSearchError
from .model import BroadcastKey, Matrix, SimConfig

EXACT_BROADCAST_LIMIT = 12
_FEAS_TOL = 1e-12

_STREAM_IDS = {"channel": 0, "data_loss": 1, "control_loss": 2, "local_loss": 3}


@dataclass(frozen=True)
class ChannelSnapshot:
    """Realized capacities of one slot.

    ``local[n][k]`` is the capacity of the link from device n to device k;
    it is sampled per ordered pair and need not be symmetric.
    """

    cellular: List[float]
    local: Matrix

    @property
    def n_devices(self) -> int:
        return len(self.cellular)


class RandomStreams:
    """Slot-addressable uniform draws for every random process of a run."""

    chunk = 1024

    def __init__(self, seed: int, n_devices: int):
        self.seed = int(seed)
        self.n = n_devices
        self._widths = {
            "channel": n_devices + n_devices * n_devices,
            "data_loss": n_devices,
            "control_loss": n_devices,
            "local_loss": n_devices * n_devices,
        }
        self._cache: Dict[str, Tuple[int, list]] = {}

    def uniforms(self, stream: str, slot: int) -> List[float]:
        block = slot // self.chunk
        cached = self._cache.get(stream)
        if cached is None or cached[0] != block:
            ss = np.random.SeedSequence(self.seed, spawn_key=(_STREAM_IDS[stream], block))
            rows = np.random.Generator(np.random.PCG64(ss)).random(
                (self.chunk, self._widths[stream])
            )
            cached = (block, rows.tolist())
            self._cache[stream] = cached
        return cached[1][slot - block * self.chunk]


def sample_snapshot(streams: RandomStreams, slot: int, config: SimConfig) -> ChannelSnapshot:
    n = config.n_devices
    u = streams.uniforms("channel", slot)
    cell_rate, cell_p = config.cellular.rate, config.cellular.on_probability
    loc_rate, loc_p = config.local.rate, config.local.on_probability
    cellular = [cell_rate if u[k] < cell_p else 0.0 for k in range(n)]
    local = []
    for a in range(n):
        base = n + a * n
        local.append([0.0 if a == b else (loc_rate if u[base + b] < loc_p else 0.0)
                      for b in range(n)])
    return ChannelSnapshot(cellular, local)


def cellular_erasures(streams: RandomStreams, slot: int, config: SimConfig) -> List[bool]:
    """One erasure flag per cellular downlink for this slot."""
    p = config.cellular_loss_prob
    if p <= 0.0:
        return [False] * config.n_devices
    return [u < p for u in streams.uniforms("data_loss", slot)]


def apply_cellular_loss(streams: RandomStreams, slot: int, link: int, amount: float,
                        config: SimConfig) -> float:
    """The part of ``amount`` sent on downlink ``link`` that survives the slot."""
    return 0.0 if cellular_erasures(streams, slot, config)[link] else amount


def local_erasures(streams: RandomStreams, slot: int, config: SimConfig) -> List[List[bool]]:
    n, p = config.n_devices, config.local_loss_prob
    if p <= 0.0:
        return [[False] * n for _ in range(n)]
    u = streams.uniforms("local_loss", slot)
    return [[u[a * n + b] < p for b in range(n)] for a in range(n)]


# --------------------------------------------------------------------------
# Feasible-rate regions
# --------------------------------------------------------------------------

def cellular_feasible(requests: Sequence[float], snapshot: ChannelSnapshot) -> bool:
    if len(requests) != len(snapshot.cellular):
        return False
    return all(r <= c + _FEAS_TOL for r, c in zip(requests, snapshot.cellular))


def unicast_feasible(h: Matrix, snapshot: ChannelSnapshot) -> bool:
    active = [(n, k) for n, row in enumerate(h) for k, v in enumerate(row) if v > 0]
    if not active:
        return True
    if len(active) > 1:
        return False
    n, k = active[0]
    return n != k and h[n][k] <= snapshot.local[n][k] + _FEAS_TOL


def broadcast_rate(transmitter: int, receivers, snapshot: ChannelSnapshot) -> float:
    """Rate at which every member of ``receivers`` decodes a broadcast."""
    receivers = tuple(receivers)
    if not receivers:
        raise ValueError("broadcast receiver set must be nonempty")
    if transmitter in receivers:
        raise ValueError(f"transmitter {transmitter} cannot be in its own receiver set")
    row = snapshot.local[transmitter]
    return min(row[k] for k in receivers)


def broadcast_feasible(f_bcast: Dict[BroadcastKey, float], snapshot: ChannelSnapshot) -> bool:
    active = [(key, f) for key, f in f_bcast.items() if f > 0]
    if not active:
        return True
    if len(active) > 1:
        return False
    (n, receivers), f = active[0]
    try:
        return f <= broadcast_rate(n, receivers, snapshot) + _FEAS_TOL
    except ValueError:
        return False


# --------------------------------------------------------------------------
# Max-weight search over the local-area regions
# --------------------------------------------------------------------------

def max_weight_unicast(weights: Matrix, local: Matrix) -> Optional[Tuple[int, int, float]]:
    """Best single link for per-link weights ``weights[n][k]`` (n sends to k).

    Returns ``(n, k, rate)`` maximizing ``weights[n][k] * local[n][k]`` among
    strictly positive objectives, or None to idle.  Ties go to the smallest
    ``(k, n)`` in lexicographic order.
    """
    n_dev = len(weights)
    best, choice = 0.0, None
    for k in range(n_dev):
        for n in range(n_dev):
            if n == k:
                continue
            w = weights[n][k]
            if w <= 0.0:
                continue
            obj = w * local[n][k]
            if obj > best:
                best, choice = obj, (n, k, local[n][k])
    return choice


def _exact_best_for(n: int, w_row: Sequence[float], rate_row: Sequence[float], n_dev: int,
                    max_set_size: Optional[int]) -> Tuple[float, int, float]:
    """Best receiver set of transmitter ``n`` by full subset enumeration.

    Masks are visited in increasing encoding order; partial sums and minimum
    rates are built from the mask with its lowest bit cleared.
    """
    size = 1 << n_dev
    wsum = [0.0] * size
    rmin = [0.0] * size
    count = [0] * size
    best, best_mask, best_f = 0.0, 0, 0.0
    me = 1 << n
    for mask in range(1, size):
        low = mask & -mask
        k = low.bit_length() - 1
        rest = mask ^ low
        if rest:
            wsum[mask] = wsum[rest] + w_row[k]
            rmin[mask] = rmin[rest] if rmin[rest] < rate_row[k] else rate_row[k]
            count[mask] = count[rest] + 1
        else:
            wsum[mask], rmin[mask], count[mask] = w_row[k], rate_row[k], 1
        if mask & me:
            continue
        if max_set_size is not None and count[mask] > max_set_size:
            continue
        obj = rmin[mask] * wsum[mask]
        if obj > best:
            best, best_mask, best_f = obj, mask, rmin[mask]
    return best, best_mask, best_f


def _prefix_best_for(n: int, w_row: Sequence[float], rate_row: Sequence[float], n_dev: int,
                     max_set_size: Optional[int]) -> Tuple[float, int, float]:
    """Best receiver set among prefixes of the rate-sorted positive-weight list."""
    cand = sorted((k for k in range(n_dev) if k != n and w_row[k] > 0.0),
                  key=lambda k: (-rate_row[k], k))
    if max_set_size is not None:
        cand = cand[:max_set_size]
    best, best_mask, best_f = 0.0, 0, 0.0
    mask, acc = 0, 0.0
    for k in cand:
        mask |= 1 << k
        acc += w_row[k]
        f = rate_row[k]
        obj = f * acc
        if obj > best:
            best, best_mask, best_f = obj, mask, f
    return best, best_mask, best_f


def resolve_search(search: str, n_dev: int) -> str:
    if search == "auto":
        return "exact" if n_dev <= EXACT_BROADCAST_LIMIT else "greedy"
    if search == "exact" and n_dev > EXACT_BROADCAST_LIMIT:
        raise ScheduleSearchError(
            f"exact broadcast search supports at most {EXACT_BROADCAST_LIMIT} devices, "
            f"got {n_dev}; use greedy search"
        )
    if search not in ("exact", "greedy"):
        raise ValueError(f"unknown broadcast search mode {search!r}")
    return search


def max_weight_broadcast(weights: Matrix, local: Matrix, search: str = "auto",
                         max_set_size: Optional[int] = None
                         ) -> Optional[Tuple[int, Tuple[int, ...], float]]:
    """Best ``(transmitter, receivers, rate)`` for ``sum_{k in J} weights[n][k] * f``.

    ``f`` is the weakest-receiver rate of ``J``.  Ties go to the smallest
    transmitter, then the smallest subset encoding (bitmask over device
    indices).  Returns None when no objective is positive.
    """
    n_dev = len(weights)
    mode = resolve_search(search, n_dev)
    finder = _exact_best_for if mode == "exact" else _prefix_best_for
    best, choice = 0.0, None
    for n in range(n_dev):
        obj, mask, f = finder(n, weights[n], local[n], n_dev, max_set_size)
        if obj > best:
            best = obj
            choice = (n, tuple(k for k in range(n_dev) if mask >> k & 1), f)
    return choice
