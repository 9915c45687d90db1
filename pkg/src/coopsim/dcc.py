"""Device-centric cooperation: per-slot decisions and virtual-queue updates.

All functions are pure.  Queue arguments are never mutated; updates return
fresh lists.
"""
from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

from .channels import ChannelSnapshot, max_weight_broadcast, max_weight_unicast
from .model import BroadcastKey, Matrix, QueueBank, SlotDecision, zero_matrix


def admission_rate(backlog: float, m_const: float, r_max: float) -> float:
    """Maximizer of ``m_const * log(1 + y) - backlog * y`` over ``0 <= y <= r_max``."""
    if backlog <= 0.0:
        return r_max
    y = m_const / backlog - 1.0
    if y <= 0.0:
        return 0.0
    return r_max if y > r_max else y


def dcc_rate_control(lambda_k: float, m_const: float, r_max: float) -> float:
    return admission_rate(lambda_k, m_const, r_max)


def dcc_cellular_schedule(k: int, lambda_k: float, eta_row: Sequence[float],
                          q_row: Sequence[float], cap: float, beta: float
                          ) -> Tuple[List[float], List[float], float]:
    """Cellular requests of device ``k``.

    The constraint only binds the largest entry, so every coordinate with a
    positive weight is set to ``cap`` and the rest to zero.  ``eta_row[n]``
    and ``q_row[n]`` are device k's counters for helping device n.
    Returns ``(g_row, x_row, request)`` with ``g_row[k]`` the self term.
    """
    n_dev = len(eta_row)
    g = [0.0] * n_dev
    x = [0.0] * n_dev
    if cap <= 0.0:
        return g, x, 0.0
    if lambda_k > 0.0:
        g[k] = x[k] = cap
    relay = cap - beta if cap > beta else 0.0
    for n in range(n_dev):
        if n != k and eta_row[n] - q_row[n] > 0.0:
            g[n] = cap
            x[n] = relay
    return g, x, max(x)


def dcc_local_weights(queues: QueueBank) -> Matrix:
    """``w[n][k] = lambda_k - eta_{n,k} + Q_{n,k}`` for device n serving device k."""
    lam, eta, q = queues.lam, queues.eta, queues.q_real
    n_dev = len(lam)
    return [[0.0 if n == k else lam[k] - eta[n][k] + q[n][k] for k in range(n_dev)]
            for n in range(n_dev)]


def dcc_unicast_schedule(queues: QueueBank, snapshot: ChannelSnapshot) -> Tuple[Matrix, Matrix]:
    n_dev = queues.n_devices
    g_local, h_local = zero_matrix(n_dev), zero_matrix(n_dev)
    choice = max_weight_unicast(dcc_local_weights(queues), snapshot.local)
    if choice is not None:
        n, k, rate = choice
        g_local[k][n] = rate
        h_local[n][k] = rate
    return g_local, h_local


def dcc_broadcast_schedule(queues: QueueBank, snapshot: ChannelSnapshot, search: str = "auto",
                           max_set_size: Optional[int] = None
                           ) -> Tuple[Dict[BroadcastKey, float], Matrix, Matrix]:
    n_dev = queues.n_devices
    g_local, h_local = zero_matrix(n_dev), zero_matrix(n_dev)
    f_bcast: Dict[BroadcastKey, float] = {}
    choice = max_weight_broadcast(dcc_local_weights(queues), snapshot.local, search, max_set_size)
    if choice is not None:
        n, receivers, f = choice
        f_bcast[(n, receivers)] = f
        for k in receivers:
            g_local[k][n] = f
            h_local[n][k] = f
    return f_bcast, g_local, h_local


def dcc_update_virtual_queues(queues: QueueBank, decision: SlotDecision,
                              delivered: Optional[Sequence[bool]] = None) -> QueueBank:
    """Advance ``lambda`` and ``eta`` by one slot.

    ``delivered[k]`` says whether device k's downlink carried its request
    this slot; when given, cellular virtual service on an erased downlink is
    not credited.  Local virtual service is always credited.
    """
    lam, eta = queues.lam, queues.eta
    g_cell, g_local, y = decision.g_cell, decision.g_local, decision.y
    n_dev = len(lam)
    ok = delivered if delivered is not None else [True] * n_dev
    new_lam = []
    for k in range(n_dev):
        served = (g_cell[k][k] if ok[k] else 0.0) + sum(g_local[k])
        rem = lam[k] - served
        new_lam.append((rem if rem > 0.0 else 0.0) + y[k])
    new_eta = zero_matrix(n_dev)
    for n in range(n_dev):
        row, g_row = eta[n], g_cell[n]
        out = new_eta[n]
        for k in range(n_dev):
            if k == n:
                continue
            rem = row[k] - (g_row[k] if ok[n] else 0.0)
            out[k] = (rem if rem > 0.0 else 0.0) + g_local[k][n]
    return QueueBank(new_lam, new_eta, queues.q_real, queues.mu, queues.nu)
