"""The slotted simulation loop.

Per slot: sample channels, (ScC) refresh the control-plane view, rate
control, cellular scheduling, local-area scheduling, cellular loss, real
queue updates, (DcC) virtual queue updates, then emit a ``TraceRecord``.
Local transfers never move more than the sender holds at slot start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

from . import dcc, scc
from .channels import (ChannelSnapshot, RandomStreams, cellular_erasures, local_erasures,
                       sample_snapshot)
from .errors import ConfigError
from .model import (LocalMode, Matrix, QueueBank, Scheme, SimConfig, SlotDecision,
                    fresh_queue_bank, validate_config, zero_matrix)


@dataclass(frozen=True)
class TraceRecord:
    slot: int
    decision: SlotDecision
    queues_after: QueueBank
    delivered_cellular: Matrix
    delivered_local: Matrix
    control_bytes_uplink: int
    data_bytes_down: int

    def goodput(self) -> List[float]:
        """Content that reached each device this slot (direct plus relayed)."""
        dc, dl = self.delivered_cellular, self.delivered_local
        n_dev = len(dc)
        return [dc[k][k] + sum(dl[n][k] for n in range(n_dev)) for k in range(n_dev)]

    def admitted(self, scheme: Scheme) -> List[float]:
        return self.decision.y if scheme is Scheme.DCC else self.decision.x_admit


@dataclass(frozen=True)
class Trace:
    config: SimConfig
    records: Tuple[TraceRecord, ...]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class SimState:
    queues: QueueBank
    view: scc.ControlPlaneView
    streams: RandomStreams


def initial_state(config: SimConfig) -> SimState:
    return SimState(fresh_queue_bank(config), scc.fresh_view(config.n_devices),
                    RandomStreams(config.seed, config.n_devices))


def _local_transfers(h_local: Matrix, backlog: Matrix, lost: List[List[bool]]) -> Matrix:
    n_dev = len(h_local)
    moved = zero_matrix(n_dev)
    for n in range(n_dev):
        row = h_local[n]
        for k in range(n_dev):
            h = row[k]
            if h > 0.0 and not lost[n][k]:
                held = backlog[n][k]
                moved[n][k] = h if h < held else held
    return moved


def _step_dcc(state: SimState, config: SimConfig, slot: int, snap: ChannelSnapshot
              ) -> Tuple[QueueBank, SlotDecision, Matrix, Matrix]:
    q = state.queues
    n_dev = config.n_devices
    if config.fixed_admission is not None:
        y = [config.fixed_admission] * n_dev
    else:
        cap, m = config.admission_cap, config.m_const
        y = [dcc.dcc_rate_control(lam, m, cap) for lam in q.lam]

    g_cell, x_cell, request = [], [], []
    for k in range(n_dev):
        g_row, x_row, req = dcc.dcc_cellular_schedule(
            k, q.lam[k], q.eta[k], q.q_real[k], snap.cellular[k], config.beta)
        g_cell.append(g_row)
        x_cell.append(x_row)
        request.append(req)

    if n_dev < 2:
        f_bcast, g_local, h_local = {}, zero_matrix(n_dev), zero_matrix(n_dev)
    elif config.local_mode is LocalMode.BROADCAST:
        f_bcast, g_local, h_local = dcc.dcc_broadcast_schedule(q, snap, config.broadcast_search)
    else:
        g_local, h_local = dcc.dcc_unicast_schedule(q, snap)
        f_bcast = {}

    decision = SlotDecision(y, [0.0] * n_dev, g_cell, x_cell, g_local, h_local, f_bcast, request)

    erased = cellular_erasures(state.streams, slot, config)
    delivered_cell = [[0.0] * n_dev if erased[k] else list(x_cell[k]) for k in range(n_dev)]
    moved = _local_transfers(h_local, q.q_real, local_erasures(state.streams, slot, config))

    q_real = zero_matrix(n_dev)
    for n in range(n_dev):
        for k in range(n_dev):
            if n != k:
                rem = q.q_real[n][k] - moved[n][k]
                q_real[n][k] = (rem if rem > 0.0 else 0.0) + delivered_cell[n][k]

    with_real = QueueBank(q.lam, q.eta, q_real, q.mu, q.nu)
    feedback = [not e for e in erased] if config.dcc_loss_feedback else None
    queues = dcc.dcc_update_virtual_queues(with_real, decision, feedback)
    return queues, decision, delivered_cell, moved


def _step_scc(state: SimState, config: SimConfig, slot: int, snap: ChannelSnapshot
              ) -> Tuple[QueueBank, SlotDecision, Matrix, Matrix]:
    q = state.queues
    n_dev = config.n_devices
    view = scc.control_plane_step(state.streams, slot, q.nu, snap.cellular, state.view,
                                  config.cellular_loss_prob)
    state.view = view

    if config.fixed_admission is not None:
        x_admit = [config.fixed_admission] * n_dev
    else:
        cap, m = config.admission_cap, config.m_const
        x_admit = [scc.scc_rate_control(mu, m, cap) for mu in q.mu]

    usable = view.fresh if config.scc_stale_csi == "skip" else None
    x_cell = zero_matrix(n_dev)
    for k in range(n_dev):
        col = scc.scc_cellular_schedule(
            k, q.mu[k], [view.nu_view[n][k] for n in range(n_dev)], view.chan_view, usable)
        for n in range(n_dev):
            x_cell[n][k] = col[n]
    request = [max(row) for row in x_cell]

    if n_dev < 2:
        f_bcast, h_local = {}, zero_matrix(n_dev)
    elif config.local_mode is LocalMode.BROADCAST:
        f_bcast, h_local = scc.scc_broadcast_schedule(q.nu, snap, config.broadcast_search)
    else:
        h_local = scc.scc_unicast_schedule(q.nu, snap)
        f_bcast = {}

    decision = SlotDecision([0.0] * n_dev, x_admit, zero_matrix(n_dev), x_cell,
                            zero_matrix(n_dev), h_local, f_bcast, request)

    erased = cellular_erasures(state.streams, slot, config)
    delivered_cell = []
    for n in range(n_dev):
        cap = snap.cellular[n]
        if erased[n]:
            delivered_cell.append([0.0] * n_dev)
        else:
            delivered_cell.append([v if v < cap else cap for v in x_cell[n]])
    moved = _local_transfers(h_local, q.nu, local_erasures(state.streams, slot, config))
    mu, nu = scc.scc_update_queues(q.mu, q.nu, decision, delivered_cell, moved)
    return QueueBank(q.lam, q.eta, q.q_real, mu, nu), decision, delivered_cell, moved


def step(state: SimState, config: SimConfig, slot: int) -> Tuple[SimState, TraceRecord]:
    """Advance ``state`` by one slot.

    Queue banks are never mutated after construction, so the record and the
    next state may share them.
    """
    snap = sample_snapshot(state.streams, slot, config)
    n_dev = config.n_devices
    if config.scheme is Scheme.DCC:
        queues, decision, dcell, dloc = _step_dcc(state, config, slot, snap)
        control = n_dev * config.control_msg_bytes
    else:
        queues, decision, dcell, dloc = _step_scc(state, config, slot, snap)
        control = n_dev * scc.report_bytes(n_dev, config.control_msg_bytes)
    down = sum(max(row) for row in dcell) * config.data_packet_bytes
    record = TraceRecord(slot, decision, queues, dcell, dloc, control, int(round(down)))
    state.queues = queues
    return state, record


def check_config(config: SimConfig) -> None:
    problems = validate_config(config)
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))


def iter_records(config: SimConfig) -> Iterator[TraceRecord]:
    """Yield the records of a run one slot at a time (constant memory)."""
    check_config(config)
    state = initial_state(config)
    for slot in range(config.horizon):
        state, record = step(state, config, slot)
        yield record


def run(config: SimConfig) -> Trace:
    return Trace(config, tuple(iter_records(config)))


def all_queues_finite(queues: QueueBank) -> bool:
    values = list(queues.lam) + list(queues.mu)
    for mat in (queues.eta, queues.q_real, queues.nu):
        for row in mat:
            values.extend(row)
    return all(math.isfinite(v) and v >= 0.0 for v in values)
