"""Source-centric cooperation: decisions, queue updates and the control plane.

The source decides admission and cellular pushes from a ``ControlPlaneView``
assembled from per-device uplink reports.  Local-area decisions are made at
the devices from their own (true) relay backlogs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .channels import ChannelSnapshot, RandomStreams, max_weight_broadcast, max_weight_unicast
from .dcc import admission_rate
from .model import BroadcastKey, Matrix, SlotDecision, zero_matrix


@dataclass
class ControlPlaneView:
    """The source's latest copy of device state.

    ``nu_view[n]`` and ``chan_view[n]`` come from device n's last report
    that got through; ``age[n]`` counts slots since that report (0 = fresh).
    """

    nu_view: Matrix
    chan_view: List[float]
    age: List[int]

    @property
    def fresh(self) -> List[bool]:
        return [a == 0 for a in self.age]


def fresh_view(n_devices: int) -> ControlPlaneView:
    return ControlPlaneView(zero_matrix(n_devices), [0.0] * n_devices, [0] * n_devices)


def report_bytes(n_devices: int, control_msg_bytes: int) -> int:
    """Size of one device's uplink report: N-1 queue entries plus one channel entry."""
    return control_msg_bytes * n_devices


def control_plane_step(streams: RandomStreams, slot: int, nu: Matrix,
                       cellular_caps: Sequence[float], view: ControlPlaneView,
                       loss_prob: float) -> ControlPlaneView:
    """Deliver (or erase) every device's report for this slot."""
    n_dev = len(cellular_caps)
    if loss_prob > 0.0:
        erased = [u < loss_prob for u in streams.uniforms("control_loss", slot)]
    else:
        erased = [False] * n_dev
    return apply_reports(erased, nu, cellular_caps, view)


def apply_reports(erased: Sequence[bool], nu: Matrix, cellular_caps: Sequence[float],
                  view: ControlPlaneView) -> ControlPlaneView:
    nu_view, chan_view, age = [], [], []
    for n, lost in enumerate(erased):
        if lost:
            nu_view.append(view.nu_view[n])
            chan_view.append(view.chan_view[n])
            age.append(view.age[n] + 1)
        else:
            nu_view.append(list(nu[n]))
            chan_view.append(cellular_caps[n])
            age.append(0)
    return ControlPlaneView(nu_view, chan_view, age)


def scc_rate_control(mu_k: float, m_const: float, r_max: float) -> float:
    return admission_rate(mu_k, m_const, r_max)


def scc_cellular_schedule(k: int, mu_k: float, nu_view_col: Sequence[float],
                          chan_view: Sequence[float],
                          usable: Optional[Sequence[bool]] = None) -> List[float]:
    """Pushes for flow ``k``: entry ``n`` is ``x_{n,k}``, the rate toward n for k.

    ``nu_view_col[n]`` is the source's view of ``nu_{n,k}``.  Downlinks with
    ``usable[n]`` false are not scheduled.
    """
    n_dev = len(chan_view)
    x = [0.0] * n_dev
    if mu_k <= 0.0:
        return x
    for n in range(n_dev):
        if usable is not None and not usable[n]:
            continue
        if n == k or mu_k - nu_view_col[n] > 0.0:
            x[n] = chan_view[n]
    return x


def scc_unicast_schedule(nu: Matrix, snapshot: ChannelSnapshot) -> Matrix:
    n_dev = len(nu)
    h_local = zero_matrix(n_dev)
    choice = max_weight_unicast(nu, snapshot.local)
    if choice is not None:
        n, k, rate = choice
        h_local[n][k] = rate
    return h_local


def scc_broadcast_schedule(nu: Matrix, snapshot: ChannelSnapshot, search: str = "auto",
                           max_set_size: Optional[int] = None
                           ) -> Tuple[Dict[BroadcastKey, float], Matrix]:
    n_dev = len(nu)
    h_local = zero_matrix(n_dev)
    f_bcast: Dict[BroadcastKey, float] = {}
    choice = max_weight_broadcast(nu, snapshot.local, search, max_set_size)
    if choice is not None:
        n, receivers, f = choice
        f_bcast[(n, receivers)] = f
        for k in receivers:
            h_local[n][k] += f
    return f_bcast, h_local


def scc_update_queues(mu: Sequence[float], nu: Matrix, decision: SlotDecision,
                      delivered_cellular: Matrix, local_sent: Optional[Matrix] = None
                      ) -> Tuple[List[float], Matrix]:
    """Advance ``mu`` and ``nu`` by one slot.

    The source queue drains by what it scheduled; relay queues receive only
    what the downlink delivered.  ``local_sent`` overrides the scheduled
    ``h_local`` with the amounts actually moved (backlog-capped, post-loss).
    """
    x_cell, x_admit = decision.x_cell, decision.x_admit
    h = local_sent if local_sent is not None else decision.h_local
    n_dev = len(mu)
    new_mu = []
    for k in range(n_dev):
        rem = mu[k] - sum(x_cell[n][k] for n in range(n_dev))
        new_mu.append((rem if rem > 0.0 else 0.0) + x_admit[k])
    new_nu = zero_matrix(n_dev)
    for n in range(n_dev):
        for k in range(n_dev):
            if n != k:
                rem = nu[n][k] - h[n][k]
                new_nu[n][k] = (rem if rem > 0.0 else 0.0) + delivered_cellular[n][k]
    return new_mu, new_nu
