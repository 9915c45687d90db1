"""Domain types, configuration schema and the flat config-file format.

Every (n, k) matrix in this package is a plain ``N x N`` list of lists.
Off-diagonal entries carry pair quantities; the diagonal is unused and kept
at zero, except for ``SlotDecision.g_cell`` and ``SlotDecision.x_cell``
whose diagonal holds the self-traffic term.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError

Matrix = List[List[float]]
BroadcastKey = Tuple[int, Tuple[int, ...]]


class Scheme(str, Enum):
    DCC = "DcC"
    SCC = "ScC"


class LocalMode(str, Enum):
    UNICAST = "Unicast"
    BROADCAST = "Broadcast"


BROADCAST_SEARCH_MODES = ("auto", "exact", "greedy")
STALE_CSI_POLICIES = ("skip", "hold")


@dataclass(frozen=True)
class ChannelConfig:
    """Per-slot capacity distribution of one class of links.

    ``Constant(r)`` is ``BernoulliOnOff(r, 1.0)``: the link offers ``rate``
    with probability ``p_on`` and nothing otherwise, i.i.d. across slots.
    """

    kind: str = "Constant"
    rate: float = 1.0
    p_on: float = 1.0

    @classmethod
    def constant(cls, rate: float) -> "ChannelConfig":
        return cls("Constant", float(rate), 1.0)

    @classmethod
    def bernoulli(cls, rate: float, p_on: float) -> "ChannelConfig":
        return cls("BernoulliOnOff", float(rate), float(p_on))

    @property
    def on_probability(self) -> float:
        return 1.0 if self.kind == "Constant" else self.p_on

    @property
    def mean(self) -> float:
        return self.rate * self.on_probability

    def violations(self, label: str) -> List[str]:
        out = []
        if self.kind not in ("Constant", "BernoulliOnOff"):
            out.append(f"{label}: unknown channel kind {self.kind!r}")
        if not (self.rate >= 0.0 and math.isfinite(self.rate)):
            out.append(f"{label}: rate must be a finite value >= 0 (got {self.rate})")
        if not (0.0 <= self.p_on <= 1.0):
            out.append(f"{label}: p_on must lie in [0, 1] (got {self.p_on})")
        if self.kind == "Constant" and self.p_on != 1.0:
            out.append(f"{label}: Constant channel requires p_on = 1")
        return out

    def encode(self) -> str:
        if self.kind == "Constant":
            return f"Constant({self.rate!r})"
        return f"BernoulliOnOff({self.rate!r}, {self.p_on!r})"

    @classmethod
    def parse(cls, text: str) -> "ChannelConfig":
        m = re.fullmatch(r"\s*(\w+)\s*\(([^)]*)\)\s*", text)
        if not m:
            raise ConfigError(f"cannot parse channel description {text!r}")
        kind, args = m.group(1), [a.strip() for a in m.group(2).split(",") if a.strip()]
        try:
            values = [float(a) for a in args]
        except ValueError as exc:
            raise ConfigError(f"non-numeric channel argument in {text!r}") from exc
        if kind == "Constant" and len(values) == 1:
            return cls.constant(values[0])
        if kind == "BernoulliOnOff" and len(values) == 2:
            return cls.bernoulli(values[0], values[1])
        raise ConfigError(f"expected Constant(rate) or BernoulliOnOff(rate, p_on), got {text!r}")


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run."""

    n_devices: int = 3
    scheme: Scheme = Scheme.DCC
    local_mode: LocalMode = LocalMode.UNICAST
    m_const: float = 50.0
    # None resolves to twice the cellular rate (see ``admission_cap``).
    r_max: Optional[float] = None
    beta: float = 0.001
    cellular: ChannelConfig = field(default_factory=lambda: ChannelConfig.constant(1.0))
    local: ChannelConfig = field(default_factory=lambda: ChannelConfig.constant(1.0))
    cellular_loss_prob: float = 0.0
    local_loss_prob: float = 0.0
    control_msg_bytes: int = 4
    data_packet_bytes: int = 1000
    horizon: int = 10_000
    seed: int = 0
    warmup_fraction: float = 0.1
    broadcast_search: str = "auto"
    # Pins every admission decision to this rate, bypassing rate control.
    fixed_admission: Optional[float] = None
    # DcC devices credit cellular virtual service only for delivered slots.
    dcc_loss_feedback: bool = True
    # What the ScC source does with a device whose report did not arrive.
    scc_stale_csi: str = "skip"

    @property
    def admission_cap(self) -> float:
        if self.r_max is not None:
            return self.r_max
        return 2.0 * self.cellular.rate

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def validate_config(config: SimConfig) -> List[str]:
    """Return every violated invariant of ``config``; empty means valid."""
    v: List[str] = []
    if not isinstance(config.n_devices, int) or config.n_devices < 1:
        v.append(f"n_devices must be an integer >= 1 (got {config.n_devices})")
    if not isinstance(config.horizon, int) or config.horizon < 1:
        v.append(f"horizon must be an integer >= 1 (got {config.horizon})")
    if not config.m_const > 0:
        v.append(f"m_const must be > 0 (got {config.m_const})")
    if not config.admission_cap > 0:
        v.append(f"r_max must be > 0 (got {config.admission_cap})")
    if not config.beta >= 0:
        v.append(f"beta must be >= 0 (got {config.beta})")
    v.extend(config.cellular.violations("cellular"))
    v.extend(config.local.violations("local"))
    if config.cellular.rate > 0 and config.beta >= config.cellular.rate:
        v.append(
            f"beta exceeds capacity: beta={config.beta} must be below the smallest "
            f"positive cellular capacity {config.cellular.rate}"
        )
    for name in ("cellular_loss_prob", "local_loss_prob"):
        p = getattr(config, name)
        if not 0.0 <= p <= 1.0:
            v.append(f"{name} must lie in [0, 1] (got {p})")
    for name in ("control_msg_bytes", "data_packet_bytes"):
        b = getattr(config, name)
        if not isinstance(b, int) or b < 1:
            v.append(f"{name} must be a positive integer (got {b})")
    if not isinstance(config.seed, int) or not 0 <= config.seed < 2**64:
        v.append(f"seed must be an unsigned 64-bit integer (got {config.seed})")
    if not 0.0 <= config.warmup_fraction < 1.0:
        v.append(f"warmup_fraction must lie in [0, 1) (got {config.warmup_fraction})")
    if config.broadcast_search not in BROADCAST_SEARCH_MODES:
        v.append(f"broadcast_search must be one of {BROADCAST_SEARCH_MODES}")
    elif (
        config.broadcast_search == "exact"
        and config.local_mode is LocalMode.BROADCAST
        and isinstance(config.n_devices, int)
        and config.n_devices >= 13
    ):
        v.append("broadcast_search = exact is limited to n_devices <= 12")
    if config.fixed_admission is not None and not config.fixed_admission >= 0:
        v.append(f"fixed_admission must be >= 0 (got {config.fixed_admission})")
    if config.scc_stale_csi not in STALE_CSI_POLICIES:
        v.append(f"scc_stale_csi must be one of {STALE_CSI_POLICIES}")
    if not isinstance(config.scheme, Scheme):
        v.append(f"unknown scheme {config.scheme!r}")
    if not isinstance(config.local_mode, LocalMode):
        v.append(f"unknown local_mode {config.local_mode!r}")
    return v


def zeros(n: int) -> List[float]:
    return [0.0] * n


def zero_matrix(n: int) -> Matrix:
    return [[0.0] * n for _ in range(n)]


def off_diagonal(matrix: Matrix) -> Dict[Tuple[int, int], float]:
    """The (n, k) pair entries of ``matrix``, diagonal excluded."""
    n = len(matrix)
    return {(a, b): matrix[a][b] for a in range(n) for b in range(n) if a != b}


@dataclass
class QueueBank:
    """Backlogs of both schemes; the inactive scheme's queues stay zero.

    ``lam[k]`` and ``eta[n][k]`` are DcC virtual counters, ``q_real[n][k]``
    is DcC content held at device n for device k, ``mu[k]`` is the ScC
    source queue and ``nu[n][k]`` the ScC relay queue at device n.
    """

    lam: List[float]
    eta: Matrix
    q_real: Matrix
    mu: List[float]
    nu: Matrix

    @property
    def n_devices(self) -> int:
        return len(self.lam)


def fresh_queue_bank(config: SimConfig) -> QueueBank:
    n = config.n_devices
    return QueueBank(zeros(n), zero_matrix(n), zero_matrix(n), zeros(n), zero_matrix(n))


@dataclass
class SlotDecision:
    """Control outputs of one slot.

    ``g_cell[k][n]`` is the virtual cellular rate at device k on behalf of
    device n and ``x_cell[k][n]`` the real cellular rate toward k to help n.
    ``g_local[k][n]`` is the virtual local rate from k to n (DcC) and
    ``h_local[n][k]`` the scheduled real local rate from n to k.
    ``f_bcast`` maps ``(transmitter, receivers)`` to a broadcast rate.
    """

    y: List[float]
    x_admit: List[float]
    g_cell: Matrix
    x_cell: Matrix
    g_local: Matrix
    h_local: Matrix
    f_bcast: Dict[BroadcastKey, float]
    cellular_request: List[float]

    @classmethod
    def empty(cls, n: int) -> "SlotDecision":
        return cls(zeros(n), zeros(n), zero_matrix(n), zero_matrix(n), zero_matrix(n),
                   zero_matrix(n), {}, zeros(n))


# --------------------------------------------------------------------------
# Config file: one ``key = value`` per line, ``#`` starts a comment.
# --------------------------------------------------------------------------

CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(SimConfig))


def _encode_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, ChannelConfig):
        return value.encode()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: SimConfig) -> str:
    lines = [f"{key} = {_encode_value(getattr(config, key))}" for key in CONFIG_KEYS]
    return "\n".join(lines) + "\n"


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.lower() == "none" else float(text)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {
    "n_devices": int,
    "scheme": Scheme,
    "local_mode": LocalMode,
    "m_const": float,
    "r_max": _parse_optional_float,
    "beta": float,
    "cellular": ChannelConfig.parse,
    "local": ChannelConfig.parse,
    "cellular_loss_prob": float,
    "local_loss_prob": float,
    "control_msg_bytes": int,
    "data_packet_bytes": int,
    "horizon": int,
    "seed": int,
    "warmup_fraction": float,
    "broadcast_search": str,
    "fixed_admission": _parse_optional_float,
    "dcc_loss_feedback": _parse_bool,
    "scc_stale_csi": str,
}


def parse_config(text: str, base: Optional[SimConfig] = None) -> SimConfig:
    """Parse the flat config format; unspecified keys keep ``base`` values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return dataclasses.replace(base or SimConfig(), **values)


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_config(config: SimConfig, path) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")
