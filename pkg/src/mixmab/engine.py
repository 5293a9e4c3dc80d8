"""Discrete-event LoRaWAN uplink simulator with per-device bandit policies.

One gateway sits at the origin.  Each end device draws Poisson packet
arrivals, lets its policy pick an (SF, channel, power) action, waits for the
per-channel duty-cycle gate, and transmits.  When a frame ends the gateway
decides its fate against every frame that overlapped it on the same channel;
the acknowledgement (reward 1) or its absence (reward 0) reaches the device
instantly and feeds the policy update.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .bandit import ActionSpace, ConfigError, PAPER_E, PolicyKind, make_action_space, make_policy
from .metrics import MetricsSeries
from .phy import (
    LinkTables,
    PathLossModel,
    RadioConfig,
    Transmission,
    energy_per_packet_mj,
    is_decoded,
    path_loss_db,
    received_power_dbm,
    time_on_air,
)
from .rng import Stream, stream

MS_PER_HOUR = 3_600_000.0

# same-time ordering: TxEnd < TxStart < PacketArrival < AckDelivery
TX_END, TX_START, ARRIVAL, ACK = 0, 1, 2, 3
EVENT_NAMES = {TX_END: "tx_end", TX_START: "tx_start", ARRIVAL: "arrival", ACK: "ack"}


@dataclass(frozen=True)
class SimConfig:
    n_devices: int = 30
    cell_radius_m: float = 1000.0
    scenario: int | None = 1
    sfs: tuple[int, ...] = (7, 8, 9, 10, 11, 12)
    channels_hz: tuple[int, ...] = (868_100_000,)
    tps_dbm: tuple[int, ...] = (14,)
    packet_rate_per_hour: float = 15.0
    payload_bytes: int = 50
    horizon_ms: float = 2000 * MS_PER_HOUR
    duty_cycle: float = 0.01
    policy: PolicyKind = PolicyKind.MIXMAB
    radio: RadioConfig = field(default_factory=RadioConfig)
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    links: LinkTables = field(default_factory=LinkTables)
    seed: int = 0
    # None -> horizon / 100
    metrics_bucket_ms: float | None = None
    l_exp: int = 5
    l_ee: int = 100
    # None -> derived from K and the expected number of arrivals per device
    gamma: float | None = None
    e_const: float = PAPER_E

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy", PolicyKind(self.policy))
        self.validate()

    def validate(self) -> None:
        if self.n_devices < 1:
            raise ConfigError("n_devices must be >= 1")
        if self.cell_radius_m < 0:
            raise ConfigError("cell_radius_m must be >= 0")
        if self.packet_rate_per_hour <= 0:
            raise ConfigError("packet_rate_per_hour must be > 0")
        if self.payload_bytes < 1 or self.payload_bytes > 255:
            raise ConfigError("payload_bytes must be in 1..255")
        if self.horizon_ms <= 0:
            raise ConfigError("horizon_ms must be > 0")
        if not 0 < self.duty_cycle <= 1:
            raise ConfigError("duty_cycle must be in (0, 1]")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.metrics_bucket_ms is not None and self.metrics_bucket_ms <= 0:
            raise ConfigError("metrics_bucket_ms must be > 0")
        if self.gamma is not None and not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must be in [0, 1]")
        if self.l_exp < 0 or self.l_ee < 1:
            raise ConfigError("l_exp must be >= 0 and l_ee >= 1")
        if self.e_const <= 1:
            raise ConfigError("e_const must be > 1")
        self.action_space()

    def action_space(self) -> ActionSpace:
        return make_action_space(self.sfs, self.channels_hz, self.tps_dbm)

    @property
    def bucket_ms(self) -> float:
        return self.horizon_ms / 100 if self.metrics_bucket_ms is None else self.metrics_bucket_ms

    @property
    def n_buckets(self) -> int:
        return max(1, math.ceil(self.horizon_ms / self.bucket_ms - 1e-9))

    @property
    def expected_iterations(self) -> int:
        """Learning horizon T: expected packet arrivals per device, rounded up."""
        return max(1, math.ceil(self.packet_rate_per_hour * self.horizon_ms / MS_PER_HOUR - 1e-9))

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def generate_traffic(rate_per_hour: float, rng: np.random.Generator) -> float:
    """Exponential inter-arrival time in ms with mean ``3.6e6 / rate``."""
    if rate_per_hour <= 0:
        raise ValueError("rate must be > 0")
    return float(rng.exponential(MS_PER_HOUR / rate_per_hour))


def duty_cycle_gate(
    next_allowed: dict[int, float], channel_hz: int, airtime_ms: float, now_ms: float, duty_cycle: float
) -> float:
    """Start time of a frame under the per-channel duty cycle; updates ``next_allowed`` in place.

    After a frame of ``airtime`` the channel stays closed for
    ``airtime * (1/duty_cycle - 1)`` past its end.
    """
    if not 0 < duty_cycle <= 1:
        raise ValueError("duty_cycle must be in (0, 1]")
    start = max(now_ms, next_allowed.get(channel_hz, -math.inf))
    next_allowed[channel_hz] = start + airtime_ms + airtime_ms * (1.0 / duty_cycle - 1.0)
    return start


def place_devices(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over the disc of ``radius`` centred at the origin, shape ``(n, 2)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.random(n)
    v = rng.random(n)
    r = radius * np.sqrt(u)
    theta = 2.0 * math.pi * v
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


@dataclass
class EventRecord:
    time_ms: float
    device: int
    kind: str
    action: int
    outcome: str

    def line(self) -> str:
        return f"{self.time_ms!r},{self.device},{self.kind},{self.action},{self.outcome}"


@dataclass
class TxRecord:
    """A completed transmission and its fate, kept when ``record=True``."""

    tx: Transmission
    action_index: int
    decoded: bool


@dataclass
class SimResult:
    config: SimConfig
    series: MetricsSeries
    positions: np.ndarray
    events: list[EventRecord] | None = None
    transmissions: list[TxRecord] | None = None
    policies: list = field(default_factory=list)

    def event_log_text(self) -> str:
        if self.events is None:
            raise ValueError("run was not recorded")
        return "".join(ev.line() + "\n" for ev in self.events)


class _Device:
    __slots__ = ("id", "loss_db", "policy", "queue", "busy", "inflight", "next_allowed",
                 "traffic_rng", "policy_rng", "shadow_rng", "arrivals")

    def __init__(self, dev_id: int) -> None:
        self.id = dev_id
        self.queue: deque[float] = deque()
        self.busy = False
        self.inflight = False
        self.next_allowed: dict[int, float] = {}
        self.arrivals = None


class Simulator:
    """Single run of the event loop.

    ``positions`` and ``arrivals`` (per-device arrival times in ms) replace
    the random placement and traffic; both exist for controlled experiments.
    """

    def __init__(
        self,
        config: SimConfig,
        *,
        positions: np.ndarray | None = None,
        arrivals: Mapping[int, Sequence[float]] | None = None,
        record: bool = False,
        event_sink: Callable[[EventRecord], None] | None = None,
    ) -> None:
        self.cfg = config
        self.space = config.action_space()
        self.record = record
        self.event_sink = event_sink
        n = config.n_devices
        if positions is None:
            positions = np.vstack([
                place_devices(1, config.cell_radius_m, stream(config.seed, d, Stream.PLACEMENT))
                for d in range(n)
            ])
        self.positions = np.asarray(positions, dtype=float).reshape(n, 2)
        T = config.expected_iterations
        self.devices: list[_Device] = []
        for d in range(n):
            dev = _Device(d)
            dev.loss_db = path_loss_db(float(np.hypot(*self.positions[d])), replace(config.path_loss, shadowing_sigma_db=0.0))
            dev.policy = make_policy(config.policy, self.space.K, T, gamma=config.gamma,
                                     l_exp=config.l_exp, l_ee=config.l_ee, e=config.e_const)
            dev.traffic_rng = stream(config.seed, d, Stream.TRAFFIC)
            dev.policy_rng = stream(config.seed, d, Stream.POLICY)
            dev.shadow_rng = stream(config.seed, d, Stream.SHADOWING)
            if arrivals is not None:
                dev.arrivals = iter(sorted(arrivals.get(d, ())))
            self.devices.append(dev)
        self.airtime = {sf: time_on_air(sf, config.payload_bytes, config.radio) for sf in set(config.sfs)}
        self.max_airtime = max(self.airtime.values())
        self.series = MetricsSeries.empty(n, config.n_buckets, config.bucket_ms)
        # plain-list accumulators, copied into ``series`` when the run ends
        nb = self.series.n_buckets
        self._sent = [[0] * nb for _ in range(n)]
        self._received = [[0] * nb for _ in range(n)]
        self._energy = [[0.0] * nb for _ in range(n)]
        self._generated = [[0] * nb for _ in range(n)]
        self._logging = record or event_sink is not None
        self.events: list[EventRecord] | None = [] if record else None
        self.tx_records: list[TxRecord] | None = [] if record else None
        self._heap: list = []
        self._seq = 0
        self._recent: deque[Transmission] = deque()

    # -- event plumbing -----------------------------------------------------

    def _push(self, time: float, kind: int, device: int, data) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, kind, device, self._seq, data))

    def _log(self, time: float, device: int, kind: int, action: int, outcome: str) -> None:
        rec = EventRecord(time, device, EVENT_NAMES[kind], action, outcome)
        if self.events is not None:
            self.events.append(rec)
        if self.event_sink is not None:
            self.event_sink(rec)

    def _next_arrival(self, dev: _Device, now: float) -> None:
        if dev.arrivals is not None:
            t = next(dev.arrivals, None)
        else:
            t = now + generate_traffic(self.cfg.packet_rate_per_hour, dev.traffic_rng)
        if t is not None and t < self.cfg.horizon_ms:
            self._push(t, ARRIVAL, dev.id, None)

    def _bucket(self, t: float) -> int:
        return min(int(t // self.cfg.bucket_ms), self.series.n_buckets - 1)

    def _residual(self) -> int:
        return sum(len(dev.queue) + dev.inflight for dev in self.devices)

    # -- handlers -----------------------------------------------------------

    def _start_next(self, dev: _Device, now: float) -> None:
        dev.queue.popleft()
        k = dev.policy.select(dev.policy_rng)
        action = self.space[k]
        airtime = self.airtime[action.sf]
        start = duty_cycle_gate(dev.next_allowed, action.channel_hz, airtime, now, self.cfg.duty_cycle)
        loss = dev.loss_db
        if self.cfg.path_loss.shadowing_sigma_db > 0:
            loss += dev.shadow_rng.normal(0.0, self.cfg.path_loss.shadowing_sigma_db)
        tx = Transmission(dev.id, action, start, airtime, received_power_dbm(action.tp_dbm, loss),
                          self.cfg.payload_bytes)
        dev.busy = True
        dev.inflight = True
        self._push(start, TX_START, dev.id, (k, tx))

    def _on_arrival(self, dev: _Device, now: float) -> None:
        self._generated[dev.id][self._bucket(now)] += 1
        dev.queue.append(now)
        if self._logging:
            self._log(now, dev.id, ARRIVAL, -1, f"queued={len(dev.queue)}")
        self._next_arrival(dev, now)
        if not dev.busy:
            self._start_next(dev, now)

    def _on_tx_start(self, now: float, k: int, tx: Transmission) -> None:
        horizon = now - 2.0 * self.max_airtime
        recent = self._recent
        while recent and recent[0].start_ms < horizon:
            recent.popleft()
        recent.append(tx)
        self._push(tx.end_ms, TX_END, tx.device_id, (k, tx))
        if self._logging:
            self._log(now, tx.device_id, TX_START, k, f"sf={tx.action.sf};ch={tx.action.channel_hz};tp={tx.action.tp_dbm}")

    def _on_tx_end(self, dev: _Device, now: float, k: int, tx: Transmission) -> None:
        start, end = tx.start_ms, tx.end_ms
        interferers = [o for o in self._recent if o is not tx and o.start_ms < end and start < o.end_ms]
        decoded = is_decoded(tx, interferers, self.cfg.links)
        b = self._bucket(now)
        d = dev.id
        self._sent[d][b] += 1
        self._received[d][b] += decoded
        self._energy[d][b] += energy_per_packet_mj(tx.action.tp_dbm, tx.airtime_ms)
        dev.inflight = False
        if self.tx_records is not None:
            self.tx_records.append(TxRecord(tx, k, decoded))
        if self._logging:
            self._log(now, dev.id, TX_END, k, "decoded" if decoded else "lost")
        self._push(now, ACK, dev.id, (k, int(decoded)))

    def _on_ack(self, dev: _Device, now: float, k: int, reward: int) -> None:
        dev.policy.update(k, reward)
        dev.busy = False
        if self._logging:
            self._log(now, dev.id, ACK, k, f"reward={reward}")
        if dev.queue:
            self._start_next(dev, now)

    # -- main loop ----------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        for dev in self.devices:
            self._next_arrival(dev, 0.0)
        heap = self._heap
        bucket_ms = cfg.bucket_ms
        n_buckets = self.series.n_buckets
        next_boundary, b_done = bucket_ms, 0
        devices = self.devices
        while heap:
            time, kind, dev_id, _, data = heapq.heappop(heap)
            if time >= cfg.horizon_ms:
                break
            while time >= next_boundary and b_done < n_buckets:
                self.series.residual[b_done] = self._residual()
                b_done += 1
                next_boundary = (b_done + 1) * bucket_ms
            dev = devices[dev_id]
            if kind == ARRIVAL:
                self._on_arrival(dev, time)
            elif kind == TX_START:
                self._on_tx_start(time, *data)
            elif kind == TX_END:
                self._on_tx_end(dev, time, *data)
            else:
                self._on_ack(dev, time, *data)
        while b_done < n_buckets:
            self.series.residual[b_done] = self._residual()
            b_done += 1
        self.series.sent[:] = self._sent
        self.series.received[:] = self._received
        self.series.energy_mj[:] = self._energy
        self.series.generated[:] = self._generated
        return SimResult(
            config=cfg,
            series=self.series,
            positions=self.positions,
            events=self.events,
            transmissions=self.tx_records,
            policies=[dev.policy for dev in devices],
        )


def run(config: SimConfig, **kwargs) -> SimResult:
    """Run one simulation; keyword arguments go to :class:`Simulator`."""
    return Simulator(config, **kwargs).run()
