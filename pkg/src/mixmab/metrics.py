"""Delivery ratio, energy per packet and convergence time from bucketed records."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import TextIO

import numpy as np

CSV_HEADER = ("bucket_start_ms", "sent", "received", "pdr", "energy_mj_per_packet")


@dataclass
class MetricsSeries:
    """Per-device, per-bucket packet and energy records.

    All arrays are ``(n_devices, n_buckets)``.  ``sent``, ``received`` and
    ``energy_mj`` are booked when a transmission ends, ``generated`` when a
    packet arrives.  ``residual[b]`` is the number of packets still queued or
    in flight at the end of bucket ``b``, summed over devices.
    """

    bucket_ms: float
    sent: np.ndarray
    received: np.ndarray
    energy_mj: np.ndarray
    generated: np.ndarray
    residual: np.ndarray

    @classmethod
    def empty(cls, n_devices: int, n_buckets: int, bucket_ms: float) -> "MetricsSeries":
        shape = (n_devices, n_buckets)
        return cls(
            bucket_ms=bucket_ms,
            sent=np.zeros(shape, dtype=np.int64),
            received=np.zeros(shape, dtype=np.int64),
            energy_mj=np.zeros(shape),
            generated=np.zeros(shape, dtype=np.int64),
            residual=np.zeros(n_buckets, dtype=np.int64),
        )

    @property
    def n_devices(self) -> int:
        return self.sent.shape[0]

    @property
    def n_buckets(self) -> int:
        return self.sent.shape[1]

    @property
    def bucket_starts(self) -> np.ndarray:
        return np.arange(self.n_buckets) * self.bucket_ms

    def aggregated(self) -> dict[str, np.ndarray]:
        return {
            "sent": self.sent.sum(axis=0),
            "received": self.received.sum(axis=0),
            "energy_mj": self.energy_mj.sum(axis=0),
            "generated": self.generated.sum(axis=0),
        }

    def conservation_gaps(self) -> np.ndarray:
        """``generated - (received + lost + residual)`` at every bucket end; zero when consistent."""
        agg = self.aggregated()
        gen = np.cumsum(agg["generated"])
        sent = np.cumsum(agg["sent"])
        received = np.cumsum(agg["received"])
        lost = sent - received
        return gen - (received + lost + self.residual)


def _window(series: MetricsSeries, window: slice | tuple[int, int] | None) -> slice:
    if window is None:
        return slice(0, series.n_buckets)
    if isinstance(window, tuple):
        return slice(*window)
    return window


def pdr(series: MetricsSeries, window: slice | tuple[int, int] | None = None) -> float | None:
    """Received over sent within ``window`` (bucket indices); ``None`` when nothing was sent."""
    w = _window(series, window)
    sent = int(series.sent[:, w].sum())
    if sent == 0:
        return None
    return int(series.received[:, w].sum()) / sent


def energy_per_packet(series: MetricsSeries, window: slice | tuple[int, int] | None = None) -> float | None:
    """Mean over devices of each device's energy per sent packet (mJ).

    Devices that sent nothing in the window are left out of the mean.
    """
    w = _window(series, window)
    sent = series.sent[:, w].sum(axis=1)
    energy = series.energy_mj[:, w].sum(axis=1)
    active = sent > 0
    if not active.any():
        return None
    return float(np.mean(energy[active] / sent[active]))


def bucket_pdr(series: MetricsSeries) -> np.ndarray:
    agg = series.aggregated()
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(agg["sent"] > 0, agg["received"] / np.maximum(agg["sent"], 1), np.nan)


def cumulative_pdr(series: MetricsSeries) -> np.ndarray:
    """Delivery ratio from time zero up to the end of each bucket (NaN before the first send)."""
    agg = series.aggregated()
    sent = np.cumsum(agg["sent"])
    received = np.cumsum(agg["received"])
    return np.where(sent > 0, received / np.maximum(sent, 1), np.nan)


def convergence_bucket(
    pdr_series, slope_epsilon: float = 1e-4, window_buckets: int | None = None
) -> int | None:
    """Index of the first bucket from which the curve is flat and stops rising.

    Bucket ``b`` qualifies when the least-squares slope over ``b..b+w``
    (inclusive) is within ``slope_epsilon`` per bucket and no later value
    exceeds the value at ``b`` by more than ``slope_epsilon * w``.
    ``window_buckets`` defaults to a tenth of the series length.
    """
    y = np.asarray(pdr_series, dtype=float)
    n = y.size
    w = max(1, n // 10) if window_buckets is None else int(window_buckets)
    if w < 1:
        raise ValueError("window_buckets must be >= 1")
    if n < 2 * w:
        raise ValueError(f"series of length {n} is shorter than twice the window ({w})")
    x = np.arange(w + 1, dtype=float)
    x -= x.mean()
    denom = float(x @ x)
    # running max of everything from b onwards, NaNs ignored
    tail_max = np.fmax.accumulate(y[::-1])[::-1]
    for b in range(n - w):
        seg = y[b : b + w + 1]
        if np.isnan(seg).any():
            continue
        slope = float(x @ (seg - seg.mean())) / denom
        if abs(slope) > slope_epsilon:
            continue
        if tail_max[b] - y[b] > slope_epsilon * w:
            continue
        return b
    return None


def convergence_time(
    pdr_series, slope_epsilon: float = 1e-4, window_buckets: int | None = None, bucket_ms: float = 1.0
) -> float | None:
    """Start time (ms) of the convergence bucket, or ``None`` if the curve never settles."""
    b = convergence_bucket(pdr_series, slope_epsilon, window_buckets)
    return None if b is None else b * bucket_ms


def _fmt(value: float | None) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return repr(float(value))


def _rows(bucket_ms, sent, received, energy_per_pkt):
    for b in range(sent.size):
        s, r = int(sent[b]), int(received[b])
        yield (
            _fmt(b * bucket_ms),
            str(s),
            str(r),
            _fmt(r / s if s else None),
            _fmt(energy_per_pkt[b]),
        )


def write_csv(series: MetricsSeries, out: TextIO) -> None:
    """Aggregated per-bucket CSV; ``pdr`` and ``energy_mj_per_packet`` are empty for idle buckets."""
    agg = series.aggregated()
    ec = [energy_per_packet(series, (b, b + 1)) for b in range(series.n_buckets)]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(_rows(series.bucket_ms, agg["sent"], agg["received"], ec))


def write_device_csv(series: MetricsSeries, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("device_id",) + CSV_HEADER)
    for d in range(series.n_devices):
        sent = series.sent[d]
        ec = [series.energy_mj[d, b] / sent[b] if sent[b] else None for b in range(series.n_buckets)]
        for row in _rows(series.bucket_ms, sent, series.received[d], ec):
            writer.writerow((str(d),) + row)


def to_csv_string(series: MetricsSeries) -> str:
    buf = io.StringIO()
    write_csv(series, buf)
    return buf.getvalue()
