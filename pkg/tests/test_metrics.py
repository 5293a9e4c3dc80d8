import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixmab.metrics import (
    CSV_HEADER,
    MetricsSeries,
    bucket_pdr,
    convergence_bucket,
    convergence_time,
    cumulative_pdr,
    energy_per_packet,
    pdr,
    write_csv,
    write_device_csv,
)


def make_series(sent, received, energy=None, bucket_ms=10.0):
    sent = np.atleast_2d(np.asarray(sent, dtype=np.int64))
    received = np.atleast_2d(np.asarray(received, dtype=np.int64))
    energy = np.zeros(sent.shape) if energy is None else np.atleast_2d(np.asarray(energy, dtype=float))
    return MetricsSeries(bucket_ms, sent, received, energy, sent.copy(), np.zeros(sent.shape[1], dtype=np.int64))


def random_series(rng, n_dev=4, n_buckets=20):
    sent = rng.integers(0, 50, size=(n_dev, n_buckets))
    received = rng.integers(0, 1 + sent)
    energy = sent * rng.uniform(1, 30, size=(n_dev, 1))
    return make_series(sent, received, energy)


def test_pdr_examples():
    assert pdr(make_series([100], [100])) == 1.0
    assert pdr(make_series([200], [150])) == 0.75


def test_pdr_absent_when_nothing_sent():
    s = make_series([[0, 5]], [[0, 5]])
    assert pdr(s, (0, 1)) is None
    assert pdr(s, (1, 2)) == 1.0
    assert energy_per_packet(s, (0, 1)) is None


def test_cumulative_equals_sent_weighted_bucket_mean():
    rng = np.random.default_rng(3)
    for _ in range(50):
        s = random_series(rng)
        agg = s.aggregated()
        per_bucket = bucket_pdr(s)
        w = agg["sent"]
        mask = w > 0
        weighted = float((per_bucket[mask] * w[mask]).sum() / w[mask].sum())
        assert pdr(s) == pytest.approx(weighted, abs=1e-12)
        assert cumulative_pdr(s)[-1] == pytest.approx(pdr(s), abs=1e-12)


def test_energy_per_packet_examples():
    assert energy_per_packet(make_series([[10]], [[10]], [[24.5]])) == pytest.approx(2.45)
    same = make_series([[10], [20]], [[5], [5]], [[24.5], [49.0]])
    assert energy_per_packet(same) == pytest.approx(2.45)
    others = make_series([[10], [10]], [[0], [0]], [[25.0], [25.0]])
    with_low = make_series([[10], [10], [10]], [[0], [0], [0]], [[25.0], [25.0], [25.0 / 10**0.6]])
    assert energy_per_packet(with_low) < energy_per_packet(others)


def test_energy_skips_idle_devices():
    s = make_series([[10], [0]], [[0], [0]], [[20.0], [0.0]])
    assert energy_per_packet(s) == pytest.approx(2.0)


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1))
def test_pdr_bounded_and_monotone(seed):
    rng = np.random.default_rng(seed)
    s = random_series(rng)
    value = pdr(s)
    if value is None:
        return
    assert 0.0 <= value <= 1.0
    more = make_series(s.sent, np.minimum(s.received + 1, s.sent))
    assert pdr(more) >= value


def test_aggregate_is_sum_of_devices():
    s = random_series(np.random.default_rng(1))
    agg = s.aggregated()
    assert np.array_equal(agg["sent"], s.sent.sum(axis=0))
    assert np.array_equal(agg["received"], s.received.sum(axis=0))
    assert np.allclose(agg["energy_mj"], s.energy_mj.sum(axis=0))


# -- convergence -------------------------------------------------------------


def test_constant_series_converges_immediately():
    assert convergence_bucket(np.full(100, 0.7)) == 0
    assert convergence_time(np.full(100, 0.7), bucket_ms=20.0) == 0.0


def test_increasing_ramp_never_converges():
    assert convergence_time(np.linspace(0.1, 0.9, 100)) is None


def test_ramp_then_flat_detected_near_knee():
    y = np.concatenate([np.linspace(0.2, 0.8, 41), np.full(59, 0.8)])
    b = convergence_bucket(y, slope_epsilon=1e-4, window_buckets=10)
    assert abs(b - 40) <= 2


def test_leading_gaps_are_skipped():
    y = np.concatenate([[np.nan] * 5, np.full(95, 0.5)])
    assert convergence_bucket(y) == 5


def test_short_series_rejected():
    with pytest.raises(ValueError):
        convergence_bucket(np.ones(15), window_buckets=10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.floats(1e-5, 1e-2), factor=st.floats(1.0, 10.0))
def test_convergence_monotone_in_tolerance(seed, eps, factor):
    rng = np.random.default_rng(seed)
    knee = int(rng.integers(5, 80))
    y = np.minimum(np.arange(100) / knee, 1.0) * 0.6 + rng.normal(0, 1e-3, 100)
    y = np.maximum.accumulate(y) if rng.random() < 0.5 else y
    tight = convergence_bucket(y, eps, 10)
    loose = convergence_bucket(y, eps * factor, 10)
    if tight is not None:
        assert loose is not None and loose <= tight


# -- CSV -------------------------------------------------------------------------


def test_csv_layout():
    s = make_series([[2, 0, 4]], [[1, 0, 4]], [[5.0, 0.0, 8.0]], bucket_ms=100.0)
    buf = io.StringIO()
    write_csv(s, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "0.0,2,1,0.5,2.5"
    assert lines[2] == "100.0,0,0,,"
    assert lines[3] == "200.0,4,4,1.0,2.0"


def test_device_csv_has_device_column():
    s = make_series([[1, 1], [2, 0]], [[1, 0], [1, 0]], [[2.0, 2.0], [4.0, 0.0]])
    buf = io.StringIO()
    write_device_csv(s, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "device_id," + ",".join(CSV_HEADER)
    assert len(lines) == 1 + 4
    assert lines[3] == "1,0.0,2,1,0.5,2.0"
