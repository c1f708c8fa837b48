import json
import statistics
import threading

import pytest
from hypothesis import given, settings, strategies as st

from twinbridge.bus import Bus
from twinbridge.latency import (
    BenchConfig,
    EmptySampleError,
    LatencyStats,
    ResponderUnreachableError,
    RtdSample,
    assess_hci,
    compute_stats,
    export_series,
    run_rtd_bench,
)
from twinbridge.scene import parse_adf
from twinbridge.sim import (
    RTD_REPLY_TOPIC,
    RTD_REQUEST_TOPIC,
    SimConfig,
    Simulator,
    build_model,
)

TINY_ADF = """\
scene: tiny
bodies:
  - name: base
    mesh: meshes/base.stl
"""


def ms(values):
    return [RtdSample(seq=i, rtd_ms=float(v)) for i, v in enumerate(values)]


class TestComputeStats:
    def test_three_values(self):
        stats = compute_stats(ms([1, 2, 3]))
        assert stats.mean_ms == pytest.approx(2.0)
        assert stats.median_ms == pytest.approx(2.0)
        assert stats.std_ms == pytest.approx(1.0)

    def test_constant(self):
        stats = compute_stats(ms([7, 7, 7, 7]))
        assert (stats.mean_ms, stats.median_ms, stats.std_ms) == (7.0, 7.0, 0.0)

    def test_even_median(self):
        assert compute_stats(ms([1, 2, 3, 4])).median_ms == pytest.approx(2.5)

    def test_single_sample(self):
        stats = compute_stats(ms([4.2]))
        assert stats.std_ms == 0.0
        assert stats.p95_ms == 4.2

    def test_empty_rejected(self):
        with pytest.raises(EmptySampleError):
            compute_stats([])

    def test_p95_nearest_rank(self):
        stats = compute_stats(ms(range(1, 101)))
        assert stats.p95_ms == 95.0
        stats = compute_stats(ms(range(1, 21)))
        assert stats.p95_ms == 19.0

    def test_matches_brute_force(self):
        import random
        rng = random.Random(31)
        values = [rng.uniform(0.1, 60.0) for _ in range(10_000)]
        stats = compute_stats(ms(values))
        assert stats.mean_ms == pytest.approx(statistics.fmean(values), rel=1e-12)
        assert stats.median_ms == pytest.approx(
            statistics.median(values), rel=1e-12)
        assert stats.std_ms == pytest.approx(statistics.stdev(values), rel=1e-12)
        ordered = sorted(values)
        assert stats.p95_ms == ordered[9500 - 1]
        assert stats.min_ms == min(values) and stats.max_ms == max(values)

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(0, 1000, allow_nan=False), min_size=1,
                    max_size=80))
    def test_ordering_invariants(self, values):
        stats = compute_stats(ms(values))
        assert stats.min_ms <= stats.median_ms <= stats.max_ms
        # fsum/n can land an ulp outside [min, max] on near-constant input
        slack = 1e-12 * max(1.0, abs(stats.max_ms))
        assert stats.min_ms - slack <= stats.mean_ms <= stats.max_ms + slack
        assert stats.std_ms >= 0
        assert stats.median_ms <= stats.p95_ms <= stats.max_ms or \
            stats.p95_ms == pytest.approx(stats.median_ms)


class TestAssessHci:
    def test_typical_sub_threshold_mean(self):
        stats = compute_stats(ms([19.98]))
        out = assess_hci(stats)
        assert out["one_way_ms"] == pytest.approx(9.99)
        assert out["within_threshold"] is True

    def test_over_threshold(self):
        out = assess_hci(compute_stats(ms([40.0])))
        assert out["one_way_ms"] == pytest.approx(20.0)
        assert out["within_threshold"] is False

    def test_degenerate_zero(self):
        assert assess_hci(compute_stats(ms([0.0])))["within_threshold"] is True


def echo_now(bus, *, only_even=False, stamp_offset_ns=0):
    """Minimal immediate responder; returns a stop() callable."""
    sub = bus.subscribe(RTD_REQUEST_TOPIC)
    stop = threading.Event()

    def loop():
        while not stop.is_set():
            env = sub.receive(timeout=0.05)
            if env is None:
                continue
            if only_even and env.body["seq"] % 2:
                continue
            kwargs = {}
            if stamp_offset_ns:
                from twinbridge.bus import now_ns
                kwargs["stamp_nanos"] = now_ns() + stamp_offset_ns
            bus.publish(RTD_REPLY_TOPIC, "EchoReply", {
                "seq": env.body["seq"],
                "t0_nanos": env.body["t0_nanos"],
                "body_count": 1,
            }, **kwargs)

    t = threading.Thread(target=loop, daemon=True)
    t.start()

    def stopper():
        stop.set()
        t.join(timeout=2.0)

    return stopper


class TestBench:
    def test_loopback_fast(self):
        bus = Bus()
        stop = echo_now(bus)
        try:
            result = run_rtd_bench(bus, BenchConfig(n_frames=100, rate_hz=500))
        finally:
            stop()
        assert len(result.samples) == 100
        assert result.dropped == ()
        assert all(s.rtd_ms < 5.0 for s in result.samples)
        assert [s.seq for s in result.samples] == list(range(100))

    def test_no_responder(self):
        bus = Bus()
        with pytest.raises(ResponderUnreachableError):
            run_rtd_bench(bus, BenchConfig(n_frames=3, rate_hz=100,
                                           timeout_s=0.1))

    def test_dropped_frames_excluded(self):
        bus = Bus()
        stop = echo_now(bus, only_even=True)
        try:
            result = run_rtd_bench(
                bus, BenchConfig(n_frames=10, rate_hz=200, timeout_s=0.15))
        finally:
            stop()
        assert {s.seq for s in result.samples} == {0, 2, 4, 6, 8}
        assert result.dropped == (1, 3, 5, 7, 9)
        assert result.stats.n == 5

    def test_responder_stamps_do_not_matter(self):
        bus = Bus()
        stop = echo_now(bus, stamp_offset_ns=3_600_000_000_000)
        try:
            result = run_rtd_bench(bus, BenchConfig(n_frames=50, rate_hz=500))
        finally:
            stop()
        assert result.stats.mean_ms < 5.0

    def test_injected_delay_monotone(self):
        desc = parse_adf(TINY_ADF)
        means = []
        for delay in (0.0, 5.0):
            bus = Bus()
            sim = Simulator(bus, build_model(desc),
                            SimConfig(inject_delay_ms=delay))
            sim.start()
            try:
                result = run_rtd_bench(
                    bus, BenchConfig(n_frames=100, rate_hz=100))
            finally:
                sim.stop()
            means.append(result.stats.mean_ms)
        assert means[1] - means[0] == pytest.approx(10.0, abs=2.0)


class TestExport:
    def test_rows_and_sidecar(self, tmp_path):
        samples = ms([1.25, 2.5, 3.125])
        out = tmp_path / "rtd.csv"
        sidecar = export_series(samples, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "frame,rtd_ms"
        assert len(lines) == 4
        assert lines[1] == "0,1.250000"
        doc = json.loads(sidecar.read_text())
        stats = compute_stats(samples)
        assert doc["n"] == 3
        assert doc["mean_ms"] == pytest.approx(stats.mean_ms, abs=1e-6)
        assert doc["p95_ms"] == pytest.approx(stats.p95_ms, abs=1e-6)

    def test_re_export_identical(self, tmp_path):
        samples = ms([10.0, 11.5, 9.75, 14.0])
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        export_series(samples, a)
        export_series(samples, b)
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.json").read_bytes() == \
            (tmp_path / "b.json").read_bytes()
