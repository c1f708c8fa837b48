"""Round-trip-delay benchmark and its statistics.

Sends a train of echo requests on the bus at a fixed rate, matches replies
by sequence number, and reports per-frame round-trip delay measured on the
requester's monotonic clock only; nothing here trusts timestamps written
by the responder.  Timed-out frames are excluded from the statistics and
reported as dropped so one hung reply cannot poison the mean.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from .sim import RTD_REPLY_TOPIC, RTD_REQUEST_TOPIC


class LatencyError(Exception):
    """Base class for benchmark failures."""


class ResponderUnreachableError(LatencyError):
    """No echo replies arrived at all."""


class EmptySampleError(LatencyError):
    """Statistics were requested over zero samples."""


@dataclass(frozen=True)
class RtdSample:
    """One matched request/reply pair."""

    seq: int
    rtd_ms: float


@dataclass(frozen=True)
class LatencyStats:
    n: int
    mean_ms: float
    median_ms: float
    std_ms: float
    min_ms: float
    max_ms: float
    p95_ms: float


@dataclass(frozen=True)
class BenchConfig:
    n_frames: int = 1000
    rate_hz: float = 50.0
    timeout_s: float = 0.5
    hci_threshold_ms: float = 16.0
    filler_bodies: int = 25  # echo payload sized like a full pose update

    def __post_init__(self) -> None:
        if self.n_frames < 1:
            raise ValueError("need at least one frame")
        if self.rate_hz <= 0:
            raise ValueError("rate must be positive")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class BenchResult:
    samples: tuple[RtdSample, ...]
    stats: LatencyStats
    dropped: tuple[int, ...]  # seq numbers that never got a reply in time


def compute_stats(samples: Sequence[RtdSample]) -> LatencyStats:
    """Mean, median, sample std (n-1), min, max, nearest-rank p95."""
    if not samples:
        raise EmptySampleError("no samples")
    values = sorted(s.rtd_ms for s in samples)
    n = len(values)
    mean = sum(values) / n
    if n % 2:
        median = values[n // 2]
    else:
        median = (values[n // 2 - 1] + values[n // 2]) / 2.0
    if n == 1:
        std = 0.0
    else:
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    p95 = values[max(0, math.ceil(0.95 * n) - 1)]
    return LatencyStats(n=n, mean_ms=mean, median_ms=median, std_ms=std,
                        min_ms=values[0], max_ms=values[-1], p95_ms=p95)


def assess_hci(stats: LatencyStats,
               config: BenchConfig = BenchConfig()) -> dict:
    """Halve the round trip into a one-way estimate and gate it.

    The threshold is the lowest latency reported to affect direct-control
    responsiveness; staying under it is the pass condition.
    """
    one_way_ms = stats.mean_ms / 2.0
    return {
        "one_way_ms": one_way_ms,
        "within_threshold": one_way_ms < config.hci_threshold_ms,
    }


def run_rtd_bench(bus, config: BenchConfig = BenchConfig()) -> BenchResult:
    """Measure RTD over the bus against a live echo responder.

    Sends are scheduled at start + i/rate on an absolute timeline; receive
    polling is interleaved between sends so replies are stamped promptly.
    """
    sub = bus.subscribe(RTD_REPLY_TOPIC, maxlen=4096)
    filler = [0.0] * (7 * config.filler_bodies)
    period_ns = round(1e9 / config.rate_hz)
    timeout_ns = round(config.timeout_s * 1e9)
    pending: dict[int, int] = {}  # seq -> send perf stamp, insertion ordered
    samples: list[RtdSample] = []
    dropped: list[int] = []
    try:
        start = time.perf_counter_ns()
        next_i = 0
        while next_i < config.n_frames or pending:
            now = time.perf_counter_ns()
            if next_i < config.n_frames:
                due = start + next_i * period_ns
                if now >= due:
                    send_ns = time.perf_counter_ns()
                    bus.publish(RTD_REQUEST_TOPIC, "EchoRequest", {
                        "seq": next_i,
                        "t0_nanos": send_ns,
                        "filler": filler,
                    })
                    pending[next_i] = send_ns
                    next_i += 1
                    continue
                wait_ns = due - now
            else:
                wait_ns = timeout_ns
            if pending:
                oldest_deadline = next(iter(pending.values())) + timeout_ns
                wait_ns = min(wait_ns, max(oldest_deadline - now, 0))
            env = sub.receive(timeout=wait_ns / 1e9)
            recv_ns = time.perf_counter_ns()
            if env is not None:
                seq = env.body.get("seq")
                send_ns = pending.pop(seq, None)
                if send_ns is not None:
                    samples.append(RtdSample(
                        seq=seq, rtd_ms=(recv_ns - send_ns) / 1e6))
            for seq, send_ns in list(pending.items()):
                if recv_ns - send_ns >= timeout_ns:
                    del pending[seq]
                    dropped.append(seq)
                else:
                    break  # insertion order means the rest are younger
    finally:
        sub.close()
    if not samples:
        raise ResponderUnreachableError(
            f"no echo replies within {config.timeout_s} s; "
            "is a responder subscribed to the request topic?")
    samples.sort(key=lambda s: s.seq)
    return BenchResult(samples=tuple(samples), stats=compute_stats(samples),
                       dropped=tuple(sorted(dropped)))


def export_series(samples: Sequence[RtdSample],
                  path: Union[str, Path]) -> Path:
    """Write `frame,rtd_ms` CSV plus a JSON stats sidecar; returns the sidecar path.

    Formatting is fixed-width so re-exporting the same samples is
    byte-identical.
    """
    path = Path(path)
    lines = ["frame,rtd_ms"]
    lines.extend(f"{s.seq},{s.rtd_ms:.6f}" for s in samples)
    path.write_text("\n".join(lines) + "\n")
    stats = compute_stats(samples)
    sidecar = path.with_suffix(".json")
    doc = {
        "n": stats.n,
        "mean_ms": round(stats.mean_ms, 6),
        "median_ms": round(stats.median_ms, 6),
        "std_ms": round(stats.std_ms, 6),
        "min_ms": round(stats.min_ms, 6),
        "max_ms": round(stats.max_ms, 6),
        "p95_ms": round(stats.p95_ms, 6),
    }
    sidecar.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return sidecar


def render_series_png(csv_path: Union[str, Path],
                      png_path: Union[str, Path]) -> None:
    """Plot RTD over frame index from an exported CSV (needs matplotlib)."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as err:
        raise LatencyError(
            "matplotlib is not installed; install the 'plot' extra") from err
    frames = []
    values = []
    for line in Path(csv_path).read_text().splitlines()[1:]:
        f, v = line.split(",")
        frames.append(int(f))
        values.append(float(v))
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(frames, values, linewidth=0.7)
    ax.set_xlabel("frame")
    ax.set_ylabel("RTD (ms)")
    ax.set_title("round-trip delay per frame")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
