"""Command-line entry points.

One executable, six subcommands: `sim` hosts the bus broker and publishes
the simulated scene; `mirror`, `bench`, and `gateway` connect to a running
broker; `register` and `demo` are self-contained.  Exit codes: 0 success,
1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
import time
from typing import Optional, Sequence

from . import __version__
from .fixtures import resolve_scene
from .netbus import DEFAULT_ENDPOINT


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="twinbridge",
                     description="scene synchronization toolkit")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="host the bus broker and simulate a scene")
    p.add_argument("--scene", required=True,
                   help="scene file (.adf/.urdf) or bundled fixture name")
    p.add_argument("--bus", default=DEFAULT_ENDPOINT, metavar="HOST:PORT")
    p.add_argument("--publish-hz", type=float, default=200.0)
    p.add_argument("--step-hz", type=float, default=1000.0)
    p.add_argument("--inject-delay-ms", type=float, default=0.0,
                   help="one-way delay applied to each echo leg")
    p.add_argument("--duration", type=float, default=0.0,
                   help="seconds to run; 0 means until interrupted")
    p.set_defaults(handler=cmd_sim)

    p = sub.add_parser("mirror", help="mirror a simulated scene from the bus")
    p.add_argument("--bus", default=DEFAULT_ENDPOINT, metavar="HOST:PORT")
    p.add_argument("--rate-hz", type=float, default=200.0)
    p.add_argument("--report", metavar="PATH",
                   help="write tick stats and final poses as JSON")
    p.add_argument("--duration", type=float, default=0.0)
    p.add_argument("--wait-s", type=float, default=10.0,
                   help="how long to wait for scene metadata")
    p.set_defaults(handler=cmd_mirror)

    p = sub.add_parser("bench", help="latency measurements")
    bench_sub = p.add_subparsers(dest="bench_kind", required=True)
    rtd = bench_sub.add_parser("rtd", help="round-trip delay over the bus")
    rtd.add_argument("--bus", default=DEFAULT_ENDPOINT, metavar="HOST:PORT")
    rtd.add_argument("--frames", type=int, default=1000)
    rtd.add_argument("--rate-hz", type=float, default=50.0)
    rtd.add_argument("--timeout-s", type=float, default=0.5)
    rtd.add_argument("--threshold-ms", type=float, default=16.0,
                     help="one-way responsiveness gate")
    rtd.add_argument("--out", metavar="PATH.csv",
                     help="write the per-frame series (plus JSON sidecar)")
    rtd.add_argument("--plot", metavar="PATH.png",
                     help="render the series (requires the plot extra)")
    rtd.set_defaults(handler=cmd_bench_rtd)

    p = sub.add_parser("register", help="rigid point registration from CSVs")
    p.add_argument("--fixed", required=True, metavar="CSV")
    p.add_argument("--moving", required=True, metavar="CSV")
    p.add_argument("--out", metavar="PATH.json")
    p.set_defaults(handler=cmd_register)

    p = sub.add_parser("demo",
                       help="run bus, sim, and mirror in one process")
    p.add_argument("--scene", required=True)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--rate-hz", type=float, default=200.0)
    p.add_argument("--report", metavar="PATH.json")
    p.set_defaults(handler=cmd_demo)

    p = sub.add_parser("gateway", help="serve the operator console endpoint")
    p.add_argument("--bus", default=DEFAULT_ENDPOINT, metavar="HOST:PORT")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8090)
    p.add_argument("--static", metavar="DIR",
                   help="directory with the built console bundle")
    p.add_argument("--wait-s", type=float, default=10.0)
    p.set_defaults(handler=cmd_gateway)
    return parser


def _wait_or_interrupt(duration_s: float) -> None:
    if duration_s > 0:
        threading.Event().wait(duration_s)
    else:
        threading.Event().wait()


def cmd_sim(args: argparse.Namespace) -> int:
    from .bus import Bus
    from .netbus import serve
    from .scene import load_scene_file, publish_description, publish_metadata
    from .sim import SimConfig, Simulator, build_model

    desc = load_scene_file(str(resolve_scene(args.scene)))
    model = build_model(desc)
    config = SimConfig(step_hz=args.step_hz, publish_hz=args.publish_hz,
                       inject_delay_ms=args.inject_delay_ms)
    bus = Bus()
    server = serve(bus, args.bus)
    publish_metadata(bus, desc)
    publish_description(bus, desc)
    sim = Simulator(bus, model, config)
    sim.start()
    print(f"simulating {desc.name!r} on {server.endpoint}: "
          f"{len(model.bodies)} bodies, {len(model.joints)} joints",
          flush=True)
    try:
        _wait_or_interrupt(args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        sim.stop()
        server.close()
        bus.close()
    print(f"published {sim.report.publishes} pose updates, "
          f"{sim.report.echo_replies} echo replies, "
          f"{sim.report.errors} command errors")
    return 0


def _connect(endpoint: str):
    from .netbus import connect

    return connect(endpoint)


def cmd_mirror(args: argparse.Namespace) -> int:
    from .mirror import MirrorRunner, NotReadyError, SyncTimerConfig

    remote = _connect(args.bus)
    deadline = time.monotonic() + args.wait_s
    while True:
        try:
            runner = MirrorRunner(remote, SyncTimerConfig(rate_hz=args.rate_hz))
            break
        except NotReadyError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.2)
    runner.start()
    print(f"mirroring {runner.scene.source_scene!r} "
          f"({len(runner.scene.model_nodes)} bodies) at {args.rate_hz:g} Hz",
          flush=True)
    try:
        _wait_or_interrupt(args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        runner.stop()
        remote.close()
    stats = runner.scene.stats
    report = runner.scene.snapshot()
    report.update({
        "skipped_deadlines": stats.skipped_deadlines,
        "overrun_warnings": stats.overrun_warnings,
        "apply_errors": stats.apply_errors,
        "updated_total": stats.updated_total,
    })
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    print(f"{stats.ticks} ticks, mean period "
          f"{stats.mean_period_ms():.3f} ms, "
          f"{stats.skipped_deadlines} skipped deadlines")
    return 0


def cmd_bench_rtd(args: argparse.Namespace) -> int:
    from .latency import (
        BenchConfig,
        assess_hci,
        export_series,
        render_series_png,
        run_rtd_bench,
    )

    config = BenchConfig(n_frames=args.frames, rate_hz=args.rate_hz,
                         timeout_s=args.timeout_s,
                         hci_threshold_ms=args.threshold_ms)
    remote = _connect(args.bus)
    try:
        result = run_rtd_bench(remote, config)
    finally:
        remote.close()
    stats = result.stats
    verdict = assess_hci(stats, config)
    print(f"frames={stats.n} dropped={len(result.dropped)} "
          f"mean={stats.mean_ms:.2f}ms median={stats.median_ms:.2f}ms "
          f"std={stats.std_ms:.2f}ms p95={stats.p95_ms:.2f}ms")
    print(f"one-way estimate {verdict['one_way_ms']:.2f} ms "
          f"({'within' if verdict['within_threshold'] else 'exceeds'} "
          f"{config.hci_threshold_ms:g} ms threshold)")
    if args.out:
        sidecar = export_series(result.samples, args.out)
        print(f"wrote {args.out} and {sidecar}")
    if args.plot:
        if not args.out:
            print("--plot requires --out", file=sys.stderr)
            return 1
        render_series_png(args.out, args.plot)
        print(f"wrote {args.plot}")
    return 0 if verdict["within_threshold"] else 2


def cmd_register(args: argparse.Namespace) -> int:
    from .registration import load_fiducials_csv, register_rigid, result_to_json

    result = register_rigid(load_fiducials_csv(args.fixed),
                            load_fiducials_csv(args.moving))
    payload = result_to_json(result)
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    from .demo import run_demo, sine_script
    from .mirror import SyncTimerConfig
    from .scene import load_scene_file
    from .sim import build_model

    desc = load_scene_file(str(resolve_scene(args.scene)))
    script = sine_script(build_model(desc), args.duration)
    report = run_demo(desc, script,
                      timer=SyncTimerConfig(rate_hz=args.rate_hz))
    text = json.dumps(report.to_json(), indent=2)
    print(text)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_gateway(args: argparse.Namespace) -> int:
    from .service.gateway import run_gateway

    remote = _connect(args.bus)
    try:
        run_gateway(remote, host=args.host, port=args.port,
                    static_dir=args.static, metadata_wait_s=args.wait_s)
    except KeyboardInterrupt:
        pass
    finally:
        remote.close()
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except KeyboardInterrupt:
        return 0
    except Exception as err:  # runtime failures all map to exit 2
        print(f"twinbridge {args.command}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
