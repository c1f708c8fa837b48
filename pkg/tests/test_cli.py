import json
import socket
import threading

import pytest

from twinbridge.cli import main
from twinbridge.fixtures import fixture_path


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_for_listener(port: int, timeout_s: float = 5.0) -> None:
    import time

    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                return
        except OSError:
            time.sleep(0.05)
    raise TimeoutError(f"nothing listening on port {port}")


class TestUsageErrors:
    def test_no_arguments_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_unknown_command_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_bench_without_kind_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["bench"])
        assert exc.value.code == 1

    def test_sim_requires_scene(self):
        with pytest.raises(SystemExit) as exc:
            main(["sim"])
        assert exc.value.code == 1

    def test_help_exits_0(self):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0

    def test_version_exits_0(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "twinbridge" in capsys.readouterr().out


class TestRegister:
    def test_phantom_fixture_pair(self, capsys):
        rc = main([
            "register",
            "--fixed", str(fixture_path("phantom_fixed.csv")),
            "--moving", str(fixture_path("phantom_moving.csv")),
        ])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["pose"]) == 7
        assert doc["n"] == 10
        assert doc["fre_m"] < 0.002

    def test_out_file_matches_stdout(self, tmp_path, capsys):
        out = tmp_path / "reg.json"
        rc = main([
            "register",
            "--fixed", str(fixture_path("phantom_fixed.csv")),
            "--moving", str(fixture_path("phantom_moving.csv")),
            "--out", str(out),
        ])
        assert rc == 0
        assert json.loads(out.read_text()) == json.loads(
            capsys.readouterr().out)

    def test_missing_file_exits_2(self, tmp_path, capsys):
        rc = main([
            "register",
            "--fixed", str(tmp_path / "nope.csv"),
            "--moving", str(tmp_path / "nope.csv"),
        ])
        assert rc == 2
        assert "twinbridge register" in capsys.readouterr().err


class TestBench:
    def test_no_responder_exits_2(self, capsys):
        from twinbridge.bus import Bus
        from twinbridge.netbus import serve

        bus = Bus()
        server = serve(bus, "127.0.0.1:0")
        try:
            rc = main([
                "bench", "rtd",
                "--bus", server.endpoint,
                "--frames", "3",
                "--rate-hz", "100",
                "--timeout-s", "0.2",
            ])
        finally:
            server.close()
            bus.close()
        assert rc == 2
        assert "twinbridge bench" in capsys.readouterr().err

    def test_unreachable_broker_exits_2(self, capsys):
        rc = main([
            "bench", "rtd",
            "--bus", f"127.0.0.1:{free_port()}",
            "--frames", "1",
        ])
        assert rc == 2


class TestDemo:
    def test_report_file_and_fidelity(self, tmp_path, capsys):
        report = tmp_path / "demo.json"
        rc = main([
            "demo",
            "--scene", "galen25.adf",
            "--duration", "1.0",
            "--report", str(report),
        ])
        assert rc == 0
        doc = json.loads(report.read_text())
        assert doc["scene"] == "galen25"
        assert doc["post_quiescence_max_translation_m"] <= 1e-9
        assert json.loads(capsys.readouterr().out) == doc

    def test_unknown_scene_exits_2(self, capsys):
        rc = main(["demo", "--scene", "no_such_scene.adf"])
        assert rc == 2


class TestSimMirrorBench:
    def test_pipeline_over_tcp(self, tmp_path, capsys):
        endpoint = f"127.0.0.1:{free_port()}"
        sim_rc = []
        sim_thread = threading.Thread(
            target=lambda: sim_rc.append(main([
                "sim",
                "--scene", "galen25.adf",
                "--bus", endpoint,
                "--duration", "4.0",
            ])),
            daemon=True,
        )
        sim_thread.start()
        try:
            wait_for_listener(int(endpoint.rpartition(":")[2]))
            report = tmp_path / "mirror.json"
            rc = main([
                "mirror",
                "--bus", endpoint,
                "--rate-hz", "100",
                "--duration", "0.8",
                "--report", str(report),
            ])
            assert rc == 0
            doc = json.loads(report.read_text())
            assert doc["ticks"] > 40
            assert len(doc["poses"]) == 25

            out_csv = tmp_path / "rtd.csv"
            rc = main([
                "bench", "rtd",
                "--bus", endpoint,
                "--frames", "40",
                "--rate-hz", "200",
                "--out", str(out_csv),
            ])
            assert rc == 0  # loopback round trips sit far below the gate
            assert out_csv.read_text().startswith("frame,rtd_ms")
            assert out_csv.with_suffix(".json").exists()
        finally:
            sim_thread.join(timeout=10)
        assert sim_rc == [0]
