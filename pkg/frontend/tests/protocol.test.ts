import { describe, expect, it } from "vitest";

import {
  jogFrame,
  parseServerFrame,
  setTargetFrame,
  startBenchFrame,
} from "../src/protocol.js";

const sceneText = JSON.stringify({
  v: 1,
  type: "scene",
  scene: "galen25",
  bodies: ["base", "stage_x"],
  joints: [
    { name: "q01", kind: "prismatic", parent: "base", child: "stage_x",
      limits: [-0.1, 0.1] },
  ],
  broadcast_hz: 30,
});

describe("parseServerFrame", () => {
  it("accepts each server frame type", () => {
    expect(parseServerFrame(sceneText)?.type).toBe("scene");
    expect(
      parseServerFrame(JSON.stringify({
        v: 1, type: "poses", stamp_nanos: 12, ticks: 3,
        poses: { base: [0, 0, 0, 1, 0, 0, 0] },
      }))?.type,
    ).toBe("poses");
    expect(
      parseServerFrame(JSON.stringify({
        v: 1, type: "latency",
        stats: { n: 2, mean_ms: 1, median_ms: 1, std_ms: 0, min_ms: 1,
                 max_ms: 1, p95_ms: 1 },
        one_way_ms: 0.5, within_threshold: true, dropped: 0,
        series: [1, 1],
      }))?.type,
    ).toBe("latency");
    expect(
      parseServerFrame(JSON.stringify({
        v: 1, type: "error", source: "gateway", message: "nope",
      }))?.type,
    ).toBe("error");
  });

  it("rejects garbage without throwing", () => {
    expect(parseServerFrame("not json")).toBeNull();
    expect(parseServerFrame("42")).toBeNull();
    expect(parseServerFrame("null")).toBeNull();
    expect(parseServerFrame(JSON.stringify({ type: "scene" }))).toBeNull();
  });

  it("rejects the wrong protocol version", () => {
    const v2 = JSON.parse(sceneText);
    v2.v = 2;
    expect(parseServerFrame(JSON.stringify(v2))).toBeNull();
  });

  it("rejects unknown frame types and missing required fields", () => {
    expect(parseServerFrame(JSON.stringify({ v: 1, type: "telemetry" })))
      .toBeNull();
    expect(parseServerFrame(JSON.stringify({ v: 1, type: "poses" })))
      .toBeNull();
    expect(
      parseServerFrame(JSON.stringify({
        v: 1, type: "latency", stats: {}, one_way_ms: 1,
        within_threshold: true, dropped: 0,
      })),
    ).toBeNull(); // series missing
    expect(parseServerFrame(JSON.stringify({ v: 1, type: "error" })))
      .toBeNull();
  });
});

describe("command builders", () => {
  it("jog carries exactly the documented fields", () => {
    expect(JSON.parse(jogFrame("q01", 0.1))).toEqual({
      v: 1, type: "jog", joint: "q01", delta: 0.1,
    });
  });

  it("set_target omits max_speed unless given", () => {
    expect(JSON.parse(setTargetFrame("q01", -0.05))).toEqual({
      v: 1, type: "set_target", joint: "q01", target: -0.05,
    });
    expect(JSON.parse(setTargetFrame("q01", -0.05, 2.5))).toEqual({
      v: 1, type: "set_target", joint: "q01", target: -0.05, max_speed: 2.5,
    });
  });

  it("start_bench uses the wire field names", () => {
    expect(JSON.parse(startBenchFrame(500, 50))).toEqual({
      v: 1, type: "start_bench", frames: 500, rate_hz: 50,
    });
  });
});
