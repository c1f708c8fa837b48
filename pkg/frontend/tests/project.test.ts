import { describe, expect, it } from "vitest";

import {
  type Camera,
  projectPoint,
  rotateByQuat,
  triadOf,
} from "../src/project.js";
import type { Pose7 } from "../src/protocol.js";

const SQ2 = Math.SQRT1_2;

function close(a: number[], b: number[], tol = 1e-12): void {
  expect(a.length).toBe(b.length);
  a.forEach((v, i) => expect(Math.abs(v - (b[i] ?? NaN))).toBeLessThan(tol));
}

describe("rotateByQuat", () => {
  it("identity quaternion leaves vectors alone", () => {
    close(rotateByQuat([1, 0, 0, 0], [0.3, -0.2, 0.9]), [0.3, -0.2, 0.9]);
  });

  it("rotates 90 degrees about z", () => {
    close(rotateByQuat([SQ2, 0, 0, SQ2], [1, 0, 0]), [0, 1, 0]);
    close(rotateByQuat([SQ2, 0, 0, SQ2], [0, 1, 0]), [-1, 0, 0]);
  });

  it("preserves vector length", () => {
    const q = [0.5, 0.5, 0.5, 0.5]; // a unit quaternion
    const v = rotateByQuat(q, [0.2, -0.7, 0.4]);
    const len = Math.hypot(...v);
    expect(Math.abs(len - Math.hypot(0.2, -0.7, 0.4))).toBeLessThan(1e-12);
  });
});

describe("projectPoint", () => {
  const cam: Camera = { yaw: 0, pitch: 0, scale: 100, target: [0, 0, 0] };

  it("maps the camera target to the canvas centre", () => {
    const p = projectPoint(cam, [0, 0, 0], 640, 480);
    expect(p.x).toBe(320);
    expect(p.y).toBe(240);
  });

  it("world +z is up on screen at zero pitch", () => {
    const p = projectPoint(cam, [0, 0, 0.5], 640, 480);
    expect(p.x).toBe(320);
    expect(p.y).toBe(240 - 50);
  });

  it("world +x is right on screen at zero yaw", () => {
    const p = projectPoint(cam, [0.5, 0, 0], 640, 480);
    expect(p.x).toBe(320 + 50);
  });

  it("yaw by 90 degrees brings +y to the screen x axis", () => {
    const turned: Camera = { ...cam, yaw: Math.PI / 2 };
    const p = projectPoint(turned, [0, 0.5, 0], 640, 480);
    expect(Math.abs(p.x - 370)).toBeLessThan(1e-9);
  });

  it("depth grows with distance along the view axis", () => {
    const near = projectPoint(cam, [0, 0.1, 0], 640, 480);
    const far = projectPoint(cam, [0, 0.9, 0], 640, 480);
    expect(far.depth).toBeGreaterThan(near.depth);
  });
});

describe("triadOf", () => {
  it("identity pose puts tips on the world axes", () => {
    const pose: Pose7 = [0, 0, 0, 1, 0, 0, 0];
    const triad = triadOf(pose, 0.1);
    close(triad.origin, [0, 0, 0]);
    close(triad.tips[0], [0.1, 0, 0]);
    close(triad.tips[1], [0, 0.1, 0]);
    close(triad.tips[2], [0, 0, 0.1]);
  });

  it("translation moves the whole triad", () => {
    const pose: Pose7 = [1, 2, 3, 1, 0, 0, 0];
    const triad = triadOf(pose, 0.1);
    close(triad.origin, [1, 2, 3]);
    close(triad.tips[2], [1, 2, 3.1]);
  });

  it("rotation turns the tips", () => {
    const pose: Pose7 = [0, 0, 0, SQ2, 0, 0, SQ2]; // 90 degrees about z
    const triad = triadOf(pose, 1);
    close(triad.tips[0], [0, 1, 0], 1e-9);
  });
});
