// Small fixed-function 3D pipeline: orbit camera, orthographic projection.
// Markers are axis triads, so all the renderer ever projects is points.

import type { Pose7 } from "./protocol.js";

export type V3 = [number, number, number];

export interface Camera {
  /** Rotation about the world Z axis, radians. */
  yaw: number;
  /** Elevation tilt, radians; positive looks down from above. */
  pitch: number;
  /** Pixels per world meter. */
  scale: number;
  target: V3;
}

export const DEFAULT_CAMERA: Camera = {
  yaw: Math.PI / 6,
  pitch: Math.PI / 7,
  scale: 420,
  target: [0, 0, 0.45],
};

/** Rotate a vector by a scalar-first unit quaternion [w, x, y, z]. */
export function rotateByQuat(q: number[], v: V3): V3 {
  const [w, x, y, z] = [q[0] ?? 1, q[1] ?? 0, q[2] ?? 0, q[3] ?? 0];
  const [vx, vy, vz] = v;
  // t = 2 * (q_vec x v); v' = v + w*t + q_vec x t
  const tx = 2 * (y * vz - z * vy);
  const ty = 2 * (z * vx - x * vz);
  const tz = 2 * (x * vy - y * vx);
  return [
    vx + w * tx + (y * tz - z * ty),
    vy + w * ty + (z * tx - x * tz),
    vz + w * tz + (x * ty - y * tx),
  ];
}

export interface Projected {
  x: number;
  y: number;
  /** Camera-space distance used only for draw ordering. */
  depth: number;
}

export function projectPoint(
  cam: Camera,
  p: V3,
  width: number,
  height: number,
): Projected {
  const dx = p[0] - cam.target[0];
  const dy = p[1] - cam.target[1];
  const dz = p[2] - cam.target[2];
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const x1 = cy * dx + sy * dy;
  const y1 = -sy * dx + cy * dy;
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  const y2 = cp * y1 - sp * dz;
  const z2 = sp * y1 + cp * dz;
  return {
    x: width / 2 + cam.scale * x1,
    y: height / 2 - cam.scale * z2,
    depth: y2,
  };
}

export interface Triad {
  origin: V3;
  /** Tips of the body X, Y and Z axes in world space. */
  tips: [V3, V3, V3];
}

/** World-space axis triad for one body pose. */
export function triadOf(pose: Pose7, axisLen: number): Triad {
  const origin: V3 = [pose[0], pose[1], pose[2]];
  const quat = [pose[3], pose[4], pose[5], pose[6]];
  const tips = ([
    [axisLen, 0, 0],
    [0, axisLen, 0],
    [0, 0, axisLen],
  ] as V3[]).map((axis) => {
    const r = rotateByQuat(quat, axis);
    return [origin[0] + r[0], origin[1] + r[1], origin[2] + r[2]] as V3;
  });
  return { origin, tips: tips as [V3, V3, V3] };
}
