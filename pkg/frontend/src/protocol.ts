// Gateway wire protocol: v1 JSON frames over a single websocket.
//
// The server pushes `scene` (once per connection, first), `poses` at the
// broadcast rate, `latency` after a bench, and `error` for anything it
// rejects.  The client sends `jog`, `set_target` and `start_bench`.

export const PROTOCOL_VERSION = 1;

/** [tx, ty, tz, qw, qx, qy, qz] with a scalar-first unit quaternion. */
export type Pose7 = [number, number, number, number, number, number, number];

export interface JointInfo {
  name: string;
  kind: string;
  parent: string;
  child: string;
  limits: [number, number] | null;
}

export interface SceneFrame {
  v: 1;
  type: "scene";
  scene: string;
  bodies: string[];
  joints: JointInfo[];
  broadcast_hz: number;
}

export interface PosesFrame {
  v: 1;
  type: "poses";
  stamp_nanos: number;
  ticks: number;
  poses: Record<string, number[]>;
}

export interface LatencyStats {
  n: number;
  mean_ms: number;
  median_ms: number;
  std_ms: number;
  min_ms: number;
  max_ms: number;
  p95_ms: number;
}

export interface LatencyFrame {
  v: 1;
  type: "latency";
  stats: LatencyStats;
  one_way_ms: number;
  within_threshold: boolean;
  dropped: number;
  series: number[];
}

export interface ErrorFrame {
  v: 1;
  type: "error";
  source: string;
  message: string;
}

export type ServerFrame = SceneFrame | PosesFrame | LatencyFrame | ErrorFrame;

const FRAME_TYPES = new Set(["scene", "poses", "latency", "error"]);

/**
 * Parse one incoming message.  Returns null for anything that is not a
 * well-formed v1 server frame; the caller drops those instead of crashing
 * the render path.
 */
export function parseServerFrame(data: string): ServerFrame | null {
  let raw: unknown;
  try {
    raw = JSON.parse(data);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const obj = raw as Record<string, unknown>;
  if (obj.v !== PROTOCOL_VERSION) return null;
  if (typeof obj.type !== "string" || !FRAME_TYPES.has(obj.type)) return null;
  switch (obj.type) {
    case "scene":
      if (!Array.isArray(obj.bodies) || !Array.isArray(obj.joints)) return null;
      break;
    case "poses":
      if (typeof obj.poses !== "object" || obj.poses === null) return null;
      break;
    case "latency":
      if (typeof obj.stats !== "object" || obj.stats === null) return null;
      if (!Array.isArray(obj.series)) return null;
      break;
    case "error":
      if (typeof obj.message !== "string") return null;
      break;
  }
  return obj as unknown as ServerFrame;
}

// Command builders return the exact JSON text to send, so one user action
// maps to one ws.send call and nothing is appended along the way.

export function jogFrame(joint: string, delta: number): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: "jog", joint, delta });
}

export function setTargetFrame(
  joint: string,
  target: number,
  maxSpeed?: number,
): string {
  const body: Record<string, unknown> = {
    v: PROTOCOL_VERSION,
    type: "set_target",
    joint,
    target,
  };
  if (maxSpeed !== undefined) body.max_speed = maxSpeed;
  return JSON.stringify(body);
}

export function startBenchFrame(frames: number, rateHz: number): string {
  return JSON.stringify({
    v: PROTOCOL_VERSION,
    type: "start_bench",
    frames,
    rate_hz: rateHz,
  });
}
