// Single source of truth for the UI.  The websocket handler writes into
// this model and the render loop reads from it; nothing else is shared.

import type {
  JointInfo,
  LatencyFrame,
  Pose7,
  ServerFrame,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "closed";

/** Poses older than this grey out the viewport. */
export const STALE_AFTER_MS = 1000;

/** Rolling cap on the RTD series kept for the chart. */
export const MAX_SERIES = 2000;

/** How long a jogged body stays highlighted in the wireframe scene. */
export const PENDING_HIGHLIGHT_MS = 800;

function clamp(value: number, lo: number, hi: number): number {
  return Math.min(Math.max(value, lo), hi);
}

export class ConsoleModel {
  sceneName = "";
  bodies: string[] = [];
  joints: JointInfo[] = [];
  poses = new Map<string, Pose7>();
  /** Commanded target per movable joint; mirrors the gateway's tracking. */
  commanded = new Map<string, number>();
  rtdSeries: number[] = [];
  latency: LatencyFrame | null = null;
  status: ConnectionStatus = "connecting";
  lastError = "";
  ticks = 0;

  private bodySet = new Set<string>();
  private lastPosesAt = -Infinity;
  /** body name -> time the last command touching it was sent. */
  private pendingUntil = new Map<string, number>();

  /** Route one server frame into the model.  `now` is a ms clock. */
  applyFrame(frame: ServerFrame, now: number): void {
    switch (frame.type) {
      case "scene":
        this.rebuildScene(frame.scene, frame.bodies, frame.joints);
        break;
      case "poses": {
        for (const [name, pose] of Object.entries(frame.poses)) {
          // Never render a body the scene frame did not announce.
          if (!this.bodySet.has(name) || pose.length !== 7) continue;
          this.poses.set(name, pose as Pose7);
        }
        this.ticks = frame.ticks;
        this.lastPosesAt = now;
        break;
      }
      case "latency":
        this.latency = frame;
        this.rtdSeries.push(...frame.series);
        if (this.rtdSeries.length > MAX_SERIES) {
          this.rtdSeries.splice(0, this.rtdSeries.length - MAX_SERIES);
        }
        break;
      case "error":
        this.lastError = frame.message;
        break;
    }
  }

  /** A full rebuild: a reconnect or refresh starts from only the frames. */
  private rebuildScene(
    name: string,
    bodies: string[],
    joints: JointInfo[],
  ): void {
    this.sceneName = name;
    this.bodies = bodies.slice();
    this.bodySet = new Set(bodies);
    this.joints = joints.slice();
    this.poses.clear();
    this.pendingUntil.clear();
    this.commanded.clear();
    for (const joint of joints) {
      if (joint.kind === "fixed" || joint.limits === null) continue;
      const [lo, hi] = joint.limits;
      // Same home the gateway starts from: zero clamped into limits.
      this.commanded.set(joint.name, clamp(0, lo, hi));
    }
    this.lastError = "";
  }

  movableJoints(): JointInfo[] {
    return this.joints.filter(
      (j) => j.kind !== "fixed" && j.limits !== null,
    );
  }

  /**
   * Apply a jog delta to the tracked target, clamped into limits.
   * Returns the new target, or null when the joint is not commandable
   * (the caller then sends nothing).
   */
  nudge(joint: string, delta: number, now: number): number | null {
    const current = this.commanded.get(joint);
    if (current === undefined) return null;
    return this.setTarget(joint, current + delta, now);
  }

  /** Set an absolute target, clamped into limits.  Null if unknown. */
  setTarget(joint: string, target: number, now: number): number | null {
    const info = this.joints.find((j) => j.name === joint);
    if (info === undefined || info.limits === null || info.kind === "fixed") {
      return null;
    }
    const [lo, hi] = info.limits;
    const clamped = clamp(target, lo, hi);
    this.commanded.set(joint, clamped);
    this.pendingUntil.set(info.child, now + PENDING_HIGHLIGHT_MS);
    return clamped;
  }

  /** True while a recent command on this body awaits mirrored confirmation. */
  isPending(body: string, now: number): boolean {
    const until = this.pendingUntil.get(body);
    return until !== undefined && now < until;
  }

  /** No poses for over a second: the view should grey out. */
  isStale(now: number): boolean {
    return now - this.lastPosesAt > STALE_AFTER_MS;
  }

  poseOf(body: string): Pose7 | undefined {
    return this.poses.get(body);
  }
}
