// Console bootstrap: wires the websocket client, the model and the DOM.

import { ConsoleModel, type ConnectionStatus } from "./model.js";
import {
  jogFrame,
  setTargetFrame,
  startBenchFrame,
  type JointInfo,
} from "./protocol.js";
import { GatewayClient } from "./socket.js";
import { DEFAULT_CAMERA, type Camera } from "./project.js";
import {
  drawDualScene,
  drawSparkline,
  ONE_WAY_THRESHOLD_MS,
  panelRows,
} from "./render.js";

function wsUrl(): string {
  const override = new URLSearchParams(location.search).get("ws");
  if (override !== null) return override;
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ws`;
}

const $ = (id: string) => document.getElementById(id)!;

const model = new ConsoleModel();
const cam: Camera = { ...DEFAULT_CAMERA };
let benchPending = false;

const client = new GatewayClient(wsUrl(), {
  onFrame: (frame) => {
    model.applyFrame(frame, performance.now());
    if (frame.type === "scene") {
      // Every (re)connect re-sends the scene; rebuild the panel from it.
      $("scene-name").textContent = frame.scene;
      buildJogPanel();
    } else if (frame.type === "latency") {
      benchPending = false;
      ($("bench-run") as HTMLButtonElement).disabled = false;
      renderLatencyPanel();
    } else if (frame.type === "error") {
      benchPending = false;
      ($("bench-run") as HTMLButtonElement).disabled = false;
      showToast(`${frame.source}: ${frame.message}`);
    }
  },
  onStatus: (status) => setStatus(status),
});

function setStatus(status: ConnectionStatus): void {
  const dot = $("status-dot");
  dot.className = `dot ${status}`;
  $("status-text").textContent = status;
  const banner = $("banner");
  if (status === "closed") {
    banner.textContent =
      "connection lost; reconnecting (commands queue, up to 10)";
    banner.classList.add("visible");
  } else if (status === "connected") {
    banner.classList.remove("visible");
  }
}

let toastTimer: ReturnType<typeof setTimeout> | null = null;
function showToast(message: string): void {
  const el = $("toast");
  el.textContent = message;
  el.classList.add("visible");
  if (toastTimer !== null) clearTimeout(toastTimer);
  toastTimer = setTimeout(() => el.classList.remove("visible"), 4000);
}

// -- jog panel ---------------------------------------------------------------

function jogRow(joint: JointInfo): HTMLElement {
  const [lo, hi] = joint.limits!;
  const span = hi - lo;
  const delta = span / 40;

  const row = document.createElement("div");
  row.className = "jog-row";

  const name = document.createElement("span");
  name.className = "jog-name";
  name.textContent = joint.name;
  name.title = `${joint.kind}; moves ${joint.child}`;

  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = String(lo);
  slider.max = String(hi);
  slider.step = String(span / 200);
  slider.value = String(model.commanded.get(joint.name) ?? 0);

  const value = document.createElement("span");
  value.className = "jog-value";
  const showValue = (v: number) => {
    value.textContent = v.toFixed(3);
  };
  showValue(Number(slider.value));

  const send = (text: string) => {
    if (!client.send(text)) showToast("offline queue full, command refused");
  };

  const minus = document.createElement("button");
  minus.textContent = "−";
  minus.onclick = () => {
    const target = model.nudge(joint.name, -delta, performance.now());
    if (target === null) return;
    send(jogFrame(joint.name, -delta));
    slider.value = String(target);
    showValue(target);
  };

  const plus = document.createElement("button");
  plus.textContent = "+";
  plus.onclick = () => {
    const target = model.nudge(joint.name, delta, performance.now());
    if (target === null) return;
    send(jogFrame(joint.name, delta));
    slider.value = String(target);
    showValue(target);
  };

  slider.oninput = () => showValue(Number(slider.value)); // preview only
  slider.onchange = () => {
    const target = model.setTarget(joint.name, Number(slider.value),
                                   performance.now());
    if (target === null) return;
    send(setTargetFrame(joint.name, target));
    slider.value = String(target);
    showValue(target);
  };

  row.append(name, minus, slider, plus, value);
  return row;
}

function buildJogPanel(): void {
  const panel = $("jog-panel");
  panel.replaceChildren();
  for (const joint of model.movableJoints()) {
    panel.append(jogRow(joint));
  }
}

// -- latency panel -------------------------------------------------------------

function renderLatencyPanel(): void {
  const stats = $("latency-stats");
  stats.replaceChildren();
  for (const row of panelRows(model.latency)) {
    const div = document.createElement("div");
    div.className = "stat";
    const label = document.createElement("span");
    label.textContent = row.label;
    const val = document.createElement("b");
    val.textContent = row.text;
    val.title = String(row.raw); // exact frame value on hover
    div.append(label, val);
    stats.append(div);
  }
  const badge = $("threshold-badge");
  if (model.latency === null) {
    badge.className = "badge";
    badge.textContent = "no bench yet";
  } else if (model.latency.within_threshold) {
    badge.className = "badge ok";
    badge.textContent =
      `one way ${model.latency.one_way_ms.toFixed(2)} ms < ` +
      `${ONE_WAY_THRESHOLD_MS} ms`;
  } else {
    badge.className = "badge bad";
    badge.textContent =
      `one way ${model.latency.one_way_ms.toFixed(2)} ms ≥ ` +
      `${ONE_WAY_THRESHOLD_MS} ms`;
  }
}

// -- render loop ---------------------------------------------------------------

function loop(): void {
  const canvas = $("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const spark = $("spark") as HTMLCanvasElement;
  const sctx = spark.getContext("2d")!;

  const frame = () => {
    const now = performance.now();
    drawDualScene(ctx, model, cam, canvas.width, canvas.height, now);
    drawSparkline(sctx, model.rtdSeries, spark.width, spark.height);
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

// -- input ---------------------------------------------------------------------

function bindOrbit(canvas: HTMLCanvasElement): void {
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.onmousedown = (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
  };
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  window.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    cam.yaw += (e.clientX - lastX) * 0.01;
    cam.pitch = Math.min(
      Math.max(cam.pitch + (e.clientY - lastY) * 0.01, -1.4),
      1.4,
    );
    lastX = e.clientX;
    lastY = e.clientY;
  });
  canvas.onwheel = (e) => {
    e.preventDefault();
    cam.scale = Math.min(Math.max(cam.scale * (e.deltaY < 0 ? 1.1 : 0.9),
                                  60), 4000);
  };
}

function bindBench(): void {
  const run = $("bench-run") as HTMLButtonElement;
  run.onclick = () => {
    if (benchPending) return;
    const frames = Number(($("bench-frames") as HTMLInputElement).value);
    const rate = Number(($("bench-rate") as HTMLInputElement).value);
    if (!Number.isFinite(frames) || frames < 1) return;
    if (!Number.isFinite(rate) || rate <= 0) return;
    benchPending = true;
    run.disabled = true;
    client.send(startBenchFrame(Math.floor(frames), rate));
    // Guard against a frame that never comes back.
    setTimeout(() => {
      benchPending = false;
      run.disabled = false;
    }, 30_000);
  };
}

window.addEventListener("load", () => {
  bindOrbit($("scene") as HTMLCanvasElement);
  bindBench();
  renderLatencyPanel();
  client.connect();
  loop();
});
