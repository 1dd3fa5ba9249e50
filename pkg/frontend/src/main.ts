/**
 * Browser entry point: socket wiring, input handling, render loop.
 * Server truth flows in as telemetry; this file owns no robot state.
 */
import { SceneRenderer } from "./renderer.js";
import { UiSession } from "./session.js";
import { TeleopEmitter } from "./teleop.js";
import { ViewTransform } from "./transform.js";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const modeEl = document.getElementById("mode")!;
const batteryEl = document.getElementById("battery")!;
const batteryBar = document.getElementById("battery-bar")!;
const bannerEl = document.getElementById("banner")!;
const toolButtons = Array.from(document.querySelectorAll<HTMLButtonElement>("[data-tool]"));

const view = new ViewTransform(canvas.width, canvas.height, 60, 5, 5);
try {
  const saved = localStorage.getItem("gennav-view");
  if (saved) Object.assign(view, JSON.parse(saved));
} catch {
  // ignore a corrupt saved transform
}

const renderer = new SceneRenderer(ctx, view, (pixels, width, height) => {
  const off = document.createElement("canvas");
  off.width = width;
  off.height = height;
  const octx = off.getContext("2d")!;
  const image = octx.createImageData(width, height);
  image.data.set(pixels);
  // map rows go bottom-up; the raster is flipped once here
  octx.putImageData(image, 0, 0);
  const flipped = document.createElement("canvas");
  flipped.width = width;
  flipped.height = height;
  const fctx = flipped.getContext("2d")!;
  fctx.scale(1, -1);
  fctx.drawImage(off, 0, -height);
  return flipped;
});

const session = new UiSession();
const teleop = new TeleopEmitter(
  (twist) => session.sendTeleop(twist),
  { vMax: 0.5, omegaMax: 1.5, holonomic: true },
);

function showBanner(text: string, bad = true): void {
  bannerEl.textContent = text;
  bannerEl.className = bad ? "banner error" : "banner info";
  bannerEl.classList.remove("hidden");
  setTimeout(() => bannerEl.classList.add("hidden"), 4000);
}

session.onTelemetry = (frame) => {
  renderer.submit(frame);
  modeEl.textContent = frame.mode;
  batteryEl.textContent = `${frame.battery_v.toFixed(2)} V`;
  const frac = Math.max(0, Math.min(1, (frame.battery_v - 11.0) / (14.8 - 11.0)));
  (batteryBar as HTMLElement).style.width = `${(frac * 100).toFixed(0)}%`;
  if (frame.mode === "GOAL_REACHED" && renderer.goalMarker) {
    renderer.goalMarker = null;
  }
};
session.onError = (msg) => {
  renderer.markGoalRejected(msg);
  showBanner(`server: ${msg}`);
};
session.onStatus = (connected) => {
  statusEl.textContent = connected ? "connected" : "disconnected";
  statusEl.className = connected ? "ok" : "bad";
  if (!connected) showBanner("socket disconnected; inputs are dropped");
};

function connect(): void {
  const ws = new WebSocket(`ws://${location.host}/`);
  ws.onopen = () => session.attach(ws);
  ws.onmessage = (event) => session.receive(String(event.data));
  ws.onclose = () => {
    session.detach();
    setTimeout(connect, 1500);
  };
  ws.onerror = () => ws.close();
}
connect();

// --- tools -----------------------------------------------------------------

function setTool(tool: "teleop" | "goal" | "inspect"): void {
  session.tool = tool;
  for (const b of toolButtons) {
    b.classList.toggle("active", b.dataset.tool === tool);
  }
  if (tool !== "teleop") teleop.releaseAll();
}
for (const b of toolButtons) {
  b.onclick = () => setTool(b.dataset.tool as "teleop" | "goal" | "inspect");
}
setTool("teleop");

(document.getElementById("btn-mapping") as HTMLButtonElement).onclick = () =>
  session.sendFrame({ type: "set_mode", mode: "MAPPING" });
(document.getElementById("btn-idle") as HTMLButtonElement).onclick = () =>
  session.sendFrame({ type: "set_mode", mode: "IDLE" });
(document.getElementById("btn-save") as HTMLButtonElement).onclick = () => {
  const path = prompt("save map as (server-side stem)", "maps/teleop_map");
  if (path) session.sendFrame({ type: "save_map", path });
};

// --- keyboard --------------------------------------------------------------

window.addEventListener("keydown", (e) => {
  if (session.tool !== "teleop") return;
  teleop.keyDown(e.key);
  teleop.pump(performance.now());
});
window.addEventListener("keyup", (e) => {
  teleop.keyUp(e.key);
  teleop.pump(performance.now());
});
window.addEventListener("blur", () => {
  teleop.releaseAll();
  teleop.pump(performance.now());
});
setInterval(() => teleop.pump(performance.now()), 50);

// --- mouse: goal placement (click sets xy, drag sets heading) -----------------

let goalDrag: { x: number; y: number } | null = null;

canvas.addEventListener("mousedown", (e) => {
  const rect = canvas.getBoundingClientRect();
  const px = e.clientX - rect.left;
  const py = e.clientY - rect.top;
  if (session.tool === "goal") {
    const [wx, wy] = view.screenToWorld(px, py);
    goalDrag = { x: wx, y: wy };
  } else {
    panDrag = { px, py };
  }
});

let panDrag: { px: number; py: number } | null = null;

canvas.addEventListener("mousemove", (e) => {
  const rect = canvas.getBoundingClientRect();
  const px = e.clientX - rect.left;
  const py = e.clientY - rect.top;
  if (goalDrag) {
    const [wx, wy] = view.screenToWorld(px, py);
    renderer.goalMarker = {
      x: goalDrag.x, y: goalDrag.y,
      theta: Math.atan2(wy - goalDrag.y, wx - goalDrag.x),
      rejected: false,
    };
  } else if (panDrag) {
    view.pan(px - panDrag.px, py - panDrag.py);
    panDrag = { px, py };
    persistView();
  }
});

canvas.addEventListener("mouseup", (e) => {
  const rect = canvas.getBoundingClientRect();
  const px = e.clientX - rect.left;
  const py = e.clientY - rect.top;
  panDrag = null;
  if (!goalDrag) return;
  const [wx, wy] = view.screenToWorld(px, py);
  const dx = wx - goalDrag.x;
  const dy = wy - goalDrag.y;
  // click without drag: default the heading to the robot's current one
  const theta = Math.hypot(dx, dy) > 0.05
    ? Math.atan2(dy, dx)
    : renderer.latest?.pose_est[2] ?? 0;
  renderer.markGoal(goalDrag.x, goalDrag.y, theta);
  if (!session.sendGoal(goalDrag.x, goalDrag.y, theta)) {
    showBanner("goal not sent (disconnected or one already pending)");
  }
  goalDrag = null;
});

canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  const rect = canvas.getBoundingClientRect();
  view.zoomAt(e.clientX - rect.left, e.clientY - rect.top,
              e.deltaY < 0 ? 1.15 : 1 / 1.15);
  persistView();
});

function persistView(): void {
  try {
    localStorage.setItem("gennav-view", JSON.stringify({
      scale: view.scale, centerX: view.centerX, centerY: view.centerY,
    }));
  } catch {
    // storage may be unavailable; the transform is the only local state
  }
}

// --- render loop ----------------------------------------------------------------

function loop(): void {
  renderer.render();
  requestAnimationFrame(loop);
}
requestAnimationFrame(loop);
