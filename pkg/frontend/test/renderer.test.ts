import { describe, expect, it } from "vitest";
import { Canvas2DLike, SceneRenderer } from "../src/renderer.js";
import { TelemetryFrame } from "../src/protocol.js";
import { ViewTransform } from "../src/transform.js";

class RecordingContext implements Canvas2DLike {
  fillStyle: string = "";
  strokeStyle: string = "";
  globalAlpha = 1;
  lineWidth = 1;
  font = "";
  calls: string[] = [];
  texts: string[] = [];

  fillRect() { this.calls.push("fillRect"); }
  clearRect() { this.calls.push("clearRect"); }
  beginPath() { this.calls.push("beginPath"); }
  moveTo() { this.calls.push("moveTo"); }
  lineTo() { this.calls.push("lineTo"); }
  arc() { this.calls.push("arc"); }
  fill() { this.calls.push("fill"); }
  stroke() { this.calls.push("stroke"); }
  fillText(text: string) { this.calls.push("fillText"); this.texts.push(text); }
  drawImage() { this.calls.push("drawImage"); }
}

function frame(tick: number, extra: Partial<TelemetryFrame> = {}): TelemetryFrame {
  return {
    type: "telemetry",
    tick,
    mode: "EXECUTING",
    pose_true: [1 + tick * 0.01, 2, 0.1],
    pose_est: [1 + tick * 0.01, 2, 0.1],
    battery_v: 14.8,
    ...extra,
  };
}

function makeRenderer() {
  const ctx = new RecordingContext();
  const view = new ViewTransform(400, 400, 40, 2, 2);
  const renderer = new SceneRenderer(ctx, view, () => ({ fake: true }));
  return { ctx, renderer };
}

describe("latest-frame-wins", () => {
  it("drops stale frames under a 10x telemetry burst", () => {
    const { renderer } = makeRenderer();
    for (let round = 0; round < 5; round++) {
      for (let i = 0; i < 10; i++) {
        renderer.submit(frame(round * 10 + i));
      }
      renderer.render();
      // the drawn frame is the newest of the burst
      expect(renderer.latest!.tick).toBe(round * 10 + 9);
    }
    expect(renderer.framesReceived).toBe(50);
    expect(renderer.framesRendered).toBe(5);
    expect(renderer.framesDropped).toBe(45);
  });

  it("renders nothing new without a frame", () => {
    const { renderer } = makeRenderer();
    expect(renderer.render()).toBe(false);
    renderer.submit(frame(1));
    expect(renderer.render()).toBe(true);
    // no pending frame: render redraws the current one
    expect(renderer.render()).toBe(true);
  });
});

describe("scene content", () => {
  it("draws the path polyline with one vertex per point", () => {
    const { ctx, renderer } = makeRenderer();
    renderer.submit(frame(1, { path: [[1, 1], [2, 1], [2, 2]] }));
    renderer.render();
    const moves = ctx.calls.filter((c) => c === "moveTo").length;
    const lines = ctx.calls.filter((c) => c === "lineTo").length;
    // path contributes 1 moveTo + 2 lineTo on top of the robot/heading lines
    expect(moves).toBeGreaterThanOrEqual(1);
    expect(lines).toBeGreaterThanOrEqual(2);
  });

  it("draws one whisker per particle", () => {
    const { ctx, renderer } = makeRenderer();
    const particles: [number, number, number, number][] = [
      [1, 1, 0, 0.5], [1.5, 1, 1, 0.3], [2, 1, -1, 0.2],
    ];
    const before = new RecordingContext();
    renderer.submit(frame(1));
    renderer.render();
    const baseStrokes = ctx.calls.filter((c) => c === "stroke").length;
    ctx.calls.length = 0;
    renderer.submit(frame(2, { particles }));
    renderer.render();
    const strokes = ctx.calls.filter((c) => c === "stroke").length;
    expect(strokes - baseStrokes).toBe(particles.length);
    void before;
  });

  it("caches the map raster until a new patch arrives", () => {
    const { ctx, renderer } = makeRenderer();
    const patch = {
      resolution: 0.05, origin: [0, 0, 0] as [number, number, number],
      width: 2, height: 2, data: "AAD/AA==",
    };
    renderer.submit(frame(1, { map_patch: patch }));
    renderer.render();
    renderer.submit(frame(2));
    renderer.render();
    expect(ctx.calls.filter((c) => c === "drawImage").length).toBe(2);
  });
});

describe("goal markers", () => {
  it("renders a rejection marker with the server message", () => {
    const { ctx, renderer } = makeRenderer();
    renderer.markGoal(3.5, 3.5, 0);
    renderer.markGoalRejected("goal cell is inside an obstacle");
    renderer.submit(frame(1));
    renderer.render();
    expect(renderer.goalMarker!.rejected).toBe(true);
    expect(ctx.texts.join(" ")).toContain("inside an obstacle");
  });

  it("keeps the previous scene on malformed frames (no crash path)", () => {
    const { renderer } = makeRenderer();
    renderer.submit(frame(7));
    renderer.render();
    // a malformed frame never reaches submit(); the scene re-renders as-is
    expect(renderer.render()).toBe(true);
    expect(renderer.latest!.tick).toBe(7);
  });
});
