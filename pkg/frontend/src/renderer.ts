/**
 * Immediate-mode canvas scene: map raster, particle arrows, global path,
 * robot disc, scan points, goal markers.
 *
 * The renderer is latest-frame-wins: incoming telemetry only replaces a
 * pending slot, and one render consumes whatever is newest at draw time, so
 * a telemetry burst never queues stale work. The map raster is cached as an
 * offscreen image and rebuilt only when a map_patch frame arrives.
 */
import { MapPatch, TelemetryFrame, decodeMapData } from "./protocol.js";
import { ViewTransform } from "./transform.js";

/** The 2D-context subset the renderer uses; tests pass a recording fake. */
export interface Canvas2DLike {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  drawImage(image: unknown, dx: number, dy: number, dw: number, dh: number): void;
}

/** Creates a drawable image from RGBA bytes; the browser backs it with an
 * offscreen canvas, tests with a stub. */
export type RasterFactory = (
  pixels: Uint8ClampedArray, width: number, height: number) => unknown;

export interface GoalMarker {
  x: number;
  y: number;
  theta: number;
  rejected: boolean;
  message?: string;
}

export class SceneRenderer {
  private ctx: Canvas2DLike;
  private view: ViewTransform;
  private makeRaster: RasterFactory;
  private pending: TelemetryFrame | null = null;
  private current: TelemetryFrame | null = null;
  private mapImage: unknown = null;
  private mapPatch: MapPatch | null = null;
  goalMarker: GoalMarker | null = null;
  framesReceived = 0;
  framesRendered = 0;
  framesDropped = 0;

  constructor(ctx: Canvas2DLike, view: ViewTransform, makeRaster: RasterFactory) {
    this.ctx = ctx;
    this.view = view;
    this.makeRaster = makeRaster;
  }

  /** Stage a telemetry frame; an unrendered predecessor is dropped. */
  submit(frame: TelemetryFrame): void {
    this.framesReceived += 1;
    if (this.pending !== null) {
      this.framesDropped += 1;
    }
    this.pending = frame;
    if (frame.map_patch) {
      this.mapPatch = frame.map_patch;
      this.mapImage = this.buildMapImage(frame.map_patch);
    }
  }

  markGoal(x: number, y: number, theta: number): void {
    this.goalMarker = { x, y, theta, rejected: false };
  }

  markGoalRejected(message: string): void {
    if (this.goalMarker) {
      this.goalMarker = { ...this.goalMarker, rejected: true, message };
    }
  }

  get latest(): TelemetryFrame | null {
    return this.pending ?? this.current;
  }

  /** Draw the newest frame; returns false when nothing new arrived. */
  render(): boolean {
    if (this.pending !== null) {
      this.current = this.pending;
      this.pending = null;
    }
    if (this.current === null) return false;
    this.framesRendered += 1;
    const frame = this.current;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.view.canvasWidth, this.view.canvasHeight);
    ctx.globalAlpha = 1;
    ctx.fillStyle = "#fafafa";
    ctx.fillRect(0, 0, this.view.canvasWidth, this.view.canvasHeight);

    this.drawMap();
    if (frame.path) this.drawPath(frame.path);
    if (frame.particles) this.drawParticles(frame.particles);
    if (frame.scan) this.drawScan(frame);
    this.drawRobot(frame.pose_true, "#1565c0", true);
    this.drawRobot(frame.pose_est, "#26a69a", false);
    if (this.goalMarker) this.drawGoal(this.goalMarker);
    return true;
  }

  private buildMapImage(patch: MapPatch): unknown {
    const bytes = decodeMapData(patch.data);
    const pixels = new Uint8ClampedArray(patch.width * patch.height * 4);
    for (let i = 0; i < bytes.length; i++) {
      // occupancy probability 0..255 -> dark occupied, light free,
      // mid-gray unknown (around 127)
      const p = bytes[i];
      let shade: number;
      if (p > 166) shade = 40;        // occupied
      else if (p < 64) shade = 245;   // free
      else shade = 205;               // unknown
      const j = i * 4;
      pixels[j] = pixels[j + 1] = pixels[j + 2] = shade;
      pixels[j + 3] = 255;
    }
    return this.makeRaster(pixels, patch.width, patch.height);
  }

  private drawMap(): void {
    if (this.mapImage === null || this.mapPatch === null) return;
    const patch = this.mapPatch;
    const [x0, y0] = this.view.worldToScreen(
      patch.origin[0], patch.origin[1] + patch.height * patch.resolution);
    const w = patch.width * patch.resolution * this.view.scale;
    const h = patch.height * patch.resolution * this.view.scale;
    this.ctx.drawImage(this.mapImage, x0, y0, w, h);
  }

  private drawPath(path: [number, number][]): void {
    if (path.length === 0) return;
    const ctx = this.ctx;
    ctx.strokeStyle = "#a0522d";
    ctx.lineWidth = 2;
    ctx.beginPath();
    const [sx, sy] = this.view.worldToScreen(path[0][0], path[0][1]);
    ctx.moveTo(sx, sy);
    for (let i = 1; i < path.length; i++) {
      const [px, py] = this.view.worldToScreen(path[i][0], path[i][1]);
      ctx.lineTo(px, py);
    }
    ctx.stroke();
  }

  private drawParticles(particles: [number, number, number, number][]): void {
    const ctx = this.ctx;
    let wMax = 0;
    for (const p of particles) wMax = Math.max(wMax, p[3]);
    const len = 8;
    ctx.strokeStyle = "#7b1fa2";
    for (const [x, y, theta, w] of particles) {
      ctx.globalAlpha = wMax > 0 ? 0.15 + 0.85 * (w / wMax) : 0.5;
      const [sx, sy] = this.view.worldToScreen(x, y);
      ctx.beginPath();
      ctx.moveTo(sx, sy);
      ctx.lineTo(sx + len * Math.cos(theta), sy - len * Math.sin(theta));
      ctx.stroke();
    }
    ctx.globalAlpha = 1;
  }

  private drawScan(frame: TelemetryFrame): void {
    const scan = frame.scan!;
    const [x, y, theta] = frame.pose_true;
    const ctx = this.ctx;
    ctx.fillStyle = "#e53935";
    for (let i = 0; i < scan.ranges.length; i++) {
      const r = scan.ranges[i];
      if (r >= scan.range_max) continue;
      const a = theta + scan.angle_min + i * scan.angle_increment;
      const [sx, sy] = this.view.worldToScreen(
        x + r * Math.cos(a), y + r * Math.sin(a));
      ctx.fillRect(sx - 1, sy - 1, 2, 2);
    }
  }

  private drawRobot(pose: [number, number, number], color: string,
                    filled: boolean): void {
    const ctx = this.ctx;
    const [sx, sy] = this.view.worldToScreen(pose[0], pose[1]);
    const r = Math.max(0.18 * this.view.scale, 4);
    ctx.beginPath();
    ctx.arc(sx, sy, r, 0, 2 * Math.PI);
    if (filled) {
      ctx.globalAlpha = 0.35;
      ctx.fillStyle = color;
      ctx.fill();
      ctx.globalAlpha = 1;
    }
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(sx + r * Math.cos(pose[2]), sy - r * Math.sin(pose[2]));
    ctx.stroke();
  }

  private drawGoal(marker: GoalMarker): void {
    const ctx = this.ctx;
    const [sx, sy] = this.view.worldToScreen(marker.x, marker.y);
    const color = marker.rejected ? "#d32f2f" : "#2e7d32";
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(sx, sy, 7, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(sx + 14 * Math.cos(marker.theta), sy - 14 * Math.sin(marker.theta));
    ctx.stroke();
    if (marker.rejected) {
      ctx.beginPath();
      ctx.moveTo(sx - 5, sy - 5);
      ctx.lineTo(sx + 5, sy + 5);
      ctx.moveTo(sx + 5, sy - 5);
      ctx.lineTo(sx - 5, sy + 5);
      ctx.stroke();
      if (marker.message) {
        ctx.fillStyle = color;
        ctx.font = "12px system-ui";
        ctx.fillText(marker.message, sx + 10, sy - 10);
      }
    }
  }
}
