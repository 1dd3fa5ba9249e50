/**
 * Wire protocol: JSON text frames, one object per frame.
 *
 * Server frames are validated structurally before they reach the renderer,
 * so a malformed or hostile frame can never crash the UI; it is reported
 * and dropped instead.
 */

export type Pose = [number, number, number];

export interface ScanPayload {
  angle_min: number;
  angle_increment: number;
  range_max: number;
  ranges: number[];
}

export interface MapPatch {
  resolution: number;
  origin: Pose;
  width: number;
  height: number;
  data: string; // base64 probability bytes, row-major
}

export interface TelemetryFrame {
  type: "telemetry";
  tick: number;
  mode: string;
  pose_true: Pose;
  pose_est: Pose;
  battery_v: number;
  particles?: [number, number, number, number][];
  path?: [number, number][];
  scan?: ScanPayload;
  map_patch?: MapPatch;
}

export interface ErrorFrame {
  type: "error";
  msg: string;
}

export type ServerFrame = TelemetryFrame | ErrorFrame;

export type ClientFrame =
  | { type: "teleop"; twist: [number, number, number] }
  | { type: "goal"; pose: Pose }
  | { type: "set_mode"; mode: "MAPPING" | "IDLE" }
  | { type: "save_map"; path: string };

const MODES = new Set([
  "IDLE", "MAPPING", "PLANNING", "EXECUTING", "RECOVERY",
  "GOAL_REACHED", "ABORTED",
]);

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isPose(v: unknown): v is Pose {
  return Array.isArray(v) && v.length === 3 && v.every(isFiniteNumber);
}

function isNumberPairs(v: unknown, width: number): boolean {
  return (
    Array.isArray(v) &&
    v.every(
      (row) =>
        Array.isArray(row) && row.length === width && row.every(isFiniteNumber),
    )
  );
}

function isScan(v: unknown): v is ScanPayload {
  if (typeof v !== "object" || v === null) return false;
  const s = v as Record<string, unknown>;
  return (
    isFiniteNumber(s.angle_min) &&
    isFiniteNumber(s.angle_increment) &&
    s.angle_increment > 0 &&
    isFiniteNumber(s.range_max) &&
    Array.isArray(s.ranges) &&
    s.ranges.every(isFiniteNumber)
  );
}

function isMapPatch(v: unknown): v is MapPatch {
  if (typeof v !== "object" || v === null) return false;
  const m = v as Record<string, unknown>;
  return (
    isFiniteNumber(m.resolution) &&
    m.resolution > 0 &&
    isPose(m.origin) &&
    Number.isInteger(m.width) &&
    Number.isInteger(m.height) &&
    (m.width as number) > 0 &&
    (m.height as number) > 0 &&
    typeof m.data === "string"
  );
}

/** Parse and validate one server frame; null when it is not usable. */
export function parseServerFrame(text: string): ServerFrame | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const obj = raw as Record<string, unknown>;

  if (obj.type === "error") {
    return typeof obj.msg === "string" ? { type: "error", msg: obj.msg } : null;
  }
  if (obj.type !== "telemetry") return null;

  if (
    !Number.isInteger(obj.tick) ||
    typeof obj.mode !== "string" ||
    !MODES.has(obj.mode) ||
    !isPose(obj.pose_true) ||
    !isPose(obj.pose_est) ||
    !isFiniteNumber(obj.battery_v)
  ) {
    return null;
  }
  const frame: TelemetryFrame = {
    type: "telemetry",
    tick: obj.tick as number,
    mode: obj.mode,
    pose_true: obj.pose_true as Pose,
    pose_est: obj.pose_est as Pose,
    battery_v: obj.battery_v as number,
  };
  if (obj.particles !== undefined) {
    if (!isNumberPairs(obj.particles, 4)) return null;
    frame.particles = obj.particles as [number, number, number, number][];
  }
  if (obj.path !== undefined) {
    if (!isNumberPairs(obj.path, 2)) return null;
    frame.path = obj.path as [number, number][];
  }
  if (obj.scan !== undefined) {
    if (!isScan(obj.scan)) return null;
    frame.scan = obj.scan;
  }
  if (obj.map_patch !== undefined) {
    if (!isMapPatch(obj.map_patch)) return null;
    frame.map_patch = obj.map_patch;
  }
  return frame;
}

export function encodeClientFrame(frame: ClientFrame): string {
  return JSON.stringify(frame);
}

/** Decode the base64 probability raster into bytes (browser and node both
 * provide atob). */
export function decodeMapData(data: string): Uint8Array {
  const binary = atob(data);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}
