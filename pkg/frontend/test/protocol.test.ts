import { describe, expect, it } from "vitest";
import { encodeClientFrame, parseServerFrame } from "../src/protocol.js";

const telemetry = {
  type: "telemetry",
  tick: 12,
  mode: "EXECUTING",
  pose_true: [1.0, 2.0, 0.3],
  pose_est: [1.1, 2.0, 0.28],
  battery_v: 14.6,
};

describe("parseServerFrame", () => {
  it("accepts a minimal telemetry frame", () => {
    const frame = parseServerFrame(JSON.stringify(telemetry));
    expect(frame).not.toBeNull();
    expect(frame!.type).toBe("telemetry");
  });

  it("accepts optional payloads", () => {
    const full = {
      ...telemetry,
      particles: [[1, 2, 0.1, 0.002]],
      path: [[1, 1], [2, 2]],
      scan: { angle_min: -Math.PI, angle_increment: 0.0349, range_max: 12, ranges: [1, 2, 3] },
      map_patch: { resolution: 0.05, origin: [0, 0, 0], width: 2, height: 2, data: "AAAA" },
    };
    const frame = parseServerFrame(JSON.stringify(full));
    expect(frame).not.toBeNull();
    if (frame!.type === "telemetry") {
      expect(frame!.path!.length).toBe(2);
      expect(frame!.map_patch!.width).toBe(2);
    }
  });

  it("accepts error frames", () => {
    const frame = parseServerFrame('{"type":"error","msg":"goal cell is inside an obstacle"}');
    expect(frame).toEqual({ type: "error", msg: "goal cell is inside an obstacle" });
  });

  it("rejects malformed JSON without throwing", () => {
    expect(parseServerFrame("{nope")).toBeNull();
    expect(parseServerFrame("42")).toBeNull();
    expect(parseServerFrame("null")).toBeNull();
  });

  it("rejects wrong shapes", () => {
    expect(parseServerFrame(JSON.stringify({ type: "telemetry" }))).toBeNull();
    expect(parseServerFrame(JSON.stringify({ ...telemetry, pose_true: [1, 2] }))).toBeNull();
    expect(parseServerFrame(JSON.stringify({ ...telemetry, mode: "FLYING" }))).toBeNull();
    expect(parseServerFrame(JSON.stringify({ ...telemetry, battery_v: "full" }))).toBeNull();
    expect(parseServerFrame(JSON.stringify({ ...telemetry, path: [[1]] }))).toBeNull();
  });

  it("survives fuzzed inputs", () => {
    let seed = 1234567;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) & 0x7fffffff;
      return seed / 0x7fffffff;
    };
    const pieces = ['{"type":', '"telemetry"', "[1,2,3]", "}", "{", '"tick":', "1e309",
                    '"msg"', ":", "null", ",", '"pose_true":', '"error"'];
    for (let i = 0; i < 500; i++) {
      let text = "";
      const n = 1 + Math.floor(rand() * 8);
      for (let j = 0; j < n; j++) {
        text += pieces[Math.floor(rand() * pieces.length)];
      }
      expect(() => parseServerFrame(text)).not.toThrow();
    }
  });
});

describe("encodeClientFrame", () => {
  it("emits schema-shaped frames", () => {
    expect(JSON.parse(encodeClientFrame({ type: "teleop", twist: [0.1, 0, -0.2] })))
      .toEqual({ type: "teleop", twist: [0.1, 0, -0.2] });
    expect(JSON.parse(encodeClientFrame({ type: "goal", pose: [2, 3, 0] })))
      .toEqual({ type: "goal", pose: [2, 3, 0] });
    expect(JSON.parse(encodeClientFrame({ type: "set_mode", mode: "MAPPING" })))
      .toEqual({ type: "set_mode", mode: "MAPPING" });
  });
});
