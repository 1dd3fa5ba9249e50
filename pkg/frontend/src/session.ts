/**
 * UI session state: socket lifecycle, latest-frame handoff to the renderer,
 * pending goal bookkeeping, and the active tool.
 */
import { ClientFrame, ServerFrame, encodeClientFrame, parseServerFrame } from "./protocol.js";

export type Tool = "teleop" | "goal" | "inspect";

export interface SocketLike {
  send(data: string): void;
  readyState: number;
}

export class UiSession {
  socket: SocketLike | null = null;
  connected = false;
  tool: Tool = "teleop";
  lastError: string | null = null;
  goalInFlight = false;
  malformedFrames = 0;

  onTelemetry: ((frame: ServerFrame & { type: "telemetry" }) => void) | null = null;
  onError: ((msg: string) => void) | null = null;
  onStatus: ((connected: boolean) => void) | null = null;

  attach(socket: SocketLike): void {
    this.socket = socket;
    this.connected = true;
    this.onStatus?.(true);
  }

  detach(): void {
    this.socket = null;
    this.connected = false;
    this.goalInFlight = false;
    this.onStatus?.(false);
  }

  receive(text: string): void {
    const frame = parseServerFrame(text);
    if (frame === null) {
      this.malformedFrames += 1;
      return; // hostile or garbled frame: drop, keep the previous scene
    }
    if (frame.type === "error") {
      this.lastError = frame.msg;
      this.goalInFlight = false;
      this.onError?.(frame.msg);
      return;
    }
    if (this.goalInFlight && (frame.mode === "PLANNING" || frame.mode === "EXECUTING")) {
      this.goalInFlight = false; // server took the goal
    }
    this.onTelemetry?.(frame);
  }

  sendFrame(frame: ClientFrame): boolean {
    if (!this.socket || !this.connected) return false;
    this.socket.send(encodeClientFrame(frame));
    return true;
  }

  sendTeleop(twist: [number, number, number]): boolean {
    return this.sendFrame({ type: "teleop", twist });
  }

  /** One goal at a time: a second click is ignored until resolution. */
  sendGoal(x: number, y: number, theta: number): boolean {
    if (this.goalInFlight) return false;
    if (this.sendFrame({ type: "goal", pose: [x, y, theta] })) {
      this.goalInFlight = true;
      return true;
    }
    return false;
  }
}
