/**
 * Keyboard teleoperation: held keys map to a twist, emitted at most at the
 * server tick rate; releasing everything emits one final zero twist.
 */

export interface TeleopLimits {
  vMax: number;
  omegaMax: number;
  holonomic: boolean;
}

const FORWARD = new Set(["w", "ArrowUp"]);
const BACK = new Set(["s", "ArrowDown"]);
const LEFT = new Set(["a", "ArrowLeft"]);
const RIGHT = new Set(["d", "ArrowRight"]);
const STRAFE_LEFT = new Set(["q"]);
const STRAFE_RIGHT = new Set(["e"]);

export function twistFromKeys(keys: ReadonlySet<string>,
                              limits: TeleopLimits): [number, number, number] {
  const speed = 0.8 * limits.vMax;
  const turn = 0.8 * limits.omegaMax;
  let vx = 0;
  let vy = 0;
  let omega = 0;
  for (const key of keys) {
    if (FORWARD.has(key)) vx += speed;
    if (BACK.has(key)) vx -= speed;
    if (LEFT.has(key)) omega += turn;
    if (RIGHT.has(key)) omega -= turn;
    if (limits.holonomic && STRAFE_LEFT.has(key)) vy += speed;
    if (limits.holonomic && STRAFE_RIGHT.has(key)) vy -= speed;
  }
  return [
    Math.max(-limits.vMax, Math.min(limits.vMax, vx)),
    Math.max(-limits.vMax, Math.min(limits.vMax, vy)),
    Math.max(-limits.omegaMax, Math.min(limits.omegaMax, omega)),
  ];
}

export class TeleopEmitter {
  private keys = new Set<string>();
  private limits: TeleopLimits;
  private minInterval: number; // ms between frames, matches the tick rate
  private lastSent = -Infinity;
  private zeroSent = true;
  private send: (twist: [number, number, number]) => void;

  constructor(send: (twist: [number, number, number]) => void,
              limits: TeleopLimits, tickRateHz = 20) {
    this.send = send;
    this.limits = limits;
    this.minInterval = 1000 / tickRateHz;
  }

  keyDown(key: string): void {
    this.keys.add(key.length === 1 ? key.toLowerCase() : key);
  }

  keyUp(key: string): void {
    this.keys.delete(key.length === 1 ? key.toLowerCase() : key);
  }

  releaseAll(): void {
    this.keys.clear();
  }

  /** Called on a timer (and after key events); rate-limits emission. */
  pump(nowMs: number): void {
    const twist = twistFromKeys(this.keys, this.limits);
    const moving = twist[0] !== 0 || twist[1] !== 0 || twist[2] !== 0;
    if (moving) {
      if (nowMs - this.lastSent >= this.minInterval) {
        this.send(twist);
        this.lastSent = nowMs;
        this.zeroSent = false;
      }
    } else if (!this.zeroSent) {
      this.send([0, 0, 0]); // exactly one zero frame on release
      this.lastSent = nowMs;
      this.zeroSent = true;
    }
  }
}
