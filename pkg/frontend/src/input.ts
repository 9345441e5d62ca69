import { clampCommand, ControlBounds } from "./protocol.js";

export const THRUST_STEP = 0.1;
const STICK_DEADZONE = 0.15;

/**
 * Keyboard/gamepad state for the piloted vessel.
 *
 * Thrust is a sticky setpoint: each ArrowUp/ArrowDown press (and key repeat)
 * nudges it by 0.1 m/s, Space zeroes it. The rudder is tiller-like: hard
 * over while an arrow is held, spring to zero on release, so losing window
 * focus can never leave the vessel stuck in a turn. A gamepad stick, when
 * deflected past the deadzone, writes both channels directly.
 */
export class PilotInput {
  private uThr = 0;
  private rudderHeld = 0; // -1 starboard, 0 neutral, +1 port

  constructor(public bounds: ControlBounds) {}

  /** Returns true when the key is one of ours (caller should preventDefault). */
  keyDown(code: string): boolean {
    switch (code) {
      case "ArrowUp":
        this.uThr += THRUST_STEP;
        break;
      case "ArrowDown":
        this.uThr -= THRUST_STEP;
        break;
      case "ArrowLeft":
        this.rudderHeld = 1;
        break;
      case "ArrowRight":
        this.rudderHeld = -1;
        break;
      case "Space":
        this.uThr = 0;
        break;
      default:
        return false;
    }
    this.uThr = Math.min(
      Math.max(this.uThr, -this.bounds.thrMin),
      this.bounds.thrMax,
    );
    this.uThr = Math.round(this.uThr * 10) / 10; // keep the setpoint on the 0.1 lattice
    return true;
  }

  keyUp(code: string): boolean {
    if (code === "ArrowLeft" && this.rudderHeld === 1) {
      this.rudderHeld = 0;
      return true;
    }
    if (code === "ArrowRight" && this.rudderHeld === -1) {
      this.rudderHeld = 0;
      return true;
    }
    return code === "ArrowUp" || code === "ArrowDown" || code === "Space";
  }

  /** Focus lost: release the rudder, keep the thrust setpoint. */
  releaseHeld(): void {
    this.rudderHeld = 0;
  }

  /** Feed one gamepad poll; axes[1] is stick forward (negative up), axes[0] turn. */
  gamepadSample(axes: ReadonlyArray<number>): void {
    if (axes.length < 2) {
      return;
    }
    const fwd = -axes[1];
    const turn = axes[0];
    if (Math.abs(fwd) > STICK_DEADZONE) {
      const span = fwd > 0 ? this.bounds.thrMax : this.bounds.thrMin;
      this.uThr = fwd * span;
    }
    if (Math.abs(turn) > STICK_DEADZONE) {
      this.rudderHeld = -turn; // stick right = starboard = negative rate
    } else if (Math.abs(this.rudderHeld) > 0 && Math.abs(this.rudderHeld) !== 1) {
      this.rudderHeld = 0; // spring back once an analog deflection ends
    }
  }

  /** Current command, pre-clamped to the mirrored bounds. */
  command(): { uThr: number; uRud: number } {
    const rud =
      this.rudderHeld >= 0
        ? this.rudderHeld * this.bounds.rudMax
        : this.rudderHeld * this.bounds.rudMin;
    return clampCommand(this.uThr, rud, this.bounds);
  }
}

/**
 * Rate gate in front of the socket: at most one command per interval, and
 * nothing at all while disconnected (no queue to replay on reconnect).
 */
export class CommandEmitter {
  lastSentMs = -Infinity;

  constructor(
    private send: (line: string) => void,
    public minIntervalMs = 50,
  ) {}

  offer(line: string, nowMs: number, connected: boolean): boolean {
    if (!connected) {
      return false;
    }
    if (nowMs - this.lastSentMs < this.minIntervalMs) {
      return false;
    }
    this.send(line);
    this.lastSentMs = nowMs;
    return true;
  }
}
