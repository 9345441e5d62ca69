// Wire types for the gateway stream: newline-delimited JSON, one message
// per line, same shape over raw TCP and WebSocket.

export interface VehicleRow {
  id: number;
  x: number;
  y: number;
  theta: number;
  u_thr: number;
  u_rud: number;
  h_min: number;
}

export interface ConstraintRow {
  ego: number;
  contact: number;
  h: number;
}

export interface StateMsg {
  type: "state";
  t: number;
  vehicles: VehicleRow[];
  constraints: ConstraintRow[];
}

export interface HeartbeatMsg {
  type: "heartbeat";
  t: number;
}

export type ServerMsg = StateMsg | HeartbeatMsg;

/** Input box of the piloted vessel, mirrored client-side for the pre-clamp. */
export interface ControlBounds {
  thrMin: number; // max reverse thrust, nonnegative
  thrMax: number;
  rudMin: number; // max starboard rudder rate, nonnegative
  rudMax: number;
}

export const DEFAULT_BOUNDS: ControlBounds = {
  thrMin: 0.0,
  thrMax: 2.0,
  rudMin: 1.0,
  rudMax: 1.0,
};

/**
 * Decode one line from the server. Returns null for anything that is not a
 * well-formed state or heartbeat message; unknown types are dropped without
 * complaint so the server can grow new message kinds.
 */
export function parseServerMessage(line: string): ServerMsg | null {
  let msg: unknown;
  try {
    msg = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    return null;
  }
  const m = msg as Record<string, unknown>;
  if (m.type === "heartbeat") {
    return typeof m.t === "number" ? ({ type: "heartbeat", t: m.t }) : null;
  }
  if (m.type !== "state") {
    return null;
  }
  if (
    typeof m.t !== "number" ||
    !Array.isArray(m.vehicles) ||
    !Array.isArray(m.constraints)
  ) {
    return null;
  }
  for (const v of m.vehicles as Array<Record<string, unknown>>) {
    if (
      typeof v !== "object" || v === null ||
      typeof v.id !== "number" || typeof v.x !== "number" ||
      typeof v.y !== "number" || typeof v.theta !== "number"
    ) {
      return null;
    }
  }
  return m as unknown as StateMsg;
}

export function clampCommand(
  uThr: number,
  uRud: number,
  b: ControlBounds,
): { uThr: number; uRud: number } {
  const boxThr = Math.min(Math.max(uThr, -b.thrMin), b.thrMax);
  const boxRud = Math.min(Math.max(uRud, -b.rudMin), b.rudMax);
  return {
    uThr: boxThr === 0 ? 0 : boxThr, // fold -0 into 0
    uRud: boxRud === 0 ? 0 : boxRud,
  };
}

function round4(v: number): number {
  const r = Math.round(v * 1e4) / 1e4;
  return r === 0 ? 0 : r; // normalize -0 so the encoding stays stable
}

/**
 * Encode a command line. Values are rounded to 1e-4 so an unchanged command
 * re-encodes to identical bytes; commands are absolute setpoints, so sending
 * the same line twice is the same as sending it once.
 */
export function encodeCommand(uThr: number, uRud: number): string {
  return JSON.stringify({ type: "cmd", u_thr: round4(uThr), u_rud: round4(uRud) });
}
