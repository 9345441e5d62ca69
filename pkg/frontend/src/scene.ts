import { ServerMsg, StateMsg } from "./protocol.js";

export const TRAIL_LENGTH = 600;
export const STALE_AFTER_MS = 2000;

// Leg respawns teleport the fleet; a trail segment dragged across the arena
// is noise, so any jump bigger than this wipes that vessel's trail.
const TRAIL_BREAK_M = 5.0;

export type LinkStatus = "connecting" | "live" | "stale" | "closed";

interface TrailPoint {
  x: number;
  y: number;
}

/**
 * The single mutable snapshot shared between the network callback and the
 * render loop. The network side only appends decoded messages; the renderer
 * only reads, so a frame never waits on the socket.
 */
export class SceneState {
  latest: StateMsg | null = null;
  trails = new Map<number, TrailPoint[]>();
  lastMessageMs = -Infinity;
  closed = false;

  ingest(msg: ServerMsg, nowMs: number): void {
    this.lastMessageMs = nowMs;
    if (msg.type !== "state") {
      return; // heartbeats only refresh the staleness clock
    }
    this.latest = msg;
    const seen = new Set<number>();
    for (const v of msg.vehicles) {
      seen.add(v.id);
      let trail = this.trails.get(v.id);
      if (!trail) {
        trail = [];
        this.trails.set(v.id, trail);
      }
      const last = trail[trail.length - 1];
      if (last && Math.hypot(v.x - last.x, v.y - last.y) > TRAIL_BREAK_M) {
        trail.length = 0;
      }
      trail.push({ x: v.x, y: v.y });
      if (trail.length > TRAIL_LENGTH) {
        trail.splice(0, trail.length - TRAIL_LENGTH);
      }
    }
    for (const id of [...this.trails.keys()]) {
      if (!seen.has(id)) {
        this.trails.delete(id);
      }
    }
  }

  markClosed(): void {
    this.closed = true;
  }

  markConnected(): void {
    this.closed = false;
  }

  status(nowMs: number): LinkStatus {
    if (this.closed) {
      return "closed";
    }
    if (this.lastMessageMs === -Infinity) {
      return "connecting";
    }
    return nowMs - this.lastMessageMs > STALE_AFTER_MS ? "stale" : "live";
  }
}
