import { LinkStatus, SceneState } from "./scene.js";

// The slice of CanvasRenderingContext2D the renderer actually touches.
// Tests substitute a recorder; the browser context satisfies it as-is.
export interface Surface {
  fillStyle: string | object;
  strokeStyle: string | object;
  lineWidth: number;
  font: string;
  textAlign: string;
  globalAlpha: number;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(rad: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
}

export interface RenderOptions {
  widthPx: number;
  heightPx: number;
  circleDiameterM: number; // mission circle; the arena adds 20% margin
  rSafeM: number;
  egoId: number;
  nowMs: number;
}

const COLOR_BG = "#10141a";
const COLOR_GRID = "#2a3340";
const COLOR_CIRCLE = "#3d4a5c";
const COLOR_TRAIL = "#5c7a99";
const COLOR_FLEET = "#9fd0ff";
const COLOR_EGO = "#ffd166";
const COLOR_BARRIER = "#7a4444";
export const COLOR_ALERT = "#e4452f";
const COLOR_TEXT = "#c8d2dd";

const HULL_LENGTH_M = 2.4;

interface Frame {
  toX(xm: number): number;
  toY(ym: number): number;
  scale: number;
}

function fitArena(opts: RenderOptions): Frame {
  const spanM = opts.circleDiameterM * 1.2;
  const scale = Math.min(opts.widthPx, opts.heightPx) / spanM;
  const cx = opts.widthPx / 2;
  const cy = opts.heightPx / 2;
  return {
    toX: (xm) => cx + xm * scale,
    toY: (ym) => cy - ym * scale, // world y up, screen y down
    scale,
  };
}

function drawGrid(g: Surface, f: Frame, opts: RenderOptions): void {
  g.fillStyle = COLOR_BG;
  g.fillRect(0, 0, opts.widthPx, opts.heightPx);
  g.strokeStyle = COLOR_GRID;
  g.lineWidth = 1;
  const maxR = opts.circleDiameterM * 0.6;
  for (let r = 10; r < maxR; r += 10) {
    g.beginPath();
    g.arc(f.toX(0), f.toY(0), r * f.scale, 0, 2 * Math.PI);
    g.stroke();
  }
  g.beginPath();
  g.moveTo(f.toX(-maxR), f.toY(0));
  g.lineTo(f.toX(maxR), f.toY(0));
  g.moveTo(f.toX(0), f.toY(-maxR));
  g.lineTo(f.toX(0), f.toY(maxR));
  g.stroke();
  // mission circle, dashed
  g.setLineDash([6, 6]);
  g.strokeStyle = COLOR_CIRCLE;
  g.beginPath();
  g.arc(f.toX(0), f.toY(0), (opts.circleDiameterM / 2) * f.scale, 0, 2 * Math.PI);
  g.stroke();
  g.setLineDash([]);
}

function drawVessel(
  g: Surface,
  f: Frame,
  x: number,
  y: number,
  theta: number,
  color: string,
): void {
  const L = Math.max(HULL_LENGTH_M * f.scale, 8);
  g.save();
  g.translate(f.toX(x), f.toY(y));
  g.rotate(-theta); // canvas angles run clockwise
  g.fillStyle = color;
  g.beginPath();
  g.moveTo(L, 0);
  g.lineTo(-L * 0.5, L * 0.45);
  g.lineTo(-L * 0.5, -L * 0.45);
  g.closePath();
  g.fill();
  g.restore();
}

function banner(g: Surface, opts: RenderOptions, text: string): void {
  g.fillStyle = "rgba(16,20,26,0.75)";
  g.fillRect(0, opts.heightPx / 2 - 24, opts.widthPx, 48);
  g.fillStyle = COLOR_ALERT;
  g.font = "16px ui-monospace, monospace";
  g.textAlign = "center";
  g.fillText(text, opts.widthPx / 2, opts.heightPx / 2 + 5);
}

const BANNER_TEXT: Partial<Record<LinkStatus, string>> = {
  connecting: "connecting to gateway",
  stale: "signal lost, showing last frame",
  closed: "disconnected",
};

/**
 * Draw one frame from the scene snapshot: arena grid, trails, safety radii,
 * oriented hulls, per-vessel barrier margin readouts, and a red pair link
 * wherever a barrier is in violation. Pure function of its inputs.
 */
export function render(g: Surface, scene: SceneState, opts: RenderOptions): void {
  const f = fitArena(opts);
  drawGrid(g, f, opts);

  const state = scene.latest;
  if (state) {
    g.lineWidth = 1;
    g.strokeStyle = COLOR_TRAIL;
    g.globalAlpha = 0.6;
    for (const trail of scene.trails.values()) {
      if (trail.length < 2) {
        continue;
      }
      g.beginPath();
      g.moveTo(f.toX(trail[0].x), f.toY(trail[0].y));
      for (let i = 1; i < trail.length; i++) {
        g.lineTo(f.toX(trail[i].x), f.toY(trail[i].y));
      }
      g.stroke();
    }
    g.globalAlpha = 1;

    const inViolation = new Set<number>();
    for (const c of state.constraints) {
      if (c.h < 0) {
        inViolation.add(c.ego);
        inViolation.add(c.contact);
      }
    }

    const byId = new Map(state.vehicles.map((v) => [v.id, v]));
    for (const c of state.constraints) {
      if (c.h >= 0) {
        continue;
      }
      const a = byId.get(c.ego);
      const b = byId.get(c.contact);
      if (!a || !b) {
        continue;
      }
      g.strokeStyle = COLOR_ALERT;
      g.lineWidth = 2;
      g.beginPath();
      g.moveTo(f.toX(a.x), f.toY(a.y));
      g.lineTo(f.toX(b.x), f.toY(b.y));
      g.stroke();
    }

    for (const v of state.vehicles) {
      g.strokeStyle = inViolation.has(v.id) ? COLOR_ALERT : COLOR_BARRIER;
      g.lineWidth = inViolation.has(v.id) ? 2 : 1;
      g.beginPath();
      g.arc(f.toX(v.x), f.toY(v.y), opts.rSafeM * f.scale, 0, 2 * Math.PI);
      g.stroke();
    }
    for (const v of state.vehicles) {
      drawVessel(g, f, v.x, v.y, v.theta, v.id === opts.egoId ? COLOR_EGO : COLOR_FLEET);
      g.fillStyle = inViolation.has(v.id) ? COLOR_ALERT : COLOR_TEXT;
      g.font = "11px ui-monospace, monospace";
      g.textAlign = "left";
      g.fillText(
        `#${v.id} h ${v.h_min.toFixed(1)}`,
        f.toX(v.x) + 10,
        f.toY(v.y) - 10,
      );
    }

    g.fillStyle = COLOR_TEXT;
    g.font = "13px ui-monospace, monospace";
    g.textAlign = "left";
    const ego = byId.get(opts.egoId);
    const echo = ego ? `  thr ${ego.u_thr.toFixed(2)}  rud ${ego.u_rud.toFixed(2)}` : "";
    g.fillText(`t ${state.t.toFixed(1)}s${echo}`, 12, 20);
  }

  const status = scene.status(opts.nowMs);
  const text = BANNER_TEXT[status];
  if (text) {
    banner(g, opts, text);
  }
}
