import { describe, expect, it } from "vitest";
import { StateMsg } from "../src/protocol.js";
import { COLOR_ALERT, render, RenderOptions, Surface } from "../src/render.js";
import { SceneState } from "../src/scene.js";

/** Records every draw call along with the style active when it lands. */
class Recorder implements Surface {
  fillStyle: string | object = "";
  strokeStyle: string | object = "";
  lineWidth = 1;
  font = "";
  textAlign = "";
  globalAlpha = 1;
  ops: Array<{ op: string; style: string; args: unknown[] }> = [];

  private log(op: string, style: string | object, args: unknown[] = []): void {
    this.ops.push({ op, style: String(style), args });
  }

  save(): void {}
  restore(): void {}
  translate(): void {}
  rotate(): void {}
  beginPath(): void {}
  arc(): void {
    this.log("arc", this.strokeStyle);
  }
  moveTo(): void {}
  lineTo(): void {}
  closePath(): void {}
  stroke(): void {
    this.log("stroke", this.strokeStyle);
  }
  fill(): void {
    this.log("fill", this.fillStyle);
  }
  fillRect(): void {
    this.log("fillRect", this.fillStyle);
  }
  fillText(text: string): void {
    this.log("fillText", this.fillStyle, [text]);
  }
  setLineDash(): void {}

  count(op: string): number {
    return this.ops.filter((o) => o.op === op).length;
  }
  texts(): string[] {
    return this.ops.filter((o) => o.op === "fillText").map((o) => String(o.args[0]));
  }
  usedStyle(style: string): boolean {
    return this.ops.some((o) => o.style === style);
  }
}

const OPTS: RenderOptions = {
  widthPx: 800,
  heightPx: 600,
  circleDiameterM: 64,
  rSafeM: 15,
  egoId: 0,
  nowMs: 1000,
};

function fourShips(h: number): StateMsg {
  const spots: Array<[number, number]> = [[-20, 0], [20, 0], [0, -20], [0, 20]];
  const constraints = [];
  for (let i = 0; i < 4; i++) {
    for (let j = 0; j < 4; j++) {
      if (i !== j) {
        constraints.push({ ego: i, contact: j, h });
      }
    }
  }
  return {
    type: "state",
    t: 42.0,
    vehicles: spots.map(([x, y], id) => ({
      id,
      x,
      y,
      theta: id * 0.5,
      u_thr: 1.5,
      u_rud: 0.25,
      h_min: h,
    })),
    constraints,
  };
}

describe("render", () => {
  it("draws four hulls, their safety circles, and a margin readout each", () => {
    const scene = new SceneState();
    scene.ingest(fourShips(100), 900);
    const g = new Recorder();
    render(g, scene, OPTS);
    expect(g.count("fill")).toBe(4); // one filled triangle per vessel
    // grid rings, mission circle, four safety circles
    expect(g.count("arc")).toBeGreaterThanOrEqual(8);
    const texts = g.texts();
    for (let id = 0; id < 4; id++) {
      expect(texts.some((s) => s.startsWith(`#${id} h `))).toBe(true);
    }
    expect(texts.some((s) => s.startsWith("t 42.0s"))).toBe(true);
    expect(g.usedStyle(COLOR_ALERT)).toBe(false);
  });

  it("flags violated pairs in the alert color", () => {
    const scene = new SceneState();
    scene.ingest(fourShips(-2.5), 900);
    const g = new Recorder();
    render(g, scene, OPTS);
    expect(g.usedStyle(COLOR_ALERT)).toBe(true);
  });

  it("shows the arena grid alone before any vehicles arrive", () => {
    const g = new Recorder();
    render(g, new SceneState(), OPTS);
    expect(g.count("fill")).toBe(0);
    expect(g.count("arc")).toBeGreaterThan(0);
    expect(g.texts()).toContain("connecting to gateway");
  });

  it("keeps the last frame and raises the banner once the feed goes stale", () => {
    const scene = new SceneState();
    scene.ingest(fourShips(100), 900);
    const g = new Recorder();
    render(g, scene, { ...OPTS, nowMs: 900 + 2001 });
    expect(g.count("fill")).toBe(4); // frozen frame still drawn
    expect(g.texts()).toContain("signal lost, showing last frame");
  });

  it("reports a closed link", () => {
    const scene = new SceneState();
    scene.ingest(fourShips(100), 900);
    scene.markClosed();
    const g = new Recorder();
    render(g, scene, OPTS);
    expect(g.texts()).toContain("disconnected");
  });
});
