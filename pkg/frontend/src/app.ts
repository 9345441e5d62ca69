import { GatewayClient } from "./client.js";
import { CommandEmitter, PilotInput } from "./input.js";
import { DEFAULT_BOUNDS, encodeCommand } from "./protocol.js";
import { render } from "./render.js";
import { SceneState } from "./scene.js";

// Arena and bounds are not on the wire, so they arrive as query parameters
// (matching the served scenario) with the stock four-vessel defaults.
function numParam(params: URLSearchParams, key: string, fallback: number): number {
  const raw = params.get(key);
  if (raw === null) {
    return fallback;
  }
  const v = Number(raw);
  return Number.isFinite(v) ? v : fallback;
}

function main(): void {
  const params = new URLSearchParams(location.search);
  const bounds = {
    thrMin: numParam(params, "thrmin", DEFAULT_BOUNDS.thrMin),
    thrMax: numParam(params, "thrmax", DEFAULT_BOUNDS.thrMax),
    rudMin: numParam(params, "rudmin", DEFAULT_BOUNDS.rudMin),
    rudMax: numParam(params, "rudmax", DEFAULT_BOUNDS.rudMax),
  };
  const circleDiameterM = numParam(params, "circle", 64);
  const rSafeM = numParam(params, "rsafe", 15);
  const egoId = numParam(params, "ego", 0);

  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const scene = new SceneState();
  const pilot = new PilotInput(bounds);

  const client = new GatewayClient(
    `ws://${location.host}/`,
    (msg) => scene.ingest(msg, performance.now()),
    (up) => (up ? scene.markConnected() : scene.markClosed()),
  );
  const emitter = new CommandEmitter((line) => client.send(line));
  client.connect();

  window.addEventListener("keydown", (ev) => {
    if (pilot.keyDown(ev.code)) {
      ev.preventDefault();
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (pilot.keyUp(ev.code)) {
      ev.preventDefault();
    }
  });
  window.addEventListener("blur", () => pilot.releaseHeld());

  setInterval(() => {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    for (const pad of pads) {
      if (pad && pad.connected) {
        pilot.gamepadSample(pad.axes);
        break;
      }
    }
    const cmd = pilot.command();
    emitter.offer(
      encodeCommand(cmd.uThr, cmd.uRud),
      performance.now(),
      client.connected,
    );
  }, 50);

  function frame(): void {
    const dpr = window.devicePixelRatio || 1;
    const w = canvas.clientWidth * dpr;
    const h = canvas.clientHeight * dpr;
    if (canvas.width !== w || canvas.height !== h) {
      canvas.width = w;
      canvas.height = h;
    }
    render(ctx, scene, {
      widthPx: w,
      heightPx: h,
      circleDiameterM,
      rSafeM,
      egoId,
      nowMs: performance.now(),
    });
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

window.addEventListener("load", main);
