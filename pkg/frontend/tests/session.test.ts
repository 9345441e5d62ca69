// End-to-end tests against a live gateway subprocess, speaking the raw
// newline-JSON dialect through the same codec the browser build ships.

import { ChildProcess, spawn } from "node:child_process";
import net from "node:net";
import readline from "node:readline";
import { fileURLToPath } from "node:url";
import { afterEach, describe, expect, it } from "vitest";

import { CommandEmitter, PilotInput } from "../src/input.js";
import { DEFAULT_BOUNDS, encodeCommand, parseServerMessage } from "../src/protocol.js";

const FIXTURE = fileURLToPath(new URL("./serve_fixture.py", import.meta.url));

interface Fixture {
  proc: ChildProcess;
  port: number;
}

const running: ChildProcess[] = [];

afterEach(() => {
  for (const proc of running.splice(0)) {
    proc.kill();
  }
});

function startFixture(args: string[]): Promise<Fixture> {
  return new Promise((resolve, reject) => {
    const proc = spawn("python3", [FIXTURE, ...args], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    running.push(proc);
    proc.stderr!.on("data", (chunk) => process.stderr.write(chunk));
    proc.once("error", reject);
    const rl = readline.createInterface({ input: proc.stdout! });
    rl.once("line", (line) => resolve({ proc, port: JSON.parse(line).port }));
  });
}

function connectRaw(port: number): Promise<net.Socket> {
  return new Promise((resolve, reject) => {
    const sock = net.createConnection({ host: "127.0.0.1", port }, () => {
      sock.write("\n"); // first byte marks this as a raw talker, not HTTP
      resolve(sock);
    });
    sock.once("error", reject);
  });
}

describe("gateway session", () => {
  it("echoes a command in the applied controls within two ticks", async () => {
    const fx = await startFixture(["--factor", "1", "--duration", "8"]);
    const sock = await connectRaw(fx.port);
    const rl = readline.createInterface({ input: sock });

    let states = 0;
    let sentAt = -1;
    let echoAt = -1;
    await new Promise<void>((resolve) => {
      rl.on("line", (line) => {
        const msg = parseServerMessage(line);
        if (!msg || msg.type !== "state") {
          return;
        }
        states += 1;
        if (sentAt < 0 && states === 5) {
          sentAt = msg.t;
          sock.write(encodeCommand(1.3, 0.2) + "\n");
          return;
        }
        const me = msg.vehicles[0];
        if (sentAt >= 0 && echoAt < 0 && me.u_thr === 1.3 && me.u_rud === 0.2) {
          echoAt = msg.t;
          resolve();
        }
      });
      sock.once("close", () => resolve());
    });
    sock.destroy();

    expect(echoAt).toBeGreaterThan(0);
    expect(echoAt - sentAt).toBeLessThanOrEqual(0.2 + 1e-9);
  }, 30_000);

  it("keeps every vessel pair beyond 3 m through a ten-minute full-throttle charge", async () => {
    const fx = await startFixture(["--factor", "40", "--duration", "600"]);
    const sock = await connectRaw(fx.port);
    const rl = readline.createInterface({ input: sock });

    // the pilot model the browser uses: ramp to full ahead, rudder neutral
    const pilot = new PilotInput(DEFAULT_BOUNDS);
    for (let k = 0; k < 25; k++) {
      pilot.keyDown("ArrowUp");
    }
    const emitter = new CommandEmitter((line) => sock.write(line + "\n"), 50);
    const pump = setInterval(() => {
      const cmd = pilot.command();
      emitter.offer(encodeCommand(cmd.uThr, cmd.uRud), Date.now(), sock.writable);
    }, 50);

    let minDist = Infinity;
    let states = 0;
    let lastT = 0;
    let charged = false;
    await new Promise<void>((resolve) => {
      rl.on("line", (line) => {
        const msg = parseServerMessage(line);
        if (!msg || msg.type !== "state") {
          return;
        }
        states += 1;
        lastT = msg.t;
        const vs = msg.vehicles;
        if (vs[0].u_thr === 2.0) {
          charged = true;
        }
        for (let i = 0; i < vs.length; i++) {
          for (let j = i + 1; j < vs.length; j++) {
            const d = Math.hypot(vs[i].x - vs[j].x, vs[i].y - vs[j].y);
            if (d < minDist) {
              minDist = d;
            }
          }
        }
      });
      sock.once("close", () => resolve());
    });
    clearInterval(pump);
    sock.destroy();

    expect(charged).toBe(true); // the charge was actually applied
    expect(lastT).toBeGreaterThanOrEqual(599.9);
    expect(states).toBeGreaterThan(5500);
    expect(minDist).toBeGreaterThanOrEqual(3.0);
  }, 120_000);
});
