"""Live session server: the joust mission in wall-clock time plus a wire
protocol for piloting the external vessel.

One port speaks three dialects, sniffed from the first bytes of each
connection: newline-delimited JSON over plain TCP, WebSocket (same JSON, one
message per frame), and HTTP GET for the browser client's static assets.

Server messages:  {"type":"state",...} after every tick and
{"type":"heartbeat","t":...} once per second.  Client messages:
{"type":"cmd","u_thr":...,"u_rud":...}, applied to the external vehicle at
the next tick boundary and clamped server-side.  Unknown message types are
ignored; malformed traffic is logged and never kills the sim.
"""
from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import logging
import math
import signal
import struct
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .dynamics import ControlInput
from .sim import LegEngine, spawn_leg, speed_schedule

log = logging.getLogger(__name__)

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_HTTP_VERBS = (b"GET ", b"HEAD", b"POST", b"OPTI", b"PUT ", b"DELE")
_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}
_QUEUE_SIZE = 64


class _Client:
    """One connected consumer; frames differ, the queue contract does not.

    Outbound messages go through a bounded queue drained by a writer task;
    when a slow client falls behind, the oldest unsent message is dropped so
    the sim loop never waits on anyone's socket.
    """

    def __init__(self, writer: asyncio.StreamWriter, websocket: bool) -> None:
        self.writer = writer
        self.websocket = websocket
        self.queue: asyncio.Queue[str] = asyncio.Queue(maxsize=_QUEUE_SIZE)
        self.task: asyncio.Task | None = None

    def push(self, text: str) -> None:
        while True:
            try:
                self.queue.put_nowait(text)
                return
            except asyncio.QueueFull:
                try:
                    self.queue.get_nowait()
                except asyncio.QueueEmpty:
                    pass

    async def drain_loop(self) -> None:
        try:
            while True:
                text = await self.queue.get()
                if self.websocket:
                    self.writer.write(_ws_frame(text))
                else:
                    self.writer.write(text.encode() + b"\n")
                await self.writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass


def _ws_frame(text: str) -> bytes:
    payload = text.encode()
    n = len(payload)
    if n < 126:
        head = struct.pack("!BB", 0x81, n)
    elif n < 1 << 16:
        head = struct.pack("!BBH", 0x81, 126, n)
    else:
        head = struct.pack("!BBQ", 0x81, 127, n)
    return head + payload


async def _ws_read_message(reader: asyncio.StreamReader) -> tuple[int, bytes] | None:
    """One complete (possibly fragmented) message; None on clean close/EOF."""
    opcode = None
    buf = bytearray()
    while True:
        try:
            b0, b1 = await reader.readexactly(2)
        except (asyncio.IncompleteReadError, ConnectionError):
            return None
        fin = b0 & 0x80
        op = b0 & 0x0F
        masked = b1 & 0x80
        length = b1 & 0x7F
        if length == 126:
            (length,) = struct.unpack("!H", await reader.readexactly(2))
        elif length == 127:
            (length,) = struct.unpack("!Q", await reader.readexactly(8))
        mask = await reader.readexactly(4) if masked else b"\x00" * 4
        data = bytearray(await reader.readexactly(length))
        for i in range(length):
            data[i] ^= mask[i & 3]
        if op in (0x8, 0x9, 0xA):
            # Control frames may interleave with a fragmented message.
            return (op, bytes(data)) if op != 0xA else await _ws_read_message(reader)
        if opcode is None:
            opcode = op
        buf.extend(data)
        if fin:
            return opcode, bytes(buf)


class Gateway:
    """Real-time mission loop plus the client registry.

    Usable directly from asyncio code (tests run it unpaced); the CLI wraps
    it in :func:`serve_scenario` with signal handling and 1x pacing.
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        realtime_factor: float = 1.0,
        ui_dir: str | Path | None = None,
    ) -> None:
        policies = scenario.fleet.policies
        if policies.count("external") != 1:
            raise ConfigError(
                "serve mode needs exactly one vehicle with policy 'external', "
                f"got {policies.count('external')}"
            )
        self.scenario = scenario
        self.external_id = policies.index("external")
        self.realtime_factor = realtime_factor
        self.ui_dir = Path(ui_dir) if ui_dir is not None else None
        self.clients: set[_Client] = set()
        self.mission_clock = 0.0
        self.leg_index = 0
        self.ticks = 0
        self._pending_cmd: ControlInput | None = None
        self._server: asyncio.base_events.Server | None = None
        self._sim_task: asyncio.Task | None = None
        self._stopped = asyncio.Event()
        self._lookup = speed_schedule(scenario.joust)
        self.engine = self._new_engine()

    @property
    def port(self) -> int:
        assert self._server is not None
        return self._server.sockets[0].getsockname()[1]

    def _new_engine(self) -> LegEngine:
        config = self.scenario.joust
        window = int(self.mission_clock / config.speed_reset_period)
        spawn = spawn_leg(config, self.leg_index, speeds=self._lookup(window))
        return LegEngine(
            self.scenario.fleet,
            config,
            spawn,
            leg_index=self.leg_index,
            start_time=self.mission_clock,
            speed_lookup=self._lookup,
        )

    # -- lifecycle ---------------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._server = await asyncio.start_server(self._handle_conn, host, port)
        self._sim_task = asyncio.create_task(self._sim_loop())

    async def stop(self) -> None:
        if self._sim_task is not None:
            self._sim_task.cancel()
            try:
                await self._sim_task
            except asyncio.CancelledError:
                pass
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for client in list(self.clients):
            if client.task is not None:
                client.task.cancel()
            client.writer.close()
        self.clients.clear()
        self._stopped.set()

    async def run_for(self, sim_seconds: float) -> None:
        """Tick without wall-clock pacing for a fixed sim horizon (tests)."""
        ticks = int(round(sim_seconds / self.scenario.joust.dt))
        for _ in range(ticks):
            self._step()
            await asyncio.sleep(0)

    # -- sim loop ----------------------------------------------------------

    def _step(self) -> None:
        cfg = self.scenario.joust
        if self.engine.done:
            self.mission_clock += self.engine.t
            self.leg_index += 1
            self.engine = self._new_engine()
        if self._pending_cmd is not None:
            self.engine.set_external(self.external_id, self._pending_cmd)
            self._pending_cmd = None
        self.engine.tick()
        self.ticks += 1
        self._broadcast(self._state_message())
        if self.ticks % max(1, int(round(1.0 / cfg.dt))) == 0:
            self._broadcast(
                json.dumps(
                    {"type": "heartbeat", "t": round(self.session_time, 3)},
                    separators=(",", ":"),
                )
            )

    async def _sim_loop(self) -> None:
        dt = self.scenario.joust.dt
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while True:
            self._step()
            if self.realtime_factor > 0:
                next_tick += dt / self.realtime_factor
                delay = next_tick - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    next_tick = loop.time()
            else:
                await asyncio.sleep(0)

    @property
    def session_time(self) -> float:
        return self.mission_clock + self.engine.t

    def _state_message(self) -> str:
        eng = self.engine
        vehicles = []
        for i, s in enumerate(eng.states):
            u = eng.last_applied[i]
            vehicles.append(
                {
                    "id": i,
                    "x": round(s.x, 4),
                    "y": round(s.y, 4),
                    "theta": round(s.theta, 4),
                    "u_thr": round(u.u_thr, 4),
                    "u_rud": round(u.u_rud, 4),
                    "h_min": round(eng.h_min(i), 3),
                }
            )
        constraints = [
            {"ego": i, "contact": j, "h": round(h, 3)} for i, j, h in eng.h_pairs()
        ]
        return json.dumps(
            {
                "type": "state",
                "t": round(self.session_time, 3),
                "vehicles": vehicles,
                "constraints": constraints,
            },
            separators=(",", ":"),
        )

    def _broadcast(self, text: str) -> None:
        for client in self.clients:
            client.push(text)

    # -- inbound traffic ----------------------------------------------------

    def _handle_message(self, raw: str | bytes) -> None:
        try:
            msg = json.loads(raw)
        except (ValueError, UnicodeDecodeError):
            log.warning("dropping malformed message: %.80r", raw)
            return
        if not isinstance(msg, dict):
            log.warning("dropping non-object message: %.80r", raw)
            return
        kind = msg.get("type")
        if kind == "cmd":
            self._apply_cmd(msg)
        elif kind == "heartbeat":
            pass
        else:
            log.debug("ignoring message type %r", kind)

    def _apply_cmd(self, msg: dict) -> None:
        try:
            u_thr = float(msg["u_thr"])
            u_rud = float(msg["u_rud"])
        except (KeyError, TypeError, ValueError):
            log.warning("dropping cmd with bad fields: %r", msg)
            return
        if not (math.isfinite(u_thr) and math.isfinite(u_rud)):
            log.warning("dropping non-finite cmd: %r", msg)
            return
        b = self.scenario.fleet.specs[self.external_id].bounds
        self._pending_cmd = ControlInput(
            min(max(u_thr, -b.thr_min), b.thr_max),
            min(max(u_rud, -b.rud_min), b.rud_max),
        )

    # -- connection handling -------------------------------------------------

    async def _handle_conn(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        try:
            # A silent connection is a raw listener; HTTP/WS clients speak
            # first, so only they need to be sniffed from the opening bytes.
            try:
                head = await asyncio.wait_for(reader.read(4), timeout=1.0)
            except asyncio.TimeoutError:
                head = b""
            else:
                if not head:
                    writer.close()
                    return
            if head and any(
                head == v[: len(head)] or head.startswith(v) for v in _HTTP_VERBS
            ):
                await self._handle_http(head, reader, writer)
            else:
                await self._handle_raw(head, reader, writer)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        except Exception:
            log.exception("connection handler failed")
        finally:
            writer.close()

    async def _handle_raw(
        self, head: bytes, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        client = _Client(writer, websocket=False)
        client.task = asyncio.create_task(client.drain_loop())
        self.clients.add(client)
        buf = head
        try:
            while True:
                chunk = await reader.readline()
                if not chunk:
                    break
                buf += chunk
                if buf.endswith(b"\n"):
                    for line in buf.splitlines():
                        if line.strip():
                            self._handle_message(line)
                    buf = b""
        finally:
            self.clients.discard(client)
            client.task.cancel()

    async def _handle_http(
        self, head: bytes, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        raw = head + await reader.readuntil(b"\r\n\r\n")
        request, _, _ = raw.partition(b"\r\n\r\n")
        lines = request.decode("latin-1").split("\r\n")
        try:
            method, path, _ = lines[0].split(" ", 2)
        except ValueError:
            log.warning("bad http request line: %r", lines[0])
            return
        headers = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
        if headers.get("upgrade", "").lower() == "websocket":
            await self._handle_websocket(headers, reader, writer)
            return
        if method != "GET":
            writer.write(b"HTTP/1.1 405 Method Not Allowed\r\nConnection: close\r\n\r\n")
            await writer.drain()
            return
        self._serve_static(path, writer)
        await writer.drain()

    def _serve_static(self, path: str, writer: asyncio.StreamWriter) -> None:
        name = path.split("?", 1)[0]
        if name in ("", "/"):
            name = "/index.html"
        body = None
        ctype = "text/plain; charset=utf-8"
        if self.ui_dir is not None:
            root = self.ui_dir.resolve()
            target = (root / name.lstrip("/")).resolve()
            if target.is_relative_to(root) and target.is_file():
                body = target.read_bytes()
                ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        if body is None and name == "/index.html":
            body = (
                b"UI assets not found. Build the browser client and point "
                b"BARRIER_FLEET_UI at its dist/ directory; the wire protocol "
                b"itself is available on this same port."
            )
            ctype = "text/plain; charset=utf-8"
        if body is None:
            writer.write(
                b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
            )
            return
        head = (
            f"HTTP/1.1 200 OK\r\nContent-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n"
        )
        writer.write(head.encode() + body)

    async def _handle_websocket(
        self,
        headers: dict[str, str],
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
    ) -> None:
        key = headers.get("sec-websocket-key")
        if not key:
            writer.write(b"HTTP/1.1 400 Bad Request\r\nConnection: close\r\n\r\n")
            await writer.drain()
            return
        accept = base64.b64encode(
            hashlib.sha1((key + _WS_GUID).encode()).digest()
        ).decode()
        writer.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
                f"Connection: Upgrade\r\nSec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode()
        )
        await writer.drain()
        client = _Client(writer, websocket=True)
        client.task = asyncio.create_task(client.drain_loop())
        self.clients.add(client)
        try:
            while True:
                msg = await _ws_read_message(reader)
                if msg is None:
                    break
                opcode, payload = msg
                if opcode == 0x8:
                    writer.write(b"\x88\x00")
                    await writer.drain()
                    break
                if opcode == 0x9:
                    writer.write(b"\x8a" + bytes([len(payload)]) + payload)
                    await writer.drain()
                elif opcode == 0x1:
                    self._handle_message(payload)
                else:
                    log.debug("ignoring ws opcode %d", opcode)
        finally:
            self.clients.discard(client)
            client.task.cancel()


def serve_scenario(
    scenario: ScenarioConfig,
    port: int,
    host: str = "127.0.0.1",
    realtime_factor: float = 1.0,
    ui_dir: str | Path | None = None,
) -> None:
    """Run the gateway until SIGINT/SIGTERM; blocking entry point for the CLI."""
    import os

    if ui_dir is None:
        env_dir = os.environ.get("BARRIER_FLEET_UI")
        if env_dir:
            ui_dir = env_dir
        elif Path("frontend/dist/index.html").is_file():
            ui_dir = Path("frontend/dist")

    async def _run() -> None:
        gw = Gateway(scenario, realtime_factor=realtime_factor, ui_dir=ui_dir)
        await gw.start(host=host, port=port)
        log.info("gateway listening on %s:%d", host, gw.port)
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, stop.set)
            except NotImplementedError:  # pragma: no cover - non-posix
                pass
        try:
            await stop.wait()
        finally:
            await gw.stop()

    asyncio.run(_run())
