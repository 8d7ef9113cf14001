"""Interactive session service: labeled frame streaming + live commands.

One WebSocket connection hosts one session. Messages are newline-delimited
JSON (one object per line, one line per WebSocket text message, an NDJSON
stream riding a standard browser transport). The session loop owns its
ExecState outright and applies incoming commands between steps, so a
driven session is step-for-step equivalent to a headless run with the same
commands at the same frame boundaries.

Protocol (client -> server):
    {"type":"start","task":...,"variation":...,"seed":...}
    {"type":"command","command_id":...,"text":...}
    {"type":"pause"} | {"type":"resume"} | {"type":"stop"}
Server -> client:
    {"type":"hello","protocol_version":1,"tasks":[...]}
    {"type":"frame","index":...,"t":...,"views":[...],"gripper":...,"status":...}
    {"type":"ack","command_id":...,"parsed":{...}}
    {"type":"event","kind":...,"t":...,"frame_index":...,"payload":{...}}
    {"type":"error","code":...,"message":...}
    {"type":"done","success":...}

Every command message gets exactly one ack or error. Malformed JSON and
unknown message types close the session with a final error. Frames are
paced at the simulation rate (20/s) unless the service runs in turbo mode;
a client lagging more than ``max_lag`` frames loses intermediate frames,
but messages carrying events are never dropped.
"""

from __future__ import annotations

import asyncio
import json
import os
import re
from collections import deque
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse

from . import executor, modlang, tasks
from .executor import DT, ExecState
from .labels import resolve
from .modulate import context_target_id

PROTOCOL_VERSION = 1
DEFAULT_MAX_LAG = 100

_SAFE_NAME = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass
class ServiceConfig:
    turbo: bool = False
    v_max: float = executor.DEFAULT_V_MAX
    max_lag: int = DEFAULT_MAX_LAG
    frame_rate: float = 1.0 / DT  # wall-clock pacing; simulation dt is fixed
    dataset_dir: str | None = None
    ui_dir: str | None = None

    @staticmethod
    def from_json(data: dict) -> "ServiceConfig":
        return ServiceConfig(
            turbo=bool(data.get("turbo", False)),
            v_max=float(data.get("v_max", executor.DEFAULT_V_MAX)),
            max_lag=int(data.get("max_lag", DEFAULT_MAX_LAG)),
            frame_rate=float(data.get("frame_rate", 1.0 / DT)),
            dataset_dir=data.get("dataset_dir"),
            ui_dir=data.get("ui_dir"),
        )


class DropQueue:
    """Outbound message queue with frame-dropping backpressure.

    Droppable entries (frames) are capped at max_lag: pushing one more
    evicts the oldest droppable entry. Non-droppable entries (events, acks,
    errors, done) are never evicted.
    """

    def __init__(self, max_lag: int = DEFAULT_MAX_LAG):
        self.max_lag = max_lag
        self.dropped = 0
        self._items: deque[tuple[str, bool]] = deque()
        self._ready = asyncio.Event()
        self._unsent = 0
        self._flushed = asyncio.Event()
        self._flushed.set()

    def pending(self) -> int:
        return len(self._items)

    def put(self, text: str, droppable: bool = False):
        if droppable:
            backlog = sum(1 for _, d in self._items if d)
            if backlog >= self.max_lag:
                for i, (_, d) in enumerate(self._items):
                    if d:
                        del self._items[i]
                        self.dropped += 1
                        self._task_done()
                        break
        self._items.append((text, droppable))
        self._unsent += 1
        self._flushed.clear()
        self._ready.set()

    async def get(self) -> str:
        while not self._items:
            self._ready.clear()
            await self._ready.wait()
        text, _ = self._items.popleft()
        return text

    def _task_done(self):
        self._unsent -= 1
        if self._unsent <= 0:
            self._flushed.set()

    def task_done(self):
        """The consumer finished transmitting one message."""
        self._task_done()

    async def join(self):
        """Wait until every queued message was transmitted or dropped."""
        while self._unsent > 0:
            await self._flushed.wait()


def task_catalog() -> list[dict]:
    return [
        {
            "task_id": spec.task_id,
            "description": spec.description,
            "variations": [v.variation_id for v in spec.variations],
            "subtasks": list(spec.subtasks),
        }
        for spec in tasks.list_tasks()
    ]


def _dumps(msg: dict) -> str:
    return json.dumps(msg, ensure_ascii=False, separators=(",", ":")) + "\n"


class Session:
    """State machine for one connection; all simulator mutation happens here."""

    def __init__(self, ws: WebSocket, config: ServiceConfig):
        self.ws = ws
        self.config = config
        self.inbound: asyncio.Queue = asyncio.Queue()
        self.outbound = DropQueue(config.max_lag)
        self.ex: ExecState | None = None
        self.paused = False
        self.closing = False

    # --- outbound helpers

    def send(self, msg: dict, droppable: bool = False):
        self.outbound.put(_dumps(msg), droppable)

    def send_frame(self):
        frame = executor.capture(self.ex).to_json()
        frame["type"] = "frame"
        plan = self.ex.plan
        current = plan.actions[plan.cursor] if plan.cursor < len(plan.actions) else None
        frame["plan"] = {
            "cursor": plan.cursor,
            "length": len(plan.actions),
            "subtask": current.subtask if current else None,
            "skipped": list(plan.skipped_subtasks),
        }
        self.send(frame, droppable=True)

    def send_events(self, events):
        for ev in events:
            msg = ev.to_json()
            msg["type"] = "event"
            self.send(msg)

    def send_done(self):
        self.send({"type": "done", "success": bool(self.ex.success),
                   "frames": self.ex.step_count})

    def send_error(self, code: str, message: str, command_id=None):
        msg = {"type": "error", "code": code, "message": message}
        if command_id is not None:
            msg["command_id"] = command_id
        self.send(msg)

    # --- inbound handling

    def _running(self) -> bool:
        return (
            self.ex is not None
            and not self.paused
            and self.ex.status == executor.RUNNING
        )

    def handle(self, line: str) -> bool:
        """Process one inbound line; returns False when the session must close."""
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict):
                raise ValueError("message must be a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            self.send_error("bad_message", f"malformed message: {exc}")
            return False
        mtype = msg.get("type")
        if mtype == "start":
            return self._handle_start(msg)
        if mtype == "command":
            return self._handle_command(msg)
        if mtype == "pause":
            if self.ex is not None and self.ex.status == executor.RUNNING:
                self.paused = True
            return True
        if mtype == "resume":
            self.paused = False
            if self.ex is not None and self.ex.status == executor.AWAITING_MODULATION:
                self.ex.status = executor.RUNNING
            return True
        if mtype == "stop":
            return self._handle_stop()
        self.send_error("bad_message", f"unknown message type {mtype!r}")
        return False

    def _handle_start(self, msg: dict) -> bool:
        if self.ex is not None and self.ex.status in (executor.RUNNING, executor.PAUSED,
                                                      executor.AWAITING_MODULATION):
            self.send_error("already_running", "stop the current episode first")
            return True
        try:
            task_id = msg["task"]
            variation = msg["variation"]
            seed = int(msg["seed"])
            self.ex = executor.start_episode(task_id, variation, seed, v_max=self.config.v_max)
        except (KeyError, ValueError, TypeError) as exc:
            self.send_error("bad_start", f"invalid start message: {exc}")
            return True
        except tasks.UnknownTask as exc:
            self.send_error("unknown_task", str(exc))
            return True
        except tasks.UnknownVariation as exc:
            self.send_error("unknown_variation", str(exc))
            return True
        self.paused = False
        self.send_frame()  # frame 0
        return True

    def _handle_command(self, msg: dict) -> bool:
        command_id = msg.get("command_id")
        text = msg.get("text")
        if not isinstance(text, str):
            self.send_error("bad_message", "command needs a text field", command_id)
            return True
        if self.ex is None:
            self.send_error("no_session", "start an episode first", command_id)
            return True
        try:
            ir = modlang.parse(text)
        except modlang.ParseError as exc:
            self.send_error("parse_error", str(exc), command_id)
            return True
        ack = {"type": "ack", "command_id": command_id, "parsed": ir.to_json()}
        actionable = ir.actionable_ref()
        if actionable is not None:
            # best-effort grounding echo so the UI can tint the target
            try:
                context = context_target_id(
                    self.ex.plan, self.ex.plan.cursor, self.ex.scene, self.ex.registry
                )
                oid = resolve(actionable[0], self.ex.scene, self.ex.registry, context)
                ack["target_object_id"] = oid
                ack["target_label"] = self.ex.registry.by_object[oid]
            except Exception:
                pass
        self.send(ack)
        n_before = len(self.ex.events)
        executor.inject(self.ex, ir)
        self.send_events(self.ex.events[n_before:])
        # inject may have finalized the episode (abort, skip of the last subtask)
        if self.ex.status in (executor.DONE, executor.FAILED):
            self.send_done()
        return True

    def _handle_stop(self) -> bool:
        if self.ex is not None and self.ex.status not in (executor.DONE, executor.FAILED):
            self.send_events(executor.fail_episode(self.ex, "stopped"))
            self.send_done()
        self.ex = None
        self.paused = False
        return True

    # --- main loop

    async def run(self):
        self.send({
            "type": "hello",
            "protocol_version": PROTOCOL_VERSION,
            "tasks": task_catalog(),
        })
        reader = asyncio.create_task(self._reader())
        sender = asyncio.create_task(self._sender())
        try:
            await self._main()
        finally:
            reader.cancel()
            # flush queued messages (last error / done) before tearing down,
            # unless the sender itself died (client is gone)
            flush = asyncio.ensure_future(self.outbound.join())
            await asyncio.wait({flush, sender}, timeout=2.0,
                               return_when=asyncio.FIRST_COMPLETED)
            flush.cancel()
            sender.cancel()

    async def _reader(self):
        try:
            while True:
                text = await self.ws.receive_text()
                for line in text.splitlines():
                    if line.strip():
                        await self.inbound.put(line)
        except (WebSocketDisconnect, RuntimeError):
            await self.inbound.put(None)

    async def _sender(self):
        try:
            while True:
                text = await self.outbound.get()
                await self.ws.send_text(text)
                self.outbound.task_done()
        except (WebSocketDisconnect, RuntimeError, asyncio.CancelledError):
            pass

    async def _main(self):
        while True:
            if self._running():
                # commands land at step boundaries, in arrival order
                while True:
                    try:
                        line = self.inbound.get_nowait()
                    except asyncio.QueueEmpty:
                        break
                    if line is None or not self.handle(line):
                        return
                if not self._running():
                    continue
                _, events = executor.step(self.ex)
                self.send_events(events)
                self.send_frame()
                if self.ex.status in (executor.DONE, executor.FAILED):
                    self.send_done()
                await asyncio.sleep(0 if self.config.turbo else 1.0 / self.config.frame_rate)
            else:
                line = await self.inbound.get()
                if line is None or not self.handle(line):
                    return


def build_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="modsim session service")
    app.state.config = config

    @app.websocket("/session")
    async def session_endpoint(ws: WebSocket):
        await ws.accept()
        session = Session(ws, config)
        try:
            await session.run()
        finally:
            try:
                await ws.close()
            except RuntimeError:
                pass

    @app.get("/tasks")
    def get_tasks():
        return {"tasks": task_catalog()}

    @app.get("/dataset")
    def list_dataset():
        if not config.dataset_dir or not os.path.isdir(config.dataset_dir):
            return JSONResponse({"error": "no dataset directory configured"}, status_code=404)
        files = sorted(
            name for name in os.listdir(config.dataset_dir)
            if os.path.isfile(os.path.join(config.dataset_dir, name))
        )
        return {"files": files}

    @app.get("/dataset/{name}")
    def get_dataset_file(name: str):
        if not config.dataset_dir or not _SAFE_NAME.match(name):
            return JSONResponse({"error": "not found"}, status_code=404)
        path = os.path.join(config.dataset_dir, name)
        if not os.path.isfile(path):
            return JSONResponse({"error": "not found"}, status_code=404)
        return FileResponse(path, media_type="application/x-ndjson")

    if config.ui_dir and os.path.isdir(config.ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def serve(bind_address: str, config: ServiceConfig | None = None):
    """Run the service until interrupted; bind_address is host:port."""
    import uvicorn

    host, _, port = bind_address.rpartition(":")
    if not host:
        raise ValueError("bind address must be host:port")
    uvicorn.run(build_app(config), host=host, port=int(port), log_level="warning")
