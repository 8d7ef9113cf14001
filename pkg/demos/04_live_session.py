#!/usr/bin/env python3
"""Walkthrough: driving a live session over the real wire protocol.

Starts the service on a local port, connects a WebSocket client, and
pipelines start + pause + command + resume in a single NDJSON batch, which
pins the command to frame 0 exactly like a dataset script. This is the
same protocol the browser UI speaks.
"""

import asyncio
import json
import socket
import threading
import time

import uvicorn
import websockets

from modsim.service import ServiceConfig, build_app


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


port = free_port()
server = uvicorn.Server(uvicorn.Config(
    build_app(ServiceConfig(turbo=True)), host="127.0.0.1", port=port, log_level="error"
))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.02)
print(f"service listening on ws://127.0.0.1:{port}/session")


async def drive():
    async with websockets.connect(f"ws://127.0.0.1:{port}/session") as ws:
        hello = json.loads(await ws.recv())
        print(f"hello: protocol v{hello['protocol_version']}, "
              f"tasks: {[t['task_id'] for t in hello['tasks']]}")
        batch = "\n".join(json.dumps(m) for m in [
            {"type": "start", "task": "stack_cups", "variation": "v0", "seed": 7},
            {"type": "pause"},
            {"type": "command", "command_id": "demo-1", "text": "stack object #2 first"},
            {"type": "resume"},
        ])
        await ws.send(batch)
        frames = 0
        while True:
            msg = json.loads(await ws.recv())
            if msg["type"] == "frame":
                frames += 1
                if msg["index"] in (0, 1):
                    overlays = msg["views"][0]["overlays"]
                    print(f"frame {msg['index']}: front camera sees "
                          f"{[o['label'] for o in overlays]}, marks={msg['marks']}")
            elif msg["type"] == "ack":
                print(f"ack[{msg['command_id']}]: parsed {msg['parsed']['op']} "
                      f"-> grounded to {msg.get('target_object_id')}")
            elif msg["type"] == "event":
                if msg["kind"] in ("modulation_applied", "subtask_completed",
                                   "task_done", "task_failed"):
                    print(f"event f{msg['frame_index']:04d}: {msg['kind']} "
                          f"{msg['payload'].get('subtask', '')}")
            elif msg["type"] == "done":
                print(f"done: success={msg['success']} after {frames} streamed frames")
                return


asyncio.run(drive())
server.should_exit = True
thread.join(timeout=5)
