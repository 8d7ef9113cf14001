#!/usr/bin/env python3
"""Record golden wire transcripts from the real session service.

The frontend's protocol-conformance tests validate every line of these
transcripts against the client's zod schemas, so the two sides cannot
drift silently. Regenerate after any intentional protocol change:

    python frontend/scripts/record_golden.py
"""

import json
import os

from starlette.testclient import TestClient

from modsim.service import ServiceConfig, build_app

HERE = os.path.dirname(os.path.abspath(__file__))
GOLDEN = os.path.join(HERE, "..", "test", "golden")

CLIENT_SCRIPT = [
    {"type": "start", "task": "stack_cups", "variation": "v0", "seed": 7},
    {"type": "pause"},
    {"type": "command", "command_id": "ui-1", "text": "stack object #2 first"},
    {"type": "resume"},
]


def main():
    os.makedirs(GOLDEN, exist_ok=True)
    app = build_app(ServiceConfig(turbo=True))
    server_lines = []
    with TestClient(app) as tc:
        with tc.websocket_connect("/session") as ws:
            server_lines.append(ws.receive_text().strip())  # hello
            ws.send_text("\n".join(json.dumps(m) for m in CLIENT_SCRIPT))
            while True:
                line = ws.receive_text().strip()
                server_lines.append(line)
                if json.loads(line)["type"] == "done":
                    break
    with open(os.path.join(GOLDEN, "reorder_session_server.jsonl"), "w") as fh:
        fh.write("\n".join(server_lines) + "\n")
    with open(os.path.join(GOLDEN, "reorder_session_client.jsonl"), "w") as fh:
        fh.write("\n".join(json.dumps(m) for m in CLIENT_SCRIPT) + "\n")
    kinds = {}
    for line in server_lines:
        kinds[json.loads(line)["type"]] = kinds.get(json.loads(line)["type"], 0) + 1
    print(f"wrote {len(server_lines)} server lines: {kinds}")


if __name__ == "__main__":
    main()
