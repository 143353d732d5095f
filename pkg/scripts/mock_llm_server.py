#!/usr/bin/env python3
"""Stand-alone mock chat-completions endpoint for offline text generation.

Serves POST /chat/completions and replies with deterministic numbered lines
derived from a hash of the prompt, so `lovm gen-text` can run end to end
without network access or an API key (any bearer token is accepted).

    python3 scripts/mock_llm_server.py --port 8080
    LOVM_LLM_API_KEY=dummy lovm gen-text --endpoint http://127.0.0.1:8080 ...
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

NOUNS = ("field", "street", "table", "sky", "window", "corner", "room", "hill",
         "shore", "path", "market", "garden")
VERBS = ("resting on", "seen near", "captured by", "standing in", "placed on",
         "moving through", "framed against", "found at")
ADJECTIVES = ("small", "weathered", "bright", "distant", "quiet", "open",
              "crowded", "narrow", "sunlit", "foggy")


def reply_lines(prompt: str, count: int, seed: int) -> list[str]:
    digest = hashlib.sha256(f"{seed}:{prompt}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    subject = prompt.rstrip(": \n").rsplit(" ", 1)[-1] or "object"
    lines = []
    for i in range(count):
        adj = ADJECTIVES[rng.integers(len(ADJECTIVES))]
        verb = VERBS[rng.integers(len(VERBS))]
        noun = NOUNS[rng.integers(len(NOUNS))]
        lines.append(f"{i + 1}. a photo of a {adj} {subject} {verb} a {noun}")
    return lines


class Handler(BaseHTTPRequestHandler):
    lines = 20
    seed = 0

    def do_POST(self):  # noqa: N802  (http.server API)
        if self.path.rstrip("/").endswith("/chat/completions"):
            body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
            try:
                payload = json.loads(body)
                prompt = payload["messages"][-1]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError):
                self.send_error(400, "malformed request")
                return
            content = "\n".join(reply_lines(prompt, self.lines, self.seed))
            out = json.dumps(
                {"choices": [{"message": {"role": "assistant", "content": content}}]}
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)
        else:
            self.send_error(404, "unknown route")

    def log_message(self, fmt, *args):
        sys.stderr.write("mock-llm: %s\n" % (fmt % args))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8080)
    ap.add_argument("--lines", type=int, default=20, help="lines per reply")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    Handler.lines = args.lines
    Handler.seed = args.seed
    server = ThreadingHTTPServer((args.host, args.port), Handler)
    print(f"serving on http://{args.host}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever(poll_interval=0.2)
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
