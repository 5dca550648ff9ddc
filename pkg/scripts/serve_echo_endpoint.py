#!/usr/bin/env python3
"""Serve a minimal chat-completions endpoint for local dry runs.

Answers every POST with the user message echoed back (or a fixed string via
--content), in the ``choices[0].message.content`` shape the batch client
expects.  Lets ``foodsem run`` be exercised end to end without any model:

    python scripts/serve_echo_endpoint.py --port 8765 &
    foodsem run --prompts prompts.jsonl \\
        --endpoint-url http://127.0.0.1:8765/v1/chat/completions --out out/run
"""

import argparse
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class EchoHandler(BaseHTTPRequestHandler):
    content: str = ""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self.send_response(400)
            self.end_headers()
            return
        prompt = ""
        for message in body.get("messages", []):
            if message.get("role") == "user":
                prompt = message.get("content", "")
        text = self.content or prompt
        payload = json.dumps(
            {"choices": [{"message": {"role": "assistant", "content": text}}]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):
        print(f"{self.address_string()} {fmt % args}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument(
        "--content", default="", help="fixed response text (default: echo the prompt)"
    )
    args = parser.parse_args()
    handler = type("Handler", (EchoHandler,), {"content": args.content})
    server = ThreadingHTTPServer((args.host, args.port), handler)
    print(f"serving chat completions on http://{args.host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
