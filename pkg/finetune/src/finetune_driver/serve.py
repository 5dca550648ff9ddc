"""Serve an adapted model behind a chat-completions endpoint, or export it.

The HTTP surface accepts ``POST`` bodies shaped like
``{"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}``
and answers with a single assistant choice, so any chat-completions client
can drive the model.  Export merges the adapters into the backbone and
writes a standalone model directory.
"""

from __future__ import annotations

import errno
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import torch

from .errors import ModelLoadError, PortInUse
from .lora import load_adapter, merge_adapters
from .prepare import load_tokenizer
from .train import load_model

log = logging.getLogger(__name__)


def load_adapted_model(base_model, adapter_dir):
    """Backbone plus trained adapters, ready for generation."""
    model = load_model(base_model)
    try:
        load_adapter(model, adapter_dir)
    except FileNotFoundError as exc:
        raise ModelLoadError(str(exc)) from exc
    model.eval()
    return model


def generate_reply(model, tokenizer, prompt: str, max_new_tokens: int,
                   temperature: float = 0.0) -> str:
    encoded = tokenizer(prompt, return_tensors="pt")
    prompt_len = encoded["input_ids"].shape[1]
    sample = temperature > 0.0
    with torch.no_grad():
        out = model.generate(
            **encoded,
            max_new_tokens=max_new_tokens,
            do_sample=sample,
            temperature=temperature if sample else None,
            pad_token_id=tokenizer.pad_token_id or tokenizer.eos_token_id,
        )
    return tokenizer.decode(out[0, prompt_len:], skip_special_tokens=True)


def _make_handler(model, tokenizer, default_max_new_tokens: int):
    generate_lock = threading.Lock()

    class ChatHandler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            log.debug("http: " + fmt, *args)

        def _reply(self, status: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            try:
                request = json.loads(self.rfile.read(length) or b"{}")
                messages = request.get("messages", [])
                prompt = next(
                    (m.get("content", "") for m in reversed(messages)
                     if m.get("role") == "user"),
                    "",
                )
                max_new = int(request.get("max_tokens") or default_max_new_tokens)
                temperature = float(request.get("temperature") or 0.0)
            except (ValueError, AttributeError, TypeError) as exc:
                self._reply(400, {"error": f"bad request: {exc}"})
                return
            with generate_lock:
                text = generate_reply(model, tokenizer, prompt, max_new, temperature)
            self._reply(200, {
                "object": "chat.completion",
                "model": request.get("model", "adapted"),
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": "stop",
                }],
            })

    return ChatHandler


def start_server(model, tokenizer, host: str = "127.0.0.1", port: int = 0,
                 max_new_tokens: int = 128) -> tuple[ThreadingHTTPServer, threading.Thread]:
    """Bind and serve on a background thread; returns (server, thread).

    Raises :class:`PortInUse` when the port is already bound.  With
    ``port=0`` the OS picks a free port, available as ``server.server_port``.
    """
    handler = _make_handler(model, tokenizer, max_new_tokens)
    try:
        server = ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PortInUse(
                f"{host}:{port} is already bound; pick another --port"
            ) from exc
        raise
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    log.info("serving chat completions on http://%s:%d", host, server.server_port)
    return server, thread


def serve_forever(base_model, adapter_dir, host: str = "127.0.0.1",
                  port: int = 8080, max_new_tokens: int = 128) -> None:
    model = load_adapted_model(base_model, adapter_dir)
    tokenizer = load_tokenizer(base_model)
    server, thread = start_server(model, tokenizer, host, port, max_new_tokens)
    try:
        thread.join()
    except KeyboardInterrupt:
        server.shutdown()


def export_merged(base_model, adapter_dir, out_dir) -> Path:
    """Fold adapters into the backbone and write a standalone model."""
    model = load_adapted_model(base_model, adapter_dir)
    merge_adapters(model)
    tokenizer = load_tokenizer(base_model)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    log.info("exported merged model to %s", out_dir)
    return out_dir
