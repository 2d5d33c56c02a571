"""Wire API for the operator console.

HTTP endpoints: GET /status, POST /session/start, POST /session/stop,
POST /command, plus one server-push stream GET /stream (server-sent events:
`status` snapshots at 2 Hz and `stim` / `stage` events as they occur). All
payloads are JSON; the schema is documented in the README.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..msgbus import Subscription
from ..staging import HypnogramEpoch
from ..swdetect import StimEvent
from .config import BadConfig, config_from_dict
from .runner import AlreadyRunning, InvalidValue, SessionService, UnknownCommand


def _stim_to_dict(ev: StimEvent) -> dict:
    return {
        "seq": ev.seq,
        "crossing_seconds": ev.crossing_time.seconds,
        "scheduled_seconds": ev.scheduled_time.seconds,
        "delivered_seconds": None if ev.missed else ev.delivered_time.seconds,
        "mode": ev.mode_at_delivery.value,
        "stage": ev.gate_stage.value,
    }


def _epoch_to_dict(ep: HypnogramEpoch) -> dict:
    return {
        "epoch_index": ep.epoch_index,
        "stage": ep.stage_smoothed.value,
        "stage_raw": ep.stage_raw.value,
        "confidence": round(ep.confidence, 4),
    }


class ApiServer:
    def __init__(self, service: SessionService, host: str = "127.0.0.1", port: int = 8765) -> None:
        self.service = service
        service_ref = service

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt: str, *args) -> None:  # quiet by default
                pass

            def _json(self, code: int, obj: dict) -> None:
                body = json.dumps(obj).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(body)

            def _read_body(self) -> dict:
                n = int(self.headers.get("Content-Length") or 0)
                if n == 0:
                    return {}
                try:
                    return json.loads(self.rfile.read(n))
                except json.JSONDecodeError:
                    return {}

            def do_GET(self) -> None:
                if self.path == "/status":
                    self._json(200, service_ref.snapshot_status().to_dict())
                elif self.path == "/stream":
                    self._stream()
                else:
                    self._json(404, {"error": f"no route {self.path}"})

            def do_POST(self) -> None:
                try:
                    if self.path == "/session/start":
                        cfg = config_from_dict(self._read_body())
                        service_ref.start_session(cfg)
                        self._json(200, {"ok": True, "session_id": cfg.session_id})
                    elif self.path == "/session/stop":
                        service_ref.stop_session()
                        self._json(200, {"ok": True})
                    elif self.path == "/command":
                        result = service_ref.handle_command(self._read_body())
                        self._json(200, result)
                    else:
                        self._json(404, {"error": f"no route {self.path}"})
                except BadConfig as e:
                    self._json(400, {"ok": False, "error": str(e)})
                except AlreadyRunning as e:
                    self._json(409, {"ok": False, "error": str(e)})
                except (UnknownCommand, InvalidValue) as e:
                    self._json(400, {"ok": False, "error": str(e)})

            def _sse(self, event: str, data: dict) -> None:
                chunk = f"event: {event}\ndata: {json.dumps(data)}\n\n".encode()
                self.wfile.write(chunk)
                self.wfile.flush()

            def _stream(self) -> None:
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Cache-Control", "no-cache")
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                stim_sub: Subscription | None = None
                stage_sub: Subscription | None = None
                bound_runner = None
                last_status = 0.0
                try:
                    while True:
                        runner = service_ref.runner
                        if runner is not bound_runner and runner is not None:
                            stim_sub = runner.graph.subscribe(runner.t_stim)
                            stage_sub = runner.graph.subscribe(runner.t_epochs)
                            bound_runner = runner
                        now = time.monotonic()
                        if now - last_status >= 0.5:  # 2 Hz status
                            self._sse("status", service_ref.snapshot_status().to_dict())
                            last_status = now
                        pushed = False
                        if stim_sub is not None:
                            for env in stim_sub.drain():
                                self._sse("stim", _stim_to_dict(env.payload))
                                pushed = True
                        if stage_sub is not None:
                            for env in stage_sub.drain():
                                self._sse("stage", _epoch_to_dict(env.payload))
                                pushed = True
                        if not pushed:
                            time.sleep(0.05)
                except (BrokenPipeError, ConnectionResetError):
                    return

        self.httpd = ThreadingHTTPServer((host, port), Handler)
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
