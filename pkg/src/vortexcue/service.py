"""Line-protocol trigger service.

Requests (one per line, UTF-8)::

    PING
    TRIGGER dev=<id> b=<float> amp=<float> count=<int> interval_ms=<int>

Replies are ``PONG``, ``OK <path>`` or ``ERR <code> <reason>``.  A trigger
renders the rounded pulse train to a WAV file under the output directory.
Triggers for the same device are processed one at a time.
"""

from __future__ import annotations

import json
import logging
import math
import socketserver
import threading
from dataclasses import dataclass
from pathlib import Path

from .waveform import DEFAULT_AMPLITUDE, DEFAULT_SAMPLE_RATE, apply_rounding, export_pcm, pulse_train

log = logging.getLogger(__name__)

MAX_COUNT = 100
MAX_TAIL_S = 0.25
TRIGGER_KEYS = {"dev", "b", "amp", "count", "interval_ms"}


@dataclass(frozen=True)
class DeviceEntry:
    pulse_ms: float = 1.0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    max_amplitude: float = DEFAULT_AMPLITUDE


def load_registry(path) -> dict:
    """``{"<id>": {"pulse_ms": .., "sample_rate": .., "max_amplitude": ..}, ...}``"""
    data = json.loads(Path(path).read_text())
    return {str(k): DeviceEntry(**(v or {})) for k, v in data.items()}


class ProtocolError(Exception):
    def __init__(self, code: int, reason: str):
        super().__init__(reason)
        self.code = code
        self.reason = reason


class TriggerService:
    """Protocol handling independent of the transport; ``handle_line`` is thread-safe."""

    def __init__(self, registry: dict, out_dir):
        self.registry = dict(registry)
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._locks = {dev: threading.Lock() for dev in self.registry}
        self._counters = {dev: 0 for dev in self.registry}

    def handle_line(self, line: str) -> str:
        try:
            return self._dispatch(line.strip())
        except ProtocolError as exc:
            return f"ERR {exc.code} {exc.reason}"
        except OSError as exc:
            log.exception("trigger failed")
            return f"ERR 500 {exc.strerror or exc}"

    def _dispatch(self, line: str) -> str:
        if not line:
            raise ProtocolError(400, "empty command")
        verb, *args = line.split()
        if verb == "PING":
            if args:
                raise ProtocolError(400, "PING takes no arguments")
            return "PONG"
        if verb == "TRIGGER":
            return "OK " + str(self.trigger(**self._parse_args(args)))
        raise ProtocolError(400, f"unknown command {verb}")

    @staticmethod
    def _parse_args(args) -> dict:
        out = {}
        for tok in args:
            key, sep, value = tok.partition("=")
            if not sep or not value:
                raise ProtocolError(400, f"malformed argument {tok!r}")
            if key not in TRIGGER_KEYS:
                raise ProtocolError(400, f"unknown argument {key}")
            if key in out:
                raise ProtocolError(400, f"duplicate argument {key}")
            out[key] = value
        if "dev" not in out or "b" not in out:
            raise ProtocolError(400, "TRIGGER requires dev and b")
        try:
            parsed = {"dev": out["dev"], "b": float(out["b"]),
                      "amp": float(out.get("amp", DEFAULT_AMPLITUDE)),
                      "count": int(out.get("count", 1)),
                      "interval_ms": int(out.get("interval_ms", 1000))}
        except ValueError as exc:
            raise ProtocolError(400, f"bad number: {exc}") from None
        return parsed

    def trigger(self, dev: str, b: float, amp: float = DEFAULT_AMPLITUDE, count: int = 1,
                interval_ms: int = 1000) -> Path:
        entry = self.registry.get(dev)
        if entry is None:
            raise ProtocolError(404, f"unknown device {dev}")
        if not (math.isfinite(b) and 0 < b <= 1):
            raise ProtocolError(400, "roundness out of range")
        if not (math.isfinite(amp) and 0 < amp <= entry.max_amplitude):
            raise ProtocolError(400, "amplitude out of range")
        if not 1 <= count <= MAX_COUNT:
            raise ProtocolError(400, "count out of range")
        if count > 1 and interval_ms <= entry.pulse_ms:
            raise ProtocolError(400, "interval shorter than pulse")

        tail = min(10.0 / b / entry.sample_rate, MAX_TAIL_S)
        train = pulse_train(amp, entry.pulse_ms / 1000.0, count, interval_ms / 1000.0,
                            entry.sample_rate, tail=tail)
        wave = apply_rounding(train, b)
        with self._locks[dev]:
            self._counters[dev] += 1
            path = self.out_dir / f"{dev}-{self._counters[dev]:06d}.wav"
            export_pcm(wave, path)
        return path.resolve()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                reply = "ERR 400 not UTF-8"
            else:
                reply = self.server.service.handle_line(line)
            self.wfile.write((reply + "\n").encode("utf-8"))
            self.wfile.flush()


class TriggerServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, service: TriggerService):
        self.service = service
        super().__init__(address, _Handler)


def serve(port: int, registry: dict, out_dir, host: str = "127.0.0.1") -> None:
    with TriggerServer((host, port), TriggerService(registry, out_dir)) as server:
        log.info("trigger service listening on %s:%d", *server.server_address[:2])
        server.serve_forever()
