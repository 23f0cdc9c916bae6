"""Reference teacher server for the line-JSON protocol.

    python -m bifeedback.stub_teacher --port 9000 [--mode oracle|tabular|bad|silent]

``oracle`` answers with the scripted oracle token, ``tabular`` keeps its own
logit table and applies received feedback, ``bad`` answers with the
out-of-vocabulary token ``"jump"``, and ``silent`` never answers emits
(for timeout tests). With ``--port 0`` the chosen port is printed on stdout.
"""
from __future__ import annotations

import argparse
import json
import socketserver
import sys
import threading

from .protocol import (Ack, EmitRequest, FeedbackRequest, Shutdown, TokenReply, decode,
                       encode)
from .rng import SplitMix64
from .teacher import TeacherPolicy, emit, oracle_token


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server = self.server
        for line in self.rfile:
            if not line.strip():
                continue
            msg = decode(line)
            if isinstance(msg, Shutdown):
                return
            if isinstance(msg, EmitRequest):
                if server.mode == "silent":
                    continue
                if server.mode == "bad":
                    self.wfile.write(b'{"type":"token","name":"jump"}\n')
                    continue
                with server.lock:
                    if server.mode == "tabular":
                        token = emit(server.policy, msg.ctx, server.rng)
                    else:
                        token = oracle_token(msg.ctx)
                self.wfile.write(encode(TokenReply(token)))
            elif isinstance(msg, FeedbackRequest):
                with server.lock:
                    server.policy.apply_feedback(msg.ctx, msg.token, msg.signal)
                self.wfile.write(encode(Ack()))
            else:
                self.wfile.write(json.dumps({"type": "error"}).encode() + b"\n")


class StubTeacherServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0, mode: str = "oracle",
                 seed: int = 0, prior_logit: float = 0.5):
        super().__init__((host, port), _Handler)
        self.mode = mode
        self.policy = TeacherPolicy.with_prior(prior_logit)
        self.rng = SplitMix64(seed)
        self.lock = threading.Lock()

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--mode", choices=["oracle", "tabular", "bad", "silent"], default="oracle")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    server = StubTeacherServer(args.host, args.port, args.mode, args.seed)
    print(server.address, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
