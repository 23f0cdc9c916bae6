"""Newline-delimited JSON protocol for an out-of-process teacher.

One UTF-8 JSON object per line; field order is irrelevant::

    {"type":"emit","ctx":{"heading":"Ahead","distance":"Far"},"episode":0,"t":3}
        -> {"type":"token","name":"go_forward"}
    {"type":"feedback","signal":"positive","ctx":{...},"token":"go_forward"}
        -> {"type":"ack"}
    {"type":"shutdown"}
        -> connection closed by the server

Headings are Ahead/Left/Right/Behind, distances Adjacent/Near/Far.
"""
from __future__ import annotations

import json
import logging
import socket
from dataclasses import dataclass
from typing import Union

from .config import parse_address
from .errors import ProtocolError, TeacherTimeout
from .gridworld import DistanceBucket, Heading, RelativeGoal
from .teacher import FeedbackSignal, Token, oracle_token

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmitRequest:
    ctx: RelativeGoal
    episode: int
    t: int


@dataclass(frozen=True)
class TokenReply:
    token: Token


@dataclass(frozen=True)
class FeedbackRequest:
    signal: FeedbackSignal
    ctx: RelativeGoal
    token: Token


@dataclass(frozen=True)
class Ack:
    pass


@dataclass(frozen=True)
class Shutdown:
    pass


Message = Union[EmitRequest, TokenReply, FeedbackRequest, Ack, Shutdown]


def ctx_to_wire(ctx: RelativeGoal) -> dict:
    return {"heading": ctx.heading.name.capitalize(), "distance": ctx.distance.name.capitalize()}


def ctx_from_wire(obj) -> RelativeGoal:
    if not isinstance(obj, dict):
        raise ProtocolError(f"ctx must be an object, got {obj!r}")
    h, d = obj.get("heading"), obj.get("distance")
    if not isinstance(h, str) or h.upper() not in Heading.__members__ or h != h.capitalize():
        raise ProtocolError(f"bad heading {h!r}")
    if not isinstance(d, str) or d.upper() not in DistanceBucket.__members__ or d != d.capitalize():
        raise ProtocolError(f"bad distance {d!r}")
    return RelativeGoal(Heading[h.upper()], DistanceBucket[d.upper()])


def _token(name) -> Token:
    try:
        return Token.from_name(name)
    except KeyError:
        raise ProtocolError(f"token {name!r} is not in the vocabulary") from None


def _int(obj, key) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ProtocolError(f"field {key!r} must be an integer, got {v!r}")
    return v


def to_wire(msg: Message) -> dict:
    if isinstance(msg, EmitRequest):
        return {"type": "emit", "ctx": ctx_to_wire(msg.ctx), "episode": msg.episode, "t": msg.t}
    if isinstance(msg, TokenReply):
        return {"type": "token", "name": msg.token.wire_name}
    if isinstance(msg, FeedbackRequest):
        return {"type": "feedback", "signal": msg.signal.value, "ctx": ctx_to_wire(msg.ctx),
                "token": msg.token.wire_name}
    if isinstance(msg, Ack):
        return {"type": "ack"}
    if isinstance(msg, Shutdown):
        return {"type": "shutdown"}
    raise TypeError(f"not a protocol message: {msg!r}")


def from_wire(obj) -> Message:
    if not isinstance(obj, dict):
        raise ProtocolError(f"message must be a JSON object, got {obj!r}")
    kind = obj.get("type")
    if kind == "emit":
        return EmitRequest(ctx_from_wire(obj.get("ctx")), _int(obj, "episode"), _int(obj, "t"))
    if kind == "token":
        return TokenReply(_token(obj.get("name")))
    if kind == "feedback":
        try:
            signal = FeedbackSignal(obj.get("signal"))
        except ValueError:
            raise ProtocolError(f"bad feedback signal {obj.get('signal')!r}") from None
        return FeedbackRequest(signal, ctx_from_wire(obj.get("ctx")), _token(obj.get("token")))
    if kind == "ack":
        return Ack()
    if kind == "shutdown":
        return Shutdown()
    raise ProtocolError(f"unknown message type {kind!r}")


def encode(msg: Message) -> bytes:
    return (json.dumps(to_wire(msg), separators=(",", ":")) + "\n").encode("utf-8")


def decode(line: bytes | str) -> Message:
    raw = line.decode("utf-8", errors="replace") if isinstance(line, bytes) else line
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        log.error("malformed message from teacher: %r", raw)
        raise ProtocolError(f"malformed JSON: {e}", raw) from None
    try:
        return from_wire(obj)
    except ProtocolError as e:
        log.error("invalid message from teacher: %r", raw)
        e.raw = raw
        raise


class RemoteTeacher:
    """Teacher living in another process, reached over a TCP stream.

    One request is in flight at a time. On timeout, ``fallback="oracle"``
    answers the emit with the scripted oracle token (and drops a pending
    feedback); ``fallback="abort"`` raises :class:`TeacherTimeout`.
    """

    learns = True

    def __init__(self, addr: str, timeout: float = 5.0, fallback: str = "oracle"):
        self.addr = addr
        self.timeout = timeout
        self.fallback = fallback
        self.timeouts = 0
        host, port = parse_address(addr)
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self.reader = self.sock.makefile("rb")

    def request(self, msg: Message) -> Message:
        self.sock.sendall(encode(msg))
        try:
            line = self.reader.readline()
        except socket.timeout:
            self._reconnect()
            raise TeacherTimeout(f"teacher at {self.addr} did not answer within {self.timeout}s")
        if not line:
            raise ProtocolError(f"teacher at {self.addr} closed the connection")
        return decode(line)

    def _reconnect(self) -> None:
        # a late reply would otherwise be read as the answer to the next request
        self.close()
        host, port = parse_address(self.addr)
        self.sock = socket.create_connection((host, port), timeout=self.timeout)
        self.sock.settimeout(self.timeout)
        self.reader = self.sock.makefile("rb")

    def emit(self, ctx: RelativeGoal, episode: int = 0, t: int = 0) -> Token:
        try:
            reply = self.request(EmitRequest(ctx, episode, t))
        except TeacherTimeout:
            if self.fallback != "oracle":
                raise
            self.timeouts += 1
            log.warning("teacher timeout at episode %d t %d; using oracle token", episode, t)
            return oracle_token(ctx)
        if not isinstance(reply, TokenReply):
            raise ProtocolError(f"expected a token reply, got {to_wire(reply)}")
        return reply.token

    def feedback(self, ctx: RelativeGoal, token: Token, signal: FeedbackSignal) -> None:
        try:
            reply = self.request(FeedbackRequest(signal, ctx, token))
        except TeacherTimeout:
            if self.fallback != "oracle":
                raise
            self.timeouts += 1
            log.warning("teacher timeout on feedback; signal dropped")
            return
        if not isinstance(reply, Ack):
            raise ProtocolError(f"expected ack, got {to_wire(reply)}")

    def close(self, shutdown: bool = False) -> None:
        if shutdown:
            try:
                self.sock.sendall(encode(Shutdown()))
            except OSError:
                pass
        try:
            self.reader.close()
            self.sock.close()
        except OSError:
            pass


def handshake(addr: str, timeout: float = 5.0) -> Token:
    """Exercise emit, feedback and shutdown once; returns the emitted token."""
    teacher = RemoteTeacher(addr, timeout, fallback="abort")
    try:
        ctx = RelativeGoal(Heading.AHEAD, DistanceBucket.FAR)
        token = teacher.emit(ctx, 0, 0)
        teacher.feedback(ctx, token, FeedbackSignal.POSITIVE)
    finally:
        teacher.close(shutdown=True)
    return token
