import json
import logging

import pytest
from hypothesis import given, strategies as st

from bifeedback.errors import ProtocolError, TeacherTimeout
from bifeedback.gridworld import DistanceBucket, Heading, RelativeGoal
from bifeedback.protocol import (Ack, EmitRequest, FeedbackRequest, RemoteTeacher, Shutdown,
                                 TokenReply, decode, encode, handshake, to_wire)
from bifeedback.stub_teacher import StubTeacherServer
from bifeedback.teacher import FeedbackSignal, Token, oracle_token

contexts = st.builds(RelativeGoal, st.sampled_from(list(Heading)),
                     st.sampled_from(list(DistanceBucket)))
messages = st.one_of(
    st.builds(EmitRequest, contexts, st.integers(-2**31, 2**31), st.integers(0, 10**6)),
    st.builds(TokenReply, st.sampled_from(list(Token))),
    st.builds(FeedbackRequest, st.sampled_from(list(FeedbackSignal)), contexts,
              st.sampled_from(list(Token))),
    st.just(Ack()), st.just(Shutdown()),
)


@given(messages)
def test_codec_round_trip(msg):
    line = encode(msg)
    assert line.endswith(b"\n") and line.count(b"\n") == 1
    assert decode(line) == msg


@given(messages, st.randoms())
def test_field_order_irrelevant(msg, rnd):
    obj = to_wire(msg)
    items = list(obj.items())
    rnd.shuffle(items)
    assert decode(json.dumps(dict(items))) == msg


def test_emit_request_example():
    raw = '{"type":"emit","ctx":{"heading":"Ahead","distance":"Far"},"episode":0,"t":3}'
    assert decode(raw) == EmitRequest(RelativeGoal(Heading.AHEAD, DistanceBucket.FAR), 0, 3)
    assert decode('{"type":"token","name":"go_forward"}') == TokenReply(Token.GO_FORWARD)


@pytest.mark.parametrize("raw", [
    '{"type":"token","name":"jump"}',
    '{"type":"token"}',
    '{"type":"feedback","signal":"maybe","ctx":{"heading":"Ahead","distance":"Far"},'
    '"token":"go_forward"}',
    '{"type":"emit","ctx":{"heading":"Up","distance":"Far"},"episode":0,"t":1}',
    '{"type":"emit","ctx":{"heading":"Ahead","distance":"Far"},"episode":0,"t":"1"}',
    '{"type":"launch"}',
    '[1, 2]',
    'not json',
])
def test_malformed_messages_rejected(raw, caplog):
    with caplog.at_level(logging.ERROR), pytest.raises(ProtocolError) as info:
        decode(raw)
    assert info.value.raw == raw
    assert raw in caplog.text


@pytest.fixture
def stub():
    servers = []

    def start(mode="oracle"):
        server = StubTeacherServer(mode=mode)
        server.start_background()
        servers.append(server)
        return server

    yield start
    for s in servers:
        s.shutdown()
        s.server_close()


def test_remote_teacher_against_oracle_stub(stub):
    server = stub("oracle")
    teacher = RemoteTeacher(server.address, timeout=2.0)
    try:
        for h in Heading:
            ctx = RelativeGoal(h, DistanceBucket.NEAR)
            assert teacher.emit(ctx, 0, 1) is oracle_token(ctx)
        teacher.feedback(ctx, Token.EXPLORE, FeedbackSignal.NEGATIVE)
    finally:
        teacher.close(shutdown=True)


def test_tabular_stub_applies_feedback(stub):
    server = stub("tabular")
    ctx = RelativeGoal(Heading.LEFT, DistanceBucket.FAR)
    before = server.policy.snapshot()
    teacher = RemoteTeacher(server.address, timeout=2.0)
    teacher.feedback(ctx, Token.TURN_LEFT, FeedbackSignal.POSITIVE)
    teacher.close(shutdown=True)
    after = server.policy.snapshot()
    row = 1 * 3 + 2
    assert after[row][1] == pytest.approx(before[row][1] + 0.1)


def test_out_of_vocabulary_reply(stub):
    server = stub("bad")
    teacher = RemoteTeacher(server.address, timeout=2.0)
    with pytest.raises(ProtocolError, match="jump"):
        teacher.emit(RelativeGoal(Heading.AHEAD, DistanceBucket.FAR))
    teacher.close()


def test_timeout_falls_back_to_oracle(stub):
    server = stub("silent")
    ctx = RelativeGoal(Heading.RIGHT, DistanceBucket.FAR)
    teacher = RemoteTeacher(server.address, timeout=0.2, fallback="oracle")
    assert teacher.emit(ctx) is Token.TURN_RIGHT
    assert teacher.timeouts == 1
    teacher.close()
    aborting = RemoteTeacher(server.address, timeout=0.2, fallback="abort")
    with pytest.raises(TeacherTimeout):
        aborting.emit(ctx)
    aborting.close()


def test_handshake(stub):
    assert handshake(stub("oracle").address, 2.0) is Token.GO_FORWARD
    with pytest.raises(ProtocolError):
        handshake(stub("bad").address, 2.0)
