"""Codec round trips and decode-side validation."""
import pytest

from clusterauth.errors import MalformedMessage, OutOfRange
from clusterauth.messages import (
    AggregateChallenge,
    CmResponse,
    JoinRequest,
    KeyUpdateInit,
    NuavConfirm,
    PeerAck,
    PeerBroadcast,
    PidSet,
    ShareEnvelope,
    StoreAck,
    TransferRequest,
    decode,
    decode_public_params,
    encode,
    encode_public_params,
    wire_size,
)
from clusterauth.registry import setup_system

B = lambda i: bytes([i]) * 32


def sample_messages(group):
    e = group.exp(group.g, 5)
    return [
        JoinRequest(B(1), e, B(2), e, e),
        AggregateChallenge(B(3), 1234, B(4), e, B(5), 7 % group.q, B(6)),
        CmResponse(1234, e, B(7)),
        PeerBroadcast(e, e, B(8), B(9), 1236),
        PeerAck(B(10), 1236, B(11)),
        PeerAck(B(10), 1236, None),
        NuavConfirm(B(12), e),
        TransferRequest(B(13), B(14), 1300),
        KeyUpdateInit(1400, 3 % group.q, B(15), ((2 % group.q, e),), B(16)),
        ShareEnvelope(3 % group.q, ((2 % group.q, B(17)),)),
        PidSet((B(18), B(19))),
        StoreAck(B(20)),
    ]


@pytest.mark.parametrize("preset", ["tiny", "full"])
def test_round_trip_every_type(preset, tiny, full):
    group = tiny if preset == "tiny" else full
    for msg in sample_messages(group):
        raw = encode(group, msg)
        assert decode(group, raw) == msg
        assert wire_size(group, msg) == len(raw)


def test_unknown_tag(tiny):
    with pytest.raises(MalformedMessage):
        decode(tiny, b"\xee" + bytes(64))


def test_empty_and_truncated(tiny):
    with pytest.raises(MalformedMessage):
        decode(tiny, b"")
    raw = encode(tiny, TransferRequest(B(1), B(2), 1))
    with pytest.raises(MalformedMessage):
        decode(tiny, raw[:-1])
    with pytest.raises(MalformedMessage):
        decode(tiny, raw + b"\x00")


def test_scalar_range_enforced(tiny):
    raw = bytearray(encode(tiny, CmResponse(1, tiny.exp(tiny.g, 2), B(1))))
    # m_total lives in AggregateChallenge; craft one with a too-big scalar
    chal = AggregateChallenge(B(3), 1, B(4), tiny.exp(tiny.g, 1), B(5), 7, B(6))
    raw = bytearray(encode(tiny, chal))
    # scalar sits right after ch_pid(32) + t1(8) + sig_nuavs(32) + c_nuavs(1)
    # + share(32); flip its low byte to 12 >= q
    offset = 1 + 32 + 8 + 32 + tiny.elem_bytes + 32 + 31
    raw[offset] = 12
    with pytest.raises((MalformedMessage, OutOfRange)):
        decode(tiny, bytes(raw))


def test_subgroup_membership_enforced(tiny):
    req = JoinRequest(B(1), tiny.exp(tiny.g, 3), B(2), tiny.exp(tiny.g, 4),
                      tiny.exp(tiny.g, 5))
    raw = bytearray(encode(tiny, req))
    raw[1 + 32] = 5  # 5 is not in the order-11 subgroup of Z_23
    with pytest.raises(MalformedMessage):
        decode(tiny, bytes(raw))


def test_public_params_round_trip(tiny):
    pp, _ = setup_system(tiny, 3, seed=4)
    blob = encode_public_params(pp)
    back = decode_public_params(blob)
    assert back.group == pp.group
    assert back.gbs_pubs == pp.gbs_pubs
    assert back.hash_tags == pp.hash_tags


def test_codec_deterministic(full, rng):
    msgs = sample_messages(full)
    assert [encode(full, m) for m in msgs] == [encode(full, m) for m in msgs]
