"""Property-based codec coverage: arbitrary valid messages round-trip."""
from hypothesis import given, settings, strategies as st

from clusterauth.groups import tiny_group
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
    encode,
)

TINY = tiny_group()

blocks = st.binary(min_size=32, max_size=32)
scalars = st.integers(min_value=0, max_value=TINY.q - 1)
elems = st.integers(min_value=0, max_value=TINY.q - 1).map(
    lambda e: TINY.exp(TINY.g, e))
stamps = st.integers(min_value=0, max_value=(1 << 64) - 1)
xc_pairs = st.lists(st.tuples(scalars, elems), max_size=4).map(tuple)
xu_pairs = st.lists(st.tuples(scalars, blocks), max_size=4).map(tuple)

messages = st.one_of(
    st.builds(JoinRequest, blocks, elems, blocks, elems, elems),
    st.builds(AggregateChallenge, blocks, stamps, blocks, elems, blocks,
              scalars, blocks),
    st.builds(CmResponse, stamps, elems, blocks),
    st.builds(PeerBroadcast, elems, elems, blocks, blocks, stamps),
    st.builds(PeerAck, blocks, stamps, st.one_of(st.none(), blocks)),
    st.builds(NuavConfirm, blocks, elems),
    st.builds(TransferRequest, blocks, blocks, stamps),
    st.builds(KeyUpdateInit, stamps, scalars, blocks, xc_pairs, blocks),
    st.builds(ShareEnvelope, scalars, xu_pairs),
    st.builds(PidSet, st.lists(blocks, max_size=5).map(tuple)),
    st.builds(StoreAck, blocks),
)


@settings(max_examples=200, deadline=None)
@given(messages)
def test_encode_decode_identity(msg):
    assert decode(TINY, encode(TINY, msg)) == msg


@settings(max_examples=100, deadline=None)
@given(messages, st.integers(min_value=0))
def test_single_bit_flip_never_decodes_to_same_message(msg, bit_seed):
    raw = encode(TINY, msg)
    bit = bit_seed % (len(raw) * 8)
    flipped = bytearray(raw)
    flipped[bit // 8] ^= 1 << (bit % 8)
    try:
        out = decode(TINY, bytes(flipped))
    except Exception:
        return  # rejection is the common (and fine) outcome
    assert out != msg
