"""Typed wire messages and the byte-exact codec.

Framing: one type-tag byte, then fields in declaration order. Group
elements are fixed-width big-endian (width from the group modulus),
32-byte blocks are raw, scalars ride as 32-byte blocks, timestamps as
8-byte big-endian milliseconds, and lists carry a 2-byte count prefix.
Decoding validates everything it can: lengths, scalar range, subgroup
membership of elements.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import MalformedMessage
from .groups import BLOCK, GroupParams, decode_scalar32, encode_scalar32


@dataclass(frozen=True)
class JoinRequest:
    nuav_pid: bytes
    nuav_pk: int
    ch_pid: bytes
    v: int
    sig: int


@dataclass(frozen=True)
class AggregateChallenge:
    ch_pid: bytes
    t1: int
    sig_nuavs: bytes
    c_nuavs: int
    share: bytes
    m_total: int
    k_tag: bytes


@dataclass(frozen=True)
class CmResponse:
    t1: int
    sig_cm: int
    c_cm: bytes


@dataclass(frozen=True)
class PeerBroadcast:
    sig_cms: int
    pk_cms: int
    c_ch: bytes
    q_ch: bytes
    t2: int


@dataclass(frozen=True)
class PeerAck:
    q_ack: bytes
    t2: int
    responder_pid: bytes | None = None  # hardened mode only


@dataclass(frozen=True)
class NuavConfirm:
    res: bytes
    ch_pk: int


@dataclass(frozen=True)
class TransferRequest:
    c: bytes
    euav_pid: bytes
    t3: int


@dataclass(frozen=True)
class KeyUpdateInit:
    t4: int
    own_x: int
    f_masked: bytes
    peer_commitments: tuple  # ((abscissa, g^f(abscissa)), ...) for the others
    confirm: bytes


@dataclass(frozen=True)
class ShareEnvelope:
    sender_x: int
    entries: tuple  # ((recipient abscissa, sealed share), ...)


@dataclass(frozen=True)
class PidSet:
    pids: tuple


@dataclass(frozen=True)
class StoreAck:
    digest: bytes


# field kinds: block | elem | scalar | ts | opt_block | xc_pairs | xu_pairs
#              | pid_list
_SPECS = {
    JoinRequest: (1, [("nuav_pid", "block"), ("nuav_pk", "elem"),
                      ("ch_pid", "block"), ("v", "elem"), ("sig", "elem")]),
    AggregateChallenge: (2, [("ch_pid", "block"), ("t1", "ts"),
                             ("sig_nuavs", "block"), ("c_nuavs", "elem"),
                             ("share", "block"), ("m_total", "scalar"),
                             ("k_tag", "block")]),
    CmResponse: (3, [("t1", "ts"), ("sig_cm", "elem"), ("c_cm", "block")]),
    PeerBroadcast: (4, [("sig_cms", "elem"), ("pk_cms", "elem"),
                        ("c_ch", "block"), ("q_ch", "block"), ("t2", "ts")]),
    PeerAck: (5, [("q_ack", "block"), ("t2", "ts"),
                  ("responder_pid", "opt_block")]),
    NuavConfirm: (6, [("res", "block"), ("ch_pk", "elem")]),
    TransferRequest: (7, [("c", "block"), ("euav_pid", "block"),
                          ("t3", "ts")]),
    KeyUpdateInit: (8, [("t4", "ts"), ("own_x", "scalar"),
                        ("f_masked", "block"),
                        ("peer_commitments", "xc_pairs"),
                        ("confirm", "block")]),
    ShareEnvelope: (9, [("sender_x", "scalar"), ("entries", "xu_pairs")]),
    PidSet: (10, [("pids", "pid_list")]),
    StoreAck: (11, [("digest", "block")]),
}

_BY_TAG = {tag: (cls, spec) for cls, (tag, spec) in _SPECS.items()}


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedMessage("truncated message")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def done(self):
        if self.pos != len(self.data):
            raise MalformedMessage("trailing bytes")


def _enc_field(group: GroupParams, kind: str, value) -> bytes:
    if kind == "block":
        if len(value) != BLOCK:
            raise MalformedMessage("bad block length")
        return value
    if kind == "elem":
        return group.encode_elem(value)
    if kind == "scalar":
        return encode_scalar32(value)
    if kind == "ts":
        return struct.pack(">Q", value)
    if kind == "opt_block":
        if value is None:
            return b"\x00"
        return b"\x01" + value
    if kind == "xc_pairs":
        out = [struct.pack(">H", len(value))]
        for x, elem in value:
            out.append(encode_scalar32(x))
            out.append(group.encode_elem(elem))
        return b"".join(out)
    if kind == "xu_pairs":
        out = [struct.pack(">H", len(value))]
        for x, blk in value:
            out.append(encode_scalar32(x))
            out.append(blk)
        return b"".join(out)
    if kind == "pid_list":
        return struct.pack(">H", len(value)) + b"".join(value)
    raise AssertionError(kind)


def _dec_field(group: GroupParams, kind: str, rd: _Reader):
    if kind == "block":
        return rd.take(BLOCK)
    if kind == "elem":
        return group.decode_elem(rd.take(group.elem_bytes))
    if kind == "scalar":
        return decode_scalar32(group.q, rd.take(BLOCK))
    if kind == "ts":
        return struct.unpack(">Q", rd.take(8))[0]
    if kind == "opt_block":
        flag = rd.take(1)
        if flag == b"\x00":
            return None
        if flag != b"\x01":
            raise MalformedMessage("bad optional flag")
        return rd.take(BLOCK)
    if kind == "xc_pairs":
        n = struct.unpack(">H", rd.take(2))[0]
        return tuple(
            (decode_scalar32(group.q, rd.take(BLOCK)),
             group.decode_elem(rd.take(group.elem_bytes)))
            for _ in range(n)
        )
    if kind == "xu_pairs":
        n = struct.unpack(">H", rd.take(2))[0]
        return tuple(
            (decode_scalar32(group.q, rd.take(BLOCK)), rd.take(BLOCK))
            for _ in range(n)
        )
    if kind == "pid_list":
        n = struct.unpack(">H", rd.take(2))[0]
        return tuple(rd.take(BLOCK) for _ in range(n))
    raise AssertionError(kind)


def encode(group: GroupParams, msg) -> bytes:
    tag, spec = _SPECS[type(msg)]
    parts = [bytes([tag])]
    for name, kind in spec:
        parts.append(_enc_field(group, kind, getattr(msg, name)))
    return b"".join(parts)


def decode(group: GroupParams, data: bytes):
    if not data:
        raise MalformedMessage("empty message")
    entry = _BY_TAG.get(data[0])
    if entry is None:
        raise MalformedMessage(f"unknown type tag {data[0]}")
    cls, spec = entry
    rd = _Reader(data[1:])
    values = {name: _dec_field(group, kind, rd) for name, kind in spec}
    rd.done()
    return cls(**values)


def roundtrip(group: GroupParams, msg, tamper=None, label: str = ""):
    """Encode, optionally tamper with the raw bytes, and decode.

    Every protocol hop goes through this so tampering tests exercise the
    same path honest traffic does.
    """
    raw = encode(group, msg)
    if tamper is not None:
        raw = tamper(label, raw)
    return decode(group, raw)


def wire_size(group: GroupParams, msg) -> int:
    return len(encode(group, msg))


# PublicParams travel out of band but must round-trip for inspection tools.
def encode_public_params(pp) -> bytes:
    def _chunk(n: int) -> bytes:
        b = n.to_bytes((n.bit_length() + 7) // 8 or 1, "big")
        return struct.pack(">H", len(b)) + b

    out = [b"PP", _chunk(pp.group.p), _chunk(pp.group.q), _chunk(pp.group.g)]
    out.append(struct.pack(">H", len(pp.gbs_pubs)))
    for pk in pp.gbs_pubs:
        out.append(pp.group.encode_elem(pk))
    out.append(struct.pack(">H", len(pp.hash_tags)))
    for tag in pp.hash_tags:
        raw = tag.encode()
        out.append(struct.pack(">H", len(raw)) + raw)
    return b"".join(out)


def decode_public_params(data: bytes):
    from .registry import PublicParams

    rd = _Reader(data)
    if rd.take(2) != b"PP":
        raise MalformedMessage("not a public-parameter blob")

    def _chunk() -> int:
        n = struct.unpack(">H", rd.take(2))[0]
        return int.from_bytes(rd.take(n), "big")

    p, q, g = _chunk(), _chunk(), _chunk()
    group = GroupParams(p, q, g)
    n_pubs = struct.unpack(">H", rd.take(2))[0]
    pubs = tuple(group.decode_elem(rd.take(group.elem_bytes))
                 for _ in range(n_pubs))
    n_tags = struct.unpack(">H", rd.take(2))[0]
    tags = []
    for _ in range(n_tags):
        ln = struct.unpack(">H", rd.take(2))[0]
        tags.append(rd.take(ln).decode())
    rd.done()
    return PublicParams(group=group, gbs_pubs=pubs, hash_tags=tuple(tags))


__all__ = [f.__name__ for f in (
    JoinRequest, AggregateChallenge, CmResponse, PeerBroadcast, PeerAck,
    NuavConfirm, TransferRequest, KeyUpdateInit, ShareEnvelope, PidSet,
    StoreAck,
)] + ["encode", "decode", "roundtrip", "wire_size",
      "encode_public_params", "decode_public_params"]
