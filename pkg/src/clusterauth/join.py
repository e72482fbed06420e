"""Join phase: batched cluster authentication.

Flow: reinforcement UAVs send signed requests; the cluster head folds the
batch into one challenge per member (signature and auxiliary-information
aggregation) plus additive shares of a batch scalar; members verify and
sign back; the head checks response consistency, verifies the aggregated
member signature, convinces the neighboring heads, registers the new pids,
and finally proves itself to each newcomer.

The aggregated member-signature check is implemented in the balanced form
g^(N^2 * H(result)) == sig_cms * pk_cms, which is the identity the member
responses actually satisfy (the unbalanced form without the N^2 factor
rejects honest runs); the same balancing applies at the neighbor-head
check. Neighbor acks default to a hardened variant that binds the
responder pid into the hash; paper_literal=True reproduces the reflective
ack instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .counters import tick
from .errors import (
    AckInvalid,
    AggregateInvalid,
    BatchRejected,
    EmptyBatch,
    MalformedMessage,
    MismatchedCluster,
    OutOfRange,
    ResultMismatch,
    StaleTimestamp,
    TokenMismatch,
)
from .groups import (
    GroupParams,
    decode_scalar32,
    encode_scalar32,
    encode_ts32,
    hash_to_block,
    hash_to_scalar,
    mask_elem,
    xor32,
)
from .messages import (
    AggregateChallenge,
    CmResponse,
    JoinRequest,
    NuavConfirm,
    PeerAck,
    PeerBroadcast,
)
from .registry import (
    ChCredential,
    CmCredential,
    NuavCredential,
    PublicParams,
    admit_nuavs,
    cjt_digest,
)

DEFAULT_WINDOW_MS = 100


def check_fresh(t_ms: int, now_ms: int, window_ms: int = DEFAULT_WINDOW_MS):
    if abs(now_ms - t_ms) > window_ms:
        raise StaleTimestamp(f"timestamp {t_ms} outside window at {now_ms}")


def _ts8(t_ms: int) -> bytes:
    return t_ms.to_bytes(8, "big")


def request_weight(group: GroupParams, nuav_pid: bytes, ch_pid: bytes,
                   nuav_pk: int) -> int:
    return hash_to_scalar(
        group.q, "w", [nuav_pid, ch_pid, group.encode_elem(nuav_pk)]
    )


def result_accept(ch_pid: bytes, t1: int, key: bytes) -> bytes:
    return hash_to_block("result-accept", [ch_pid, _ts8(t1), key])


def result_fallback(t1: int, key: bytes) -> bytes:
    return hash_to_block("result-fallback", [_ts8(t1), key])


def result_exponent(group: GroupParams, result: bytes) -> int:
    return hash_to_scalar(group.q, "result-scalar", [result])


def nuav_build_request(cred: NuavCredential, pp: PublicParams,
                       rng) -> JoinRequest:
    """Sign a join request under the cluster-joining-token digest."""
    group = cred.group
    gbs_pk = pp.gbs_pubs[cred.gbs_index]
    h = int.from_bytes(cred.h_cjt, "big") % group.q
    d = group.mul(group.exp(gbs_pk, h), cred.ch_pk)
    w = request_weight(group, cred.pid, cred.ch_pid, cred.pk)
    v = group.rand_scalar(rng)
    big_v = group.exp(group.g, v)
    tick("t_mm")
    sig = group.exp(d, v * w % group.q)
    return JoinRequest(nuav_pid=cred.pid, nuav_pk=cred.pk,
                       ch_pid=cred.ch_pid, v=big_v, sig=sig)


@dataclass
class ChallengeRound:
    """Head-side state kept between the challenge and collect steps."""

    t1: int
    m_total: int
    shares: dict  # member pid -> share scalar
    challenges: dict  # member pid -> AggregateChallenge
    requests: list = field(default_factory=list)
    result: bytes | None = None
    t2: int | None = None


def ch_aggregate(ch: ChCredential, reqs, t1: int, rng,
                 member_pids=None) -> ChallengeRound:
    """Fold a request batch into per-member challenges.

    member_pids limits the challenged verifiers (newcomers admitted within
    the same phase hold no session key yet); default is every member.
    """
    group = ch.group
    if not reqs:
        raise EmptyBatch("no join requests to aggregate")
    for req in reqs:
        if req.ch_pid != ch.pid:
            raise MismatchedCluster("request addressed to another cluster")
        if req.v == 1:
            # identity auxiliary value would vacuously pass the batch check
            raise MalformedMessage("identity element in join request")
    inner = group.prod(req.sig for req in reqs)
    inner = group.exp(inner, group.scalar_inv(ch.sk))
    c_nuavs = group.prod(
        group.exp(req.v, request_weight(group, req.nuav_pid, req.ch_pid,
                                        req.nuav_pk))
        for req in reqs
    )
    sig_nuavs = xor32(mask_elem(group, inner), ch.key)

    if member_pids is None:
        member_pids = ch.member_secrets
    member_pids = sorted(member_pids)
    shares = {pid: group.rand_scalar(rng) for pid in member_pids}
    m_total = sum(shares.values()) % group.q
    key_mask = hash_to_block("key-t", [ch.key, _ts8(t1)])
    challenges = {}
    for pid in member_pids:
        s_enc = encode_scalar32(shares[pid])
        challenges[pid] = AggregateChallenge(
            ch_pid=ch.pid,
            t1=t1,
            sig_nuavs=sig_nuavs,
            c_nuavs=c_nuavs,
            share=xor32(s_enc, key_mask),
            m_total=m_total,
            k_tag=hash_to_block("k-tag", [s_enc, pid,
                                          encode_scalar32(m_total)]),
        )
    return ChallengeRound(t1=t1, m_total=m_total, shares=shares,
                          challenges=challenges, requests=list(reqs))


def cm_verify_and_respond(cm: CmCredential, ch_pid: bytes, n_cm: int,
                          chal: AggregateChallenge, now: int,
                          window: int = DEFAULT_WINDOW_MS) -> CmResponse:
    """Member-side batch check; answers with a share-bound signature.

    A failed share tag downgrades the result to the fallback form rather
    than aborting, so the head learns that this member disagreed.
    """
    group = cm.group
    check_fresh(chal.t1, now, window)
    if chal.ch_pid != ch_pid:
        raise BatchRejected("challenge from a foreign cluster head")
    if xor32(chal.sig_nuavs, cm.key) != mask_elem(group, chal.c_nuavs):
        raise BatchRejected("aggregated request signature does not balance")

    key_mask = hash_to_block("key-t", [cm.key, _ts8(chal.t1)])
    s_raw = xor32(chal.share, key_mask)
    m_enc = encode_scalar32(chal.m_total)
    share_ok = chal.k_tag == hash_to_block("k-tag", [s_raw, cm.pid, m_enc])
    if share_ok:
        result = result_accept(chal.ch_pid, chal.t1, cm.key)
    else:
        result = result_fallback(chal.t1, cm.key)
    try:
        s = decode_scalar32(group.q, s_raw)
    except OutOfRange:
        s = 0
    if s == 0:
        # fallback response only; any invertible scalar serves
        s = 1
    tick("t_mm", 3)
    exponent = (n_cm * result_exponent(group, result)
                - cm.sk * chal.m_total) * group.scalar_inv(s) % group.q
    sig_cm = group.exp(group.g, exponent)
    return CmResponse(t1=chal.t1, sig_cm=sig_cm, c_cm=xor32(result, cm.key))


def verify_member_aggregate(group: GroupParams, factor: int, result: bytes,
                            sig_cms: int, pk_cms: int) -> bool:
    """Balanced form of the aggregated member-signature check."""
    lhs = group.exp(group.g, factor * result_exponent(group, result))
    return lhs == group.mul(sig_cms, pk_cms)


def ch_collect_and_verify(ch: ChCredential, rnd: ChallengeRound, responses,
                          t2: int, now: int,
                          window: int = DEFAULT_WINDOW_MS) -> PeerBroadcast:
    """Check member responses, aggregate, and build the neighbor proof.

    responses: dict member pid -> CmResponse, one per challenged member.
    """
    group = ch.group
    if set(responses) != set(rnd.shares):
        raise ResultMismatch("response set does not match the member set")
    expected = result_accept(ch.pid, rnd.t1, ch.key)
    for pid in sorted(responses):
        resp = responses[pid]
        if resp.t1 != rnd.t1:
            raise StaleTimestamp("response echoes a different challenge time")
        check_fresh(resp.t1, now, window)
        if xor32(resp.c_cm, ch.key) != expected:
            raise ResultMismatch(f"member {pid.hex()[:8]} disagreed")

    n_cm = len(responses)
    sig_cms = group.prod(
        group.exp(responses[pid].sig_cm, rnd.shares[pid])
        for pid in sorted(responses)
    )
    pk_cms = group.exp(
        group.prod(ch.member_secrets[pid].pk for pid in sorted(responses)),
        rnd.m_total,
    )
    if not verify_member_aggregate(group, n_cm * n_cm, expected,
                                   sig_cms, pk_cms):
        raise AggregateInvalid("aggregated member signature does not balance")

    rnd.result = expected
    rnd.t2 = t2
    c_ch = xor32(xor32(expected, ch.ct), encode_ts32(t2))
    q_ch = hash_to_block("peer-q", [expected, _ts8(t2)])
    return PeerBroadcast(sig_cms=sig_cms, pk_cms=pk_cms, c_ch=c_ch,
                         q_ch=q_ch, t2=t2)


def peer_ch_verify(peer: ChCredential, bc: PeerBroadcast, n_cm: int,
                   now: int, window: int = DEFAULT_WINDOW_MS,
                   paper_literal: bool = False,
                   aggregated: bool = True) -> PeerAck:
    """Neighbor-head check of a broadcast proof.

    n_cm is the responding-member count behind the proof (the broadcast
    itself carries only the aggregate); aggregated=False verifies a
    single unaggregated response with the matching N factor.
    """
    group = peer.group
    check_fresh(bc.t2, now, window)
    result = xor32(xor32(bc.c_ch, peer.ct), encode_ts32(bc.t2))
    if bc.q_ch != hash_to_block("peer-q", [result, _ts8(bc.t2)]):
        raise TokenMismatch("peer q value does not match the masked result")
    factor = n_cm * n_cm if aggregated else n_cm
    if not verify_member_aggregate(group, factor, result,
                                   bc.sig_cms, bc.pk_cms):
        raise AggregateInvalid("forwarded aggregate does not balance")
    if paper_literal:
        # reflective ack: identical to the broadcaster's own q value
        return PeerAck(q_ack=hash_to_block("peer-q", [result, _ts8(bc.t2)]),
                       t2=bc.t2, responder_pid=None)
    q_ack = hash_to_block("peer-ack", [result, _ts8(bc.t2), peer.pid])
    return PeerAck(q_ack=q_ack, t2=bc.t2, responder_pid=peer.pid)


def ch_verify_ack(ch: ChCredential, rnd: ChallengeRound, ack: PeerAck,
                  now: int, window: int = DEFAULT_WINDOW_MS,
                  paper_literal: bool = False) -> None:
    if ack.t2 != rnd.t2:
        raise StaleTimestamp("ack echoes a different broadcast time")
    check_fresh(ack.t2, now, window)
    if paper_literal:
        expected = hash_to_block("peer-q", [rnd.result, _ts8(rnd.t2)])
        if ack.q_ack != expected:
            raise AckInvalid("reflective ack does not match")
        return
    if ack.responder_pid is None or ack.responder_pid == ch.pid:
        raise AckInvalid("ack must be bound to a distinct responder")
    expected = hash_to_block("peer-ack",
                             [rnd.result, _ts8(rnd.t2), ack.responder_pid])
    if ack.q_ack != expected:
        raise AckInvalid("ack hash does not match")


def build_confirms(ch: ChCredential, reqs) -> list:
    """Head-authenticity proof for each newcomer, bound to its pid."""
    digest = cjt_digest(ch.cjt)
    confirms = []
    for req in reqs:
        res = hash_to_block(
            "nuav-verify", [digest, req.nuav_pid, ch.group.encode_elem(ch.pk)]
        )
        confirms.append(NuavConfirm(res=res, ch_pk=ch.pk))
    return confirms


def ch_finalize(ch: ChCredential, rnd: ChallengeRound, acks, gbs, reqs,
                now: int, window: int = DEFAULT_WINDOW_MS,
                paper_literal: bool = False) -> list:
    """Verify neighbor acks, register the new pids, answer the newcomers."""
    seen = set()
    for ack in acks:
        ch_verify_ack(ch, rnd, ack, now, window, paper_literal)
        if not paper_literal:
            if ack.responder_pid in seen:
                raise AckInvalid("duplicate responder")
            seen.add(ack.responder_pid)
    admit_nuavs(gbs, ch.cluster_id, [req.nuav_pid for req in reqs])
    return build_confirms(ch, reqs)


def ch_forward_items(ch: ChCredential, rnd: ChallengeRound, responses,
                     t2: int, now: int,
                     window: int = DEFAULT_WINDOW_MS) -> list:
    """Unbatched variant of the collect step: one forwardable proof per
    member response, each checked with the single-response factor N."""
    group = ch.group
    if set(responses) != set(rnd.shares):
        raise ResultMismatch("response set does not match the member set")
    expected = result_accept(ch.pid, rnd.t1, ch.key)
    n_cm = len(responses)
    c_ch = xor32(xor32(expected, ch.ct), encode_ts32(t2))
    q_ch = hash_to_block("peer-q", [expected, _ts8(t2)])
    items = []
    for pid in sorted(responses):
        resp = responses[pid]
        if resp.t1 != rnd.t1:
            raise StaleTimestamp("response echoes a different challenge time")
        check_fresh(resp.t1, now, window)
        if xor32(resp.c_cm, ch.key) != expected:
            raise ResultMismatch(f"member {pid.hex()[:8]} disagreed")
        sig_i = group.exp(resp.sig_cm, rnd.shares[pid])
        pk_i = group.exp(ch.member_secrets[pid].pk, rnd.m_total)
        if not verify_member_aggregate(group, n_cm, expected, sig_i, pk_i):
            raise AggregateInvalid("member signature does not balance")
        items.append(PeerBroadcast(sig_cms=sig_i, pk_cms=pk_i, c_ch=c_ch,
                                   q_ch=q_ch, t2=t2))
    rnd.result = expected
    rnd.t2 = t2
    return items


def nuav_verify_ch(cred: NuavCredential, conf: NuavConfirm) -> bool:
    """Newcomer-side authentication of the cluster head."""
    if conf.ch_pk != cred.ch_pk:
        return False
    expected = hash_to_block(
        "nuav-verify",
        [cred.h_cjt, cred.pid, cred.group.encode_elem(cred.ch_pk)],
    )
    return expected == conf.res
