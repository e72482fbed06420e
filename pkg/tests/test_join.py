"""Join-phase behavior: honest completeness, algebra, and tampering."""
import random

import pytest

from clusterauth import join as jn
from clusterauth.errors import (
    AckInvalid,
    AggregateInvalid,
    BatchRejected,
    EmptyBatch,
    MalformedMessage,
    MismatchedCluster,
    ProtocolError,
    ResultMismatch,
    StaleTimestamp,
)
from clusterauth.groups import xor32
from clusterauth.messages import PeerAck
from clusterauth.pipeline import build_swarm, run_join
from clusterauth.registry import cjt_digest, provision_nuav


@pytest.fixture
def swarm(tiny):
    return build_swarm(tiny, n_nuav=3, n_cm=3, n_ch=3, seed=1)


def test_honest_run_accepts(swarm):
    trace = run_join(swarm, seed=2)
    assert trace.accepted
    assert trace.confirms_ok == [True, True, True]


def test_honest_sweep_small(tiny):
    for n_nuav in (1, 2, 4):
        for n_cm in (1, 3):
            for n_ch in (1, 2):
                sw = build_swarm(tiny, n_nuav, n_cm, n_ch,
                                 seed=n_nuav * 100 + n_cm * 10 + n_ch)
                assert run_join(sw, seed=3).accepted


def test_single_request_degenerates(tiny):
    sw = build_swarm(tiny, 1, 2, 2, seed=8)
    assert run_join(sw, seed=4).accepted


def test_full_group_run(full):
    sw = build_swarm(full, 2, 2, 2, seed=12)
    assert run_join(sw, seed=5).accepted


def test_d_identity(swarm, rng):
    """pk_gbs^H(cjt) * pk_ch == g^sk_ch for every issued head credential."""
    group = swarm.group
    gbs = swarm.gbs
    for ch in [swarm.ch] + swarm.peers:
        h = int.from_bytes(cjt_digest(ch.cjt), "big") % group.q
        d = group.mul(group.exp(gbs.pk, h), ch.pk)
        assert d == group.exp(group.g, ch.sk)


def test_aggregation_balance(swarm, rng):
    """(prod sig_k)^(sk^-1) == prod V_k^w_k over an honest batch."""
    group = swarm.group
    reqs = [jn.nuav_build_request(n, swarm.pp, rng) for n in swarm.nuavs]
    inner = group.exp(group.prod(r.sig for r in reqs),
                      group.scalar_inv(swarm.ch.sk))
    agg_v = group.prod(
        group.exp(r.v, jn.request_weight(group, r.nuav_pid, r.ch_pid,
                                         r.nuav_pk))
        for r in reqs
    )
    assert inner == agg_v


def test_fresh_randomness_per_request(swarm, rng):
    a = jn.nuav_build_request(swarm.nuavs[0], swarm.pp, rng)
    b = jn.nuav_build_request(swarm.nuavs[0], swarm.pp, rng)
    assert a.v != b.v


def test_wrong_cjt_digest_rejected(swarm, rng):
    """A request built under a wrong token digest fails the member check.

    Picks a newcomer whose request weight is nonzero mod 11: a zero weight
    (probability 1/11 in the tiny group) voids the term either way.
    """
    group = swarm.group
    victim = next(
        n for n in swarm.nuavs
        if jn.request_weight(group, n.pid, n.ch_pid, n.pk) % group.q != 0
    )
    bad = type(victim)(**{**victim.__dict__, "h_cjt": bytes(32)})
    req = jn.nuav_build_request(bad, swarm.pp, rng)
    others = [n for n in swarm.nuavs if n.pid != victim.pid]
    good = [jn.nuav_build_request(n, swarm.pp, rng) for n in others]
    rnd = jn.ch_aggregate(swarm.ch, [req] + good, 1001, rng)
    cm = swarm.cms[0]
    with pytest.raises(BatchRejected):
        jn.cm_verify_and_respond(cm, swarm.ch.pid, len(swarm.cms),
                                 rnd.challenges[cm.pid], now=1001)


def test_empty_batch(swarm, rng):
    with pytest.raises(EmptyBatch):
        jn.ch_aggregate(swarm.ch, [], 1001, rng)


def test_mismatched_cluster(swarm, rng):
    req = jn.nuav_build_request(swarm.nuavs[0], swarm.pp, rng)
    foreign = type(req)(**{**req.__dict__, "ch_pid": bytes(32)})
    with pytest.raises(MismatchedCluster):
        jn.ch_aggregate(swarm.ch, [foreign], 1001, rng)


def test_identity_element_guard(swarm, rng):
    req = jn.nuav_build_request(swarm.nuavs[0], swarm.pp, rng)
    degenerate = type(req)(**{**req.__dict__, "v": 1, "sig": 1})
    with pytest.raises(MalformedMessage):
        jn.ch_aggregate(swarm.ch, [degenerate], 1001, rng)


def test_stale_challenge(swarm, rng):
    reqs = [jn.nuav_build_request(n, swarm.pp, rng) for n in swarm.nuavs]
    rnd = jn.ch_aggregate(swarm.ch, reqs, 1001, rng)
    cm = swarm.cms[0]
    with pytest.raises(StaleTimestamp):
        jn.cm_verify_and_respond(cm, swarm.ch.pid, 3,
                                 rnd.challenges[cm.pid],
                                 now=1001 + jn.DEFAULT_WINDOW_MS + 1)


def test_future_timestamp_rejected(swarm, rng):
    """The freshness window is symmetric: a clock ahead of the verifier
    is as suspect as a stale replay."""
    reqs = [jn.nuav_build_request(n, swarm.pp, rng) for n in swarm.nuavs]
    far_future = 1001 + 10 * jn.DEFAULT_WINDOW_MS
    rnd = jn.ch_aggregate(swarm.ch, reqs, far_future, rng)
    cm = swarm.cms[0]
    with pytest.raises(StaleTimestamp):
        jn.cm_verify_and_respond(cm, swarm.ch.pid, 3,
                                 rnd.challenges[cm.pid], now=1001)


def test_corrupt_share_tag_gives_fallback_not_error(swarm, rng):
    """A bad share tag downgrades to the fallback result; the head then
    sees the disagreement."""
    reqs = [jn.nuav_build_request(n, swarm.pp, rng) for n in swarm.nuavs]
    rnd = jn.ch_aggregate(swarm.ch, reqs, 1001, rng)
    cm = swarm.cms[0]
    chal = rnd.challenges[cm.pid]
    bad = type(chal)(**{**chal.__dict__, "k_tag": bytes(32)})
    resp = jn.cm_verify_and_respond(cm, swarm.ch.pid, 3, bad, now=1001)
    fallback = jn.result_fallback(1001, cm.key)
    assert xor32(resp.c_cm, cm.key) == fallback

    responses = {}
    for other in swarm.cms:
        use = bad if other.pid == cm.pid else rnd.challenges[other.pid]
        responses[other.pid] = jn.cm_verify_and_respond(
            other, swarm.ch.pid, 3, use, now=1001)
    with pytest.raises(ResultMismatch):
        jn.ch_collect_and_verify(swarm.ch, rnd, responses, t2=1003, now=1003)


def _drive_to_broadcast(swarm, rng, t1=1001):
    reqs = [jn.nuav_build_request(n, swarm.pp, rng) for n in swarm.nuavs]
    rnd = jn.ch_aggregate(swarm.ch, reqs, t1, rng)
    responses = {
        cm.pid: jn.cm_verify_and_respond(cm, swarm.ch.pid, len(swarm.cms),
                                         rnd.challenges[cm.pid], now=t1)
        for cm in swarm.cms
    }
    bc = jn.ch_collect_and_verify(swarm.ch, rnd, responses, t2=t1 + 2,
                                  now=t1 + 2)
    return reqs, rnd, responses, bc


def test_corrected_aggregate_identity(swarm, rng):
    """prod sig^s * (prod pk)^M == g^(N^2 H(result)) on honest responses."""
    _, rnd, responses, _ = _drive_to_broadcast(swarm, rng)
    group = swarm.group
    n = len(responses)
    sig_cms = group.prod(group.exp(responses[p].sig_cm, rnd.shares[p])
                         for p in sorted(responses))
    pk_cms = group.exp(
        group.prod(swarm.ch.member_secrets[p].pk for p in sorted(responses)),
        rnd.m_total)
    lhs = group.exp(group.g,
                    n * n * jn.result_exponent(group, rnd.result))
    assert lhs == group.mul(sig_cms, pk_cms)


def test_tampered_response_sig_breaks_aggregate(swarm, rng):
    reqs, rnd, responses, _ = _drive_to_broadcast(swarm, rng)
    pid = sorted(responses)[0]
    orig = responses[pid]
    forged = type(orig)(**{**orig.__dict__,
                           "sig_cm": swarm.group.exp(orig.sig_cm, 2)})
    responses[pid] = forged
    rnd.result = None
    with pytest.raises(AggregateInvalid):
        jn.ch_collect_and_verify(swarm.ch, rnd, responses, t2=1003, now=1003)


def test_peer_verify_and_ack(swarm, rng):
    _, rnd, _, bc = _drive_to_broadcast(swarm, rng)
    peer = swarm.peers[0]
    ack = jn.peer_ch_verify(peer, bc, n_cm=len(swarm.cms), now=bc.t2)
    jn.ch_verify_ack(swarm.ch, rnd, ack, now=bc.t2)


def test_peer_flipped_c_ch(swarm, rng):
    _, _, _, bc = _drive_to_broadcast(swarm, rng)
    flipped = bytearray(bc.c_ch)
    flipped[0] ^= 1
    bad = type(bc)(**{**bc.__dict__, "c_ch": bytes(flipped)})
    from clusterauth.errors import TokenMismatch

    with pytest.raises(TokenMismatch):
        jn.peer_ch_verify(swarm.peers[0], bad, n_cm=3, now=bc.t2)


def test_peer_without_token_cannot_ack(swarm, rng):
    """Monte Carlo: random acks without the token never verify."""
    _, rnd, _, bc = _drive_to_broadcast(swarm, rng)
    attacker = random.Random(123)
    for _ in range(2_000):
        forged = PeerAck(q_ack=attacker.getrandbits(256).to_bytes(32, "big"),
                         t2=bc.t2,
                         responder_pid=attacker.getrandbits(256)
                         .to_bytes(32, "big"))
        with pytest.raises(AckInvalid):
            jn.ch_verify_ack(swarm.ch, rnd, forged, now=bc.t2)


def test_reflection_rejected_in_hardened_mode(swarm, rng):
    """Replaying the head's own q value back is not a valid hardened ack."""
    _, rnd, _, bc = _drive_to_broadcast(swarm, rng)
    reflected = PeerAck(q_ack=bc.q_ch, t2=bc.t2, responder_pid=swarm.ch.pid)
    with pytest.raises(AckInvalid):
        jn.ch_verify_ack(swarm.ch, rnd, reflected, now=bc.t2)
    # and without any pid at all
    with pytest.raises(AckInvalid):
        jn.ch_verify_ack(swarm.ch, rnd,
                         PeerAck(q_ack=bc.q_ch, t2=bc.t2), now=bc.t2)


def test_paper_literal_ack_is_reflective(swarm, rng):
    _, rnd, _, bc = _drive_to_broadcast(swarm, rng)
    peer = swarm.peers[0]
    ack = jn.peer_ch_verify(peer, bc, n_cm=3, now=bc.t2, paper_literal=True)
    assert ack.q_ack == bc.q_ch  # the documented reflection weakness
    jn.ch_verify_ack(swarm.ch, rnd, ack, now=bc.t2, paper_literal=True)


def test_zero_peers_vacuous(tiny):
    sw = build_swarm(tiny, 2, 2, n_ch=1, seed=77)
    assert run_join(sw, seed=6).accepted


def test_replay_stale_broadcast(swarm, rng):
    _, _, _, bc = _drive_to_broadcast(swarm, rng)
    with pytest.raises(StaleTimestamp):
        jn.peer_ch_verify(swarm.peers[0], bc, n_cm=3,
                          now=bc.t2 + jn.DEFAULT_WINDOW_MS + 1)


def test_nuav_confirm_binds_pid(swarm, rng):
    trace = run_join(swarm, seed=2)
    sw2_nuav = provision_nuav(swarm.gbs, swarm.ch.cluster_id)
    conf = trace.hops[-1][1]  # a NuavConfirm for the last joiner
    assert not jn.nuav_verify_ch(sw2_nuav, conf)


def test_nuav_pids_stored_after_join(swarm):
    from clusterauth.registry import db_lookup

    for nuav in swarm.nuavs:
        assert not db_lookup(swarm.gbs, nuav.pid)
    run_join(swarm, seed=2)
    for nuav in swarm.nuavs:
        assert db_lookup(swarm.gbs, nuav.pid)


def test_attacker_without_cjt_cannot_confirm(swarm, rng):
    """Monte Carlo: random confirms never satisfy a newcomer."""
    nuav = swarm.nuavs[0]
    attacker = random.Random(321)
    from clusterauth.messages import NuavConfirm

    wins = 0
    for _ in range(10_000):
        forged = NuavConfirm(res=attacker.getrandbits(256).to_bytes(32, "big"),
                             ch_pk=nuav.ch_pk)
        wins += jn.nuav_verify_ch(nuav, forged)
    assert wins == 0


def test_batch_sequential_outcome_equivalence(tiny):
    """A batch accepts exactly when each request alone would accept."""
    sw = build_swarm(tiny, 3, 2, 2, seed=31)
    assert run_join(sw, seed=41).accepted
    for k in range(3):
        solo = build_swarm(tiny, 1, 2, 2, seed=31 + k)
        assert run_join(solo, seed=41).accepted

    # one corrupt request fails the batch, and fails alone too
    def corrupt_first_request(label, raw):
        if label == "join_request#0":
            flipped = bytearray(raw)
            flipped[-1] ^= 1
            return bytes(flipped)
        return raw

    sw_bad = build_swarm(tiny, 3, 2, 2, seed=32)
    with pytest.raises(ProtocolError):
        run_join(sw_bad, seed=42, tamper=corrupt_first_request)
    solo_bad = build_swarm(tiny, 1, 2, 2, seed=33)
    with pytest.raises(ProtocolError):
        run_join(solo_bad, seed=42, tamper=corrupt_first_request)
