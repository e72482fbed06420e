"""End-to-end protocol runs at the library level.

Builds a swarm, then drives join, transfer, and key update with every
message round-tripped through the wire codec. A tamper hook may rewrite
any hop's raw bytes, which is how the bit-flip soundness sweep injects
faults. The simulator mirrors this flow with channel timing on top.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import join as jn
from . import rekey as rk
from . import transfer as tr
from .groups import GroupParams
from .messages import roundtrip
from .registry import (
    ChCredential,
    GbsState,
    PublicParams,
    register_ch,
    register_cm,
    provision_nuav,
    setup_system,
)


@dataclass
class Swarm:
    pp: PublicParams
    stations: list
    ch: ChCredential
    cms: list
    peers: list  # neighbor cluster heads
    nuavs: list

    @property
    def gbs(self) -> GbsState:
        return self.stations[0]

    @property
    def group(self) -> GroupParams:
        return self.pp.group


def build_swarm(group: GroupParams, n_nuav: int, n_cm: int, n_ch: int,
                seed: int, n_gbs: int = 1) -> Swarm:
    """One target cluster, its members, neighbor heads, and newcomers."""
    pp, stations = setup_system(group, n_gbs, seed)
    gbs = stations[0]
    ch = register_ch(gbs, b"ch-target")
    cms = [register_cm(gbs, ch.cluster_id, b"cm-%d" % i)
           for i in range(n_cm)]
    peers = [register_ch(gbs, b"ch-peer-%d" % i) for i in range(n_ch - 1)]
    nuavs = [provision_nuav(gbs, ch.cluster_id) for _ in range(n_nuav)]
    return Swarm(pp=pp, stations=stations, ch=ch, cms=cms, peers=peers,
                 nuavs=nuavs)


@dataclass
class JoinTrace:
    """What happened, plus every wire message for inspection."""

    accepted: bool
    confirms_ok: list = field(default_factory=list)
    hops: list = field(default_factory=list)  # (label, raw bytes)


def run_join(swarm: Swarm, seed: int = 7, t0: int = 1_000,
             window: int = jn.DEFAULT_WINDOW_MS, tamper=None,
             paper_literal: bool = False, codec: bool = True) -> JoinTrace:
    """Drive the whole join phase; raises on any verification failure.

    codec=False skips the encode/decode round trip (pure protocol math,
    used when measuring operation counts against the published tallies).
    """
    group = swarm.group
    rng = random.Random(seed)
    trace = JoinTrace(accepted=False)

    def hop(label, msg):
        raw_label = f"{label}#{len(trace.hops)}"
        trace.hops.append((raw_label, msg))
        if not codec:
            return msg
        return roundtrip(group, msg, tamper, raw_label)

    reqs = [hop("join_request", jn.nuav_build_request(nuav, swarm.pp, rng))
            for nuav in swarm.nuavs]

    t1 = t0 + 1
    rnd = jn.ch_aggregate(swarm.ch, reqs, t1, rng)
    responses = {}
    for cm in swarm.cms:
        chal = hop("agg_challenge", rnd.challenges[cm.pid])
        resp = jn.cm_verify_and_respond(cm, swarm.ch.pid, len(swarm.cms),
                                        chal, now=t1 + 1, window=window)
        responses[cm.pid] = hop("cm_response", resp)

    t2 = t1 + 2
    bc = jn.ch_collect_and_verify(swarm.ch, rnd, responses, t2, now=t2,
                                  window=window)
    acks = []
    for peer in swarm.peers:
        bc_rx = hop("peer_broadcast", bc)
        ack = jn.peer_ch_verify(peer, bc_rx, len(swarm.cms), now=t2 + 1,
                                window=window, paper_literal=paper_literal)
        acks.append(hop("peer_ack", ack))

    confirms = jn.ch_finalize(swarm.ch, rnd, acks, swarm.gbs, reqs,
                              now=t2 + 2, window=window,
                              paper_literal=paper_literal)
    for nuav, conf in zip(swarm.nuavs, confirms):
        conf_rx = hop("nuav_confirm", conf)
        trace.confirms_ok.append(jn.nuav_verify_ch(nuav, conf_rx))

    trace.accepted = all(trace.confirms_ok) and len(trace.confirms_ok) == len(
        swarm.nuavs
    )
    return trace


def run_transfer(swarm: Swarm, dest_ch: ChCredential, euav_pid: bytes,
                 t3: int = 2_000, tamper=None,
                 window: int = jn.DEFAULT_WINDOW_MS, codec: bool = True):
    """Source-to-destination handoff; returns the fresh pseudonym."""
    req = tr.source_ch_build_transfer(swarm.ch, euav_pid, t3)
    if codec:
        req = roundtrip(swarm.group, req, tamper, "transfer_request#0")
    return tr.dest_ch_verify_transfer(dest_ch, swarm.gbs, req, now=t3 + 1,
                                      window=window)


def run_rekey(swarm: Swarm, member_creds, seed: int = 11, t4: int = 3_000,
              tamper=None, window: int = jn.DEFAULT_WINDOW_MS,
              codec: bool = True):
    """Full key update; returns {pid: reconstructed key} plus dealer key."""
    group = swarm.group
    rng = random.Random(seed)
    pids = [cm.pid for cm in member_creds]
    key_new, inits = rk.ch_init_update(swarm.ch, pids, t4, rng)

    hop_idx = 0

    def hop(label, msg):
        nonlocal hop_idx
        hop_idx += 1
        if not codec:
            return msg
        return roundtrip(group, msg, tamper, f"{label}#{hop_idx - 1}")

    shares = {}
    envelopes = {}
    for cm in member_creds:
        init_rx = hop("key_update_init", inits[cm.pid])
        share, env = rk.cm_recover_and_share(cm, init_rx, now=t4 + 1,
                                             window=window)
        shares[cm.pid] = (share, init_rx)
        envelopes[cm.pid] = hop("share_envelope", env)

    keys = {}
    for cm in member_creds:
        own_share, init_rx = shares[cm.pid]
        others = [envelopes[other.pid] for other in member_creds
                  if other.pid != cm.pid]
        keys[cm.pid] = rk.cm_reconstruct(cm, own_share, others, init_rx,
                                         n_cm=len(member_creds))
    return key_new, keys


def measure_stage_ops(group, n_nuav: int, n_cm: int, n_ch: int,
                      seed: int = 3) -> dict:
    """Instrumented operation counts per stage, protocol math only."""
    from .counters import counting
    from .registry import register_ch, register_cm, setup_system

    measured = {}
    with counting() as c:
        _, stations = setup_system(group, 1, seed=seed)
        ch = register_ch(stations[0], b"measure-ch")
        register_cm(stations[0], ch.cluster_id, b"measure-cm")
    measured["init"] = c

    swarm = build_swarm(group, n_nuav, n_cm, max(n_ch, 2), seed=seed)
    with counting() as c:
        run_join(swarm, seed=seed, codec=False)
        run_transfer(swarm, swarm.peers[0], swarm.cms[0].pid, codec=False)
    measured["uav_auth"] = c

    swarm2 = build_swarm(group, 0, n_cm, 1, seed=seed + 1)
    with counting() as c:
        run_rekey(swarm2, swarm2.cms, seed=seed, codec=False)
    measured["key_update"] = c
    return measured
