"""System setup and credential issuance.

One swarm has a set of ground stations sharing a cross-cluster token and a
replicated PID database. Registration runs over an assumed-secure channel,
modeled as in-process calls; PID inserts are broadcast synchronously to
every station.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .counters import tick
from .errors import (
    ConfigInvalid,
    DuplicateInsert,
    DuplicateRegistration,
    UnknownCluster,
)
from .groups import (
    BLOCK,
    HASH_TAGS,
    GroupParams,
    encode_scalar32,
    hash_to_block,
)


_PID_RETRIES = 4096


@dataclass(frozen=True)
class PublicParams:
    group: GroupParams
    gbs_pubs: tuple
    hash_tags: tuple = HASH_TAGS


@dataclass
class MemberRecord:
    sk: int
    pk: int


@dataclass
class PidRecord:
    role: str
    cluster: int | None
    superseded: bool = False


@dataclass
class ClusterRecord:
    cluster_id: int
    key: bytes
    cjt: bytes
    ch_pid: bytes
    ch_pk: int
    members: dict = field(default_factory=dict)  # pid -> MemberRecord


@dataclass
class GbsState:
    index: int
    group: GroupParams
    sk: int
    pk: int
    ct: bytes
    rng: random.Random
    db: dict = field(default_factory=dict)  # pid -> PidRecord
    clusters: dict = field(default_factory=dict)
    rids: set = field(default_factory=set)
    provisioned: dict = field(default_factory=dict)  # nuav pid -> (sk, pk, cid)
    peers: list = field(default_factory=list)  # every GbsState incl. self


@dataclass
class ChCredential:
    pid: bytes
    key: bytes
    cjt: bytes
    sk: int
    pk: int
    r: int
    ct: bytes
    member_secrets: dict  # pid -> MemberRecord, shared with the GBS record
    gbs_index: int
    cluster_id: int
    group: GroupParams


@dataclass
class CmCredential:
    pid: bytes
    sk: int
    pk: int
    key: bytes
    r: int
    gbs_index: int
    cluster_id: int
    group: GroupParams


@dataclass
class NuavCredential:
    pid: bytes
    sk: int
    pk: int
    r: int
    h_cjt: bytes
    ch_pk: int
    ch_pid: bytes
    gbs_index: int
    cluster_id: int
    group: GroupParams


def make_pid(sk: int, r: int) -> bytes:
    return hash_to_block("pid", [encode_scalar32(sk), encode_scalar32(r)])


def _pid_taken(gbs: GbsState, pid: bytes) -> bool:
    stations = gbs.peers or [gbs]
    return any(pid in st.db or pid in st.provisioned for st in stations)


def cjt_digest(cjt: bytes) -> bytes:
    """H(CJT): hash input for join checks, exponent after reduction."""
    return hash_to_block("cjt", [cjt])


def setup_system(group: GroupParams, n_gbs: int, seed: int):
    """Create the stations, the shared cross-cluster token, and pp."""
    if n_gbs < 1:
        raise ConfigInvalid("need at least one ground station")
    master = random.Random(seed)
    ct = master.getrandbits(8 * BLOCK).to_bytes(BLOCK, "big")
    stations = []
    pubs = []
    for i in range(n_gbs):
        sk = group.rand_scalar(master)
        pk = group.exp(group.g, sk)
        stations.append(
            GbsState(
                index=i, group=group, sk=sk, pk=pk, ct=ct,
                rng=random.Random(master.getrandbits(64)),
            )
        )
        pubs.append(pk)
    for st in stations:
        st.peers = stations
    pp = PublicParams(group=group, gbs_pubs=tuple(pubs))
    return pp, stations


def db_insert(gbs: GbsState, pid: bytes, role: str, cluster: int | None):
    """Insert into this station's database and broadcast to the others."""
    for st in gbs.peers or [gbs]:
        if pid in st.db:
            raise DuplicateInsert("pid already registered")
    for st in gbs.peers or [gbs]:
        st.db[pid] = PidRecord(role=role, cluster=cluster)


def db_lookup(gbs: GbsState, pid: bytes) -> bool:
    rec = gbs.db.get(pid)
    return rec is not None and not rec.superseded


def register_ch(gbs: GbsState, rid: bytes) -> ChCredential:
    if rid in gbs.rids:
        raise DuplicateRegistration(f"rid {rid!r} already registered")
    group = gbs.group
    key = gbs.rng.getrandbits(8 * BLOCK).to_bytes(BLOCK, "big")
    cjt = gbs.rng.getrandbits(8 * BLOCK).to_bytes(BLOCK, "big")
    h = int.from_bytes(cjt_digest(cjt), "big") % group.q
    for _ in range(_PID_RETRIES):
        # tiny groups admit few (sk, r) pairs; redraw until the pid is
        # free and the derived secret is invertible
        r = group.rand_scalar(gbs.rng)
        tick("t_mm")
        sk = (r + gbs.sk * h) % group.q
        pid = make_pid(sk, r)
        if sk != 0 and not _pid_taken(gbs, pid):
            break
    else:
        raise DuplicateRegistration("pid space exhausted")
    pk = group.exp(group.g, r)

    cluster_id = len(gbs.clusters)
    cluster = ClusterRecord(
        cluster_id=cluster_id, key=key, cjt=cjt, ch_pid=pid, ch_pk=pk
    )
    gbs.clusters[cluster_id] = cluster
    gbs.rids.add(rid)
    db_insert(gbs, pid, "ch", cluster_id)
    return ChCredential(
        pid=pid, key=key, cjt=cjt, sk=sk, pk=pk, r=r, ct=gbs.ct,
        member_secrets=cluster.members, gbs_index=gbs.index,
        cluster_id=cluster_id, group=group,
    )


def register_cm(gbs: GbsState, cluster_id: int, rid: bytes) -> CmCredential:
    cluster = gbs.clusters.get(cluster_id)
    if cluster is None:
        raise UnknownCluster(f"no cluster {cluster_id}")
    if rid in gbs.rids:
        raise DuplicateRegistration(f"rid {rid!r} already registered")
    group = gbs.group
    for _ in range(_PID_RETRIES):
        sk = group.rand_scalar(gbs.rng)
        r = group.rand_scalar(gbs.rng)
        pid = make_pid(sk, r)
        if not _pid_taken(gbs, pid):
            break
    else:
        raise DuplicateRegistration("pid space exhausted")
    pk = group.exp(group.g, sk)
    gbs.rids.add(rid)
    db_insert(gbs, pid, "cm", cluster_id)
    cluster.members[pid] = MemberRecord(sk=sk, pk=pk)
    return CmCredential(
        pid=pid, sk=sk, pk=pk, key=cluster.key, r=r,
        gbs_index=gbs.index, cluster_id=cluster_id, group=group,
    )


def provision_nuav(gbs: GbsState, cluster_id: int) -> NuavCredential:
    """Issue a reinforcement UAV its keys plus the target-cluster handles.

    The pid enters the database only when the join completes.
    """
    cluster = gbs.clusters.get(cluster_id)
    if cluster is None:
        raise UnknownCluster(f"no cluster {cluster_id}")
    group = gbs.group
    for _ in range(_PID_RETRIES):
        sk = group.rand_scalar(gbs.rng)
        r = group.rand_scalar(gbs.rng)
        pid = make_pid(sk, r)
        if not _pid_taken(gbs, pid):
            break
    else:
        raise DuplicateRegistration("pid space exhausted")
    pk = group.exp(group.g, sk)
    gbs.provisioned[pid] = (sk, pk, cluster_id)
    return NuavCredential(
        pid=pid, sk=sk, pk=pk, r=r, h_cjt=cjt_digest(cluster.cjt),
        ch_pk=cluster.ch_pk, ch_pid=cluster.ch_pid,
        gbs_index=gbs.index, cluster_id=cluster_id, group=group,
    )


def admit_nuavs(gbs: GbsState, cluster_id: int, pids) -> None:
    """Store freshly authenticated pids and promote them to members."""
    from .errors import UnknownPid

    cluster = gbs.clusters[cluster_id]
    for pid in pids:
        if pid not in gbs.provisioned:
            raise UnknownPid("pid was never provisioned by this station")
        sk, pk, cid = gbs.provisioned[pid]
        if cid != cluster_id:
            raise UnknownCluster("provisioned for a different cluster")
        db_insert(gbs, pid, "nuav", cluster_id)
        cluster.members[pid] = MemberRecord(sk=sk, pk=pk)


def supersede_pid(gbs: GbsState, old_pid: bytes, new_pid: bytes,
                  cluster_id: int | None) -> None:
    """Retire a transferred pid and record its replacement everywhere."""
    for st in gbs.peers or [gbs]:
        if new_pid in st.db:
            raise DuplicateInsert("replacement pid already present")
    for st in gbs.peers or [gbs]:
        st.db[old_pid].superseded = True
        st.db[new_pid] = PidRecord(role="euav", cluster=cluster_id)


def dump_pids(gbs: GbsState, path: str) -> None:
    """Line-oriented inspection dump: "pid: hex, role, cluster"."""
    lines = []
    for pid, rec in sorted(gbs.db.items()):
        cluster = "-" if rec.cluster is None else str(rec.cluster)
        line = f"pid: {pid.hex()}, {rec.role}, {cluster}"
        if rec.superseded:
            line += ", superseded"
        lines.append(line)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
