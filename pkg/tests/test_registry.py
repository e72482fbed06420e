"""Credential issuance and the replicated pid database."""
import pytest

from clusterauth.errors import (
    ConfigInvalid,
    DuplicateInsert,
    DuplicateRegistration,
    UnknownCluster,
)
from clusterauth.registry import (
    cjt_digest,
    db_insert,
    db_lookup,
    dump_pids,
    make_pid,
    provision_nuav,
    register_ch,
    register_cm,
    setup_system,
)


@pytest.fixture
def system(tiny):
    return setup_system(tiny, 3, seed=99)


def test_setup_forced_secret_matches_oracle(tiny):
    # sk=3 in the tiny group gives pk = 2^3 mod 23 = 8 (modexp oracle)
    assert tiny.exp(tiny.g, 3) == 8


def test_setup_shares_one_token(system):
    pp, stations = system
    assert len({st.ct for st in stations}) == 1
    assert len(pp.gbs_pubs) == 3
    for st in stations:
        assert st.pk == tiny_pk(st)


def tiny_pk(st):
    return st.group.exp(st.group.g, st.sk)


def test_setup_rejects_zero_stations(tiny):
    with pytest.raises(ConfigInvalid):
        setup_system(tiny, 0, seed=1)


def test_ch_credential_identity(system):
    """g^sk must equal pk_gbs^H(cjt) * pk: the join-phase anchor."""
    pp, stations = system
    gbs = stations[0]
    ch = register_ch(gbs, b"alpha")
    group = gbs.group
    h = int.from_bytes(cjt_digest(ch.cjt), "big") % group.q
    lhs = group.exp(group.g, ch.sk)
    rhs = group.mul(group.exp(gbs.pk, h), ch.pk)
    assert lhs == rhs
    assert ch.pid == make_pid(ch.sk, ch.r)


def test_two_ch_registrations_distinct(system):
    _, stations = system
    a = register_ch(stations[0], b"a")
    b = register_ch(stations[0], b"b")
    assert a.cjt != b.cjt and a.key != b.key and a.pid != b.pid


def test_duplicate_rid_rejected(system):
    _, stations = system
    register_ch(stations[0], b"dup")
    with pytest.raises(DuplicateRegistration):
        register_ch(stations[0], b"dup")


def test_cm_shares_cluster_key(system):
    _, stations = system
    gbs = stations[0]
    ch = register_ch(gbs, b"head")
    cm = register_cm(gbs, ch.cluster_id, b"member")
    assert cm.key == ch.key
    assert gbs.group.exp(gbs.group.g, cm.sk) == cm.pk
    assert cm.pid in ch.member_secrets
    assert ch.member_secrets[cm.pid].sk == cm.sk


def test_cm_unknown_cluster(system):
    _, stations = system
    with pytest.raises(UnknownCluster):
        register_cm(stations[0], 404, b"ghost")


def test_nuav_provisioning(system):
    _, stations = system
    gbs = stations[0]
    ch = register_ch(gbs, b"head")
    a = provision_nuav(gbs, ch.cluster_id)
    b = provision_nuav(gbs, ch.cluster_id)
    assert a.h_cjt == cjt_digest(ch.cjt) == b.h_cjt
    assert a.pid != b.pid
    assert a.ch_pk == ch.pk and a.ch_pid == ch.pid
    # pid only enters the database when the join completes
    assert not db_lookup(gbs, a.pid)


def test_nuav_secrets_distinct_full_group(full):
    _, stations = setup_system(full, 1, seed=7)
    gbs = stations[0]
    ch = register_ch(gbs, b"head")
    a = provision_nuav(gbs, ch.cluster_id)
    b = provision_nuav(gbs, ch.cluster_id)
    # the tiny group has only q-1 possible secrets, so distinctness is
    # only meaningful at full scale
    assert a.sk != b.sk


def test_broadcast_consistency(system):
    _, stations = system
    ch = register_ch(stations[1], b"elsewhere")
    for st in stations:
        assert db_lookup(st, ch.pid)
    assert len({frozenset(st.db) for st in stations}) == 1


def test_db_set_semantics(system):
    _, stations = system
    gbs = stations[0]
    pid = bytes(32)
    assert not db_lookup(gbs, pid)
    db_insert(gbs, pid, "cm", 0)
    assert db_lookup(gbs, pid)
    with pytest.raises(DuplicateInsert):
        db_insert(gbs, pid, "cm", 0)


def test_pid_uniqueness_across_many(system):
    _, stations = system
    gbs = stations[0]
    ch = register_ch(gbs, b"head")
    pids = {ch.pid}
    for i in range(40):
        cm = register_cm(gbs, ch.cluster_id, b"m%d" % i)
        pids.add(cm.pid)
    assert len(pids) == 41
    assert all(len({frozenset(st.db) for st in stations}) == 1
               for _ in [0])


def test_dump_pids(system, tmp_path):
    _, stations = system
    gbs = stations[0]
    ch = register_ch(gbs, b"head")
    register_cm(gbs, ch.cluster_id, b"m")
    path = tmp_path / "pids.txt"
    dump_pids(gbs, str(path))
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 2
    assert all(line.startswith("pid: ") for line in lines)
    assert any(", ch, " in line for line in lines)
