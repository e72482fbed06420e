"""Executable security fixtures: forgery and confidentiality games plus
the transfer-unlinkability distinguisher.

The games are oracle-driven: an adversary issues queries (registration,
join request, member verification, head verification, cross-cluster),
receives exactly the fields the game prescribes, and must then produce a
verifying value for a fresh challenge context it never queried. The suite
ships concrete strategies (random, stale replay, field splicing) and
demonstrates that none of them ever wins; that is an empirical statement
about these strategies, not a proof.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import join as jn
from .errors import (
    ProtocolError,
    RepeatedChallenge,
    UnknownQueryKind,
)
from .groups import BLOCK, GroupParams, hash_to_block, xor32
from .messages import encode
from .pipeline import build_swarm
from .registry import provision_nuav, register_ch, register_cm
from . import rekey as rk


def _ts8(t_ms: int) -> bytes:
    return t_ms.to_bytes(8, "big")


def _rand_block(rng) -> bytes:
    return rng.getrandbits(8 * BLOCK).to_bytes(BLOCK, "big")


@dataclass
class OracleSession:
    """Challenger state: a small swarm plus the query log.

    Query responses carry only the fields the games list; challenger
    secrets stay inside the session object.
    """

    group: GroupParams
    seed: int = 1
    clock: int = 1_000
    log: list = field(default_factory=list)
    used_messages: set = field(default_factory=set)

    def __post_init__(self):
        self.swarm = build_swarm(self.group, n_nuav=1, n_cm=2, n_ch=2,
                                 seed=self.seed)
        self.rng = random.Random(self.seed ^ 0x5EC)
        self._challenge = None

    @property
    def pp(self):
        return self.swarm.pp

    def tick(self) -> int:
        self.clock += 1
        return self.clock


def dug_query(session: OracleSession, kind: str, role: str | None = None):
    """Issue one oracle query; the response is logged and returned."""
    sw = session.swarm
    group = session.group
    if kind == "registration":
        if role == "CH":
            cred = register_ch(sw.gbs, b"oracle-ch-%d" % len(session.log))
            resp = {"pid": cred.pid, "key": cred.key, "sk": cred.sk,
                    "pk": cred.pk, "ct": cred.ct, "cjt": cred.cjt}
        elif role == "CM":
            cred = register_cm(sw.gbs, sw.ch.cluster_id,
                               b"oracle-cm-%d" % len(session.log))
            resp = {"pid": cred.pid, "key": cred.key, "sk": cred.sk,
                    "pk": cred.pk}
        elif role == "NUAV":
            cred = provision_nuav(sw.gbs, sw.ch.cluster_id)
            resp = {"pid": cred.pid, "h_cjt": cred.h_cjt, "sk": cred.sk,
                    "pk": cred.pk}
        else:
            raise UnknownQueryKind(f"no registration role {role!r}")
    elif kind == "joining_request":
        cred = provision_nuav(sw.gbs, sw.ch.cluster_id)
        req = jn.nuav_build_request(cred, sw.pp, session.rng)
        resp = {"pid": req.nuav_pid, "ch_pid": req.ch_pid, "sig": req.sig,
                "v": req.v, "pk": req.nuav_pk}
    elif kind == "cm_verification":
        # single-verifier context: N factor 1, result in the plain form
        cm = sw.cms[0]
        t1 = session.tick()
        s = group.rand_scalar(session.rng)
        m = s
        result = jn.result_fallback(t1, cm.key)
        exponent = (jn.result_exponent(group, result)
                    - cm.sk * m) * group.scalar_inv(s) % group.q
        sig = group.exp(group.g, exponent)
        resp = {"sig": sig, "c": xor32(result, cm.key), "t1": t1}
        session.log.append({"kind": kind, "s": s, "m": m, **resp})
        return resp
    elif kind == "ch_verification":
        t1, t2 = session.tick(), session.tick()
        result = jn.result_fallback(t1, sw.ch.key)
        resp = {"q": hash_to_block("peer-q", [result, _ts8(t2)]), "t2": t2}
    elif kind == "cross_cluster":
        t3 = session.tick()
        pid = sw.cms[0].pid
        c = xor32(hash_to_block("transfer", [pid, _ts8(t3), sw.ch.ct]),
                  sw.ch.ct)
        resp = {"c": c, "pid": pid, "t3": t3}
    else:
        raise UnknownQueryKind(f"no query kind {kind!r}")
    session.log.append({"kind": kind, "role": role, **resp})
    return resp


@dataclass
class ChallengeContext:
    """Fresh identities and session values never seen in the query phase."""

    pid_a: bytes
    pid_ch: bytes
    pk_a: int
    pk_ch: int
    sk_ch: int  # challenger-side verification key
    t1: int
    t2: int
    t3: int
    key: bytes
    s: int
    m: int
    result: bytes
    ct: bytes
    now: int


def make_challenge(session: OracleSession) -> ChallengeContext:
    if session._challenge is not None:
        return session._challenge
    group = session.group
    rng = session.rng
    sk_a = group.rand_scalar(rng)
    sk_ch = group.rand_scalar(rng)
    t1, t2, t3 = session.tick(), session.tick(), session.tick()
    key = _rand_block(rng)
    pid_ch = _rand_block(rng)
    s = group.rand_scalar(rng)
    ctx = ChallengeContext(
        pid_a=_rand_block(rng),
        pid_ch=pid_ch,
        pk_a=group.exp(group.g, sk_a),
        pk_ch=group.exp(group.g, sk_ch),
        sk_ch=sk_ch,
        t1=t1, t2=t2, t3=t3,
        key=key,
        s=s,
        m=s,
        result=jn.result_accept(pid_ch, t1, key),
        ct=session.swarm.ch.ct,
        now=session.clock,
    )
    session._challenge = ctx
    return ctx


# honest verifiers for each forgeable value -------------------------------
def verify_join_forgery(group: GroupParams, ctx: ChallengeContext,
                        sig: int, v: int, t: int | None = None) -> bool:
    try:
        if t is not None:
            jn.check_fresh(t, ctx.now)
        if not (group.is_element(sig) and group.is_element(v)) or v == 1:
            return False
        w = jn.request_weight(group, ctx.pid_a, ctx.pid_ch, ctx.pk_a)
        lhs = group.exp(sig, group.scalar_inv(ctx.sk_ch))
        return lhs == group.exp(v, w)
    except ProtocolError:
        return False


def verify_cm_forgery(group: GroupParams, ctx: ChallengeContext,
                      sig: int, c: bytes, t1: int) -> bool:
    try:
        jn.check_fresh(t1, ctx.now)
        if xor32(c, ctx.key) != ctx.result:
            return False
        if not group.is_element(sig):
            return False
        lhs = group.exp(group.g, jn.result_exponent(group, ctx.result))
        rhs = group.mul(group.exp(sig, ctx.s),
                        group.exp(ctx.pk_a, ctx.m))
        return lhs == rhs
    except ProtocolError:
        return False


def verify_ack_forgery(ctx: ChallengeContext, q: bytes, pid: bytes,
                       t2: int) -> bool:
    try:
        jn.check_fresh(t2, ctx.now)
        if pid == ctx.pid_ch:
            return False
        return q == hash_to_block("peer-ack", [ctx.result, _ts8(t2), pid])
    except ProtocolError:
        return False


def verify_transfer_forgery(ctx: ChallengeContext, c: bytes,
                            t3: int) -> bool:
    try:
        jn.check_fresh(t3, ctx.now)
        expected = hash_to_block("transfer", [ctx.pid_a, _ts8(t3), ctx.ct])
        return xor32(c, ctx.ct) == expected
    except ProtocolError:
        return False


STRATEGIES = ("random", "replay-stale", "splice-fields")


def dug_forgery_trial(session: OracleSession, strategy: str, rng) -> bool:
    """One forgery attempt; True when any forged value verifies."""
    group = session.group
    ctx = make_challenge(session)
    if strategy == "random":
        candidates = dict(
            join=(group.rand_elem(rng), group.rand_elem(rng), ctx.t1),
            cm=(group.rand_elem(rng), _rand_block(rng), ctx.t1),
            ack=(_rand_block(rng), _rand_block(rng), ctx.t2),
            transfer=(_rand_block(rng), ctx.t3),
        )
    elif strategy == "replay-stale":
        stale = ctx.now - jn.DEFAULT_WINDOW_MS - 1_000
        joins = [e for e in session.log if e["kind"] == "joining_request"]
        cms = [e for e in session.log if e["kind"] == "cm_verification"]
        qs = [e for e in session.log if e["kind"] == "ch_verification"]
        xfers = [e for e in session.log if e["kind"] == "cross_cluster"]
        if not (joins and cms and qs and xfers):
            return False
        j = rng.choice(joins)
        c = rng.choice(cms)
        q = rng.choice(qs)
        x = rng.choice(xfers)
        candidates = dict(
            join=(j["sig"], j["v"], stale),
            cm=(c["sig"], c["c"], stale),
            ack=(q["q"], _rand_block(rng), stale),
            transfer=(x["c"], stale),
        )
    elif strategy == "splice-fields":
        joins = [e for e in session.log if e["kind"] == "joining_request"]
        cms = [e for e in session.log if e["kind"] == "cm_verification"]
        qs = [e for e in session.log if e["kind"] == "ch_verification"]
        xfers = [e for e in session.log if e["kind"] == "cross_cluster"]
        if len(joins) < 2 or len(cms) < 2 or not qs or not xfers:
            return False
        j1, j2 = rng.sample(joins, 2)
        c1, c2 = rng.sample(cms, 2)
        candidates = dict(
            join=(j1["sig"], j2["v"], ctx.t1),
            cm=(c1["sig"], c2["c"], ctx.t1),
            ack=(rng.choice(qs)["q"], _rand_block(rng), ctx.t2),
            transfer=(rng.choice(xfers)["c"], ctx.t3),
        )
    else:
        raise UnknownQueryKind(f"no strategy {strategy!r}")

    sig, v, t = candidates["join"]
    if verify_join_forgery(group, ctx, sig, v, t):
        return True
    sig, c, t1 = candidates["cm"]
    if verify_cm_forgery(group, ctx, sig, c, t1):
        return True
    q, pid, t2 = candidates["ack"]
    if verify_ack_forgery(ctx, q, pid, t2):
        return True
    c, t3 = candidates["transfer"]
    if verify_transfer_forgery(ctx, c, t3):
        return True
    return False


def run_dug(session: OracleSession, strategy: str, trials: int,
            seed: int = 0) -> int:
    """Number of wins over the given trial count (expected: zero)."""
    rng = random.Random(seed)
    # a populated log is what replay/splice strategies feed on
    for kind in ("joining_request", "cm_verification", "ch_verification",
                 "cross_cluster"):
        for _ in range(4):
            dug_query(session, kind)
    return sum(dug_forgery_trial(session, strategy, rng)
               for _ in range(trials))


# confidentiality game -----------------------------------------------------
def keystream(key: bytes, n: int) -> bytes:
    out = b""
    counter = 0
    while len(out) < n:
        out += hash_to_block("keystream",
                             [key, counter.to_bytes(4, "big")])
        counter += 1
    return out[:n]


def _rekey_transcript(session: OracleSession):
    """One key update over the challenger cluster; returns
    (key block, public transcript bytes)."""
    sw = session.swarm
    t4 = session.tick()
    pids = [cm.pid for cm in sw.cms]
    key_new, inits = rk.ch_init_update(sw.ch, pids, t4, session.rng)
    transcript = b"".join(encode(session.group, inits[p]) for p in
                          sorted(inits))
    for cm in sw.cms:
        _, env = rk.cm_recover_and_share(cm, inits[cm.pid], now=t4,
                                         window=1 << 40)
        transcript += encode(session.group, env)
    return key_new, transcript


def dcg_round(session: OracleSession, m0: bytes, m1: bytes) -> dict:
    """One confidentiality round; returns per-guesser correctness."""
    if m0 == m1:
        raise RepeatedChallenge("challenge messages must differ")
    if m0 in session.used_messages or m1 in session.used_messages:
        raise RepeatedChallenge("challenge message was already used")
    session.used_messages.update((m0, m1))

    key_new, transcript = _rekey_transcript(session)
    b = session.rng.getrandbits(1)
    msg = (m0, m1)[b]
    c_b = bytes(x ^ y for x, y in zip(keystream(key_new, len(msg)), msg))

    guesses = {"random": session.rng.getrandbits(1)}
    ref = hash_to_block("keystream", [transcript])
    scores = []
    for cand in (m0, m1):
        ks = bytes(x ^ y for x, y in zip(c_b, cand))
        scores.append(sum(bin(x ^ y).count("1")
                          for x, y in zip(ks, ref[:len(ks)])))
    guesses["correlation"] = 0 if scores[0] <= scores[1] else 1
    return {name: int(guess == b) for name, guess in guesses.items()}


def run_dcg(session: OracleSession, rounds: int, seed: int = 0) -> dict:
    rng = random.Random(seed)
    wins = {"random": 0, "correlation": 0}
    for i in range(rounds):
        m0 = rng.getrandbits(8 * BLOCK).to_bytes(BLOCK, "big")
        m1 = rng.getrandbits(8 * BLOCK).to_bytes(BLOCK, "big")
        outcome = dcg_round(session, m0, m1)
        for name in wins:
            wins[name] += outcome[name]
    return {name: w / rounds for name, w in wins.items()}


# unlinkability ------------------------------------------------------------
def unlink_transcripts(rng, ct: bytes, same: bool):
    """Two transfer transcripts, chained (same vehicle) or independent."""
    pid1 = _rand_block(rng)
    t31 = rng.randrange(1, 1 << 32)
    h1 = hash_to_block("transfer", [pid1, _ts8(t31), ct])
    pid2 = h1 if same else _rand_block(rng)
    t32 = t31 + rng.randrange(1, 1000)
    h2 = hash_to_block("transfer", [pid2, _ts8(t32), ct])
    return ((xor32(h1, ct), pid1, t31), (xor32(h2, ct), pid2, t32))


def unlink_distinguish(m1, m2, ct: bytes | None = None) -> bool:
    """Stateless same-vehicle guess from public fields alone; exact when
    the cross-cluster token is supplied."""
    (c1, pid1, t31), (c2, pid2, t32) = m1, m2
    if ct is not None:
        return pid2 == hash_to_block("transfer", [pid1, _ts8(t31), ct])
    score = sum(a == b for a, b in zip(xor32(c1, pid2), xor32(c2, pid1)))
    return score >= 2


def unlink_trial(n_trials: int, seed: int = 0,
                 reveal_ct: bool = False) -> float:
    """Distinguisher accuracy over n_trials balanced same/different pairs."""
    rng = random.Random(seed)
    ct = _rand_block(rng)
    correct = 0
    for i in range(n_trials):
        same = bool(i % 2)
        m1, m2 = unlink_transcripts(rng, ct, same)
        guess = unlink_distinguish(m1, m2, ct=ct if reveal_ct else None)
        correct += guess == same
    return correct / n_trials


# suite runner --------------------------------------------------------------
def run_suites(group: GroupParams, trials: int, seed: int = 1) -> list:
    """All suites: rows of (suite, trials, wins, threshold, passed)."""
    rows = []
    for strategy in STRATEGIES:
        session = OracleSession(group, seed=seed)
        wins = run_dug(session, strategy, trials, seed=seed)
        rows.append((f"dug_{strategy.replace('-', '_')}", trials, wins,
                     0, wins == 0))
    session = OracleSession(group, seed=seed + 1)
    accs = run_dcg(session, trials, seed=seed)
    # 0.02 equals four binomial sigmas at the canonical 10^4 rounds; the
    # band widens accordingly for smaller smoke runs
    band = max(0.02, 4 * (0.25 / trials) ** 0.5)
    for name, acc in sorted(accs.items()):
        wins = round(acc * trials)
        passed = abs(acc - 0.5) <= band
        rows.append((f"dcg_{name}", trials, wins, round(band, 6), passed))
    acc = unlink_trial(trials, seed=seed)
    sigma = (0.25 / trials) ** 0.5
    rows.append(("unlink_distinguisher", trials, round(acc * trials),
                 round(0.5 + 3 * sigma, 6), acc <= 0.5 + 3 * sigma))
    return rows


def render_suite_csv(rows) -> str:
    lines = ["suite,trials,wins,threshold,passed"]
    for suite, trials, wins, threshold, passed in rows:
        lines.append(f"{suite},{trials},{wins},{threshold},{passed}")
    return "\r\n".join(lines) + "\r\n"
