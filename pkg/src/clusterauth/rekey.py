"""Cluster session-key update: dealer polynomial plus masked exchange.

The head deals shares of a random degree-(N-1) polynomial whose constant
term is the next session key, masking each member's share under its
member secret. Members re-share pairwise under Diffie-Hellman masks built
from the published per-member commitments, then reconstruct the constant
term by interpolation at zero and check it against the dealer's confirm
digest. Abscissas are pid hashes; a salt is bumped until they are all
distinct and nonzero, and each init carries the recipient's own abscissa
so interpolation never needs the salt.
"""
from __future__ import annotations

from .errors import (
    AbscissaCollision,
    ConfirmMismatch,
    EmptyCluster,
    MalformedShare,
    MissingEnvelope,
    OutOfRange,
)
from .groups import (
    decode_scalar32,
    encode_scalar32,
    hash_to_block,
    hash_to_scalar,
    lagrange_at_zero,
    mask_elem,
    poly_eval,
    xor32,
)
from .join import DEFAULT_WINDOW_MS, check_fresh
from .messages import KeyUpdateInit, ShareEnvelope
from .registry import ChCredential, CmCredential

_SALT_LIMIT = 4096


def _ts8(t_ms: int) -> bytes:
    return t_ms.to_bytes(8, "big")


def member_abscissas(group, pids, salt_limit: int = _SALT_LIMIT) -> dict:
    """Distinct nonzero abscissa per pid, bumping a salt on collision.

    The field admits at most q-1 shareholders; beyond that no salt helps.
    """
    if len(pids) >= group.q:
        raise AbscissaCollision(
            f"{len(pids)} members exceed the {group.q - 1} nonzero "
            f"abscissas available mod q")
    for salt in range(salt_limit):
        xs = {
            pid: hash_to_scalar(group.q, "rekey-x",
                                [salt.to_bytes(4, "big"), pid])
            for pid in pids
        }
        if 0 not in xs.values() and len(set(xs.values())) == len(pids):
            return xs
    raise AbscissaCollision("could not find distinct nonzero abscissas")


def ch_init_update(ch: ChCredential, members, t4: int, rng):
    """Deal a fresh key. Returns (key block, {pid: KeyUpdateInit})."""
    group = ch.group
    pids = sorted(members)
    if not pids:
        raise EmptyCluster("no members to rekey")
    unknown = [p for p in pids if p not in ch.member_secrets]
    if unknown:
        raise MissingEnvelope("rekey roster contains non-members")
    xs = member_abscissas(group, pids)

    key_new = group.rand_scalar(rng)
    coeffs = [key_new] + [group.rand_scalar(rng, nonzero=False)
                          for _ in range(len(pids) - 1)]
    shares = {pid: poly_eval(coeffs, xs[pid], group.q) for pid in pids}
    commitments = {pid: group.exp(group.g, shares[pid]) for pid in pids}
    confirm = hash_to_block("rekey-confirm",
                            [encode_scalar32(key_new), _ts8(t4)])

    inits = {}
    for pid in pids:
        sk_mask = hash_to_block(
            "sk-mask",
            [encode_scalar32(ch.member_secrets[pid].sk), _ts8(t4)],
        )
        others = tuple(
            sorted((xs[other], commitments[other])
                   for other in pids if other != pid)
        )
        inits[pid] = KeyUpdateInit(
            t4=t4,
            own_x=xs[pid],
            f_masked=xor32(encode_scalar32(shares[pid]), sk_mask),
            peer_commitments=others,
            confirm=confirm,
        )
    return encode_scalar32(key_new), inits


def cm_recover_and_share(cm: CmCredential, init: KeyUpdateInit, now: int,
                         window: int = DEFAULT_WINDOW_MS):
    """Unmask the own share and seal it for every other member.

    Returns (share, ShareEnvelope).
    """
    group = cm.group
    check_fresh(init.t4, now, window)
    sk_mask = hash_to_block("sk-mask",
                            [encode_scalar32(cm.sk), _ts8(init.t4)])
    try:
        share = decode_scalar32(group.q, xor32(init.f_masked, sk_mask))
    except OutOfRange as exc:
        raise MalformedShare("unmasked share is not a valid scalar") from exc
    entries = []
    for x_n, commit_n in init.peer_commitments:
        seal = mask_elem(group, group.exp(commit_n, share))
        entries.append((x_n, xor32(seal, encode_scalar32(share))))
    return share, ShareEnvelope(sender_x=init.own_x, entries=tuple(entries))


def cm_reconstruct(cm: CmCredential, own_share: int, envelopes,
                   init: KeyUpdateInit, n_cm: int) -> bytes:
    """Open the peers' envelopes, interpolate at zero, check the confirm."""
    group = cm.group
    commit_by_x = dict(init.peer_commitments)
    senders = [env.sender_x for env in envelopes]
    if (len(envelopes) != n_cm - 1 or len(set(senders)) != len(senders)
            or set(senders) != set(commit_by_x)):
        raise MissingEnvelope("need one envelope from every other member")

    points = [(init.own_x, own_share)]
    for env in envelopes:
        sealed = dict(env.entries).get(init.own_x)
        if sealed is None:
            raise MissingEnvelope("envelope carries no entry for us")
        seal = mask_elem(group, group.exp(commit_by_x[env.sender_x],
                                          own_share))
        try:
            share = decode_scalar32(group.q, xor32(sealed, seal))
        except OutOfRange as exc:
            raise ConfirmMismatch("opened share is not a valid scalar") \
                from exc
        points.append((env.sender_x, share))

    key = lagrange_at_zero(points, group.q)
    check = hash_to_block("rekey-confirm",
                          [encode_scalar32(key), _ts8(init.t4)])
    if check != init.confirm:
        raise ConfirmMismatch("reconstructed key fails the confirm digest")
    return encode_scalar32(key)
