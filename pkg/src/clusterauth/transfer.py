"""Cross-cluster transfer: token-based single-sign-on handoff.

The source head vouches for a departing member with a token-keyed hash;
the destination head checks it, consults the shared pid database, and
issues a fresh pseudonym equal to the check digest. Cost per transfer is
exactly three hashes and two XORs across both parties (the destination
evaluates the digest once for the check and once at the assignment site).
"""
from __future__ import annotations

from .errors import TokenMismatch, UnknownMember, UnknownPid
from .groups import hash_to_block, xor32
from .join import DEFAULT_WINDOW_MS, check_fresh
from .messages import TransferRequest
from .registry import ChCredential, GbsState, db_lookup, supersede_pid


def _ts8(t_ms: int) -> bytes:
    return t_ms.to_bytes(8, "big")


def source_ch_build_transfer(ch: ChCredential, euav_pid: bytes,
                             t3: int) -> TransferRequest:
    if euav_pid not in ch.member_secrets:
        raise UnknownMember("pid is not a member of the source cluster")
    c = xor32(hash_to_block("transfer", [euav_pid, _ts8(t3), ch.ct]), ch.ct)
    return TransferRequest(c=c, euav_pid=euav_pid, t3=t3)


def dest_ch_verify_transfer(ch: ChCredential, gbs: GbsState,
                            req: TransferRequest, now: int,
                            window: int = DEFAULT_WINDOW_MS) -> bytes:
    """Returns the fresh pseudonym; the database is updated in place."""
    check_fresh(req.t3, now, window)
    expected = hash_to_block("transfer", [req.euav_pid, _ts8(req.t3), ch.ct])
    if xor32(req.c, ch.ct) != expected:
        raise TokenMismatch("transfer token check failed")
    if not db_lookup(gbs, req.euav_pid):
        raise UnknownPid("pid not present in the database")
    new_pid = hash_to_block("transfer", [req.euav_pid, _ts8(req.t3), ch.ct])
    supersede_pid(gbs, req.euav_pid, new_pid, ch.cluster_id)
    return new_pid
