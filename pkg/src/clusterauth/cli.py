"""Command-line front end.

Subcommands: demo (end-to-end protocol transcript), sweep (simulator
parameter sweeps to CSV), overhead (published-vs-measured cost report),
attack (adversary suites), keyupdate (rekey demo). Outputs are written
atomically and identical invocations with the same seed produce
byte-identical files.

Sweep CSV columns, in order: scenario-id, n_nuav, n_cm, n_ch, bitrate,
mam, latency_ms, e_nuav_j, e_cm_j, e_ch_j, e_otherch_j, bytes_join,
bytes_keyupdate.
Overhead delta CSV columns: stage, term, paper_value, measured_value,
delta.
Attack CSV columns: suite, trials, wins, threshold, passed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import fields as dc_fields
from dataclasses import replace

from . import attacks, costs
from .errors import ProtocolAbort, ProtocolError, ConfigInvalid
from .pipeline import (
    build_swarm,
    measure_stage_ops,
    run_join,
    run_rekey,
    run_transfer,
)
from .sim import (
    Metrics,
    PowerModel,
    ScenarioConfig,
    derive_seed,
    run_scenario,
)

SWEEP_COLUMNS = ("scenario-id", "n_nuav", "n_cm", "n_ch", "bitrate", "mam",
                 "latency_ms", "e_nuav_j", "e_cm_j", "e_ch_j", "e_otherch_j",
                 "bytes_join", "bytes_keyupdate")


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-cluster")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(path: str | None, args) -> ScenarioConfig:
    """Config file first, then flag overrides, then scenario defaults."""
    values = {}
    if path:
        with open(path) as fh:
            raw = json.load(fh)
        allowed = {f.name for f in dc_fields(ScenarioConfig)}
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigInvalid(f"unknown config keys {sorted(unknown)}")
        if "power" in raw:
            raw["power"] = PowerModel(**raw["power"])
        if "mobility" in raw:
            from .sim import MobilityConfig

            raw["mobility"] = MobilityConfig(**raw["mobility"])
        values.update(raw)
    for flag, key in (("n_nuav", "n_nuav"), ("n_cm", "n_cm"),
                      ("n_ch", "n_ch"), ("bitrate", "bitrate"),
                      ("seed", "rng_seed"), ("group", "group"),
                      ("paper_literal", "paper_literal")):
        val = getattr(args, flag, None)
        if val is not None and val is not False:
            values[key] = val
    if getattr(args, "proc_delays", None):
        with open(args.proc_delays) as fh:
            values["proc_delay_us"] = {k: float(v)
                                       for k, v in json.load(fh).items()}
    if getattr(args, "mam", None) in ("on", "off"):
        values["mam"] = args.mam == "on"
    cfg = ScenarioConfig(**values)
    cfg.validate()
    return cfg


def _fmt_metrics_row(scenario_id: str, cfg: ScenarioConfig,
                     m: Metrics) -> str:
    return ",".join([
        scenario_id,
        str(cfg.n_nuav), str(cfg.n_cm), str(cfg.n_ch),
        f"{cfg.bitrate:.0f}",
        "on" if cfg.mam else "off",
        f"{m.join_latency_ms:.6f}",
        f"{m.e_nuav_j:.9f}", f"{m.e_cm_j:.9f}", f"{m.e_ch_j:.9f}",
        f"{m.e_otherch_j:.9f}",
        str(m.bytes_join), str(m.bytes_keyupdate),
    ])


def cmd_sweep(args) -> int:
    base = load_config(args.config, args)
    values = []
    for chunk in args.values.split(","):
        chunk = chunk.strip()
        values.append(float(chunk) if args.param == "bitrate"
                      else int(chunk))
    modes = {"on": [True], "off": [False],
             "both": [True, False]}[args.mam or "both"]
    lines = [",".join(SWEEP_COLUMNS)]
    idx = 0
    for value in values:
        for mam in modes:
            cfg = replace(base, **{args.param: value}, mam=mam,
                          rng_seed=derive_seed(base.rng_seed, args.param,
                                               value, mam))
            metrics = run_scenario(cfg)
            lines.append(_fmt_metrics_row(f"s{idx:03d}", cfg, metrics))
            idx += 1
    text = "\r\n".join(lines) + "\r\n"
    if args.out:
        write_atomic(args.out, text)
        print(f"wrote {idx} scenarios to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_overhead(args) -> int:
    base = load_config(args.config, args)
    group = base.group_params()
    n_nuav, n_cm, n_ch = base.n_nuav, base.n_cm, base.n_ch
    sizes = (costs.DEFAULT_ZP_BITS, costs.DEFAULT_T_BITS)

    print(f"parameters: n_nuav={n_nuav} n_cm={n_cm} n_ch={n_ch} "
          f"group={base.group}")
    print("published stage polynomials (bits):")
    measured_bits = {}
    for stage in costs.STAGES:
        paper_bits = costs.predict_comm(stage, n_nuav=n_nuav, n_cm=n_cm,
                                        n_ch=n_ch, sizes=sizes).total_bits
        if stage == "init":
            mine = 0
        elif stage == "uav_auth":
            mine = 8 * (costs.derived_comm_join(group, n_nuav, n_cm, n_ch,
                                                mam=True)
                        + costs.derived_comm_transfer(group))
        else:
            mine = 8 * costs.derived_comm_keyupdate(group, n_cm)
        measured_bits[stage] = mine
        print(f"  {stage:10s} paper={paper_bits:8d}  measured={mine:8d}")

    batched, baseline = costs.predict_p2(n_nuav, n_cm, sizes=sizes)
    note = " (no joins: degenerate point)" if n_nuav == 0 else ""
    print(f"batching claim: batched={batched} bits vs "
          f"sequential-baseline={baseline} bits{note}")
    p1 = costs.predict_transfer_comp()
    print(f"handoff cost: {p1.t_hf} hashes + {p1.t_xor} xors, "
          f"{costs.predict_transfer_comm(sizes).total_bits} bits")

    measured_ops = measure_stage_ops(group, n_nuav, n_cm, n_ch,
                                     seed=base.rng_seed)
    rows = costs.comp_delta_report(measured_ops, n_nuav=n_nuav, n_cm=n_cm)
    rows += costs.comm_delta_report(group, n_nuav, n_cm, n_ch,
                                    measured_bits, sizes=sizes)
    text = costs.render_delta_csv(rows)
    if args.out:
        write_atomic(args.out, text)
        print(f"delta report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_demo(args) -> int:
    base = load_config(args.config, args)
    group = base.group_params()
    n_nuav = base.n_nuav
    n_cm, n_ch = base.n_cm, base.n_ch
    print(f"swarm: group={base.group} n_nuav={n_nuav} n_cm={n_cm} "
          f"n_ch={n_ch} seed={base.rng_seed}")
    swarm = build_swarm(group, n_nuav, n_cm, n_ch, seed=base.rng_seed)
    trace = run_join(swarm, seed=base.rng_seed,
                     paper_literal=base.paper_literal)
    for label, msg in trace.hops:
        print(f"  {label:24s} {type(msg).__name__}")
    print(f"join accepted: {trace.accepted} "
          f"({len(trace.confirms_ok)} newcomers)")

    transferred = None
    if swarm.cms and len(swarm.peers) >= 1:
        transferred = swarm.cms[0]
        new_pid = run_transfer(swarm, swarm.peers[0], transferred.pid)
        print(f"cross-cluster handoff: fresh pid {new_pid.hex()[:16]}...")

    # rekey the post-change roster: joiners in, the transferred member out
    from .registry import CmCredential

    members = [cm for cm in swarm.cms if cm is not transferred]
    members += [
        CmCredential(pid=n.pid, sk=n.sk, pk=n.pk, key=swarm.ch.key, r=n.r,
                     gbs_index=n.gbs_index, cluster_id=n.cluster_id,
                     group=group)
        for n in swarm.nuavs
    ]
    if members:
        key_new, keys = run_rekey(swarm, members, seed=base.rng_seed)
        agree = all(k == key_new for k in keys.values())
        print(f"key update over {len(members)} members "
              f"(joiners in, transferred member out): agreement={agree}")
        if not agree:
            raise ProtocolAbort("rekey disagreement in demo")
    return 0


def cmd_attack(args) -> int:
    base = load_config(args.config, args)
    group = base.group_params()
    rows = attacks.run_suites(group, trials=args.trials,
                              seed=base.rng_seed)
    text = attacks.render_suite_csv(rows)
    if args.out:
        write_atomic(args.out, text)
    all_pass = all(r[4] for r in rows)
    for suite, trials, wins, threshold, passed in rows:
        print(f"  {suite:24s} trials={trials} wins={wins} "
              f"threshold={threshold} {'pass' if passed else 'FAIL'}")
    return 0 if all_pass else 1


def cmd_keyupdate(args) -> int:
    base = load_config(args.config, args)
    group = base.group_params()
    swarm = build_swarm(group, 0, base.n_cm, 1, seed=base.rng_seed)
    from .counters import counting

    with counting() as ops:
        key_new, keys = run_rekey(swarm, swarm.cms, seed=base.rng_seed)
    agree = all(k == key_new for k in keys.values())
    bits = 8 * costs.derived_comm_keyupdate(group, base.n_cm)
    print(f"key update over {base.n_cm} members: agreement={agree}")
    print(f"operation counts: {ops.as_dict()}")
    print(f"on-air bits: {bits} (published polynomial: "
          f"{costs.predict_comm('key_update', n_cm=base.n_cm).total_bits})")
    if not agree:
        raise ProtocolAbort("members reconstructed different keys")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clusterauth",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_mam=True):
        p.add_argument("--n-nuav", dest="n_nuav", type=int, default=None)
        p.add_argument("--n-cm", dest="n_cm", type=int, default=None)
        p.add_argument("--n-ch", dest="n_ch", type=int, default=None)
        p.add_argument("--bitrate", type=float, default=None,
                       help="channel bitrate in bits/s")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--group", choices=("tiny", "full"), default=None)
        p.add_argument("--tiny", dest="group", action="store_const",
                       const="tiny", help="shorthand for --group tiny")
        p.add_argument("--paper-literal", dest="paper_literal",
                       action="store_true", default=False,
                       help="reflective neighbor acks instead of "
                            "pid-bound ones")
        p.add_argument("--config", default=None,
                       help="JSON file with scenario fields; flags override")
        p.add_argument("--proc-delays", dest="proc_delays", default=None,
                       help="JSON file mapping op name to microseconds")
        p.add_argument("--out", default=None, help="output file path")
        if with_mam:
            p.add_argument("--mam", choices=("on", "off", "both"),
                           default=None)

    p = sub.add_parser("demo", help="end-to-end protocol run")
    common(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("sweep", help="simulator parameter sweep to CSV")
    common(p)
    p.add_argument("--param", required=True,
                   choices=("n_nuav", "n_cm", "n_ch", "bitrate"))
    p.add_argument("--values", required=True,
                   help="comma-separated sweep values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("overhead",
                       help="published cost polynomials vs measured")
    common(p)
    p.set_defaults(func=cmd_overhead)

    p = sub.add_parser("attack", help="forgery/confidentiality suites")
    common(p, with_mam=False)
    p.add_argument("--trials", type=int, default=10_000)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("keyupdate", help="session key update demo")
    common(p, with_mam=False)
    p.set_defaults(func=cmd_keyupdate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigInvalid, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ProtocolAbort as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return 1
    except ProtocolError as exc:
        print(f"protocol failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
