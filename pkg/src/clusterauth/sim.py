"""Deterministic discrete-event swarm simulator.

One shared half-duplex medium carries every frame in FIFO order with zero
loss; per-frame channel time is payload bits over the bitrate plus a fixed
framing overhead standing in for MAC/PHY costs. Every cryptographic
primitive a node executes is counted live and charged a configurable
per-operation delay, so latency reflects computation and transmission.
Radios decode every frame on the air (receive power while any other node
transmits, transmit power for own frames, idle otherwise) and energy is
integrated over a fixed scenario horizon.

Time is integer nanoseconds end to end: a scenario is a pure function of
its config, including the seed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from . import join as jn
from . import rekey as rk
from .counters import OpCounts, counting
from .costs import derived_comm_join, derived_comm_keyupdate
from .errors import ConfigInvalid, ProtocolAbort, ProtocolError
from .groups import GroupParams, full_group, hash_to_block, tiny_group
from .messages import PidSet, StoreAck, decode, encode
from .pipeline import Swarm, build_swarm
from .registry import CmCredential, admit_nuavs

MS = 1_000_000  # ns per simulated-clock millisecond


@dataclass(frozen=True)
class PowerModel:
    """State powers in mW, following the usual radio energy consumers."""

    sleep: float = 0.0
    rx_idle: float = 2.0
    rx_busy: float = 5.0
    rx_receiving: float = 100.0
    tx_idle: float = 2.0
    tx_transmitting: float = 300.0


DEFAULT_PROC_DELAY_US = {
    "t_hf": 5.0,
    "t_me": 200.0,
    "t_mm": 2.0,
    "t_xor": 0.1,
    "t_sss": 2.0,
}


@dataclass(frozen=True)
class MobilityConfig:
    """Linear node movement inside a square constraint area.

    Positions feed nothing under the zero-loss shared channel; the
    tracker exists for future loss models and is off by default.
    """

    enabled: bool = False
    speed_mps: float = 100.0
    area_m: float = 2100.0


class PositionTracker:
    """Straight-line movement with boundary reflection, per node."""

    def __init__(self, nodes, mobility: MobilityConfig, seed: int):
        rng = random.Random(seed ^ 0x6D6F76)
        self.mobility = mobility
        self.start = {}
        self.velocity = {}
        for node in nodes:
            self.start[node] = (rng.uniform(0, mobility.area_m),
                                rng.uniform(0, mobility.area_m))
            heading = rng.uniform(0, 6.283185307179586)
            from math import cos, sin

            self.velocity[node] = (mobility.speed_mps * cos(heading),
                                   mobility.speed_mps * sin(heading))

    def position(self, node: str, t_ns: int):
        """Coordinates in meters at simulated time t."""
        def reflect(x: float, span: float) -> float:
            period = 2 * span
            x %= period
            return x if x <= span else period - x

        x0, y0 = self.start[node]
        vx, vy = self.velocity[node]
        t = t_ns * 1e-9
        span = self.mobility.area_m
        return reflect(x0 + vx * t, span), reflect(y0 + vy * t, span)


@dataclass(frozen=True)
class ScenarioConfig:
    n_nuav: int = 5
    n_cm: int = 5
    n_ch: int = 5
    bitrate: float = 48e6
    mam: bool = True
    power: PowerModel = field(default_factory=PowerModel)
    initial_energy: float = 0.01
    proc_delay_us: dict = field(default_factory=lambda: dict(
        DEFAULT_PROC_DELAY_US))
    freshness_window_ms: int = 100
    rng_seed: int = 1
    group: str = "full"
    frame_overhead_us: float = 100.0
    duration_s: float = 1.0
    paper_literal: bool = False
    mobility: MobilityConfig = field(default_factory=MobilityConfig)

    def validate(self):
        if min(self.n_nuav, self.n_cm, self.n_ch) < 0:
            raise ConfigInvalid("counts must be nonnegative")
        if self.bitrate <= 0:
            raise ConfigInvalid("bitrate must be positive")
        if self.frame_overhead_us < 0 or self.duration_s <= 0:
            raise ConfigInvalid("bad channel timing")
        if self.initial_energy <= 0:
            raise ConfigInvalid("initial energy must be positive")
        for name in ("sleep", "rx_idle", "rx_busy", "rx_receiving",
                     "tx_idle", "tx_transmitting"):
            if getattr(self.power, name) < 0:
                raise ConfigInvalid(f"negative power {name}")
        unknown = set(self.proc_delay_us) - set(DEFAULT_PROC_DELAY_US)
        if unknown:
            raise ConfigInvalid(f"unknown delay keys {sorted(unknown)}")
        if self.group not in ("tiny", "full"):
            raise ConfigInvalid("group preset must be tiny or full")
        if self.mobility.enabled and (self.mobility.speed_mps < 0
                                      or self.mobility.area_m <= 0):
            raise ConfigInvalid("bad mobility parameters")

    def group_params(self) -> GroupParams:
        return tiny_group() if self.group == "tiny" else full_group()


@dataclass
class Metrics:
    join_latency_ms: float
    e_nuav_j: float
    e_cm_j: float
    e_ch_j: float
    e_otherch_j: float
    bytes_join: int
    bytes_keyupdate: int
    frames_join: int = 0
    frames_keyupdate: int = 0
    depleted: tuple = ()
    node_energy_j: dict = field(default_factory=dict)
    node_position_m: dict = field(default_factory=dict)


def tx_time(nbytes: int, bitrate: float,
            frame_overhead_s: float = 0.0) -> float:
    """Serialization delay in seconds for one frame."""
    if bitrate <= 0:
        raise ConfigInvalid("bitrate must be positive")
    return nbytes * 8 / bitrate + frame_overhead_s


def energy_account(timeline, power: PowerModel) -> float:
    """Joules over a contiguous (state, duration_s) timeline."""
    joules = 0.0
    for state, dur_s in timeline:
        joules += getattr(power, state) * 1e-3 * dur_s
    return joules


class _Sim:
    """Single-scenario engine; see run_scenario."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.group = cfg.group_params()
        self.rng = random.Random(cfg.rng_seed)
        self.swarm: Swarm = build_swarm(
            self.group, cfg.n_nuav, cfg.n_cm, cfg.n_ch, seed=cfg.rng_seed)
        self.nodes = (["gbs", "ch"]
                      + [f"cm{i}" for i in range(cfg.n_cm)]
                      + [f"peer{i}" for i in range(max(cfg.n_ch - 1, 0))]
                      + [f"nuav{i}" for i in range(cfg.n_nuav)])
        self.channel_free = 0
        self.node_free = {n: 0 for n in self.nodes}
        self.tx_ns = {n: 0 for n in self.nodes}
        self.rx_ns = {n: 0 for n in self.nodes}
        self.bytes_phase = {"join": 0, "keyupdate": 0}
        self.frames_phase = {"join": 0, "keyupdate": 0}
        self.last_event = 0
        self.delay_ns = {
            k: int(round(v * 1000.0))
            for k, v in {**DEFAULT_PROC_DELAY_US,
                         **cfg.proc_delay_us}.items()
        }
        # A replay bound below the channel's own worst-case serialization
        # would reject honest traffic, so the effective window is
        # provisioned for the configured bitrate.
        join_b, rekey_b = expected_bytes(cfg)
        serial_ms = (join_b + rekey_b) * 8 * 1000 / cfg.bitrate
        self.window = max(cfg.freshness_window_ms, int(2 * serial_ms) + 200)
        self.tracker = (PositionTracker(self.nodes, cfg.mobility,
                                        cfg.rng_seed)
                        if cfg.mobility.enabled else None)

    # timing ----------------------------------------------------------
    def frame_ns(self, nbytes: int) -> int:
        payload = int(round(nbytes * 8 * 1e9 / self.cfg.bitrate))
        return payload + int(round(self.cfg.frame_overhead_us * 1000.0))

    def compute_ns(self, counts: OpCounts) -> int:
        return sum(self.delay_ns[k] * v for k, v in counts.as_dict().items())

    def now_ms(self, t_ns: int) -> int:
        return t_ns // MS

    def busy(self, node: str, start_ns: int, counts: OpCounts) -> int:
        """Serialize computation on the node; returns completion time."""
        begin = max(start_ns, self.node_free[node])
        done = begin + self.compute_ns(counts)
        self.node_free[node] = done
        self.last_event = max(self.last_event, done)
        return done

    def transmit(self, src: str, msg, ready_ns: int, phase: str):
        """Queue one frame on the shared medium; returns (start, end, raw).

        Everyone else's radio decodes the frame, so its air time counts
        as receive time for every node except the transmitter.
        """
        raw = encode(self.group, msg)
        start = max(ready_ns, self.channel_free)
        dur = self.frame_ns(len(raw))
        end = start + dur
        self.channel_free = end
        self.tx_ns[src] += dur
        for node in self.nodes:
            if node != src:
                self.rx_ns[node] += dur
        self.bytes_phase[phase] += len(raw)
        self.frames_phase[phase] += 1
        self.last_event = max(self.last_event, end)
        return start, end, raw

    # protocol drivers -------------------------------------------------
    def run(self) -> Metrics:
        try:
            latency_ns = self._join_and_rekey()
        except ProtocolError as exc:
            if isinstance(exc, (ProtocolAbort, ConfigInvalid)):
                raise
            raise ProtocolAbort(f"verification failed in scenario: {exc}") \
                from exc
        return self._metrics(latency_ns)

    def _join_and_rekey(self) -> int:
        """Join phase inside the observation window, then the key update.

        Reported energies cover the join experiment window (the rekey
        phase starts after it and is accounted separately), mirroring how
        the latency/energy trends are defined for the join mechanism.
        """
        cfg = self.cfg
        if cfg.n_nuav == 0:
            self.join_tx = dict(self.tx_ns)
            self.join_rx = dict(self.rx_ns)
            self.join_end = 0
            return 0
        if cfg.mam:
            latency = self._join_batched()
        else:
            latency = self._join_sequential()
        self.join_tx = dict(self.tx_ns)
        self.join_rx = dict(self.rx_ns)
        self.join_end = self.last_event
        horizon = int(self.cfg.duration_s * 1e9)
        rekey_t0 = max(horizon, self.last_event)
        self.channel_free = max(self.channel_free, rekey_t0)
        self._rekey_phase(rekey_t0)
        return latency

    def _member_creds(self):
        sw = self.swarm
        joiners = [
            CmCredential(pid=n.pid, sk=n.sk, pk=n.pk, key=sw.ch.key, r=n.r,
                         gbs_index=n.gbs_index, cluster_id=n.cluster_id,
                         group=self.group)
            for n in sw.nuavs
        ]
        return sw.cms + joiners

    def _deliver_requests(self, nuavs, names, t_ns: int):
        """Newcomers build and send their requests; returns arrivals."""
        sendable = []
        for name, nuav in zip(names, nuavs):
            with counting() as c:
                req = jn.nuav_build_request(nuav, self.swarm.pp, self.rng)
            sendable.append((self.busy(name, t_ns, c), name, req))
        arrivals = []
        first_start = None
        for ready, name, req in sendable:
            start, end, raw = self.transmit(name, req, ready, "join")
            if first_start is None:
                first_start = start
            arrivals.append((end, raw))
        return first_start, arrivals

    def _challenge_round(self, reqs_raw, arrive_ns: int, window: int):
        """Head aggregates and challenges; members answer. Returns
        (round, {pid: response}, last response arrival)."""
        sw = self.swarm
        t1 = self.now_ms(arrive_ns) + 1
        with counting() as c:
            reqs = [decode(self.group, raw) for _, raw in reqs_raw]
            rnd = jn.ch_aggregate(sw.ch, reqs, t1, self.rng,
                                  member_pids=[cm.pid for cm in sw.cms])
        ch_done = self.busy("ch", arrive_ns, c)

        member_order = sorted(rnd.challenges)
        cm_by_pid = {cm.pid: cm for cm in sw.cms}
        resp_arrivals = {}
        ready = ch_done
        for pid in member_order:
            start, end, raw = self.transmit("ch", rnd.challenges[pid],
                                            ready, "join")
            name = f"cm{sw.cms.index(cm_by_pid[pid])}"
            with counting() as c:
                chal = decode(self.group, raw)
                resp = jn.cm_verify_and_respond(
                    cm_by_pid[pid], sw.ch.pid, len(sw.cms), chal,
                    now=self.now_ms(end), window=window)
            done = self.busy(name, end, c)
            s2, e2, raw2 = self.transmit(name, resp, done, "join")
            resp_arrivals[pid] = (e2, raw2)
        last = max((e for e, _ in resp_arrivals.values()), default=ch_done)
        return rnd, reqs, resp_arrivals, last

    def _peer_round(self, items, arrive_ns: int, window: int, rnd):
        """Send proofs to the neighbor heads, collect and verify acks.

        items: list of PeerBroadcast frames to send to every neighbor.
        Returns completion time after every ack is verified.
        """
        sw = self.swarm
        if not sw.peers:
            return arrive_ns
        aggregated = self.cfg.mam
        acks = []
        ready = arrive_ns
        for bc in items:
            for i, peer in enumerate(sw.peers):
                start, end, raw = self.transmit("ch", bc, ready, "join")
                with counting() as c:
                    bc_rx = decode(self.group, raw)
                    ack = jn.peer_ch_verify(
                        peer, bc_rx, n_cm=len(sw.cms),
                        now=self.now_ms(end), window=window,
                        paper_literal=self.cfg.paper_literal,
                        aggregated=aggregated)
                done = self.busy(f"peer{i}", end, c)
                s2, e2, raw2 = self.transmit(f"peer{i}", ack, done, "join")
                acks.append((e2, raw2))
        done = arrive_ns
        for end, raw in acks:
            with counting() as c:
                ack = decode(self.group, raw)
                jn.ch_verify_ack(sw.ch, rnd, ack, now=self.now_ms(end),
                                 window=window,
                                 paper_literal=self.cfg.paper_literal)
            done = self.busy("ch", end, c)
        return done

    def _store_round(self, reqs, ready_ns: int):
        """Upload the admitted pids; wait for the storage confirmation."""
        sw = self.swarm
        pids = tuple(req.nuav_pid for req in reqs)
        start, end, raw = self.transmit("ch", PidSet(pids), ready_ns, "join")
        with counting() as c:
            rx = decode(self.group, raw)
            admit_nuavs(sw.gbs, sw.ch.cluster_id, rx.pids)
            ack = StoreAck(digest=hash_to_block("store-ack", list(rx.pids)))
        done = self.busy("gbs", end, c)
        s2, e2, raw2 = self.transmit("gbs", ack, done, "join")
        with counting() as c:
            ack_rx = decode(self.group, raw2)
            expected = hash_to_block("store-ack", list(pids))
            if ack_rx.digest != expected:
                raise ProtocolAbort("storage confirmation mismatch")
        return self.busy("ch", e2, c)

    def _confirm_round(self, reqs, ready_ns: int) -> int:
        sw = self.swarm
        with counting() as c:
            confirms = jn.build_confirms(sw.ch, reqs)
        ready = self.busy("ch", ready_ns, c)
        nuav_by_pid = {n.pid: (i, n) for i, n in enumerate(sw.nuavs)}
        finish = ready
        for req, conf in zip(reqs, confirms):
            start, end, raw = self.transmit("ch", conf, ready, "join")
            idx, cred = nuav_by_pid[req.nuav_pid]
            with counting() as c:
                conf_rx = decode(self.group, raw)
                if not jn.nuav_verify_ch(cred, conf_rx):
                    raise ProtocolAbort("newcomer rejected the head proof")
            finish = max(finish, self.busy(f"nuav{idx}", end, c))
        return finish

    def _join_batched(self) -> int:
        sw = self.swarm
        window = self.window
        names = [f"nuav{i}" for i in range(len(sw.nuavs))]
        t0, arrivals = self._deliver_requests(sw.nuavs, names, 0)
        last_arrival = max(e for e, _ in arrivals)
        rnd, reqs, responses_raw, last_resp = self._challenge_round(
            arrivals, last_arrival, window)
        with counting() as c:
            responses = {pid: decode(self.group, raw)
                         for pid, (end, raw) in responses_raw.items()}
            t2 = self.now_ms(last_resp) + 1
            bc = jn.ch_collect_and_verify(sw.ch, rnd, responses, t2,
                                          now=t2, window=window)
        collect_done = self.busy("ch", last_resp, c)
        acks_done = self._peer_round([bc], collect_done, window, rnd)
        stored = self._store_round(reqs, acks_done)
        finish = self._confirm_round(reqs, stored)
        return finish - t0

    def _join_sequential(self) -> int:
        """No batching: the full ladder per newcomer, proofs forwarded
        per member response."""
        sw = self.swarm
        window = self.window
        t0 = None
        clock = 0
        for i, nuav in enumerate(sw.nuavs):
            name = f"nuav{i}"
            first, arrivals = self._deliver_requests([nuav], [name], clock)
            if t0 is None:
                t0 = first
            last_arrival = max(e for e, _ in arrivals)
            rnd, reqs, responses_raw, last_resp = self._challenge_round(
                arrivals, last_arrival, window)
            with counting() as c:
                responses = {pid: decode(self.group, raw)
                             for pid, (end, raw) in responses_raw.items()}
                t2 = self.now_ms(last_resp) + 1
                items = jn.ch_forward_items(sw.ch, rnd, responses, t2,
                                            now=t2, window=window)
            fw_done = self.busy("ch", last_resp, c)
            acks_done = self._peer_round(items, fw_done, window, rnd)
            stored = self._store_round(reqs, acks_done)
            clock = self._confirm_round(reqs, stored)
        return clock - t0

    def _rekey_phase(self, start_ns: int):
        sw = self.swarm
        window = self.window
        members = self._member_creds()
        if not members:
            return
        t4 = self.now_ms(start_ns) + 1
        with counting() as c:
            key_new, inits = rk.ch_init_update(
                sw.ch, [m.pid for m in members], t4, self.rng)
        ready = self.busy("ch", start_ns, c)

        name_of = {m.pid: ("cm%d" % i if i < len(sw.cms)
                           else "nuav%d" % (i - len(sw.cms)))
                   for i, m in enumerate(members)}
        by_pid = {m.pid: m for m in members}
        init_arrivals = {}
        for pid in sorted(inits):
            start, end, raw = self.transmit("ch", inits[pid], ready,
                                            "keyupdate")
            init_arrivals[pid] = (end, raw)

        shares = {}
        env_arrivals = []
        for pid in sorted(inits):
            end, raw = init_arrivals[pid]
            with counting() as c:
                init_rx = decode(self.group, raw)
                share, env = rk.cm_recover_and_share(
                    by_pid[pid], init_rx, now=self.now_ms(end),
                    window=window)
            done = self.busy(name_of[pid], end, c)
            s2, e2, raw2 = self.transmit(name_of[pid], env, done,
                                         "keyupdate")
            shares[pid] = (share, init_rx)
            env_arrivals.append((pid, e2, raw2))

        last_env = max((e for _, e, _ in env_arrivals), default=ready)
        for pid in sorted(inits):
            own_share, init_rx = shares[pid]
            with counting() as c:
                envs = [decode(self.group, raw)
                        for other, _, raw in env_arrivals if other != pid]
                got = rk.cm_reconstruct(by_pid[pid], own_share, envs,
                                        init_rx, n_cm=len(members))
            self.busy(name_of[pid], last_env, c)
            if got != key_new:
                raise ProtocolAbort("rekey produced divergent keys")

    # accounting -------------------------------------------------------
    def _node_energy(self, tx, rx, horizon) -> dict:
        power = self.cfg.power
        energy = {}
        for node in self.nodes:
            idle = horizon - tx[node] - rx[node]
            energy[node] = (power.tx_transmitting * tx[node]
                            + power.rx_receiving * rx[node]
                            + power.rx_idle * idle) * 1e-12
        return energy

    def _metrics(self, latency_ns: int) -> Metrics:
        cfg = self.cfg
        join_window = max(int(cfg.duration_s * 1e9), self.join_end)
        join_energy = self._node_energy(self.join_tx, self.join_rx,
                                        join_window)
        total = self._node_energy(self.tx_ns, self.rx_ns,
                                  max(join_window, self.last_event))
        depleted = tuple(n for n in self.nodes
                         if total[n] > cfg.initial_energy)

        def mean(prefix, count):
            if count == 0:
                return 0.0
            vals = [join_energy[n] for n in self.nodes
                    if n.startswith(prefix)]
            return sum(vals) / count

        return Metrics(
            join_latency_ms=latency_ns / MS,
            e_nuav_j=mean("nuav", cfg.n_nuav),
            e_cm_j=mean("cm", cfg.n_cm),
            e_ch_j=join_energy["ch"],
            e_otherch_j=mean("peer", max(cfg.n_ch - 1, 0)),
            bytes_join=self.bytes_phase["join"],
            bytes_keyupdate=self.bytes_phase["keyupdate"],
            frames_join=self.frames_phase["join"],
            frames_keyupdate=self.frames_phase["keyupdate"],
            depleted=depleted,
            node_energy_j=total,
            node_position_m={
                n: self.tracker.position(n, self.last_event)
                for n in self.nodes
            } if self.tracker else {},
        )


def run_scenario(cfg: ScenarioConfig) -> Metrics:
    """Deterministic metrics for one scenario."""
    return _Sim(cfg).run()


def expected_bytes(cfg: ScenarioConfig) -> tuple:
    """Closed-form byte counts this scenario must produce exactly."""
    group = cfg.group_params()
    join = derived_comm_join(group, cfg.n_nuav, cfg.n_cm, cfg.n_ch,
                             mam=cfg.mam,
                             hardened=not cfg.paper_literal)
    rekey = (derived_comm_keyupdate(group, cfg.n_cm + cfg.n_nuav)
             if cfg.n_nuav else 0)
    return join, rekey


def derive_seed(base_seed: int, param: str, value, mam: bool) -> int:
    blob = hash_to_block("seed", [str(base_seed).encode(), param.encode(),
                                  str(value).encode(),
                                  b"1" if mam else b"0"])
    return int.from_bytes(blob[:8], "big")


def sweep(param: str, values, base: ScenarioConfig) -> list:
    """One run per value with per-run derived seeds; returns
    [(value, Metrics)]."""
    if param not in ("n_nuav", "n_cm", "n_ch", "bitrate"):
        raise ConfigInvalid(f"cannot sweep {param!r}")
    rows = []
    for value in values:
        cfg = replace(base, **{param: value},
                      rng_seed=derive_seed(base.rng_seed, param, value,
                                           base.mam))
        rows.append((value, run_scenario(cfg)))
    return rows
