"""Deterministic discrete-event simulation of a multi-peer, multi-channel network.

Everything is driven by a single event queue ordered by (simulated time,
insertion sequence) and by ``random.Random`` streams derived from the
scenario seed, so a scenario is a pure function of its configuration.

Time is integer microseconds.  Links have a constant per-(src, dst) delay
drawn once from the seeded stream.  Peers process work one item at a time
(``busy_until``); chaincode executions cost ``exec_cost_us`` and each
transaction validation ``validate_cost_us``.

Two pipelines are available:

``EOV``            endorse at the endorsers, order, validate at every peer.
``ORDER_EXECUTE``  order raw proposals, then every peer executes every
                   transaction sequentially (the classical architecture).
"""

from __future__ import annotations

import heapq
import json
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from . import chaincode, codec
from .chaincode import QuerySpec, WebLogData
from .envelope import Proposal, TransactionEnvelope
from .errors import ChaincodeError, InvalidConfig, PolicyUnsatisfied, BadClientSignature, TamperDetected
from .identity import ROLE_ORDERER, DataSource, Registry, verify_with_key
from .ledger import (
    EXECUTION_FAILED,
    VALID,
    Block,
    Chain,
    WorldState,
    compute_block_hash,
    compute_data_hash,
    header_signature_message,
    verify_chain,
    replay_world_state,
)
from .txflow import (
    CONFIG_FUNCTIONS,
    ChannelConfig,
    EndorsementPolicy,
    EndorsementResponse,
    Endorser,
    Ledger,
    OrderingConfig,
    OrderingService,
    append_proposal,
    assemble,
    check_client_signature,
    commit,
    create_genesis,
    endorse_one,
    validate,
)

log = logging.getLogger(__name__)

EOV = "EOV"
ORDER_EXECUTE = "ORDER_EXECUTE"
PIPELINES = (EOV, ORDER_EXECUTE)

HONEST = "HONEST"
OFFLINE = "OFFLINE"
TAMPERING = "TAMPERING"
FAULT_MODES = (HONEST, OFFLINE, TAMPERING)

ORDERER_ID = "orderer"


# --- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class FaultSpec:
    """Fault injected into one peer.

    OFFLINE: the peer goes dark when block ``from_block`` of ``channel`` is
    cut and reconnects when block ``to_block + 1`` is cut (``to_block`` None:
    never).  TAMPERING: after committing block ``block`` of ``channel`` the
    peer XORs byte ``offset`` of that stored block with ``mask`` and re-verifies.
    """

    mode: str = HONEST
    channel: str | None = None
    from_block: int | None = None
    to_block: int | None = None
    block: int | None = None
    offset: int = 0
    mask: int = 1


@dataclass(frozen=True)
class PeerSpec:
    peer_id: str
    fault: FaultSpec = FaultSpec()


@dataclass(frozen=True)
class ChannelSpec:
    channel_id: str
    members: tuple[str, ...]
    endorsers: tuple[str, ...] | None = None  # default: all members
    policy_k: int | None = None  # default: majority of endorsers
    max_block_txs: int = 10
    max_wait_ms: int = 50
    datasources: int = 2


@dataclass(frozen=True)
class WorkloadSpec:
    """Synthetic WebLogData workload. All distributions are configuration."""

    count: int = 100
    query_fraction: float = 0.0
    conflict_rate: float = 0.0
    arrival_interval_us: int = 1000  # mean of an exponential gap; 0 = burst
    status_weights: tuple[tuple[int, float], ...] = (
        (200, 0.80),
        (304, 0.06),
        (302, 0.04),
        (404, 0.07),
        (500, 0.03),
    )
    user_agents: tuple[str, ...] = (
        "Mozilla/5.0 (X11; Linux x86_64) Gecko/20100101 Firefox/118.0",
        "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 Chrome/119.0",
        "curl/8.4.0",
        "Googlebot/2.1 (+http://www.google.com/bot.html)",
    )
    ip_pool: int = 16
    urls: tuple[str, ...] = ("/", "/login", "/api/v1/orders", "/static/app.js", "/admin/audit")
    referers: tuple[str, ...] = ("", "https://example.com/", "https://search.example.org/q")
    epoch_ms: int = 1_700_000_000_000
    datetime_span_ms: int = 86_400_000
    channel_weights: tuple[float, ...] | None = None


@dataclass(frozen=True)
class NetworkSpec:
    delay_min_us: int = 500
    delay_max_us: int = 2000
    exec_cost_us: int = 1000
    validate_cost_us: int = 200


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    peers: tuple[PeerSpec, ...]
    channels: tuple[ChannelSpec, ...]
    workload: WorkloadSpec = WorkloadSpec()
    network: NetworkSpec = NetworkSpec()
    pipeline: str = EOV

    def check(self) -> None:
        peer_ids = [p.peer_id for p in self.peers]
        if not peer_ids or len(set(peer_ids)) != len(peer_ids):
            raise InvalidConfig("peer ids must be non-empty and unique")
        if ORDERER_ID in peer_ids:
            raise InvalidConfig(f"{ORDERER_ID!r} is reserved")
        if self.pipeline not in PIPELINES:
            raise InvalidConfig(f"pipeline must be one of {PIPELINES}")
        chan_ids = [c.channel_id for c in self.channels]
        if not chan_ids or len(set(chan_ids)) != len(chan_ids):
            raise InvalidConfig("channel ids must be non-empty and unique")
        for ch in self.channels:
            if not ch.members or not set(ch.members) <= set(peer_ids):
                raise InvalidConfig(f"channel {ch.channel_id}: members must be known peers")
            if ch.endorsers is not None and not set(ch.endorsers) <= set(ch.members):
                raise InvalidConfig(f"channel {ch.channel_id}: endorsers must be members")
            if ch.datasources < 1 or ch.max_block_txs < 1 or ch.max_wait_ms < 0:
                raise InvalidConfig(f"channel {ch.channel_id}: bad sizes")
            try:
                _policy(ch)
            except ValueError as exc:
                raise InvalidConfig(str(exc)) from exc
        w = self.workload
        if w.count < 0 or not 0 <= w.query_fraction <= 1 or not 0 <= w.conflict_rate <= 1:
            raise InvalidConfig("workload fractions must lie in [0, 1] and count >= 0")
        if w.arrival_interval_us < 0 or w.ip_pool < 1 or not w.user_agents or not w.urls or not w.referers:
            raise InvalidConfig("workload pools must be non-empty")
        if not w.status_weights or any(not 100 <= s <= 599 or p < 0 for s, p in w.status_weights):
            raise InvalidConfig("status weights need codes in 100-599 and non-negative weights")
        if w.channel_weights is not None and len(w.channel_weights) != len(self.channels):
            raise InvalidConfig("channel_weights must match channels")
        n = self.network
        if not 0 <= n.delay_min_us <= n.delay_max_us or n.exec_cost_us < 0 or n.validate_cost_us < 0:
            raise InvalidConfig("network delays/costs must be non-negative and ordered")
        for p in self.peers:
            f = p.fault
            if f.mode not in FAULT_MODES:
                raise InvalidConfig(f"unknown fault mode {f.mode!r}")
            if f.channel is not None and f.channel not in chan_ids:
                raise InvalidConfig(f"fault channel {f.channel!r} unknown")
            if f.mode == OFFLINE and (f.from_block is None or f.from_block < 1):
                raise InvalidConfig("OFFLINE needs from_block >= 1")
            if f.mode == OFFLINE and f.to_block is not None and f.to_block < f.from_block:
                raise InvalidConfig("OFFLINE needs to_block >= from_block")
            if f.mode == TAMPERING and (f.block is None or f.block < 0 or not 1 <= f.mask <= 255):
                raise InvalidConfig("TAMPERING needs block >= 0 and mask in 1-255")

    def to_canonical(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, obj: dict) -> ScenarioConfig:
        try:
            peers = []
            for p in obj["peers"]:
                if isinstance(p, str):
                    p = {"peer_id": p}
                fault = FaultSpec(**p.get("fault", {}))
                peers.append(PeerSpec(p["peer_id"], fault))
            channels = []
            for c in obj["channels"]:
                c = dict(c)
                c["members"] = tuple(c["members"])
                if c.get("endorsers") is not None:
                    c["endorsers"] = tuple(c["endorsers"])
                channels.append(ChannelSpec(**c))
            w = dict(obj.get("workload", {}))
            if "status_weights" in w:
                sw = w["status_weights"]
                items = sw.items() if isinstance(sw, dict) else sw
                w["status_weights"] = tuple((int(s), float(p)) for s, p in items)
            for name in ("user_agents", "urls", "referers", "channel_weights"):
                if w.get(name) is not None:
                    w[name] = tuple(w[name])
            config = cls(
                seed=int(obj["seed"]),
                peers=tuple(peers),
                channels=tuple(channels),
                workload=WorkloadSpec(**w),
                network=NetworkSpec(**obj.get("network", {})),
                pipeline=obj.get("pipeline", EOV),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad scenario config: {exc}") from exc
        config.check()
        return config

    @classmethod
    def load(cls, path: str | Path) -> ScenarioConfig:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        return cls.from_dict(obj)


def _policy(ch: ChannelSpec) -> EndorsementPolicy:
    endorsers = tuple(ch.endorsers) if ch.endorsers is not None else tuple(ch.members)
    if ch.policy_k is None:
        return EndorsementPolicy.majority(endorsers)
    return EndorsementPolicy(ch.policy_k, endorsers)


# --- metrics --------------------------------------------------------------------


def percentile(values: Sequence[int], pct: int) -> int:
    """Nearest-rank percentile (``pct`` in 1..100); 0 for an empty sample."""
    if not values:
        return 0
    ordered = sorted(values)
    rank = -(-pct * len(ordered) // 100)
    return ordered[max(rank, 1) - 1]


@dataclass(frozen=True)
class ScenarioMetrics:
    pipeline: str
    seed: int
    proposals: int
    queries: int
    endorsement_failures: int
    dropped: int
    delivered: int
    committed_valid: int
    committed_invalid: int
    blocks: int
    duration_us: int
    tps: float
    latency_p50_us: int
    latency_p95_us: int
    latency_p99_us: int
    executions: dict[str, int]
    chain_digests: dict[str, dict[str, str]]
    canonical_digests: dict[str, str]
    state_digests: dict[str, str]
    tamper_events: tuple[tuple[str, str, int, str], ...]

    def to_canonical(self) -> dict:
        obj = asdict(self)
        obj["tamper_events"] = [list(e) for e in self.tamper_events]
        return obj

    def encode(self) -> bytes:
        return codec.encode(self.to_canonical())

    def table(self) -> str:
        rows = [
            ("pipeline", self.pipeline),
            ("seed", self.seed),
            ("proposals", self.proposals),
            ("queries", self.queries),
            ("endorsement failures", self.endorsement_failures),
            ("dropped by orderer", self.dropped),
            ("delivered", self.delivered),
            ("committed valid", self.committed_valid),
            ("committed invalid", self.committed_invalid),
            ("blocks", self.blocks),
            ("simulated duration (ms)", f"{self.duration_us / 1000:.3f}"),
            ("throughput (tx/s)", f"{self.tps:.3f}"),
            ("latency p50 (ms)", f"{self.latency_p50_us / 1000:.3f}"),
            ("latency p95 (ms)", f"{self.latency_p95_us / 1000:.3f}"),
            ("latency p99 (ms)", f"{self.latency_p99_us / 1000:.3f}"),
        ]
        rows += [(f"executions {peer}", n) for peer, n in self.executions.items()]
        for ch, digests in self.chain_digests.items():
            rows.append((f"canonical digest {ch}", self.canonical_digests[ch][:16]))
            rows += [(f"  {peer}", d[:16]) for peer, d in digests.items()]
        rows += [(f"tamper {p}@{c}", f"block {b} {k}") for p, c, b, k in self.tamper_events]
        width = max(len(str(k)) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


# --- simulation state -------------------------------------------------------------


@dataclass
class PeerChannel:
    """A peer's local copy of one channel."""

    ledger: Ledger
    policy: EndorsementPolicy
    halted: TamperDetected | None = None
    commit_times: dict[int, int] = field(default_factory=dict)


@dataclass
class SimPeer:
    peer_id: str
    credential: Any
    fault: FaultSpec
    channels: dict[str, PeerChannel] = field(default_factory=dict)
    offline: bool = False
    busy_until: int = 0
    executions: int = 0

    def endorser(self, channel_id: str) -> Endorser:
        return Endorser(self.peer_id, self.credential, self.channels[channel_id].ledger.state)


@dataclass
class SimChannel:
    spec: ChannelSpec
    config: ChannelConfig
    orderer: OrderingService
    ledger: Ledger  # canonical ledger kept by the ordering/reference committer
    datasources: list[Any]
    timeout_at: int | None = None
    busy_until: int = 0
    used_ids: list[str] = field(default_factory=list)
    asset_counter: int = 0


@dataclass
class Job:
    """One workload item."""

    at: int
    channel_id: str
    kind: str  # "append" | "query"
    submitter: str
    asset: WebLogData | None = None
    query: QuerySpec | None = None


def oe_executor(state: WorldState, tx: TransactionEnvelope):
    """Write set of a transaction under order-execute: run the chaincode now."""
    if tx.proposal.function in CONFIG_FUNCTIONS:
        return tx.write_set
    _, writes = chaincode.dispatch(tx.proposal.function, tx.proposal.args, state, tx.proposal.submitter)
    return writes


def execute_block(block: Block, state: WorldState) -> tuple[Block, dict[bytes, tuple]]:
    """Order-execute semantics: run each transaction in order against ``state``.

    Returns the flagged block and each VALID transaction's writes; ``state``
    itself is not modified.
    """
    scratch = state.copy()
    flags, writes = [], {}
    for i, tx in enumerate(block.transactions):
        ok = tx.proposal.tx_id == tx.tx_id and check_client_signature(scratch, tx.proposal)
        if ok and tx.proposal.function not in CONFIG_FUNCTIONS:
            try:
                ws = oe_executor(scratch, tx)
            except ChaincodeError:
                ok = False
        elif ok:
            ok = False  # configuration is never ordered raw
        if ok:
            scratch.apply(ws, (block.number, i))
            writes[tx.tx_id] = ws
        flags.append(VALID if ok else EXECUTION_FAILED)
    return block.with_flags(flags), writes


class Simulation:
    """One scenario run. Keeps every peer and channel for post-run inspection."""

    def __init__(self, config: ScenarioConfig, trace: bool = False):
        config.check()
        self.config = config
        self.trace_enabled = trace
        self.trace: list[str] = []
        self._queue: list[tuple[int, int, str, tuple]] = []
        self._seq = 0
        self.now = 0
        seed = config.seed
        self._key_rng = random.Random(f"{seed}:keys")
        self._delay_rng = random.Random(f"{seed}:delays")
        self._work_rng = random.Random(f"{seed}:workload")
        self._nonce_rng = random.Random(f"{seed}:nonces")
        self._delays: dict[tuple[str, str], int] = {}
        self.registry = Registry()
        self.orderer_credential = self.registry.register_node(ORDERER_ID, ROLE_ORDERER, self._key_rng)
        self.peers: dict[str, SimPeer] = {}
        for spec in config.peers:
            cred = self.registry.register_node(spec.peer_id, "peer", self._key_rng)
            self.peers[spec.peer_id] = SimPeer(spec.peer_id, cred, spec.fault)
        self.channels: dict[str, SimChannel] = {}
        for spec in config.channels:
            self._setup_channel(spec)
        self.proposal_time: dict[bytes, int] = {}
        self.commit_time: dict[bytes, int] = {}
        self.queries = 0
        self.query_results = 0
        self.endorsement_failures = 0
        self.proposals = 0
        self._pending: dict[bytes, dict] = {}
        self.tamper_events: list[tuple[str, str, int, str]] = []
        self.ran = False

    # setup ----------------------------------------------------------------------

    def _setup_channel(self, spec: ChannelSpec) -> None:
        policy = _policy(spec)
        ordering = OrderingConfig(spec.max_block_txs, spec.max_wait_ms * 1000)
        config = ChannelConfig(spec.channel_id, ORDERER_ID, tuple(spec.members), policy, ordering)
        datasources = []
        for i in range(spec.datasources):
            ds_id = f"{spec.channel_id}-ds{i}"
            ip = f"10.{len(self.channels) % 256}.0.{i + 1}"
            descriptor = DataSource(ds_id, ip, 8080, f"ops{i}", f"http://{ip}:8080/logs")
            datasources.append(self.registry.register_datasource(descriptor, f"pw-{ds_id}", self._key_rng))
        records = [self.registry.get(ORDERER_ID)]
        records += [self.registry.get(p) for p in spec.members]
        records += [self.registry.get(d.participant_id) for d in datasources]
        genesis = create_genesis(config, records, self.orderer_credential, self.config.workload.epoch_ms, self._nonce_rng)
        canonical = Ledger(Chain())
        commit(genesis, canonical)
        orderer = OrderingService.following(canonical.chain, spec.channel_id, self.orderer_credential, ordering)
        self.channels[spec.channel_id] = SimChannel(spec, config, orderer, canonical, datasources)
        for peer_id in spec.members:
            local = Ledger(Chain())
            commit(genesis, local)
            self.peers[peer_id].channels[spec.channel_id] = PeerChannel(local, policy, commit_times={0: 0})

    def _fault_channel(self, peer: SimPeer) -> str:
        return peer.fault.channel or next(iter(peer.channels), "")

    # event plumbing -------------------------------------------------------------------

    def _schedule(self, at: int, kind: str, *payload) -> None:
        heapq.heappush(self._queue, (at, self._seq, kind, payload))
        self._seq += 1

    def _log(self, message: str) -> None:
        if self.trace_enabled:
            self.trace.append(f"{self.now:>12} {message}")

    def delay(self, src: str, dst: str) -> int:
        key = (src, dst)
        if key not in self._delays:
            n = self.config.network
            self._delays[key] = self._delay_rng.randint(n.delay_min_us, n.delay_max_us)
        return self._delays[key]

    def _work(self, who: SimPeer | SimChannel, arrival: int, cost: int) -> int:
        start = max(arrival, who.busy_until)
        who.busy_until = start + cost
        return who.busy_until

    # workload ----------------------------------------------------------------------------

    def generate_workload(self) -> list[Job]:
        w = self.config.workload
        rng = self._work_rng
        chan_ids = list(self.channels)
        weights = list(w.channel_weights) if w.channel_weights else [1.0] * len(chan_ids)
        codes = [s for s, _ in w.status_weights]
        code_w = [p for _, p in w.status_weights]
        ips = [f"192.168.{i // 250}.{i % 250 + 1}" for i in range(w.ip_pool)]
        jobs, t = [], 0
        for _ in range(w.count):
            if w.arrival_interval_us:
                t += int(rng.expovariate(1.0 / w.arrival_interval_us))
            ch = self.channels[rng.choices(chan_ids, weights)[0]]
            submitter = rng.choice(ch.datasources).participant_id
            if rng.random() < w.query_fraction:
                pick = rng.randrange(3)
                if pick == 0:
                    query = QuerySpec.by_ip(rng.choice(ips))
                elif pick == 1:
                    query = QuerySpec.by_user_agent(rng.choice(w.user_agents))
                else:
                    lo = w.epoch_ms + rng.randrange(w.datetime_span_ms)
                    query = QuerySpec.by_datetime_range(lo, lo + rng.randrange(w.datetime_span_ms // 4 + 1))
                jobs.append(Job(t, ch.spec.channel_id, "query", submitter, query=query))
                continue
            if ch.used_ids and rng.random() < w.conflict_rate:
                asset_id = rng.choice(ch.used_ids)
            else:
                asset_id = f"{ch.spec.channel_id}-a{ch.asset_counter}"
                ch.asset_counter += 1
                ch.used_ids.append(asset_id)
            asset = WebLogData(
                asset_id=asset_id,
                url=rng.choice(w.urls),
                referer=rng.choice(w.referers),
                return_code=rng.choices(codes, code_w)[0],
                user_agent=rng.choice(w.user_agents),
                datetime=w.epoch_ms + rng.randrange(w.datetime_span_ms),
                ip=rng.choice(ips),
            )
            jobs.append(Job(t, ch.spec.channel_id, "append", submitter, asset=asset))
        return jobs

    # EOV stages -----------------------------------------------------------------------------

    def _credential(self, channel: SimChannel, participant_id: str):
        return next(d for d in channel.datasources if d.participant_id == participant_id)

    def _on_job(self, job: Job) -> None:
        channel = self.channels[job.channel_id]
        if job.kind == "query":
            self._run_query(channel, job)
            return
        proposal = append_proposal(job.channel_id, job.asset, self._credential(channel, job.submitter), self._nonce_rng)
        self.proposals += 1
        self.proposal_time[proposal.tx_id] = self.now
        if self.config.pipeline == ORDER_EXECUTE:
            env = TransactionEnvelope(proposal.tx_id, proposal)
            self._schedule(self.now + self.delay(job.submitter, ORDERER_ID), "order", job.channel_id, env)
            return
        endorsers = channel.config.policy.endorsers
        self._pending[proposal.tx_id] = {"proposal": proposal, "channel": job.channel_id, "responses": [], "expected": len(endorsers)}
        for peer_id in endorsers:
            self._schedule(self.now + self.delay(job.submitter, peer_id), "endorse", peer_id, proposal, job.submitter)

    def _run_query(self, channel: SimChannel, job: Job) -> None:
        members = [p for p in channel.spec.members if self._available(self.peers[p], channel.spec.channel_id)]
        if not members:
            return
        peer = self.peers[self._work_rng.choice(members)]
        state = peer.channels[channel.spec.channel_id].ledger.state
        try:
            result = chaincode.dispatch(chaincode.FN_SELECT, job.query.to_canonical(), state, job.submitter)
        except ChaincodeError as exc:
            self._log(f"query by {job.submitter} refused: {exc}")
            return
        self.queries += 1
        self.query_results += len(result)

    def _available(self, peer: SimPeer, channel_id: str) -> bool:
        pc = peer.channels.get(channel_id)
        return pc is not None and not peer.offline and pc.halted is None

    def _on_endorse(self, peer_id: str, proposal: Proposal, client: str) -> None:
        peer = self.peers[peer_id]
        channel_id = proposal.channel_id
        if not self._available(peer, channel_id):
            response = None  # connection refused
            back = self.now + self.delay(peer_id, client)
        else:
            endorser = peer.endorser(channel_id)
            response = endorse_one(endorser, proposal)
            peer.executions += endorser.executions
            done = self._work(peer, self.now, self.config.network.exec_cost_us * endorser.executions)
            back = done + self.delay(peer_id, client)
        self._schedule(back, "response", proposal.tx_id, response)

    def _on_response(self, tx_id: bytes, response: EndorsementResponse | None) -> None:
        pending = self._pending[tx_id]
        if response is not None:
            pending["responses"].append(response)
        pending["expected"] -= 1
        if pending["expected"]:
            return
        del self._pending[tx_id]
        channel = self.channels[pending["channel"]]
        proposal = pending["proposal"]
        try:
            env = assemble(proposal, pending["responses"], channel.config.policy)
        except (ChaincodeError, PolicyUnsatisfied, BadClientSignature) as exc:
            self.endorsement_failures += 1
            self._log(f"endorsement failed {tx_id.hex()[:12]}: {type(exc).__name__}")
            return
        self._schedule(self.now + self.delay(proposal.submitter, ORDERER_ID), "order", channel.spec.channel_id, env)

    # ordering ----------------------------------------------------------------------------------

    def submit_to_orderer(self, channel_id: str, env: TransactionEnvelope) -> bool:
        """Hand an envelope to ``channel_id``'s orderer; False if it was refused."""
        channel = self.channels[channel_id]
        accepted = channel.orderer.enqueue(env, self.now)
        if accepted:
            self._cut(channel)
        return accepted

    def _on_order(self, channel_id: str, env: TransactionEnvelope) -> None:
        self.submit_to_orderer(channel_id, env)

    def _cut(self, channel: SimChannel) -> None:
        for block in channel.orderer.cut_ready(self.now):
            self._on_block_cut(channel, block)
        deadline = channel.orderer.deadline()
        if deadline is not None and channel.timeout_at != deadline:
            channel.timeout_at = deadline
            self._schedule(deadline, "timeout", channel.spec.channel_id)

    def _on_timeout(self, channel_id: str) -> None:
        channel = self.channels[channel_id]
        if channel.timeout_at == self.now:
            channel.timeout_at = None
            self._cut(channel)

    def _on_block_cut(self, channel: SimChannel, block: Block) -> None:
        channel_id = channel.spec.channel_id
        n = len(block.transactions)
        if self.config.pipeline == ORDER_EXECUTE:
            flagged, writes = execute_block(block, channel.ledger.state)
            commit(flagged, channel.ledger, lambda _s, tx: writes[tx.tx_id])
            cost = self.config.network.exec_cost_us * n
        else:
            flagged = validate(block, channel.ledger.state, channel.config.policy)
            commit(flagged, channel.ledger)
            cost = self.config.network.validate_cost_us * n
        done = self._work(channel, self.now, cost)
        for tx in flagged.transactions:
            self.commit_time.setdefault(tx.tx_id, done)
        self._log(f"{channel_id} block {block.number} cut ({n} txs, flags {Counter(flagged.validity_flags)})")
        for peer_id in channel.spec.members:
            peer = self.peers[peer_id]
            f = peer.fault
            if f.mode == OFFLINE and self._fault_channel(peer) == channel_id:
                if block.number == f.from_block:
                    peer.offline = True
                    self._log(f"{peer_id} offline")
                elif f.to_block is not None and block.number == f.to_block + 1 and peer.offline:
                    peer.offline = False
                    self._log(f"{peer_id} back online")
                    for other in peer.channels:
                        self._schedule(self.now, "catchup", peer_id, other)
            self._schedule(done + self.delay(ORDERER_ID, peer_id), "deliver", peer_id, channel_id, block.number)

    # delivery ----------------------------------------------------------------------------------

    def _on_deliver(self, peer_id: str, channel_id: str, upto: int | None) -> None:
        peer = self.peers[peer_id]
        if peer.offline or peer.channels[channel_id].halted is not None:
            return
        try:
            self.deliver_blocks(channel_id, peer_id, upto)
        except TamperDetected as exc:
            self._log(str(exc))

    def deliver_blocks(self, channel_id: str, peer_id: str, upto: int | None = None) -> int:
        """Bring a peer's copy of the channel up to block ``upto`` (default: the tip).

        Every block is re-checked locally before it is appended: link to the
        peer's own stored tip, data hash, orderer signature, and validity flags
        recomputed against the peer's own state.  Returns blocks appended.
        """
        channel = self.channels[channel_id]
        peer = self.peers[peer_id]
        pc = peer.channels.get(channel_id)
        if pc is None:
            raise PermissionError(f"{peer_id} is not a member of {channel_id}")
        if pc.halted is not None:
            raise pc.halted
        canonical = channel.ledger.chain
        last = len(canonical) - 1 if upto is None else min(upto, len(canonical) - 1)
        appended = 0
        oe = self.config.pipeline == ORDER_EXECUTE
        while len(pc.ledger.chain) <= last:
            n = len(pc.ledger.chain)
            received = canonical.block(n)
            kind = self._check_received(pc, received)
            if kind is None:
                unflagged = received.with_flags(())
                if oe:
                    local, writes = execute_block(unflagged, pc.ledger.state)
                    peer.executions += len(received.transactions)
                    cost = self.config.network.exec_cost_us * len(received.transactions)
                else:
                    local = validate(unflagged, pc.ledger.state, pc.policy)
                    cost = self.config.network.validate_cost_us * len(received.transactions)
                if local.validity_flags != received.validity_flags:
                    kind = "FLAGS_MISMATCH"
            if kind is not None:
                pc.halted = TamperDetected(peer_id, n, kind)
                self.tamper_events.append((peer_id, channel_id, n, kind))
                raise pc.halted
            commit(received, pc.ledger, (lambda _s, tx: writes[tx.tx_id]) if oe else None)
            pc.commit_times[n] = self._work(peer, self.now, cost)
            appended += 1
            self._after_commit(peer, channel_id, n)
        return appended

    def _check_received(self, pc: PeerChannel, block: Block) -> str | None:
        try:
            tip = Block.decode(pc.ledger.chain.record(len(pc.ledger.chain) - 1))
        except Exception:
            return "BROKEN_LINK"
        if block.header.previous_hash != compute_block_hash(tip.header):
            return "BROKEN_LINK"
        if block.header.number != tip.header.number + 1:
            return "NONSEQUENTIAL_NUMBER"
        if compute_data_hash(block.transactions) != block.header.data_hash:
            return "DATA_HASH_MISMATCH"
        sig = block.orderer_signature
        rec = pc.ledger.state.participant(sig.signer_id) if sig is not None else None
        if rec is None or rec.role != ROLE_ORDERER or not verify_with_key(
            rec.public_key, sig, header_signature_message(block.header)
        ):
            return "BAD_SIGNATURE"
        return None

    def _after_commit(self, peer: SimPeer, channel_id: str, number: int) -> None:
        f = peer.fault
        if f.mode != TAMPERING or self._fault_channel(peer) != channel_id or number != f.block:
            return
        pc = peer.channels[channel_id]
        records = pc.ledger.chain.records()
        target = bytearray(records[number])
        target[f.offset % len(target)] ^= f.mask
        records[number] = bytes(target)
        pc.ledger.chain = Chain(records)
        report = verify_chain(pc.ledger.chain)
        self._log(f"{peer.peer_id} tampered block {number}; re-verify: {report}")
        if not report.ok:
            pc.halted = TamperDetected(peer.peer_id, report.first_bad_block, report.failure_kind)
            self.tamper_events.append((peer.peer_id, channel_id, report.first_bad_block, report.failure_kind))

    # run -------------------------------------------------------------------------------------------

    def run(self) -> ScenarioMetrics:
        if self.ran:
            raise RuntimeError("a Simulation runs once")
        self.ran = True
        for peer in self.peers.values():
            if peer.fault.mode == TAMPERING and peer.fault.block == 0:
                self._after_commit(peer, self._fault_channel(peer), 0)
        for job in self.generate_workload():
            self._schedule(job.at, "job", job)
        handlers: dict[str, Callable] = {
            "job": self._on_job,
            "endorse": self._on_endorse,
            "response": self._on_response,
            "order": self._on_order,
            "timeout": self._on_timeout,
            "deliver": self._on_deliver,
            "catchup": lambda peer_id, channel_id: self._on_deliver(peer_id, channel_id, None),
        }
        while self._queue:
            self.now, _, kind, payload = heapq.heappop(self._queue)
            handlers[kind](*payload)
            if not self._queue:
                self._quiesce()
        return self.metrics()

    def _quiesce(self) -> None:
        """Flush orderers, then reconnect peers whose offline window has closed."""
        for channel in self.channels.values():
            if channel.orderer.pending:
                self._schedule(channel.orderer.deadline(), "timeout", channel.spec.channel_id)
                channel.timeout_at = channel.orderer.deadline()
        if self._queue:
            return
        for peer in self.peers.values():
            f = peer.fault
            if peer.offline and f.to_block is not None:
                peer.offline = False
                self._log(f"{peer.peer_id} reconnects at quiescence")
                for channel_id in peer.channels:
                    self._schedule(self.now, "catchup", peer.peer_id, channel_id)

    # results ----------------------------------------------------------------------------------------

    def chain_digests(self) -> dict[str, dict[str, str]]:
        return {
            cid: {
                pid: self.peers[pid].channels[cid].ledger.chain.digest().hex()
                for pid in ch.spec.members
            }
            for cid, ch in self.channels.items()
        }

    def honest_members(self, channel_id: str) -> list[str]:
        """Members that are online and have not halted on tamper detection."""
        return [
            pid
            for pid in self.channels[channel_id].spec.members
            if not self.peers[pid].offline and self.peers[pid].channels[channel_id].halted is None
        ]

    def converged(self) -> bool:
        for cid, ch in self.channels.items():
            canonical = ch.ledger.chain.digest()
            if any(self.peers[p].channels[cid].ledger.chain.digest() != canonical for p in self.honest_members(cid)):
                return False
        return True

    def metrics(self) -> ScenarioMetrics:
        valid = invalid = delivered = blocks = 0
        latencies = []
        for ch in self.channels.values():
            blocks += len(ch.ledger.chain) - 1
            for block in ch.ledger.chain:
                for tx, flag in zip(block.transactions, block.validity_flags):
                    if tx.proposal.function in CONFIG_FUNCTIONS:
                        continue
                    delivered += 1
                    if flag == VALID:
                        valid += 1
                    else:
                        invalid += 1
                    latencies.append(self.commit_time[tx.tx_id] - self.proposal_time[tx.tx_id])
        start = min(self.proposal_time.values(), default=0)
        end = max(self.commit_time.values(), default=start)
        duration = end - start
        tps = round(valid * 1_000_000 / duration, 3) if duration > 0 else 0.0
        return ScenarioMetrics(
            pipeline=self.config.pipeline,
            seed=self.config.seed,
            proposals=self.proposals,
            queries=self.queries,
            endorsement_failures=self.endorsement_failures,
            dropped=sum(len(ch.orderer.dropped) for ch in self.channels.values()),
            delivered=delivered,
            committed_valid=valid,
            committed_invalid=invalid,
            blocks=blocks,
            duration_us=duration,
            tps=tps,
            latency_p50_us=percentile(latencies, 50),
            latency_p95_us=percentile(latencies, 95),
            latency_p99_us=percentile(latencies, 99),
            executions={pid: p.executions for pid, p in self.peers.items()},
            chain_digests=self.chain_digests(),
            canonical_digests={cid: ch.ledger.chain.digest().hex() for cid, ch in self.channels.items()},
            state_digests={cid: ch.ledger.state.digest().hex() for cid, ch in self.channels.items()},
            tamper_events=tuple(self.tamper_events),
        )

    def latencies(self) -> list[int]:
        return [self.commit_time[t] - self.proposal_time[t] for t in self.commit_time if t in self.proposal_time]

    def replay(self, channel_id: str, peer_id: str | None = None) -> WorldState:
        """Replay a channel's world state from its block records."""
        ledger = self.channels[channel_id].ledger if peer_id is None else self.peers[peer_id].channels[channel_id].ledger
        chain = Chain.from_bytes(ledger.chain.to_bytes())
        return replay_world_state(chain, oe_executor if self.config.pipeline == ORDER_EXECUTE else None)


def run_scenario(config: ScenarioConfig) -> ScenarioMetrics:
    return Simulation(config).run()


def run_order_execute_baseline(config: ScenarioConfig) -> ScenarioMetrics:
    """The same workload through the order-execute pipeline."""
    return run_scenario(replace(config, pipeline=ORDER_EXECUTE))


def deliver_blocks(sim: Simulation, channel_id: str, peer_id: str) -> int:
    return sim.deliver_blocks(channel_id, peer_id)


@dataclass(frozen=True)
class IsolationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def assert_channel_isolation(sim: Simulation) -> IsolationReport:
    """Scan every ledger copy for data that belongs to another channel."""
    violations = []
    tx_owner: dict[bytes, str] = {}
    for cid, ch in sim.channels.items():
        for block in ch.ledger.chain:
            for tx in block.transactions:
                if tx.channel_id != cid:
                    violations.append(f"canonical {cid} block {block.number} holds a {tx.channel_id} envelope")
                tx_owner[tx.tx_id] = cid
    for pid, peer in sim.peers.items():
        for cid, pc in peer.channels.items():
            if pid not in sim.channels[cid].spec.members:
                violations.append(f"{pid} holds a ledger for {cid} without membership")
            for record in pc.ledger.chain.records():
                try:
                    block = Block.decode(record)
                except Exception:
                    continue  # tampered copies are reported by tamper detection
                for tx in block.transactions:
                    owner = tx_owner.get(tx.tx_id)
                    if tx.channel_id != cid or (owner is not None and owner != cid):
                        violations.append(f"{pid}'s {cid} ledger holds {tx.tx_id.hex()[:12]} of {owner or tx.channel_id}")
    return IsolationReport(tuple(violations))
