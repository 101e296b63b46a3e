"""Execute-order-validate transaction flow.

Stages:

1. ``endorse``   each endorser simulates the proposal against its committed
                 state and signs the resulting read/write sets.
2. ``order``     the ordering service fixes a FIFO total order and cuts blocks.
3. ``validate``  per transaction: signatures, endorsement policy, then MVCC.
4. ``commit``    the block (including invalid transactions) is appended and
                 VALID write sets are applied.

:class:`Gateway` drives all four stages synchronously in one process; the
simulator in :mod:`medusa.netsim` drives them over simulated time.
"""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import chaincode, codec
from .codec import ZERO_HASH
from .envelope import NONCE_BYTES, Proposal, ReadItem, TransactionEnvelope, WriteItem
from .errors import (
    BadClientSignature,
    ChaincodeError,
    ChannelMismatch,
    DecodeError,
    InvalidPolicy,
    PolicyUnsatisfied,
)
from .identity import (
    ROLE_ORDERER,
    Credential,
    ParticipantRecord,
    Signature,
    sign,
    verify_with_key,
)
from .ledger import (
    BAD_SIGNATURE,
    MVCC_CONFLICT,
    PARTICIPANT_PREFIX,
    POLICY_FAIL,
    VALID,
    Block,
    BlockHeader,
    Chain,
    WorldState,
    apply_block,
    compute_block_hash,
    compute_data_hash,
    header_signature_message,
)

log = logging.getLogger(__name__)

FN_CHANNEL_CONFIG = "ChannelConfig"
FN_CONFIG_UPDATE = "ConfigUpdate"
CONFIG_FUNCTIONS = frozenset({FN_CHANNEL_CONFIG, FN_CONFIG_UPDATE})
CONFIG_KEY = "config:channel"


@dataclass(frozen=True)
class EndorsementPolicy:
    required: int
    endorsers: tuple[str, ...]

    def __post_init__(self):
        n = len(self.endorsers)
        if len(set(self.endorsers)) != n:
            raise InvalidPolicy("endorser ids must be distinct")
        if not 1 <= self.required <= n:
            raise InvalidPolicy(f"need 1 <= k <= n, got k={self.required}, n={n}")

    @classmethod
    def majority(cls, endorsers: Sequence[str]) -> EndorsementPolicy:
        return cls(len(endorsers) // 2 + 1, tuple(endorsers))


@dataclass(frozen=True)
class OrderingConfig:
    max_block_txs: int = 10
    max_wait_ms: int = 100

    def __post_init__(self):
        if self.max_block_txs < 1:
            raise ValueError("max_block_txs must be >= 1")
        if self.max_wait_ms < 0:
            raise ValueError("max_wait_ms must be >= 0")


@dataclass(frozen=True)
class ChannelConfig:
    channel_id: str
    orderer_id: str
    peers: tuple[str, ...]
    policy: EndorsementPolicy
    ordering: OrderingConfig = OrderingConfig()

    def __post_init__(self):
        missing = set(self.policy.endorsers) - set(self.peers)
        if missing:
            raise InvalidPolicy(f"endorsers {sorted(missing)} are not channel peers")

    def to_canonical(self) -> dict:
        return {
            "channel_id": self.channel_id,
            "orderer": self.orderer_id,
            "peers": list(self.peers),
            "endorsers": list(self.policy.endorsers),
            "policy_k": self.policy.required,
            "max_block_txs": self.ordering.max_block_txs,
            "max_wait_ms": self.ordering.max_wait_ms,
        }

    @classmethod
    def from_canonical(cls, obj) -> ChannelConfig:
        obj = codec.fields(
            obj, ("channel_id", "orderer", "peers", "endorsers", "policy_k", "max_block_txs", "max_wait_ms")
        )
        return cls(
            channel_id=codec.text(obj["channel_id"]),
            orderer_id=codec.text(obj["orderer"]),
            peers=tuple(codec.text(p) for p in obj["peers"]),
            policy=EndorsementPolicy(codec.integer(obj["policy_k"]), tuple(obj["endorsers"])),
            ordering=OrderingConfig(codec.integer(obj["max_block_txs"]), codec.integer(obj["max_wait_ms"])),
        )

    @classmethod
    def from_state(cls, state: WorldState) -> ChannelConfig:
        raw = state.get(CONFIG_KEY)
        if raw is None:
            raise LookupError("state holds no channel configuration")
        return cls.from_canonical(codec.decode(raw))


def new_nonce(rng: random.Random | None = None) -> bytes:
    return os.urandom(NONCE_BYTES) if rng is None else rng.randbytes(NONCE_BYTES)


def make_proposal(
    channel_id: str, function: str, args: dict, credential: Credential, rng: random.Random | None = None
) -> Proposal:
    return Proposal(channel_id, function, args, credential.participant_id, new_nonce(rng)).signed(credential)


def append_proposal(
    channel_id: str, asset: chaincode.WebLogData, credential: Credential, rng: random.Random | None = None
) -> Proposal:
    return make_proposal(channel_id, chaincode.FN_APPEND, {"data": asset.to_canonical()}, credential, rng)


def _config_envelope(
    channel_id: str,
    function: str,
    args: dict,
    writes: Sequence[WriteItem],
    orderer: Credential,
    rng: random.Random | None,
) -> TransactionEnvelope:
    proposal = make_proposal(channel_id, function, args, orderer, rng)
    reads = tuple((key, None) for key, _ in writes)
    return TransactionEnvelope(proposal.tx_id, proposal, reads, tuple(writes), ())


def registration_envelope(
    channel_id: str, record: ParticipantRecord, orderer: Credential, rng: random.Random | None = None
) -> TransactionEnvelope:
    """Configuration transaction adding a participant to a channel's world state."""
    writes = [(PARTICIPANT_PREFIX + record.participant_id, record.encode())]
    return _config_envelope(
        channel_id, FN_CONFIG_UPDATE, {"participant": record.to_canonical()}, writes, orderer, rng
    )


def sign_header(header: BlockHeader, orderer: Credential) -> Signature:
    return sign(orderer, header_signature_message(header))


def create_genesis(
    config: ChannelConfig,
    participants: Iterable[ParticipantRecord],
    orderer: Credential,
    timestamp: int,
    rng: random.Random | None = None,
) -> Block:
    """Block 0: the channel configuration plus the initial participant records.

    ``participants`` must include the orderer and every peer named in ``config``.
    """
    records = list(participants)
    ids = {r.participant_id for r in records}
    missing = ({config.orderer_id} | set(config.peers)) - ids
    if missing:
        raise ValueError(f"genesis lacks participant records for {sorted(missing)}")
    if orderer.participant_id != config.orderer_id:
        raise ValueError("genesis must be signed by the channel orderer")
    writes = [(CONFIG_KEY, codec.encode(config.to_canonical()))]
    writes += [(PARTICIPANT_PREFIX + r.participant_id, r.encode()) for r in records]
    tx = _config_envelope(
        config.channel_id, FN_CHANNEL_CONFIG, {"config": config.to_canonical()}, writes, orderer, rng
    )
    header = BlockHeader(0, ZERO_HASH, compute_data_hash([tx]), timestamp)
    return Block(header, (tx,), (VALID,), sign_header(header, orderer))


# --- execute / endorse -------------------------------------------------------


@dataclass
class Endorser:
    """An endorsing peer's view: identity plus its committed state."""

    peer_id: str
    credential: Credential
    state: WorldState
    online: bool = True
    executions: int = 0


def check_client_signature(state: WorldState, proposal: Proposal) -> bool:
    key = state.public_key(proposal.submitter)
    return key is not None and proposal.signature is not None and verify_with_key(
        key, proposal.signature, proposal.body()
    )


def simulate(endorser: Endorser, proposal: Proposal) -> tuple[tuple[ReadItem, ...], tuple[WriteItem, ...]]:
    """Run the chaincode for ``proposal`` against the endorser's committed state."""
    if not check_client_signature(endorser.state, proposal):
        raise BadClientSignature(f"proposal from {proposal.submitter} does not verify")
    if proposal.function == chaincode.FN_SELECT:
        raise ChaincodeError("selectWebLogData is read-only and never ordered")
    endorser.executions += 1
    return chaincode.dispatch(proposal.function, proposal.args, endorser.state, proposal.submitter)


@dataclass(frozen=True)
class EndorsementResponse:
    peer_id: str
    read_set: tuple[ReadItem, ...] = ()
    write_set: tuple[WriteItem, ...] = ()
    signature: Signature | None = None
    error: Exception | None = None


def endorse_one(endorser: Endorser, proposal: Proposal) -> EndorsementResponse:
    try:
        reads, writes = simulate(endorser, proposal)
    except (ChaincodeError, BadClientSignature) as exc:
        return EndorsementResponse(endorser.peer_id, error=exc)
    signature = sign(endorser.credential, TransactionEnvelope(proposal.tx_id, proposal, reads, writes).rw_message())
    return EndorsementResponse(endorser.peer_id, reads, writes, signature)


def assemble(proposal: Proposal, responses: Sequence[EndorsementResponse], policy: EndorsementPolicy) -> TransactionEnvelope:
    """Build an envelope from the largest group of byte-identical endorsements.

    Raises the endorsers' error when none succeeded, and
    :class:`PolicyUnsatisfied` when the agreeing group is smaller than k.
    """
    responses = [r for r in responses if r.peer_id in policy.endorsers]
    ok = [r for r in responses if r.error is None]
    if responses and not ok:
        raise responses[0].error
    groups: dict[bytes, list[EndorsementResponse]] = {}
    for r in ok:
        groups.setdefault(TransactionEnvelope(proposal.tx_id, proposal, r.read_set, r.write_set).rw_message(), []).append(r)
    best = max(groups.values(), key=len, default=[])
    if len(best) < policy.required:
        raise PolicyUnsatisfied(
            f"{len(best)} matching endorsements of {policy.required} required ({len(ok)}/{len(responses)} succeeded)"
        )
    return TransactionEnvelope(
        proposal.tx_id,
        proposal,
        best[0].read_set,
        best[0].write_set,
        tuple(r.signature for r in best),
    )


def endorse(proposal: Proposal, endorsers: Sequence[Endorser], policy: EndorsementPolicy) -> TransactionEnvelope:
    """Execute phase: simulate on every online endorser, then apply the policy.

    No state is modified.
    """
    online = [e for e in endorsers if e.online]
    if online and not check_client_signature(online[0].state, proposal):
        raise BadClientSignature(f"proposal from {proposal.submitter} does not verify")
    return assemble(proposal, [endorse_one(e, proposal) for e in online], policy)


# --- order ------------------------------------------------------------------


class OrderingService:
    """Single-node FIFO orderer for one channel.

    Blocks are cut when ``max_block_txs`` envelopes are pending or when the
    oldest pending envelope has waited ``max_wait_ms``, whichever comes first.
    """

    def __init__(
        self,
        channel_id: str,
        credential: Credential,
        config: OrderingConfig,
        next_number: int = 1,
        previous_hash: bytes = ZERO_HASH,
        last_timestamp: int = 0,
    ):
        self.channel_id = channel_id
        self.credential = credential
        self.config = config
        self.next_number = next_number
        self.previous_hash = previous_hash
        self.last_timestamp = last_timestamp
        self.pending: list[tuple[TransactionEnvelope, int]] = []
        self.dropped: list[tuple[bytes, str]] = []
        self.received = 0

    @classmethod
    def following(cls, chain: Chain, channel_id: str, credential: Credential, config: OrderingConfig) -> OrderingService:
        """An orderer that continues an existing chain."""
        tip = chain.tip()
        if tip is None:
            raise ValueError("chain has no genesis block")
        return cls(channel_id, credential, config, len(chain), compute_block_hash(tip.header), tip.header.timestamp)

    def _malformed(self, env: TransactionEnvelope) -> str | None:
        if env.channel_id != self.channel_id:
            return f"channel {env.channel_id!r} is not {self.channel_id!r}"
        if env.proposal.tx_id != env.tx_id:
            return "tx_id does not match proposal bytes"
        if env.proposal.signature is None:
            return "unsigned proposal"
        return None

    def enqueue(self, env: TransactionEnvelope, now: int) -> bool:
        """Accept an envelope at simulated/wall time ``now``; malformed ones are dropped and logged."""
        self.received += 1
        reason = self._malformed(env)
        if reason is not None:
            log.warning("orderer %s dropped %s: %s", self.channel_id, env.tx_id.hex()[:16], reason)
            self.dropped.append((env.tx_id, reason))
            return False
        self.pending.append((env, now))
        return True

    def deadline(self) -> int | None:
        """Time at which the current partial batch times out."""
        if not self.pending:
            return None
        return self.pending[0][1] + self.config.max_wait_ms

    def _cut(self, count: int, now: int) -> Block:
        batch = [env for env, _ in self.pending[:count]]
        del self.pending[:count]
        timestamp = max(now, self.last_timestamp)
        header = BlockHeader(self.next_number, self.previous_hash, compute_data_hash(batch), timestamp)
        block = Block(header, tuple(batch), (), sign_header(header, self.credential))
        self.next_number += 1
        self.previous_hash = compute_block_hash(header)
        self.last_timestamp = timestamp
        return block

    def cut_ready(self, now: int) -> list[Block]:
        """Cut every full batch, then the partial batch if its wait has expired."""
        blocks = []
        size = self.config.max_block_txs
        while len(self.pending) >= size:
            blocks.append(self._cut(size, now))
        deadline = self.deadline()
        if deadline is not None and now >= deadline:
            blocks.append(self._cut(len(self.pending), now))
        return blocks

    def flush(self, now: int) -> list[Block]:
        """Cut everything pending regardless of the wait bound."""
        blocks = self.cut_ready(now)
        if self.pending:
            blocks.append(self._cut(len(self.pending), now))
        return blocks


def order(
    pending: Sequence[tuple[TransactionEnvelope, int]],
    config: OrderingConfig,
    orderer: Credential,
    now: int,
    next_number: int = 1,
    previous_hash: bytes = ZERO_HASH,
) -> list[Block]:
    """Order ``(envelope, arrival_ms)`` pairs arriving by ``now`` into unvalidated blocks.

    Full batches are cut as they fill; a trailing partial batch is cut only
    if its oldest envelope has waited ``max_wait_ms`` by ``now``.
    """
    channel = pending[0][0].channel_id if pending else ""
    service = OrderingService(channel, orderer, config, next_number, previous_hash)
    blocks = []
    for env, arrival in sorted(pending, key=lambda p: p[1]):
        deadline = service.deadline()
        if deadline is not None and arrival >= deadline:
            blocks += service.cut_ready(deadline)
        service.enqueue(env, arrival)
        blocks += service.cut_ready(arrival)
    blocks += service.cut_ready(now)
    return blocks


# --- validate / commit --------------------------------------------------------


class _BlockView:
    """World state overlaid with the writes of earlier VALID txs in the block."""

    def __init__(self, state: WorldState, number: int):
        self.state = state
        self.number = number
        self.versions: dict[str, tuple[int, int]] = {}

    def version(self, key: str):
        if key in self.versions:
            return self.versions[key]
        return self.state.version(key)

    def public_key(self, participant_id: str) -> bytes | None:
        return self.state.public_key(participant_id)


def _signed_by(view: _BlockView, sig: Signature | None, message: bytes) -> bool:
    if sig is None:
        return False
    key = view.public_key(sig.signer_id)
    return key is not None and verify_with_key(key, sig, message)


def validate_transaction(tx: TransactionEnvelope, view: _BlockView, policy: EndorsementPolicy) -> str:
    if tx.proposal.tx_id != tx.tx_id or not _signed_by(view, tx.proposal.signature, tx.proposal.body()):
        return BAD_SIGNATURE
    if tx.proposal.function in CONFIG_FUNCTIONS:
        submitter = view.state.participant(tx.proposal.submitter)
        if submitter is None or submitter.role != ROLE_ORDERER:
            return POLICY_FAIL
        if tx.proposal.function != FN_CONFIG_UPDATE or any(
            not k.startswith(PARTICIPANT_PREFIX) for k, _ in tx.write_set
        ):
            return POLICY_FAIL
    else:
        if tx.proposal.function != chaincode.FN_APPEND or any(
            not k.startswith(chaincode.ASSET_PREFIX) for k, _ in tx.write_set
        ):
            return POLICY_FAIL
        message = tx.rw_message()
        endorsed = set()
        for sig in tx.endorsements:
            if not _signed_by(view, sig, message):
                return BAD_SIGNATURE
            if sig.signer_id in policy.endorsers:
                endorsed.add(sig.signer_id)
        if len(endorsed) < policy.required:
            return POLICY_FAIL
    for key, version in tx.read_set:
        if view.version(key) != version:
            return MVCC_CONFLICT
    return VALID


def validate(block: Block, state: WorldState, policy: EndorsementPolicy) -> Block:
    """Flag each transaction VALID or with the reason it is invalid.

    Later transactions in the block see the versions written by earlier VALID
    ones, so of two appends of the same asset only the first survives.
    """
    view = _BlockView(state, block.number)
    flags = []
    for i, tx in enumerate(block.transactions):
        flag = validate_transaction(tx, view, policy)
        if flag == VALID:
            for key, _ in tx.write_set:
                view.versions[key] = (block.number, i)
        flags.append(flag)
    return block.with_flags(flags)


class Ledger:
    """A chain plus its incrementally maintained world state.

    Commits are serialized; readers holding ``lock`` see either the pre-block
    or the post-block state, never a partial block.
    """

    def __init__(self, chain: Chain, state: WorldState | None = None):
        self.chain = chain
        self.state = state if state is not None else WorldState()
        self.lock = threading.RLock()

    def snapshot(self) -> WorldState:
        with self.lock:
            return self.state.copy()


def commit(block: Block, ledger: Ledger, execute=None) -> Ledger:
    """Persist ``block`` (invalid transactions included) and apply VALID writes."""
    if len(block.validity_flags) != len(block.transactions):
        raise ValueError("commit requires a validated block")
    with ledger.lock:
        staged = ledger.state.copy()
        apply_block(staged, block, execute)
        ledger.chain.append(block)
        ledger.state.entries = staged.entries
    return ledger


# --- single-process driver ------------------------------------------------------


@dataclass(frozen=True)
class SubmitOutcome:
    tx_id: bytes
    status: str  # a validity flag, or the name of the endorsement-time error
    error: str = ""

    @property
    def committed(self) -> bool:
        return self.status == VALID


def wall_clock_ms() -> int:
    return time.time_ns() // 1_000_000


@dataclass
class Gateway:
    """Embedded network for one channel: endorsers, orderer and a committing ledger.

    Every endorser shares the committed state of ``ledger``; this is the
    single-process deployment used by the CLI and by ingestion.
    """

    config: ChannelConfig
    ledger: Ledger
    orderer: Credential
    peers: dict[str, Credential]
    clock: Callable[[], int] = wall_clock_ms
    rng: random.Random | None = None
    _orderer: OrderingService = field(init=False, repr=False)

    def __post_init__(self):
        self._orderer = OrderingService.following(
            self.ledger.chain, self.config.channel_id, self.orderer, self.config.ordering
        )

    @property
    def channel_id(self) -> str:
        return self.config.channel_id

    def endorsers(self) -> list[Endorser]:
        return [
            Endorser(pid, self.peers[pid], self.ledger.state)
            for pid in self.config.policy.endorsers
            if pid in self.peers
        ]

    def _commit_blocks(self, blocks: Iterable[Block]) -> dict[bytes, str]:
        flags = {}
        for block in blocks:
            with self.ledger.lock:
                checked = validate(block, self.ledger.state, self.config.policy)
                commit(checked, self.ledger)
            for tx, flag in zip(checked.transactions, checked.validity_flags):
                flags.setdefault(tx.tx_id, flag)
        return flags

    def submit(self, proposals: Sequence[Proposal]) -> list[SubmitOutcome]:
        """Endorse, order, validate and commit a batch, preserving its order."""
        outcomes: list[SubmitOutcome | None] = []
        endorsers = self.endorsers()
        for proposal in proposals:
            try:
                env = endorse(proposal, endorsers, self.config.policy)
            except (ChaincodeError, PolicyUnsatisfied, BadClientSignature) as exc:
                outcomes.append(SubmitOutcome(proposal.tx_id, type(exc).__name__, str(exc)))
                continue
            if not self._orderer.enqueue(env, self.clock()):
                outcomes.append(SubmitOutcome(proposal.tx_id, ChannelMismatch.__name__, self._orderer.dropped[-1][1]))
                continue
            outcomes.append(None)
        flags = self._commit_blocks(self._orderer.flush(self.clock()))
        return [
            o if o is not None else SubmitOutcome(p.tx_id, flags[p.tx_id])
            for p, o in zip(proposals, outcomes)
        ]

    def register(self, record: ParticipantRecord) -> str:
        """Write a participant record through a configuration transaction."""
        env = registration_envelope(self.channel_id, record, self.orderer, self.rng)
        self._orderer.enqueue(env, self.clock())
        return self._commit_blocks(self._orderer.flush(self.clock()))[env.tx_id]

    def query(self, caller: str, query: chaincode.QuerySpec) -> list[chaincode.WebLogData]:
        with self.ledger.lock:
            return chaincode.dispatch(chaincode.FN_SELECT, query.to_canonical(), self.ledger.state, caller)


def sequential_oracle(chain: Chain) -> WorldState:
    """Re-execute VALID appends one at a time against a single store.

    Independent of validation: it trusts only the flags and the chaincode.
    """
    state = WorldState()
    for block in chain:
        for i, (tx, flag) in enumerate(zip(block.transactions, block.validity_flags)):
            if flag != VALID:
                continue
            if tx.proposal.function in CONFIG_FUNCTIONS:
                writes = tx.write_set
            else:
                _, writes = chaincode.dispatch(tx.proposal.function, tx.proposal.args, state, tx.proposal.submitter)
            state.apply(writes, (block.number, i))
    return state


def winners_by_key(chain: Chain) -> dict[str, list[tuple[int, int, str]]]:
    """For every asset key: (block, index, flag) of every append targeting it, in total order."""
    out: dict[str, list[tuple[int, int, str]]] = {}
    for block in chain:
        for i, (tx, flag) in enumerate(zip(block.transactions, block.validity_flags)):
            if tx.proposal.function == chaincode.FN_APPEND:
                try:
                    asset = chaincode.WebLogData.from_canonical(tx.proposal.args["data"])
                except (KeyError, DecodeError):
                    continue
                out.setdefault(asset.key, []).append((block.number, i, flag))
    return out


def flag_counts(chain: Chain, skip_config: bool = True) -> Counter:
    counts: Counter = Counter()
    for block in chain:
        for tx, flag in zip(block.transactions, block.validity_flags):
            if skip_config and tx.proposal.function in CONFIG_FUNCTIONS:
                continue
            counts[flag] += 1
    return counts
