"""Hash-chained block storage, chain verification and world-state replay.

Block file layout: a sequence of records, each a 4-byte big-endian length
followed by the canonical bytes of one block.  Block ``n`` is record ``n``.
Hashes are computed over exactly the canonical bytes, so the file is the
ground truth and in-memory objects are a decoded view of it.
"""

from __future__ import annotations

import logging
import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from . import codec
from .codec import ZERO_HASH
from .envelope import TransactionEnvelope, Version, WriteItem
from .errors import (
    ChainLinkMismatch,
    ChainNotVerified,
    DataHashMismatch,
    DecodeError,
    NonSequentialNumber,
    NotFound,
)
from .identity import ROLE_ORDERER, ParticipantRecord, Signature, verify_with_key

log = logging.getLogger(__name__)

VALID = "VALID"
POLICY_FAIL = "POLICY_FAIL"
MVCC_CONFLICT = "MVCC_CONFLICT"
BAD_SIGNATURE = "BAD_SIGNATURE"
EXECUTION_FAILED = "EXECUTION_FAILED"  # order-execute baseline only
VALIDITY_CODES = (VALID, POLICY_FAIL, MVCC_CONFLICT, BAD_SIGNATURE, EXECUTION_FAILED)

BROKEN_LINK = "BROKEN_LINK"
DATA_HASH_MISMATCH = "DATA_HASH_MISMATCH"
NONSEQUENTIAL_NUMBER = "NONSEQUENTIAL_NUMBER"
FAILURE_KINDS = (BROKEN_LINK, DATA_HASH_MISMATCH, BAD_SIGNATURE, NONSEQUENTIAL_NUMBER)

PARTICIPANT_PREFIX = "participant:"
LENGTH = struct.Struct(">I")


@dataclass(frozen=True)
class BlockHeader:
    number: int
    previous_hash: bytes
    data_hash: bytes
    timestamp: int  # UTC ms, assigned by the orderer

    def to_canonical(self) -> dict:
        return {
            "block_number": self.number,
            "previous_hash": self.previous_hash.hex(),
            "data_hash": self.data_hash.hex(),
            "timestamp": self.timestamp,
        }

    def encode(self) -> bytes:
        return codec.encode(self.to_canonical())

    @classmethod
    def from_canonical(cls, obj) -> BlockHeader:
        obj = codec.fields(obj, ("block_number", "previous_hash", "data_hash", "timestamp"))
        return cls(
            codec.integer(obj["block_number"], 0),
            codec.hexbytes(obj["previous_hash"], 32),
            codec.hexbytes(obj["data_hash"], 32),
            codec.integer(obj["timestamp"], 0),
        )


def compute_block_hash(header: BlockHeader) -> bytes:
    return codec.sha256(header.encode())


def compute_data_hash(transactions: Iterable[TransactionEnvelope]) -> bytes:
    return codec.sha256(codec.encode([tx.to_canonical() for tx in transactions]))


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[TransactionEnvelope, ...]
    validity_flags: tuple[str, ...] = ()
    orderer_signature: Signature | None = None

    @property
    def number(self) -> int:
        return self.header.number

    def with_flags(self, flags: Sequence[str]) -> Block:
        return Block(self.header, self.transactions, tuple(flags), self.orderer_signature)

    def to_canonical(self) -> dict:
        sig = self.orderer_signature
        return {
            "header": self.header.to_canonical(),
            "transactions": [tx.to_canonical() for tx in self.transactions],
            "validity_flags": list(self.validity_flags),
            "orderer_signature": None if sig is None else sig.to_canonical(),
        }

    def encode(self) -> bytes:
        return codec.encode(self.to_canonical())

    @classmethod
    def decode(cls, data: bytes) -> Block:
        obj = codec.fields(
            codec.decode(data), ("header", "transactions", "validity_flags", "orderer_signature")
        )
        if not isinstance(obj["transactions"], list) or not isinstance(obj["validity_flags"], list):
            raise DecodeError("transactions and validity_flags must be lists")
        flags = tuple(obj["validity_flags"])
        if any(f not in VALIDITY_CODES for f in flags):
            raise DecodeError(f"unknown validity flag in {flags}")
        txs = tuple(TransactionEnvelope.from_canonical(t) for t in obj["transactions"])
        if flags and len(flags) != len(txs):
            raise DecodeError("validity_flags length differs from transactions")
        sig = obj["orderer_signature"]
        return cls(
            BlockHeader.from_canonical(obj["header"]),
            txs,
            flags,
            None if sig is None else Signature.from_canonical(sig),
        )


def header_signature_message(header: BlockHeader) -> bytes:
    return compute_block_hash(header)


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    first_bad_block: int | None = None
    failure_kind: str | None = None
    detail: str = ""

    def __post_init__(self):
        if self.ok != (self.first_bad_block is None):
            raise ValueError("ok must be true iff first_bad_block is absent")


def split_records(data: bytes) -> list[bytes]:
    """Split block-file bytes into records. A truncated tail becomes one short record."""
    records = []
    pos = 0
    while pos < len(data):
        if pos + LENGTH.size > len(data):
            records.append(data[pos:])
            break
        (n,) = LENGTH.unpack_from(data, pos)
        start = pos + LENGTH.size
        records.append(data[start : start + n])
        pos = start + n
    return records


def frame(record: bytes) -> bytes:
    return LENGTH.pack(len(record)) + record


class Chain:
    """Append-only sequence of block records, optionally backed by a block file.

    One writer at a time; readers only ever see whole, appended records.
    """

    def __init__(self, records: Iterable[bytes] = (), path: str | os.PathLike | None = None):
        self._records: list[bytes] = list(records)
        self._blocks: dict[int, Block] = {}
        self._tx_index: dict[bytes, tuple[int, int]] = {}
        self._indexed_upto = 0
        self._lock = threading.RLock()
        self.path = Path(path) if path is not None else None

    @classmethod
    def open(cls, path: str | os.PathLike) -> Chain:
        """Load a block file without decoding it; a missing file is an empty chain."""
        p = Path(path)
        data = p.read_bytes() if p.exists() else b""
        return cls(split_records(data), p)

    @classmethod
    def from_bytes(cls, data: bytes) -> Chain:
        return cls(split_records(data))

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[bytes]:
        with self._lock:
            return list(self._records)

    def record(self, number: int) -> bytes:
        return self._records[number]

    def to_bytes(self) -> bytes:
        return b"".join(frame(r) for r in self.records())

    def digest(self) -> bytes:
        """SHA-256 over the whole block file; equal digests mean byte-identical chains."""
        return codec.sha256(self.to_bytes())

    def block(self, number: int) -> Block:
        cached = self._blocks.get(number)
        if cached is None:
            if not 0 <= number < len(self._records):
                raise NotFound(f"block {number}")
            cached = Block.decode(self._records[number])
            self._blocks[number] = cached
        return cached

    def __iter__(self) -> Iterator[Block]:
        for n in range(len(self)):
            yield self.block(n)

    def tip(self) -> Block | None:
        return self.block(len(self) - 1) if self._records else None

    def tip_hash(self) -> bytes | None:
        tip = self.tip()
        return None if tip is None else compute_block_hash(tip.header)

    def append(self, block: Block) -> None:
        with self._lock:
            expected = len(self._records)
            if block.number != expected:
                raise NonSequentialNumber(f"expected block {expected}, got {block.number}")
            prev = ZERO_HASH if expected == 0 else compute_block_hash(self.block(expected - 1).header)
            if block.header.previous_hash != prev:
                raise ChainLinkMismatch(f"block {block.number} does not link to block {expected - 1}")
            if compute_data_hash(block.transactions) != block.header.data_hash:
                raise DataHashMismatch(f"block {block.number} data_hash does not match its transactions")
            if len(block.validity_flags) != len(block.transactions):
                raise ValueError("validity_flags length must equal transactions length")
            record = block.encode()
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "ab") as fh:
                    fh.write(frame(record))
                    fh.flush()
            self._records.append(record)
            self._blocks[block.number] = block

    def _index(self) -> None:
        with self._lock:
            for n in range(self._indexed_upto, len(self._records)):
                for i, tx in enumerate(self.block(n).transactions):
                    self._tx_index.setdefault(tx.tx_id, (n, i))
            self._indexed_upto = len(self._records)

    def find_transaction(self, tx_id: bytes) -> tuple[Block, int, TransactionEnvelope]:
        self._index()
        try:
            n, i = self._tx_index[tx_id]
        except KeyError:
            raise NotFound(f"transaction {tx_id.hex()}") from None
        block = self.block(n)
        return block, i, block.transactions[i]


def append_block(chain: Chain, block: Block) -> Chain:
    chain.append(block)
    return chain


def get_block(chain: Chain, block_number: int) -> Block:
    return chain.block(block_number)


def get_transaction(chain: Chain, tx_id: bytes) -> tuple[Block, int, TransactionEnvelope]:
    return chain.find_transaction(tx_id)


class _ChainKeys:
    """Public keys learned while walking a chain (from VALID participant writes)."""

    def __init__(self):
        self.records: dict[str, ParticipantRecord] = {}

    def public_key(self, participant_id: str) -> bytes | None:
        rec = self.records.get(participant_id)
        return None if rec is None else rec.public_key

    def learn(self, write_set: Iterable[WriteItem]) -> None:
        for key, value in write_set:
            if key.startswith(PARTICIPANT_PREFIX):
                try:
                    rec = ParticipantRecord.decode(value)
                except DecodeError:
                    continue
                self.records.setdefault(rec.participant_id, rec)


def _signature_ok(keys: _ChainKeys, sig: Signature | None, message: bytes) -> bool:
    if sig is None:
        return False
    key = keys.public_key(sig.signer_id)
    return key is not None and verify_with_key(key, sig, message)


def transaction_signatures_ok(keys, tx: TransactionEnvelope) -> bool:
    """tx_id binding, client signature and every endorsement signature."""
    if tx.proposal.tx_id != tx.tx_id:
        return False
    if not _signature_ok(keys, tx.proposal.signature, tx.proposal.body()):
        return False
    message = tx.rw_message()
    return all(_signature_ok(keys, e, message) for e in tx.endorsements)


def _as_records(source) -> list[bytes]:
    if isinstance(source, Chain):
        return source.records()
    if isinstance(source, (bytes, bytearray, memoryview)):
        return split_records(bytes(source))
    if isinstance(source, (str, os.PathLike)):
        return split_records(Path(source).read_bytes())
    return list(source)


def verify_chain(source) -> VerificationReport:
    """Check every record: canonical form, sequence number, link, data hash, signatures.

    ``source`` may be a :class:`Chain`, raw block-file bytes, a path, or a list
    of records.  Keys are learned from the chain itself (the genesis block
    registers the orderer and peers), so no external registry is needed.
    """
    keys = _ChainKeys()
    prev_hash = ZERO_HASH
    for n, record in enumerate(_as_records(source)):

        def bad(kind: str, detail: str) -> VerificationReport:
            return VerificationReport(False, n, kind, detail)

        try:
            block = Block.decode(record)
        except DecodeError as exc:
            return bad(DATA_HASH_MISMATCH, f"record is not a canonical block: {exc}")
        header = block.header
        if header.number != n:
            return bad(NONSEQUENTIAL_NUMBER, f"record {n} carries block_number {header.number}")
        if header.previous_hash != prev_hash:
            return bad(BROKEN_LINK, "previous_hash does not match predecessor header")
        if compute_data_hash(block.transactions) != header.data_hash:
            return bad(DATA_HASH_MISMATCH, "data_hash does not match transactions")
        if len(block.validity_flags) != len(block.transactions):
            return bad(DATA_HASH_MISMATCH, "block was never validated")
        if n == 0:
            for tx in block.transactions:
                keys.learn(tx.write_set)
        sig = block.orderer_signature
        signer = keys.records.get(sig.signer_id) if sig is not None else None
        if signer is None or signer.role != ROLE_ORDERER or not _signature_ok(
            keys, sig, header_signature_message(header)
        ):
            return bad(BAD_SIGNATURE, "orderer signature over header does not verify")
        for i, (tx, flag) in enumerate(zip(block.transactions, block.validity_flags)):
            if flag != VALID:
                continue
            if not transaction_signatures_ok(keys, tx):
                return bad(BAD_SIGNATURE, f"transaction {i} signature does not verify")
            keys.learn(tx.write_set)
        prev_hash = compute_block_hash(header)
    return VerificationReport(True)


class WorldState:
    """Versioned key/value view derived from committed VALID transactions."""

    def __init__(self, entries: dict[str, tuple[bytes, Version]] | None = None):
        self.entries: dict[str, tuple[bytes, Version]] = dict(entries or {})
        self._records: dict[bytes, ParticipantRecord] = {}

    def __eq__(self, other) -> bool:
        return isinstance(other, WorldState) and self.entries == other.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def get(self, key: str) -> bytes | None:
        entry = self.entries.get(key)
        return None if entry is None else entry[0]

    def version(self, key: str) -> Version | None:
        entry = self.entries.get(key)
        return None if entry is None else entry[1]

    def keys(self, prefix: str = "") -> list[str]:
        return [k for k in self.entries if k.startswith(prefix)]

    def items(self, prefix: str = "") -> Iterator[tuple[str, bytes]]:
        for key, (value, _) in self.entries.items():
            if key.startswith(prefix):
                yield key, value

    def participant(self, participant_id: str) -> ParticipantRecord | None:
        raw = self.get(PARTICIPANT_PREFIX + participant_id)
        if raw is None:
            return None
        rec = self._records.get(raw)
        if rec is None:
            rec = self._records[raw] = ParticipantRecord.decode(raw)
        return rec

    def public_key(self, participant_id: str) -> bytes | None:
        rec = self.participant(participant_id)
        return None if rec is None else rec.public_key

    def apply(self, write_set: Iterable[WriteItem], version: Version) -> None:
        for key, value in write_set:
            old = self.entries.get(key)
            if old is not None and not old[1] < version:
                raise ValueError(f"version of {key!r} must increase: {old[1]} -> {version}")
            self.entries[key] = (value, version)

    def copy(self) -> WorldState:
        clone = WorldState(self.entries)
        clone._records = self._records
        return clone

    def to_canonical(self) -> list:
        return [[k, v.hex(), [ver[0], ver[1]]] for k, (v, ver) in sorted(self.entries.items())]

    def digest(self) -> bytes:
        return codec.sha256(codec.encode(self.to_canonical()))


Executor = Callable[[WorldState, TransactionEnvelope], Sequence[WriteItem]]


def apply_block(state: WorldState, block: Block, execute: Executor | None = None) -> None:
    """Apply the write sets of a block's VALID transactions, in order."""
    for i, (tx, flag) in enumerate(zip(block.transactions, block.validity_flags)):
        if flag == VALID:
            writes = tx.write_set if execute is None else execute(state, tx)
            state.apply(writes, (block.number, i))


def replay_world_state(chain: Chain, execute: Executor | None = None, verified: bool = False) -> WorldState:
    """Rebuild world state from genesis.

    ``execute`` recomputes write sets instead of reading them from the
    envelopes; the order-execute baseline stores none.
    """
    if not verified:
        report = verify_chain(chain)
        if not report.ok:
            raise ChainNotVerified(
                f"block {report.first_bad_block}: {report.failure_kind} {report.detail}"
            )
    state = WorldState()
    for block in chain:
        apply_block(state, block, execute)
    return state
