"""Proposal and transaction-envelope structures and their canonical bytes.

These live apart from :mod:`medusa.txflow` because the ledger stores and
hashes envelopes without needing to know how they were produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Tuple

from . import codec
from .errors import DecodeError
from .identity import Credential, Signature, sign

Version = Tuple[int, int]
"""(block_number, transaction_index) of the write that produced a value."""

ReadItem = Tuple[str, Optional[Version]]
WriteItem = Tuple[str, bytes]

NONCE_BYTES = 8


def version_to_canonical(version: Version | None):
    return None if version is None else [version[0], version[1]]


def version_from_canonical(obj) -> Version | None:
    if obj is None:
        return None
    if not isinstance(obj, list) or len(obj) != 2:
        raise DecodeError(f"bad version {obj!r}")
    return (codec.integer(obj[0], 0), codec.integer(obj[1], 0))


def read_set_to_canonical(read_set) -> list:
    return [[key, version_to_canonical(v)] for key, v in read_set]


def write_set_to_canonical(write_set) -> list:
    return [[key, value.hex()] for key, value in write_set]


def rw_message(tx_id: bytes, read_set, write_set) -> bytes:
    """Bytes an endorser signs: tx_id followed by the encoded read and write sets."""
    return tx_id + codec.encode(read_set_to_canonical(read_set)) + codec.encode(
        write_set_to_canonical(write_set)
    )


@dataclass(frozen=True)
class Proposal:
    channel_id: str
    function: str
    args: dict[str, Any]
    submitter: str
    nonce: bytes
    signature: Signature | None = field(default=None, compare=True)

    def body_canonical(self) -> dict:
        return {
            "channel_id": self.channel_id,
            "function": self.function,
            "args": self.args,
            "submitter": self.submitter,
            "nonce": self.nonce.hex(),
        }

    def body(self) -> bytes:
        return codec.encode(self.body_canonical())

    @property
    def tx_id(self) -> bytes:
        return codec.sha256(self.body())

    def signed(self, credential: Credential) -> Proposal:
        if credential.participant_id != self.submitter:
            raise ValueError("credential does not belong to the submitter")
        return Proposal(
            self.channel_id, self.function, self.args, self.submitter, self.nonce, sign(credential, self.body())
        )

    def to_canonical(self) -> dict:
        obj = self.body_canonical()
        obj["client_signature"] = None if self.signature is None else self.signature.value.hex()
        return obj

    @classmethod
    def from_canonical(cls, obj) -> Proposal:
        obj = codec.fields(obj, ("channel_id", "function", "args", "submitter", "nonce", "client_signature"))
        if not isinstance(obj["args"], dict):
            raise DecodeError("args must be an object")
        submitter = codec.text(obj["submitter"])
        sig = obj["client_signature"]
        return cls(
            channel_id=codec.text(obj["channel_id"]),
            function=codec.text(obj["function"]),
            args=obj["args"],
            submitter=submitter,
            nonce=codec.hexbytes(obj["nonce"], NONCE_BYTES),
            signature=None if sig is None else Signature(submitter, codec.hexbytes(sig, 64)),
        )


@dataclass(frozen=True)
class TransactionEnvelope:
    tx_id: bytes
    proposal: Proposal
    read_set: tuple[ReadItem, ...] = ()
    write_set: tuple[WriteItem, ...] = ()
    endorsements: tuple[Signature, ...] = ()

    @property
    def channel_id(self) -> str:
        return self.proposal.channel_id

    def rw_message(self) -> bytes:
        return rw_message(self.tx_id, self.read_set, self.write_set)

    def to_canonical(self) -> dict:
        return {
            "tx_id": self.tx_id.hex(),
            "proposal": self.proposal.to_canonical(),
            "read_set": read_set_to_canonical(self.read_set),
            "write_set": write_set_to_canonical(self.write_set),
            "endorsements": [e.to_canonical() for e in self.endorsements],
        }

    def encode(self) -> bytes:
        return codec.encode(self.to_canonical())

    @classmethod
    def from_canonical(cls, obj) -> TransactionEnvelope:
        obj = codec.fields(obj, ("tx_id", "proposal", "read_set", "write_set", "endorsements"))
        for name in ("read_set", "write_set", "endorsements"):
            if not isinstance(obj[name], list):
                raise DecodeError(f"{name} must be a list")
        reads = []
        for item in obj["read_set"]:
            if not isinstance(item, list) or len(item) != 2:
                raise DecodeError("bad read item")
            reads.append((codec.text(item[0]), version_from_canonical(item[1])))
        writes = []
        for item in obj["write_set"]:
            if not isinstance(item, list) or len(item) != 2:
                raise DecodeError("bad write item")
            writes.append((codec.text(item[0]), codec.hexbytes(item[1])))
        return cls(
            tx_id=codec.hexbytes(obj["tx_id"], 32),
            proposal=Proposal.from_canonical(obj["proposal"]),
            read_set=tuple(reads),
            write_set=tuple(writes),
            endorsements=tuple(Signature.from_canonical(e) for e in obj["endorsements"]),
        )

    @classmethod
    def decode(cls, data: bytes) -> TransactionEnvelope:
        return cls.from_canonical(codec.decode(data))
