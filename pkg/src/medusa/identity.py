"""Participants, credentials and Ed25519 signatures.

Every actor on the network has a registered identity: DataSources (the owners
of log data) as well as the peers and the orderer that run the pipeline.
Signatures are Ed25519 over the SHA-256 digest of the signed message.
"""

from __future__ import annotations

import hmac
import ipaddress
import os
import random
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from . import codec
from .errors import (
    DecodeError,
    DuplicateParticipant,
    InvalidAddress,
    InvalidPort,
    UnknownSigner,
)

ROLE_DATASOURCE = "datasource"
ROLE_PEER = "peer"
ROLE_ORDERER = "orderer"
ROLES = (ROLE_DATASOURCE, ROLE_PEER, ROLE_ORDERER)

SALT_BYTES = 16


def check_ip(ip: str) -> str:
    try:
        ipaddress.ip_address(ip)
    except (ValueError, TypeError) as exc:
        raise InvalidAddress(f"not an IP address literal: {ip!r}") from exc
    return ip


def password_digest(salt: bytes, password: str) -> bytes:
    return codec.sha256(salt + password.encode("utf-8"))


@dataclass(frozen=True)
class DataSource:
    """The owner, source or sink of audit logs."""

    datasource_id: str
    ip: str
    port: int
    username: str
    url: str
    password_salt: bytes = b""
    password_digest: bytes = b""

    def validate(self) -> None:
        if not self.datasource_id:
            raise ValueError("datasource_id must be non-empty")
        if isinstance(self.port, bool) or not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise InvalidPort(f"port {self.port!r} outside 1-65535")
        check_ip(self.ip)


@dataclass(frozen=True)
class Signature:
    signer_id: str
    value: bytes

    def to_canonical(self) -> dict:
        return {"signer": self.signer_id, "signature": self.value.hex()}

    @classmethod
    def from_canonical(cls, obj) -> Signature:
        obj = codec.fields(obj, ("signer", "signature"))
        return cls(codec.text(obj["signer"]), codec.hexbytes(obj["signature"], 64))


@dataclass(frozen=True)
class Credential:
    participant_id: str
    public_key: bytes
    private_key: bytes = field(repr=False)

    def sign(self, message: bytes) -> Signature:
        return sign(self, message)


@dataclass(frozen=True)
class ParticipantRecord:
    """Public registry entry; this is what gets exported and put on chain."""

    participant_id: str
    role: str
    public_key: bytes
    datasource: DataSource | None = None

    def to_canonical(self) -> dict:
        obj = {"id": self.participant_id, "role": self.role, "public_key": self.public_key.hex()}
        if self.datasource is not None:
            ds = self.datasource
            obj.update(
                ip=ds.ip,
                port=ds.port,
                username=ds.username,
                url=ds.url,
                salt=ds.password_salt.hex(),
                password_digest=ds.password_digest.hex(),
            )
        return obj

    @classmethod
    def from_canonical(cls, obj) -> ParticipantRecord:
        if isinstance(obj, dict) and obj.get("role") == ROLE_DATASOURCE:
            obj = codec.fields(
                obj,
                ("id", "role", "public_key", "ip", "port", "username", "url", "salt", "password_digest"),
            )
            ds = DataSource(
                datasource_id=codec.text(obj["id"]),
                ip=codec.text(obj["ip"]),
                port=codec.integer(obj["port"]),
                username=codec.text(obj["username"]),
                url=codec.text(obj["url"]),
                password_salt=codec.hexbytes(obj["salt"], SALT_BYTES),
                password_digest=codec.hexbytes(obj["password_digest"], 32),
            )
        else:
            obj = codec.fields(obj, ("id", "role", "public_key"))
            if obj["role"] not in ROLES:
                raise DecodeError(f"unknown role {obj['role']!r}")
            ds = None
        return cls(codec.text(obj["id"]), obj["role"], codec.hexbytes(obj["public_key"], 32), ds)

    def encode(self) -> bytes:
        return codec.encode(self.to_canonical())

    @classmethod
    def decode(cls, data: bytes) -> ParticipantRecord:
        return cls.from_canonical(codec.decode(data))


class KeyLookup(Protocol):
    def public_key(self, participant_id: str) -> bytes | None: ...


def _random_bytes(n: int, rng: random.Random | None) -> bytes:
    return os.urandom(n) if rng is None else rng.randbytes(n)


def generate_credential(participant_id: str, rng: random.Random | None = None) -> Credential:
    """Fresh Ed25519 keypair; pass a seeded ``rng`` for reproducible keys."""
    key = Ed25519PrivateKey.from_private_bytes(_random_bytes(32, rng))
    return Credential(participant_id, key.public_key().public_bytes_raw(), key.private_bytes_raw())


def sign(credential: Credential, message: bytes) -> Signature:
    key = Ed25519PrivateKey.from_private_bytes(credential.private_key)
    return Signature(credential.participant_id, key.sign(codec.sha256(message)))


@lru_cache(maxsize=1 << 16)
def _verify_digest(public_key: bytes, digest: bytes, value: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(value, digest)
    except (InvalidSignature, ValueError):
        return False
    return True


def verify_with_key(public_key: bytes, signature: Signature, message: bytes) -> bool:
    return _verify_digest(public_key, codec.sha256(message), signature.value)


def verify(keys: KeyLookup, signature: Signature, message: bytes) -> bool:
    public_key = keys.public_key(signature.signer_id)
    if public_key is None:
        raise UnknownSigner(signature.signer_id)
    return verify_with_key(public_key, signature, message)


class Registry:
    """In-memory participant registry. Never holds plaintext passwords or private keys."""

    def __init__(self, records: Iterable[ParticipantRecord] = ()):
        self._records: dict[str, ParticipantRecord] = {}
        for record in records:
            self.add(record)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, participant_id: str) -> bool:
        return participant_id in self._records

    def __iter__(self):
        return iter(self._records.values())

    def get(self, participant_id: str) -> ParticipantRecord | None:
        return self._records.get(participant_id)

    def public_key(self, participant_id: str) -> bytes | None:
        record = self._records.get(participant_id)
        return None if record is None else record.public_key

    def add(self, record: ParticipantRecord) -> None:
        if record.participant_id in self._records:
            raise DuplicateParticipant(record.participant_id)
        self._records[record.participant_id] = record

    def register_node(self, node_id: str, role: str, rng: random.Random | None = None) -> Credential:
        if role not in (ROLE_PEER, ROLE_ORDERER):
            raise ValueError(f"not a node role: {role!r}")
        if node_id in self._records:
            raise DuplicateParticipant(node_id)
        credential = generate_credential(node_id, rng)
        self.add(ParticipantRecord(node_id, role, credential.public_key))
        return credential

    def register_datasource(
        self, descriptor: DataSource, plaintext_password: str, rng: random.Random | None = None
    ) -> Credential:
        descriptor.validate()
        if descriptor.datasource_id in self._records:
            raise DuplicateParticipant(descriptor.datasource_id)
        salt = _random_bytes(SALT_BYTES, rng)
        stored = replace(
            descriptor,
            password_salt=salt,
            password_digest=password_digest(salt, plaintext_password),
        )
        credential = generate_credential(descriptor.datasource_id, rng)
        self.add(ParticipantRecord(descriptor.datasource_id, ROLE_DATASOURCE, credential.public_key, stored))
        return credential

    def authenticate(self, datasource_id: str, plaintext_password: str) -> bool:
        record = self._records.get(datasource_id)
        if record is None or record.datasource is None:
            return False
        ds = record.datasource
        return hmac.compare_digest(ds.password_digest, password_digest(ds.password_salt, plaintext_password))

    def export(self) -> bytes:
        """One canonical record per line, in registration order."""
        return b"".join(record.encode() + b"\n" for record in self._records.values())

    @classmethod
    def load(cls, data: bytes) -> Registry:
        return cls(ParticipantRecord.decode(line) for line in data.splitlines() if line)


def register_datasource(
    registry: Registry, descriptor: DataSource, plaintext_password: str, rng: random.Random | None = None
) -> Credential:
    return registry.register_datasource(descriptor, plaintext_password, rng)


def authenticate(registry: Registry, datasource_id: str, plaintext_password: str) -> bool:
    return registry.authenticate(datasource_id, plaintext_password)
