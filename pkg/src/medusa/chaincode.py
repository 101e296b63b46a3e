"""The log contract: the WebLogData asset, DataAppend, and selectWebLogData.

Only two operation families exist.  Assets can be appended once and read
back; nothing can update or delete them.  Execution is a pure function of a
committed state view and the transaction, so every endorser computes the
same read/write sets.
"""

from __future__ import annotations

import enum
import types
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping, Protocol

from . import codec
from .envelope import ReadItem, WriteItem
from .errors import (
    DecodeError,
    DuplicateAsset,
    InvalidAsset,
    InvalidRange,
    UnknownFunction,
    UnregisteredSubmitter,
)
from .identity import ROLE_DATASOURCE, ParticipantRecord, check_ip

ASSET_PREFIX = "weblog:"
FN_APPEND = "DataAppend"
FN_SELECT = "selectWebLogData"

# datetime bounds: 1970-01-01 .. 9999-12-31T23:59:59.999Z
DATETIME_MIN = 0
DATETIME_MAX = 253402300799999

_FIELDS = ("asset_id", "url", "referer", "returnCode", "userAgent", "datetime", "ip")


@dataclass(frozen=True)
class WebLogData:
    asset_id: str
    url: str
    referer: str
    return_code: int
    user_agent: str
    datetime: int  # UTC ms
    ip: str

    def validate(self) -> None:
        rc = self.return_code
        if isinstance(rc, bool) or not isinstance(rc, int) or not 100 <= rc <= 599:
            raise InvalidAsset(f"returnCode {rc!r} outside 100-599")
        if isinstance(self.datetime, bool) or not isinstance(self.datetime, int):
            raise InvalidAsset(f"datetime must be integer ms, got {self.datetime!r}")
        if not DATETIME_MIN <= self.datetime <= DATETIME_MAX:
            raise InvalidAsset(f"datetime {self.datetime} outside 1970..9999")
        try:
            check_ip(self.ip)
        except ValueError as exc:
            raise InvalidAsset(str(exc)) from exc
        for name in ("asset_id", "url", "referer", "user_agent"):
            if not isinstance(getattr(self, name), str):
                raise InvalidAsset(f"{name} must be text")

    @property
    def key(self) -> str:
        return ASSET_PREFIX + self.asset_id

    def to_canonical(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "url": self.url,
            "referer": self.referer,
            "returnCode": self.return_code,
            "userAgent": self.user_agent,
            "datetime": self.datetime,
            "ip": self.ip,
        }

    def encode(self) -> bytes:
        return codec.encode(self.to_canonical())

    @classmethod
    def from_canonical(cls, obj) -> WebLogData:
        obj = codec.fields(obj, _FIELDS)
        return cls(
            asset_id=codec.text(obj["asset_id"]),
            url=codec.text(obj["url"]),
            referer=codec.text(obj["referer"]),
            return_code=codec.integer(obj["returnCode"]),
            user_agent=codec.text(obj["userAgent"]),
            datetime=codec.integer(obj["datetime"]),
            ip=codec.text(obj["ip"]),
        )

    @classmethod
    def decode(cls, data: bytes) -> WebLogData:
        return cls.from_canonical(codec.decode(data))


def derive_asset_id(asset: WebLogData) -> str:
    """Content address: hex of the first 16 bytes of SHA-256 over the id-less asset."""
    return codec.sha256(replace(asset, asset_id="").encode())[:16].hex()


@dataclass(frozen=True)
class DataAppend:
    data: WebLogData
    submitter: str


class StateView(Protocol):
    def get(self, key: str) -> bytes | None: ...

    def version(self, key: str): ...

    def items(self, prefix: str = ""): ...

    def participant(self, participant_id: str) -> ParticipantRecord | None: ...


def _require_datasource(state: StateView, participant_id: str) -> None:
    rec = state.participant(participant_id)
    if rec is None or rec.role != ROLE_DATASOURCE:
        raise UnregisteredSubmitter(participant_id)


def on_data_append(state: StateView, tx: DataAppend) -> tuple[tuple[ReadItem, ...], tuple[WriteItem, ...]]:
    """The append trigger: returns (read set, write set) for a single new asset."""
    _require_datasource(state, tx.submitter)
    tx.data.validate()
    if not tx.data.asset_id:
        raise InvalidAsset("asset_id must be non-empty")
    key = tx.data.key
    if state.get(key) is not None:
        raise DuplicateAsset(tx.data.asset_id)
    return ((key, None),), ((key, tx.data.encode()),)


class FilterKind(enum.Enum):
    ALL = "ALL"
    BY_IP = "BY_IP"
    BY_USER_AGENT = "BY_USER_AGENT"
    BY_DATETIME_RANGE = "BY_DATETIME_RANGE"


@dataclass(frozen=True)
class QuerySpec:
    kind: FilterKind = FilterKind.ALL
    ip: str | None = None
    user_agent: str | None = None
    start: int | None = None  # inclusive
    end: int | None = None  # exclusive

    @classmethod
    def all(cls) -> QuerySpec:
        return cls()

    @classmethod
    def by_ip(cls, ip: str) -> QuerySpec:
        return cls(FilterKind.BY_IP, ip=ip)

    @classmethod
    def by_user_agent(cls, user_agent: str) -> QuerySpec:
        return cls(FilterKind.BY_USER_AGENT, user_agent=user_agent)

    @classmethod
    def by_datetime_range(cls, start: int, end: int) -> QuerySpec:
        return cls(FilterKind.BY_DATETIME_RANGE, start=start, end=end)

    def check(self) -> None:
        if self.kind is FilterKind.BY_DATETIME_RANGE:
            if self.start is None or self.end is None:
                raise InvalidRange("datetime range needs both bounds")
            if self.start > self.end:
                raise InvalidRange(f"from {self.start} > to {self.end}")

    def matches(self, asset: WebLogData) -> bool:
        if self.kind is FilterKind.BY_IP:
            return asset.ip == self.ip
        if self.kind is FilterKind.BY_USER_AGENT:
            return asset.user_agent == self.user_agent
        if self.kind is FilterKind.BY_DATETIME_RANGE:
            return self.start <= asset.datetime < self.end
        return True

    def to_canonical(self) -> dict:
        if self.kind is FilterKind.BY_IP:
            return {"filter": self.kind.value, "ip": self.ip}
        if self.kind is FilterKind.BY_USER_AGENT:
            return {"filter": self.kind.value, "userAgent": self.user_agent}
        if self.kind is FilterKind.BY_DATETIME_RANGE:
            return {"filter": self.kind.value, "from": self.start, "to": self.end}
        return {"filter": self.kind.value}

    @classmethod
    def from_canonical(cls, obj: Mapping[str, Any]) -> QuerySpec:
        try:
            kind = FilterKind(obj.get("filter"))
        except (ValueError, AttributeError) as exc:
            raise DecodeError(f"unknown filter in {obj!r}") from exc
        if kind is FilterKind.BY_IP:
            return cls.by_ip(codec.text(obj.get("ip")))
        if kind is FilterKind.BY_USER_AGENT:
            return cls.by_user_agent(codec.text(obj.get("userAgent")))
        if kind is FilterKind.BY_DATETIME_RANGE:
            return cls.by_datetime_range(codec.integer(obj.get("from")), codec.integer(obj.get("to")))
        return cls.all()


def committed_assets(state: StateView) -> list[WebLogData]:
    return [WebLogData.decode(value) for _, value in state.items(ASSET_PREFIX)]


def select_weblog(state: StateView, query: QuerySpec) -> list[WebLogData]:
    """Every committed asset matching ``query``, ordered by (datetime, asset_id)."""
    query.check()
    hits = [a for a in committed_assets(state) if query.matches(a)]
    hits.sort(key=lambda a: (a.datetime, a.asset_id))
    return hits


def _append_handler(state: StateView, args: Mapping[str, Any], caller: str):
    try:
        data = WebLogData.from_canonical(args["data"])
    except (KeyError, TypeError, DecodeError) as exc:
        raise InvalidAsset(f"malformed DataAppend data: {exc}") from exc
    return on_data_append(state, DataAppend(data, caller))


def _select_handler(state: StateView, args: Mapping[str, Any], caller: str):
    _require_datasource(state, caller)
    return select_weblog(state, QuerySpec.from_canonical(args))


DISPATCH: Mapping[str, Callable[[StateView, Mapping[str, Any], str], Any]] = types.MappingProxyType(
    {FN_APPEND: _append_handler, FN_SELECT: _select_handler}
)


def dispatch(function_name: str, args: Mapping[str, Any], state: StateView, caller: str):
    """Route a chaincode invocation; anything but append or query is refused."""
    handler = DISPATCH.get(function_name)
    if handler is None:
        raise UnknownFunction(function_name)
    return handler(state, args, caller)
