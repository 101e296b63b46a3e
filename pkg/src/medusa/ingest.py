"""Web access-log ingestion (NCSA Combined Log Format).

    host ident authuser [dd/Mon/yyyy:HH:MM:SS +zzzz] "request" status bytes "referer" "user-agent"

``host`` becomes the asset's ip, the request URI its url, and so on; ident,
authuser and bytes are checked and dropped.  Inside quoted fields the
escapes written by Nginx and Apache are understood (``\\"``, ``\\\\``,
``\\xHH``, ``\\n``, ``\\t``, ``\\r``) unless ``strict`` is set, in which case a
quote always ends the field.
"""

from __future__ import annotations

import datetime as dt
import logging
import os
import re
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Protocol, Sequence

from . import codec
from .chaincode import DATETIME_MAX, DATETIME_MIN, WebLogData, derive_asset_id
from .envelope import Proposal
from .errors import FileUnreadable, MedusaError, ParseError, SubmissionFailure
from .identity import Credential, check_ip
from .ledger import MVCC_CONFLICT, VALID
from .txflow import SubmitOutcome, append_proposal

log = logging.getLogger(__name__)

__all__ = [
    "IngestReport",
    "RawLogLine",
    "derive_asset_id",
    "format_combined_log_line",
    "ingest_file",
    "ingest_lines",
    "parse_combined_log_line",
]

MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
_MONTH_NUMBER = {name: i + 1 for i, name in enumerate(MONTHS)}
_EPOCH = dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc)
_TIMESTAMP = re.compile(r"(\d{2})/([A-Z][a-z]{2})/(\d{4}):(\d{2}):(\d{2}):(\d{2}) ([+-])(\d{2})(\d{2})\Z")
_SIMPLE_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


@dataclass(frozen=True)
class RawLogLine:
    line: str
    source: str
    line_number: int


class _Scanner:
    def __init__(self, line: str, strict: bool):
        self.line = line
        self.pos = 0
        self.strict = strict

    def fail(self, reason: str, pos: int | None = None):
        raise ParseError(reason, (self.pos if pos is None else pos) + 1)

    def space(self) -> None:
        if self.pos >= len(self.line) or self.line[self.pos] != " ":
            self.fail("expected a space separator")
        while self.pos < len(self.line) and self.line[self.pos] == " ":
            self.pos += 1

    def token(self, what: str) -> str:
        start = self.pos
        end = self.line.find(" ", start)
        end = len(self.line) if end < 0 else end
        if end == start:
            self.fail(f"missing {what}")
        self.pos = end
        return self.line[start:end]

    def bracketed(self) -> tuple[str, int]:
        start = self.pos
        if self.line[start : start + 1] != "[":
            self.fail("bad bracket: expected '[' before the timestamp")
        end = self.line.find("]", start)
        if end < 0:
            self.fail("bad bracket: unterminated timestamp")
        self.pos = end + 1
        return self.line[start + 1 : end], start + 1

    def quoted(self, what: str) -> str:
        start = self.pos
        if self.line[start : start + 1] != '"':
            self.fail(f"expected '\"' to open {what}")
        i = start + 1
        out = bytearray()
        line = self.line
        while True:
            if i >= len(line):
                self.fail(f"unbalanced quotes in {what}", start)
            ch = line[i]
            if ch == '"':
                break
            if ch == "\\" and not self.strict and i + 1 < len(line):
                nxt = line[i + 1]
                if nxt in _SIMPLE_ESCAPES:
                    out += _SIMPLE_ESCAPES[nxt].encode()
                    i += 2
                    continue
                if nxt == "x" and re.fullmatch(r"[0-9A-Fa-f]{2}", line[i + 2 : i + 4]):
                    out.append(int(line[i + 2 : i + 4], 16))
                    i += 4
                    continue
            out += ch.encode("utf-8", "surrogatepass")
            i += 1
        self.pos = i + 1
        try:
            return out.decode("utf-8")
        except UnicodeDecodeError:
            self.fail(f"escaped bytes in {what} are not UTF-8", start)

    def end(self) -> None:
        if self.line[self.pos :].strip(" \t\r\n"):
            self.fail("unexpected trailing data")


def parse_clf_timestamp(text: str, position: int = 1) -> int:
    """``10/Oct/2000:13:55:36 -0700`` -> UTC milliseconds since the epoch."""
    m = _TIMESTAMP.match(text)
    if m is None or m.group(2) not in _MONTH_NUMBER:
        raise ParseError(f"invalid date {text!r}", position)
    day, mon, year, hh, mm, ss, sign, oh, om = m.groups()
    offset = dt.timedelta(hours=int(oh), minutes=int(om))
    if offset >= dt.timedelta(hours=24):
        raise ParseError(f"invalid timezone offset in {text!r}", position)
    try:
        tz = dt.timezone(-offset if sign == "-" else offset)
        when = dt.datetime(int(year), _MONTH_NUMBER[mon], int(day), int(hh), int(mm), int(ss), tzinfo=tz)
    except ValueError as exc:
        raise ParseError(f"invalid date {text!r}: {exc}", position) from None
    ms = (when - _EPOCH) // dt.timedelta(milliseconds=1)
    if not DATETIME_MIN <= ms <= DATETIME_MAX:
        raise ParseError(f"date {text!r} outside 1970..9999", position)
    return ms


def format_clf_timestamp(epoch_ms: int, offset_minutes: int = 0) -> str:
    tz = dt.timezone(dt.timedelta(minutes=offset_minutes))
    when = (_EPOCH + dt.timedelta(milliseconds=epoch_ms)).astimezone(tz)
    sign = "-" if offset_minutes < 0 else "+"
    off = abs(offset_minutes)
    return (
        f"{when.day:02d}/{MONTHS[when.month - 1]}/{when.year:04d}:"
        f"{when.hour:02d}:{when.minute:02d}:{when.second:02d} {sign}{off // 60:02d}{off % 60:02d}"
    )


def parse_combined_log_line(line: str, strict: bool = False) -> WebLogData:
    """Parse one Combined Log Format line into an asset with an empty ``asset_id``.

    Timestamps have one-second resolution, so ``datetime`` is always a whole
    number of seconds in milliseconds.
    """
    line = line.rstrip("\r\n")
    s = _Scanner(line, strict)
    host_pos = s.pos
    host = s.token("host")
    try:
        check_ip(host)
    except ValueError:
        s.fail(f"invalid address {host!r}", host_pos)
    s.space()
    s.token("ident")
    s.space()
    s.token("authuser")
    s.space()
    stamp, stamp_pos = s.bracketed()
    datetime_ms = parse_clf_timestamp(stamp, stamp_pos + 1)
    s.space()
    request_pos = s.pos
    request = s.quoted("request")
    parts = request.split(" ")
    if len(parts) not in (2, 3) or not all(parts):
        s.fail(f"malformed request {request!r}", request_pos)
    url = parts[1]
    s.space()
    status_pos = s.pos
    status = s.token("status")
    if not status.isascii() or not status.isdigit():
        s.fail(f"non-numeric status {status!r}", status_pos)
    return_code = int(status)
    if not 100 <= return_code <= 599:
        s.fail(f"status {return_code} outside 100-599", status_pos)
    s.space()
    size_pos = s.pos
    size = s.token("bytes")
    if size != "-" and not (size.isascii() and size.isdigit()):
        s.fail(f"non-numeric byte count {size!r}", size_pos)
    s.space()
    referer = s.quoted("referer")
    s.space()
    user_agent = s.quoted("user-agent")
    s.end()
    return WebLogData(
        asset_id="",
        url=url,
        referer="" if referer == "-" else referer,
        return_code=return_code,
        user_agent=user_agent,
        datetime=datetime_ms,
        ip=host,
    )


def _escape(value: str) -> str:
    out = []
    for ch in value:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\x{ord(ch):02X}")
        else:
            out.append(ch)
    return "".join(out)


def format_combined_log_line(
    asset: WebLogData,
    method: str = "GET",
    protocol: str = "HTTP/1.1",
    size: int | None = None,
    offset_minutes: int = 0,
) -> str:
    """Render an asset as the log line an Nginx server would write for it."""
    request = f"{method} {asset.url} {protocol}" if protocol else f"{method} {asset.url}"
    return (
        f'{asset.ip} - - [{format_clf_timestamp(asset.datetime, offset_minutes)}] "{_escape(request)}" '
        f'{asset.return_code} {"-" if size is None else size} "{_escape(asset.referer) or "-"}" '
        f'"{_escape(asset.user_agent)}"'
    )


@dataclass
class IngestReport:
    lines_read: int = 0
    parsed_ok: int = 0
    parse_failed: int = 0
    submitted: int = 0
    committed_valid: int = 0
    rejected_duplicates: int = 0
    rejected_other: int = 0
    failures: list[tuple[int, str]] = field(default_factory=list)

    def check(self) -> None:
        assert self.lines_read == self.parsed_ok + self.parse_failed
        assert self.submitted <= self.parsed_ok
        assert self.committed_valid + self.rejected_duplicates + self.rejected_other <= self.submitted

    def to_canonical(self) -> dict:
        obj = asdict(self)
        obj["failures"] = [[n, reason] for n, reason in self.failures]
        return obj

    def encode(self) -> bytes:
        return codec.encode(self.to_canonical())

    def table(self) -> str:
        rows = [(k, v) for k, v in asdict(self).items() if k != "failures"]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k:<{width}}  {v}" for k, v in rows]
        lines += [f"line {n}: {reason}" for n, reason in self.failures]
        return "\n".join(lines) + "\n"


class Client(Protocol):
    channel_id: str

    def submit(self, proposals: Sequence[Proposal]) -> list[SubmitOutcome]: ...


def _tally(report: IngestReport, outcomes: Iterable[SubmitOutcome]) -> None:
    for outcome in outcomes:
        if outcome.status == VALID:
            report.committed_valid += 1
        elif outcome.status in ("DuplicateAsset", MVCC_CONFLICT):
            report.rejected_duplicates += 1
        else:
            report.rejected_other += 1


def ingest_lines(
    lines: Iterable[RawLogLine | bytes | str],
    credential: Credential,
    client: Client,
    batch_size: int = 100,
    strict: bool = False,
    rng=None,
) -> IngestReport:
    """Parse lines and submit them as DataAppend proposals, ``batch_size`` at a time.

    Malformed lines are recorded and skipped.  Duplicate content is refused by
    the chaincode (or by MVCC inside a batch) and counted, never fatal.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    report = IngestReport()
    batch: list[Proposal] = []

    def flush() -> None:
        if not batch:
            return
        try:
            outcomes = client.submit(batch)
        except (MedusaError, OSError) as exc:
            err = SubmissionFailure(f"submitting {len(batch)} proposals failed: {exc}")
            err.report = report
            raise err from exc
        report.submitted += len(batch)
        _tally(report, outcomes)
        batch.clear()

    for number, raw in enumerate(lines, start=1):
        if isinstance(raw, RawLogLine):
            number, raw = raw.line_number, raw.line
        report.lines_read += 1
        try:
            if isinstance(raw, bytes):
                try:
                    raw = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise ParseError("line is not valid UTF-8", exc.start + 1) from None
            parsed = parse_combined_log_line(raw, strict)
        except ParseError as exc:
            report.parse_failed += 1
            report.failures.append((number, str(exc)))
            continue
        report.parsed_ok += 1
        asset = WebLogData(
            derive_asset_id(parsed),
            parsed.url,
            parsed.referer,
            parsed.return_code,
            parsed.user_agent,
            parsed.datetime,
            parsed.ip,
        )
        batch.append(append_proposal(client.channel_id, asset, credential, rng))
        if len(batch) >= batch_size:
            flush()
    flush()
    report.check()
    return report


def _read_lines(path: str | os.PathLike) -> Iterator[bytes]:
    with open(path, "rb") as fh:
        for line in fh:
            yield line.rstrip(b"\r\n")


def ingest_file(
    path: str | os.PathLike,
    credential: Credential,
    client: Client,
    batch_size: int = 100,
    strict: bool = False,
    rng=None,
) -> IngestReport:
    try:
        with open(path, "rb"):
            pass
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    return ingest_lines(_read_lines(path), credential, client, batch_size, strict, rng)
