"""Curated Combined Log Format lines with hand-worked expected fields.

Each valid case gives the UTC instant as an ISO string (converted by hand
from the local time and offset in the line).  Each malformed case gives a
fragment of the expected error reason.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass


@dataclass(frozen=True)
class Case:
    line: str
    expect: dict | None = None
    error: str | None = None
    strict: bool = False

    def epoch_ms(self) -> int:
        when = dt.datetime.fromisoformat(self.expect["utc"]).replace(tzinfo=dt.timezone.utc)
        return int(when.timestamp()) * 1000


def ok(line, ip, url, status, referer, ua, utc, strict=False):
    return Case(line, dict(ip=ip, url=url, returnCode=status, referer=referer, userAgent=ua, utc=utc), strict=strict)


def bad(line, error, strict=False):
    return Case(line, error=error, strict=strict)


T = "[01/Jan/2024:00:00:00 +0000]"
TAIL = '200 12 "-" "ua"'

VALID = [
    ok(r'127.0.0.1 - frank [10/Oct/2000:13:55:36 -0700] "GET /apache_pb.gif HTTP/1.0" 200 2326 "http://www.example.com/start.html" "Mozilla/4.08 [en] (Win98; I ;Nav)"',
       "127.0.0.1", "/apache_pb.gif", 200, "http://www.example.com/start.html", "Mozilla/4.08 [en] (Win98; I ;Nav)", "2000-10-10T20:55:36"),
    ok(r'192.168.1.20 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 612 "-" "curl/8.4.0"',
       "192.168.1.20", "/", 200, "", "curl/8.4.0", "2024-01-01T00:00:00"),
    ok(r'10.0.0.5 - - [31/Dec/2023:23:59:59 +0000] "POST /api/v1/orders HTTP/2.0" 201 45 "https://shop.example.com/cart" "Mozilla/5.0 (X11; Linux x86_64)"',
       "10.0.0.5", "/api/v1/orders", 201, "https://shop.example.com/cart", "Mozilla/5.0 (X11; Linux x86_64)", "2023-12-31T23:59:59"),
    ok(r'203.0.113.9 - - [15/Aug/2022:10:30:00 +0530] "GET /index.html HTTP/1.1" 304 - "-" "Googlebot/2.1"',
       "203.0.113.9", "/index.html", 304, "", "Googlebot/2.1", "2022-08-15T05:00:00"),
    ok(r'198.51.100.7 - - [28/Feb/2021:20:15:00 -0800] "GET /feed HTTP/1.1" 200 1024 "-" "Feedly/1.0"',
       "198.51.100.7", "/feed", 200, "", "Feedly/1.0", "2021-03-01T04:15:00"),
    ok(r'198.51.100.8 - - [29/Feb/2020:12:00:00 +0000] "GET /leap HTTP/1.1" 200 1 "-" "ua"',
       "198.51.100.8", "/leap", 200, "", "ua", "2020-02-29T12:00:00"),
    ok(r'2001:db8::1 - - [05/May/2019:08:00:00 +0000] "GET /v6 HTTP/1.1" 200 10 "-" "ua6"',
       "2001:db8::1", "/v6", 200, "", "ua6", "2019-05-05T08:00:00"),
    ok(r'::1 - - [05/May/2019:08:00:01 +0000] "GET /local HTTP/1.1" 200 10 "-" "ua"',
       "::1", "/local", 200, "", "ua", "2019-05-05T08:00:01"),
    ok(r'10.1.1.1 - - [01/Jan/2024:00:00:00 +0000] "GET /search?q=a+b&lang=en HTTP/1.1" 200 5 "-" "ua"',
       "10.1.1.1", "/search?q=a+b&lang=en", 200, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.1.2 - - [01/Jan/2024:00:00:00 +0000] "GET /old" 200 5 "-" "ua"',
       "10.1.1.2", "/old", 200, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.1.3 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "Mozilla \"quoted\" agent"',
       "10.1.1.3", "/", 200, "", 'Mozilla "quoted" agent', "2024-01-01T00:00:00"),
    ok(r'10.1.1.4 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "http://x/\\path" "ua"',
       "10.1.1.4", "/", 200, "http://x/\\path", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.1.5 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "bad\x22agent"',
       "10.1.1.5", "/", 200, "", 'bad"agent', "2024-01-01T00:00:00"),
    ok(r'10.1.1.6 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "caf\xC3\xA9"',
       "10.1.1.6", "/", 200, "", "café", "2024-01-01T00:00:00"),
    ok(r'10.1.1.7 - - [01/Jan/2024:00:00:00 +0000] "GET /a\"b HTTP/1.1" 200 5 "-" "ua"',
       "10.1.1.7", '/a"b', 200, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.1.8 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" ""',
       "10.1.1.8", "/", 200, "", "", "2024-01-01T00:00:00"),
    ok(r'10.1.1.9 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "" "ua"',
       "10.1.1.9", "/", 200, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.2.1 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 599 5 "-" "ua"',
       "10.1.2.1", "/", 599, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.2.2 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 100 0 "-" "ua"',
       "10.1.2.2", "/", 100, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.2.3 ident42 alice [01/Jan/2024:00:00:00 +0000] "GET /private HTTP/1.1" 401 0 "-" "ua"',
       "10.1.2.3", "/private", 401, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.2.4  -  - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "ua"',
       "10.1.2.4", "/", 200, "", "ua", "2024-01-01T00:00:00"),
    ok('10.1.2.5 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "ua"\r\n',
       "10.1.2.5", "/", 200, "", "ua", "2024-01-01T00:00:00"),
    ok('10.1.2.6 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "ua"   ',
       "10.1.2.6", "/", 200, "", "ua", "2024-01-01T00:00:00"),
    ok('10.1.2.7 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "Mozilla/5.0 ✓ 日本"',
       "10.1.2.7", "/", 200, "", "Mozilla/5.0 ✓ 日本", "2024-01-01T00:00:00"),
    ok(r'10.1.2.8 - - [01/Jan/1970:00:00:00 +0000] "GET /epoch HTTP/1.0" 200 5 "-" "ua"',
       "10.1.2.8", "/epoch", 200, "", "ua", "1970-01-01T00:00:00"),
    ok(r'10.1.2.9 - - [31/Dec/9999:23:59:59 +0000] "GET /end HTTP/1.1" 200 5 "-" "ua"',
       "10.1.2.9", "/end", 200, "", "ua", "9999-12-31T23:59:59"),
    ok(r'10.1.3.1 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "a\tb\nc\rd"',
       "10.1.3.1", "/", 200, "", "a\tb\nc\rd", "2024-01-01T00:00:00"),
    ok(r'10.1.3.2 - - [01/Jan/2024:00:00:00 +0000] "OPTIONS * HTTP/1.1" 204 0 "-" "ua"',
       "10.1.3.2", "*", 204, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.3.3 - - [01/Jan/2024:00:00:00 +0000] "CONNECT example.com:443 HTTP/1.1" 200 0 "-" "ua"',
       "10.1.3.3", "example.com:443", 200, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.3.4 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "https://x.example/a b" "ua"',
       "10.1.3.4", "/", 200, "https://x.example/a b", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.3.5 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "keep\qthis"',
       "10.1.3.5", "/", 200, "", "keep\\qthis", "2024-01-01T00:00:00"),
    ok(r'10.1.3.6 - - [01/Jan/2024:00:00:00 +0000] "GET /missing HTTP/1.1" 404 - "-" "ua"',
       "10.1.3.6", "/missing", 404, "", "ua", "2024-01-01T00:00:00"),
    ok(r'10.1.3.7 - - [01/Jan/2024:06:00:00 -0000] "GET / HTTP/1.1" 200 5 "-" "ua"',
       "10.1.3.7", "/", 200, "", "ua", "2024-01-01T06:00:00"),
    ok(r'10.1.3.8 - - [01/Jan/2022:14:00:00 +1400] "GET / HTTP/1.1" 200 5 "-" "ua"',
       "10.1.3.8", "/", 200, "", "ua", "2022-01-01T00:00:00"),
    ok(r'10.1.3.9 - - [09/Sep/2009:09:09:09 +0000] "HEAD /status HTTP/1.1" 500 0 "-" "monitor/1.0"',
       "10.1.3.9", "/status", 500, "", "monitor/1.0", "2009-09-09T09:09:09"),
    ok(r'10.1.4.1 - - [01/Mar/2024:00:30:00 +0100] "GET / HTTP/1.1" 200 5 "-" "ua"',
       "10.1.4.1", "/", 200, "", "ua", "2024-02-29T23:30:00"),
    ok(r'10.1.4.2 - - [01/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" 200 5 "-" "plain\\agent"',
       "10.1.4.2", "/", 200, "", "plain\\\\agent", "2024-01-01T00:00:00", strict=True),
]

MALFORMED = [
    bad("garbage", "invalid address"),
    bad("", "missing host"),
    bad(f'300.1.1.1 - - {T} "GET / HTTP/1.1" {TAIL}', "invalid address"),
    bad(f'example.com - - {T} "GET / HTTP/1.1" {TAIL}', "invalid address"),
    bad(f'1.1.1.1 - - 01/Jan/2024:00:00:00 +0000 "GET / HTTP/1.1" {TAIL}', "bad bracket"),
    bad(f'1.1.1.1 - - [01/Jan/2024:00:00:00 +0000 "GET / HTTP/1.1" {TAIL}', "bad bracket"),
    bad(f'1.1.1.1 - - [01/Foo/2024:00:00:00 +0000] "GET / HTTP/1.1" {TAIL}', "invalid date"),
    bad(f'1.1.1.1 - - [32/Jan/2024:00:00:00 +0000] "GET / HTTP/1.1" {TAIL}', "invalid date"),
    bad(f'1.1.1.1 - - [29/Feb/2021:00:00:00 +0000] "GET / HTTP/1.1" {TAIL}', "invalid date"),
    bad(f'1.1.1.1 - - [01/Jan/2024:00:00:00] "GET / HTTP/1.1" {TAIL}', "invalid date"),
    bad(f'1.1.1.1 - - [01/Jan/2024:24:00:00 +0000] "GET / HTTP/1.1" {TAIL}', "invalid date"),
    bad(f'1.1.1.1 - - [01/Jan/2024:00:00:00 +2400] "GET / HTTP/1.1" {TAIL}', "invalid timezone"),
    bad(f'1.1.1.1 - - [01/Jan/1970:00:00:00 +0100] "GET / HTTP/1.1" {TAIL}', "outside 1970..9999"),
    bad(f'1.1.1.1 - - [2024-01-01T00:00:00Z] "GET / HTTP/1.1" {TAIL}', "invalid date"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 12 "-" "Mozilla', "unbalanced quotes"),
    bad(f'1.1.1.1 - - {T} "GET {TAIL}', "malformed request"),
    bad(f'1.1.1.1 - - {T} "GET" {TAIL}', "malformed request"),
    bad(f'1.1.1.1 - - {T} "GET /a b HTTP/1.1" {TAIL}', "malformed request"),
    bad(f'1.1.1.1 - - {T} "-" 400 0 "-" "-"', "malformed request"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" abc 12 "-" "ua"', "non-numeric status"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 600 12 "-" "ua"', "outside 100-599"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 099 12 "-" "ua"', "outside 100-599"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 2²0 12 "-" "ua"', "non-numeric status"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 x12 "-" "ua"', "non-numeric byte count"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 12 "-"', "expected a space"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 12', "expected a space"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 12 "-" "ua" extra', "unexpected trailing data"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 12 - "ua"', "expected '\"' to open referer"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 12 "-" "\\xFF"', "not UTF-8"),
    bad(f'1.1.1.1 - - {T} "GET / HTTP/1.1" 200 12 "-" "a \\"b\\" c"', "unexpected trailing data", strict=True),
]

CASES = VALID + MALFORMED
