"""The ``medusa`` command.

    medusa <channel|datasource|append|ingest|query|verify|block|simulate> [flags]

Exit codes:

    0  success
    1  usage error (bad arguments, unknown participant, failed authentication)
    2  conflict or duplicate (channel exists, participant exists, asset exists)
    3  invalid endorsement policy
    4  ledger verification failed
    5  I/O error, including a concurrent writer holding the data_dir lock

Settings come from ``<data_dir>/config``, then command-line flags, then
``MEDUSA_*`` environment variables, each overriding the previous.  Passwords
are read from ``MEDUSA_PASSWORD`` or an interactive prompt, never argv.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime as dt
import fcntl
import getpass
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Sequence

from . import codec, ingest, netsim, plots
from .chaincode import QuerySpec, WebLogData, derive_asset_id
from .errors import (
    ChaincodeError,
    DecodeError,
    DuplicateAsset,
    DuplicateParticipant,
    FileUnreadable,
    IdentityError,
    InvalidConfig,
    InvalidPolicy,
    InvalidRange,
    NotFound,
    SubmissionFailure,
)
from .identity import ROLE_ORDERER, ROLE_PEER, Credential, DataSource, Registry
from .ledger import MVCC_CONFLICT, VALID, Chain, replay_world_state, verify_chain
from .txflow import (
    ChannelConfig,
    EndorsementPolicy,
    Gateway,
    Ledger,
    OrderingConfig,
    append_proposal,
    commit,
    create_genesis,
    wall_clock_ms,
)

log = logging.getLogger("medusa")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFLICT = 2
EXIT_POLICY = 3
EXIT_VERIFY = 4
EXIT_IO = 5

TABLE = "TABLE"
CANONICAL = "CANONICAL"
ORDERER_ID = "orderer"
DEFAULTS = {"default_channel": "audit", "output_format": TABLE}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class CliConfig:
    data_dir: Path
    default_channel: str
    output_format: str

    @classmethod
    def resolve(cls, args: argparse.Namespace, environ=os.environ) -> CliConfig:
        data_dir = Path(environ.get("MEDUSA_DATA_DIR") or args.data_dir or "medusa-data")
        values = dict(DEFAULTS)
        cfg_path = data_dir / "config"
        if cfg_path.exists():
            try:
                stored = json.loads(cfg_path.read_text(encoding="utf-8"))
            except (OSError, ValueError) as exc:
                raise CliError(f"unreadable config {cfg_path}: {exc}", EXIT_IO) from exc
            values.update({k: v for k, v in stored.items() if k in DEFAULTS})
        if args.channel:
            values["default_channel"] = args.channel
        if args.format:
            values["output_format"] = args.format
        if environ.get("MEDUSA_CHANNEL"):
            values["default_channel"] = environ["MEDUSA_CHANNEL"]
        if environ.get("MEDUSA_FORMAT"):
            values["output_format"] = environ["MEDUSA_FORMAT"].upper()
        if values["output_format"] not in (TABLE, CANONICAL):
            raise CliError("output format must be table or canonical", EXIT_USAGE)
        return cls(data_dir, values["default_channel"], values["output_format"])


class Store:
    """On-disk layout of a data_dir."""

    def __init__(self, config: CliConfig):
        self.config = config
        self.root = config.data_dir

    def ensure(self) -> None:
        try:
            (self.root / "keys").mkdir(parents=True, exist_ok=True)
            (self.root / "channels").mkdir(exist_ok=True)
            cfg = self.root / "config"
            if not cfg.exists():
                cfg.write_bytes(codec.encode(dict(DEFAULTS)) + b"\n")
        except OSError as exc:
            raise CliError(f"cannot initialise {self.root}: {exc}", EXIT_IO) from exc

    @contextlib.contextmanager
    def writer(self) -> Iterator[None]:
        self.ensure()
        with open(self.root / ".lock", "a+") as fh:
            try:
                fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except OSError as exc:
                raise CliError(f"another writer holds {self.root}", EXIT_IO) from exc
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    # registry and keys

    @property
    def registry_path(self) -> Path:
        return self.root / "registry"

    def registry(self) -> Registry:
        try:
            return Registry.load(self.registry_path.read_bytes()) if self.registry_path.exists() else Registry()
        except (OSError, DecodeError) as exc:
            raise CliError(f"unreadable registry: {exc}", EXIT_IO) from exc

    def save_registry(self, registry: Registry) -> None:
        tmp = self.registry_path.with_suffix(".tmp")
        tmp.write_bytes(registry.export())
        tmp.replace(self.registry_path)

    def save_key(self, credential: Credential) -> None:
        path = self.root / "keys" / f"{credential.participant_id}.key"
        body = {
            "id": credential.participant_id,
            "public_key": credential.public_key.hex(),
            "private_key": credential.private_key.hex(),
        }
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "wb") as fh:
            fh.write(codec.encode(body) + b"\n")

    def key(self, participant_id: str) -> Credential:
        path = self.root / "keys" / f"{participant_id}.key"
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise CliError(f"no key for {participant_id!r} in {self.root}", EXIT_USAGE) from None
        except (OSError, ValueError) as exc:
            raise CliError(f"unreadable key {path}: {exc}", EXIT_IO) from exc
        return Credential(obj["id"], bytes.fromhex(obj["public_key"]), bytes.fromhex(obj["private_key"]))

    # channels

    def chain_path(self, channel_id: str) -> Path:
        return self.root / "channels" / channel_id / "blocks"

    def channels(self) -> list[str]:
        base = self.root / "channels"
        return sorted(p.name for p in base.iterdir() if (p / "blocks").exists()) if base.exists() else []

    def open_chain(self, channel_id: str) -> Chain:
        path = self.chain_path(channel_id)
        if not path.exists():
            raise CliError(f"no channel {channel_id!r}", EXIT_USAGE)
        try:
            return Chain.open(path)
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc

    def ledger(self, channel_id: str) -> Ledger:
        chain = self.open_chain(channel_id)
        report = verify_chain(chain)
        if not report.ok:
            raise CliError(
                f"channel {channel_id}: verification failed at block {report.first_bad_block} "
                f"({report.failure_kind})",
                EXIT_VERIFY,
            )
        return Ledger(chain, replay_world_state(chain, verified=True))

    def gateway(self, channel_id: str) -> Gateway:
        ledger = self.ledger(channel_id)
        config = ChannelConfig.from_state(ledger.state)
        peers = {}
        for pid in config.policy.endorsers:
            with contextlib.suppress(CliError):
                peers[pid] = self.key(pid)
        return Gateway(config, ledger, self.key(config.orderer_id), peers)


def _password(environ=os.environ) -> str:
    if environ.get("MEDUSA_PASSWORD"):
        return environ["MEDUSA_PASSWORD"]
    if not sys.stdin.isatty():
        raise CliError("set MEDUSA_PASSWORD or run interactively", EXIT_USAGE)
    return getpass.getpass("password: ")


def _emit(cfg: CliConfig, table: str, canonical: bytes) -> None:
    if cfg.output_format == CANONICAL:
        sys.stdout.buffer.write(canonical + b"\n")
        sys.stdout.flush()
    else:
        sys.stdout.write(table)


def _iso(ms: int) -> str:
    when = dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc) + dt.timedelta(milliseconds=ms)
    return when.isoformat(timespec="milliseconds").replace("+00:00", "Z")


def _parse_time(text: str) -> int:
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        when = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise CliError(f"bad time {text!r}: use epoch ms or ISO-8601", EXIT_USAGE) from None
    if when.tzinfo is None:
        when = when.replace(tzinfo=dt.timezone.utc)
    return (when - dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc)) // dt.timedelta(milliseconds=1)


def _cell(value: str) -> str:
    # keep one record per line and one field per column
    return "".join(ch if ch.isprintable() and ch != "\\" else ch.encode("unicode_escape").decode() for ch in value)


def format_assets(assets: Sequence[WebLogData], output_format: str) -> tuple[str, bytes]:
    """Render query results; one record per line in both formats."""
    canonical = b"\n".join(a.encode() for a in assets)
    header = "datetime\tip\treturnCode\turl\treferer\tuserAgent\tasset_id"
    rows = [
        "\t".join(
            _cell(v) for v in (_iso(a.datetime), a.ip, str(a.return_code), a.url, a.referer or "-", a.user_agent, a.asset_id)
        )
        for a in assets
    ]
    return "\n".join([header, *rows]) + "\n", canonical


def _authenticate(store: Store, datasource_id: str) -> Credential:
    registry = store.registry()
    if datasource_id not in registry:
        raise CliError(f"unknown datasource {datasource_id!r}", EXIT_USAGE)
    if not registry.authenticate(datasource_id, _password()):
        raise CliError(f"authentication failed for {datasource_id!r}", EXIT_USAGE)
    return store.key(datasource_id)


# --- commands -----------------------------------------------------------------------


def cmd_channel_create(store: Store, args) -> int:
    peers = [p for p in args.peers.split(",") if p] if args.peers else ["peer0"]
    endorsers = [p for p in args.endorsers.split(",") if p] if args.endorsers else list(peers)
    k = args.k if args.k is not None else len(endorsers) // 2 + 1
    try:
        policy = EndorsementPolicy(k, tuple(endorsers))
        config = ChannelConfig(
            args.channel_id, ORDERER_ID, tuple(peers), policy, OrderingConfig(args.max_block_txs, args.max_wait_ms)
        )
    except InvalidPolicy as exc:
        raise CliError(f"invalid policy: {exc}", EXIT_POLICY) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    with store.writer():
        path = store.chain_path(args.channel_id)
        if path.exists():
            raise CliError(f"channel {args.channel_id!r} exists", EXIT_CONFLICT)
        registry = store.registry()
        if ORDERER_ID not in registry:
            store.save_key(registry.register_node(ORDERER_ID, ROLE_ORDERER))
        for pid in peers:
            rec = registry.get(pid)
            if rec is None:
                store.save_key(registry.register_node(pid, ROLE_PEER))
            elif rec.role != ROLE_PEER:
                raise CliError(f"{pid!r} is registered as a {rec.role}", EXIT_CONFLICT)
        store.save_registry(registry)
        records = [registry.get(ORDERER_ID)] + [registry.get(p) for p in peers]
        genesis = create_genesis(config, records, store.key(ORDERER_ID), wall_clock_ms())
        commit(genesis, Ledger(Chain(path=path)))
    print(f"channel {args.channel_id} created: {len(peers)} peers, {k}-of-{len(endorsers)} endorsement")
    return EXIT_OK


def cmd_channel_list(store: Store, args) -> int:
    for cid in store.channels():
        print(cid)
    return EXIT_OK


def cmd_datasource_register(store: Store, args, channel: str) -> int:
    descriptor = DataSource(args.datasource_id, args.ip, args.port, args.username, args.url)
    with store.writer():
        gateway = store.gateway(channel)
        registry = store.registry()
        try:
            credential = registry.register_datasource(descriptor, _password())
        except DuplicateParticipant as exc:
            raise CliError(f"datasource {exc} already registered", EXIT_CONFLICT) from exc
        except IdentityError as exc:
            raise CliError(f"{type(exc).__name__}: {exc}", EXIT_USAGE) from exc
        status = gateway.register(registry.get(args.datasource_id))
        if status != VALID:
            raise CliError(f"registration transaction rejected: {status}", EXIT_CONFLICT)
        store.save_key(credential)
        store.save_registry(registry)
    print(f"datasource {args.datasource_id} registered on {channel}")
    return EXIT_OK


def cmd_datasource_join(store: Store, args, channel: str) -> int:
    with store.writer():
        _authenticate(store, args.datasource_id)
        gateway = store.gateway(channel)
        if gateway.ledger.state.participant(args.datasource_id) is not None:
            raise CliError(f"{args.datasource_id} is already a member of {channel}", EXIT_CONFLICT)
        status = gateway.register(store.registry().get(args.datasource_id))
        if status != VALID:
            raise CliError(f"registration transaction rejected: {status}", EXIT_CONFLICT)
    print(f"datasource {args.datasource_id} joined {channel}")
    return EXIT_OK


def cmd_datasource_list(store: Store, args) -> int:
    sys.stdout.buffer.write(store.registry().export())
    return EXIT_OK


def _outcome_exit(status: str, error: str) -> int:
    if status == VALID:
        return EXIT_OK
    if status in (DuplicateAsset.__name__, MVCC_CONFLICT):
        print(f"rejected: {status} {error}".rstrip(), file=sys.stderr)
        return EXIT_CONFLICT
    print(f"rejected: {status} {error}".rstrip(), file=sys.stderr)
    return EXIT_USAGE


def cmd_append(store: Store, args, channel: str) -> int:
    asset = WebLogData(
        asset_id=args.asset_id or "",
        url=args.url,
        referer=args.referer,
        return_code=args.return_code,
        user_agent=args.user_agent,
        datetime=_parse_time(args.datetime),
        ip=args.ip,
    )
    if not asset.asset_id:
        asset = replace(asset, asset_id=derive_asset_id(asset))
    with store.writer():
        credential = _authenticate(store, args.datasource)
        gateway = store.gateway(channel)
        (outcome,) = gateway.submit([append_proposal(channel, asset, credential)])
    if outcome.status == VALID:
        _emit(
            store.config,
            f"{asset.asset_id}\t{outcome.tx_id.hex()}\n",
            codec.encode({"asset_id": asset.asset_id, "tx_id": outcome.tx_id.hex()}),
        )
    return _outcome_exit(outcome.status, outcome.error)


def cmd_ingest(store: Store, args, channel: str, cfg: CliConfig) -> int:
    with store.writer():
        credential = _authenticate(store, args.datasource)
        gateway = store.gateway(channel)
        try:
            report = ingest.ingest_file(args.file, credential, gateway, args.batch_size, args.strict)
        except FileUnreadable as exc:
            raise CliError(str(exc), EXIT_IO) from exc
        except SubmissionFailure as exc:
            _emit(cfg, exc.report.table(), exc.report.encode())
            raise CliError(str(exc), EXIT_IO) from exc
    _emit(cfg, report.table(), report.encode())
    return EXIT_OK


def build_query(args) -> QuerySpec:
    chosen = [n for n in ("ip", "user_agent") if getattr(args, n) is not None]
    ranged = args.start is not None or args.end is not None
    if len(chosen) + ranged > 1:
        raise CliError("choose one of --ip, --user-agent, --from/--to", EXIT_USAGE)
    if args.ip is not None:
        return QuerySpec.by_ip(args.ip)
    if args.user_agent is not None:
        return QuerySpec.by_user_agent(args.user_agent)
    if ranged:
        if args.start is None or args.end is None:
            raise CliError("--from and --to go together", EXIT_USAGE)
        return QuerySpec.by_datetime_range(_parse_time(args.start), _parse_time(args.end))
    return QuerySpec.all()


def cmd_query(store: Store, args, channel: str, cfg: CliConfig) -> int:
    query = build_query(args)
    credential = _authenticate(store, args.datasource)
    gateway = store.gateway(channel)
    try:
        assets = gateway.query(credential.participant_id, query)
    except InvalidRange as exc:
        raise CliError(f"invalid range: {exc}", EXIT_USAGE) from exc
    except ChaincodeError as exc:
        raise CliError(f"{type(exc).__name__}: {exc}", EXIT_USAGE) from exc
    table, canonical = format_assets(assets, cfg.output_format)
    _emit(cfg, table, canonical)
    return EXIT_OK


def cmd_verify(store: Store, args, cfg: CliConfig) -> int:
    channels = [args.channel] if args.channel else store.channels()
    failed = False
    lines, records = [], []
    for cid in channels:
        report = verify_chain(store.open_chain(cid))
        blocks = len(store.open_chain(cid))
        if report.ok:
            lines.append(f"{cid}\tok\t{blocks} blocks")
        else:
            failed = True
            lines.append(f"{cid}\tTAMPERED\tfirst_bad_block={report.first_bad_block}\t{report.failure_kind}")
        records.append(
            {
                "channel": cid,
                "ok": report.ok,
                "first_bad_block": report.first_bad_block,
                "failure_kind": report.failure_kind,
            }
        )
    _emit(cfg, "\n".join(lines) + ("\n" if lines else ""), b"\n".join(codec.encode(r) for r in records))
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_block_show(store: Store, args, channel: str, cfg: CliConfig) -> int:
    chain = store.open_chain(channel)
    try:
        block = chain.block(args.number)
    except NotFound:
        raise CliError(f"no block {args.number} in {channel}", EXIT_USAGE) from None
    except DecodeError as exc:
        raise CliError(f"block {args.number} is corrupt: {exc}", EXIT_VERIFY) from exc
    h = block.header
    lines = [
        f"block_number\t{h.number}",
        f"previous_hash\t{h.previous_hash.hex()}",
        f"data_hash\t{h.data_hash.hex()}",
        f"timestamp\t{_iso(h.timestamp)}",
        f"orderer\t{block.orderer_signature.signer_id if block.orderer_signature else '-'}",
    ]
    for i, (tx, flag) in enumerate(zip(block.transactions, block.validity_flags)):
        lines.append(f"tx {i}\t{tx.tx_id.hex()}\t{tx.proposal.function}\t{tx.proposal.submitter}\t{flag}")
    _emit(cfg, "\n".join(lines) + "\n", chain.record(args.number))
    return EXIT_OK


def cmd_simulate(args, cfg: CliConfig) -> int:
    try:
        scenario = netsim.ScenarioConfig.load(args.config)
    except OSError as exc:
        raise CliError(f"cannot read {args.config}: {exc}", EXIT_IO) from exc
    except InvalidConfig as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    pipelines = [scenario.pipeline]
    if args.compare:
        pipelines = [netsim.EOV, netsim.ORDER_EXECUTE]
    runs = {}
    for pipeline in pipelines:
        sim = netsim.Simulation(replace(scenario, pipeline=pipeline), trace=bool(args.trace))
        metrics = sim.run()
        runs[pipeline] = (metrics, sim.latencies())
        if args.trace:
            trace_path = Path(args.trace)
            if len(pipelines) > 1:
                trace_path = trace_path.with_name(f"{trace_path.stem}.{pipeline}{trace_path.suffix}")
            trace_path.write_text("\n".join(sim.trace) + "\n", encoding="utf-8")
    canonical = b"\n".join(m.encode() for m, _ in runs.values())
    if args.out:
        try:
            Path(args.out).write_bytes(canonical + b"\n")
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    _emit(cfg, "\n".join(m.table() for m, _ in runs.values()), canonical)
    if args.figures:
        for path in plots.render_report(runs, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------------


class _Sub:
    """Subparser action wrapper that gives every leaf command the global flags."""

    def __init__(self, action, common: argparse.ArgumentParser):
        self.action, self.common = action, common

    def add_parser(self, name: str, **kw) -> argparse.ArgumentParser:
        return self.action.add_parser(name, parents=[self.common], **kw)

    def group(self, name: str, **kw) -> _Sub:
        return _Sub(self.action.add_parser(name, **kw).add_subparsers(dest="action", required=True), self.common)


def build_parser() -> argparse.ArgumentParser:
    def global_flags(p: argparse.ArgumentParser, default) -> argparse.ArgumentParser:
        p.add_argument("--data-dir", default=default, help="ledger directory (env MEDUSA_DATA_DIR)")
        p.add_argument("--channel", default=default, help="channel to act on (env MEDUSA_CHANNEL)")
        p.add_argument("--format", default=default, type=str.upper, choices=[TABLE, CANONICAL], help="output format")
        p.add_argument("-v", "--verbose", action="store_true", default=default or False)
        return p

    # global flags are accepted before or after the subcommand
    common = global_flags(argparse.ArgumentParser(add_help=False), argparse.SUPPRESS)
    parser = global_flags(argparse.ArgumentParser(prog="medusa", description="Tamper-evident audit-log ledger."), None)
    sub = _Sub(parser.add_subparsers(dest="command", required=True), common)

    ch = sub.group("channel", help="create or list channels")
    create = ch.add_parser("create")
    create.add_argument("channel_id")
    create.add_argument("--peers", help="comma-separated peer ids (default: peer0)")
    create.add_argument("--endorsers", help="comma-separated endorsing peers (default: all peers)")
    create.add_argument("-k", type=int, help="required endorsements (default: majority)")
    create.add_argument("--max-block-txs", type=int, default=10)
    create.add_argument("--max-wait-ms", type=int, default=100)
    ch.add_parser("list")

    ds = sub.group("datasource", help="manage DataSources")
    reg = ds.add_parser("register")
    reg.add_argument("datasource_id")
    reg.add_argument("--ip", required=True)
    reg.add_argument("--port", type=int, required=True)
    reg.add_argument("--username", required=True)
    reg.add_argument("--url", required=True)
    join = ds.add_parser("join")
    join.add_argument("datasource_id")
    ds.add_parser("list")

    app = sub.add_parser("append", help="append one WebLogData record")
    app.add_argument("--datasource", required=True)
    app.add_argument("--asset-id", help="default: content-derived id")
    app.add_argument("--url", required=True)
    app.add_argument("--referer", default="")
    app.add_argument("--return-code", type=int, required=True)
    app.add_argument("--user-agent", required=True)
    app.add_argument("--datetime", required=True, help="epoch ms or ISO-8601")
    app.add_argument("--ip", required=True)

    ing = sub.add_parser("ingest", help="ingest a Combined Log Format file")
    ing.add_argument("file")
    ing.add_argument("--datasource", required=True)
    ing.add_argument("--batch-size", type=int, default=100)
    ing.add_argument("--strict", action="store_true", help="no backslash escapes inside quotes")

    q = sub.add_parser("query", help="selectWebLogData")
    q.add_argument("--datasource", required=True)
    q.add_argument("--ip")
    q.add_argument("--user-agent")
    q.add_argument("--from", dest="start", help="inclusive; epoch ms or ISO-8601")
    q.add_argument("--to", dest="end", help="exclusive; epoch ms or ISO-8601")

    sub.add_parser("verify", help="verify channel chains (exit 4 on tamper)")

    blk = sub.group("block", help="inspect blocks")
    show = blk.add_parser("show")
    show.add_argument("number", type=int)

    sim = sub.add_parser("simulate", help="run a scenario file")
    sim.add_argument("config")
    sim.add_argument("--out", help="write canonical metrics here")
    sim.add_argument("--figures", help="directory for latency and execution-count figures")
    sim.add_argument("--trace", help="write the event trace here")
    sim.add_argument("--compare", action="store_true", help="run both pipelines on the same workload")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = CliConfig.resolve(args)
        store = Store(cfg)
        channel = cfg.default_channel
        cmd = args.command
        if cmd == "channel":
            return cmd_channel_create(store, args) if args.action == "create" else cmd_channel_list(store, args)
        if cmd == "datasource":
            if args.action == "register":
                return cmd_datasource_register(store, args, channel)
            if args.action == "join":
                return cmd_datasource_join(store, args, channel)
            return cmd_datasource_list(store, args)
        if cmd == "append":
            return cmd_append(store, args, channel)
        if cmd == "ingest":
            return cmd_ingest(store, args, channel, cfg)
        if cmd == "query":
            return cmd_query(store, args, channel, cfg)
        if cmd == "verify":
            return cmd_verify(store, args, cfg)
        if cmd == "block":
            return cmd_block_show(store, args, channel, cfg)
        return cmd_simulate(args, cfg)
    except CliError as exc:
        print(f"medusa: {exc}", file=sys.stderr)
        return exc.code
    except (ChaincodeError, ValueError) as exc:
        print(f"medusa: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"medusa: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
