from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import pytest

from medusa.chaincode import WebLogData
from medusa.identity import ROLE_ORDERER, ROLE_PEER, DataSource, Registry
from medusa.ledger import Chain
from medusa.txflow import (
    ChannelConfig,
    EndorsementPolicy,
    Gateway,
    Ledger,
    OrderingConfig,
    append_proposal,
    commit,
    create_genesis,
)

EPOCH_MS = 1_700_000_000_000
USER_AGENTS = ("Mozilla/5.0 (X11)", "curl/8.4.0", "Googlebot/2.1", "python-requests/2.31")


@dataclass
class Net:
    gateway: Gateway
    registry: Registry
    datasources: list
    rng: random.Random

    @property
    def ledger(self) -> Ledger:
        return self.gateway.ledger

    @property
    def chain(self) -> Chain:
        return self.gateway.ledger.chain

    def append(self, assets, ds: int = 0):
        cred = self.datasources[ds]
        return self.gateway.submit([append_proposal(self.gateway.channel_id, a, cred, self.rng) for a in assets])


def build_net(
    seed: int = 0,
    peers: int = 3,
    k: int | None = None,
    datasources: int = 1,
    max_block_txs: int = 10,
    channel_id: str = "audit",
    path=None,
) -> Net:
    rng = random.Random(f"net:{seed}")
    registry = Registry()
    orderer = registry.register_node("orderer", ROLE_ORDERER, rng)
    peer_ids = [f"p{i}" for i in range(peers)]
    peer_creds = {pid: registry.register_node(pid, ROLE_PEER, rng) for pid in peer_ids}
    policy = EndorsementPolicy(k, tuple(peer_ids)) if k else EndorsementPolicy.majority(peer_ids)
    config = ChannelConfig(channel_id, "orderer", tuple(peer_ids), policy, OrderingConfig(max_block_txs, 100))
    clock = itertools.count(EPOCH_MS)
    genesis = create_genesis(
        config, [registry.get("orderer")] + [registry.get(p) for p in peer_ids], orderer, next(clock), rng
    )
    ledger = Ledger(Chain(path=path))
    commit(genesis, ledger)
    gw = Gateway(config, ledger, orderer, peer_creds, clock=lambda: next(clock), rng=rng)
    creds = []
    for i in range(datasources):
        ds = DataSource(f"ds{i}", f"10.0.0.{i + 1}", 8080, f"ops{i}", f"http://10.0.0.{i + 1}/logs")
        creds.append(registry.register_datasource(ds, f"pw{i}", rng))
        assert gw.register(registry.get(f"ds{i}")) == "VALID"
    return Net(gw, registry, creds, rng)


def random_asset(rng: random.Random, asset_id: str | None = None, ip_pool: int = 12) -> WebLogData:
    return WebLogData(
        asset_id=asset_id if asset_id is not None else f"{rng.getrandbits(64):016x}",
        url=rng.choice(["/", "/login", "/api/v1/orders", "/static/app.js"]),
        referer=rng.choice(["", "https://example.com/"]),
        return_code=rng.choice([200, 200, 304, 404, 500]),
        user_agent=rng.choice(USER_AGENTS),
        datetime=EPOCH_MS + rng.randrange(86_400_000),
        ip=f"192.168.0.{rng.randrange(ip_pool) + 1}",
    )


@pytest.fixture
def net():
    return build_net()


_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[1]
    if report.failed or report.when == "call":
        _acceptance.setdefault(name, "FAIL" if report.failed else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        terminalreporter.write_line(f"{_acceptance.get(name, 'NOT RUN'):7} criterion {label}")
