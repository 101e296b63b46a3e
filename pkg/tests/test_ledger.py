import random
import shutil
import subprocess

import pytest

from medusa import ledger
from medusa.errors import ChainLinkMismatch, ChainNotVerified, DataHashMismatch, NonSequentialNumber, NotFound
from medusa.ledger import (
    BAD_SIGNATURE,
    BROKEN_LINK,
    DATA_HASH_MISMATCH,
    NONSEQUENTIAL_NUMBER,
    Block,
    BlockHeader,
    Chain,
    frame,
    replay_world_state,
    verify_chain,
)

from conftest import build_net, random_asset


def _sha256_external(data: bytes) -> str:
    if shutil.which("sha256sum"):
        out = subprocess.run(["sha256sum"], input=data, capture_output=True, check=True).stdout
        return out.split()[0].decode()
    out = subprocess.run(["openssl", "dgst", "-sha256", "-r"], input=data, capture_output=True, check=True).stdout
    return out.split()[0].decode()


def _header_json(h: BlockHeader) -> bytes:
    # written out by hand so the oracle shares no code with the encoder
    return (
        '{"block_number":%d,"previous_hash":"%s","data_hash":"%s","timestamp":%d}'
        % (h.number, h.previous_hash.hex(), h.data_hash.hex(), h.timestamp)
    ).encode()


@pytest.fixture(scope="module")
def populated():
    net = build_net(seed=11)
    rng = random.Random(5)
    for _ in range(4):
        net.append([random_asset(rng) for _ in range(10)])
    return net


def test_block_hash_matches_external_sha256(populated):
    for block in populated.chain:
        assert ledger.compute_block_hash(block.header).hex() == _sha256_external(_header_json(block.header))


def test_links_and_numbers(populated):
    chain = populated.chain
    assert chain.block(0).header.previous_hash == bytes(32)
    for n in range(1, len(chain)):
        assert chain.block(n).header.number == n
        assert chain.block(n).header.previous_hash == ledger.compute_block_hash(chain.block(n - 1).header)
    assert verify_chain(chain).ok


def test_block_file_framing(tmp_path):
    path = tmp_path / "blocks"
    net = build_net(seed=2, path=path)
    net.append([random_asset(random.Random(1)) for _ in range(3)])
    data = path.read_bytes()
    # independent parse of the 4-byte big-endian length framing
    pos, n = 0, 0
    while pos < len(data):
        size = int.from_bytes(data[pos : pos + 4], "big")
        assert data[pos + 4 : pos + 4 + size] == net.chain.record(n)
        pos += 4 + size
        n += 1
    assert n == len(net.chain)
    assert Chain.open(path).to_bytes() == data
    assert verify_chain(path).ok


def test_append_rejects_bad_blocks(populated):
    chain = Chain.from_bytes(populated.chain.to_bytes())
    tip = chain.block(len(chain) - 1)
    again = Chain(chain.records()[:-1])
    with pytest.raises(NonSequentialNumber):
        again.append(chain.block(1))
    unlinked = Block(
        BlockHeader(tip.number, bytes(32), tip.header.data_hash, tip.header.timestamp),
        tip.transactions,
        tip.validity_flags,
        tip.orderer_signature,
    )
    with pytest.raises(ChainLinkMismatch):
        again.append(unlinked)
    bad_data = Block(
        BlockHeader(tip.number, tip.header.previous_hash, bytes(32), tip.header.timestamp),
        tip.transactions,
        tip.validity_flags,
        tip.orderer_signature,
    )
    with pytest.raises(DataHashMismatch):
        again.append(bad_data)
    again.append(tip)
    assert again.to_bytes() == chain.to_bytes()


def test_lookups(populated):
    chain = populated.chain
    block = ledger.get_block(chain, 3)
    tx = block.transactions[2]
    found, index, env = ledger.get_transaction(chain, tx.tx_id)
    assert (found.number, index, env) == (3, 2, tx)
    with pytest.raises(NotFound):
        ledger.get_block(chain, len(chain))
    with pytest.raises(NotFound):
        ledger.get_transaction(chain, bytes(32))


def _edit(chain: Chain, n: int, **header_changes) -> list[bytes]:
    records = chain.records()
    b = chain.block(n)
    h = b.header
    fields = dict(number=h.number, previous_hash=h.previous_hash, data_hash=h.data_hash, timestamp=h.timestamp)
    fields.update(header_changes)
    records[n] = Block(BlockHeader(**fields), b.transactions, b.validity_flags, b.orderer_signature).encode()
    return records


def test_timestamp_edit_is_caught_at_that_block(populated):
    report = verify_chain(_edit(populated.chain, 3, timestamp=populated.chain.block(3).header.timestamp + 1))
    assert (report.ok, report.first_bad_block, report.failure_kind) == (False, 3, BAD_SIGNATURE)


def test_reorder_and_deletion_give_nonsequential(populated):
    records = populated.chain.records()
    swapped = records[:3] + [records[4], records[3]] + records[5:]
    report = verify_chain(swapped)
    assert (report.first_bad_block, report.failure_kind) == (3, NONSEQUENTIAL_NUMBER)
    report = verify_chain(records[:2] + records[3:])
    assert (report.first_bad_block, report.failure_kind) == (2, NONSEQUENTIAL_NUMBER)


def test_spliced_block_from_fork_gives_broken_link(populated):
    # same seed, hence same keys, but a different history from block 3 onwards
    fork = build_net(seed=11)
    rng = random.Random(99)
    for _ in range(4):
        fork.append([random_asset(rng) for _ in range(10)])
    records = populated.chain.records()
    records[4] = fork.chain.record(4)
    report = verify_chain(records)
    assert (report.first_bad_block, report.failure_kind) == (4, BROKEN_LINK)


def test_transaction_edit_gives_data_hash_mismatch(populated):
    records = populated.chain.records()
    records[2] = records[2].replace(b'"returnCode":', b'"returnCode":1', 1)
    report = verify_chain(records)
    assert report.first_bad_block == 2 and report.failure_kind == DATA_HASH_MISMATCH


def test_truncated_file_is_detected(populated):
    data = populated.chain.to_bytes()
    report = verify_chain(data[:-5])
    assert report.first_bad_block == len(populated.chain) - 1


def test_single_byte_mutations_sampled(populated):
    data = populated.chain.to_bytes()
    starts, pos = [], 0
    for record in populated.chain.records():
        starts.append(pos)
        pos += 4 + len(record)
    rng = random.Random(3)
    for _ in range(100):
        offset = rng.randrange(len(data))
        mutated = bytearray(data)
        mutated[offset] ^= rng.randrange(1, 256)
        report = verify_chain(bytes(mutated))
        expected = max(i for i, s in enumerate(starts) if s <= offset)
        assert not report.ok
        assert report.first_bad_block == expected


def test_replay_equals_incremental_state(populated):
    replayed = replay_world_state(Chain.from_bytes(populated.chain.to_bytes()))
    assert replayed == populated.ledger.state
    assert replayed.digest() == populated.ledger.state.digest()


def test_replay_refuses_tampered_chain(populated):
    records = _edit(populated.chain, 2, timestamp=0)
    with pytest.raises(ChainNotVerified):
        replay_world_state(Chain(records))


def test_genesis_only_replay_has_no_assets():
    net = build_net(seed=4, datasources=0)
    state = replay_world_state(net.chain)
    assert len(net.chain) == 1
    assert state.keys("weblog:") == []
    assert set(state.keys()) == {"config:channel", "participant:orderer", "participant:p0", "participant:p1", "participant:p2"}


def test_verification_report_invariant():
    with pytest.raises(ValueError):
        ledger.VerificationReport(True, 3)
    with pytest.raises(ValueError):
        ledger.VerificationReport(False)


def test_frame_round_trip():
    records = [b"a", b"", b"x" * 300]
    assert ledger.split_records(b"".join(frame(r) for r in records)) == records
