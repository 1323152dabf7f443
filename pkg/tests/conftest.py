import re

import pytest

from xeos import etl, synth
from xeos.model import ActionTrace, RawAction

_CRITERION_RE = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per numbered acceptance criterion."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            m = _CRITERION_RE.search(nodeid)
            if m is None or getattr(report, "when", "call") != "call":
                continue
            status = "PASS" if outcome == "passed" else "FAIL"
            label = m.group(2).replace("_", " ")
            lines[int(m.group(1))] = f"{status}  criterion {m.group(1)}: {label}"
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture(scope="session")
def small_chain(tmp_path_factory):
    """A 300-block synthetic chain with extraction output, shared read-only."""
    root = tmp_path_factory.mktemp("chain")
    config = synth.GenConfig(seed=7, n_blocks=300, manifest_bucket_size=100)
    manifest = synth.generate(config, root / "raw")
    report = etl.run_extract(root / "raw", root / "datasets")
    return {
        "raw": root / "raw",
        "datasets": root / "datasets",
        "manifest": manifest,
        "report": report,
        "config": config,
    }


def make_trace(global_seq, contract, function, data, *, receiver=None,
               parent_seq=None, block_num=1, tx_id=None, error=None,
               actor="alice"):
    act = RawAction(
        contract=contract,
        function=function,
        authorizers=((actor, "active"),),
        data=data,
    )
    return ActionTrace(
        global_seq=global_seq,
        tx_id=tx_id or f"{global_seq:064x}",
        block_num=block_num,
        parent_seq=parent_seq,
        receiver=receiver if receiver is not None else contract,
        act=act,
        error=error,
    )


def make_clock(max_block=1000):
    return {n: "2019-01-01T00:00:00.000Z" for n in range(1, max_block + 1)}
