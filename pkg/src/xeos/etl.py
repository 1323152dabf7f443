"""Mapping from raw chain data to the seven derived datasets.

Each extractor is a streaming fold over (blocks, traces, receipts): feed
records in block order, collect CSV-schema row dicts. Anything skipped is
accounted for in an anomaly log, never silently dropped.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .model import (
    ChainDataError,
    canonical_json,
    format_eos,
    parse_asset_quantity,
    parse_eos_amount,
    validate_account_name,
)

DEFAULT_SYSTEM_ACCOUNTS = frozenset(
    {"eosio", "eosio.token", "eosio.msig", "eosio.ram", "eosio.ramfee"}
)

TOKEN_STANDARD_FUNCTIONS = frozenset({"create", "issue", "transfer"})

D7_CATEGORY = {
    "stakecpu": "CPU",
    "unstakecpu": "CPU",
    "stakenet": "NET",
    "unstakenet": "NET",
    "buyram": "RAM",
    "sellram": "RAM",
    "buyrex": "REX",
    "sellrex": "REX",
    "rentcpu": "REX",
    "rentnet": "REX",
}

SCHEMAS = {
    "d1_blocks": ["block_num", "block_id", "timestamp", "producer", "tx_count"],
    "d1_transactions": [
        "tx_id", "block_num", "is_deferred", "status", "cpu_usage_us",
        "net_usage_words",
    ],
    "d1_actions": [
        "tx_id", "action_index", "contract", "function", "authorizers", "data",
    ],
    "d2_transfers": [
        "block_num", "timestamp", "tx_id", "from", "to", "amount", "memo", "kind",
    ],
    "d3_contracts": [
        "account", "block_num", "timestamp", "action_kind", "code_hash",
        "code_size_bytes", "is_first_deploy",
    ],
    "d4_invocations": [
        "block_num", "timestamp", "tx_id", "authorizer", "contract", "function",
        "has_error", "error_text",
    ],
    "d5_tokens": [
        "contract", "symbol", "precision", "created_at", "issuer",
        "max_supply_units",
    ],
    "d5_token_transfers": [
        "block_num", "timestamp", "contract", "symbol", "from", "to",
        "amount_units", "memo",
    ],
    "d6_accounts": ["block_num", "timestamp", "creator", "new_account"],
    "d7_resources": [
        "block_num", "timestamp", "actor", "category", "action", "eos_amount",
    ],
    "anomalies": ["reason", "block_num", "tx_id", "global_seq"],
}

DATASET_FILES = {
    "d1": ["d1_blocks", "d1_transactions", "d1_actions"],
    "d2": ["d2_transfers"],
    "d3": ["d3_contracts"],
    "d4": ["d4_invocations"],
    "d5": ["d5_tokens", "d5_token_transfers"],
    "d6": ["d6_accounts"],
    "d7": ["d7_resources"],
}

ALL_DATASETS = tuple(sorted(DATASET_FILES))


class StrictViolation(Exception):
    """An anomaly encountered while running in strict mode."""


class AnomalyLog:
    """Collects skipped-record entries; raises instead when strict."""

    def __init__(self, strict: bool = False, sink=None):
        self.strict = strict
        self.rows: list = []
        self._sink = sink

    def add(self, reason, block_num=None, tx_id=None, global_seq=None):
        if self.strict:
            raise StrictViolation(
                f"{reason} (block={block_num} tx={tx_id} seq={global_seq})"
            )
        row = {
            "reason": reason,
            "block_num": block_num if block_num is not None else "",
            "tx_id": tx_id or "",
            "global_seq": global_seq if global_seq is not None else "",
        }
        if self._sink is not None:
            self._sink(row)
        else:
            self.rows.append(row)

    def __len__(self):
        return len(self.rows)


def _format_authorizers(authorizers) -> str:
    return ";".join(f"{actor}@{perm}" for actor, perm in authorizers)


def _bool(value: bool) -> str:
    return "true" if value else "false"


# -- D1: blocks / transactions / actions --------------------------------------


def extract_d1(blocks, receipts, anomalies: AnomalyLog):
    """Yield ("block"|"tx"|"action", row) per packaged record.

    Both streams must be ordered by block_num. Receipts supply CPU/NET
    usage when the block-embedded fields are absent; a transaction with
    neither gets zero usage and an anomaly entry. Inline actions never
    appear in blocks, so action rows are packaged (calling + deferred)
    actions only.
    """
    receipts = iter(receipts)
    pending = None
    for block in blocks:
        block_receipts = {}
        if pending is not None:
            if pending.block_num == block.block_num:
                block_receipts[pending.tx_id] = pending
                pending = None
            elif pending.block_num < block.block_num:
                anomalies.add(
                    "unjoinable receipt", pending.block_num, pending.tx_id
                )
                pending = None
        while pending is None:
            receipt = next(receipts, None)
            if receipt is None:
                break
            if receipt.block_num < block.block_num:
                anomalies.add("unjoinable receipt", receipt.block_num, receipt.tx_id)
            elif receipt.block_num == block.block_num:
                block_receipts[receipt.tx_id] = receipt
            else:
                pending = receipt
        yield "block", {
            "block_num": block.block_num,
            "block_id": block.block_id,
            "timestamp": block.timestamp,
            "producer": block.producer,
            "tx_count": len(block.transactions),
        }
        for tx in block.transactions:
            cpu, net = tx.cpu_usage_us, tx.net_usage_words
            if cpu is None or net is None:
                receipt = block_receipts.get(tx.tx_id)
                if receipt is not None:
                    cpu = receipt.cpu_usage_us if cpu is None else cpu
                    net = receipt.net_usage_words if net is None else net
                else:
                    anomalies.add("receipt missing", block.block_num, tx.tx_id)
                    cpu = 0 if cpu is None else cpu
                    net = 0 if net is None else net
            yield "tx", {
                "tx_id": tx.tx_id,
                "block_num": block.block_num,
                "is_deferred": _bool(tx.is_deferred),
                "status": tx.status,
                "cpu_usage_us": cpu,
                "net_usage_words": net,
            }
            for index, act in enumerate(tx.actions):
                yield "action", {
                    "tx_id": tx.tx_id,
                    "action_index": index,
                    "contract": act.contract,
                    "function": act.function,
                    "authorizers": _format_authorizers(act.authorizers),
                    "data": canonical_json(act.data),
                }
    if pending is not None:
        anomalies.add("unjoinable receipt", pending.block_num, pending.tx_id)
    for receipt in receipts:
        anomalies.add("unjoinable receipt", receipt.block_num, receipt.tx_id)


# -- D2: EOS transfers ---------------------------------------------------------


class D2Extractor:
    """EOS transfers from eosio.token transfer traces.

    Transfer traces are replicated to sender/receiver via notification on
    real chains; only the trace delivered to the token contract itself is
    emitted so each transfer appears exactly once. Kind is internal when
    the trace has a parent (inline), external when top-level.
    """

    def __init__(self, clock, anomalies: AnomalyLog):
        self.clock = clock
        self.anomalies = anomalies

    def feed(self, trace):
        act = trace.act
        if act.contract != "eosio.token" or act.function != "transfer":
            return None
        if trace.receiver != act.contract:
            return None  # notification copy
        data = act.data
        try:
            amount = parse_eos_amount(data["quantity"])
            row = {
                "block_num": trace.block_num,
                "timestamp": self.clock[trace.block_num],
                "tx_id": trace.tx_id,
                "from": data["from"],
                "to": data["to"],
                "amount": format_eos(amount),
                "memo": data.get("memo", ""),
                "kind": "internal" if trace.parent_seq is not None else "external",
            }
        except (ChainDataError, KeyError, TypeError) as exc:
            self.anomalies.add(
                f"malformed transfer data: {exc}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        if not (validate_account_name(row["from"]) and validate_account_name(row["to"])):
            self.anomalies.add(
                "invalid account name in transfer",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        return row


def extract_d2(traces, clock, anomalies: AnomalyLog):
    extractor = D2Extractor(clock, anomalies)
    for trace in traces:
        row = extractor.feed(trace)
        if row is not None:
            yield row


# -- D3: contract deployments --------------------------------------------------


class D3Extractor:
    """SetCode actions on the system account; empty code payload means removal."""

    def __init__(self, clock, anomalies: AnomalyLog):
        self.clock = clock
        self.anomalies = anomalies
        self._deployed: set = set()

    def feed(self, trace):
        act = trace.act
        if act.contract != "eosio" or act.function != "setcode":
            return None
        if trace.receiver != act.contract:
            return None
        data = act.data
        account = data.get("account")
        code = data.get("code")
        if account is None or code is None:
            self.anomalies.add(
                "setcode missing account or code field",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        try:
            code_bytes = bytes.fromhex(code)
        except ValueError:
            self.anomalies.add(
                "setcode code is not valid hex",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        if code == "":
            kind, code_hash = "setemptycode", ""
        else:
            kind = "setcode"
            code_hash = hashlib.sha256(code_bytes).hexdigest()
        first = kind == "setcode" and account not in self._deployed
        if kind == "setcode":
            self._deployed.add(account)
        return {
            "account": account,
            "block_num": trace.block_num,
            "timestamp": self.clock[trace.block_num],
            "action_kind": kind,
            "code_hash": code_hash,
            "code_size_bytes": len(code),
            "is_first_deploy": _bool(first),
        }


def extract_d3(traces, clock, anomalies: AnomalyLog):
    extractor = D3Extractor(clock, anomalies)
    for trace in traces:
        row = extractor.feed(trace)
        if row is not None:
            yield row


# -- D4: contract invocations --------------------------------------------------


class D4Extractor:
    """Top-level invocations of non-system contracts."""

    def __init__(self, clock, system_accounts=None):
        self.clock = clock
        self.system_accounts = (
            frozenset(system_accounts) if system_accounts is not None
            else DEFAULT_SYSTEM_ACCOUNTS
        )

    def feed(self, trace):
        if trace.parent_seq is not None:
            return None
        act = trace.act
        if act.contract in self.system_accounts:
            return None
        authorizer = act.authorizers[0][0] if act.authorizers else ""
        return {
            "block_num": trace.block_num,
            "timestamp": self.clock[trace.block_num],
            "tx_id": trace.tx_id,
            "authorizer": authorizer,
            "contract": act.contract,
            "function": act.function,
            "has_error": _bool(trace.error is not None),
            "error_text": trace.error or "",
        }


def extract_d4(traces, clock, system_accounts=None):
    extractor = D4Extractor(clock, system_accounts)
    for trace in traces:
        row = extractor.feed(trace)
        if row is not None:
            yield row


# -- D5: token contracts and transfers -----------------------------------------


def detect_token_contracts(traces, anomalies: AnomalyLog) -> set:
    """Contracts whose latest deployed interface exports create/issue/transfer.

    The interface is the exported-function list carried in setcode data;
    an empty-code deploy clears it. Contracts whose latest deploy carries
    no interface metadata are non-token and land in the anomaly log.
    """
    interfaces: dict = {}
    last_seen: dict = {}
    for trace in traces:
        act = trace.act
        if act.contract != "eosio" or act.function != "setcode":
            continue
        if trace.receiver != act.contract:
            continue
        account = act.data.get("account")
        if account is None:
            continue
        last_seen[account] = trace
        if act.data.get("code") == "":
            interfaces[account] = frozenset()
        else:
            abi = act.data.get("abi")
            interfaces[account] = frozenset(abi) if abi is not None else None
    tokens = set()
    for account, interface in interfaces.items():
        if interface is None:
            trace = last_seen[account]
            anomalies.add(
                "contract without interface metadata",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
        elif TOKEN_STANDARD_FUNCTIONS <= interface:
            tokens.add(account)
    return tokens


class D5Extractor:
    """Token creations and token transfers on detected token contracts."""

    def __init__(self, token_set, clock, anomalies: AnomalyLog):
        self.token_set = frozenset(token_set)
        self.clock = clock
        self.anomalies = anomalies
        self._precisions: dict = {}  # (contract, symbol) -> precision

    def feed(self, trace):
        act = trace.act
        if act.contract not in self.token_set:
            return None
        if trace.receiver != act.contract:
            return None
        if act.function == "create":
            return self._create(trace)
        if act.function == "transfer":
            return self._transfer(trace)
        return None

    def _create(self, trace):
        data = trace.act.data
        try:
            units, precision, symbol = parse_asset_quantity(data["maximum_supply"])
            issuer = data["issuer"]
        except (ChainDataError, KeyError, TypeError) as exc:
            self.anomalies.add(
                f"malformed token create: {exc}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        key = (trace.act.contract, symbol)
        if key in self._precisions:
            self.anomalies.add(
                f"duplicate token create for {symbol}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        self._precisions[key] = precision
        return "token", {
            "contract": trace.act.contract,
            "symbol": symbol,
            "precision": precision,
            "created_at": self.clock[trace.block_num],
            "issuer": issuer,
            "max_supply_units": units,
        }

    def _transfer(self, trace):
        data = trace.act.data
        try:
            units, precision, symbol = parse_asset_quantity(data["quantity"])
            row = {
                "block_num": trace.block_num,
                "timestamp": self.clock[trace.block_num],
                "contract": trace.act.contract,
                "symbol": symbol,
                "from": data["from"],
                "to": data["to"],
                "amount_units": units,
                "memo": data.get("memo", ""),
            }
        except (ChainDataError, KeyError, TypeError) as exc:
            self.anomalies.add(
                f"malformed token transfer: {exc}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        key = (trace.act.contract, symbol)
        if key not in self._precisions:
            self.anomalies.add(
                f"transfer of never-created token {symbol}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        if precision != self._precisions[key]:
            self.anomalies.add(
                f"token transfer precision mismatch for {symbol}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        return "transfer", row


def extract_d5(traces, token_set, clock, anomalies: AnomalyLog):
    extractor = D5Extractor(token_set, clock, anomalies)
    for trace in traces:
        tagged = extractor.feed(trace)
        if tagged is not None:
            yield tagged


# -- D6: account creation ------------------------------------------------------


class D6Extractor:
    def __init__(self, clock, anomalies: AnomalyLog):
        self.clock = clock
        self.anomalies = anomalies
        self._seen: set = set()

    def feed(self, trace):
        act = trace.act
        if act.contract != "eosio" or act.function != "newaccount":
            return None
        if trace.receiver != act.contract:
            return None
        new_account = act.data.get("name")
        if not validate_account_name(new_account):
            self.anomalies.add(
                f"invalid new account name: {new_account!r}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        if new_account in self._seen:
            self.anomalies.add(
                f"duplicate account creation: {new_account}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        self._seen.add(new_account)
        creator = act.authorizers[0][0] if act.authorizers else act.data.get("creator", "")
        return {
            "block_num": trace.block_num,
            "timestamp": self.clock[trace.block_num],
            "creator": creator,
            "new_account": new_account,
        }


def extract_d6(traces, clock, anomalies: AnomalyLog):
    extractor = D6Extractor(clock, anomalies)
    for trace in traces:
        row = extractor.feed(trace)
        if row is not None:
            yield row


# -- D7: resource management ---------------------------------------------------


class D7Extractor:
    """CPU/NET/RAM/REX actions on the system account, fixed category map."""

    def __init__(self, clock, anomalies: AnomalyLog):
        self.clock = clock
        self.anomalies = anomalies

    def feed(self, trace):
        act = trace.act
        if act.contract != "eosio":
            return None
        category = D7_CATEGORY.get(act.function)
        if category is None:
            return None  # outside the resource taxonomy, deliberately ignored
        if trace.receiver != act.contract:
            return None
        try:
            amount = parse_eos_amount(act.data["amount"])
        except (ChainDataError, KeyError, TypeError) as exc:
            self.anomalies.add(
                f"malformed resource action: {exc}",
                trace.block_num, trace.tx_id, trace.global_seq,
            )
            return None
        actor = act.authorizers[0][0] if act.authorizers else act.data.get("actor", "")
        return {
            "block_num": trace.block_num,
            "timestamp": self.clock[trace.block_num],
            "actor": actor,
            "category": category,
            "action": act.function,
            "eos_amount": format_eos(amount),
        }


def extract_d7(traces, clock, anomalies: AnomalyLog):
    extractor = D7Extractor(clock, anomalies)
    for trace in traces:
        row = extractor.feed(trace)
        if row is not None:
            yield row


# -- CSV output ----------------------------------------------------------------


@dataclass(frozen=True)
class WriteReport:
    path: str
    rows: int
    bytes_written: int


class DatasetWriter:
    """RFC-4180 CSV writer: header row, UTF-8, LF line endings."""

    def __init__(self, path, schema):
        self.path = Path(path)
        self.schema = list(schema)
        self.rows = 0
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._writer = csv.DictWriter(
            self._fh, fieldnames=self.schema, lineterminator="\n"
        )
        self._writer.writeheader()

    def write(self, row: dict):
        self._writer.writerow(row)
        self.rows += 1

    def close(self) -> WriteReport:
        self._fh.close()
        return WriteReport(
            path=str(self.path), rows=self.rows,
            bytes_written=self.path.stat().st_size,
        )


def write_dataset(stream, schema, path) -> WriteReport:
    writer = DatasetWriter(path, schema)
    try:
        for row in stream:
            writer.write(row)
    finally:
        report = writer.close()
    return report


def read_dataset(path):
    """Iterate rows of a dataset CSV as dicts."""
    with open(path, encoding="utf-8", newline="") as fh:
        yield from csv.DictReader(fh)


# -- pipeline driver -----------------------------------------------------------


def run_extract(
    input_dir,
    output_dir,
    datasets=None,
    strict: bool = False,
    system_accounts=None,
    block_range=None,
    allow_gaps: bool = False,
) -> dict:
    """Run the selected extractors over a raw file set; write dataset CSVs.

    Returns a run report: per-file row counts plus the anomaly count.
    Blocks are read once (building the block->timestamp clock D2-D7 rows
    need); traces twice when token detection is required, once otherwise.
    """
    from .ingest import RawFileSet, read_stream

    if datasets is None:
        datasets = set(ALL_DATASETS)
    datasets = set(datasets)
    unknown = datasets - set(ALL_DATASETS)
    if unknown:
        raise ValueError(f"unknown datasets: {sorted(unknown)}")
    if not datasets:
        raise ValueError("at least one dataset must be selected")

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    fileset = RawFileSet.scan(input_dir, allow_gaps=allow_gaps)

    def in_range(block_num):
        if block_range is None:
            return True
        return block_range[0] <= block_num <= block_range[1]

    writers = {}
    for dataset in sorted(datasets):
        for name in DATASET_FILES[dataset]:
            writers[name] = DatasetWriter(output_dir / f"{name}.csv", SCHEMAS[name])
    anomaly_writer = DatasetWriter(output_dir / "anomalies.csv", SCHEMAS["anomalies"])
    anomaly_count = 0

    def sink(row):
        nonlocal anomaly_count
        anomaly_writer.write(row)
        anomaly_count += 1

    anomalies = AnomalyLog(strict=strict, sink=sink)
    clock = {}

    try:
        # pass over blocks: clock for every extractor, D1 rows if selected
        blocks = (b for b in read_stream(fileset, "blocks") if in_range(b.block_num))
        if "d1" in datasets:
            receipts = (
                r for r in read_stream(fileset, "receipts") if in_range(r.block_num)
            )
            for kind, row in extract_d1(blocks, receipts, anomalies):
                if kind == "block":
                    clock[row["block_num"]] = row["timestamp"]
                    writers["d1_blocks"].write(row)
                elif kind == "tx":
                    writers["d1_transactions"].write(row)
                else:
                    writers["d1_actions"].write(row)
        else:
            for block in blocks:
                clock[block.block_num] = block.timestamp

        trace_datasets = datasets & {"d2", "d3", "d4", "d5", "d6", "d7"}
        token_set = set()
        if "d5" in trace_datasets:
            detection = (
                t for t in read_stream(fileset, "traces") if in_range(t.block_num)
            )
            token_set = detect_token_contracts(detection, anomalies)

        if trace_datasets:
            feeds = []
            if "d2" in trace_datasets:
                feeds.append((D2Extractor(clock, anomalies), "d2_transfers"))
            if "d3" in trace_datasets:
                feeds.append((D3Extractor(clock, anomalies), "d3_contracts"))
            if "d4" in trace_datasets:
                feeds.append((D4Extractor(clock, system_accounts), "d4_invocations"))
            if "d6" in trace_datasets:
                feeds.append((D6Extractor(clock, anomalies), "d6_accounts"))
            if "d7" in trace_datasets:
                feeds.append((D7Extractor(clock, anomalies), "d7_resources"))
            d5 = D5Extractor(token_set, clock, anomalies) if "d5" in trace_datasets else None
            for trace in read_stream(fileset, "traces"):
                if not in_range(trace.block_num):
                    continue
                for extractor, target in feeds:
                    row = extractor.feed(trace)
                    if row is not None:
                        writers[target].write(row)
                if d5 is not None:
                    tagged = d5.feed(trace)
                    if tagged is not None:
                        tag, row = tagged
                        writers["d5_tokens" if tag == "token" else "d5_token_transfers"].write(row)
    finally:
        reports = {name: w.close() for name, w in writers.items()}
        reports["anomalies"] = anomaly_writer.close()

    return {
        "datasets": sorted(datasets),
        "rows": {name: report.rows for name, report in sorted(reports.items())},
        "anomaly_count": anomaly_count,
        "token_contracts": sorted(token_set),
    }
