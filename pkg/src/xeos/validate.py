"""Invariant checks over extracted dataset CSVs.

Every violation is reported with file and row coordinates (row numbers are
1-based data rows, excluding the header).
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from . import etl
from .model import (
    ChainDataError,
    STATUSES,
    TIMESTAMP_RE,
    TX_ID_RE,
    parse_eos_amount,
    validate_account_name,
)

_HASH_RE = re.compile(r"^[0-9a-f]{64}$")
_AUTH_RE = re.compile(r"^[^@;]+@[^@;]+(;[^@;]+@[^@;]+)*$")


def _is_int(text, minimum=0):
    try:
        return int(text) >= minimum
    except (TypeError, ValueError):
        return False


def _is_bool(text):
    return text in ("true", "false")


class _Checker:
    def __init__(self, dataset_dir, system_accounts=None):
        self.dataset_dir = Path(dataset_dir)
        self.system_accounts = (
            frozenset(system_accounts) if system_accounts is not None
            else etl.DEFAULT_SYSTEM_ACCOUNTS
        )
        self.violations: list[str] = []
        self.files_seen = 0

    def fail(self, name, row_no, message):
        self.violations.append(f"{name}.csv:{row_no}: {message}")

    def rows(self, name):
        path = self.dataset_dir / f"{name}.csv"
        if not path.exists():
            return
        self.files_seen += 1
        for row_no, row in enumerate(etl.read_dataset(path), start=1):
            yield row_no, row

    def check_name(self, name, row_no, row, column, allow_empty=False):
        value = row.get(column, "")
        if allow_empty and value == "":
            return
        if not validate_account_name(value):
            self.fail(name, row_no, f"invalid account name in {column}: {value!r}")

    def check_common(self, name, row_no, row, columns):
        for column in columns:
            kind = column[0]
            field = column[1]
            value = row.get(field, "")
            if kind == "int" and not _is_int(value):
                self.fail(name, row_no, f"{field} is not a non-negative integer: {value!r}")
            elif kind == "timestamp" and not TIMESTAMP_RE.match(value):
                self.fail(name, row_no, f"malformed timestamp in {field}: {value!r}")
            elif kind == "txid" and not TX_ID_RE.match(value):
                self.fail(name, row_no, f"malformed digest in {field}: {value!r}")
            elif kind == "bool" and not _is_bool(value):
                self.fail(name, row_no, f"{field} is not true/false: {value!r}")
            elif kind == "eos" :
                try:
                    parse_eos_amount(value)
                except ChainDataError:
                    self.fail(name, row_no, f"malformed EOS amount in {field}: {value!r}")

    def run(self):
        self._d1()
        self._d2()
        self._d3()
        self._d4()
        self._d5()
        self._d6()
        self._d7()
        return self

    def _d1(self):
        tx_counts = {}
        deferred_ok = (self.dataset_dir / "d1_transactions.csv").exists()
        for row_no, row in self.rows("d1_transactions"):
            name = "d1_transactions"
            self.check_common(name, row_no, row,
                              [("txid", "tx_id"), ("int", "block_num"),
                               ("bool", "is_deferred"), ("int", "cpu_usage_us"),
                               ("int", "net_usage_words")])
            if row.get("status") not in STATUSES:
                self.fail(name, row_no, f"unknown status: {row.get('status')!r}")
            if _is_int(row.get("block_num", "")):
                block = int(row["block_num"])
                tx_counts[block] = tx_counts.get(block, 0) + 1
        prev = None
        for row_no, row in self.rows("d1_blocks"):
            name = "d1_blocks"
            self.check_common(name, row_no, row,
                              [("int", "block_num"), ("txid", "block_id"),
                               ("timestamp", "timestamp"), ("int", "tx_count")])
            self.check_name(name, row_no, row, "producer")
            if not _is_int(row.get("block_num", ""), minimum=1):
                continue
            block = int(row["block_num"])
            if prev is not None and block <= prev:
                self.fail(name, row_no, f"block_num not strictly increasing: {block}")
            prev = block
            if deferred_ok and _is_int(row.get("tx_count", "")):
                if int(row["tx_count"]) != tx_counts.get(block, 0):
                    self.fail(
                        name, row_no,
                        f"tx_count {row['tx_count']} != "
                        f"{tx_counts.get(block, 0)} transaction rows for block {block}",
                    )
        for row_no, row in self.rows("d1_actions"):
            name = "d1_actions"
            self.check_common(name, row_no, row,
                              [("txid", "tx_id"), ("int", "action_index")])
            self.check_name(name, row_no, row, "contract")
            if not validate_account_name(row.get("function", "")):
                self.fail(name, row_no,
                          f"function violates name grammar: {row.get('function')!r}")
            auth = row.get("authorizers", "")
            if auth and not _AUTH_RE.match(auth):
                self.fail(name, row_no, f"malformed authorizers: {auth!r}")
            try:
                json.loads(row.get("data", ""))
            except ValueError:
                self.fail(name, row_no, "data is not valid JSON")

    def _d2(self):
        for row_no, row in self.rows("d2_transfers"):
            name = "d2_transfers"
            self.check_common(name, row_no, row,
                              [("int", "block_num"), ("timestamp", "timestamp"),
                               ("txid", "tx_id"), ("eos", "amount")])
            self.check_name(name, row_no, row, "from")
            self.check_name(name, row_no, row, "to")
            if row.get("kind") not in ("internal", "external"):
                self.fail(name, row_no, f"invalid kind: {row.get('kind')!r}")

    def _d3(self):
        first_seen = set()
        for row_no, row in self.rows("d3_contracts"):
            name = "d3_contracts"
            self.check_common(name, row_no, row,
                              [("int", "block_num"), ("timestamp", "timestamp"),
                               ("int", "code_size_bytes"),
                               ("bool", "is_first_deploy")])
            self.check_name(name, row_no, row, "account")
            kind = row.get("action_kind")
            if kind not in ("setcode", "setemptycode"):
                self.fail(name, row_no, f"invalid action_kind: {kind!r}")
            elif kind == "setemptycode":
                if row.get("code_hash") != "":
                    self.fail(name, row_no, "setemptycode must have empty code_hash")
                if row.get("is_first_deploy") == "true":
                    self.fail(name, row_no, "setemptycode cannot be a first deploy")
            elif not _HASH_RE.match(row.get("code_hash", "")):
                self.fail(name, row_no, f"malformed code_hash: {row.get('code_hash')!r}")
            if row.get("is_first_deploy") == "true":
                account = row.get("account")
                if account in first_seen:
                    self.fail(name, row_no, f"repeated first deploy for {account}")
                first_seen.add(account)

    def _d4(self):
        for row_no, row in self.rows("d4_invocations"):
            name = "d4_invocations"
            self.check_common(name, row_no, row,
                              [("int", "block_num"), ("timestamp", "timestamp"),
                               ("txid", "tx_id"), ("bool", "has_error")])
            self.check_name(name, row_no, row, "contract")
            self.check_name(name, row_no, row, "authorizer", allow_empty=True)
            if row.get("contract") in self.system_accounts:
                self.fail(name, row_no,
                          f"system contract in invocations: {row.get('contract')}")

    def _d5(self):
        seen = set()
        for row_no, row in self.rows("d5_tokens"):
            name = "d5_tokens"
            self.check_common(name, row_no, row,
                              [("timestamp", "created_at"), ("int", "precision"),
                               ("int", "max_supply_units")])
            self.check_name(name, row_no, row, "contract")
            self.check_name(name, row_no, row, "issuer")
            key = (row.get("contract"), row.get("symbol"))
            if key in seen:
                self.fail(name, row_no, f"duplicate token {key}")
            seen.add(key)
        for row_no, row in self.rows("d5_token_transfers"):
            name = "d5_token_transfers"
            self.check_common(name, row_no, row,
                              [("int", "block_num"), ("timestamp", "timestamp"),
                               ("int", "amount_units")])
            self.check_name(name, row_no, row, "contract")
            self.check_name(name, row_no, row, "from")
            self.check_name(name, row_no, row, "to")

    def _d6(self):
        seen = set()
        for row_no, row in self.rows("d6_accounts"):
            name = "d6_accounts"
            self.check_common(name, row_no, row,
                              [("int", "block_num"), ("timestamp", "timestamp")])
            self.check_name(name, row_no, row, "creator")
            new_account = row.get("new_account", "")
            if not validate_account_name(new_account):
                self.fail(name, row_no, f"invalid new_account: {new_account!r}")
            elif new_account in seen:
                self.fail(name, row_no, f"duplicate new_account: {new_account}")
            else:
                seen.add(new_account)

    def _d7(self):
        for row_no, row in self.rows("d7_resources"):
            name = "d7_resources"
            self.check_common(name, row_no, row,
                              [("int", "block_num"), ("timestamp", "timestamp"),
                               ("eos", "eos_amount")])
            self.check_name(name, row_no, row, "actor")
            action = row.get("action")
            expected = etl.D7_CATEGORY.get(action)
            if expected is None:
                self.fail(name, row_no, f"unknown resource action: {action!r}")
            elif row.get("category") != expected:
                self.fail(name, row_no,
                          f"category {row.get('category')!r} != {expected!r} "
                          f"for action {action}")


def run_validate(dataset_dir, system_accounts=None):
    """Check every dataset invariant; returns (exit_code, violations).

    Exit codes: 0 clean, 2 nothing to validate, 3 violations found.
    """
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.is_dir():
        return 2, [f"not a directory: {dataset_dir}"]
    checker = _Checker(dataset_dir, system_accounts).run()
    if checker.files_seen == 0:
        return 2, [f"no dataset files found in {dataset_dir}"]
    return (3 if checker.violations else 0), checker.violations
