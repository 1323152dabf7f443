"""Canonical domain types for raw EOSIO-style chain data.

Everything downstream (ingest, extraction, stats) is expressed in these
types. All values are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

NAME_CHARS = set("abcdefghijklmnopqrstuvwxyz12345.")
TX_ID_RE = re.compile(r"^[0-9a-f]{64}$")
TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")

STATUSES = ("executed", "soft_fail", "hard_fail", "delayed", "expired")

EOS_PRECISION = 4
EOS_UNITS_PER_WHOLE = 10 ** EOS_PRECISION

_AMOUNT_RE = re.compile(r"^(\d+)\.(\d{4}) EOS$")
_QUANTITY_RE = re.compile(r"^(\d+)(?:\.(\d+))? ([A-Z]{1,7})$")


class ChainDataError(ValueError):
    """Raised on malformed chain data (bad amount, unknown status, ...)."""


def validate_account_name(name) -> bool:
    """Check the on-chain account-name grammar.

    1 to 12 characters drawn from lowercase a-z, digits 1-5 and '.',
    with no leading or trailing dot. Pure predicate, never raises.
    """
    if not isinstance(name, str):
        return False
    if not 1 <= len(name) <= 12:
        return False
    if name[0] == "." or name[-1] == ".":
        return False
    for ch in name:
        if ch not in NAME_CHARS:
            return False
    return True


def parse_eos_amount(text: str) -> int:
    """Parse "D.DDDD EOS" into integer 10^-4 EOS units.

    Amounts are carried as integers, never floats: observed extremes
    (0.0001 vs 99,999,990.01 EOS) exceed safe float precision for sums.
    """
    if not isinstance(text, str):
        raise ChainDataError(f"EOS amount must be text, got {type(text).__name__}")
    m = _AMOUNT_RE.match(text)
    if m is None:
        raise ChainDataError(f"malformed EOS amount: {text!r}")
    return int(m.group(1)) * EOS_UNITS_PER_WHOLE + int(m.group(2))


def format_eos(units: int) -> str:
    """Format integer units back to the canonical "D.DDDD EOS" text."""
    if units < 0:
        raise ChainDataError(f"negative EOS amount: {units}")
    whole, frac = divmod(units, EOS_UNITS_PER_WHOLE)
    return f"{whole}.{frac:04d} EOS"


def parse_asset_quantity(text: str) -> tuple[int, int, str]:
    """Parse a generic "AMOUNT SYMBOL" asset string.

    Returns (units, precision, symbol), where units is the amount scaled
    by 10^precision. Precision is inferred from the printed fractional
    digits ("12.345 ABC" -> (12345, 3, "ABC")).
    """
    if not isinstance(text, str):
        raise ChainDataError(f"asset quantity must be text, got {type(text).__name__}")
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise ChainDataError(f"malformed asset quantity: {text!r}")
    whole, frac, symbol = m.group(1), m.group(2) or "", m.group(3)
    units = int(whole) * 10 ** len(frac) + (int(frac) if frac else 0)
    return units, len(frac), symbol


def canonical_json(obj) -> str:
    """Stable compact JSON used wherever byte-determinism matters."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _check_status(status: str) -> str:
    if status not in STATUSES:
        raise ChainDataError(f"unknown transaction status: {status!r}")
    return status


@dataclass(frozen=True)
class RawAction:
    contract: str
    function: str
    authorizers: tuple  # of (actor, permission) pairs
    data: dict = field(default_factory=dict)
    hex_data: str = ""

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RawAction":
        auth = tuple((a["actor"], a["permission"]) for a in obj.get("authorizers", []))
        return cls(
            contract=obj["contract"],
            function=obj["function"],
            authorizers=auth,
            data=obj.get("data", {}),
            hex_data=obj.get("hex_data", ""),
        )

    def to_json_obj(self) -> dict:
        return {
            "contract": self.contract,
            "function": self.function,
            "authorizers": [
                {"actor": actor, "permission": perm} for actor, perm in self.authorizers
            ],
            "data": self.data,
            "hex_data": self.hex_data,
        }


@dataclass(frozen=True)
class RawTransaction:
    tx_id: str
    status: str
    is_deferred: bool
    cpu_usage_us: int | None
    net_usage_words: int | None
    actions: tuple

    def __post_init__(self):
        _check_status(self.status)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RawTransaction":
        return cls(
            tx_id=obj["tx_id"],
            status=obj["status"],
            is_deferred=bool(obj["is_deferred"]),
            cpu_usage_us=obj.get("cpu_usage_us"),
            net_usage_words=obj.get("net_usage_words"),
            actions=tuple(RawAction.from_json_obj(a) for a in obj.get("actions", [])),
        )

    def to_json_obj(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "status": self.status,
            "is_deferred": self.is_deferred,
            "cpu_usage_us": self.cpu_usage_us,
            "net_usage_words": self.net_usage_words,
            "actions": [a.to_json_obj() for a in self.actions],
        }


@dataclass(frozen=True)
class RawBlock:
    block_num: int
    block_id: str
    timestamp: str
    producer: str
    transactions: tuple

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RawBlock":
        return cls(
            block_num=int(obj["block_num"]),
            block_id=obj["block_id"],
            timestamp=obj["timestamp"],
            producer=obj["producer"],
            transactions=tuple(
                RawTransaction.from_json_obj(t) for t in obj.get("transactions", [])
            ),
        )

    def to_json_obj(self) -> dict:
        return {
            "block_num": self.block_num,
            "block_id": self.block_id,
            "timestamp": self.timestamp,
            "producer": self.producer,
            "transactions": [t.to_json_obj() for t in self.transactions],
        }


@dataclass(frozen=True)
class ActionTrace:
    """Flattened run-time call record.

    parent_seq is None for top-level (block-packaged) actions; inline
    actions carry the global_seq of the trace that triggered them.
    """

    global_seq: int
    tx_id: str
    block_num: int
    parent_seq: int | None
    receiver: str
    act: RawAction
    error: str | None = None
    console: str | None = None

    @property
    def is_inline(self) -> bool:
        return self.parent_seq is not None

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ActionTrace":
        act = RawAction(
            contract=obj["contract"],
            function=obj["function"],
            authorizers=tuple(
                (a["actor"], a["permission"]) for a in obj.get("authorizers", [])
            ),
            data=obj.get("data", {}),
            hex_data=obj.get("hex_data", ""),
        )
        parent = obj.get("parent_seq")
        return cls(
            global_seq=int(obj["global_seq"]),
            tx_id=obj["tx_id"],
            block_num=int(obj["block_num"]),
            parent_seq=int(parent) if parent is not None else None,
            receiver=obj["receiver"],
            act=act,
            error=obj.get("error"),
            console=obj.get("console"),
        )

    def to_json_obj(self) -> dict:
        return {
            "global_seq": self.global_seq,
            "tx_id": self.tx_id,
            "block_num": self.block_num,
            "parent_seq": self.parent_seq,
            "receiver": self.receiver,
            "contract": self.act.contract,
            "function": self.act.function,
            "authorizers": [
                {"actor": actor, "permission": perm}
                for actor, perm in self.act.authorizers
            ],
            "data": self.act.data,
            "hex_data": self.act.hex_data,
            "error": self.error,
            "console": self.console,
        }


@dataclass(frozen=True)
class TransactionReceipt:
    tx_id: str
    block_num: int
    status: str
    cpu_usage_us: int
    net_usage_words: int

    def __post_init__(self):
        _check_status(self.status)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TransactionReceipt":
        return cls(
            tx_id=obj["tx_id"],
            block_num=int(obj["block_num"]),
            status=obj["status"],
            cpu_usage_us=int(obj["cpu_usage_us"]),
            net_usage_words=int(obj["net_usage_words"]),
        )

    def to_json_obj(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "block_num": self.block_num,
            "status": self.status,
            "cpu_usage_us": self.cpu_usage_us,
            "net_usage_words": self.net_usage_words,
        }


RECORD_TYPES = {
    "blocks": RawBlock,
    "traces": ActionTrace,
    "receipts": TransactionReceipt,
}
