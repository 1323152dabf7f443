"""Streaming extraction and exploration toolkit for EOSIO-style chain data."""

from .model import (
    ActionTrace,
    RawAction,
    RawBlock,
    RawTransaction,
    TransactionReceipt,
    format_eos,
    parse_eos_amount,
    validate_account_name,
)

__all__ = [
    "ActionTrace",
    "RawAction",
    "RawBlock",
    "RawTransaction",
    "TransactionReceipt",
    "format_eos",
    "parse_eos_amount",
    "validate_account_name",
]

__version__ = "0.1.0"
