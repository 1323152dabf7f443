"""Deterministic synthetic-chain generator.

Emits raw blocks/traces/receipts JSON-lines fixtures together with a
ground-truth manifest of every value the extractors and stats must
reproduce. All randomness comes from one seeded PRNG stream drawn in a
fixed order, so output is a pure function of the config. The manifest is
built while generating, never by re-reading the emitted files.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from random import Random

from .etl import D7_CATEGORY, DEFAULT_SYSTEM_ACCOUNTS
from .model import format_eos

NAME_ALPHABET = "abcdefghijklmnopqrstuvwxyz12345"
GENESIS = datetime(2019, 1, 1, tzinfo=timezone.utc)
BLOCK_INTERVAL_MS = 500
BLOCKS_PER_PRODUCER_SLOT = 12
N_PRODUCERS = 21

DAPP_FUNCTIONS = ["tweet", "bet", "reveal", "resolvebet", "play", "claim", "roll"]
NON_TOKEN_ABI = ["transfer", "bet", "reveal", "claim"]
TOKEN_ABI_EXTRAS = ["retire", "open", "close"]
SYMBOL_POOL = [
    "ABC", "XYZ", "TOK", "GLD", "SLV", "GEM", "PAY", "BTX", "ETE", "USD",
    "KAR", "LUZ", "MAX", "NIO", "OPL", "QRS",
]

DEFAULT_RESOURCE_MIX = {
    "stakecpu": 0.25,
    "unstakecpu": 0.11,
    "stakenet": 0.15,
    "unstakenet": 0.05,
    "buyram": 0.14,
    "sellram": 0.06,
    "buyrex": 0.09,
    "sellrex": 0.04,
    "rentcpu": 0.10,
    "rentnet": 0.01,
}

DEFAULT_MEMO_MIX = {
    "bet": 5, "win": 3, "payout": 2, "thanks": 2, "airdrop": 1,
    "refund": 1, "deposit": 3, "withdraw": 2,
}

DEFAULT_ACTIVITY_MIX = {
    "eos_transfer": 0.45,
    "token_transfer": 0.18,
    "invocation": 0.20,
    "resource": 0.12,
    "newaccount": 0.04,
    "setcode": 0.01,
}


class ConfigError(ValueError):
    pass


@dataclass
class GenConfig:
    seed: int = 1
    n_blocks: int = 1000
    mean_tx_per_block: float = 28.0
    n_accounts: int = 60
    n_contracts: int = 8
    n_token_contracts: int = 3
    deferred_ratio: float = 1.0 / 7.0
    inline_transfer_ratio: float = 0.3
    resource_action_mix: dict = field(default_factory=lambda: dict(DEFAULT_RESOURCE_MIX))
    memo_term_mix: dict = field(default_factory=lambda: dict(DEFAULT_MEMO_MIX))
    activity_mix: dict = field(default_factory=lambda: dict(DEFAULT_ACTIVITY_MIX))
    notification_ratio: float = 0.25
    error_ratio: float = 0.05
    blocks_per_file: int = 10_000
    manifest_bucket_size: int = 1000

    def validate(self):
        if self.n_blocks < 4:
            raise ConfigError("n_blocks must be >= 4 (three setup blocks)")
        for name in ("deferred_ratio", "inline_transfer_ratio",
                     "notification_ratio", "error_ratio"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.mean_tx_per_block < 0:
            raise ConfigError("mean_tx_per_block must be >= 0")
        if self.n_token_contracts > self.n_contracts:
            raise ConfigError("n_token_contracts cannot exceed n_contracts")
        if self.n_accounts < 2:
            raise ConfigError("n_accounts must be >= 2")
        if set(self.resource_action_mix) - set(D7_CATEGORY):
            raise ConfigError("resource_action_mix has unknown actions")
        if self.blocks_per_file < 1 or self.manifest_bucket_size < 1:
            raise ConfigError("file and bucket sizes must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "GenConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)


def _encode_index(index: int, width: int = 4) -> str:
    chars = []
    for _ in range(width):
        index, rem = divmod(index, len(NAME_ALPHABET))
        chars.append(NAME_ALPHABET[rem])
    return "".join(chars)


def _timestamp(block_num: int) -> str:
    instant = GENESIS + timedelta(milliseconds=(block_num - 1) * BLOCK_INTERVAL_MS)
    return instant.strftime("%Y-%m-%dT%H:%M:%S.") + f"{instant.microsecond // 1000:03d}Z"


def _poisson(rng: Random, lam: float) -> int:
    if lam <= 0:
        return 0
    threshold = math.exp(-lam)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= threshold:
            return k
        k += 1


def _format_asset(units: int, precision: int, symbol: str) -> str:
    if precision == 0:
        return f"{units} {symbol}"
    whole, frac = divmod(units, 10 ** precision)
    return f"{whole}.{frac:0{precision}d} {symbol}"


def _weighted_choice(rng: Random, weights: dict):
    names = sorted(weights)
    return rng.choices(names, weights=[weights[n] for n in names], k=1)[0]


class ManifestBuilder:
    """Mirrors the extraction rules on records as they are generated."""

    def __init__(self, config: GenConfig, token_set):
        self.config = config
        self.token_set = frozenset(token_set)
        self.d1 = Counter()
        self.producers = set()
        self.series = {}
        self.d2 = Counter()
        self.d2_accounts = set()
        self.memo_terms = Counter()
        self.d3 = Counter()
        self.d3_contracts = set()
        self.d3_deployed = set()
        self.d4 = Counter()
        self.d4_functions = Counter()
        self.d4_authorizers = set()
        self.d5 = Counter()
        self.d5_holders = set()
        self.d6 = Counter()
        self.d6_creators = set()
        self.d7_actions = Counter()
        self.d7_categories = Counter()
        self.d7_sums = Counter()

    def _bucket(self, block_num: int) -> int:
        size = self.config.manifest_bucket_size
        return ((block_num - 1) // size) * size + 1

    def add_block(self, block: dict):
        self.d1["block_rows"] += 1
        self.producers.add(block["producer"])
        bucket = self.series.setdefault(str(self._bucket(block["block_num"])), Counter())
        bucket["block_count"] += 1
        for tx in block["transactions"]:
            self.d1["tx_rows"] += 1
            self.d1["action_rows"] += len(tx["actions"])
            self.d1["cpu_us_total"] += tx["cpu_usage_us"]
            self.d1["net_words_total"] += tx["net_usage_words"]
            bucket["tx_count"] += 1
            bucket["action_count"] += len(tx["actions"])
            if tx["is_deferred"]:
                self.d1["deferred_tx_count"] += 1
                bucket["deferred_count"] += 1

    def add_trace(self, trace: dict):
        contract, function = trace["contract"], trace["function"]
        delivered = trace["receiver"] == contract
        top_level = trace["parent_seq"] is None
        data = trace["data"]
        if contract == "eosio.token" and function == "transfer" and delivered:
            units = data["units"]
            self.d2["rows"] += 1
            kind = "external" if top_level else "internal"
            self.d2[f"{kind}_count"] += 1
            self.d2[f"{kind}_sum_units"] += units
            self.d2["amount_sum_units"] += units
            self.d2["max_amount_units"] = max(self.d2["max_amount_units"], units)
            self.d2_accounts.add(data["from"])
            self.d2_accounts.add(data["to"])
        if top_level and contract not in DEFAULT_SYSTEM_ACCOUNTS:
            self.d4["rows"] += 1
            self.d4_functions[function] += 1
            if trace["error"] is not None:
                self.d4["error_count"] += 1
            if trace["authorizers"]:
                self.d4_authorizers.add(trace["authorizers"][0]["actor"])
        if contract == "eosio" and function == "setcode" and delivered:
            self.d3["rows"] += 1
            code = data["code"]
            if code == "":
                self.d3["setemptycode_count"] += 1
            else:
                self.d3["setcode_count"] += 1
                self.d3["hex_size_total"] += len(code)
                if data["account"] not in self.d3_deployed:
                    self.d3["first_deploy_count"] += 1
                self.d3_deployed.add(data["account"])
            self.d3_contracts.add(data["account"])
        if contract in self.token_set and delivered:
            if function == "create":
                self.d5["token_rows"] += 1
            elif function == "transfer":
                self.d5["transfer_rows"] += 1
                self.d5_holders.add(data["from"])
                self.d5_holders.add(data["to"])
        if contract == "eosio" and function == "newaccount" and delivered:
            self.d6["rows"] += 1
            self.d6_creators.add(trace["authorizers"][0]["actor"])
        if contract == "eosio" and function in D7_CATEGORY and delivered:
            category = D7_CATEGORY[function]
            self.d7_actions[function] += 1
            self.d7_categories[category] += 1
            self.d7_sums[category] += data["units"]

    def add_memo_terms(self, terms):
        for term in terms:
            self.memo_terms[term] += 1

    def build(self) -> dict:
        top = sorted(self.d4_functions.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
        return {
            "d1": {
                "block_rows": self.d1["block_rows"],
                "tx_rows": self.d1["tx_rows"],
                "action_rows": self.d1["action_rows"],
                "deferred_tx_count": self.d1["deferred_tx_count"],
                "cpu_us_total": self.d1["cpu_us_total"],
                "net_words_total": self.d1["net_words_total"],
                "distinct_producers": len(self.producers),
            },
            "d2": {
                "rows": self.d2["rows"],
                "internal_count": self.d2["internal_count"],
                "external_count": self.d2["external_count"],
                "internal_sum_units": self.d2["internal_sum_units"],
                "external_sum_units": self.d2["external_sum_units"],
                "amount_sum_units": self.d2["amount_sum_units"],
                "max_amount_units": self.d2["max_amount_units"],
                "distinct_accounts": len(self.d2_accounts),
                "memo_terms": dict(sorted(self.memo_terms.items())),
            },
            "d3": {
                "rows": self.d3["rows"],
                "setcode_count": self.d3["setcode_count"],
                "setemptycode_count": self.d3["setemptycode_count"],
                "first_deploy_count": self.d3["first_deploy_count"],
                "hex_size_total": self.d3["hex_size_total"],
                "distinct_contracts": len(self.d3_contracts),
            },
            "d4": {
                "rows": self.d4["rows"],
                "error_count": self.d4["error_count"],
                "distinct_authorizers": len(self.d4_authorizers),
                "function_counts": dict(sorted(self.d4_functions.items())),
                "top_functions": [[name, count] for name, count in top],
            },
            "d5": {
                "token_rows": self.d5["token_rows"],
                "transfer_rows": self.d5["transfer_rows"],
                "token_contracts": sorted(self.token_set),
                "distinct_holders": len(self.d5_holders),
            },
            "d6": {
                "rows": self.d6["rows"],
                "distinct_creators": len(self.d6_creators),
            },
            "d7": {
                "rows": sum(self.d7_actions.values()),
                "action_counts": {a: self.d7_actions.get(a, 0) for a in sorted(D7_CATEGORY)},
                "category_counts": {c: self.d7_categories.get(c, 0)
                                    for c in ("CPU", "NET", "RAM", "REX")},
                "category_sum_units": {c: self.d7_sums.get(c, 0)
                                       for c in ("CPU", "NET", "RAM", "REX")},
            },
            "series": {
                "bucket_size": self.config.manifest_bucket_size,
                "d1": {start: dict(counter) for start, counter
                       in sorted(self.series.items(), key=lambda kv: int(kv[0]))},
            },
            "anomaly_count": 0,
        }


class _FileFamily:
    """Rotates <kind>_<start>-<end>.jsonl files on block-chunk boundaries."""

    def __init__(self, out_dir: Path, kind: str, blocks_per_file: int, n_blocks: int):
        self.out_dir = out_dir
        self.kind = kind
        self.blocks_per_file = blocks_per_file
        self.n_blocks = n_blocks
        self._fh = None
        self._end = 0

    def ensure(self, block_num: int):
        """Open the chunk file covering block_num (even if it stays empty)."""
        if self._fh is None or block_num > self._end:
            if self._fh is not None:
                self._fh.close()
            start = ((block_num - 1) // self.blocks_per_file) * self.blocks_per_file + 1
            self._end = min(start + self.blocks_per_file - 1, self.n_blocks)
            path = self.out_dir / f"{self.kind}_{start}-{self._end}.jsonl"
            self._fh = open(path, "w", encoding="utf-8")

    def write(self, block_num: int, line: str):
        self.ensure(block_num)
        self._fh.write(line)

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class _ChainState:
    def __init__(self, config: GenConfig, rng: Random):
        self.rng = rng
        self.users = [f"user{_encode_index(i)}" for i in range(config.n_accounts)]
        self.contracts = [f"dapp{_encode_index(i)}" for i in range(config.n_contracts)]
        self.token_contracts = self.contracts[: config.n_token_contracts]
        self.producers = [f"prod{_encode_index(i, 3)}" for i in range(N_PRODUCERS)]
        self.creators = [f"maker{NAME_ALPHABET[i]}" for i in range(5)]
        self.tokens = []  # (contract, symbol, precision), fixed once created
        self.acct_counter = 0
        self.seq = 0

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def new_account_name(self) -> str:
        name = f"acct{_encode_index(self.acct_counter, 5)}"
        self.acct_counter += 1
        return name

    def hex_id(self) -> str:
        return f"{self.rng.getrandbits(256):064x}"

    def random_code(self) -> str:
        n = self.rng.randint(100, 1500)
        return self.rng.getrandbits(8 * n).to_bytes(n, "big").hex()


def generate(config: GenConfig, out_dir):
    """Write the synthetic raw file set and manifest.json; return the manifest."""
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = Random(config.seed)
    state = _ChainState(config, rng)
    manifest = ManifestBuilder(config, state.token_contracts)
    families = {
        kind: _FileFamily(out_dir, kind, config.blocks_per_file, config.n_blocks)
        for kind in ("blocks", "traces", "receipts")
    }

    abis = {}
    for contract in state.contracts:
        if contract in state.token_contracts:
            extras = rng.sample(TOKEN_ABI_EXTRAS, rng.randint(0, len(TOKEN_ABI_EXTRAS)))
            abis[contract] = ["create", "issue", "transfer"] + sorted(extras)
        else:
            abis[contract] = list(NON_TOKEN_ABI)

    def auth(actor, permission="active"):
        return [{"actor": actor, "permission": permission}]

    for block_num in range(1, config.n_blocks + 1):
        timestamp = _timestamp(block_num)
        producer = state.producers[
            ((block_num - 1) // BLOCKS_PER_PRODUCER_SLOT) % len(state.producers)
        ]
        txs = []
        traces = []

        def add_tx(actions, traces_for_tx, deferred=False):
            tx_id = state.hex_id()
            is_deferred = deferred or rng.random() < config.deferred_ratio
            cpu = rng.randint(100, 2000)
            net = rng.randint(0, 2) if is_deferred else rng.randint(8, 64)
            txs.append({
                "tx_id": tx_id,
                "status": "executed",
                "is_deferred": is_deferred,
                "cpu_usage_us": cpu,
                "net_usage_words": net,
                "actions": actions,
            })
            for trace in traces_for_tx:
                trace["tx_id"] = tx_id
                trace["block_num"] = block_num
                traces.append(trace)

        def make_trace(contract, function, authorizers, data,
                       receiver=None, parent_seq=None, error=None):
            return {
                "global_seq": state.next_seq(),
                "tx_id": None,  # filled by add_tx
                "block_num": None,
                "parent_seq": parent_seq,
                "receiver": receiver if receiver is not None else contract,
                "contract": contract,
                "function": function,
                "authorizers": authorizers,
                "data": data,
                "hex_data": "",
                "error": error,
                "console": None,
            }

        def eos_transfer_traces(sender, recipient, units, memo, parent_seq):
            data = {
                "from": sender, "to": recipient,
                "quantity": format_eos(units), "memo": memo,
                "units": units,
            }
            main = make_trace("eosio.token", "transfer", auth(sender), data,
                              parent_seq=parent_seq)
            out = [main]
            if rng.random() < config.notification_ratio:
                for observer in (sender, recipient):
                    out.append(make_trace(
                        "eosio.token", "transfer", auth(sender), data,
                        receiver=observer, parent_seq=main["global_seq"],
                    ))
            return out

        if block_num == 1:
            # bootstrap accounts and contracts
            for name in state.users + state.contracts:
                creator = rng.choice(state.creators)
                action_data = {"creator": creator, "name": name}
                trace = make_trace("eosio", "newaccount", auth(creator), action_data)
                add_tx([_packaged("eosio", "newaccount", auth(creator), action_data)],
                       [trace], deferred=False)
        elif block_num == 2:
            for contract in state.contracts:
                code = state.random_code()
                data = {"account": contract, "code": code, "abi": abis[contract]}
                trace = make_trace("eosio", "setcode", auth(contract), data)
                add_tx([_packaged("eosio", "setcode", auth(contract), data)], [trace])
        elif block_num == 3:
            for contract in state.token_contracts:
                for symbol in rng.sample(SYMBOL_POOL, rng.randint(1, 2)):
                    if any(t[0] == contract and t[1] == symbol for t in state.tokens):
                        continue
                    precision = rng.choice([0, 2, 4, 4, 8])
                    issuer = rng.choice(state.users)
                    max_units = rng.randint(10 ** 6, 10 ** 12)
                    data = {
                        "issuer": issuer,
                        "maximum_supply": _format_asset(max_units, precision, symbol),
                    }
                    trace = make_trace(contract, "create", auth(contract), data)
                    add_tx([_packaged(contract, "create", auth(contract), data)], [trace])
                    state.tokens.append((contract, symbol, precision))
        else:
            for _ in range(_poisson(rng, config.mean_tx_per_block)):
                activity = _weighted_choice(rng, config.activity_mix)
                if activity == "token_transfer" and not state.tokens:
                    activity = "invocation"
                if activity == "eos_transfer":
                    sender, recipient = rng.choice(state.users), rng.choice(state.users)
                    exponent = min(rng.random(), rng.random()) * 8
                    units = max(1, int(10 ** exponent))
                    k = rng.randint(1, 3)
                    terms = rng.choices(
                        sorted(config.memo_term_mix),
                        weights=[config.memo_term_mix[t]
                                 for t in sorted(config.memo_term_mix)],
                        k=k,
                    )
                    memo = " ".join(terms)
                    manifest.add_memo_terms(terms)
                    if rng.random() < config.inline_transfer_ratio:
                        # internal: inline child of a contract invocation
                        contract = rng.choice(state.contracts)
                        function = rng.choice(DAPP_FUNCTIONS)
                        parent = make_trace(contract, function, auth(sender),
                                            {"ref": memo})
                        children = eos_transfer_traces(
                            sender, recipient, units, memo, parent["global_seq"]
                        )
                        add_tx(
                            [_packaged(contract, function, auth(sender), {"ref": memo})],
                            [parent] + children,
                        )
                    else:
                        action_data = {
                            "from": sender, "to": recipient,
                            "quantity": format_eos(units), "memo": memo,
                        }
                        add_tx(
                            [_packaged("eosio.token", "transfer", auth(sender),
                                       action_data)],
                            eos_transfer_traces(sender, recipient, units, memo, None),
                        )
                elif activity == "token_transfer" and state.tokens:
                    contract, symbol, precision = rng.choice(state.tokens)
                    sender, recipient = rng.choice(state.users), rng.choice(state.users)
                    units = rng.randint(1, 10 ** 6)
                    quantity = _format_asset(units, precision, symbol)
                    data = {"from": sender, "to": recipient,
                            "quantity": quantity, "memo": "token move"}
                    trace = make_trace(contract, "transfer", auth(sender), data)
                    add_tx([_packaged(contract, "transfer", auth(sender), data)],
                           [trace])
                elif activity == "invocation":
                    contract = rng.choice(state.contracts)
                    function = rng.choice(DAPP_FUNCTIONS)
                    actor = rng.choice(state.users)
                    error = ("assertion failure in contract"
                             if rng.random() < config.error_ratio else None)
                    data = {"payload": rng.randint(0, 10 ** 9)}
                    trace = make_trace(contract, function, auth(actor), data,
                                       error=error)
                    add_tx([_packaged(contract, function, auth(actor), data)], [trace])
                elif activity == "resource":
                    action = _weighted_choice(rng, config.resource_action_mix)
                    actor = rng.choice(state.users)
                    units = max(1, int(10 ** (rng.random() * 7)))
                    data = {"actor": actor, "amount": format_eos(units),
                            "units": units}
                    trace = make_trace("eosio", action, auth(actor), data)
                    add_tx([_packaged("eosio", action, auth(actor),
                                      {"actor": actor, "amount": format_eos(units)})],
                           [trace])
                elif activity == "newaccount":
                    creator = rng.choice(state.users)
                    name = state.new_account_name()
                    data = {"creator": creator, "name": name}
                    trace = make_trace("eosio", "newaccount", auth(creator), data)
                    add_tx([_packaged("eosio", "newaccount", auth(creator), data)],
                           [trace])
                elif activity == "setcode":
                    contract = rng.choice(state.contracts)
                    non_token = [c for c in state.contracts
                                 if c not in state.token_contracts]
                    if rng.random() < 0.2 and non_token:
                        contract = rng.choice(non_token)
                        code, abi = "", []
                    else:
                        code, abi = state.random_code(), abis[contract]
                    data = {"account": contract, "code": code, "abi": abi}
                    trace = make_trace("eosio", "setcode", auth(contract), data)
                    add_tx([_packaged("eosio", "setcode", auth(contract), data)],
                           [trace])

        for family in families.values():
            family.ensure(block_num)
        block = {
            "block_num": block_num,
            "block_id": state.hex_id(),
            "timestamp": timestamp,
            "producer": producer,
            "transactions": txs,
        }
        manifest.add_block(block)
        families["blocks"].write(block_num, json.dumps(block, separators=(",", ":")) + "\n")
        for trace in traces:
            manifest.add_trace(trace)
            line_obj = dict(trace)
            line_obj["data"] = {k: v for k, v in trace["data"].items() if k != "units"}
            families["traces"].write(
                block_num, json.dumps(line_obj, separators=(",", ":")) + "\n"
            )
        for tx in txs:
            receipt = {
                "tx_id": tx["tx_id"],
                "block_num": block_num,
                "status": tx["status"],
                "cpu_usage_us": tx["cpu_usage_us"],
                "net_usage_words": tx["net_usage_words"],
            }
            families["receipts"].write(
                block_num, json.dumps(receipt, separators=(",", ":")) + "\n"
            )

    for family in families.values():
        family.close()

    result = manifest.build()
    result["config"] = asdict(config)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return result


def _packaged(contract, function, authorizers, data):
    return {
        "contract": contract,
        "function": function,
        "authorizers": authorizers,
        "data": data,
        "hex_data": "",
    }
