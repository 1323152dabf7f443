"""Brute-force re-derivation of the ground-truth manifest from raw files.

Deliberately independent of the package's ingest/etl/stats code: plain
json line reads, plain dict/set bookkeeping. Used to cross-check both the
generator's manifest and the extractor outputs.
"""

import json
import re
from collections import Counter
from pathlib import Path

SYSTEM = {"eosio", "eosio.token", "eosio.msig", "eosio.ram", "eosio.ramfee"}
RESOURCE_CATEGORY = {
    "stakecpu": "CPU", "unstakecpu": "CPU",
    "stakenet": "NET", "unstakenet": "NET",
    "buyram": "RAM", "sellram": "RAM",
    "buyrex": "REX", "sellrex": "REX", "rentcpu": "REX", "rentnet": "REX",
}
_FILE_RE = re.compile(r"^(blocks|traces|receipts)_(\d+)-(\d+)\.jsonl$")


def _read(raw_dir, kind):
    files = []
    for path in Path(raw_dir).iterdir():
        m = _FILE_RE.match(path.name)
        if m and m.group(1) == kind:
            files.append((int(m.group(2)), path))
    for _, path in sorted(files):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)


def _eos_units(quantity):
    whole, rest = quantity.split(".", 1)
    frac = rest.split(" ")[0]
    assert len(frac) == 4, quantity
    return int(whole) * 10_000 + int(frac)


def derive_manifest(raw_dir, bucket_size):
    d1 = Counter()
    producers = set()
    series = {}
    for block in _read(raw_dir, "blocks"):
        d1["block_rows"] += 1
        producers.add(block["producer"])
        start = ((block["block_num"] - 1) // bucket_size) * bucket_size + 1
        bucket = series.setdefault(str(start), Counter())
        bucket["block_count"] += 1
        for tx in block["transactions"]:
            d1["tx_rows"] += 1
            d1["action_rows"] += len(tx["actions"])
            d1["cpu_us_total"] += tx["cpu_usage_us"]
            d1["net_words_total"] += tx["net_usage_words"]
            bucket["tx_count"] += 1
            bucket["action_count"] += len(tx["actions"])
            if tx["is_deferred"]:
                d1["deferred_tx_count"] += 1
                bucket["deferred_count"] += 1

    # token contracts: latest deployed interface exports create/issue/transfer
    interfaces = {}
    for t in _read(raw_dir, "traces"):
        if (t["contract"] == "eosio" and t["function"] == "setcode"
                and t["receiver"] == "eosio"):
            if t["data"]["code"] == "":
                interfaces[t["data"]["account"]] = set()
            else:
                interfaces[t["data"]["account"]] = set(t["data"].get("abi") or [])
    token_set = {
        account for account, interface in interfaces.items()
        if {"create", "issue", "transfer"} <= interface
    }

    d2 = Counter()
    d2_accounts = set()
    memo_terms = Counter()
    d3 = Counter()
    d3_contracts = set()
    d3_deployed = set()
    d4 = Counter()
    d4_functions = Counter()
    d4_authorizers = set()
    d5 = Counter()
    d5_holders = set()
    d6 = Counter()
    d6_creators = set()
    d7_actions = Counter()
    d7_categories = Counter()
    d7_sums = Counter()

    for t in _read(raw_dir, "traces"):
        contract, function = t["contract"], t["function"]
        delivered = t["receiver"] == contract
        top = t["parent_seq"] is None
        data = t["data"]
        if contract == "eosio.token" and function == "transfer" and delivered:
            units = _eos_units(data["quantity"])
            kind = "external" if top else "internal"
            d2["rows"] += 1
            d2[kind + "_count"] += 1
            d2[kind + "_sum_units"] += units
            d2["amount_sum_units"] += units
            d2["max_amount_units"] = max(d2["max_amount_units"], units)
            d2_accounts.add(data["from"])
            d2_accounts.add(data["to"])
            for token in data["memo"].split():
                memo_terms[token] += 1
        if top and contract not in SYSTEM:
            d4["rows"] += 1
            d4_functions[function] += 1
            if t["error"] is not None:
                d4["error_count"] += 1
            if t["authorizers"]:
                d4_authorizers.add(t["authorizers"][0]["actor"])
        if contract == "eosio" and function == "setcode" and delivered:
            d3["rows"] += 1
            if data["code"] == "":
                d3["setemptycode_count"] += 1
            else:
                d3["setcode_count"] += 1
                d3["hex_size_total"] += len(data["code"])
                if data["account"] not in d3_deployed:
                    d3["first_deploy_count"] += 1
                d3_deployed.add(data["account"])
            d3_contracts.add(data["account"])
        if contract in token_set and delivered:
            if function == "create":
                d5["token_rows"] += 1
            elif function == "transfer":
                d5["transfer_rows"] += 1
                d5_holders.add(data["from"])
                d5_holders.add(data["to"])
        if contract == "eosio" and function == "newaccount" and delivered:
            d6["rows"] += 1
            d6_creators.add(t["authorizers"][0]["actor"])
        if contract == "eosio" and function in RESOURCE_CATEGORY and delivered:
            category = RESOURCE_CATEGORY[function]
            d7_actions[function] += 1
            d7_categories[category] += 1
            d7_sums[category] += _eos_units(data["amount"])

    # receipts must join 1:1 with block transactions
    receipt_keys = set()
    for r in _read(raw_dir, "receipts"):
        receipt_keys.add((r["tx_id"], r["block_num"]))
    assert len(receipt_keys) == d1["tx_rows"]

    top_functions = sorted(d4_functions.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
    return {
        "d1": {
            "block_rows": d1["block_rows"],
            "tx_rows": d1["tx_rows"],
            "action_rows": d1["action_rows"],
            "deferred_tx_count": d1["deferred_tx_count"],
            "cpu_us_total": d1["cpu_us_total"],
            "net_words_total": d1["net_words_total"],
            "distinct_producers": len(producers),
        },
        "d2": {
            "rows": d2["rows"],
            "internal_count": d2["internal_count"],
            "external_count": d2["external_count"],
            "internal_sum_units": d2["internal_sum_units"],
            "external_sum_units": d2["external_sum_units"],
            "amount_sum_units": d2["amount_sum_units"],
            "max_amount_units": d2["max_amount_units"],
            "distinct_accounts": len(d2_accounts),
            "memo_terms": dict(sorted(memo_terms.items())),
        },
        "d3": {
            "rows": d3["rows"],
            "setcode_count": d3["setcode_count"],
            "setemptycode_count": d3["setemptycode_count"],
            "first_deploy_count": d3["first_deploy_count"],
            "hex_size_total": d3["hex_size_total"],
            "distinct_contracts": len(d3_contracts),
        },
        "d4": {
            "rows": d4["rows"],
            "error_count": d4["error_count"],
            "distinct_authorizers": len(d4_authorizers),
            "function_counts": dict(sorted(d4_functions.items())),
            "top_functions": [[name, count] for name, count in top_functions],
        },
        "d5": {
            "token_rows": d5["token_rows"],
            "transfer_rows": d5["transfer_rows"],
            "token_contracts": sorted(token_set),
            "distinct_holders": len(d5_holders),
        },
        "d6": {"rows": d6["rows"], "distinct_creators": len(d6_creators)},
        "d7": {
            "rows": sum(d7_actions.values()),
            "action_counts": {a: d7_actions.get(a, 0) for a in sorted(RESOURCE_CATEGORY)},
            "category_counts": {c: d7_categories.get(c, 0)
                                for c in ("CPU", "NET", "RAM", "REX")},
            "category_sum_units": {c: d7_sums.get(c, 0)
                                   for c in ("CPU", "NET", "RAM", "REX")},
        },
        "series": {
            "bucket_size": bucket_size,
            "d1": {start: dict(counter) for start, counter in sorted(
                series.items(), key=lambda kv: int(kv[0]))},
        },
        "anomaly_count": 0,
    }
