"""Rebuild a manifest-shaped dict from extracted CSVs + stats accumulators."""

from collections import Counter
from pathlib import Path

from xeos import etl, stats

SERIES_METRICS = ("block_count", "tx_count", "action_count", "deferred_count")


def _d1_rows(dataset_dir):
    for kind, name in (("block", "d1_blocks"), ("tx", "d1_transactions"),
                       ("action", "d1_actions")):
        for row in etl.read_dataset(Path(dataset_dir) / f"{name}.csv"):
            yield kind, row


def manifest_from_outputs(dataset_dir, extract_report, bucket_size):
    dataset_dir = Path(dataset_dir)

    d1 = stats.D1Summary()
    for tagged in _d1_rows(dataset_dir):
        d1.update(tagged)

    d2 = stats.D2Summary()
    memo_terms = Counter()
    for row in etl.read_dataset(dataset_dir / "d2_transfers.csv"):
        d2.update(row)
        for term, count in stats.term_frequency([row["memo"]]):
            memo_terms[term] += count

    d3 = stats.D3Summary()
    first_deploys = 0
    for row in etl.read_dataset(dataset_dir / "d3_contracts.csv"):
        d3.update(row)
        if row["is_first_deploy"] == "true":
            first_deploys += 1

    d4 = stats.D4Summary()
    functions = Counter()
    for row in etl.read_dataset(dataset_dir / "d4_invocations.csv"):
        d4.update(row)
        functions[row["function"]] += 1
    top = sorted(functions.items(), key=lambda kv: (-kv[1], kv[0]))[:10]

    d5 = stats.D5Summary()
    for row in etl.read_dataset(dataset_dir / "d5_tokens.csv"):
        d5.update(("token", row))
    for row in etl.read_dataset(dataset_dir / "d5_token_transfers.csv"):
        d5.update(("transfer", row))

    d6 = stats.D6Summary()
    for row in etl.read_dataset(dataset_dir / "d6_accounts.csv"):
        d6.update(row)

    d7 = stats.D7Summary()
    for row in etl.read_dataset(dataset_dir / "d7_resources.csv"):
        d7.update(row)
    d7_result = d7.result()

    series = stats.d1_bucket_series(_d1_rows(dataset_dir), bucket_size)
    series_d1 = {}
    for start, values in series.rows():
        series_d1[str(start)] = {
            m: values.get(m, 0) for m in SERIES_METRICS if values.get(m, 0)
        }

    d2_result = d2.result()
    return {
        "d1": {
            "block_rows": d1.block_count,
            "tx_rows": d1.tx_count,
            "action_rows": d1.action_count,
            "deferred_tx_count": d1.deferred_count,
            "cpu_us_total": d1.cpu_us_total,
            "net_words_total": d1.net_words_total,
            "distinct_producers": len(d1.producers),
        },
        "d2": {
            "rows": d2_result["transfer_count"],
            "internal_count": d2_result["internal_count"],
            "external_count": d2_result["external_count"],
            "internal_sum_units": d2_result["internal_sum_units"],
            "external_sum_units": d2_result["external_sum_units"],
            "amount_sum_units": d2_result["amount_sum_units"],
            "max_amount_units": d2_result["max_amount_units"],
            "distinct_accounts": d2_result["distinct_accounts"],
            "memo_terms": dict(sorted(memo_terms.items())),
        },
        "d3": {
            "rows": d3.setcode_count + d3.setemptycode_count,
            "setcode_count": d3.setcode_count,
            "setemptycode_count": d3.setemptycode_count,
            "first_deploy_count": first_deploys,
            "hex_size_total": d3.hex_size_total,
            "distinct_contracts": len(d3.contracts),
        },
        "d4": {
            "rows": d4.invocation_count,
            "error_count": d4.error_count,
            "distinct_authorizers": len(d4.authorizers),
            "function_counts": dict(sorted(functions.items())),
            "top_functions": [[name, count] for name, count in top],
        },
        "d5": {
            "token_rows": d5.token_count,
            "transfer_rows": d5.transfer_count,
            "token_contracts": extract_report["token_contracts"],
            "distinct_holders": len(d5.holders),
        },
        "d6": {
            "rows": d6.creation_count,
            "distinct_creators": len(d6.creators),
        },
        "d7": {
            "rows": sum(d7_result["action_counts"].values()),
            "action_counts": d7_result["action_counts"],
            "category_counts": d7_result["category_counts"],
            "category_sum_units": d7_result["category_sum_units"],
        },
        "series": {"bucket_size": bucket_size, "d1": series_d1},
        "anomaly_count": extract_report["anomaly_count"],
    }


def diff_manifests(expected, observed):
    """Flat list of (path, expected, observed) mismatches; empty when equal."""
    mismatches = []

    def walk(path, a, b):
        if isinstance(a, dict) and isinstance(b, dict):
            for key in sorted(set(a) | set(b)):
                walk(f"{path}.{key}", a.get(key), b.get(key))
        elif a != b:
            mismatches.append((path, a, b))

    for section in ("d1", "d2", "d3", "d4", "d5", "d6", "d7",
                    "series", "anomaly_count"):
        walk(section, expected[section] if section in expected else None,
             observed[section] if section in observed else None)
    return mismatches
