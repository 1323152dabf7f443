"""Summary statistics and figure-style aggregations over the seven datasets.

Every statistic is a mergeable accumulator: fold rows in any partition,
merge the partials, and the result equals a single fold over the whole
stream. That associativity is the sanctioned parallelism model and is
property-tested.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

from . import etl
from .model import parse_eos_amount

BLOCK_INTERVAL_SECONDS = 0.5
DEFAULT_BUCKET_SIZE = 100_000

# log10 decade edges in 1e-4 EOS units, spanning 0.0001 EOS .. 1e8 EOS
AMOUNT_HISTOGRAM_EDGES = [10 ** k for k in range(0, 13)]
# contract hex code size decades, 1 byte .. 100 MB of hex text
CODE_SIZE_HISTOGRAM_EDGES = [10 ** k for k in range(0, 9)]

MIN_TOKEN_LENGTH = 2


def tps(mean_tx_per_block: float, block_interval: float = BLOCK_INTERVAL_SECONDS) -> float:
    """Transactions per second from mean transactions per block."""
    if mean_tx_per_block < 0:
        raise ValueError("mean_tx_per_block must be >= 0")
    return mean_tx_per_block / block_interval


def _mean(total, count):
    return total / count if count else 0.0


# -- per-dataset summary accumulators ------------------------------------------


class D1Summary:
    def __init__(self):
        self.block_count = 0
        self.tx_count = 0
        self.deferred_count = 0
        self.action_count = 0
        self.producers = set()
        self.cpu_us_total = 0
        self.net_words_total = 0

    def update(self, tagged):
        kind, row = tagged
        if kind == "block":
            self.block_count += 1
            self.producers.add(row["producer"])
        elif kind == "tx":
            self.tx_count += 1
            if row["is_deferred"] == "true":
                self.deferred_count += 1
            self.cpu_us_total += int(row["cpu_usage_us"])
            self.net_words_total += int(row["net_usage_words"])
        elif kind == "action":
            self.action_count += 1
        else:
            raise ValueError(f"unknown D1 row kind: {kind}")

    def merge(self, other: "D1Summary"):
        self.block_count += other.block_count
        self.tx_count += other.tx_count
        self.deferred_count += other.deferred_count
        self.action_count += other.action_count
        self.producers |= other.producers
        self.cpu_us_total += other.cpu_us_total
        self.net_words_total += other.net_words_total

    def result(self) -> dict:
        mean_tx = _mean(self.tx_count, self.block_count)
        return {
            "block_count": self.block_count,
            "tx_count": self.tx_count,
            "deferred_tx_count": self.deferred_count,
            "action_count": self.action_count,
            "distinct_producers": len(self.producers),
            "mean_tx_per_block": mean_tx,
            "tps": tps(mean_tx),
        }


class D2Summary:
    def __init__(self):
        self.internal_count = 0
        self.external_count = 0
        self.accounts = set()
        self.amount_sum_units = 0
        self.amount_max_units = 0
        self.internal_sum_units = 0
        self.external_sum_units = 0

    def update(self, row):
        units = parse_eos_amount(row["amount"])
        if row["kind"] == "internal":
            self.internal_count += 1
            self.internal_sum_units += units
        else:
            self.external_count += 1
            self.external_sum_units += units
        self.accounts.add(row["from"])
        self.accounts.add(row["to"])
        self.amount_sum_units += units
        self.amount_max_units = max(self.amount_max_units, units)

    def merge(self, other: "D2Summary"):
        self.internal_count += other.internal_count
        self.external_count += other.external_count
        self.accounts |= other.accounts
        self.amount_sum_units += other.amount_sum_units
        self.amount_max_units = max(self.amount_max_units, other.amount_max_units)
        self.internal_sum_units += other.internal_sum_units
        self.external_sum_units += other.external_sum_units

    def result(self) -> dict:
        count = self.internal_count + self.external_count
        return {
            "internal_count": self.internal_count,
            "external_count": self.external_count,
            "transfer_count": count,
            "distinct_accounts": len(self.accounts),
            "amount_sum_units": self.amount_sum_units,
            "internal_sum_units": self.internal_sum_units,
            "external_sum_units": self.external_sum_units,
            "mean_amount_units": _mean(self.amount_sum_units, count),
            "max_amount_units": self.amount_max_units,
        }


class D3Summary:
    def __init__(self):
        self.contracts = set()
        self.setcode_count = 0
        self.setemptycode_count = 0
        self.hex_size_total = 0

    def update(self, row):
        self.contracts.add(row["account"])
        if row["action_kind"] == "setcode":
            self.setcode_count += 1
            self.hex_size_total += int(row["code_size_bytes"])
        else:
            self.setemptycode_count += 1

    def merge(self, other: "D3Summary"):
        self.contracts |= other.contracts
        self.setcode_count += other.setcode_count
        self.setemptycode_count += other.setemptycode_count
        self.hex_size_total += other.hex_size_total

    def result(self) -> dict:
        return {
            "distinct_contracts": len(self.contracts),
            "setcode_count": self.setcode_count,
            "setemptycode_count": self.setemptycode_count,
            "mean_hex_code_size": _mean(self.hex_size_total, self.setcode_count),
        }


class D4Summary:
    def __init__(self):
        self.invocation_count = 0
        self.error_count = 0
        self.authorizers = set()

    def update(self, row):
        self.invocation_count += 1
        if row["has_error"] == "true":
            self.error_count += 1
        if row["authorizer"]:
            self.authorizers.add(row["authorizer"])

    def merge(self, other: "D4Summary"):
        self.invocation_count += other.invocation_count
        self.error_count += other.error_count
        self.authorizers |= other.authorizers

    def result(self) -> dict:
        return {
            "invocation_count": self.invocation_count,
            "error_count": self.error_count,
            "distinct_authorizers": len(self.authorizers),
        }


class D5Summary:
    def __init__(self):
        self.token_contracts = set()
        self.token_count = 0
        self.transfer_count = 0
        self.holders = set()

    def update(self, tagged):
        kind, row = tagged
        if kind == "token":
            self.token_count += 1
            self.token_contracts.add(row["contract"])
        elif kind == "transfer":
            self.transfer_count += 1
            self.token_contracts.add(row["contract"])
            self.holders.add(row["from"])
            self.holders.add(row["to"])
        else:
            raise ValueError(f"unknown D5 row kind: {kind}")

    def merge(self, other: "D5Summary"):
        self.token_contracts |= other.token_contracts
        self.token_count += other.token_count
        self.transfer_count += other.transfer_count
        self.holders |= other.holders

    def result(self) -> dict:
        return {
            "token_contract_count": len(self.token_contracts),
            "token_count": self.token_count,
            "token_transfer_count": self.transfer_count,
            "distinct_holders": len(self.holders),
        }


def d6_table(creation_count: int, creator_count: int) -> dict:
    """Table fields for account creation, from raw counts."""
    return {
        "creation_count": creation_count,
        "distinct_creators": creator_count,
        "mean_accounts_per_creator": _mean(creation_count, creator_count),
    }


class D6Summary:
    def __init__(self):
        self.creation_count = 0
        self.creators = set()

    def update(self, row):
        self.creation_count += 1
        self.creators.add(row["creator"])

    def merge(self, other: "D6Summary"):
        self.creation_count += other.creation_count
        self.creators |= other.creators

    def result(self) -> dict:
        return d6_table(self.creation_count, len(self.creators))


class D7Summary:
    def __init__(self):
        self.action_counts = Counter()
        self.category_counts = Counter()
        self.category_sums = Counter()

    def update(self, row):
        self.action_counts[row["action"]] += 1
        self.category_counts[row["category"]] += 1
        self.category_sums[row["category"]] += parse_eos_amount(row["eos_amount"])

    def merge(self, other: "D7Summary"):
        self.action_counts += other.action_counts
        self.category_counts += other.category_counts
        self.category_sums += other.category_sums

    def result(self) -> dict:
        return {
            "action_counts": {
                action: self.action_counts.get(action, 0)
                for action in sorted(etl.D7_CATEGORY)
            },
            "category_counts": {
                cat: self.category_counts.get(cat, 0)
                for cat in ("CPU", "NET", "RAM", "REX")
            },
            "category_sum_units": {
                cat: self.category_sums.get(cat, 0)
                for cat in ("CPU", "NET", "RAM", "REX")
            },
        }


SUMMARY_TYPES = {
    "d1": D1Summary,
    "d2": D2Summary,
    "d3": D3Summary,
    "d4": D4Summary,
    "d5": D5Summary,
    "d6": D6Summary,
    "d7": D7Summary,
}


def summarize(dataset_id: str, records) -> dict:
    """Fold records into the dataset's summary table.

    D1 and D5 take ("kind", row) pairs since they span several files;
    the rest take plain row dicts.
    """
    acc = SUMMARY_TYPES[dataset_id]()
    for record in records:
        acc.update(record)
    return acc.result()


# -- bucketed block series -----------------------------------------------------


class BucketSeries:
    """Additive metrics keyed by contiguous block buckets (1-based)."""

    def __init__(self, bucket_size: int = DEFAULT_BUCKET_SIZE):
        if bucket_size < 1:
            raise ValueError("bucket_size must be >= 1")
        self.bucket_size = bucket_size
        self.buckets: dict = {}

    def add(self, block_num: int, **metrics):
        start = ((block_num - 1) // self.bucket_size) * self.bucket_size + 1
        bucket = self.buckets.setdefault(start, Counter())
        for name, value in metrics.items():
            bucket[name] += value

    def merge(self, other: "BucketSeries"):
        if other.bucket_size != self.bucket_size:
            raise ValueError("cannot merge series with different bucket sizes")
        for start, counter in other.buckets.items():
            self.buckets.setdefault(start, Counter()).update(counter)

    def rows(self):
        for start in sorted(self.buckets):
            yield start, dict(self.buckets[start])


def d1_bucket_series(d1_rows, bucket_size: int = DEFAULT_BUCKET_SIZE) -> BucketSeries:
    """Per-bucket block/tx/action/deferred counts and CPU/NET usage sums."""
    series = BucketSeries(bucket_size)
    tx_blocks = {}
    for kind, row in d1_rows:
        if kind == "block":
            series.add(int(row["block_num"]), block_count=1)
        elif kind == "tx":
            tx_blocks[row["tx_id"]] = int(row["block_num"])
            series.add(
                int(row["block_num"]),
                tx_count=1,
                deferred_count=1 if row["is_deferred"] == "true" else 0,
                cpu_usage_us=int(row["cpu_usage_us"]),
                net_usage_words=int(row["net_usage_words"]),
            )
        elif kind == "action":
            series.add(tx_blocks[row["tx_id"]], action_count=1)
    return series


def d2_bucket_series(rows, bucket_size: int = DEFAULT_BUCKET_SIZE) -> BucketSeries:
    series = BucketSeries(bucket_size)
    for row in rows:
        units = parse_eos_amount(row["amount"])
        internal = row["kind"] == "internal"
        series.add(
            int(row["block_num"]),
            transfer_count=1,
            internal_count=1 if internal else 0,
            external_count=0 if internal else 1,
            amount_sum_units=units,
        )
    return series


def d7_bucket_series(rows, bucket_size: int = DEFAULT_BUCKET_SIZE) -> BucketSeries:
    series = BucketSeries(bucket_size)
    for row in rows:
        units = parse_eos_amount(row["eos_amount"])
        category = row["category"].lower()
        series.add(
            int(row["block_num"]),
            **{f"{category}_count": 1, f"{category}_sum_units": units},
        )
    return series


# -- histograms ----------------------------------------------------------------


class Histogram:
    """Counts over fixed ascending bin edges, plus underflow/overflow bins.

    Values below edges[0] (including zero) land in underflow; values at or
    above edges[-1] in overflow. Bin i covers [edges[i], edges[i+1]).
    """

    def __init__(self, edges):
        edges = list(edges)
        if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly ascending, length >= 2")
        self.edges = edges
        self.counts = [0] * (len(edges) - 1)
        self.underflow = 0
        self.overflow = 0

    def add(self, value):
        if value < self.edges[0]:
            self.underflow += 1
            return
        if value >= self.edges[-1]:
            self.overflow += 1
            return
        lo, hi = 0, len(self.counts)
        while lo + 1 < hi:  # rightmost edge <= value
            mid = (lo + hi) // 2
            if self.edges[mid] <= value:
                lo = mid
            else:
                hi = mid
        self.counts[lo] += 1

    def merge(self, other: "Histogram"):
        if other.edges != self.edges:
            raise ValueError("cannot merge histograms with different edges")
        self.counts = [a + b for a, b in zip(self.counts, other.counts)]
        self.underflow += other.underflow
        self.overflow += other.overflow

    @property
    def total(self) -> int:
        return self.underflow + self.overflow + sum(self.counts)

    def rows(self):
        yield {"bin_low": "", "bin_high": self.edges[0], "count": self.underflow}
        for i, count in enumerate(self.counts):
            yield {"bin_low": self.edges[i], "bin_high": self.edges[i + 1], "count": count}
        yield {"bin_low": self.edges[-1], "bin_high": "", "count": self.overflow}


def histogram(values, edges) -> Histogram:
    hist = Histogram(edges)
    for value in values:
        hist.add(value)
    return hist


# -- rankings ------------------------------------------------------------------


class FrequencyAccumulator:
    """Counter with deterministic ranked output (count desc, name asc)."""

    def __init__(self):
        self.counts = Counter()

    def update(self, name, count: int = 1):
        self.counts[name] += count

    def merge(self, other: "FrequencyAccumulator"):
        self.counts += other.counts

    def ranked(self, n=None):
        items = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return items if n is None else items[:n]


def top_n(rows, n: int, key: str = "function"):
    """Top-n values of a column with shares; ties broken lexicographically."""
    if n < 1:
        raise ValueError("n must be >= 1")
    acc = FrequencyAccumulator()
    total = 0
    for row in rows:
        acc.update(row[key])
        total += 1
    return [
        (name, count, count / total) for name, count in acc.ranked(n)
    ]


def tokenize(text: str):
    """Lowercase, split on non-alphanumeric, drop tokens shorter than 2."""
    tokens = []
    current = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return [t for t in tokens if len(t) >= MIN_TOKEN_LENGTH]


def term_frequency(texts, tokenizer=tokenize):
    """Ranked (term, count) pairs over a corpus of short texts."""
    acc = FrequencyAccumulator()
    for text in texts:
        for token in tokenizer(text):
            acc.update(token)
    return acc.ranked()


# -- stats pipeline over extracted CSVs ----------------------------------------


def _d1_rows(dataset_dir):
    for kind, name in (("block", "d1_blocks"), ("tx", "d1_transactions"),
                       ("action", "d1_actions")):
        path = Path(dataset_dir) / f"{name}.csv"
        for row in etl.read_dataset(path):
            yield kind, row


def _d5_rows(dataset_dir):
    for kind, name in (("token", "d5_tokens"), ("transfer", "d5_token_transfers")):
        path = Path(dataset_dir) / f"{name}.csv"
        for row in etl.read_dataset(path):
            yield kind, row


def run_stats(
    dataset_dir,
    output_dir,
    datasets=None,
    bucket_size: int = DEFAULT_BUCKET_SIZE,
    top_functions: int = 10,
) -> dict:
    """Compute summary.json and stats_*.csv over extracted dataset CSVs."""
    dataset_dir = Path(dataset_dir)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if datasets is None:
        datasets = set(etl.ALL_DATASETS)
    datasets = set(datasets)

    available = {
        d for d in datasets
        if all((dataset_dir / f"{name}.csv").exists() for name in etl.DATASET_FILES[d])
    }
    missing = datasets - available
    summary: dict = {}
    written = []

    def emit(name, schema, rows):
        report = etl.write_dataset(rows, schema, output_dir / f"stats_{name}.csv")
        written.append(report.path)

    def series_rows(series, metrics):
        for start, values in series.rows():
            row = {"bucket_start": start}
            row.update({m: values.get(m, 0) for m in metrics})
            yield row

    if "d1" in available:
        summary["d1"] = summarize("d1", _d1_rows(dataset_dir))
        series = d1_bucket_series(_d1_rows(dataset_dir), bucket_size)
        rows = []
        for start, values in series.rows():
            blocks = values.get("block_count", 0)
            rows.append({
                "bucket_start": start,
                "block_count": blocks,
                "tx_count": values.get("tx_count", 0),
                "action_count": values.get("action_count", 0),
                "deferred_count": values.get("deferred_count", 0),
                "cpu_ms_per_block": _mean(values.get("cpu_usage_us", 0), blocks) / 1000.0,
                "net_words_per_block": _mean(values.get("net_usage_words", 0), blocks),
            })
        emit("d1_series",
             ["bucket_start", "block_count", "tx_count", "action_count",
              "deferred_count", "cpu_ms_per_block", "net_words_per_block"],
             iter(rows))

    if "d2" in available:
        transfers = lambda: etl.read_dataset(dataset_dir / "d2_transfers.csv")
        summary["d2"] = summarize("d2", transfers())
        series = d2_bucket_series(transfers(), bucket_size)
        emit("d2_series",
             ["bucket_start", "transfer_count", "internal_count",
              "external_count", "amount_sum_units"],
             series_rows(series, ["transfer_count", "internal_count",
                                  "external_count", "amount_sum_units"]))
        hist = histogram(
            (parse_eos_amount(row["amount"]) for row in transfers()),
            AMOUNT_HISTOGRAM_EDGES,
        )
        emit("d2_amount_hist", ["bin_low", "bin_high", "count"], hist.rows())
        terms = term_frequency(row["memo"] for row in transfers())
        emit("d2_memo_terms", ["rank", "term", "count"],
             ({"rank": i, "term": t, "count": c}
              for i, (t, c) in enumerate(terms, start=1)))

    if "d3" in available:
        contracts = lambda: etl.read_dataset(dataset_dir / "d3_contracts.csv")
        summary["d3"] = summarize("d3", contracts())
        hist = histogram(
            (int(row["code_size_bytes"]) for row in contracts()
             if row["action_kind"] == "setcode"),
            CODE_SIZE_HISTOGRAM_EDGES,
        )
        emit("d3_size_hist", ["bin_low", "bin_high", "count"], hist.rows())

    if "d4" in available:
        invocations = lambda: etl.read_dataset(dataset_dir / "d4_invocations.csv")
        summary["d4"] = summarize("d4", invocations())
        ranking = top_n(invocations(), top_functions) if summary["d4"]["invocation_count"] else []
        emit("d4_top_functions", ["rank", "function", "count", "share"],
             ({"rank": i, "function": f, "count": c, "share": f"{share:.6f}"}
              for i, (f, c, share) in enumerate(ranking, start=1)))

    if "d5" in available:
        summary["d5"] = summarize("d5", _d5_rows(dataset_dir))
        terms = term_frequency(
            row["symbol"] for row in etl.read_dataset(dataset_dir / "d5_tokens.csv")
        )
        emit("d5_symbol_terms", ["rank", "term", "count"],
             ({"rank": i, "term": t, "count": c}
              for i, (t, c) in enumerate(terms, start=1)))

    if "d6" in available:
        summary["d6"] = summarize(
            "d6", etl.read_dataset(dataset_dir / "d6_accounts.csv")
        )

    if "d7" in available:
        resources = lambda: etl.read_dataset(dataset_dir / "d7_resources.csv")
        summary["d7"] = summarize("d7", resources())
        series = d7_bucket_series(resources(), bucket_size)
        metrics = []
        for cat in ("cpu", "net", "ram", "rex"):
            metrics += [f"{cat}_count", f"{cat}_sum_units"]
        emit("d7_series", ["bucket_start"] + metrics, series_rows(series, metrics))

    summary_path = output_dir / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")

    return {
        "summary": summary,
        "summary_path": str(summary_path),
        "tables": sorted(written),
        "missing_datasets": sorted(missing),
    }
