import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xeos import stats
from xeos.stats import (
    AMOUNT_HISTOGRAM_EDGES,
    BucketSeries,
    FrequencyAccumulator,
    Histogram,
    d6_table,
    summarize,
    term_frequency,
    tokenize,
    top_n,
    tps,
)


class TestTps:
    def test_half_second_blocks(self):
        assert tps(28.21) == pytest.approx(56.42)

    def test_zero(self):
        assert tps(0.0) == 0.0

    def test_linear(self):
        assert tps(10.0) == 2 * tps(5.0)


class TestSummaries:
    def test_d6_ratio(self):
        rows = [{"creator": c, "new_account": f"acct{i}", "block_num": 1,
                 "timestamp": "t"} for i, c in enumerate("aabbbaaaab")]
        result = summarize("d6", rows)
        assert result["creation_count"] == 10
        assert result["distinct_creators"] == 2
        assert result["mean_accounts_per_creator"] == 5.0

    def test_d6_table_direct(self):
        assert d6_table(10, 2)["mean_accounts_per_creator"] == 5.0
        assert d6_table(0, 0)["mean_accounts_per_creator"] == 0.0

    def test_d2_amounts(self):
        rows = [{"amount": f"{i}.0000 EOS", "kind": "external", "memo": "",
                 "from": "a", "to": "b", "block_num": 1, "timestamp": "t",
                 "tx_id": "x"} for i in (1, 2, 3)]
        result = summarize("d2", rows)
        assert result["mean_amount_units"] == pytest.approx(20000.0)
        assert result["max_amount_units"] == 30000
        assert result["external_count"] == 3
        assert result["internal_count"] == 0

    def test_d3_mean_size(self):
        rows = [{"account": "c", "code_size_bytes": str(n), "code_hash": "",
                 "action_kind": "setcode", "is_first_deploy": "true",
                 "block_num": 1, "timestamp": "t", "tx_id": "x"}
                for n in (100, 300)]
        assert summarize("d3", rows)["mean_hex_code_size"] == 200.0

    def test_empty_input(self):
        result = summarize("d6", [])
        assert result["creation_count"] == 0
        assert result["mean_accounts_per_creator"] == 0.0


class TestBucketSeries:
    def test_single_bucket_equals_totals(self):
        series = BucketSeries(bucket_size=100)
        for block_num in range(1, 101):
            series.add(block_num, tx=2)
        assert list(series.rows()) == [(1, {"tx": 200})]

    def test_bucket_boundaries(self):
        series = BucketSeries(bucket_size=10)
        series.add(10, x=1)
        series.add(11, x=1)
        assert [start for start, _ in series.rows()] == [1, 11]

    def test_empty(self):
        assert list(BucketSeries(bucket_size=10).rows()) == []

    def test_merge_equals_whole(self):
        rng = random.Random(9)
        events = [(rng.randrange(1, 500), rng.choice("ab"), rng.randrange(1, 4))
                  for _ in range(300)]
        whole = BucketSeries(bucket_size=50)
        left, right = BucketSeries(bucket_size=50), BucketSeries(bucket_size=50)
        for i, (b, metric, n) in enumerate(events):
            whole.add(b, **{metric: n})
            (left if i % 2 else right).add(b, **{metric: n})
        left.merge(right)
        assert list(left.rows()) == list(whole.rows())


class TestHistogram:
    def test_decade_bins(self):
        h = Histogram([1, 10, 100, 1000])
        for value in (1, 5, 10, 99, 100, 999):
            h.add(value)
        rows = {(r["bin_low"], r["bin_high"]): r["count"] for r in h.rows()}
        assert rows[(1, 10)] == 2
        assert rows[(10, 100)] == 2
        assert rows[(100, 1000)] == 2

    def test_zero_goes_to_underflow(self):
        h = Histogram([1, 10])
        h.add(0)
        assert h.underflow == 1

    def test_overflow(self):
        h = Histogram([1, 10])
        h.add(10)
        assert h.overflow == 1

    def test_total_preserved(self):
        h = Histogram(AMOUNT_HISTOGRAM_EDGES)
        rng = random.Random(3)
        values = [rng.randrange(0, 10**13) for _ in range(1000)]
        for v in values:
            h.add(v)
        assert h.total == 1000
        assert sum(r["count"] for r in h.rows()) == 1000

    def test_empty(self):
        h = Histogram([1, 10])
        assert all(r["count"] == 0 for r in h.rows())

    def test_merge_equals_whole(self):
        values = [random.Random(4).randrange(0, 10**9) for _ in range(500)]
        whole = Histogram(AMOUNT_HISTOGRAM_EDGES)
        parts = [Histogram(AMOUNT_HISTOGRAM_EDGES) for _ in range(3)]
        for i, v in enumerate(values):
            whole.add(v)
            parts[i % 3].add(v)
        merged = parts[0]
        merged.merge(parts[1])
        merged.merge(parts[2])
        assert list(merged.rows()) == list(whole.rows())


class TestTopN:
    def rows(self, names):
        return [{"function": name} for name in names]

    def test_ranking_and_share(self):
        rows = self.rows(["bet"] * 3 + ["reveal"] * 2 + ["claim"])
        result = top_n(rows, 2)
        assert result == [("bet", 3, 0.5), ("reveal", 2, pytest.approx(2 / 6))]

    def test_tie_broken_by_name(self):
        result = top_n(self.rows(["bbb", "aaa"]), 2)
        assert [name for name, _, _ in result] == ["aaa", "bbb"]

    def test_shares_sum_to_one_when_n_covers_all(self):
        rows = self.rows(["a", "b", "b", "c", "c", "c"])
        result = top_n(rows, 10)
        assert math.isclose(sum(share for _, _, share in result), 1.0)

    def test_empty(self):
        assert top_n([], 5) == []


class TestTokenize:
    def test_examples(self):
        assert tokenize("Bet win!") == ["bet", "win"]
        assert tokenize("a1-b2 c") == ["a1", "b2"]

    def test_short_tokens_dropped(self):
        assert tokenize("x y zz") == ["zz"]

    def test_term_frequency(self):
        ranked = term_frequency(["Bet win", "bet lose"])
        assert ranked == [("bet", 2), ("lose", 1), ("win", 1)]

    def test_empty(self):
        assert term_frequency([]) == []
        assert tokenize("") == []

    @given(st.text(alphabet="ab1 .!X", max_size=40))
    def test_tokens_lowercase_alnum(self, text):
        for token in tokenize(text):
            assert token == token.lower()
            assert token.isalnum()
            assert len(token) >= 2


class TestFrequencyAccumulator:
    def test_merge_equals_whole(self):
        rng = random.Random(11)
        names = [rng.choice(["bet", "reveal", "claim", "roll"])
                 for _ in range(200)]
        whole = FrequencyAccumulator()
        left, right = FrequencyAccumulator(), FrequencyAccumulator()
        for i, name in enumerate(names):
            whole.update(name)
            (left if i % 2 else right).update(name)
        left.merge(right)
        assert left.ranked(3) == whole.ranked(3)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=10**6), max_size=60),
       st.data())
def test_summary_merge_equals_whole(units, data):
    """Splitting any D2 row stream and merging summaries matches the
    one-pass result."""
    rows = [{"amount": f"{u // 10000}.{u % 10000:04d} EOS",
             "kind": "external" if u % 2 else "internal", "memo": "hi",
             "from": "a", "to": "b", "block_num": 1, "timestamp": "t",
             "tx_id": "x"} for u in units]
    split = data.draw(st.integers(min_value=0, max_value=len(rows)))
    whole = stats.D2Summary()
    for row in rows:
        whole.update(row)
    left, right = stats.D2Summary(), stats.D2Summary()
    for row in rows[:split]:
        left.update(row)
    for row in rows[split:]:
        right.update(row)
    left.merge(right)
    assert left.result() == whole.result()


def test_run_stats_outputs(small_chain, tmp_path):
    report = stats.run_stats(small_chain["datasets"], tmp_path, bucket_size=100)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert "summary.json" in names
    assert "stats_d1_series.csv" in names
    assert "stats_d4_top_functions.csv" in names
    assert report["summary"]["d1"]["block_count"] == 300
    from xeos.etl import read_dataset
    series = list(read_dataset(tmp_path / "stats_d1_series.csv"))
    assert len(series) == 3
    assert sum(int(r["block_count"]) for r in series) == 300
