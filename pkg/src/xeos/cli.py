"""Command-line interface: extract, stats, synth, validate, bench.

Configuration precedence: built-in defaults < JSON config file (--config,
or the XEOS_CONFIG environment variable) < explicit flags. Logs go to
standard error; data and reports go to files, or to standard output when
``--report -`` is passed.

Exit codes: 0 ok, 2 input parse error, 3 schema/strict violation,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import etl, ingest, stats, synth, validate

log = logging.getLogger("xeos")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SCHEMA = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load_config(path):
    if path is None:
        path = os.environ.get("XEOS_CONFIG")
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}", EXIT_IO)
    except ValueError as exc:
        raise CliError(f"config file is not valid JSON: {exc}", EXIT_PARSE)
    if not isinstance(obj, dict):
        raise CliError("config file must hold a JSON object", EXIT_PARSE)
    return obj


def _setting(args, config, key, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _parse_datasets(value):
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    datasets = {v.lower() for v in value}
    unknown = datasets - set(etl.ALL_DATASETS)
    if unknown:
        raise CliError(f"unknown datasets: {sorted(unknown)}", EXIT_SCHEMA)
    if not datasets:
        raise CliError("dataset selection is empty", EXIT_SCHEMA)
    return datasets


def _parse_block_range(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        start, end = value
    else:
        try:
            start_text, end_text = value.split("-", 1)
            start, end = int(start_text), int(end_text)
        except ValueError:
            raise CliError(f"malformed block range: {value!r}", EXIT_SCHEMA)
    if start < 1 or end < start:
        raise CliError(f"block range not well-ordered: {value!r}", EXIT_SCHEMA)
    return (int(start), int(end))


def _emit_report(report, destination):
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if destination == "-":
        sys.stdout.write(text)
    elif destination:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_extract(args):
    config = _load_config(args.config)
    input_dir = _setting(args, config, "input_dir")
    output_dir = _setting(args, config, "output_dir")
    if not input_dir or not output_dir:
        raise CliError("extract needs --input and --output", EXIT_SCHEMA)
    if not Path(input_dir).is_dir():
        raise CliError(f"input directory not found: {input_dir}", EXIT_IO)
    datasets = _parse_datasets(_setting(args, config, "datasets"))
    block_range = _parse_block_range(_setting(args, config, "block_range"))
    system_accounts = _setting(args, config, "system_accounts")
    if isinstance(system_accounts, str):
        system_accounts = [s for s in system_accounts.split(",") if s]
    strict = bool(_setting(args, config, "strict", False))
    allow_gaps = bool(_setting(args, config, "allow_gaps", False))

    started = time.perf_counter()
    report = etl.run_extract(
        input_dir, output_dir,
        datasets=datasets, strict=strict, system_accounts=system_accounts,
        block_range=block_range, allow_gaps=allow_gaps,
    )
    report["duration_seconds"] = round(time.perf_counter() - started, 3)
    log.info("extract finished: %s rows across %d files",
             sum(report["rows"].values()), len(report["rows"]))
    _emit_report(report, args.report)
    return EXIT_OK


def cmd_stats(args):
    config = _load_config(args.config)
    input_dir = _setting(args, config, "input_dir")
    output_dir = _setting(args, config, "output_dir")
    if not input_dir or not output_dir:
        raise CliError("stats needs --input and --output", EXIT_SCHEMA)
    if not Path(input_dir).is_dir():
        raise CliError(f"input directory not found: {input_dir}", EXIT_IO)
    datasets = _parse_datasets(_setting(args, config, "datasets"))
    bucket_size = int(_setting(args, config, "bucket_size", stats.DEFAULT_BUCKET_SIZE))
    if bucket_size < 1:
        raise CliError("bucket size must be >= 1", EXIT_SCHEMA)
    report = stats.run_stats(input_dir, output_dir,
                             datasets=datasets, bucket_size=bucket_size)
    log.info("stats written to %s (%d tables)",
             report["summary_path"], len(report["tables"]))
    _emit_report(
        {k: report[k] for k in ("summary_path", "tables", "missing_datasets")},
        args.report,
    )
    return EXIT_OK


def cmd_synth(args):
    config_obj = _load_config(args.config)
    overrides = {
        "seed": args.seed,
        "n_blocks": args.blocks,
        "mean_tx_per_block": args.mean_tx_per_block,
        "n_token_contracts": args.token_contracts,
        "deferred_ratio": args.deferred_ratio,
    }
    merged = dict(config_obj)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    merged.pop("output_dir", None)
    output_dir = args.out or config_obj.get("output_dir")
    if not output_dir:
        raise CliError("synth needs --out", EXIT_SCHEMA)
    try:
        gen_config = synth.GenConfig.from_dict(merged)
        gen_config.validate()
    except synth.ConfigError as exc:
        raise CliError(str(exc), EXIT_SCHEMA)
    manifest = synth.generate(gen_config, output_dir)
    log.info("synthetic chain of %d blocks written to %s",
             gen_config.n_blocks, output_dir)
    _emit_report({"manifest_path": str(Path(output_dir) / "manifest.json"),
                  "manifest": manifest}, args.report)
    return EXIT_OK


def cmd_validate(args):
    code, violations = validate.run_validate(args.input_dir)
    for violation in violations:
        log.error("%s", violation)
    if code == 0:
        log.info("all dataset invariants hold")
    return code


def cmd_bench(args):
    config_obj = _load_config(args.config)
    output_dir = args.out or config_obj.get("output_dir")
    if not output_dir:
        raise CliError("bench needs --out", EXIT_SCHEMA)
    n = int(_setting(args, config_obj, "records", 100_000))
    capacity = int(_setting(args, config_obj, "buffer_capacity", 4096))
    per_file = int(_setting(args, config_obj, "records_per_file", 100_000))
    workload = (
        synth_receipt(i) for i in range(1, n + 1)
    )
    report = ingest.bench_writers(
        workload,
        ingest.CollectorConfig(
            output_dir=Path(output_dir), kind="receipts",
            buffer_capacity=capacity, records_per_file=per_file,
        ),
    )
    payload = {
        "records": n,
        "buffered_rps": round(report.buffered_rps, 2),
        "synchronous_rps": round(report.synchronous_rps, 2),
        "speedup": round(report.speedup, 2) if n else 0.0,
    }
    log.info("bench: buffered %.0f rps vs synchronous %.0f rps",
             report.buffered_rps, report.synchronous_rps)
    _emit_report(payload, args.report or "-")
    return EXIT_OK


def synth_receipt(i: int):
    """Cheap deterministic receipt used as benchmark workload."""
    from .model import TransactionReceipt

    return TransactionReceipt(
        tx_id=f"{i:064x}", block_num=i, status="executed",
        cpu_usage_us=100 + (i % 900), net_usage_words=8 + (i % 56),
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="xeos",
        description="Streaming extraction and exploration of EOSIO-style chain data.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (or XEOS_CONFIG env var)")
        p.add_argument("--report", help="run-report path, '-' for stdout")

    p = sub.add_parser("extract", help="derive the seven datasets from raw files")
    common(p)
    p.add_argument("--input", dest="input_dir", help="raw file directory")
    p.add_argument("--output", dest="output_dir", help="dataset output directory")
    p.add_argument("--datasets", help="comma-separated subset of d1..d7")
    p.add_argument("--block-range", dest="block_range", help="inclusive start-end")
    p.add_argument("--system-accounts", dest="system_accounts",
                   help="comma-separated override of the system-account set")
    p.add_argument("--strict", action="store_const", const=True, default=None,
                   help="fail on anomalies instead of routing to anomalies.csv")
    p.add_argument("--allow-gaps", dest="allow_gaps", action="store_const",
                   const=True, default=None, help="permit gaps between file ranges")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("stats", help="summary tables and series over datasets")
    common(p)
    p.add_argument("--input", dest="input_dir", help="extracted dataset directory")
    p.add_argument("--output", dest="output_dir", help="stats output directory")
    p.add_argument("--datasets", help="comma-separated subset of d1..d7")
    p.add_argument("--bucket-size", dest="bucket_size", type=int,
                   help="block-series bucket size (default 100000)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a synthetic chain plus manifest")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--out", help="output directory for raw files + manifest.json")
    p.add_argument("--mean-tx-per-block", dest="mean_tx_per_block", type=float)
    p.add_argument("--token-contracts", dest="token_contracts", type=int)
    p.add_argument("--deferred-ratio", dest="deferred_ratio", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="check dataset invariants")
    p.add_argument("--input", dest="input_dir", required=True,
                   help="extracted dataset directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="buffered vs synchronous writer benchmark")
    common(p)
    p.add_argument("--records", type=int, help="workload size (default 100000)")
    p.add_argument("--out", help="scratch directory for benchmark files")
    p.add_argument("--buffer-capacity", dest="buffer_capacity", type=int)
    p.add_argument("--records-per-file", dest="records_per_file", type=int)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code
    except ingest.RangeError as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except ingest.ParseError as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except etl.StrictViolation as exc:
        log.error("strict violation: %s", exc)
        return EXIT_SCHEMA
    except ingest.IngestError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
