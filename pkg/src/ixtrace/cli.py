"""``ixtrace`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 external program error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .analytics import (
    AnalyticsError,
    compute_stats,
    consistency_check,
    members_paths_export,
    parse_bgp_tuples,
    rank_ixps,
    rule_hit_rates,
)
from .engine import detect_corpus, detect_evidence, preprocess_path
from .fetch import FetchError, fetch_registry
from .ingest import (
    SnapshotError,
    dataset_summary,
    dump_merged,
    load_merged,
    merge_datasets,
    parse_snapshot,
)
from .model import DatasetError, MergedDataset, Source
from .render import annotate, path_json
from .resolver import PrefixIndex, build_index, parse_as_mapping
from .traceio import ExternalProgramError, PathFileError, parse_trace_file, run_trace

log = logging.getLogger("ixtrace")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EXTERNAL = 0, 1, 2, 3

PDB_SNAPSHOT = "pdb.snapshot"
PCH_SNAPSHOT = "pch.snapshot"
MERGED_FILE = "dataset.merged"
AS_MAP_FILE = "pfx2as.txt"


class DataError(Exception):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_data_dir() -> Path:
    if os.environ.get("IXTRACE_DATA_DIR"):
        return Path(os.environ["IXTRACE_DATA_DIR"])
    base = os.environ.get("XDG_CONFIG_HOME") or Path.home() / ".config"
    return Path(base) / "ixtrace"


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


def load_dataset(data_dir: Path) -> MergedDataset:
    merged = data_dir / MERGED_FILE
    if merged.exists():
        return load_merged(_read(merged))
    pdb, pch = data_dir / PDB_SNAPSHOT, data_dir / PCH_SNAPSHOT
    missing = [str(p) for p in (pdb, pch) if not p.exists()]
    if missing:
        raise DataError(f"missing dataset files: {merged} (or {', '.join(missing)}); run `ixtrace update`")
    warnings: list[str] = []
    d = merge_datasets(parse_snapshot(_read(pdb), Source.PDB), parse_snapshot(_read(pch), Source.PCH), warnings)
    for w in warnings:
        log.info("merge: %s", w)
    return d


def load_index(args, d: MergedDataset) -> PrefixIndex:
    path = Path(args.as_map) if args.as_map else Path(args.data_dir) / AS_MAP_FILE
    if not path.exists():
        if args.as_map:
            raise DataError(f"missing AS mapping file: {path}")
        log.warning("no AS mapping at %s; adjacent hops will have no AS", path)
        return build_index(d)
    warnings: list[str] = []
    mappings = parse_as_mapping(_read(path), warnings)
    for w in warnings:
        log.warning("%s: %s", path, w)
    return build_index(d, mappings)


def _load_paths(pathfile: str) -> list:
    warnings: list[str] = []
    paths = parse_trace_file(_read(Path(pathfile)), warnings)
    for w in warnings:
        log.warning("%s: %s", pathfile, w)
    return paths


def _fmt(x) -> str:
    return "undefined" if x is None else str(round(x, 4))


def _preprocess(paths):
    kept = []
    for p in paths:
        q = preprocess_path(p)
        if q is None:
            log.info("path %s excluded (no replies or loop)", p.path_id)
        else:
            kept.append(q)
    return kept


# -- commands ------------------------------------------------------------------


def _render(args, d, idx, results) -> str:
    chunks = []
    for path, dets in results:
        evidence = idx.resolve_many([h.address for h in path.hops])
        if args.json:
            chunks.append(json.dumps(path_json(path, dets, evidence, d), sort_keys=True) + "\n")
        else:
            chunks.append(annotate(path, dets, evidence, d))
    return ("" if args.json else "\n").join(chunks)


def cmd_trace(args) -> str:
    d = load_dataset(Path(args.data_dir))
    idx = load_index(args, d)
    warnings: list[str] = []
    path = run_trace(args.target, probe=args.probe, max_ttl=args.max_ttl, backend=args.backend, warnings=warnings)
    for w in warnings:
        log.warning("%s", w)
    evidence = idx.resolve_many([h.address for h in path.hops])
    dets = detect_evidence(path.path_id, evidence, d)
    return _render(args, d, idx, [(path, dets)])


def cmd_batch(args) -> str:
    d = load_dataset(Path(args.data_dir))
    idx = load_index(args, d)
    paths = _load_paths(args.pathfile)
    if not args.keep_all:
        paths = _preprocess(paths)
    return _render(args, d, idx, detect_corpus(idx, d, paths, jobs=args.jobs))


def cmd_stats(args) -> str:
    d = load_dataset(Path(args.data_dir))
    idx = load_index(args, d)
    raw = _load_paths(args.pathfile)
    paths = _preprocess(raw)
    results = detect_corpus(idx, d, paths, jobs=args.jobs)
    stats = compute_stats(results, idx)
    ranking = rank_ixps(results, d)
    try:
        rates = rule_hit_rates(results)
    except AnalyticsError:
        rates = {}
    csv_text, r = members_paths_export(ranking)
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8", newline="\n")

    if args.json:
        payload = {
            "input_paths": len(raw),
            "excluded_paths": len(raw) - len(paths),
            **stats.as_dict(),
            "top_ixps": [
                {"ixp_id": e.ixp_id, "name": d.ixps[e.ixp_id].label, "paths": e.path_count, "members": e.member_count}
                for e in ranking[: args.top]
            ],
            "rule_hit_rates": {k.value: v for k, v in rates.items()},
            "members_paths_correlation": r,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    lines = [
        f"input_paths: {len(raw)}",
        f"excluded_paths: {len(raw) - len(paths)}",
        f"paths: {stats.paths}",
        f"paths_with_ixp_pct: {_fmt(stats.pct_paths_with_ixp)}",
        f"avg_ixps_per_ixp_path: {_fmt(stats.avg_ixps_per_ixp_path)}",
        f"avg_hops_per_path: {_fmt(stats.avg_hops_per_path)}",
        f"avg_ixp_hop: {_fmt(stats.avg_ixp_hop_position)}",
        f"avg_ases_per_path: {_fmt(stats.avg_ases_per_path)}",
        "top_ixps:",
    ]
    for rank, e in enumerate(ranking[: args.top], start=1):
        lines.append(f"  {rank}. {d.ixps[e.ixp_id].label} ({e.ixp_id}) paths={e.path_count} members={e.member_count}")
    lines.append("rule_hit_rates:")
    for rule, pct in rates.items():
        lines.append(f"  {rule.value}: {pct:.2f}%")
    lines.append(f"members_paths_correlation: {_fmt(r)}")
    return "\n".join(lines) + "\n"


def cmd_update(args) -> str:
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    snaps = {}
    for src, url, local in (
        (Source.PDB, args.pdb_url, args.pdb_snapshot),
        (Source.PCH, args.pch_url, args.pch_snapshot),
    ):
        out = data_dir / (PDB_SNAPSHOT if src is Source.PDB else PCH_SNAPSHOT)
        if local:
            snap = parse_snapshot(_read(Path(local)), src)
            out.write_text(snap.dumps(), encoding="utf-8", newline="\n")
        else:
            snap = fetch_registry(src, url, out, retries=args.retries, timeout=args.timeout)
        for w in snap.warnings:
            log.warning("%s: %s", src.value, w)
        snaps[src] = snap
    warnings: list[str] = []
    d = merge_datasets(snaps[Source.PDB], snaps[Source.PCH], warnings)
    for w in warnings:
        log.info("merge: %s", w)
    (data_dir / MERGED_FILE).write_text(dump_merged(d), encoding="utf-8", newline="\n")
    return _summary_text(args, d, header=f"wrote {data_dir / MERGED_FILE}")


def _summary_text(args, d, header: Optional[str] = None) -> str:
    s = dataset_summary(d).as_dict()
    if args.json:
        return json.dumps(s, indent=2, sort_keys=True) + "\n"
    lines = [header] if header else []
    lines += [f"{k}: {v}" for k, v in s.items()]
    return "\n".join(lines) + "\n"


def cmd_summary(args) -> str:
    return _summary_text(args, load_dataset(Path(args.data_dir)))


def cmd_validate(args) -> str:
    d = load_dataset(Path(args.data_dir))
    warnings: list[str] = []
    tuples = parse_bgp_tuples(_read(Path(args.bgpfile)), d, warnings)
    for w in warnings:
        log.warning("%s: %s", args.bgpfile, w)
    report = consistency_check(d, tuples)
    if args.json:
        payload = {
            src.value: {"common_tuples": c.common_tuples, "consistent_tuples": c.consistent_tuples,
                        "pct_consistent": c.pct_consistent}
            for src, c in report.items()
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    lines = []
    for src, c in report.items():
        pct = "undefined" if c.pct_consistent is None else f"{round(c.pct_consistent, 2)}%"
        lines.append(f"{src.value}: common_tuples={c.common_tuples} consistent={c.consistent_tuples} pct_consistent={pct}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--data-dir", default=argparse.SUPPRESS, help="dataset directory (default: $IXTRACE_DATA_DIR or ~/.config/ixtrace)")
    common.add_argument("--as-map", default=argparse.SUPPRESS, help="prefix-to-AS file (default: <data-dir>/pfx2as.txt)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="write the report here instead of stdout")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    p = _Parser(prog="ixtrace", description="Detect IXP crossings in traceroute paths.", parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("trace", parents=[common], help="run traceroute and annotate it")
    t.add_argument("target")
    t.add_argument("--probe", choices=("icmp", "udp"), default="udp")
    t.add_argument("--max-ttl", type=int, default=30)
    t.add_argument("--backend", choices=("traceroute", "scamper"), default="traceroute")
    t.set_defaults(func=cmd_trace)

    b = sub.add_parser("batch", parents=[common], help="annotate every path in a path file")
    b.add_argument("pathfile")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--keep-all", action="store_true", help="do not drop loops and silent paths")
    b.set_defaults(func=cmd_batch)

    s = sub.add_parser("stats", parents=[common], help="corpus statistics, IXP ranking, rule hit rates")
    s.add_argument("pathfile")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--csv", help="write the members-vs-paths CSV here")
    s.set_defaults(func=cmd_stats)

    u = sub.add_parser("update", parents=[common], help="fetch registries and rebuild the merged dataset")
    u.add_argument("--pdb-url")
    u.add_argument("--pch-url")
    u.add_argument("--pdb-snapshot", help="use this PDB snapshot file instead of fetching")
    u.add_argument("--pch-snapshot", help="use this PCH snapshot file instead of fetching")
    u.add_argument("--retries", type=int, default=3)
    u.add_argument("--timeout", type=float, default=30.0)
    u.set_defaults(func=cmd_update)

    v = sub.add_parser("validate", parents=[common], help="check registry addresses against BGP next hops")
    v.add_argument("bgpfile")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("summary", parents=[common], help="dataset counts")
    m.set_defaults(func=cmd_summary)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.data_dir = getattr(args, "data_dir", None) or str(default_data_dir())
    args.as_map = getattr(args, "as_map", None)
    args.out = getattr(args, "out", None)
    args.json = getattr(args, "json", False)
    verbose = getattr(args, "verbose", 0)
    logging.basicConfig(
        level=logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING,
        format="ixtrace: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        report = args.func(args)
    except ExternalProgramError as exc:
        print(f"ixtrace: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (DataError, SnapshotError, DatasetError, PathFileError, AnalyticsError, FetchError) as exc:
        print(f"ixtrace: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"ixtrace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(report)
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
