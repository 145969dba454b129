"""Command-line pipeline: mine, cluster, infer, apply, repair, stats.

Every stage reads the artifacts of the previous one from the output
directory and writes its own next to them:

    mine     -> hunks.jsonl, scripts/<hunk>.txt
    cluster  -> clusters.jsonl, stats.json
    infer    -> db/ (patterns/*.cocci + index.jsonl), inference.jsonl
    repair   -> repair.json
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import editscript, mining
from .engine.apply import ApplicationError, apply_patchset, unified_diff
from .inferrer import DEFAULT_TIMEOUT, ExamplePair, infer
from .lang import parse_unit
from .miner import ClusterMember, KeyedHunk, cluster, dump_clusters, load_clusters
from .repair import (
    DEFAULT_TEST_TIMEOUT,
    PLAUSIBLE,
    STRATEGIES,
    ConfigError,
    PatternDbError,
    RepairConfig,
    load_pattern_db,
    repair,
    write_atomic,
    write_pattern_db,
)
from .smpl import GenericPatchError, parse_generic_patch, split_atomic

log = logging.getLogger("genpatch")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
HUNKS, SCRIPTS, CLUSTERS, STATS, DB, INFERENCE, REPORT = (
    "hunks.jsonl",
    "scripts",
    "clusters.jsonl",
    "stats.json",
    "db",
    "inference.jsonl",
    "repair.json",
)


class UsageError(Exception):
    """Bad configuration or a missing input; exits with status 2."""


# -- configuration ---------------------------------------------------------------


@dataclass
class PipelineConfig:
    diff_dirs: list[str] = field(default_factory=list)
    repos: list[str] = field(default_factory=list)
    max_changed_lines: int = 50
    max_hunks: int = 3
    timeout: float = DEFAULT_TIMEOUT
    jobs: int = 1
    out: str = "genpatch-out"
    db: str | None = None
    repair: dict = field(default_factory=dict)

    def __post_init__(self):
        for p in self.diff_dirs + self.repos:
            if not Path(p).is_dir():
                raise UsageError(f"corpus source {p} does not exist")
        if self.max_changed_lines < 1 or self.max_hunks < 1:
            raise UsageError("mining limits must be at least 1")
        if self.timeout <= 0:
            raise UsageError("timeout must be positive")
        if self.jobs < 1:
            raise UsageError("jobs must be at least 1")

    @property
    def db_path(self) -> Path:
        return Path(self.db) if self.db else Path(self.out) / DB


_REPAIR_KEYS = {f.name for f in fields(RepairConfig)}


def load_config(path: str | None) -> dict:
    """Raw settings from a YAML file, with paths resolved against its directory."""
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {p} does not exist")
    try:
        data = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"config file {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {p}: expected a mapping at top level")
    base = p.parent

    def resolve(v):
        return str(base / v) if v is not None and not os.path.isabs(v) else v

    corpus = data.get("corpus") or {}
    mining_cfg = data.get("mining") or {}
    out = {
        "diff_dirs": [resolve(d) for d in corpus.get("diffs") or []],
        "repos": [resolve(d) for d in corpus.get("repos") or []],
    }
    for key in ("max_changed_lines", "max_hunks"):
        if key in mining_cfg:
            out[key] = mining_cfg[key]
    if "timeout" in (data.get("inference") or {}):
        out["timeout"] = data["inference"]["timeout"]
    for key in ("out", "db"):
        if data.get(key) is not None:
            out[key] = resolve(data[key])
    if "jobs" in data:
        out["jobs"] = data["jobs"]
    rep = dict(data.get("repair") or {})
    unknown = set(rep) - _REPAIR_KEYS
    if unknown:
        raise UsageError(f"config file {p}: unknown repair settings {sorted(unknown)}")
    if "project" in rep:
        rep["project"] = resolve(rep["project"])
    out["repair"] = rep
    return out


def build_config(args) -> PipelineConfig:
    raw = load_config(args.config)
    if args.out is not None:
        raw["out"] = args.out
    if args.timeout is not None:
        raw["timeout"] = args.timeout
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    if getattr(args, "db", None):
        raw["db"] = args.db
    for src in getattr(args, "sources", None) or []:
        key = "repos" if (Path(src) / ".git").exists() else "diff_dirs"
        raw.setdefault(key, []).append(src)
    try:
        return PipelineConfig(**raw)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


def _need(path: Path) -> Path:
    if not path.exists():
        raise UsageError(f"missing input {path}; run the previous stage first")
    return path


def _jsonl(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)


def _read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in _need(path).read_text().splitlines() if line.strip()]


# -- mine ------------------------------------------------------------------------


def _project_of(diff_root: Path, patch_file: Path) -> str:
    rel = patch_file.relative_to(diff_root)
    return rel.parts[0] if len(rel.parts) > 1 else diff_root.resolve().name


def _records_from_dir(root: Path, flt: mining.MiningFilter, warnings: list[str]):
    for pf in mining.iter_diff_files(root):
        try:
            text = pf.read_text(errors="replace")
            rec = mining.parse_unified_diff(text, project_id=_project_of(root, pf))
        except (OSError, mining.MalformedDiffError) as exc:
            warnings.append(f"{pf}: {exc}")
            continue
        rec = mining.only_c_files(rec, flt.languages)
        if rec is None:
            continue
        keep, reason = mining.filter_patch(rec, flt)
        if not keep:
            log.info("dropping %s: %s", pf, reason)
            continue
        yield rec, (lambda hunk: None)


def _records_from_repo(repo: Path, flt: mining.MiningFilter, warnings: list[str]):
    for rec in mining.mine_repository(repo, flt):
        def before(hunk, rev=rec.commit_id):
            return mining.file_at_revision(repo, f"{rev}^", hunk.file_path)

        yield rec, before


def hunk_entry(rec: mining.PatchRecord, hunk: mining.Hunk, before_file: str | None) -> tuple[dict, str]:
    """Index row and edit-script text for one hunk."""
    frags = mining.reconstitute(hunk, before_file)
    b, a = parse_unit(frags.before, hunk.file_path), parse_unit(frags.after, hunk.file_path)
    actions = editscript.diff_trees(b.root, a.root)
    if not actions:
        raise ValueError("no syntactic change")
    script = editscript.RichEditScript(tuple(actions), hunk.hunk_id)
    row = {
        "hunk_id": hunk.hunk_id,
        "patch_id": rec.patch_id,
        "project_id": rec.project_id,
        "commit_id": rec.commit_id or "",
        "file_path": hunk.file_path,
        "function": frags.function_name or "",
        "synthetic": frags.synthetic,
        "before": frags.before,
        "after": frags.after,
        "key": editscript.shape_key(script).canonical_text,
        "hunk": hunk.to_dict(),
    }
    return row, script.text


def _script_name(hunk_id: str) -> str:
    return hunk_id.replace("/", "_").replace(":", "_") + ".txt"


def cmd_mine(cfg: PipelineConfig, args) -> int:
    sources = [(Path(d), _records_from_dir) for d in cfg.diff_dirs] + [(Path(r), _records_from_repo) for r in cfg.repos]
    if not sources:
        raise UsageError("empty corpus: no diff directories or repositories configured")
    flt = mining.MiningFilter(cfg.max_changed_lines, cfg.max_hunks)
    rows, scripts, failed = [], {}, 0
    for path, reader in sources:
        warnings: list[str] = []
        try:
            for rec, before_of in reader(path, flt, warnings):
                for hunk in rec.hunks:
                    try:
                        row, text = hunk_entry(rec, hunk, before_of(hunk))
                    except Exception as exc:  # one bad hunk never stops the stage
                        warnings.append(f"{hunk.hunk_id}: {exc}")
                        continue
                    rows.append(row)
                    scripts[_script_name(hunk.hunk_id)] = text + "\n"
        except (mining.MiningError, ValueError, OSError) as exc:
            log.warning("source %s failed: %s", path, exc)
            failed += 1
            continue
        for w in warnings:
            log.warning("%s", w)
    if failed == len(sources):
        log.error("every corpus source failed")
        return EXIT_FAIL
    if not rows:
        raise UsageError("empty corpus: no hunks survived mining")
    rows.sort(key=lambda r: r["hunk_id"])
    out = Path(cfg.out)
    write_atomic(out / HUNKS, _jsonl(rows))
    sdir = out / SCRIPTS
    sdir.mkdir(parents=True, exist_ok=True)
    for stale in set(os.listdir(sdir)) - set(scripts):
        (sdir / stale).unlink()
    for name, text in sorted(scripts.items()):
        write_atomic(sdir / name, text)
    log.info("mined %d hunks from %d patches", len(rows), len({r["patch_id"] for r in rows}))
    return EXIT_OK


# -- cluster ---------------------------------------------------------------------


def cmd_cluster(cfg: PipelineConfig, args) -> int:
    out = Path(cfg.out)
    rows = _read_jsonl(out / HUNKS)
    keyed = [
        KeyedHunk(ClusterMember(r["hunk_id"], r["patch_id"], r["project_id"], r["file_path"], r["function"] or None), r["key"])
        for r in rows
    ]
    clusters, stats = cluster(keyed)
    write_atomic(out / CLUSTERS, dump_clusters(clusters))
    write_atomic(out / STATS, json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n")
    log.info("%d clusters from %d hunks (%d unique)", stats.cluster_count, stats.total_hunks, stats.unique_hunks)
    return EXIT_OK


# -- infer -----------------------------------------------------------------------


def _infer_one(job):
    cluster_id, examples, timeout = job
    res = infer(cluster_id, examples, timeout)
    return cluster_id, res


def cmd_infer(cfg: PipelineConfig, args) -> int:
    out = Path(cfg.out)
    clusters = load_clusters(_need(out / CLUSTERS).read_text())
    by_id = {r["hunk_id"]: r for r in _read_jsonl(out / HUNKS)}
    jobs = []
    for c in clusters:
        examples = []
        for m in c.members:
            r = by_id.get(m.hunk_id)
            if r is None:
                raise UsageError(f"hunk {m.hunk_id} of cluster {c.cluster_id} is missing from {out / HUNKS}")
            examples.append(
                ExamplePair(r["hunk_id"], r["before"], r["after"], project=r["project_id"], commit=r["commit_id"],
                            file=r["file_path"], function=r["function"])
            )
        jobs.append((c.cluster_id, examples, cfg.timeout))
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_infer_one, jobs))
    else:
        results = [_infer_one(j) for j in jobs]
    patches, summary = [], []
    for cluster_id, res in results:
        atomic = [a for gp in res.patches for a in split_atomic(gp)]
        patches += atomic
        summary.append({
            "cluster": cluster_id,
            "patterns": [a.patch_id for a in atomic],
            "uncovered": res.uncovered,
            "timed_out": res.timed_out,
        })
        if res.timed_out:
            log.warning("cluster %s timed out", cluster_id)
    write_pattern_db(cfg.db_path, patches)
    write_atomic(out / INFERENCE, _jsonl(summary))
    log.info("%d atomic patterns from %d clusters", len(patches), len(clusters))
    return EXIT_OK


# -- apply -----------------------------------------------------------------------


def cmd_apply(cfg: PipelineConfig, args) -> int:
    pattern, target = Path(args.pattern), Path(args.file)
    for p in (pattern, target):
        _need(p)
    try:
        gp = parse_generic_patch(pattern.read_text())
    except GenericPatchError as exc:
        raise UsageError(f"{pattern}: {exc}") from exc
    source = target.read_text()
    unit = parse_unit(source, str(target))
    try:
        text, report = apply_patchset(gp, unit)
    except ApplicationError as exc:
        log.error("%s", exc)
        return EXIT_FAIL
    for w in report.warnings:
        log.warning("%s", w)
    diff = unified_diff(source, text, str(args.file))
    sys.stdout.write(diff)
    return EXIT_OK if diff else EXIT_FAIL


# -- repair ----------------------------------------------------------------------


def cmd_repair(cfg: PipelineConfig, args) -> int:
    settings = dict(cfg.repair)
    if args.project:
        settings["project"] = args.project
    for key in ("build_command", "test_command", "heldout_command"):
        if getattr(args, key, None):
            settings[key] = getattr(args, key)
    if args.strategy:
        settings["strategy"] = args.strategy
    if args.budget is not None:
        settings["budget"] = args.budget
    if args.find_all:
        settings["find_all"] = True
    if args.test_timeout is not None:
        settings["test_timeout"] = args.test_timeout
    missing = [k for k in ("project", "build_command", "test_command") if not settings.get(k)]
    if missing:
        raise UsageError(f"repair needs {', '.join(missing)}")
    try:
        rc = RepairConfig(**settings)
        db = load_pattern_db(_need(cfg.db_path))
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    except PatternDbError as exc:
        raise UsageError(str(exc)) from exc
    for w in db.warnings:
        log.warning("%s", w)
    report = repair(rc, db)
    for e in report.infrastructure_errors:
        log.warning("%s", e)
    write_atomic(Path(cfg.out) / REPORT, report.to_json() + "\n")
    if report.plausible:
        first = next(o for o in report.outcomes if o.status == PLAUSIBLE)
        log.info("plausible patch %s at %s after %d candidates", first.patch_id, first.file, report.npc_all)
        return EXIT_OK
    log.info("no plausible patch among %d candidates", len(report.outcomes))
    return EXIT_FAIL


# -- stats -----------------------------------------------------------------------


def _table(title: str, rows: list[tuple], header: tuple) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    lines = [title, "  " + "  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines += ["  " + "  ".join(str(x).ljust(w) for x, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def stats_report(out: Path, db_path: Path) -> str:
    stats = json.loads(_need(out / STATS).read_text())
    parts = [
        _table(
            "hunks",
            [(k, stats[k]) for k in ("total_hunks", "unique_hunks", "clusterable_hunks", "cluster_count")],
            ("measure", "count"),
        ),
        _table("cluster sizes", list(stats["size_histogram"].items()), ("size", "clusters")),
        _table(
            "cluster spread",
            [("vertical", stats["vertical"]), ("horizontal", stats["horizontal"]), ("both", stats["both"])],
            ("kind", "clusters"),
        ),
    ]
    if db_path.exists():
        db = load_pattern_db(db_path)
        rows = []
        for g in STRATEGIES:
            hist = Counter(db.frequency(pid, g) for pid in db.ids())
            rows += [(g, f, n) for f, n in sorted(hist.items())]
        parts.append(_table(f"patterns ({len(db)})", rows, ("granularity", "frequency", "patterns")))
    return "\n\n".join(parts) + "\n"


def cmd_stats(cfg: PipelineConfig, args) -> int:
    sys.stdout.write(stats_report(Path(cfg.out), cfg.db_path))
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


COMMANDS = {
    "mine": cmd_mine,
    "cluster": cmd_cluster,
    "infer": cmd_infer,
    "apply": cmd_apply,
    "repair": cmd_repair,
    "stats": cmd_stats,
}


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {"default": None}
    p.add_argument("--config", help="YAML pipeline configuration", **d)
    p.add_argument("--out", help="artifact directory (default genpatch-out)", **d)
    p.add_argument("--jobs", type=int, help="parallel inference workers", **d)
    p.add_argument("--timeout", type=float, help="inference timeout per cluster, seconds", **d)
    p.add_argument("--strategy", choices=STRATEGIES, help="pattern ordering for repair", **d)
    p.add_argument("--budget", type=int, help="maximum repair candidates", **d)
    p.add_argument("--find-all", action="store_true", help="keep validating after the first plausible patch",
                   **({"default": argparse.SUPPRESS} if suppress else {"default": False}))
    p.add_argument("--db", help="pattern database directory (default <out>/db)", **d)
    p.add_argument("-v", "--verbose", action="count", **({"default": argparse.SUPPRESS} if suppress else {"default": 0}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genpatch", description="Mine, infer and apply generic patches.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, suppress=True)
    p = sub.add_parser("mine", parents=[shared], help="extract hunks and edit scripts")
    p.add_argument("sources", nargs="*", help="diff directories or git repositories")
    sub.add_parser("cluster", parents=[shared], help="group hunks by shape key")
    sub.add_parser("infer", parents=[shared], help="infer generic patches per cluster")
    p = sub.add_parser("apply", parents=[shared], help="apply a generic patch to a file and print the diff")
    p.add_argument("pattern")
    p.add_argument("file")
    p = sub.add_parser("repair", parents=[shared], help="search the pattern database for a plausible fix")
    p.add_argument("--project", help="program directory")
    p.add_argument("--build", dest="build_command", help="build command")
    p.add_argument("--test", dest="test_command", help="repair test command")
    p.add_argument("--heldout", dest="heldout_command", help="held-out test command")
    p.add_argument("--test-timeout", type=float, help=f"per-command timeout (default {DEFAULT_TEST_TIMEOUT:g} s)")
    sub.add_parser("stats", parents=[shared], help="print cluster and pattern distributions")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
