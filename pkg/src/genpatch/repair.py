"""Generate-and-validate repair driven by a pattern database.

The database is a directory holding ``index.jsonl`` (one JSON row per
pattern) and ``patterns/<id>.cocci``.  Patterns are ordered by one of their
frequency counts, each is matched against the suspicious files, and every
match site becomes one candidate.  A candidate is built and tested in a
throw-away copy of the project.
"""

from __future__ import annotations

import json
import logging
import os
import random
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .engine.apply import ApplicationError, apply_rule
from .engine.match import match_rule
from .lang.parser import parse_unit
from .smpl.model import GRANULARITIES, GenericPatch, PatchStats
from .smpl.parse import GenericPatchError, parse_generic_patch
from .smpl.render import render_generic_patch

log = logging.getLogger(__name__)

STRATEGIES = GRANULARITIES
NONSENSICAL, IMPLAUSIBLE, PLAUSIBLE = "nonsensical", "in-plausible", "plausible"
STATUSES = (NONSENSICAL, IMPLAUSIBLE, PLAUSIBLE)
DEFAULT_TEST_TIMEOUT = 30.0
PROVENANCE_KEYS = ("project", "commit", "file", "function", "hunk_id")


class PatternDbError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


class InfrastructureError(RuntimeError):
    """The sandbox could not be prepared; the candidate is not counted."""


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- pattern database ----------------------------------------------------------


@dataclass(frozen=True)
class IndexRow:
    patch_id: str
    file: str
    recall: float
    precision: float
    frequency: dict
    provenance: tuple = ()

    def to_dict(self) -> dict:
        d = {"id": self.patch_id, "file": self.file, "recall": self.recall, "precision": self.precision}
        for g in GRANULARITIES:
            d[f"freq_{g}"] = self.frequency.get(g, 0)
        d["provenance"] = [{k if k != "hunk_id" else "hunk-id": p.get(k, "") for k in PROVENANCE_KEYS} for p in self.provenance]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IndexRow":
        freq = {g: int(d.get(f"freq_{g}", 0)) for g in GRANULARITIES}
        prov = tuple(
            {k: p.get(k if k != "hunk_id" else "hunk-id", p.get(k, "")) for k in PROVENANCE_KEYS}
            for p in d.get("provenance", [])
        )
        return cls(str(d["id"]), str(d["file"]), float(d.get("recall", 0)), float(d.get("precision", 0)), freq, prov)


@dataclass
class PatternDb:
    root: Path
    patches: dict[str, GenericPatch] = field(default_factory=dict)
    rows: dict[str, IndexRow] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.patches)

    def ids(self) -> list[str]:
        return sorted(self.patches)

    def frequency(self, patch_id: str, granularity: str) -> int:
        return self.rows[patch_id].frequency.get(granularity, 0)


def frequency_counts(provenance: Iterable[dict]) -> dict:
    """Distinct hunks, functions, files, patches and projects behind a pattern."""
    prov = list(provenance)
    return {
        "hunk": len({p.get("hunk_id") for p in prov}),
        "function": len({(p.get("project"), p.get("file"), p.get("function")) for p in prov}),
        "file": len({(p.get("project"), p.get("file")) for p in prov}),
        "patch": len({(p.get("project"), p.get("commit")) for p in prov}),
        "project": len({p.get("project") for p in prov}),
    }


def write_pattern_db(root: str | os.PathLike, patches: Iterable[GenericPatch]) -> Path:
    """Write (or rewrite) a database from atomic patches."""
    root = Path(root)
    rows = []
    for gp in sorted(patches, key=lambda p: p.patch_id):
        rel = f"patterns/{gp.patch_id}.cocci"
        write_atomic(root / rel, render_generic_patch(gp))
        freq = dict(gp.stats.frequency)
        if not any(freq.values()):
            freq = frequency_counts(gp.provenance)
        row = IndexRow(gp.patch_id, rel, gp.stats.recall, gp.stats.precision, freq, gp.provenance)
        rows.append(json.dumps(row.to_dict(), sort_keys=True))
    write_atomic(root / "index.jsonl", "".join(r + "\n" for r in rows))
    return root


def load_pattern_db(path: str | os.PathLike) -> PatternDb:
    root = Path(path)
    index = root / "index.jsonl"
    if not index.is_file():
        raise PatternDbError(f"no index: {index} does not exist")
    db = PatternDb(root)
    for n, line in enumerate(index.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = IndexRow.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            db.warnings.append(f"index line {n}: malformed row ({exc})")
            continue
        if row.patch_id in db.patches:
            db.warnings.append(f"index line {n}: duplicate id {row.patch_id!r}")
            continue
        pattern = root / row.file
        if not pattern.is_file():
            db.warnings.append(f"index line {n}: pattern file {pattern} is missing")
            continue
        try:
            gp = parse_generic_patch(pattern.read_text(encoding="utf-8"), row.patch_id)
        except GenericPatchError as exc:
            db.warnings.append(f"index line {n}: {pattern} does not validate ({exc})")
            continue
        gp.provenance = row.provenance
        gp.stats = PatchStats(row.recall, row.precision, dict(row.frequency))
        db.patches[row.patch_id] = gp
        db.rows[row.patch_id] = row
    for w in db.warnings:
        log.warning(w)
    return db


# -- ordering ------------------------------------------------------------------


def prioritize(db: PatternDb, strategy: str = "hunk") -> list[str]:
    """Most frequent first; ties by hunk count, then by id."""
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
    return sorted(db.patches, key=lambda i: (-db.frequency(i, strategy), -db.frequency(i, "hunk"), i))


def random_order(db: PatternDb, seed: int = 0) -> list[str]:
    """A fixed pseudo-random permutation, the baseline for ordering strategies."""
    ids = db.ids()
    random.Random(seed).shuffle(ids)
    return ids


# -- candidates ----------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    index: int
    patch_id: str
    rule_name: str
    file: str  # relative to the project root
    site_digest: str
    diff: str
    patched_text: str = field(repr=False)

    @property
    def digest(self) -> tuple:
        return (self.patch_id, self.rule_name, self.file, self.site_digest, self.diff)


def default_suspicious_files(project: str | os.PathLike) -> list[str]:
    root = Path(project)
    return sorted(str(p.relative_to(root)) for p in root.rglob("*.c") if p.is_file())


def generate_candidates(
    ordered_ids: list[str],
    db: PatternDb,
    files: list[str],
    project: str | os.PathLike,
    budget: int | None = None,
) -> Iterator[Candidate]:
    """Patch order outside, file order in the middle, site order inside."""
    root = Path(project)
    units = {}
    for rel in files:
        text = (root / rel).read_text(encoding="utf-8", errors="replace")
        units[rel] = parse_unit(text, rel)
    count = 0
    for pid in ordered_ids:
        gp = db.patches[pid]
        for rel in files:
            unit = units[rel]
            for rule in gp.rules:
                for site in match_rule(rule, unit):
                    if budget is not None and count >= budget:
                        return
                    try:
                        cp = apply_rule(rule, unit, site, pid)
                    except ApplicationError as exc:
                        log.info("patch %s at %s: %s", pid, site.digest, exc)
                        continue
                    if cp.empty:
                        continue
                    count += 1
                    yield Candidate(count, pid, rule.name, rel, site.digest, cp.diff, cp.patched_text)


# -- validation ----------------------------------------------------------------


@dataclass
class RepairConfig:
    project: str
    build_command: str
    test_command: str
    heldout_command: str | None = None
    suspicious_files: list[str] | None = None
    strategy: str = "hunk"
    budget: int = 1000
    test_timeout: float = DEFAULT_TEST_TIMEOUT
    find_all: bool = False

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be at least 1")
        if not self.build_command.strip() or not self.test_command.strip():
            raise ConfigError("build and test commands must be non-empty")
        if self.heldout_command is not None and not self.heldout_command.strip():
            self.heldout_command = None
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.test_timeout <= 0:
            raise ConfigError("test timeout must be positive")
        if not Path(self.project).is_dir():
            raise ConfigError(f"project directory {self.project} does not exist")

    def files(self) -> list[str]:
        return list(self.suspicious_files) if self.suspicious_files else default_suspicious_files(self.project)


@dataclass(frozen=True)
class CandidateOutcome:
    index: int
    patch_id: str
    site_digest: str
    status: str
    promoted_correct: bool = False
    file: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.promoted_correct and self.status != PLAUSIBLE:
            raise ValueError("only plausible candidates can be promoted to correct")


def _run(command: str, cwd: str, timeout: float) -> bool:
    try:
        proc = subprocess.run(
            command, shell=True, cwd=cwd, timeout=timeout, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL
        )
    except subprocess.TimeoutExpired:
        return False
    return proc.returncode == 0


def validate_candidate(candidate: Candidate, config: RepairConfig) -> CandidateOutcome:
    """Build and test the candidate in a fresh copy of the project."""
    with tempfile.TemporaryDirectory(prefix="genpatch-") as tmp:
        sandbox = os.path.join(tmp, "project")
        try:
            shutil.copytree(config.project, sandbox, symlinks=True)
            write_atomic(os.path.join(sandbox, candidate.file), candidate.patched_text)
        except OSError as exc:
            raise InfrastructureError(f"cannot prepare sandbox: {exc}") from exc

        def outcome(status: str, correct: bool = False) -> CandidateOutcome:
            return CandidateOutcome(
                candidate.index, candidate.patch_id, candidate.site_digest, status, correct, candidate.file
            )

        if not _run(config.build_command, sandbox, config.test_timeout):
            return outcome(NONSENSICAL)
        if not _run(config.test_command, sandbox, config.test_timeout):
            return outcome(IMPLAUSIBLE)
        correct = bool(config.heldout_command) and _run(config.heldout_command, sandbox, config.test_timeout)
        return outcome(PLAUSIBLE, correct)


# -- the loop ------------------------------------------------------------------


def npc_counts(statuses: list[str]) -> tuple[int | None, int | None, int | None]:
    """(first plausible index, npc-all, npc-sensical) for statuses in serial order."""
    for i, s in enumerate(statuses):
        if s == PLAUSIBLE:
            before = statuses[:i]
            return i + 1, i, i - before.count(NONSENSICAL)
    return None, None, None


@dataclass
class RepairReport:
    outcomes: list[CandidateOutcome]
    strategy: str = "hunk"
    wall_time: float = 0.0
    infrastructure_errors: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)  # patch id -> provenance rows

    @property
    def first_plausible_index(self) -> int | None:
        return npc_counts([o.status for o in self.outcomes])[0]

    @property
    def npc_all(self) -> int | None:
        return npc_counts([o.status for o in self.outcomes])[1]

    @property
    def npc_sensical(self) -> int | None:
        return npc_counts([o.status for o in self.outcomes])[2]

    @property
    def plausible(self) -> bool:
        return self.first_plausible_index is not None

    def to_dict(self, with_time: bool = True) -> dict:
        d = {
            "strategy": self.strategy,
            "outcomes": [
                {
                    "index": o.index,
                    "patch_id": o.patch_id,
                    "file": o.file,
                    "site": o.site_digest,
                    "status": o.status,
                    "promoted_correct": o.promoted_correct,
                    "provenance": list(self.provenance.get(o.patch_id, ())),
                }
                for o in self.outcomes
            ],
            "infrastructure_errors": list(self.infrastructure_errors),
        }
        if self.plausible:
            d["first_plausible_index"] = self.first_plausible_index
            d["npc_all"] = self.npc_all
            d["npc_sensical"] = self.npc_sensical
        if with_time:
            d["wall_time"] = round(self.wall_time, 3)
        return d

    def to_json(self, with_time: bool = True) -> str:
        return json.dumps(self.to_dict(with_time), indent=2, sort_keys=True) + "\n"


def repair(config: RepairConfig, db: PatternDb, order: list[str] | None = None) -> RepairReport:
    """Validate candidates in serial order until the first plausible one (or the budget)."""
    started = time.monotonic()
    ids = order if order is not None else prioritize(db, config.strategy)
    report = RepairReport([], config.strategy)
    for cand in generate_candidates(ids, db, config.files(), config.project, config.budget):
        try:
            out = validate_candidate(cand, config)
        except InfrastructureError as exc:
            report.infrastructure_errors.append(f"candidate {cand.index}: {exc}")
            continue
        report.outcomes.append(out)
        if cand.patch_id not in report.provenance:
            report.provenance[cand.patch_id] = [dict(p) for p in db.patches[cand.patch_id].provenance]
        log.info("candidate %d (%s): %s", cand.index, cand.patch_id, out.status)
        if out.status == PLAUSIBLE and not config.find_all:
            break
    report.wall_time = time.monotonic() - started
    return report
