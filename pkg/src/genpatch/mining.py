"""Patch ingestion: unified diffs, repository history, size filters, fragments."""

from __future__ import annotations

import hashlib
import logging
import os
import re
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .lang.parser import parse_unit

log = logging.getLogger(__name__)

C_EXTENSIONS = (".c", ".h")

_HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@ ?(.*)$")


class MalformedDiffError(ValueError):
    pass


class MiningError(RuntimeError):
    pass


class StaleHunkError(ValueError):
    pass


@dataclass(frozen=True)
class Hunk:
    hunk_id: str
    patch_id: str
    file_path: str
    before_start: int
    before_length: int
    after_start: int
    after_length: int
    lines: tuple[tuple[str, str], ...]  # (" " | "-" | "+", text without newline)
    function_name: str | None = None

    @property
    def before_range(self) -> tuple[int, int]:
        return self.before_start, self.before_length

    @property
    def after_range(self) -> tuple[int, int]:
        return self.after_start, self.after_length

    @property
    def removed_lines(self) -> list[str]:
        return [t for tag, t in self.lines if tag == "-"]

    @property
    def added_lines(self) -> list[str]:
        return [t for tag, t in self.lines if tag == "+"]

    @property
    def context_lines(self) -> list[str]:
        return [t for tag, t in self.lines if tag == " "]

    @property
    def old_side(self) -> list[str]:
        return [t for tag, t in self.lines if tag != "+"]

    @property
    def new_side(self) -> list[str]:
        return [t for tag, t in self.lines if tag != "-"]

    @property
    def changed_line_count(self) -> int:
        return sum(1 for tag, _ in self.lines if tag != " ")

    def diff_text(self) -> str:
        header = f"@@ -{self.before_start},{self.before_length} +{self.after_start},{self.after_length} @@"
        return "\n".join([header] + [tag + text for tag, text in self.lines]) + "\n"

    def to_dict(self) -> dict:
        return {
            "hunk_id": self.hunk_id,
            "patch_id": self.patch_id,
            "file_path": self.file_path,
            "before_range": [self.before_start, self.before_length],
            "after_range": [self.after_start, self.after_length],
            "lines": [tag + text for tag, text in self.lines],
            "function_name": self.function_name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hunk":
        return cls(
            d["hunk_id"],
            d["patch_id"],
            d["file_path"],
            d["before_range"][0],
            d["before_range"][1],
            d["after_range"][0],
            d["after_range"][1],
            tuple((line[0], line[1:]) for line in d["lines"]),
            d.get("function_name"),
        )


@dataclass(frozen=True)
class FileDiff:
    old_path: str | None
    new_path: str | None
    hunks: tuple[Hunk, ...]

    @property
    def path(self) -> str:
        return self.new_path or self.old_path or ""


@dataclass(frozen=True)
class PatchRecord:
    patch_id: str
    project_id: str
    files: tuple[FileDiff, ...]
    commit_id: str | None = None

    @property
    def hunks(self) -> list[Hunk]:
        return [h for f in self.files for h in f.hunks]

    @property
    def hunk_count(self) -> int:
        return sum(len(f.hunks) for f in self.files)

    @property
    def changed_line_count(self) -> int:
        return sum(h.changed_line_count for h in self.hunks)

    def to_dict(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "project_id": self.project_id,
            "commit_id": self.commit_id,
            "changed_line_count": self.changed_line_count,
            "hunk_count": self.hunk_count,
            "files": [
                {"old_path": f.old_path, "new_path": f.new_path, "hunks": [h.to_dict() for h in f.hunks]}
                for f in self.files
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatchRecord":
        files = tuple(
            FileDiff(f["old_path"], f["new_path"], tuple(Hunk.from_dict(h) for h in f["hunks"]))
            for f in d["files"]
        )
        return cls(d["patch_id"], d["project_id"], files, d.get("commit_id"))


@dataclass(frozen=True)
class MiningFilter:
    max_changed_lines: int = 50
    max_hunks: int = 3
    languages: tuple[str, ...] = C_EXTENSIONS

    def __post_init__(self):
        if self.max_changed_lines < 1 or self.max_hunks < 1:
            raise ValueError("mining limits must be at least 1")


def _strip_prefix(path: str) -> str | None:
    path = path.split("\t")[0].strip()
    if path == "/dev/null":
        return None
    if path.startswith(("a/", "b/")):
        return path[2:]
    return path


def parse_unified_diff(
    text: str, project_id: str = "", commit_id: str | None = None, patch_id: str | None = None
) -> PatchRecord:
    """Parse a (possibly multi-file) unified diff into a PatchRecord."""
    if patch_id is None:
        patch_id = hashlib.sha1(text.encode()).hexdigest()[:12]
    lines = text.splitlines()
    files: list[FileDiff] = []
    old_path = new_path = None
    hunks: list[Hunk] = []
    have_file = False
    i = 0

    def flush():
        if have_file and hunks:
            files.append(FileDiff(old_path, new_path, tuple(hunks)))

    while i < len(lines):
        line = lines[i]
        if line.startswith("--- ") and i + 1 < len(lines) and lines[i + 1].startswith("+++ "):
            flush()
            old_path = _strip_prefix(line[4:])
            new_path = _strip_prefix(lines[i + 1][4:])
            hunks = []
            have_file = True
            i += 2
            continue
        m = _HUNK_HEADER.match(line)
        if m is None:
            i += 1
            continue
        if not have_file:
            raise MalformedDiffError(f"hunk header without file header: {line!r}")
        b_start, b_len = int(m.group(1)), int(m.group(2) if m.group(2) is not None else 1)
        a_start, a_len = int(m.group(3)), int(m.group(4) if m.group(4) is not None else 1)
        hunk_index = sum(len(f.hunks) for f in files) + len(hunks)
        name = f"{(new_path or old_path)}@{b_start}"
        body: list[tuple[str, str]] = []
        old_left, new_left = b_len, a_len
        i += 1
        while old_left > 0 or new_left > 0:
            if i >= len(lines):
                raise MalformedDiffError(f"hunk {name}: body shorter than its header claims")
            raw = lines[i]
            if raw.startswith("\\"):
                i += 1
                continue
            tag = raw[:1] if raw else " "
            if tag not in (" ", "-", "+") or _HUNK_HEADER.match(raw):
                raise MalformedDiffError(f"hunk {name}: body shorter than its header claims")
            if tag in (" ", "-"):
                old_left -= 1
            if tag in (" ", "+"):
                new_left -= 1
            if old_left < 0 or new_left < 0:
                raise MalformedDiffError(f"hunk {name}: body longer than its header claims")
            body.append((tag, raw[1:]))
            i += 1
        while i < len(lines) and lines[i].startswith("\\"):
            i += 1
        if not any(tag != " " for tag, _ in body):
            raise MalformedDiffError(f"hunk {name}: no changed lines")
        section = m.group(5).strip() or None
        hunks.append(
            Hunk(
                f"{patch_id}:{hunk_index}",
                patch_id,
                new_path or old_path or "",
                b_start,
                b_len,
                a_start,
                a_len,
                tuple(body),
                _function_from_section(section),
            )
        )
    flush()
    return PatchRecord(patch_id, project_id, tuple(files), commit_id)


def _function_from_section(section: str | None) -> str | None:
    if not section:
        return None
    m = re.search(r"([A-Za-z_]\w*)\s*\(", section)
    return m.group(1) if m else None


def only_c_files(record: PatchRecord, extensions=C_EXTENSIONS) -> PatchRecord | None:
    files = tuple(f for f in record.files if f.path.endswith(tuple(extensions)))
    if not files:
        return None
    return PatchRecord(record.patch_id, record.project_id, files, record.commit_id)


def filter_patch(record: PatchRecord, flt: MiningFilter) -> tuple[bool, str | None]:
    if record.changed_line_count > flt.max_changed_lines:
        return False, f"size: {record.changed_line_count} changed lines > {flt.max_changed_lines}"
    if record.hunk_count > flt.max_hunks:
        return False, f"spread: {record.hunk_count} hunks > {flt.max_hunks}"
    return True, None


# -- repositories --------------------------------------------------------------


def _run(cmd: list[str], cwd: str) -> str:
    try:
        proc = subprocess.run(cmd, cwd=cwd, capture_output=True, text=True, errors="replace")
    except OSError as exc:
        raise MiningError(f"cannot run {cmd[0]}: {exc}") from exc
    if proc.returncode != 0:
        raise MiningError(f"{' '.join(cmd)} failed: {proc.stderr.strip()}")
    return proc.stdout


def mine_repository(
    repo_path: str | os.PathLike,
    flt: MiningFilter = MiningFilter(),
    executable: str = "git",
    extra_args: tuple[str, ...] = (),
) -> Iterator[PatchRecord]:
    """One record per non-merge commit touching C files, newest first."""
    repo = Path(repo_path)
    if not repo.is_dir():
        raise ValueError(f"not a directory: {repo}")
    _run([executable, *extra_args, "rev-parse", "--git-dir"], str(repo))
    project = repo.resolve().name
    shas = _run([executable, *extra_args, "rev-list", "--no-merges", "HEAD"], str(repo)).split()
    for sha in shas:
        diff = _run(
            [executable, *extra_args, "show", "--format=", "--no-color", "--no-ext-diff", "--no-renames",
             "--unified=3", sha],
            str(repo),
        )
        record = parse_unified_diff(diff, project_id=project, commit_id=sha, patch_id=sha[:12])
        record = only_c_files(record, flt.languages)
        if record is None:
            continue
        keep, reason = filter_patch(record, flt)
        if not keep:
            log.debug("dropping %s: %s", sha[:12], reason)
            continue
        yield record


def file_at_revision(repo_path, rev: str, path: str, executable: str = "git") -> str | None:
    proc = subprocess.run(
        [executable, "show", f"{rev}:{path}"], cwd=str(repo_path), capture_output=True, text=True, errors="replace"
    )
    return proc.stdout if proc.returncode == 0 else None


# -- fragments -----------------------------------------------------------------


SYNTHETIC_FUNCTION = "__hunk__"


@dataclass(frozen=True)
class Fragments:
    before: str
    after: str
    function_name: str | None
    synthetic: bool = False
    first_line: int = 1  # line of the before file where ``before`` starts

    def __iter__(self):
        return iter((self.before, self.after))


def apply_hunk(text: str, hunk: Hunk, line_offset: int = 0) -> str:
    """Apply one hunk to ``text``; ``line_offset`` shifts the hunk's line numbers."""
    lines = text.splitlines(keepends=True)
    start = max(hunk.before_start - 1 - line_offset, 0) if hunk.before_length else hunk.before_start - line_offset
    old = hunk.old_side
    got = [ln.rstrip("\r\n") for ln in lines[start : start + len(old)]]
    if got != old:
        raise StaleHunkError(f"hunk {hunk.hunk_id}: context does not match at line {start + 1}")
    eol = "\n"
    if lines and lines[0].endswith("\r\n"):
        eol = "\r\n"
    new = [ln + eol for ln in hunk.new_side]
    tail = lines[start + len(old) :]
    if tail == [] and lines and not lines[-1].endswith("\n") and new and start + len(old) == len(lines):
        new[-1] = new[-1].rstrip("\r\n")
    return "".join(lines[:start] + new + tail)


def _changed_before_lines(hunk: Hunk) -> tuple[int, int]:
    line = hunk.before_start if hunk.before_length else hunk.before_start + 1
    first = last = None
    prev = line - 1
    for tag, _ in hunk.lines:
        if tag == "-":
            first = line if first is None else first
            last = line
            line += 1
        elif tag == " ":
            prev = line
            line += 1
        else:
            # insertion sits after `prev`, before `line`
            anchor = prev if prev >= hunk.before_start else line
            first = anchor if first is None else min(first, anchor)
            last = anchor if last is None else max(last, anchor)
    return first, last


def reconstitute(hunk: Hunk, before_file_text: str | None) -> Fragments:
    """Before/after versions of the function enclosing ``hunk``.

    Without the before file, the hunk's own lines stand in for it.  A hunk
    outside any function is wrapped in a synthetic function body.
    """
    if before_file_text is None:
        base = hunk.before_start if hunk.before_length else hunk.before_start + 1
        pseudo = "\n" * (base - 1) + "".join(line + "\n" for line in hunk.old_side)
        before_file_text = pseudo
    after_text = apply_hunk(before_file_text, hunk)
    first, last = _changed_before_lines(hunk)
    unit = parse_unit(before_file_text, hunk.file_path)
    best = None
    for fn in unit.functions():
        if fn.first_line <= first and last <= fn.last_line:
            if best is None or fn.last_line - fn.first_line < best.last_line - best.first_line:
                best = fn
    before_lines = before_file_text.splitlines(keepends=True)
    after_lines = after_text.splitlines(keepends=True)
    if best is not None:
        delta = len(hunk.new_side) - len(hunk.old_side)
        lo, hi = best.first_line, best.last_line
        before = "".join(before_lines[lo - 1 : hi])
        after = "".join(after_lines[lo - 1 : hi + delta])
        return Fragments(before, after, best.children[1].label, False, lo)
    head = f"void {SYNTHETIC_FUNCTION}(void) {{\n"
    before = head + "".join(line + "\n" for line in hunk.old_side) + "}\n"
    after = head + "".join(line + "\n" for line in hunk.new_side) + "}\n"
    return Fragments(before, after, None, True, hunk.before_start)


def iter_diff_files(directory: str | os.PathLike) -> Iterator[Path]:
    root = Path(directory)
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.suffix in (".patch", ".diff"):
            yield p
