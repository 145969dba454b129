import difflib
import filecmp
import json
import shutil
from pathlib import Path

import pytest

from genpatch.cli import main

ROOT = Path(__file__).parent.parent
DATA = Path(__file__).parent / "data"
TOY = ROOT / "corpus" / "toy" / "diffs"
BENCH = ROOT / "benchmarks" / "toy"


def write_patch(d, name, i):
    before = f"int f{i}(int a)\n{{\n    return g(a);\n}}\n"
    after = before.replace("g(a)", "g(a, 1)")
    text = "".join(difflib.unified_diff(before.splitlines(True), after.splitlines(True), f"a/s{i}.c", f"b/s{i}.c", n=9))
    (d / f"{name}.patch").write_text(text)


def rows(path):
    return [json.loads(l) for l in path.read_text().splitlines() if l.strip()]


def test_mine_five_patches(tmp_path):
    d = tmp_path / "diffs"
    d.mkdir()
    for i in range(5):
        write_patch(d, f"p{i}", i)
    out = tmp_path / "out"
    assert main(["mine", str(d), "--out", str(out)]) == 0
    assert len(rows(out / "hunks.jsonl")) == 5
    assert len(list((out / "scripts").iterdir())) == 5


def test_mine_empty_corpus(tmp_path):
    assert main(["mine", "--out", str(tmp_path / "o")]) == 2
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["mine", str(empty), "--out", str(tmp_path / "o")]) == 2


def test_mine_mixed_valid_and_invalid(tmp_path, capsys):
    d = tmp_path / "diffs"
    d.mkdir()
    write_patch(d, "good", 0)
    (d / "bad.patch").write_text("--- a/x.c\n+++ b/x.c\n@@ -1,3 +1,3 @@\n-a\n")
    assert main(["mine", str(d), "--out", str(tmp_path / "o")]) == 0
    assert len(rows(tmp_path / "o" / "hunks.jsonl")) == 1
    assert "bad.patch" in capsys.readouterr().err


def test_missing_upstream_artifact(tmp_path, capsys):
    for cmd, missing in (("cluster", "hunks.jsonl"), ("infer", "clusters.jsonl"), ("stats", "stats.json")):
        assert main([cmd, "--out", str(tmp_path)]) == 2
        assert str(tmp_path / missing) in capsys.readouterr().err


def test_apply_listing(capsys):
    assert main(["apply", str(DATA / "listing1.cocci"), str(DATA / "listing2.c")]) == 0
    diff = capsys.readouterr().out
    added = [l[1:].strip() for l in diff.splitlines() if l.startswith("+") and not l.startswith("+++")]
    assert "if (pers == NULL)" in added and "return 0;" in added


def test_apply_without_match(tmp_path, capsys):
    p = tmp_path / "nm.cocci"
    p.write_text("@r@\nexpression E;\n@@\n- nothere(E)\n+ g(E)\n")
    assert main(["apply", str(p), str(DATA / "listing2.c")]) == 1
    assert capsys.readouterr().out == ""


def test_apply_bad_pattern(tmp_path):
    p = tmp_path / "bad.cocci"
    p.write_text("not a pattern\n")
    assert main(["apply", str(p), str(DATA / "listing2.c")]) == 2


def run_pipeline(out, *extra):
    assert main(["mine", str(TOY), "--out", str(out), *extra]) == 0
    assert main(["cluster", "--out", str(out)]) == 0
    assert main(["infer", "--out", str(out), "--timeout", "60", *extra]) == 0


def test_full_pipeline_on_toy_corpus(tmp_path, capsys):
    out = tmp_path / "out"
    run_pipeline(out)
    stats = json.loads((out / "stats.json").read_text())
    assert stats["cluster_count"] == 3 and stats["unique_hunks"] == 2 and stats["total_hunks"] == 12
    assert stats["size_histogram"] == {"2": 1, "3": 1, "5": 1}
    index = rows(out / "db" / "index.jsonl")
    assert len(index) == 4
    assert all(r["recall"] == 1.0 and r["precision"] == 1.0 for r in index)
    capsys.readouterr()
    assert main(["stats", "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "cluster sizes" in table and "patterns (4)" in table and "project" in table


def test_stages_are_idempotent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_pipeline(a)
    shutil.copytree(a, b)
    run_pipeline(a, "--jobs", "2")
    cmp = filecmp.dircmp(a, b)
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for sub in ("db", "scripts"):
        c = filecmp.dircmp(a / sub, b / sub)
        assert not c.diff_files and not c.left_only and not c.right_only


def test_config_file(tmp_path):
    cfg = tmp_path / "pipeline.yaml"
    cfg.write_text(f"corpus:\n  diffs: [{TOY}]\nmining:\n  max_hunks: 1\nout: out\n")
    assert main(["--config", str(cfg), "mine"]) == 0
    hunks = rows(tmp_path / "out" / "hunks.jsonl")
    assert len({h["patch_id"] for h in hunks}) == len(hunks)


def test_bad_config(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("repair:\n  colour: blue\n")
    assert main(["repair", "--config", str(cfg)]) == 2
    assert main(["mine", "--config", str(tmp_path / "absent.yaml")]) == 2
    cfg.write_text("corpus:\n  diffs: [nowhere]\n")
    assert main(["mine", "--config", str(cfg)]) == 2


def test_repair_command(tmp_path):
    cfg = tmp_path / "repair.yaml"
    cfg.write_text(
        f"db: {BENCH / 'db'}\n"
        "repair:\n"
        f"  project: {BENCH / 'bugs' / 'sum_to'}\n"
        "  build_command: gcc -w -o prog prog.c\n"
        "  test_command: sh tests.sh\n"
        "  heldout_command: sh heldout.sh\n"
        "  test_timeout: 10\n"
    )
    out = tmp_path / "out"
    assert main(["repair", "--config", str(cfg), "--out", str(out), "--strategy", "project"]) == 0
    report = json.loads((out / "repair.json").read_text())
    assert report["outcomes"][-1]["status"] == "plausible"
    assert main(["repair", "--config", str(cfg), "--out", str(out), "--budget", "1", "--strategy", "hunk"]) == 1
    assert main(["repair", "--config", str(cfg), "--out", str(out), "--budget", "0"]) == 2
    assert main(["repair", "--out", str(out)]) == 2
