import json
import shutil
from pathlib import Path

import pytest

from genpatch.repair import (
    IMPLAUSIBLE,
    NONSENSICAL,
    PLAUSIBLE,
    CandidateOutcome,
    ConfigError,
    PatternDbError,
    RepairConfig,
    frequency_counts,
    generate_candidates,
    load_pattern_db,
    npc_counts,
    prioritize,
    random_order,
    repair,
    validate_candidate,
    write_pattern_db,
)
from genpatch.smpl import PatchStats, parse_generic_patch

PROG = """#include <stdio.h>
#include <stdlib.h>

int twice(int x) {
    int y = x;
    return y + y + 1;
}

int main(int argc, char **argv) {
    printf("%d\\n", twice(atoi(argv[1])));
    return 0;
}
"""

PATTERNS = {
    "drop_decl": "@drop_decl exists@\nidentifier I;\nexpression E;\n@@\n- int I = E;\n",
    "zero_return": "@zero_return exists@\nexpression E;\n@@\n- return E;\n+ return 0;\n",
    "drop_one": "@drop_one exists@\nexpression E;\n@@\n- E + 1\n+ E\n",
    "never": "@never exists@\nexpression E;\n@@\n- nothere(E)\n+ g(E)\n",
}


def make_db(root, freq):
    patches = []
    for pid, text in PATTERNS.items():
        gp = parse_generic_patch(text, pid)
        gp.stats = PatchStats(1.0, 1.0, freq.get(pid, {}))
        gp.provenance = ({"project": "p", "commit": "c", "file": "f.c", "function": "fn", "hunk_id": f"{pid}:0"},)
        patches.append(gp)
    return load_pattern_db(write_pattern_db(root, patches))


@pytest.fixture
def project(tmp_path):
    p = tmp_path / "proj"
    p.mkdir()
    (p / "prog.c").write_text(PROG)
    (p / "t1.sh").write_text('[ "$(./prog 0)" = "0" ]\n')
    (p / "t2.sh").write_text('[ "$(./prog 3)" = "6" ]\n')
    return p


@pytest.fixture
def db(tmp_path):
    freq = {
        "drop_decl": dict(hunk=50, project=1),
        "zero_return": dict(hunk=30, project=2),
        "drop_one": dict(hunk=10, project=9),
        "never": dict(hunk=99, project=9),
    }
    return make_db(tmp_path / "db", freq)


def config(project, **kw):
    return RepairConfig(str(project), "gcc -w -o prog prog.c", "sh t1.sh", "sh t2.sh", test_timeout=10, **kw)


# -- database -------------------------------------------------------------------


def test_db_round_trip(db):
    assert len(db) == 4 and db.warnings == []
    row = json.loads((db.root / "index.jsonl").read_text().splitlines()[0])
    assert set(row) >= {"id", "file", "recall", "precision", "freq_hunk", "freq_function", "freq_file",
                        "freq_patch", "freq_project", "provenance"}
    assert "hunk-id" in row["provenance"][0]
    assert db.patches["drop_one"].provenance[0]["hunk_id"] == "drop_one:0"


def test_missing_pattern_file_is_skipped(db):
    (db.root / "patterns" / "never.cocci").unlink()
    again = load_pattern_db(db.root)
    assert len(again) == 3 and len(again.warnings) == 1


def test_bad_rows_are_skipped(db):
    with open(db.root / "index.jsonl", "a") as fh:
        fh.write("{not json\n")
        fh.write(json.dumps({"id": "drop_one", "file": "patterns/drop_one.cocci"}) + "\n")
    again = load_pattern_db(db.root)
    assert len(again) == 4 and len(again.warnings) == 2


def test_empty_directory_has_no_index(tmp_path):
    with pytest.raises(PatternDbError, match="no index"):
        load_pattern_db(tmp_path)


def test_frequency_counts():
    prov = [
        {"project": "a", "commit": "1", "file": "x.c", "function": "f", "hunk_id": "1:0"},
        {"project": "a", "commit": "1", "file": "x.c", "function": "g", "hunk_id": "1:1"},
        {"project": "b", "commit": "2", "file": "x.c", "function": "f", "hunk_id": "2:0"},
    ]
    assert frequency_counts(prov) == {"hunk": 3, "function": 3, "file": 2, "patch": 2, "project": 2}


# -- ordering -------------------------------------------------------------------


def test_prioritize_by_hunk_and_project(tmp_path):
    db = make_db(tmp_path / "a", {"drop_decl": dict(hunk=202, project=1), "zero_return": dict(hunk=178, project=14),
                                   "drop_one": dict(hunk=100, project=1), "never": dict(hunk=1, project=1)})
    assert prioritize(db, "hunk")[:3] == ["drop_decl", "zero_return", "drop_one"]
    assert prioritize(db, "project")[:3] == ["zero_return", "drop_decl", "drop_one"]


def test_prioritize_ties_by_id(tmp_path):
    db = make_db(tmp_path / "b", {})
    assert prioritize(db, "patch") == sorted(PATTERNS)
    with pytest.raises(ConfigError):
        prioritize(db, "galaxy")


def test_random_order_is_a_fixed_permutation(db):
    assert random_order(db, 3) == random_order(db, 3)
    assert sorted(random_order(db, 3)) == db.ids()


# -- candidates -----------------------------------------------------------------


def test_candidate_order_and_budget(db, project):
    ids = ["never", "zero_return", "drop_one"]
    cands = list(generate_candidates(ids, db, ["prog.c"], project))
    # main's `return 0;` rewrites to itself and is skipped as an empty candidate
    assert [c.patch_id for c in cands] == ["zero_return", "drop_one"]
    assert [c.index for c in cands] == [1, 2]
    assert len(list(generate_candidates(ids, db, ["prog.c"], project, budget=1))) == 1
    again = list(generate_candidates(ids, db, ["prog.c"], project))
    assert [c.digest for c in again] == [c.digest for c in cands]


def test_strategy_changes_order_not_set(db, project):
    sets = []
    for strategy in ("hunk", "function", "file", "patch", "project"):
        sets.append({c.digest for c in generate_candidates(prioritize(db, strategy), db, ["prog.c"], project)})
    assert all(s == sets[0] for s in sets)


# -- validation -----------------------------------------------------------------


def _candidate(db, project, pid):
    return next(c for c in generate_candidates([pid], db, ["prog.c"], project))


def test_validation_statuses(db, project):
    cfg = config(project)
    assert validate_candidate(_candidate(db, project, "drop_decl"), cfg).status == NONSENSICAL
    weak = validate_candidate(_candidate(db, project, "zero_return"), cfg)
    assert weak.status == PLAUSIBLE and not weak.promoted_correct
    good = validate_candidate(_candidate(db, project, "drop_one"), cfg)
    assert good.status == PLAUSIBLE and good.promoted_correct


def test_timeout_counts_as_failure(db, project):
    (project / "slow.sh").write_text("sleep 5\n")
    cfg = RepairConfig(str(project), "true", "sh slow.sh", test_timeout=0.5)
    assert validate_candidate(_candidate(db, project, "drop_one"), cfg).status == IMPLAUSIBLE


def test_outcome_invariant():
    with pytest.raises(ValueError):
        CandidateOutcome(1, "p", "s", IMPLAUSIBLE, promoted_correct=True)


@pytest.mark.parametrize(
    "kw",
    [dict(budget=0), dict(build_command=" "), dict(strategy="nope"), dict(test_timeout=0), dict(project="/no/such/dir")],
)
def test_config_validation(project, kw):
    base = dict(project=str(project), build_command="true", test_command="true")
    base.update(kw)
    with pytest.raises(ConfigError):
        RepairConfig(**base)


# -- npc ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "statuses, want",
    [
        ([NONSENSICAL, IMPLAUSIBLE, PLAUSIBLE], (3, 2, 1)),
        ([PLAUSIBLE], (1, 0, 0)),
        ([NONSENSICAL] * 4 + [PLAUSIBLE, IMPLAUSIBLE], (5, 4, 0)),
        ([IMPLAUSIBLE, NONSENSICAL], (None, None, None)),
        ([], (None, None, None)),
    ],
)
def test_npc_counts(statuses, want):
    assert npc_counts(statuses) == want


def test_repair_loop(db, project):
    before = (project / "prog.c").read_text()
    report = repair(config(project, strategy="hunk"), db)
    statuses = [o.status for o in report.outcomes]
    assert statuses == [NONSENSICAL, PLAUSIBLE]
    assert (report.npc_all, report.npc_sensical, report.first_plausible_index) == (1, 0, 2)
    assert (project / "prog.c").read_text() == before
    assert repair(config(project, strategy="hunk"), db).to_json(with_time=False) == report.to_json(with_time=False)
    d = report.to_dict()
    assert d["outcomes"][0]["provenance"][0]["hunk_id"] == "drop_decl:0"


def test_repair_find_all_and_exhaustion(db, project):
    full = repair(config(project, strategy="hunk", find_all=True), db)
    assert len(full.outcomes) == 3 and full.npc_all == 1
    none = repair(config(project, strategy="hunk", budget=1), db)
    assert not none.plausible and "npc_all" not in none.to_dict()


def test_infrastructure_errors_are_not_counted(db, project, monkeypatch):
    import genpatch.repair as rp

    real = rp.shutil.copytree
    calls = []

    def flaky(*a, **k):
        calls.append(1)
        if len(calls) == 1:
            raise OSError("disk full")
        return real(*a, **k)

    monkeypatch.setattr(rp.shutil, "copytree", flaky)
    report = repair(config(project, strategy="hunk"), db)
    assert len(report.infrastructure_errors) == 1
    assert [o.status for o in report.outcomes] == [PLAUSIBLE] and report.npc_all == 0
