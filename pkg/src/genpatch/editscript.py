"""Tree differencing and rich AST edit scripts.

The matcher is a small, deterministic GumTree-style pipeline:

1. exact subtree matching, largest subtrees first (leaves only when their
   content is unique on both sides);
2. bottom-up container matching of same-type nodes whose matched-descendant
   overlap (Dice coefficient) is at least 0.5; the roots always pair up when
   their types agree;
3. top-down recovery pairing leftover same-type children of matched parents.

Unmatched before nodes become DEL, unmatched after nodes INS, matched nodes
with a changed label UPD, and matched nodes that changed parent (or fell out
of the longest common child order) MOV.  The nearest enclosing non-block
statement of every change is reported as a context UPD so that scripts carry
their statement-level context, and nesting in the script follows the AST.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .lang.ast import Node
from .lang.printer import render

KINDS = ("MOV", "DEL", "INS", "UPD")
CONTEXT_STATEMENTS = frozenset(
    {"ExprStmt", "DeclStmt", "ReturnStmt", "IfStmt", "WhileStmt", "ForStmt", "OpaqueStmt"}
)
DICE_THRESHOLD = 0.5


class ScriptSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class EditAction:
    kind: str
    depth: int
    source_type: str
    source_tokens: str
    target_type: str | None = None
    target_tokens: str | None = None
    # replay references; not part of the textual form or of equality
    node: Node | None = field(default=None, compare=False, repr=False)
    partner: Node | None = field(default=None, compare=False, repr=False)
    parent_before: Node | None = field(default=None, compare=False, repr=False)
    parent_after: Node | None = field(default=None, compare=False, repr=False)
    index: int | None = field(default=None, compare=False, repr=False)
    order: int = field(default=-1, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.depth < 0:
            raise ValueError("negative depth")
        if self.kind == "DEL" and (self.target_type is not None or self.target_tokens is not None):
            raise ValueError("DEL takes no target")
        if self.kind == "UPD" and (self.target_type is not None or self.target_tokens is None):
            raise ValueError("UPD takes target tokens only")
        if self.kind in ("MOV", "INS") and (self.target_type is None or self.target_tokens is None):
            raise ValueError(f"{self.kind} needs a target node type and tokens")

    def to_text(self, elide_tokens: bool = False) -> str:
        def tok(s: str | None) -> list[str]:
            return [] if elide_tokens or not s else [s]

        parts = [self.kind, self.source_type, "@@", *tok(self.source_tokens)]
        if self.kind in ("MOV", "INS"):
            parts += ["@TO@", self.target_type, "@@", *tok(self.target_tokens)]
        elif self.kind == "UPD":
            parts += ["@TO@", *tok(self.target_tokens)]
        parts.append("@AT@")
        return "---" * self.depth + " ".join(parts)


@dataclass(frozen=True)
class RichEditScript:
    actions: tuple[EditAction, ...]
    hunk_id: str = ""

    def __post_init__(self):
        if not self.actions:
            raise ValueError("an edit script needs at least one action")

    @property
    def text(self) -> str:
        return serialize_script(self.actions)


@dataclass(frozen=True)
class ShapeKey:
    canonical_text: str

    @property
    def digest(self) -> str:
        return hashlib.sha1(self.canonical_text.encode()).hexdigest()[:16]


def _tokens(node: Node) -> str:
    if node.tokens:
        return node.text()
    return " ".join(render(node).split())


# -- matching ---------------------------------------------------------------


class _Tree:
    def __init__(self, root: Node):
        self.root = root
        self.pre: list[Node] = list(root.walk())
        self.order = {id(n): i for i, n in enumerate(self.pre)}
        self.parent: dict[int, Node | None] = {id(root): None}
        self.index: dict[int, int] = {id(root): 0}
        for n in self.pre:
            for i, c in enumerate(n.children):
                self.parent[id(c)] = n
                self.index[id(c)] = i
        self.size: dict[int, int] = {}
        for n in root.postorder():
            self.size[id(n)] = 1 + sum(self.size[id(c)] for c in n.children)

    def descendants(self, n: Node):
        it = n.walk()
        next(it)
        return it

    def ancestors(self, n: Node):
        p = self.parent[id(n)]
        while p is not None:
            yield p
            p = self.parent[id(p)]


class _Matching:
    def __init__(self, before: _Tree, after: _Tree):
        self.b, self.a = before, after
        self.b2a: dict[int, Node] = {}
        self.a2b: dict[int, Node] = {}

    def add(self, x: Node, y: Node) -> None:
        self.b2a[id(x)] = y
        self.a2b[id(y)] = x

    def add_subtree(self, x: Node, y: Node) -> None:
        for u, v in zip(x.walk(), y.walk()):
            self.add(u, v)


def _match(before: _Tree, after: _Tree) -> _Matching:
    m = _Matching(before, after)

    # 1. exact subtrees, largest first
    by_key: dict[tuple, list[Node]] = {}
    for n in after.pre:
        by_key.setdefault(n.key(), []).append(n)
    b_count: dict[tuple, int] = {}
    for n in before.pre:
        b_count[n.key()] = b_count.get(n.key(), 0) + 1
    for n in sorted(before.pre, key=lambda x: -before.size[id(x)]):
        if id(n) in m.b2a:
            continue
        cands = [c for c in by_key.get(n.key(), ()) if id(c) not in m.a2b]
        if not cands:
            continue
        if before.size[id(n)] == 1 and (len(by_key[n.key()]) != 1 or b_count[n.key()] != 1):
            continue
        bp = before.parent[id(n)]

        def rank(c: Node):
            ap = after.parent[id(c)]
            same_parent = bp is not None and ap is not None and ap.key() == bp.key()
            return (not same_parent, abs(after.order[id(c)] - before.order[id(n)]), after.order[id(c)])

        m.add_subtree(n, min(cands, key=rank))

    # 2. containers, bottom-up
    for n in before.root.postorder():
        if id(n) in m.b2a or not n.children:
            continue
        counts: dict[int, int] = {}
        nodes: dict[int, Node] = {}
        for d in before.descendants(n):
            partner = m.b2a.get(id(d))
            if partner is None:
                continue
            for anc in after.ancestors(partner):
                counts[id(anc)] = counts.get(id(anc), 0) + 1
                nodes[id(anc)] = anc
        best, best_score = None, 0.0
        nb = before.size[id(n)] - 1
        for key, common in counts.items():
            cand = nodes[key]
            if cand.type != n.type or id(cand) in m.a2b:
                continue
            dice = 2 * common / (nb + after.size[key] - 1)
            if dice > best_score or (dice == best_score and best is not None and after.order[key] < after.order[id(best)]):
                best, best_score = cand, dice
        if best is not None and best_score >= DICE_THRESHOLD:
            m.add(n, best)
    if id(before.root) not in m.b2a and id(after.root) not in m.a2b and before.root.type == after.root.type:
        m.add(before.root, after.root)

    # 3. recovery, top-down
    queue = [n for n in before.pre if id(n) in m.b2a]
    while queue:
        x = queue.pop(0)
        y = m.b2a[id(x)]
        free_a = [c for c in y.children if id(c) not in m.a2b]
        for c in x.children:
            if id(c) in m.b2a:
                continue
            for j, d in enumerate(free_a):
                if d.type == c.type:
                    m.add(c, d)
                    free_a.pop(j)
                    queue.append(c)
                    break
    return m


def _lcs(xs: list, ys: list) -> set:
    """Elements of ``xs`` on one longest common subsequence with ``ys``."""
    n, k = len(xs), len(ys)
    table = [[0] * (k + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(k - 1, -1, -1):
            if xs[i] == ys[j]:
                table[i][j] = table[i + 1][j + 1] + 1
            else:
                table[i][j] = max(table[i + 1][j], table[i][j + 1])
    keep = set()
    i = j = 0
    while i < n and j < k:
        if xs[i] == ys[j]:
            keep.add(xs[i])
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return keep


def diff_trees(before: Node, after: Node) -> list[EditAction]:
    """Edit actions turning ``before`` into ``after``, in script order."""
    bt, at = _Tree(before), _Tree(after)
    m = _match(bt, at)

    # (anchor before-node, kind, payload) before depth assignment
    raw: list[dict] = []

    moved: set[int] = set()
    for x in bt.pre:
        y = m.b2a.get(id(x))
        if y is None:
            continue
        bp, ap = bt.parent[id(x)], at.parent[id(y)]
        if bp is None and ap is None:
            continue
        if bp is None or ap is None or m.b2a.get(id(bp)) is not ap:
            moved.add(id(x))
    for x in bt.pre:
        y = m.b2a.get(id(x))
        if y is None:
            continue
        kids = [id(c) for c in x.children if id(c) not in moved and m.b2a.get(id(c)) is not None
                and at.parent[id(m.b2a[id(c)])] is y]
        order_a = [id(m.a2b[id(c)]) for c in y.children if id(c) in m.a2b and id(m.a2b[id(c)]) in kids]
        keep = _lcs(kids, order_a)
        moved.update(k for k in kids if k not in keep)

    for x in bt.pre:
        y = m.b2a.get(id(x))
        if y is None:
            if bt.parent[id(x)] is None or id(bt.parent[id(x)]) in m.b2a:
                raw.append(dict(kind="DEL", anchor=x, inside=False, node=x))
            continue
        if x.label != y.label:
            raw.append(dict(kind="UPD", anchor=x, inside=False, node=x, partner=y))
        if id(x) in moved:
            ap = at.parent[id(y)]
            raw.append(dict(kind="MOV", anchor=x, inside=False, node=x, partner=y, after_parent=ap))
    for y in at.pre:
        if id(y) in m.a2b:
            continue
        ap = at.parent[id(y)]
        if ap is not None and id(ap) not in m.a2b:
            continue  # part of an inserted subtree
        if ap is None:
            anchor, inside = before, True
        else:
            anchor, inside = m.a2b[id(ap)], True
        raw.append(dict(kind="INS", anchor=anchor, inside=inside, node=y, after_parent=ap))

    # context statements wrapping the changes
    acted = {id(r["anchor"]) for r in raw if not r["inside"] and r["kind"] in ("UPD", "MOV")}
    context: dict[int, Node] = {}
    for r in raw:
        start = r["anchor"]
        chain = ([start] if r["inside"] else []) + list(bt.ancestors(start))
        for anc in chain:
            if anc.type in CONTEXT_STATEMENTS:
                if id(anc) in m.b2a and id(anc) not in acted:
                    context[id(anc)] = anc
                break
    for anc in context.values():
        raw.append(dict(kind="UPD", anchor=anc, inside=False, node=anc, partner=m.b2a[id(anc)], context=True))

    # nesting: an action's parent is the nearest action anchored above it
    holders: dict[int, list[int]] = {}
    for i, r in enumerate(raw):
        if not r["inside"]:
            holders.setdefault(id(r["anchor"]), []).append(i)

    def holder_of(i: int) -> int | None:
        r = raw[i]
        chain = ([r["anchor"]] if r["inside"] else []) + list(bt.ancestors(r["anchor"]))
        for anc in chain:
            for j in holders.get(id(anc), ()):
                if j != i and raw[j]["kind"] != "DEL":
                    return j
        return None

    kind_rank = {"UPD": 0, "MOV": 1, "DEL": 2, "INS": 3}

    def sort_key(i: int):
        r = raw[i]
        return (
            bt.order[id(r["anchor"])] + (0.5 if r["inside"] else 0),
            0 if r.get("context") else 1,
            kind_rank[r["kind"]],
            at.order[id(r["node"])] if r["kind"] == "INS" else bt.order[id(r["node"])],
        )

    children: dict[int | None, list[int]] = {}
    for i in range(len(raw)):
        children.setdefault(holder_of(i), []).append(i)

    out: list[EditAction] = []

    def emit(parent: int | None, depth: int) -> None:
        for i in sorted(children.get(parent, ()), key=sort_key):
            out.append(_make_action(raw[i], depth, m, at))
            emit(i, depth + 1)

    emit(None, 0)
    return out


def _make_action(r: dict, depth: int, m: _Matching, at: _Tree) -> EditAction:
    kind = r["kind"]
    node = r["node"]
    if kind == "DEL":
        return EditAction("DEL", depth, node.type, _tokens(node), node=node)
    if kind == "UPD":
        return EditAction(
            "UPD", depth, node.type, _tokens(node), None, _tokens(r["partner"]), node=node, partner=r["partner"]
        )
    ap = r["after_parent"]
    target_type = ap.type if ap is not None else node.type
    target_tokens = _tokens(ap) if ap is not None else ""
    pb = m.a2b.get(id(ap)) if ap is not None else None
    if kind == "MOV":
        y = r["partner"]
        return EditAction(
            "MOV", depth, node.type, _tokens(node), target_type, target_tokens,
            node=node, partner=y, parent_before=pb, parent_after=ap, index=at.index[id(y)],
            order=at.order[id(y)],
        )
    return EditAction(
        "INS", depth, node.type, _tokens(node), target_type, target_tokens,
        node=node, parent_before=pb, parent_after=ap, index=at.index[id(node)] if ap is not None else 0,
        order=at.order[id(node)],
    )


# -- replay -----------------------------------------------------------------


class _Mut:
    __slots__ = ("type", "label", "children", "parent")

    def __init__(self, type, label):
        self.type, self.label, self.children, self.parent = type, label, [], None

    def key(self):
        return (self.type, self.label, tuple(c.key() for c in self.children))


def replay(before: Node, actions: list[EditAction]) -> tuple | None:
    """Apply ``actions`` to a copy of ``before``; return the result's structural key."""
    mirror: dict[int, _Mut] = {}

    def copy(n: Node, parent: _Mut | None) -> _Mut:
        c = _Mut(n.type, n.label)
        c.parent = parent
        mirror[id(n)] = c
        c.children = [copy(k, c) for k in n.children]
        return c

    root = copy(before, None)
    after_mirror: dict[int, _Mut] = {}
    moved_in = set()
    for a in actions:
        if a.kind == "UPD":
            mirror[id(a.node)].label = a.partner.label
        if a.kind == "MOV":
            moved_in.add(id(a.partner))
            after_mirror[id(a.partner)] = mirror[id(a.node)]
    for a in actions:
        if a.kind == "MOV":
            x = mirror[id(a.node)]
            if x.parent is not None:
                x.parent.children.remove(x)
                x.parent = None
    for a in actions:
        if a.kind == "DEL":
            x = mirror[id(a.node)]
            if x.parent is not None:
                x.parent.children.remove(x)
            elif x is root:
                root = None

    def build_inserted(n: Node) -> _Mut:
        c = _Mut(n.type, n.label)
        after_mirror[id(n)] = c
        for k in n.children:
            if id(k) not in moved_in:
                kid = build_inserted(k)
                kid.parent = c
                c.children.append(kid)
        return c

    placed = sorted((a for a in actions if a.kind in ("MOV", "INS")), key=lambda a: a.order)
    for a in placed:
        x = build_inserted(a.node) if a.kind == "INS" else mirror[id(a.node)]
        if a.parent_before is not None:
            parent = mirror[id(a.parent_before)]
        elif a.parent_after is not None:
            parent = after_mirror[id(a.parent_after)]
        else:
            root = x
            continue
        x.parent = parent
        parent.children.insert(min(a.index, len(parent.children)), x)
    return root.key() if root is not None else None


# -- Grammar-1 text ---------------------------------------------------------

_LINE_RE = re.compile(r"^((?:---)*)(MOV|DEL|INS|UPD) (\S+) @@(.*) @AT@$")


def serialize_script(actions) -> str:
    return "\n".join(a.to_text() for a in actions)


def _split_marker(text: str, marker: str) -> tuple[str, str]:
    i = text.find(f" {marker}")
    if i < 0:
        raise ScriptSyntaxError(f"missing {marker}")
    return text[:i], text[i + len(marker) + 1 :]


def _strip_tok(s: str) -> str:
    if s == "":
        return ""
    if not s.startswith(" "):
        raise ScriptSyntaxError(f"malformed token field {s!r}")
    return s[1:]


def parse_script(text: str, hunk_id: str = "") -> RichEditScript:
    actions = []
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _LINE_RE.match(line)
        if m is None:
            raise ScriptSyntaxError(f"line {lineno}: not a rich edit script action: {line!r}")
        depth = len(m.group(1)) // 3
        kind, stype, rest = m.group(2), m.group(3), m.group(4)
        try:
            if kind == "DEL":
                actions.append(EditAction(kind, depth, stype, _strip_tok(rest)))
            elif kind == "UPD":
                src, dst = _split_marker(rest, "@TO@")
                actions.append(EditAction(kind, depth, stype, _strip_tok(src), None, _strip_tok(dst)))
            else:
                src, dst = _split_marker(rest, "@TO@")
                dm = re.match(r"^ (\S+) @@(.*)$", dst)
                if dm is None:
                    raise ScriptSyntaxError(f"malformed target {dst!r}")
                actions.append(EditAction(kind, depth, stype, _strip_tok(src), dm.group(1), _strip_tok(dm.group(2))))
        except ValueError as exc:
            raise ScriptSyntaxError(f"line {lineno}: {exc}") from exc
    return RichEditScript(tuple(actions), hunk_id)


def shape_key(script: RichEditScript | list[EditAction]) -> ShapeKey:
    actions = script.actions if isinstance(script, RichEditScript) else script
    return ShapeKey("\n".join(a.to_text(elide_tokens=True) for a in actions))
