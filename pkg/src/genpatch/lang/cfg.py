"""Per-function control-flow graphs.

Compound statements are flattened away.  ``if``/``while`` get one condition
node, ``for`` gets up to three (init, cond, step).  Edges are labelled
``true``/``false`` out of conditions, ``back`` into a loop header and
``seq`` otherwise.  Unreachable statements (dead code after ``return`` and
the like) are not part of the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .ast import Node

ENTRY, EXIT = "entry", "exit"


@dataclass(eq=False)
class CfgNode:
    id: int
    kind: str  # entry | exit | stmt | cond | init | step
    ast: Node | None = None  # statement, condition expression, or for-clause
    owner: Node | None = None  # statement the node belongs to

    def __repr__(self) -> str:
        what = self.ast.type if self.ast is not None else "-"
        return f"<cfg {self.id} {self.kind} {what}>"


@dataclass(eq=False)
class Cfg:
    function: Node
    nodes: dict[int, CfgNode]
    succ: dict[int, list[tuple[int, str]]]
    entry: int
    exit: int
    # compound statement -> ids of the CFG nodes it contains
    regions: dict[int, frozenset[int]] = field(default_factory=dict)
    # statement (id of the AST node) -> its first CFG node
    heads: dict[int, int] = field(default_factory=dict)
    pred: dict[int, list[tuple[int, str]]] = field(default_factory=dict)

    def successors(self, nid: int) -> list[tuple[int, str]]:
        return self.succ.get(nid, [])

    def edges(self) -> Iterator[tuple[int, int, str]]:
        for src, outs in self.succ.items():
            for dst, label in outs:
                yield src, dst, label

    def region_exits(self, stmt: Node) -> list[int]:
        """Nodes outside ``stmt``'s region that control reaches when leaving it."""
        region = self.regions[id(stmt)]
        out = []
        for nid in sorted(region):
            for dst, _ in self.successors(nid):
                if dst not in region and dst not in out:
                    out.append(dst)
        return out

    def paths(self, limit: int = 10_000) -> Iterator[list[int]]:
        """Entry-to-Exit paths that take each back edge at most once."""
        count = 0
        stack = [(self.entry, [self.entry], frozenset())]
        while stack:
            nid, path, used = stack.pop()
            if nid == self.exit:
                yield path
                count += 1
                if count >= limit:
                    return
                continue
            for dst, label in reversed(self.successors(nid)):
                edge = (nid, dst)
                if label == "back" or dst in path:
                    if edge in used:
                        continue
                    stack.append((dst, path + [dst], used | {edge}))
                else:
                    stack.append((dst, path + [dst], used))


class _Builder:
    def __init__(self, function: Node):
        self.function = function
        self.nodes: dict[int, CfgNode] = {}
        self.succ: dict[int, list[tuple[int, str]]] = {}
        self.regions: dict[int, frozenset[int]] = {}
        self.heads: dict[int, int] = {}
        self.loops: list[tuple[int, list]] = []  # (continue target, break list)
        self.entry = self.new(ENTRY)
        self.exit = self.new(EXIT)

    def new(self, kind: str, ast: Node | None = None, owner: Node | None = None) -> int:
        nid = len(self.nodes)
        self.nodes[nid] = CfgNode(nid, kind, ast, owner)
        self.succ[nid] = []
        return nid

    def link(self, pending, dst: int, back: bool = False) -> None:
        for src, label in pending:
            if back and label == "seq":
                label = "back"
            if (dst, label) not in self.succ[src]:
                self.succ[src].append((dst, label))

    def build(self, stmt: Node, pending: list) -> list:
        t = stmt.type
        first = len(self.nodes)
        if t == "CompoundStmt":
            for s in stmt.children:
                pending = self.build(s, pending)
            self.regions[id(stmt)] = frozenset(range(first, len(self.nodes)))
            return pending
        if t == "IfStmt":
            cond = self.new("cond", stmt.children[0], stmt)
            self.heads[id(stmt)] = cond
            self.link(pending, cond)
            exits = self.build(stmt.children[1], [(cond, "true")])
            if len(stmt.children) > 2:
                exits += self.build(stmt.children[2], [(cond, "false")])
            else:
                exits.append((cond, "false"))
            self.regions[id(stmt)] = frozenset(range(first, len(self.nodes)))
            return exits
        if t == "WhileStmt":
            cond = self.new("cond", stmt.children[0], stmt)
            self.heads[id(stmt)] = cond
            self.link(pending, cond)
            breaks: list = []
            self.loops.append((cond, breaks))
            body_exits = self.build(stmt.children[1], [(cond, "true")])
            self.loops.pop()
            self.link(body_exits, cond, back=True)
            self.regions[id(stmt)] = frozenset(range(first, len(self.nodes)))
            return [(cond, "false")] + breaks
        if t == "ForStmt":
            return self._build_for(stmt, pending, first)
        node = self.new("stmt", stmt, stmt)
        self.heads[id(stmt)] = node
        self.link(pending, node)
        if t == "ReturnStmt":
            self.link([(node, "seq")], self.exit)
            return []
        if t == "BreakStmt" and self.loops:
            self.loops[-1][1].append((node, "seq"))
            return []
        if t == "ContinueStmt" and self.loops:
            self.link([(node, "seq")], self.loops[-1][0], back=True)
            return []
        return [(node, "seq")]

    def _build_for(self, stmt: Node, pending: list, first: int) -> list:
        flags = stmt.label or ""
        parts = list(stmt.children[:-1])
        init_ast = parts.pop(0) if "i" in flags else None
        cond_ast = parts.pop(0) if "c" in flags else None
        step_ast = parts.pop(0) if "s" in flags else None
        if init_ast is not None:
            init = self.new("init", init_ast, stmt)
            self.heads[id(stmt)] = init
            self.link(pending, init)
            pending = [(init, "seq")]
        cond = self.new("cond", cond_ast, stmt)
        self.heads.setdefault(id(stmt), cond)
        self.link(pending, cond)
        step = self.new("step", step_ast, stmt) if step_ast is not None else None
        breaks: list = []
        self.loops.append((step if step is not None else cond, breaks))
        body_exits = self.build(stmt.children[-1], [(cond, "true")])
        self.loops.pop()
        if step is not None:
            self.link(body_exits, step)
            self.link([(step, "seq")], cond, back=True)
        else:
            self.link(body_exits, cond, back=True)
        self.regions[id(stmt)] = frozenset(range(first, len(self.nodes)))
        exits = list(breaks)
        if cond_ast is not None:
            exits.insert(0, (cond, "false"))
        return exits

    def finish(self) -> Cfg:
        # drop nodes that cannot be reached from Entry
        seen = {self.entry}
        stack = [self.entry]
        while stack:
            for dst, _ in self.succ[stack.pop()]:
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        seen.add(self.exit)
        nodes = {k: v for k, v in self.nodes.items() if k in seen}
        succ = {k: [e for e in v if e[0] in seen] for k, v in self.succ.items() if k in seen}
        pred: dict[int, list[tuple[int, str]]] = {k: [] for k in nodes}
        for src, outs in succ.items():
            for dst, label in outs:
                pred[dst].append((src, label))
        regions = {k: frozenset(n for n in v if n in seen) for k, v in self.regions.items()}
        heads = {k: v for k, v in self.heads.items() if v in seen}
        return Cfg(self.function, nodes, succ, self.entry, self.exit, regions, heads, pred)


def build_cfg(function: Node) -> Cfg:
    if function.type != "FunctionDef":
        raise ValueError(f"expected FunctionDef, got {function.type}")
    b = _Builder(function)
    body = function.children[3]
    exits = b.build(body, [(b.entry, "seq")])
    b.link(exits, b.exit)
    return b.finish()
