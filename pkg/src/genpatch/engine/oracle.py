"""Brute-force reference matcher.

Enumerates explicit CFG walks (each node visited a bounded number of times)
and, for every walk, every embedding of the rule.  It shares no matching code
with the engine: templates are compared by a separate recursive routine over
plain dictionaries, and rule items are re-derived from the rule body.
"""

from __future__ import annotations

from ..lang.ast import DOTS, AstUnit, Node
from ..lang.lexer import Position
from ..smpl.model import Context, Disjunction, Dots, GenericPatchRule, Minus
from .match import DegenerateRuleError, MatchSite, TermMatch, drop_overlapping, site_order
from .terms import Binding, Bound

_TYPES = ("TypeName", "PointerType")
_COMPOUND = ("IfStmt", "WhileStmt", "ForStmt")


# -- template comparison ------------------------------------------------------


def _bind(env: dict, name: str, value) -> dict | None:
    if name in env:
        return env if env[name] == value else None
    out = dict(env)
    out[name] = value
    return out


def _unify(t: Node, c: Node, env: dict, kinds: dict, wild) -> list[dict]:
    if t.type == "Identifier" and t.label in kinds:
        k = kinds[t.label]
        ok = {
            "identifier": c.type == "Identifier",
            "expression": c.type
            in ("BinaryExpr", "UnaryExpr", "CallExpr", "FieldAccess", "IndexExpr", "AssignExpr", "Identifier", "Literal"),
            "constant": c.type == "Literal",
        }.get(k, False)
        if not ok:
            return []
        e = _bind(env, t.label, ("node", c.key(), _Same(c)))
        return [] if e is None else [e]
    if t.type == "Identifier" and t.label in wild:
        return [env] if c.is_expression else []
    if t.type == "TypeName" and kinds.get(t.label) == "type":
        if c.type not in _TYPES:
            return []
        e = _bind(env, t.label, ("node", c.key(), _Same(c)))
        return [] if e is None else [e]
    if (
        t.type == "Param"
        and len(t.children) == 1
        and t.children[0].type == "TypeName"
        and kinds.get(t.children[0].label) == "parameter"
    ):
        if c.type != "Param":
            return []
        e = _bind(env, t.children[0].label, ("node", c.key(), _Same(c)))
        return [] if e is None else [e]
    if (
        t.type == "ExprStmt"
        and len(t.children) == 1
        and t.children[0].type == "Identifier"
        and kinds.get(t.children[0].label) == "statement"
    ):
        if not c.is_statement:
            return []
        e = _bind(env, t.children[0].label, ("node", c.key(), _Same(c)))
        return [] if e is None else [e]
    if t.type != c.type or t.label != c.label:
        return []
    return _unify_list(list(t.children), list(c.children), env, kinds, wild)


def _unify_list(ts: list, cs: list, env: dict, kinds, wild) -> list[dict]:
    if not ts:
        return [env] if not cs else []
    head = ts[0]
    if head.type == DOTS:
        out = []
        for k in range(len(cs) + 1):
            out += _unify_list(ts[1:], cs[k:], env, kinds, wild)
        return out
    if not cs:
        return []
    out = []
    for e in _unify(head, cs[0], env, kinds, wild):
        out += _unify_list(ts[1:], cs[1:], e, kinds, wild)
    return out


# -- what a CFG node exposes ---------------------------------------------------


def _exprs(n: Node | None) -> list[Node]:
    if n is None:
        return []
    acc = [n] if n.is_expression else []
    kids = n.children[:1] if n.type == "FieldAccess" else n.children
    for c in kids:
        acc += _exprs(c)
    return acc


def _certain(n: Node, outcome) -> list[Node]:
    """Expressions surely evaluated; outcome True/False/None."""
    if n.type in _TYPES:
        return []
    if not n.is_expression:
        acc = []
        for c in n.children:
            acc += _certain(c, None)
        return acc
    acc = [n]
    a = n.children[0] if n.children else None
    if n.type == "BinaryExpr" and n.label in ("&&", "||"):
        short = n.label == "||"  # outcome that may skip the right operand
        if outcome is (not short):
            acc += _certain(a, outcome) + _certain(n.children[1], outcome)
        else:
            acc += _certain(a, None)
    elif n.type == "BinaryExpr" and n.label == "?:":
        acc += _certain(a, None)
    elif n.type == "BinaryExpr" and n.label == ",":
        acc += _certain(a, None) + _certain(n.children[1], outcome)
    elif n.type == "UnaryExpr" and n.label == "!":
        acc += _certain(a, None if outcome is None else not outcome)
    else:
        kids = n.children[:1] if n.type == "FieldAccess" else n.children
        for c in kids:
            acc += _certain(c, None)
    return acc


class _Oracle:
    def __init__(self, rule: GenericPatchRule, unit: AstUnit, fn: Node, bound: int):
        self.rule = rule
        self.fn = fn
        self.cfg = unit.cfg(fn)
        self.kinds = {d.name: d.kind for d in rule.metavars}
        self.wild = rule.wildcards()
        self.bound = bound
        # items: ("t", elem) | ("d", dots) | ("x", [[elem, ...], ...])
        self.items = []
        for e in rule.body:
            if isinstance(e, (Context, Minus)):
                self.items.append(("t", e))
            elif isinstance(e, Dots):
                self.items.append(("d", e))
            elif isinstance(e, Disjunction):
                self.items.append(("x", [[x for x in br if isinstance(x, (Context, Minus))] for br in e.branches]))
        header = rule.header is not None
        self.from_entry = header or (bool(self.items) and self.items[0][0] == "d")
        self.to_exit = header or (bool(self.items) and self.items[-1][0] == "d")
        self.cap = len(self.items) + 2

    # node helpers
    def node(self, nid):
        return self.cfg.nodes[nid]

    def stmts(self, nid):
        cn = self.node(nid)
        if cn.kind == "stmt":
            return [(cn.ast, None)]
        if cn.owner is not None and cn.owner.type in _COMPOUND and self.cfg.heads.get(id(cn.owner)) == nid:
            return [(cn.owner, self.cfg.regions[id(cn.owner)])]
        return []

    def term_hits(self, elem, nid, env) -> list[tuple[dict, Node, object]]:
        term = elem.term
        cn = self.node(nid)
        if cn.kind in ("entry", "exit"):
            return []
        if term.node.is_statement:
            cands = self.stmts(nid)
        else:
            cands = [(x, None) for x in _exprs(cn.ast)]
        hits = []
        for code, region in cands:
            for e in _unify(term.node, code, env, self.kinds, self.wild):
                if term.position:
                    e = _bind(e, term.position, ("pos", code.tokens[-1].position))
                    if e is None:
                        continue
                if all(not (h[0] == e and h[1] is code) for h in hits):
                    hits.append((e, code, region))
        return hits

    def violates(self, dots, nid, label, env) -> bool:
        cn = self.node(nid)
        for w in dots.forbidden:
            if w.node.is_statement:
                pool = [s for s, _ in self.stmts(nid)]
            elif cn.kind == "cond":
                pool = _certain(cn.ast, {"true": True, "false": False}.get(label)) if cn.ast is not None else []
            else:
                pool = _certain(cn.ast, None) if cn.ast is not None else []
            if any(_unify(w.node, code, env, self.kinds, self.wild) for code in pool):
                return True
        return False

    def next_could_match(self, i, nid, env) -> bool:
        if i >= len(self.items):
            return False
        kind, what = self.items[i]
        if kind == "t":
            return bool(self.term_hits(what, nid, env))
        if kind == "x":
            return any(self.term_hits(br[0], nid, env) for br in what)
        return False

    # walks
    def walks(self, start: int):
        """Maximal walks from ``start`` as lists of (node, label-of-next-edge)."""
        exit_id = self.cfg.exit
        out = []
        counts: dict[int, int] = {}

        def dfs(nid, path):
            counts[nid] = counts.get(nid, 0) + 1
            if nid == exit_id or len(path) >= self.bound:
                out.append(path + [(nid, None)])
            else:
                extended = False
                for v, label in self.cfg.successors(nid):
                    if counts.get(v, 0) < self.cap:
                        extended = True
                        dfs(v, path + [(nid, label)])
                if not extended:
                    out.append(path + [(nid, None)])
            counts[nid] -= 1

        dfs(start, [])
        return out

    # embeddings of items into one walk, starting at walk[0]
    def embed(self, walk, i, sub, j, env, trace, out, first_fixed=None):
        """Appends (env, trace, env after the first term) for each embedding."""
        items = self.items
        if sub is None and i == len(items):
            if not self.to_exit or (j == len(walk) - 1 and walk[j][0] == self.cfg.exit):
                out.append((env, tuple(t for t, _ in trace), trace[0][1] if trace else None))
            return
        if j >= len(walk):
            return
        nid, label = walk[j]
        if sub is None:
            kind, what = items[i]
            if kind == "d":
                self.embed(walk, i + 1, None, j, env, trace, out, first_fixed)
                if nid in (self.cfg.exit, self.cfg.entry) or label is None:
                    return
                if not what.any and self.next_could_match(i + 1, nid, env):
                    return
                if self.violates(what, nid, label, env):
                    return
                self.embed(walk, i, None, j + 1, env, trace, out, first_fixed)
                return
            if kind == "x":
                for k, br in enumerate(what):
                    if self.term_hits(br[0], nid, env):
                        self.embed(walk, i, (k, 0), j, env, trace, out, first_fixed)
                        return
                return
            elem, pos, last = what, (i, -1, 0), True
        else:
            k, m = sub
            branch = items[i][1][k]
            elem, pos, last = branch[m], (i, k, m), m + 1 == len(branch)
        nxt_i, nxt_sub = (i + 1, None) if last else (i, (sub[0], sub[1] + 1))
        for e, code, region in self.term_hits(elem, nid, env):
            if first_fixed is not None and not trace:
                if (pos, code.start, code.end, code.type, _freeze(e)) != first_fixed:
                    continue
            t2 = trace + [(TermMatch.of(pos, code, nid), e)]
            if nxt_sub is None and nxt_i == len(items) and not self.to_exit:
                out.append((e, tuple(t for t, _ in t2), t2[0][1]))
                continue
            jj = j + 1
            if region is not None:
                while jj < len(walk) and walk[jj][0] in region:
                    jj += 1
            self.embed(walk, nxt_i, nxt_sub, jj, e, t2, out, first_fixed)

    def header_envs(self) -> list[dict]:
        h = self.rule.header
        if h is None:
            return [{}]
        k, w = self.kinds, self.wild
        envs = _unify(h.name.node, self.fn.children[1], {}, k, w)
        if h.return_type is not None:
            envs = [e2 for e in envs for e2 in _unify(h.return_type.node, self.fn.children[0], e, k, w)]
        envs = [e2 for e in envs for e2 in _unify(h.params.node, self.fn.children[2], e, k, w)]
        uniq = []
        for e in envs:
            if e not in uniq:
                uniq.append(e)
        return uniq

    def run(self) -> list[tuple[dict, tuple, tuple]]:
        """(env, trace, start) for every embedding found on some walk."""
        cfg = self.cfg
        found = []
        if self.from_entry:
            for env0 in self.header_envs():
                for s in [v for v, _ in cfg.successors(cfg.entry)]:
                    for w in self.walks(s):
                        res = []
                        self.embed(w, 0, None, 0, env0, [], res)
                        found += [(e, t, ("entry", _freeze(env0))) for e, t, _ in res]
        else:
            for nid in sorted(cfg.nodes):
                if nid in (cfg.entry, cfg.exit):
                    continue
                for w in self.walks(nid):
                    res = []
                    self.embed(w, 0, None, 0, {}, [], res)
                    for e, t, e1 in res:
                        m = t[0]
                        found.append((e, t, ("first", nid, (m.pos, m.start, m.end, m.type, _freeze(e1)))))
        return found

    def all_paths_embed(self, start) -> bool:
        cfg = self.cfg
        if start[0] == "entry":
            env0 = dict(start[1])
            origins, fixed = [v for v, _ in cfg.successors(cfg.entry)], None
        else:
            env0 = {}
            origins, fixed = [start[1]], start[2]
        for s in origins:
            for w in self.walks(s):
                if w[-1][0] != cfg.exit:
                    continue  # truncated by the visit cap or length bound
                res = []
                self.embed(w, 0, None, 0, env0, [], res, first_fixed=fixed)
                if not res:
                    return False
        return True


class _Same:
    """Carries a node inside an environment without affecting equality."""

    __slots__ = ("node",)

    def __init__(self, node):
        self.node = node

    def __eq__(self, other) -> bool:
        return isinstance(other, _Same)

    def __hash__(self) -> int:
        return 0


def _freeze(env):
    return tuple(sorted(env.items(), key=lambda kv: kv[0])) if env is not None else None


def _to_binding(env: dict) -> Binding:
    items = []
    for k, v in env.items():
        if v[0] == "pos":
            items.append((k, v[1]))
        else:
            items.append((k, Bound(v[1], v[2].node)))
    return Binding(items)


def brute_force_match(
    rule: GenericPatchRule, unit: AstUnit, bound: int = 64, keep_overlapping: bool = False
) -> list[MatchSite]:
    """Reference result for ``match_rule`` by exhaustive walk enumeration."""
    anchors = any(isinstance(e, (Context, Minus, Dots, Disjunction)) for e in rule.body)
    if not rule.body or (not anchors and rule.header is None):
        raise DegenerateRuleError(f"rule {rule.name!r} has an empty body")
    header_names = set()
    if rule.header is not None:
        kinds = {d.name for d in rule.metavars}
        for t in (rule.header.name, rule.header.params, rule.header.return_type):
            if t is not None:
                for n in t.node.walk():
                    if n.type in ("Identifier", "TypeName") and n.label in kinds:
                        header_names.add(n.label)
    sites = []
    for fn in unit.functions():
        o = _Oracle(rule, unit, fn, bound)
        seen = set()
        verdict: dict = {}
        for env, trace, start in o.run():
            ident = (_freeze(env), tuple(t.ident() for t in trace))
            if ident in seen:
                continue
            seen.add(ident)
            if rule.quantifier == "forall":
                if start not in verdict:
                    verdict[start] = o.all_paths_embed(start)
                if not verdict[start]:
                    continue
            b = _to_binding(env)
            sites.append(MatchSite(rule.name, fn, b, trace, b.restrict(header_names)))
    if keep_overlapping:
        return sorted(sites, key=site_order)
    return drop_overlapping(sites)
