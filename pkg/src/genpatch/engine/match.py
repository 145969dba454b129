"""Control-flow matching of generic-patch rules.

A rule body is compiled to a list of items (terms, `...` gaps and
disjunctions).  Matching searches the product of the CFG with the item list:
a thread is (item position, binding, matched terms, region being skipped).
Compound-statement terms (if/while/for) are matched at their head node; the
thread then walks silently through the statement's region.

``exists`` keeps every site reachable along some path.  ``forall`` further
requires every finite path from the site's start (function entry for
anchored rules, the first matched term otherwise) to embed the rule; this is
decided on the subset construction over thread sets.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field

from ..lang.ast import AstUnit, Node, function_name
from ..lang.cfg import Cfg
from ..lang.lexer import Position
from ..smpl.model import Context, Disjunction, Dots, GenericPatchRule, Minus, Plus, Term
from .terms import Binding, Bound, CfgView, TemplateMatcher

TERM, DOTS_ITEM, DISJ = "term", "dots", "disj"


class DegenerateRuleError(ValueError):
    pass


@dataclass(frozen=True)
class Item:
    kind: str
    elem: object  # Context | Minus | Dots | Disjunction
    branches: tuple = ()  # for DISJ: tuple of tuples of Context/Minus elements

    @property
    def term(self) -> Term:
        return self.elem.term


def compile_items(rule: GenericPatchRule) -> list[Item]:
    items = []
    for e in rule.body:
        if isinstance(e, (Context, Minus)):
            items.append(Item(TERM, e))
        elif isinstance(e, Dots):
            items.append(Item(DOTS_ITEM, e))
        elif isinstance(e, Disjunction):
            branches = tuple(tuple(x for x in br if isinstance(x, (Context, Minus))) for br in e.branches)
            items.append(Item(DISJ, e, branches))
    return items


def anchoring(rule: GenericPatchRule, items: list[Item]) -> tuple[bool, bool]:
    """(anchored at function entry, anchored at function exit)."""
    if rule.header is not None:
        return True, True
    start = bool(items) and items[0].kind == DOTS_ITEM
    end = bool(items) and items[-1].kind == DOTS_ITEM
    return start, end


@dataclass(frozen=True)
class TermMatch:
    pos: tuple  # (item, branch, index in branch); branch -1 outside disjunctions
    start: int
    end: int
    type: str
    node: Node = field(compare=False, repr=False)
    cfg_node: int = field(compare=False)

    @classmethod
    def of(cls, pos: tuple, node: Node, cfg_node: int) -> "TermMatch":
        return cls(pos, node.start, node.end, node.type, node, cfg_node)

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end

    def ident(self) -> tuple:
        return (self.pos, self.start, self.end, self.type)


@dataclass(frozen=True, eq=False)
class MatchSite:
    rule_name: str
    function: Node
    binding: Binding
    matches: tuple  # TermMatch per matched term, in item order
    header_binding: Binding = Binding()

    @property
    def function_name(self) -> str:
        return function_name(self.function)

    @property
    def anchor_span(self) -> tuple[int, int]:
        if not self.matches:
            name = self.function.children[1]
            return name.start, name.end
        return min(m.node.start for m in self.matches), max(m.node.end for m in self.matches)

    @property
    def witness(self) -> tuple[int, ...]:
        return tuple(m.cfg_node for m in self.matches)

    def identity(self) -> tuple:
        return (self.function.start, tuple(m.ident() for m in self.matches), self.binding)

    def __eq__(self, other) -> bool:
        return isinstance(other, MatchSite) and self.identity() == other.identity()

    def __hash__(self) -> int:
        return hash(self.identity())

    @property
    def digest(self) -> str:
        text = f"{self.rule_name}|{self.identity()[:2]}|{binding_repr(self.binding)}"
        return hashlib.sha1(text.encode()).hexdigest()[:12]

    def bound_text(self, source: str) -> dict[str, object]:
        out = {}
        for name, v in self.binding.items():
            if isinstance(v, Position):
                out[name] = (v.file, v.line, v.column)
            elif v.node.tokens:
                out[name] = source[v.node.start : v.node.end]
            else:
                out[name] = str(v.key)
        return out


def binding_repr(b: Binding) -> str:
    parts = []
    for k, v in b.items():
        if isinstance(v, Position):
            parts.append(f"{k}=@{v.line}:{v.column}")
        else:
            parts.append(f"{k}={v.key!r}")
    return ";".join(parts)


def header_bindings(rule: GenericPatchRule, fn: Node, matcher: TemplateMatcher) -> list[Binding]:
    h = rule.header
    if h is None:
        return [Binding()]
    out: list[Binding] = []
    for b0 in matcher.matches(h.name.node, fn.children[1], Binding()):
        rets = [b0]
        if h.return_type is not None:
            rets = matcher.matches(h.return_type.node, fn.children[0], b0)
        for b1 in rets:
            for b2 in matcher.matches(h.params.node, fn.children[2], b1):
                if b2 not in out:
                    out.append(b2)
    return out


class _FunctionMatcher:
    def __init__(self, rule: GenericPatchRule, items: list[Item], cfg: Cfg, matcher: TemplateMatcher):
        self.rule = rule
        self.items = items
        self.n_items = len(items)
        self.cfg = cfg
        self.view = CfgView(cfg)
        self.m = matcher
        self.entry_anchored, self.exit_anchored = anchoring(rule, items)
        self._tm_cache: dict = {}

    # -- terms -------------------------------------------------------------
    def term_matches(self, term: Term, nid: int, b: Binding) -> list:
        key = (id(term), nid, b)
        got = self._tm_cache.get(key)
        if got is not None:
            return got
        got = []
        tpl = term.node
        if tpl.is_statement:
            cands = self.view.statements(nid)
        else:
            cands = [(s, None) for s in self.view.subterms(nid)]
        for code, region in cands:
            for nb in self.m.matches(tpl, code, b):
                if term.position:
                    nb = nb.bind(term.position, code.tokens[-1].position)
                    if nb is None:
                        continue
                got.append((nb, code, region))
        self._tm_cache[key] = got
        return got

    def could_match(self, i: int, nid: int, b: Binding) -> bool:
        if i >= self.n_items:
            return False
        item = self.items[i]
        if item.kind == TERM:
            return bool(self.term_matches(item.term, nid, b))
        if item.kind == DISJ:
            return any(self.term_matches(br[0].term, nid, b) for br in item.branches)
        return False

    def gap_ok(self, dots: Dots, nid: int, label: str, b: Binding) -> bool:
        for w in dots.forbidden:
            tpl = w.node
            if tpl.is_statement:
                cands = [s for s, _ in self.view.statements(nid)]
            else:
                cands = self.view.evaluated(nid, label)
            for code in cands:
                if self.m.any_match(tpl, code, b):
                    return False
        return True

    def next_pos(self, pos: tuple) -> tuple:
        i, bi, j = pos
        if bi >= 0 and j + 1 < len(self.items[i].branches[bi]):
            return (i, bi, j + 1)
        return (i + 1, -1, 0)

    # -- one step of a thread ----------------------------------------------
    def step(self, nid: int, pos, b: Binding, trace, skip, start):
        """Returns (completions, successors).

        completions: list of (binding, trace, start); successors: list of
        (node, pos, binding, trace, skip, start).
        """
        if skip is not None:
            if nid in skip:
                return [], [(v, pos, b, trace, skip, start) for v, _ in self.cfg.successors(nid)]
            skip = None
        return self._at(nid, pos, b, trace, start)

    def _at(self, nid, pos, b, trace, start):
        i, bi, j = pos
        cfg = self.cfg
        if bi < 0:
            if i == self.n_items:
                if not self.exit_anchored or nid == cfg.exit:
                    return [(b, trace, start)], []
                return [], []
            item = self.items[i]
            if item.kind == DOTS_ITEM:
                done, outs = self._at(nid, (i + 1, -1, 0), b, trace, start)
                dots = item.elem
                if nid != cfg.exit and nid != cfg.entry and (dots.any or not self.could_match(i + 1, nid, b)):
                    for v, label in cfg.successors(nid):
                        if self.gap_ok(dots, nid, label, b):
                            outs.append((v, pos, b, trace, None, start))
                return done, outs
            if item.kind == DISJ:
                for k, branch in enumerate(item.branches):
                    if self.term_matches(branch[0].term, nid, b):
                        return self._term(nid, (i, k, 0), branch[0].term, b, trace, start)
                return [], []
            return self._term(nid, pos, item.term, b, trace, start)
        return self._term(nid, pos, self.items[i].branches[bi][j].term, b, trace, start)

    def _term(self, nid, pos, term, b, trace, start):
        done, outs = [], []
        npos = self.next_pos(pos)
        finished = npos[0] == self.n_items and npos[1] < 0
        for nb, code, region in self.term_matches(term, nid, b):
            ntrace = trace + (TermMatch.of(pos, code, nid),) if trace is not None else None
            nstart = start
            if nstart is None:
                nstart = ("first", nid, pos, code.start, code.end, code.type, nb, npos, region)
            if finished and not self.exit_anchored:
                done.append((nb, ntrace, nstart))
                continue
            for v, _ in self.cfg.successors(nid):
                outs.append((v, npos, nb, ntrace, region, nstart))
        return done, outs

    # -- searches -----------------------------------------------------------
    def initial_states(self, fn: Node):
        cfg = self.cfg
        if self.entry_anchored:
            first = [v for v, _ in cfg.successors(cfg.entry)]
            for b0 in header_bindings(self.rule, fn, self.m):
                start = ("entry", b0)
                for v in first:
                    yield (v, (0, -1, 0), b0, (), None, start)
        else:
            for nid in sorted(cfg.nodes):
                if nid in (cfg.entry, cfg.exit):
                    continue
                yield (nid, (0, -1, 0), Binding(), (), None, None)

    def exists(self, fn: Node) -> dict:
        """site key -> (binding, trace, start)"""
        found: dict = {}
        seen = set()
        work = deque(self.initial_states(fn))
        while work:
            state = work.popleft()
            if state in seen:
                continue
            seen.add(state)
            nid, pos, b, trace, skip, start = state
            done, outs = self.step(nid, pos, b, trace, skip, start)
            for nb, ntrace, nstart in done:
                key = (nb, tuple(t.ident() for t in ntrace))
                if key not in found:
                    found[key] = (nb, ntrace, nstart)
            work.extend(outs)
        return found

    def valid_start(self, start) -> bool:
        cfg = self.cfg
        if start[0] == "entry":
            b0 = start[1]
            init = [(v, frozenset({((0, -1, 0), b0, None)})) for v, _ in cfg.successors(cfg.entry)]
        else:
            _, nid, _pos, _s, _e, _t, nb, npos, region = start
            if npos[0] == self.n_items and npos[1] < 0 and not self.exit_anchored:
                return True
            init = [(v, frozenset({(npos, nb, region)})) for v, _ in cfg.successors(nid)]
            if not init:
                return True
        seen = set()
        stack = list(init)
        while stack:
            nid, threads = stack.pop()
            if (nid, threads) in seen:
                continue
            seen.add((nid, threads))
            nxt: dict[int, set] = {}
            accepted = False
            for pos, b, skip in threads:
                done, outs = self.step(nid, pos, b, None, skip, "x")
                if done:
                    accepted = True
                    break
                for v, npos, nb, _t, nskip, _s in outs:
                    nxt.setdefault(v, set()).add((npos, nb, nskip))
            if accepted:
                continue
            if nid == cfg.exit:
                return False
            for v, _ in cfg.successors(nid):
                stack.append((v, frozenset(nxt.get(v, ()))))
        return True


def _sites_for_function(rule, items, unit: AstUnit, fn: Node, matcher) -> list[MatchSite]:
    fm = _FunctionMatcher(rule, items, unit.cfg(fn), matcher)
    found = fm.exists(fn)
    header_names = set()
    if rule.header is not None:
        from ..smpl.validate import _names_in

        declared = set(rule.kinds())
        for t in (rule.header.name, rule.header.params, rule.header.return_type):
            if t is not None:
                header_names |= _names_in(t.node, declared)
    sites = []
    validity: dict = {}
    for nb, trace, start in found.values():
        if rule.quantifier == "forall":
            if start not in validity:
                validity[start] = fm.valid_start(start)
            if not validity[start]:
                continue
        sites.append(MatchSite(rule.name, fn, nb, tuple(trace), nb.restrict(header_names)))
    return sites


def site_order(site: MatchSite) -> tuple:
    s, e = site.anchor_span
    return (s, e, tuple(m.ident() for m in site.matches), binding_repr(site.binding))


def drop_overlapping(sites: list[MatchSite]) -> list[MatchSite]:
    """Keep sites in source order, dropping any whose matched terms overlap a kept one."""
    kept: list[MatchSite] = []
    taken: list[tuple[int, int]] = []
    for site in sorted(sites, key=site_order):
        spans = [m.span for m in site.matches]
        if any(s < te and ts < e for s, e in spans for ts, te in taken):
            continue
        if not spans and any(k.function is site.function for k in kept):
            continue
        kept.append(site)
        taken += spans
    return kept


def match_rule(rule: GenericPatchRule, unit: AstUnit, keep_overlapping: bool = False) -> list[MatchSite]:
    items = compile_items(rule)
    if not rule.body or (not items and rule.header is None):
        raise DegenerateRuleError(f"rule {rule.name!r} has nothing to match")
    matcher = TemplateMatcher(rule.kinds(), rule.wildcards())
    sites: list[MatchSite] = []
    for fn in unit.functions():
        sites += _sites_for_function(rule, items, unit, fn, matcher)
    if keep_overlapping:
        return sorted(sites, key=site_order)
    return drop_overlapping(sites)
