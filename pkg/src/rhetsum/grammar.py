"""Attributed rhetorical structure grammar.

Rules are binary, carry a rhetorical relation, nucleus/satellite roles, an
attribute-equation id and the decision context ("reason") they were recorded
under, plus an instance count. Shift/reduce preferences are counted per
(A, B, lookahead) triple. Probabilities are always derived from counts on
demand, never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Sequence

END_MARKER = "$"
BOTTOM = "^"

TERMINAL = "terminal"
NONTERMINAL = "nonterminal"
START = "start"

ROLE_PAIRS = (("N", "S"), ("S", "N"), ("N", "N"))

DEFAULT_AE = "straight_forward"


class GrammarError(Exception):
    pass


class UnknownAttributeEquation(GrammarError):
    pass


def _jkey(parts: Sequence) -> str:
    return json.dumps(list(parts), ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True)
class ContextSignature:
    """The sentential context a shift or reduce decision was made under:
    the symbol left of the focus pair, the focus pair itself, the lookahead
    (END_MARKER once the buffer is exhausted) and the child rhetorical
    relations of the focus subtrees (None for leaves)."""

    left: str | None
    focus: tuple[str, str]
    lookahead: str
    child_rels: tuple[str | None, str | None] = (None, None)

    def key(self) -> str:
        return _jkey(
            [
                self.left if self.left is not None else BOTTOM,
                self.focus[0],
                self.focus[1],
                self.lookahead,
                self.child_rels[0] if self.child_rels[0] is not None else "*",
                self.child_rels[1] if self.child_rels[1] is not None else "*",
            ]
        )

    def matches_ignoring_lookahead(self, other: "ContextSignature") -> bool:
        return (
            self.left == other.left
            and self.focus == other.focus
            and self.child_rels == other.child_rels
        )

    def to_dict(self) -> dict:
        return {
            "left": self.left,
            "focus": list(self.focus),
            "lookahead": self.lookahead,
            "child_rels": list(self.child_rels),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ContextSignature":
        return cls(
            left=data["left"],
            focus=(data["focus"][0], data["focus"][1]),
            lookahead=data["lookahead"],
            child_rels=(data["child_rels"][0], data["child_rels"][1]),
        )


@dataclass
class ProductionRule:
    """parent <- children, with roles, relation, attribute equation, reason
    and an instance count of at least one."""

    parent: str
    children: tuple[str, str]
    roles: tuple[str, str]
    rhet_rel: str
    reason: ContextSignature
    ae: str = DEFAULT_AE
    count: int = 1

    def __post_init__(self) -> None:
        if tuple(self.roles) not in ROLE_PAIRS:
            raise GrammarError(f"illegal role pair {self.roles!r}")
        if self.count < 1:
            raise GrammarError("rule count must be at least 1")

    def key(self) -> str:
        # rhet_rel and ae are part of the identity so that merging the same
        # instance stream in any order yields the same grammar.
        return _jkey(
            [
                self.children[0],
                self.children[1],
                self.parent,
                self.roles[0],
                self.roles[1],
                self.rhet_rel,
                self.ae,
                self.reason.key(),
            ]
        )

    def to_dict(self) -> dict:
        return {
            "parent": self.parent,
            "children": list(self.children),
            "roles": list(self.roles),
            "rhet_rel": self.rhet_rel,
            "ae": self.ae,
            "count": self.count,
            "reason": self.reason.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProductionRule":
        return cls(
            parent=data["parent"],
            children=(data["children"][0], data["children"][1]),
            roles=(data["roles"][0], data["roles"][1]),
            rhet_rel=data["rhet_rel"],
            ae=data.get("ae", DEFAULT_AE),
            count=int(data["count"]),
            reason=ContextSignature.from_dict(data["reason"]),
        )


@dataclass(frozen=True)
class PrecedenceRecord:
    """One observed shift or reduce decision at an (A, B, C) triple."""

    triple: tuple[str, str, str]
    direction: str  # "shift" | "reduce"
    reason: ContextSignature | None = None

    def __post_init__(self) -> None:
        if self.direction not in ("shift", "reduce"):
            raise GrammarError(f"unknown direction {self.direction!r}")


@dataclass
class PrecedenceTuple:
    """Accumulated shift/reduce counts for one (A, B, C) triple; keeps the
    first recorded reason per direction."""

    triple: tuple[str, str, str]
    n_shift: int = 0
    n_reduce: int = 0
    shift_reason: ContextSignature | None = None
    reduce_reason: ContextSignature | None = None

    def to_dict(self) -> dict:
        return {
            "triple": list(self.triple),
            "n_shift": self.n_shift,
            "n_reduce": self.n_reduce,
            "shift_reason": self.shift_reason.to_dict()
            if self.shift_reason
            else None,
            "reduce_reason": self.reduce_reason.to_dict()
            if self.reduce_reason
            else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PrecedenceTuple":
        return cls(
            triple=tuple(data["triple"]),
            n_shift=int(data["n_shift"]),
            n_reduce=int(data["n_reduce"]),
            shift_reason=ContextSignature.from_dict(data["shift_reason"])
            if data.get("shift_reason")
            else None,
            reduce_reason=ContextSignature.from_dict(data["reduce_reason"])
            if data.get("reduce_reason")
            else None,
        )


class ShiftProbability(NamedTuple):
    p_shift: float
    p_reduce: float
    fallback: bool


def _ae_straight_forward(children: Sequence[tuple[Mapping, str]]) -> dict:
    """Union of child attributes; nucleus values win conflicts."""
    out: dict = {}
    for attrs, role in children:
        if role != "N":
            out.update(attrs)
    for attrs, role in children:
        if role == "N":
            out.update(attrs)
    return out


def _ae_nucleus_copy(children: Sequence[tuple[Mapping, str]]) -> dict:
    for attrs, role in children:
        if role == "N":
            return dict(attrs)
    return dict(children[0][0])


def _ae_set_union(children: Sequence[tuple[Mapping, str]]) -> dict:
    out: dict = {}
    for attrs, _ in children:
        for key, value in attrs.items():
            if key not in out:
                out[key] = value
            elif out[key] != value:
                prior = out[key] if isinstance(out[key], tuple) else (out[key],)
                if value not in prior:
                    out[key] = prior + (value,)
    return out


_BUILTIN_AE: dict[str, Callable] = {
    DEFAULT_AE: _ae_straight_forward,
    "nucleus_copy": _ae_nucleus_copy,
    "set_union": _ae_set_union,
}


class Grammar:
    """Symbol table, counted rules indexed by child pair, precedence tuples
    and the attribute-equation registry."""

    def __init__(self) -> None:
        self.symbols: dict[str, str] = {}
        self.rules: dict[str, ProductionRule] = {}
        self.precedence: dict[tuple[str, str, str], PrecedenceTuple] = {}
        self._by_children: dict[tuple[str, str], list[str]] = {}
        self._ae: dict[str, Callable] = dict(_BUILTIN_AE)

    # -- symbols ---------------------------------------------------------

    def add_symbol(self, name: str, kind: str) -> None:
        if kind not in (TERMINAL, NONTERMINAL, START):
            raise GrammarError(f"unknown symbol kind {kind!r}")
        if kind == START and any(
            k == START and n != name for n, k in self.symbols.items()
        ):
            raise GrammarError("a grammar may declare only one start symbol")
        existing = self.symbols.get(name)
        if existing is not None and existing != kind:
            raise GrammarError(
                f"symbol {name!r} already registered as {existing}"
            )
        self.symbols[name] = kind

    def _ensure_symbol(self, name: str, kind: str) -> None:
        if name not in self.symbols:
            self.add_symbol(name, kind)

    # -- attribute equations ---------------------------------------------

    def register_ae(self, ae_id: str, fn: Callable) -> None:
        self._ae[ae_id] = fn

    def apply_attribute_equation(
        self, ae_id: str, children: Sequence[tuple[Mapping, str]]
    ) -> dict:
        fn = self._ae.get(ae_id)
        if fn is None:
            raise UnknownAttributeEquation(
                f"attribute equation {ae_id!r} is not registered"
            )
        return fn(children)

    # -- mutation ----------------------------------------------------------

    def merge_rule(
        self,
        rule: ProductionRule,
        kinds: Mapping[str, str] | None = None,
    ) -> ProductionRule:
        """Add one rule instance: same key bumps the count, a new key is
        inserted with count 1. Unknown symbols are auto-registered."""
        kinds = kinds or {}
        self._ensure_symbol(rule.parent, kinds.get(rule.parent, NONTERMINAL))
        for child in rule.children:
            self._ensure_symbol(child, kinds.get(child, TERMINAL))
        key = rule.key()
        existing = self.rules.get(key)
        if existing is not None:
            existing.count += rule.count
            return existing
        stored = replace(rule)
        self.rules[key] = stored
        self._by_children.setdefault(tuple(rule.children), []).append(key)
        return stored

    def merge_precedence(self, record: PrecedenceRecord) -> PrecedenceTuple:
        entry = self.precedence.get(record.triple)
        if entry is None:
            entry = PrecedenceTuple(triple=record.triple)
            self.precedence[record.triple] = entry
        if record.direction == "shift":
            entry.n_shift += 1
            if entry.shift_reason is None:
                entry.shift_reason = record.reason
        else:
            entry.n_reduce += 1
            if entry.reduce_reason is None:
                entry.reduce_reason = record.reason
        return entry

    def enhance_rule(self, key: str) -> None:
        """Increment an existing rule's instance count; never creates."""
        rule = self.rules.get(key)
        if rule is None:
            raise GrammarError(f"cannot enhance unknown rule {key}")
        rule.count += 1

    def enhance_precedence(
        self, triple: tuple[str, str, str], direction: str
    ) -> None:
        entry = self.precedence.get(tuple(triple))
        if entry is None:
            raise GrammarError(f"cannot enhance unknown triple {triple}")
        if direction == "shift":
            entry.n_shift += 1
        else:
            entry.n_reduce += 1

    def merge_grammar(self, other: "Grammar") -> None:
        """Count-additive union; commutes over disjoint or matching keys."""
        for name in sorted(other.symbols):
            self.add_symbol(name, other.symbols[name])
        for key in sorted(other.rules):
            rule = other.rules[key]
            self.merge_rule(replace(rule, count=rule.count))
        for triple in sorted(other.precedence):
            theirs = other.precedence[triple]
            entry = self.precedence.get(triple)
            if entry is None:
                entry = PrecedenceTuple(triple=triple)
                self.precedence[triple] = entry
            entry.n_shift += theirs.n_shift
            entry.n_reduce += theirs.n_reduce
            if entry.shift_reason is None:
                entry.shift_reason = theirs.shift_reason
            if entry.reduce_reason is None:
                entry.reduce_reason = theirs.reduce_reason

    # -- queries -----------------------------------------------------------

    def rules_for_children(self, a: str, b: str) -> list[ProductionRule]:
        return [self.rules[k] for k in sorted(self._by_children.get((a, b), ()))]

    def reduce_distribution(
        self,
        a: str,
        b: str,
        context: ContextSignature | None = None,
    ) -> list[tuple[ProductionRule, float]]:
        """Candidate reductions of the pair (a, b) with probabilities equal
        to each rule's count share. Context matching backs off from an exact
        signature, to the signature with the lookahead ignored, to the child
        pair alone; an unmatched pair yields an empty distribution."""
        keys = sorted(self._by_children.get((a, b), ()))
        if not keys:
            return []
        matched = keys
        if context is not None:
            exact = [k for k in keys if self.rules[k].reason == context]
            if exact:
                matched = exact
            else:
                relaxed = [
                    k
                    for k in keys
                    if self.rules[k].reason.matches_ignoring_lookahead(context)
                ]
                if relaxed:
                    matched = relaxed
        total = sum(self.rules[k].count for k in matched)
        return [(self.rules[k], self.rules[k].count / total) for k in matched]

    def shift_probability(self, a: str, b: str, c: str) -> ShiftProbability:
        """Observed shift share at the triple; an unseen triple falls back
        to always-reduce when the pair is reducible, else always-shift."""
        entry = self.precedence.get((a, b, c))
        if entry is None:
            if self._by_children.get((a, b)):
                return ShiftProbability(0.0, 1.0, fallback=True)
            return ShiftProbability(1.0, 0.0, fallback=True)
        total = entry.n_shift + entry.n_reduce
        p_shift = entry.n_shift / total
        return ShiftProbability(p_shift, 1.0 - p_shift, fallback=False)

    def stats(self) -> dict:
        return {
            "symbols": len(self.symbols),
            "production_rules": len(self.rules),
            "precedence_tuples": len(self.precedence),
            "rule_instances": sum(r.count for r in self.rules.values()),
        }

    def top_rules(self, limit: int = 10) -> list[dict]:
        ranked = sorted(
            self.rules.values(), key=lambda r: (-r.count, r.key())
        )
        return [r.to_dict() for r in ranked[:limit]]

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "symbols": {n: self.symbols[n] for n in sorted(self.symbols)},
            "rules": [
                self.rules[k].to_dict() for k in sorted(self.rules)
            ],
            "precedence": [
                self.precedence[t].to_dict() for t in sorted(self.precedence)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(
            self.to_json_dict(), ensure_ascii=False, sort_keys=True, indent=1
        ) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Grammar":
        if data.get("version") != 1:
            raise GrammarError(f"unsupported grammar version {data.get('version')!r}")
        grammar = cls()
        for name, kind in data["symbols"].items():
            grammar.add_symbol(name, kind)
        for rule_data in data["rules"]:
            rule = ProductionRule.from_dict(rule_data)
            key = rule.key()
            grammar.rules[key] = rule
            grammar._by_children.setdefault(tuple(rule.children), []).append(key)
        for prec_data in data["precedence"]:
            entry = PrecedenceTuple.from_dict(prec_data)
            grammar.precedence[entry.triple] = entry
        return grammar

    @classmethod
    def load(cls, path: str | Path) -> "Grammar":
        return cls.from_json_dict(
            json.loads(Path(path).read_text(encoding="utf-8"))
        )
