"""Shift-reduce engine over EDU terminal sequences.

Annotation sessions record every human or teacher decision together with
the sentential context it was made under, emitting rough production rules
(on reduce) and shift/reduce preference records. Autonomous parsing applies
a learned grammar, resolving reduce targets by count share and shift/reduce
conflicts by observed preference, with bounded one-step backtracking over
probabilistic choices.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .corpus import DocText, Edu
from .grammar import (
    BOTTOM,
    DEFAULT_AE,
    END_MARKER,
    NONTERMINAL,
    ROLE_PAIRS,
    TERMINAL,
    ContextSignature,
    Grammar,
    PrecedenceRecord,
    ProductionRule,
)

OTHER_TERMINAL = "OTHER"


class ParseError(Exception):
    pass


class IllegalActionError(ParseError):
    """The action is not legal in the current state; state is unchanged."""


class SessionIncompleteError(ParseError):
    pass


class ParseFailure(ParseError):
    """Autonomous parsing got stuck; carries the stuck sentential form."""

    def __init__(self, report: dict):
        super().__init__(
            f"parse of text {report.get('text_id')!r} stuck at stack "
            f"{report.get('stack')} with {report.get('buffer_remaining')} "
            f"EDUs unread"
        )
        self.report = report


def terminal_for_edu(edu: Edu, text: DocText) -> str | None:
    """An EDU's terminal is the state-change phrase of its first lexical
    core; EDUs without cores map to the catch-all terminal."""
    for core in text.cores:
        if core.edu_id == edu.id:
            return core.s
    return OTHER_TERMINAL


@dataclass
class RsNode:
    """A rhetorical structure tree: binary internal nodes labelled with a
    relation symbol, rhetorical relation and child roles; leaves are EDUs."""

    symbol: str
    edu_id: str | None = None
    rhet_rel: str | None = None
    roles: tuple[str, str] | None = None
    attrs: dict = field(default_factory=dict)
    children: tuple["RsNode", "RsNode"] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def leaves(self) -> list["RsNode"]:
        if self.is_leaf:
            return [self]
        return self.children[0].leaves() + self.children[1].leaves()

    def leaf_count(self) -> int:
        return len(self.leaves())

    def bracket(self) -> str:
        """`(D^rel^X,Y left right)` with EDU ids at the leaves."""
        if self.is_leaf:
            return self.edu_id or self.symbol
        left, right = self.children
        return (
            f"({self.symbol}^{self.rhet_rel}^{self.roles[0]},{self.roles[1]} "
            f"{left.bracket()} {right.bracket()})"
        )

    def digest(self) -> str:
        return hashlib.sha256(self.bracket().encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": True, "symbol": self.symbol, "edu_id": self.edu_id}
        return {
            "leaf": False,
            "symbol": self.symbol,
            "rhet_rel": self.rhet_rel,
            "roles": list(self.roles),
            "attrs": self.attrs,
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RsNode":
        if data["leaf"]:
            return cls(symbol=data["symbol"], edu_id=data["edu_id"])
        return cls(
            symbol=data["symbol"],
            rhet_rel=data["rhet_rel"],
            roles=(data["roles"][0], data["roles"][1]),
            attrs=dict(data.get("attrs", {})),
            children=(
                cls.from_dict(data["children"][0]),
                cls.from_dict(data["children"][1]),
            ),
        )


RsTree = RsNode


@dataclass
class AnnotationEvent:
    """One recorded decision: a shift, or a reduce with its parent symbol,
    roles, rhetorical relation and optional attribute equation."""

    kind: str
    parent: str | None = None
    roles: tuple[str, str] | None = None
    rhet_rel: str | None = None
    ae: str | None = None
    author: str = "human"
    timestamp: float | None = None
    context: ContextSignature | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("shift", "reduce"):
            raise ParseError(f"unknown action kind {self.kind!r}")
        if self.kind == "reduce":
            if not self.parent:
                raise ParseError("reduce needs a parent symbol")
            if self.roles is None or tuple(self.roles) not in ROLE_PAIRS:
                raise ParseError(f"illegal role pair {self.roles!r}")
            if not self.rhet_rel:
                raise ParseError("reduce needs a rhetorical relation")

    def signature(self) -> tuple:
        return (self.kind, self.parent, self.roles, self.rhet_rel, self.ae)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "author": self.author}
        if self.kind == "reduce":
            out.update(
                parent=self.parent,
                roles=list(self.roles),
                rhet_rel=self.rhet_rel,
                ae=self.ae,
            )
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AnnotationEvent":
        return cls(
            kind=data["kind"],
            parent=data.get("parent"),
            roles=tuple(data["roles"]) if data.get("roles") else None,
            rhet_rel=data.get("rhet_rel"),
            ae=data.get("ae"),
            author=data.get("author", "human"),
            timestamp=data.get("timestamp"),
        )


@dataclass
class SessionRules:
    """Everything a completed session contributes to the grammar."""

    productions: list[tuple[ProductionRule, dict]] = field(
        default_factory=list
    )
    precedences: list[PrecedenceRecord] = field(default_factory=list)

    def rule_keys(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for rule, _ in self.productions:
            seen.setdefault(rule.key())
        return tuple(seen)

    def precedence_uses(self) -> tuple[tuple[tuple[str, str, str], str], ...]:
        seen: dict[tuple, None] = {}
        for rec in self.precedences:
            seen.setdefault((rec.triple, rec.direction))
        return tuple(seen)


@dataclass
class ParseState:
    """Stack of subtrees plus the unread terminal buffer, with full history.

    The in-order leaves of the stack followed by the remaining buffer always
    spell the original EDU sequence.
    """

    text: DocText
    terminals: tuple[str, ...]
    mode: str = "interactive"
    grammar: Grammar | None = None
    stack: list[RsNode] = field(default_factory=list)
    pos: int = 0
    history: list[AnnotationEvent] = field(default_factory=list)
    emitted: SessionRules = field(default_factory=SessionRules)
    closed: bool = False

    @property
    def depth(self) -> int:
        return len(self.stack)

    @property
    def buffer_remaining(self) -> int:
        return len(self.terminals) - self.pos

    @property
    def finished(self) -> bool:
        return self.buffer_remaining == 0 and self.depth == 1

    def lookahead(self) -> str:
        if self.pos < len(self.terminals):
            return self.terminals[self.pos]
        return END_MARKER

    def legal_actions(self) -> list[str]:
        if self.closed:
            return []
        actions = []
        if self.buffer_remaining > 0:
            actions.append("shift")
        if self.depth >= 2:
            actions.append("reduce")
        return actions

    def stack_symbols(self) -> list[str]:
        return [node.symbol for node in self.stack]


def _node_rel(node: RsNode) -> str | None:
    return None if node.is_leaf else node.rhet_rel


def capture_context(state: ParseState) -> ContextSignature | None:
    """The decision context for the current sentential form. Below stack
    depth one there is nothing to record; at depth one the focus pair is
    padded with the bottom marker."""
    if state.depth == 0:
        return None
    if state.depth == 1:
        top = state.stack[-1]
        return ContextSignature(
            left=None,
            focus=(BOTTOM, top.symbol),
            lookahead=state.lookahead(),
            child_rels=(None, _node_rel(top)),
        )
    left = state.stack[-3].symbol if state.depth >= 3 else None
    a, b = state.stack[-2], state.stack[-1]
    return ContextSignature(
        left=left,
        focus=(a.symbol, b.symbol),
        lookahead=state.lookahead(),
        child_rels=(_node_rel(a), _node_rel(b)),
    )


def start_session(
    text: DocText,
    grammar: Grammar | None = None,
    mode: str = "interactive",
    terminal_map: Callable[[Edu, DocText], str | None] = terminal_for_edu,
) -> ParseState:
    """Open a session: empty stack, full buffer of EDU terminals."""
    if not text.edus:
        raise ParseError(f"text {text.id!r} has no EDUs to parse")
    terminals = []
    for edu in text.edus:
        symbol = terminal_map(edu, text)
        if not symbol:
            raise ParseError(
                f"text {text.id!r}: EDU {edu.id!r} has no mappable terminal"
            )
        terminals.append(symbol)
    return ParseState(text=text, terminals=tuple(terminals), mode=mode,
                      grammar=grammar)


def apply_action(state: ParseState, event: AnnotationEvent) -> ParseState:
    """Advance the state by one decision, recording its emissions.

    A reduce emits a rough production rule; every decision made with at
    least one stack symbol emits a rough preference record for the
    (A, B, lookahead) triple, the bottom marker standing in for a missing A.
    Illegal actions raise and leave the state untouched.
    """
    if state.closed:
        raise IllegalActionError("session is finished")
    if event.kind == "shift" and state.buffer_remaining == 0:
        raise IllegalActionError("cannot shift: buffer is empty")
    if event.kind == "reduce" and state.depth < 2:
        raise IllegalActionError("cannot reduce: stack depth below two")

    context = capture_context(state)
    event.context = context

    if context is not None:
        state.emitted.precedences.append(
            PrecedenceRecord(
                triple=(context.focus[0], context.focus[1], context.lookahead),
                direction=event.kind,
                reason=context,
            )
        )

    if event.kind == "shift":
        edu = state.text.edus[state.pos]
        state.stack.append(
            RsNode(symbol=state.terminals[state.pos], edu_id=edu.id)
        )
        state.pos += 1
    else:
        a, b = state.stack[-2], state.stack[-1]
        ae = event.ae or DEFAULT_AE
        registry = state.grammar if state.grammar is not None else _DEFAULT_AE_GRAMMAR
        attrs = registry.apply_attribute_equation(
            ae, [(a.attrs, event.roles[0]), (b.attrs, event.roles[1])]
        )
        node = RsNode(
            symbol=event.parent,
            rhet_rel=event.rhet_rel,
            roles=tuple(event.roles),
            attrs=attrs,
            children=(a, b),
        )
        state.stack[-2:] = [node]
        rule = ProductionRule(
            parent=event.parent,
            children=(a.symbol, b.symbol),
            roles=tuple(event.roles),
            rhet_rel=event.rhet_rel,
            reason=context,
            ae=ae,
        )
        kinds = {
            event.parent: NONTERMINAL,
            a.symbol: TERMINAL if a.is_leaf else NONTERMINAL,
            b.symbol: TERMINAL if b.is_leaf else NONTERMINAL,
        }
        state.emitted.productions.append((rule, kinds))

    state.history.append(event)
    return state


def replay(
    text: DocText,
    events: Iterable[AnnotationEvent],
    grammar: Grammar | None = None,
    mode: str = "interactive",
) -> ParseState:
    """Rebuild a state from scratch by replaying recorded events."""
    state = start_session(text, grammar=grammar, mode=mode)
    for event in events:
        apply_action(
            state,
            AnnotationEvent(
                kind=event.kind,
                parent=event.parent,
                roles=event.roles,
                rhet_rel=event.rhet_rel,
                ae=event.ae,
                author=event.author,
                timestamp=event.timestamp,
            ),
        )
    return state


def undo(state: ParseState) -> ParseState:
    """Drop the last event and replay; returns the rebuilt state."""
    if not state.history:
        raise IllegalActionError("nothing to undo")
    return replay(
        state.text, state.history[:-1], grammar=state.grammar, mode=state.mode
    )


def finish_session(state: ParseState) -> tuple[RsNode, SessionRules]:
    """Close a completed session, returning its tree and rule emissions.

    If the session carries a grammar, every emission is merged into it here.
    """
    if state.closed:
        raise IllegalActionError("session is already finished")
    if not state.finished:
        raise SessionIncompleteError(
            f"session not finishable: {state.buffer_remaining} EDUs unread, "
            f"stack depth {state.depth}"
        )
    state.closed = True
    tree = state.stack[0]
    if state.grammar is not None:
        for rule, kinds in state.emitted.productions:
            state.grammar.merge_rule(
                ProductionRule(
                    parent=rule.parent,
                    children=rule.children,
                    roles=rule.roles,
                    rhet_rel=rule.rhet_rel,
                    reason=rule.reason,
                    ae=rule.ae,
                ),
                kinds=kinds,
            )
        for record in state.emitted.precedences:
            state.grammar.merge_precedence(record)
    return tree, state.emitted


@dataclass
class ParseOutcome:
    """An autonomous parse: the tree, the grammar rule keys it used, the
    precedence triples it consulted, and the replayable event list."""

    tree: RsNode
    rule_keys: tuple[str, ...]
    precedence_uses: tuple[tuple[tuple[str, str, str], str], ...]
    events: tuple[AnnotationEvent, ...]
    backtracks: int = 0


_SHIFT = ("shift", None)


def _ordered_actions(
    state: ParseState,
    grammar: Grammar,
    mode: str,
    rng: np.random.Generator | None,
) -> tuple[list[tuple[str, str | None]], tuple | None]:
    """Candidate actions, most preferred first, plus the consulted
    precedence use when a real shift/reduce conflict was decided."""
    can_shift = state.buffer_remaining > 0
    distribution: list = []
    context = None
    if state.depth >= 2:
        context = capture_context(state)
        distribution = grammar.reduce_distribution(
            state.stack[-2].symbol, state.stack[-1].symbol, context
        )

    def reduce_actions() -> list[tuple[str, str | None]]:
        ranked = sorted(
            distribution, key=lambda rp: (-rp[1], rp[0].parent, rp[0].key())
        )
        keys = [("reduce", rule.key()) for rule, _ in ranked]
        if mode == "sample" and len(keys) > 1:
            probs = np.array([p for _, p in ranked])
            probs = probs / probs.sum()
            first = int(rng.choice(len(keys), p=probs))
            keys.insert(0, keys.pop(first))
        return keys

    if can_shift and distribution:
        a, b = state.stack[-2].symbol, state.stack[-1].symbol
        c = state.lookahead()
        prob = grammar.shift_probability(a, b, c)
        if mode == "sample":
            shift_first = bool(rng.random() < prob.p_shift)
        else:
            # Argmax; an exact tie prefers reduce, like the unseen-triple
            # fallback does.
            shift_first = prob.p_shift > 0.5
        used = None if prob.fallback else (
            (a, b, c), "shift" if shift_first else "reduce"
        )
        if shift_first:
            return [_SHIFT] + reduce_actions(), used
        return reduce_actions() + [_SHIFT], used
    if can_shift:
        return [_SHIFT], None
    if distribution:
        return reduce_actions(), None
    return [], None


def _failure_report(state: ParseState, backtracks: int) -> dict:
    return {
        "text_id": state.text.id,
        "stack": state.stack_symbols(),
        "buffer_position": state.pos,
        "buffer_remaining": state.buffer_remaining,
        "remaining_terminals": list(state.terminals[state.pos:]),
        "backtracks": backtracks,
    }


def parse_outcome(
    text: DocText,
    grammar: Grammar,
    mode: str = "argmax",
    seed: int | None = None,
    max_backtracks: int = 100,
) -> ParseOutcome:
    """Parse autonomously. Argmax mode is a pure function of (text,
    grammar); sample mode is deterministic given the seed. Dead ends
    backtrack over the most recent untried alternative, at most
    max_backtracks times, then fail with the stuck sentential form."""
    if mode not in ("argmax", "sample"):
        raise ParseError(f"unknown parse mode {mode!r}")
    if not grammar.rules:
        raise ParseError("cannot parse with an empty grammar")
    rng = np.random.default_rng(seed) if mode == "sample" else None

    state = start_session(text, grammar=None, mode="autonomous")
    chosen: list[tuple[str, str | None]] = []
    uses: list[tuple] = []
    # Each entry: (events taken so far, remaining alternatives, uses length).
    choice_stack: list[tuple[int, list, int]] = []
    backtracks = 0

    def execute(action: tuple[str, str | None]) -> None:
        kind, rule_key = action
        if kind == "shift":
            event = AnnotationEvent(kind="shift", author="model")
        else:
            rule = grammar.rules[rule_key]
            event = AnnotationEvent(
                kind="reduce",
                parent=rule.parent,
                roles=rule.roles,
                rhet_rel=rule.rhet_rel,
                ae=rule.ae,
                author="model",
            )
        apply_action(state, event)
        chosen.append(action)

    while True:
        if state.finished:
            rule_keys: dict[str, None] = {}
            for kind, key in chosen:
                if kind == "reduce":
                    rule_keys.setdefault(key)
            use_set: dict[tuple, None] = {}
            for use in uses:
                use_set.setdefault(use)
            tree = state.stack[0]
            return ParseOutcome(
                tree=tree,
                rule_keys=tuple(rule_keys),
                precedence_uses=tuple(use_set),
                events=tuple(state.history),
                backtracks=backtracks,
            )
        actions, used = _ordered_actions(state, grammar, mode, rng)
        if actions:
            if len(actions) > 1:
                choice_stack.append((len(chosen), actions[1:], len(uses)))
            if used is not None:
                uses.append(used)
            execute(actions[0])
            continue
        # Dead end: back up to the latest choice point with alternatives.
        while choice_stack and not choice_stack[-1][1]:
            choice_stack.pop()
        if not choice_stack or backtracks >= max_backtracks:
            raise ParseFailure(_failure_report(state, backtracks))
        backtracks += 1
        prefix_len, alternatives, uses_len = choice_stack[-1]
        retry = alternatives.pop(0)
        del uses[uses_len:]
        prefix = chosen[:prefix_len]
        state = start_session(text, grammar=None, mode="autonomous")
        chosen = []
        for action in prefix:
            execute(action)
        execute(retry)


def parse(
    text: DocText,
    grammar: Grammar,
    mode: str = "argmax",
    seed: int | None = None,
    max_backtracks: int = 100,
) -> RsNode:
    return parse_outcome(text, grammar, mode, seed, max_backtracks).tree


# Registry used for sessions run without a grammar (builtin equations only).
_DEFAULT_AE_GRAMMAR = Grammar()
