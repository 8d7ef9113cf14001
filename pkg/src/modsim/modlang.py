"""Controlled-language parser for live modulation commands.

Grammar (case-insensitive, trailing sentence punctuation ignored):

    command      = reorder | substitute | speed | avoid | skip | abort ;
    reorder      = verb? target ("first" | "last") ;
    substitute   = "not" target ","? ("but" | "use") target ;
    speed        = "be"? ("gentle" | "slow" | "fast") tail? | "speed" number ;
    avoid        = "avoid" target ;
    skip         = "skip" (target | subtask-name) ;
    abort        = "stop" | "abort" ;
    target       = "object" "#"? integer
                 | "the other" shape
                 | "the"? color? shape? ("one")?   (at least color or shape)
    verb         = "stack" | "grasp" | "move" | "bring" | "place" ;

Color/shape terminals mirror the scene enums. A target with no shape ("the
white one", "the brown") stands for "the <color> thing of the kind I am
talking about"; the shape is filled in from context at resolution time.
Words after a valid speed keyword (the tail) are ignored, which is the one
place free phrasing is allowed. "object 2" is accepted as a lenient
spelling of the normative "object #2"; render() always emits the normative
form.

Commands never resolve references; they carry TargetRefs for the label
registry to ground later.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .labels import TargetRef
from .scene import COLORS, SHAPES

LL = "LL"
HL = "HL"

OP_SUBSTITUTE = "substitute_target"
OP_SET_SPEED = "set_speed"
OP_REORDER = "reorder"
OP_SKIP = "skip_subtask"
OP_AVOID = "add_avoid"
OP_ABORT = "abort"

# Normative classification: parameter tweaks are low-level, plan surgery is
# high-level.
KIND_OF_OP = {
    OP_SUBSTITUTE: LL,
    OP_SET_SPEED: LL,
    OP_REORDER: HL,
    OP_SKIP: HL,
    OP_AVOID: HL,
    OP_ABORT: HL,
}

SPEED_PRESETS = {"gentle": 0.3, "slow": 0.5, "fast": 1.0}
VERBS = ("stack", "grasp", "move", "bring", "place")

_KEYWORDS = {
    "the", "other", "one", "object", "not", "but", "use", "be",
    "speed", "avoid", "skip", "stop", "abort", "first", "last",
}
_VOCAB = set(COLORS) | set(SHAPES) | set(VERBS) | set(SPEED_PRESETS) | _KEYWORDS


class ParseError(Exception):
    """Command text does not match the grammar.

    ``offset`` is the byte offset of the offending token in the original
    string; ``rule`` names the nearest grammar rule.
    """

    def __init__(self, message: str, offset: int = 0, rule: str = "command"):
        super().__init__(f"{message} (at byte {offset}, while parsing <{rule}>)")
        self.offset = offset
        self.rule = rule


class UnknownWord(ParseError):
    """A token is outside the command vocabulary entirely."""

    def __init__(self, token: str, offset: int, rule: str = "command"):
        super().__init__(f"unknown word {token!r}", offset, rule)
        self.token = token


@dataclass(frozen=True)
class ModulationIR:
    """Parsed modulation command.

    Structural equality ignores raw_text and the surface spans, so
    parse(render(ir)) == ir holds for every grammar-constructible IR.
    Spans are (start, end) byte offsets into raw_text; target_span covers
    the actionable reference (the new target for substitutes) and is what
    the augmenter replaces with TARGET.
    """

    op: str
    kind: str
    target: TargetRef | None = None       # reorder / avoid / skip
    position: str | None = None           # reorder: "first" | "last"
    old: TargetRef | None = None          # substitute
    new: TargetRef | None = None          # substitute
    scale: float | None = None            # set_speed
    subtask: str | None = None            # skip by subtask name
    raw_text: str = field(default="", compare=False)
    target_span: tuple[int, int] | None = field(default=None, compare=False)
    old_span: tuple[int, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.op not in KIND_OF_OP:
            raise ValueError(f"unknown op {self.op!r}")
        if self.kind != KIND_OF_OP[self.op]:
            raise ValueError(f"{self.op} must be {KIND_OF_OP[self.op]}")
        if self.op == OP_SET_SPEED and not (self.scale and 0.0 < self.scale <= 1.0):
            raise ValueError("speed scale must be in (0, 1]")
        if self.op == OP_REORDER and (self.target is None or self.position not in ("first", "last")):
            raise ValueError("reorder needs a target and first/last")
        if self.op == OP_SUBSTITUTE and self.new is None:
            raise ValueError("substitute needs a new target")
        if self.op == OP_AVOID and self.target is None:
            raise ValueError("avoid needs a target")
        if self.op == OP_SKIP and self.target is None and self.subtask is None:
            raise ValueError("skip needs a target or a subtask name")

    def actionable_ref(self) -> tuple[TargetRef, tuple[int, int] | None] | None:
        """The reference the robot should act on (for TARGET augmentation)."""
        if self.op == OP_SUBSTITUTE:
            return (self.new, self.target_span)
        if self.target is not None:
            return (self.target, self.target_span)
        return None

    def to_json(self) -> dict:
        out: dict = {"op": self.op, "kind": self.kind, "raw_text": self.raw_text}
        if self.target is not None:
            out["target"] = self.target.to_json()
        if self.position is not None:
            out["position"] = self.position
        if self.old is not None:
            out["old"] = self.old.to_json()
        if self.new is not None:
            out["new"] = self.new.to_json()
        if self.scale is not None:
            out["scale"] = self.scale
        if self.subtask is not None:
            out["subtask"] = self.subtask
        return out

    @staticmethod
    def from_json(data: dict) -> "ModulationIR":
        def ref(key):
            return TargetRef.from_json(data[key]) if key in data else None

        return ModulationIR(
            op=data["op"],
            kind=data["kind"],
            target=ref("target"),
            position=data.get("position"),
            old=ref("old"),
            new=ref("new"),
            scale=data.get("scale"),
            subtask=data.get("subtask"),
            raw_text=data.get("raw_text", ""),
        )


def classify(ir_or_op: "ModulationIR | str") -> str:
    """LL/HL classification; a pure table lookup on the operation."""
    op = ir_or_op.op if isinstance(ir_or_op, ModulationIR) else ir_or_op
    return KIND_OF_OP[op]


# --- builders for programmatic IRs (raw_text filled with the canonical form)

def make_reorder(target: TargetRef, position: str) -> ModulationIR:
    ir = ModulationIR(OP_REORDER, HL, target=target, position=position)
    return ModulationIR(OP_REORDER, HL, target=target, position=position, raw_text=render(ir))


def make_substitute(new: TargetRef, old: TargetRef | None = None) -> ModulationIR:
    ir = ModulationIR(OP_SUBSTITUTE, LL, old=old, new=new)
    raw = render(ir) if old is not None else f"not that, but {render_target(new)}"
    return ModulationIR(OP_SUBSTITUTE, LL, old=old, new=new, raw_text=raw)


def make_set_speed(scale: float) -> ModulationIR:
    ir = ModulationIR(OP_SET_SPEED, LL, scale=scale)
    return ModulationIR(OP_SET_SPEED, LL, scale=scale, raw_text=render(ir))


def make_avoid(target: TargetRef) -> ModulationIR:
    ir = ModulationIR(OP_AVOID, HL, target=target)
    return ModulationIR(OP_AVOID, HL, target=target, raw_text=render(ir))


def make_skip(target: TargetRef | None = None, subtask: str | None = None) -> ModulationIR:
    ir = ModulationIR(OP_SKIP, HL, target=target, subtask=subtask)
    return ModulationIR(OP_SKIP, HL, target=target, subtask=subtask, raw_text=render(ir))


def make_abort() -> ModulationIR:
    return ModulationIR(OP_ABORT, HL, raw_text="stop")


# --- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*|\d+\.\d+|\d+|#|,")


@dataclass(frozen=True)
class _Tok:
    text: str      # lowercased
    start: int
    end: int


def _tokenize(text: str) -> list[_Tok]:
    # trailing sentence punctuation is ignored
    body = re.sub(r"[.!?\s]+$", "", text)
    return [
        _Tok(m.group(0).lower(), m.start(), m.end())
        for m in _TOKEN_RE.finditer(body)
    ]


class _Cursor:
    def __init__(self, toks: list[_Tok], text: str):
        self.toks = toks
        self.text = text
        self.i = 0

    def peek(self, ahead: int = 0) -> _Tok | None:
        j = self.i + ahead
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def offset(self) -> int:
        tok = self.peek()
        return tok.start if tok else len(self.text)

    def expect_end(self, rule: str):
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.start, rule)


def _parse_target(cur: _Cursor) -> tuple[TargetRef, tuple[int, int]]:
    """Parse one target production; returns the ref and its surface span."""
    first = cur.peek()
    if first is None:
        raise ParseError("expected a target reference", cur.offset(), "target")
    start = first.start

    if first.text == "object":
        cur.next()
        tok = cur.peek()
        if tok is not None and tok.text == "#":
            cur.next()
            tok = cur.peek()
        if tok is None or not tok.text.isdigit():
            raise ParseError("expected an object number", cur.offset(), "target")
        cur.next()
        k = int(tok.text)
        if k < 1:
            raise ParseError("object numbers start at 1", tok.start, "target")
        return TargetRef.by_label(f"object #{k}"), (start, tok.end)

    if first.text == "the":
        nxt = cur.peek(1)
        if nxt is not None and nxt.text == "other":
            cur.next()
            cur.next()
            shape_tok = cur.peek()
            if shape_tok is None or shape_tok.text not in SHAPES:
                raise ParseError("'the other' needs a shape", cur.offset(), "target")
            cur.next()
            return TargetRef.other_of(shape_tok.text), (start, shape_tok.end)
        cur.next()

    color = None
    shape = None
    end = None
    tok = cur.peek()
    if tok is not None and tok.text in COLORS:
        color = tok.text
        end = tok.end
        cur.next()
        tok = cur.peek()
    if tok is not None and tok.text in SHAPES:
        shape = tok.text
        end = tok.end
        cur.next()
        tok = cur.peek()
    elif tok is not None and tok.text == "one" and color is not None:
        end = tok.end
        cur.next()

    if color is None and shape is None:
        if tok is None:
            raise ParseError("incomplete target reference", cur.offset(), "target")
        if tok.text not in _VOCAB:
            raise UnknownWord(tok.text, tok.start, "target")
        raise ParseError(f"expected a color or shape, got {tok.text!r}", tok.start, "target")
    return TargetRef.by_attributes(color=color, shape=shape), (start, end)


def parse(text: str) -> ModulationIR:
    """Parse a modulation command into its IR.

    Raises ParseError (or its subclass UnknownWord) on anything outside the
    grammar. References are left unresolved.
    """
    toks = _tokenize(text)
    if not toks:
        raise ParseError("empty command", 0)
    cur = _Cursor(toks, text)
    head = cur.peek()

    if head.text in ("stop", "abort"):
        cur.next()
        cur.expect_end("abort")
        return ModulationIR(OP_ABORT, HL, raw_text=text)

    if head.text == "not":
        cur.next()
        old, old_span = _parse_target(cur)
        tok = cur.peek()
        if tok is not None and tok.text == ",":
            cur.next()
            tok = cur.peek()
        if tok is None or tok.text not in ("but", "use"):
            raise ParseError("expected 'but' or 'use'", cur.offset(), "substitute")
        cur.next()
        new, new_span = _parse_target(cur)
        cur.expect_end("substitute")
        return ModulationIR(
            OP_SUBSTITUTE, LL, old=old, new=new, raw_text=text,
            target_span=new_span, old_span=old_span,
        )

    if head.text == "avoid":
        cur.next()
        target, span = _parse_target(cur)
        cur.expect_end("avoid")
        return ModulationIR(OP_AVOID, HL, target=target, raw_text=text, target_span=span)

    if head.text == "skip":
        cur.next()
        tok = cur.peek()
        if tok is None:
            raise ParseError("skip needs a target or subtask name", cur.offset(), "skip")
        try:
            target, span = _parse_target(cur)
            cur.expect_end("skip")
            return ModulationIR(OP_SKIP, HL, target=target, raw_text=text, target_span=span)
        except ParseError:
            # a single identifier that is not a grammar word names a subtask
            if (
                cur.i == 1
                and cur.peek(1) is None
                and tok.text not in _VOCAB
                and re.fullmatch(r"[a-z_][a-z_0-9]*", tok.text)
            ):
                return ModulationIR(OP_SKIP, HL, subtask=tok.text, raw_text=text)
            raise

    if head.text == "speed":
        cur.next()
        tok = cur.peek()
        if tok is None:
            raise ParseError("expected a number after 'speed'", cur.offset(), "speed")
        try:
            scale = float(tok.text)
        except ValueError:
            raise ParseError(f"expected a number, got {tok.text!r}", tok.start, "speed") from None
        cur.next()
        cur.expect_end("speed")
        if not 0.0 < scale <= 1.0:
            raise ParseError("speed scale must be in (0, 1]", tok.start, "speed")
        return ModulationIR(OP_SET_SPEED, LL, scale=scale, raw_text=text)

    speed_head = head.text
    if speed_head == "be":
        nxt = cur.peek(1)
        speed_head = nxt.text if nxt else ""
    if speed_head in SPEED_PRESETS:
        # the tail after a valid speed keyword is deliberately unrestricted
        return ModulationIR(OP_SET_SPEED, LL, scale=SPEED_PRESETS[speed_head], raw_text=text)
    if head.text == "be":
        tok = cur.peek(1)
        if tok is None:
            raise ParseError("expected gentle/slow/fast after 'be'", len(text), "speed")
        if tok.text not in _VOCAB:
            raise UnknownWord(tok.text, tok.start, "speed")
        raise ParseError(f"expected gentle/slow/fast, got {tok.text!r}", tok.start, "speed")

    # reorder: optional verb, then target, then first/last
    if head.text in VERBS:
        cur.next()
    target, span = _parse_target(cur)
    tok = cur.peek()
    if tok is None or tok.text not in ("first", "last"):
        raise ParseError("expected 'first' or 'last'", cur.offset(), "reorder")
    cur.next()
    cur.expect_end("reorder")
    return ModulationIR(
        OP_REORDER, HL, target=target, position=tok.text, raw_text=text, target_span=span
    )


# --- rendering ---------------------------------------------------------------

def render_target(ref: TargetRef) -> str:
    """Canonical surface form of a reference (held_target has none)."""
    if ref.kind == "by_label":
        return ref.label
    if ref.kind == "other_of":
        return f"the other {ref.shape}"
    if ref.kind == "by_attributes":
        if ref.shape is None:
            return f"the {ref.color} one"
        if ref.color is None:
            return f"the {ref.shape}"
        return f"the {ref.color} {ref.shape}"
    raise ValueError("held_target has no surface form in the command grammar")


def render(ir: ModulationIR) -> str:
    """Canonical text for an IR; parse(render(ir)) is structurally ir."""
    if ir.op == OP_ABORT:
        return "stop"
    if ir.op == OP_SET_SPEED:
        for word, value in SPEED_PRESETS.items():
            if ir.scale == value:
                return f"be {word}"
        return f"speed {ir.scale}"
    if ir.op == OP_REORDER:
        return f"stack {render_target(ir.target)} {ir.position}"
    if ir.op == OP_SUBSTITUTE:
        if ir.old is None:
            raise ValueError("substitute without an old target has no surface form")
        return f"not {render_target(ir.old)}, but {render_target(ir.new)}"
    if ir.op == OP_AVOID:
        return f"avoid {render_target(ir.target)}"
    if ir.op == OP_SKIP:
        body = ir.subtask if ir.target is None else render_target(ir.target)
        return f"skip {body}"
    raise ValueError(ir.op)
