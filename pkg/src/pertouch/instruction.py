"""The editing command DSL: parsing, formatting, magnitude mapping.

A closed grammar replaces free-text understanding; a pluggable text
front may pre-translate natural language into it. Weak commands ask for
an automatic pass, strong commands name a target, an attribute, a
direction, and a magnitude:

    optimize this image
    significantly increase eagle brightness
    increase eagle brightness significantly
    set global contrast 0.25

Errors carry the UTF-8 byte offset of the offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidArgumentError, ParseError, RangeError
from .scoring import ATTRIBUTES

DSL_VERSION = "pertouch-dsl/1"

WEAK_KEYWORDS = frozenset({"optimize", "enhance", "auto"})
INCREASE_VERBS = frozenset(
    {"increase", "increased", "increases", "raise", "raised", "raises", "boost", "boosted", "boosts"}
)
DECREASE_VERBS = frozenset(
    {"decrease", "decreased", "decreases", "reduce", "reduced", "reduces", "lower", "lowered", "lowers"}
)
QUALITATIVE_LEVELS = ("slightly", "moderately", "significantly")
FILLER_WORDS = frozenset({"the", "a", "an", "this", "that", "my", "of", "please"})

# Words a region label may not contain, to keep parse(format(i)) == i.
RESERVED_WORDS = (
    WEAK_KEYWORDS
    | INCREASE_VERBS
    | DECREASE_VERBS
    | FILLER_WORDS
    | frozenset(QUALITATIVE_LEVELS)
    | frozenset(ATTRIBUTES)
    | frozenset({"set", "global"})
)

_LABEL_TOKEN = re.compile(r"^[a-z0-9][a-z0-9_\-]*$")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class Action(Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    SET = "set"


@dataclass(frozen=True)
class Qualitative:
    """A vague magnitude word, mapped to a score delta by MagnitudeTable."""

    level: str

    def __post_init__(self):
        if self.level not in QUALITATIVE_LEVELS:
            raise InvalidArgumentError(f"unknown magnitude level {self.level!r}")


@dataclass(frozen=True)
class Absolute:
    """An explicit target score in [-1, 1]."""

    value: float

    def __post_init__(self):
        if not -1.0 <= self.value <= 1.0:
            raise InvalidArgumentError(f"absolute target {self.value} outside [-1, 1]")


@dataclass(frozen=True)
class WeakInstruction:
    """Hands-off request: memory-driven automatic retouching."""


@dataclass(frozen=True)
class StrongInstruction:
    """Explicit edit of one attribute on one target.

    ``target`` None means the whole image; otherwise it is a lowercase
    region label made of word tokens that are not grammar keywords, so
    every valid instruction survives a format/parse round trip.
    """

    target: str | None
    attribute: str
    action: Action
    magnitude: Qualitative | Absolute

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise InvalidArgumentError(f"unknown attribute {self.attribute!r}")
        if self.action is Action.SET and not isinstance(self.magnitude, Absolute):
            raise InvalidArgumentError("set requires an absolute magnitude")
        if self.action is not Action.SET and not isinstance(self.magnitude, Qualitative):
            raise InvalidArgumentError("increase/decrease require a qualitative magnitude")
        if self.target is not None:
            tokens = self.target.split(" ")
            if not tokens or any(
                not _LABEL_TOKEN.match(tok) or tok in RESERVED_WORDS for tok in tokens
            ):
                raise InvalidArgumentError(
                    f"region label {self.target!r} is not expressible in the DSL"
                )


Instruction = WeakInstruction | StrongInstruction


@dataclass(frozen=True)
class MagnitudeTable:
    """Score deltas for the vague magnitude words; tunable prior."""

    slightly: float = 0.15
    moderately: float = 0.35
    significantly: float = 0.60

    def __post_init__(self):
        if not 0.0 < self.slightly < self.moderately < self.significantly <= 2.0:
            raise InvalidArgumentError(
                "magnitude table must be strictly increasing, positive, and at most 2"
            )

    def delta(self, level: str) -> float:
        if level not in QUALITATIVE_LEVELS:
            raise InvalidArgumentError(f"unknown magnitude level {level!r}")
        return getattr(self, level)


@dataclass(frozen=True)
class ScoreDelta:
    """Signed shift to apply to a measured score."""

    value: float


@dataclass(frozen=True)
class AbsoluteTarget:
    """Exact score to reach, independent of the measured one."""

    value: float


@dataclass(frozen=True)
class _Token:
    text: str
    offset: int  # UTF-8 byte offset in the original input


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    for match in re.finditer(r"\S+", text):
        raw = match.group(0)
        stripped = raw.rstrip(".,!?;:").lstrip("\"'(").rstrip("\"')")
        stripped = stripped.rstrip(".,!?;:")
        if not stripped:
            continue
        offset = len(text[: match.start()].encode("utf-8"))
        tokens.append(_Token(stripped.lower(), offset))
    return tokens


def _strip_fillers(tokens: list[_Token]) -> list[_Token]:
    return [tok for tok in tokens if tok.text not in FILLER_WORDS]


def _parse_target(tokens: list[_Token], at: _Token) -> str | None:
    words = [tok for tok in _strip_fillers(tokens)]
    if not words:
        raise ParseError("missing edit target before attribute", at.offset)
    label = " ".join(tok.text for tok in words)
    if label == "global":
        return None
    for tok in words:
        if not _LABEL_TOKEN.match(tok.text) or tok.text in RESERVED_WORDS:
            raise ParseError(f"unexpected word {tok.text!r} in edit target", tok.offset)
    return label


def parse(text: str) -> Instruction:
    """Parse one command. Unknown region labels pass; they resolve later."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty instruction", 0)
    head = tokens[0]
    if head.text in WEAK_KEYWORDS:
        return WeakInstruction()
    if head.text == "set":
        if len(tokens) < 4:
            raise ParseError(
                "set needs a target, an attribute, and a value", head.offset
            )
        value_tok, attr_tok = tokens[-1], tokens[-2]
        if attr_tok.text not in ATTRIBUTES:
            raise ParseError(f"unknown attribute {attr_tok.text!r}", attr_tok.offset)
        if not _NUMBER.match(value_tok.text):
            raise ParseError(f"expected a decimal value, got {value_tok.text!r}", value_tok.offset)
        value = float(value_tok.text)
        if not -1.0 <= value <= 1.0:
            raise RangeError(f"value {value} outside [-1, 1]", value_tok.offset)
        target = _parse_target(tokens[1:-2], attr_tok)
        return StrongInstruction(target, attr_tok.text, Action.SET, Absolute(value))

    idx = 0
    magnitude: Qualitative | None = None
    if head.text in QUALITATIVE_LEVELS:
        magnitude = Qualitative(head.text)
        idx = 1
        if idx >= len(tokens):
            raise ParseError("magnitude word without a command", head.offset)
    verb_tok = tokens[idx]
    if verb_tok.text in INCREASE_VERBS:
        action = Action.INCREASE
    elif verb_tok.text in DECREASE_VERBS:
        action = Action.DECREASE
    else:
        raise ParseError(f"unrecognized command word {verb_tok.text!r}", verb_tok.offset)
    rest = tokens[idx + 1 :]
    if rest and rest[-1].text in QUALITATIVE_LEVELS:
        if magnitude is not None:
            raise ParseError("magnitude given twice", rest[-1].offset)
        magnitude = Qualitative(rest[-1].text)
        rest = rest[:-1]
    if not rest:
        raise ParseError("missing target and attribute", verb_tok.offset)
    attr_tok = rest[-1]
    if attr_tok.text not in ATTRIBUTES:
        raise ParseError(f"unknown attribute {attr_tok.text!r}", attr_tok.offset)
    target = _parse_target(rest[:-1], attr_tok)
    if magnitude is None:
        magnitude = Qualitative("moderately")
    return StrongInstruction(target, attr_tok.text, action, magnitude)


def to_target_delta(
    instr: StrongInstruction, table: MagnitudeTable | None = None
) -> ScoreDelta | AbsoluteTarget:
    """Deterministic first estimate of the control value for one command."""
    table = table or MagnitudeTable()
    if instr.action is Action.SET:
        assert isinstance(instr.magnitude, Absolute)
        return AbsoluteTarget(instr.magnitude.value)
    assert isinstance(instr.magnitude, Qualitative)
    delta = table.delta(instr.magnitude.level)
    if instr.action is Action.DECREASE:
        delta = -delta
    return ScoreDelta(delta)


def format_instruction(instr: Instruction) -> str:
    """Canonical lowercase text; parse(format_instruction(i)) equals i."""
    if isinstance(instr, WeakInstruction):
        return "optimize image"
    target = instr.target if instr.target is not None else "global"
    if instr.action is Action.SET:
        assert isinstance(instr.magnitude, Absolute)
        return f"set {target} {instr.attribute} {instr.magnitude.value!r}"
    assert isinstance(instr.magnitude, Qualitative)
    verb = "increase" if instr.action is Action.INCREASE else "decrease"
    return f"{verb} {target} {instr.attribute} {instr.magnitude.level}"
