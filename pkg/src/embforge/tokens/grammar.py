"""The interleaved multimodal sequence grammar: AST, renderer, lexer, parser.

Grammar:

    sequence     := (text | obj_span | scene | loc_group | goal_span | action_chunk)*
    obj_span     := <obj> text </obj> loc{6}
    loc_group    := loc{6}              (bare box, e.g. a localization answer)
    scene        := <scene></scene>
    goal_span    := <image> inner </image> | <pcd> inner </pcd>   (no nesting)
    action_chunk := step (<ACT_SEP> step)*
    step         := aloc{3} arot{3} gripper

Text is kept as plain words; render normalizes it to single-space word
sequences so that parse(render(ast)) == ast on normalized ASTs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence, Union

from .vocab import VOCAB, aloc_token, arot_token, gripper_token, loc_token


class ParseError(ValueError):
    """Grammar violation; message always names the offending token index."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} at index {index}")
        self.index = index


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class ObjSpan:
    """An object noun wrapped in <obj></obj> followed by its 6 loc bins."""

    name: str
    bins: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(int(b) for b in self.bins))
        if len(self.bins) != 6 or any(not 0 <= b < 256 for b in self.bins):
            raise ValueError("ObjSpan needs exactly 6 loc bins in 0..255")


@dataclass(frozen=True)
class ScenePlaceholder:
    """Slot where scene embeddings are spliced in downstream; renders as <scene></scene>."""


@dataclass(frozen=True)
class LocGroup:
    """A bare 6-loc box group, e.g. a localization answer."""

    bins: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(int(b) for b in self.bins))
        if len(self.bins) != 6 or any(not 0 <= b < 256 for b in self.bins):
            raise ValueError("LocGroup needs exactly 6 loc bins in 0..255")


@dataclass(frozen=True)
class ActionChunk:
    """One or more 7-bin action steps (3 aloc, 3 arot, 1 gripper)."""

    steps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        steps = tuple(tuple(int(b) for b in s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ValueError("ActionChunk needs at least one step")
        for s in steps:
            if len(s) != 7:
                raise ValueError("action step needs exactly 7 bins")
            if any(not 0 <= b < 256 for b in s[:6]) or s[6] not in (0, 1):
                raise ValueError("action step bins out of range")


@dataclass(frozen=True)
class GoalSpan:
    """<image>...</image> or <pcd>...</pcd>; children may not nest goal spans."""

    modality: str  # "image" or "pcd"
    children: tuple["SeqNode", ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if self.modality not in ("image", "pcd"):
            raise ValueError(f"unknown goal modality {self.modality!r}")
        if any(isinstance(c, GoalSpan) for c in self.children):
            raise ValueError("goal spans may not nest")


SeqNode = Union[Text, ObjSpan, ScenePlaceholder, LocGroup, GoalSpan, ActionChunk]

_SPECIAL_RE = re.compile(r"<[^<>\s]+>")


def lex(text: str) -> list[str]:
    """Split a serialized sequence into tokens.

    Known vocabulary entries become single tokens (with or without
    surrounding spaces); everything else splits on whitespace into words.
    """
    tokens: list[str] = []
    pos = 0
    for m in _SPECIAL_RE.finditer(text):
        if m.group(0) not in VOCAB:
            continue
        tokens.extend(text[pos:m.start()].split())
        tokens.append(m.group(0))
        pos = m.end()
    tokens.extend(text[pos:].split())
    return tokens


def to_string(tokens: Sequence[str]) -> str:
    """Canonical single-space serialization of a token sequence."""
    return " ".join(tokens)


def render(nodes: Sequence[SeqNode]) -> list[str]:
    """Deterministic serialization of an AST into a token sequence."""
    tokens: list[str] = []
    for node in nodes:
        if isinstance(node, Text):
            tokens.extend(node.text.split())
        elif isinstance(node, ObjSpan):
            tokens.append("<obj>")
            tokens.extend(node.name.split())
            tokens.append("</obj>")
            tokens.extend(loc_token(b) for b in node.bins)
        elif isinstance(node, ScenePlaceholder):
            tokens.extend(["<scene>", "</scene>"])
        elif isinstance(node, LocGroup):
            tokens.extend(loc_token(b) for b in node.bins)
        elif isinstance(node, GoalSpan):
            tokens.append(f"<{node.modality}>")
            tokens.extend(render(node.children))
            tokens.append(f"</{node.modality}>")
        elif isinstance(node, ActionChunk):
            for i, step in enumerate(node.steps):
                if i:
                    tokens.append("<ACT_SEP>")
                tokens.extend(
                    [aloc_token(b) for b in step[:3]]
                    + [arot_token(b) for b in step[3:6]]
                    + [gripper_token(step[6])]
                )
        else:
            raise ValueError(f"cannot render node of type {type(node).__name__}")
    return tokens


def render_string(nodes: Sequence[SeqNode]) -> str:
    return to_string(render(nodes))


_CLOSERS = {"</obj>", "</scene>", "</image>", "</pcd>"}
_STEP_FAMILIES = ("aloc", "aloc", "aloc", "arot", "arot", "arot", "gripper")


class _Parser:
    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.i = 0

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, min(self.i, max(len(self.tokens) - 1, 0)))

    def peek(self) -> str | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def parse_sequence(self, in_goal: bool = False) -> list[SeqNode]:
        nodes: list[SeqNode] = []
        words: list[str] = []

        def flush_text():
            if words:
                nodes.append(Text(" ".join(words)))
                words.clear()

        while self.i < len(self.tokens):
            tok = self.tokens[self.i]
            fam = VOCAB.family(tok)
            if fam is None:
                words.append(tok)
                self.i += 1
                continue
            if tok in _CLOSERS:
                if in_goal and tok in ("</image>", "</pcd>"):
                    break  # caller checks which closer
                raise self.error(f"unbalanced closing tag {tok!r}")
            flush_text()
            if tok == "<obj>":
                nodes.append(self.parse_obj_span())
            elif tok == "<scene>":
                nodes.append(self.parse_scene())
            elif tok in ("<image>", "<pcd>"):
                if in_goal:
                    raise self.error("nested goal spans are not allowed")
                nodes.append(self.parse_goal_span())
            elif fam == "loc":
                nodes.append(LocGroup(self.parse_loc_bins()))
            elif fam == "aloc":
                nodes.append(self.parse_action_chunk())
            else:
                raise self.error(f"out-of-family token {tok!r} outside an action step")
        flush_text()
        return nodes

    def parse_obj_span(self) -> ObjSpan:
        self.i += 1  # past <obj>
        words = []
        while True:
            tok = self.peek()
            if tok is None:
                raise self.error("unbalanced <obj>, missing </obj>")
            if tok == "</obj>":
                self.i += 1
                break
            if VOCAB.family(tok) is not None:
                raise self.error(f"unexpected token {tok!r} inside <obj> span")
            words.append(tok)
            self.i += 1
        bins = self.parse_loc_bins()
        return ObjSpan(" ".join(words), bins)

    def parse_loc_bins(self) -> tuple[int, ...]:
        bins = []
        while len(bins) < 6:
            tok = self.peek()
            if tok is None or VOCAB.family(tok) != "loc":
                raise self.error(f"loc arity {len(bins)} ≠ 6")
            bins.append(VOCAB.bin_value(tok))
            self.i += 1
        return tuple(bins)

    def parse_scene(self) -> ScenePlaceholder:
        self.i += 1  # past <scene>
        if self.peek() != "</scene>":
            raise self.error("<scene> must be immediately closed by </scene>")
        self.i += 1
        return ScenePlaceholder()

    def parse_goal_span(self) -> GoalSpan:
        opener = self.tokens[self.i]
        modality = opener[1:-1]
        self.i += 1
        children = self.parse_sequence(in_goal=True)
        tok = self.peek()
        if tok is None:
            raise self.error(f"unbalanced {opener}, missing </{modality}>")
        if tok != f"</{modality}>":
            raise self.error(f"mismatched goal-span closer {tok!r} for {opener}")
        self.i += 1
        return GoalSpan(modality, tuple(children))

    def parse_action_chunk(self) -> ActionChunk:
        steps = []
        while True:
            bins = []
            for fam in _STEP_FAMILIES:
                tok = self.peek()
                if tok is None or VOCAB.family(tok) != fam:
                    got = "end of input" if tok is None else repr(tok)
                    raise self.error(f"expected {fam} token in action step, got {got}")
                bins.append(VOCAB.bin_value(tok))
                self.i += 1
            steps.append(tuple(bins))
            if self.peek() != "<ACT_SEP>":
                return ActionChunk(tuple(steps))
            self.i += 1


def parse(tokens: Union[str, Sequence[str]]) -> list[SeqNode]:
    """Parse a token sequence (or serialized string) into an AST.

    Raises ParseError with the offending token index on any grammar violation.
    """
    if isinstance(tokens, str):
        tokens = lex(tokens)
    return _Parser(tokens).parse_sequence()
