"""Rule-based noun-chunk extraction over a built-in tag lexicon.

Chunks are maximal runs of (determiner? adjective* noun+), matched
lowercased. Words absent from the lexicon default to nouns, which keeps the
chunker usable on open-vocabulary object names. An external tagger can
replace this behind the same contract (see ``extract_noun_chunks``'s
``tagger`` hook).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

DETERMINERS = {
    "a", "an", "the", "this", "that", "these", "those", "its", "your", "my",
    "some", "any", "each", "every", "both", "all",
}

ADJECTIVES = {
    "red", "green", "blue", "yellow", "orange", "purple", "pink", "black",
    "white", "brown", "gray", "grey", "big", "small", "large", "tiny",
    "left", "right", "top", "bottom", "middle", "upper", "lower", "front",
    "back", "near", "far", "nearest", "farthest", "closest", "first",
    "second", "third", "last", "open", "closed", "empty", "full", "new",
    "old", "metal", "plastic", "wooden", "glass", "round", "square", "flat",
    "tall", "short", "heavy", "light",
}

VERBS = {
    "pick", "place", "put", "take", "grab", "grasp", "lift", "drop", "open",
    "close", "push", "pull", "move", "slide", "turn", "rotate", "stack",
    "unstack", "insert", "remove", "pour", "wipe", "press", "go", "reach",
    "bring", "fetch", "hold", "release", "flip", "fold", "sweep", "point",
    "is", "are", "was", "were", "be", "do", "does", "did", "can", "will",
}

OTHER = {
    # prepositions, particles, conjunctions, adverbs, pronouns
    "up", "down", "in", "into", "out", "on", "onto", "off", "over", "under",
    "to", "from", "of", "with", "at", "by", "next", "between", "behind",
    "above", "below", "and", "or", "then", "it", "them", "there", "here",
    "slowly", "quickly", "carefully", "please", "now", "again",
}

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'-]*")


@dataclass(frozen=True)
class NounChunk:
    """A noun chunk and its character span in the source instruction."""

    text: str
    span: tuple[int, int]


def _tag(word: str) -> str:
    w = word.lower()
    if w in DETERMINERS:
        return "det"
    if w in VERBS:  # words in both sets ("open") act as verbs in instructions
        return "verb"
    if w in ADJECTIVES:
        return "adj"
    if w in OTHER:
        return "other"
    return "noun"


def extract_noun_chunks(
    instruction: str,
    tagger: Optional[Callable[[str], str]] = None,
) -> list[NounChunk]:
    """All noun chunks of an instruction, ordered and non-overlapping.

    ``tagger`` maps a word to one of {det, adj, verb, other, noun} and
    defaults to the built-in lexicon.
    """
    if not instruction:
        raise ValueError("instruction must be non-empty")
    tag = tagger or _tag
    words = [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(instruction)]
    tags = [tag(w) for w, _, _ in words]

    chunks: list[NounChunk] = []
    i = 0
    n = len(words)
    while i < n:
        start = i
        if tags[i] == "det":
            i += 1
        while i < n and tags[i] == "adj":
            i += 1
        noun_start = i
        while i < n and tags[i] == "noun":
            i += 1
        if i > noun_start:  # at least one noun: emit the full run
            lo = words[start][1]
            hi = words[i - 1][2]
            chunks.append(NounChunk(instruction[lo:hi], (lo, hi)))
        else:
            i = max(i, start + 1)
    return chunks
