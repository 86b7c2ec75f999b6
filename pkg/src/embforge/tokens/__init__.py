"""Interaction-token vocabulary, quantizers, codecs, and sequence grammar."""

from .codec import (
    ROT_HI,
    ROT_LO,
    TokenParseError,
    bins_for_bbox,
    bins_for_step,
    decode_action_seq,
    decode_bbox,
    dequantize,
    encode_action,
    encode_action_seq,
    encode_bbox,
    quantize,
    step_from_bins,
)
from .grammar import (
    ActionChunk,
    GoalSpan,
    LocGroup,
    ObjSpan,
    ParseError,
    ScenePlaceholder,
    SeqNode,
    Text,
    lex,
    parse,
    render,
    render_string,
    to_string,
)
from .vocab import BIN_COUNT, STRUCTURAL_TOKENS, VOCAB, Vocab

__all__ = [
    "ActionChunk",
    "BIN_COUNT",
    "GoalSpan",
    "LocGroup",
    "ObjSpan",
    "ParseError",
    "ROT_HI",
    "ROT_LO",
    "ScenePlaceholder",
    "SeqNode",
    "STRUCTURAL_TOKENS",
    "Text",
    "TokenParseError",
    "VOCAB",
    "Vocab",
    "bins_for_bbox",
    "bins_for_step",
    "decode_action_seq",
    "decode_bbox",
    "dequantize",
    "encode_action",
    "encode_action_seq",
    "encode_bbox",
    "lex",
    "parse",
    "quantize",
    "render",
    "render_string",
    "step_from_bins",
    "to_string",
]
