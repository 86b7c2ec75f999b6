"""The interaction-token vocabulary.

779 special tokens: 9 structural tokens, 256 loc bins for 3D boxes, 256 aloc
+ 256 arot bins for actions, and 2 gripper states. Ids are contiguous within
each family and disjoint across families; the string <-> id mapping is
bijective and stable across releases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

STRUCTURAL_TOKENS = (
    "<obj>",
    "</obj>",
    "<scene>",
    "</scene>",
    "<image>",
    "</image>",
    "<pcd>",
    "</pcd>",
    "<ACT_SEP>",
)

BIN_COUNT = 256


def loc_token(b: int) -> str:
    return f"<loc{b}>"


def aloc_token(b: int) -> str:
    return f"<aloc{b}>"


def arot_token(b: int) -> str:
    return f"<arot{b}>"


def gripper_token(b: int) -> str:
    return f"<gripper{b}>"


@dataclass(frozen=True, eq=False)
class Vocab:
    """Immutable token table with string<->id and family lookup."""

    entries: tuple[tuple[str, int, str], ...]  # (token_string, id, family)

    @classmethod
    def build(cls) -> "Vocab":
        entries = []
        next_id = 0

        def add(tok, family):
            nonlocal next_id
            entries.append((tok, next_id, family))
            next_id += 1

        for tok in STRUCTURAL_TOKENS:
            add(tok, "structural")
        for b in range(BIN_COUNT):
            add(loc_token(b), "loc")
        for b in range(BIN_COUNT):
            add(aloc_token(b), "aloc")
        for b in range(BIN_COUNT):
            add(arot_token(b), "arot")
        add(gripper_token(0), "gripper")
        add(gripper_token(1), "gripper")
        return cls(tuple(entries))

    def __post_init__(self):
        object.__setattr__(self, "_by_string", {t: (i, f) for t, i, f in self.entries})
        object.__setattr__(self, "_by_id", {i: (t, f) for t, i, f in self.entries})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return token in self._by_string

    def token_id(self, token: str) -> int:
        return self._by_string[token][0]

    def token_string(self, token_id: int) -> str:
        return self._by_id[token_id][0]

    def family(self, token: str) -> str | None:
        """Family name of a token string, or None for plain text."""
        info = self._by_string.get(token)
        return info[1] if info else None

    def bin_value(self, token: str) -> int:
        """Numeric bin of a loc/aloc/arot/gripper token."""
        fam = self.family(token)
        if fam in (None, "structural"):
            raise ValueError(f"{token!r} carries no bin value")
        return int(token[1 + len(fam):-1])

    def to_json_obj(self) -> list[dict]:
        return [{"token_string": t, "id": i, "family": f} for t, i, f in self.entries]

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, indent=1)
            fh.write("\n")


VOCAB = Vocab.build()
