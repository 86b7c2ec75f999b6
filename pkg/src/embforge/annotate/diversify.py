"""Prompt diversification: offline paraphraser, replay client, HTTP client.

The contract all routes share: special vocabulary tokens (everything shaped
like ``<...>`` that exists in the vocabulary) are byte-identical before and
after rewriting, as a multiset. A reply violating that, or any client
failure, keeps the original sample flagged "undiversified".
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
from collections import Counter
from pathlib import Path
from typing import Optional, Protocol

from ..model import SampleRecord
from ..tokens import VOCAB
from .builders import DiversifierRequest

CREDENTIAL_ENV_VAR = "EMBFORGE_DIVERSIFIER_KEY"

_SPECIAL_RE = re.compile(r"<[^<>\s]+>")


def special_token_multiset(text: str) -> Counter:
    """Multiset of vocabulary tokens appearing in a serialized sequence."""
    return Counter(m.group(0) for m in _SPECIAL_RE.finditer(text) if m.group(0) in VOCAB)


class DiversifierClient(Protocol):
    def complete(self, request: DiversifierRequest) -> dict:
        """Returns {"prompt": str, "answer": str} or raises on failure."""
        ...


def request_hash(request: DiversifierRequest) -> str:
    payload = {
        "system_prompt": request.system_prompt,
        "demonstrations": list(request.demonstrations),
        "facts": request.facts,
        "task_id": request.task_id,
        "seed": request.seed,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


class ReplayClient:
    """Serves canned replies from a directory, keyed by request hash.

    Each file is ``<hash>.json`` containing {"prompt": ..., "answer": ...}.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def complete(self, request: DiversifierRequest) -> dict:
        path = self.directory / f"{request_hash(request)}.json"
        if not path.exists():
            raise FileNotFoundError(f"no recorded reply for request {path.name}")
        with open(path) as fh:
            return json.load(fh)

    def record(self, request: DiversifierRequest, reply: dict) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"{request_hash(request)}.json"
        with open(path, "w") as fh:
            json.dump(reply, fh, indent=1)
        return path


class HttpClient:
    """Chat-completion-style HTTP endpoint; credential via environment only."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def complete(self, request: DiversifierRequest) -> dict:
        import requests

        key = os.environ.get(CREDENTIAL_ENV_VAR)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "system_prompt": request.system_prompt,
            "demonstrations": [list(d) for d in request.demonstrations],
            "facts": request.facts,
            "task_id": request.task_id,
            "seed": request.seed,
        }
        resp = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
        resp.raise_for_status()
        reply = resp.json()
        if not isinstance(reply, dict) or "prompt" not in reply or "answer" not in reply:
            raise ValueError("diversifier reply missing prompt/answer")
        return reply


# Seeded surface rewrites for the offline paraphraser. Keys match whole
# words case-sensitively; none may collide with vocabulary token text.
_SYNONYMS = {
    "Describe": ["Summarize", "Explain"],
    "describe": ["summarize", "explain"],
    "Locate": ["Find", "Pinpoint"],
    "Generate": ["Produce", "Create"],
    "Predict": ["Output", "Forecast"],
    "Instruction": ["Command", "Task"],
    "initial": ["starting", "first"],
    "final": ["ending", "last"],
    "current": ["present", "latest"],
    "Finished": ["Done", "Complete"],
    "robot": ["agent", "manipulator"],
    "task": ["job", "activity"],
}

_WORD_RE = re.compile(r"[A-Za-z]+")


def _paraphrase_text(segment: str, rng: random.Random) -> str:
    def sub(m):
        word = m.group(0)
        options = _SYNONYMS.get(word)
        if options and rng.random() < 0.5:
            return rng.choice(options)
        return word

    return _WORD_RE.sub(sub, segment)


def _rewrite_preserving_tokens(text: str, rng: random.Random) -> str:
    out = []
    pos = 0
    for m in _SPECIAL_RE.finditer(text):
        if m.group(0) not in VOCAB:
            continue
        out.append(_paraphrase_text(text[pos:m.start()], rng))
        out.append(m.group(0))
        pos = m.end()
    out.append(_paraphrase_text(text[pos:], rng))
    return "".join(out)


class OfflineParaphraser:
    """Deterministic seeded rewriter; never touches vocabulary tokens."""

    def paraphrase(self, sample: SampleRecord, seed: int) -> tuple[str, str]:
        key = f"{seed}:{sample.episode_id}:{sample.provenance.get('builder', '')}"
        rng = random.Random(key)
        prompt = _rewrite_preserving_tokens(sample.prompt, rng)
        # Token-bearing answers stay verbatim; pure-text answers may vary.
        if special_token_multiset(sample.answer):
            answer = sample.answer
        else:
            answer = _rewrite_preserving_tokens(sample.answer, rng)
        return prompt, answer


def diversify(
    sample: SampleRecord,
    client: Optional[DiversifierClient],
    seed: int,
) -> SampleRecord:
    """Rewrite a template-generated sample's surface text.

    Uses the client when given, the offline paraphraser otherwise. On any
    client failure or token-preservation violation the original sample is
    returned flagged "undiversified".
    """
    before = special_token_multiset(sample.prompt) + special_token_multiset(sample.answer)
    if client is not None:
        request = DiversifierRequest(
            system_prompt=(
                "Rewrite the prompt and answer into a more diverse phrasing. "
                "Never alter any token enclosed in angle brackets."
            ),
            demonstrations=(
                ("Describe the task.", "Summarize what the robot did."),
                ("Locate: the cup.", "Where is the cup? Give its 3D box."),
            ),
            facts={
                "prompt": sample.prompt,
                "answer": sample.answer,
                "episode_id": sample.episode_id,
            },
            task_id=sample.task_type,
            seed=seed,
        )
        try:
            reply = client.complete(request)
            prompt, answer = reply["prompt"], reply["answer"]
        except Exception:
            return _flag_undiversified(sample)
    else:
        prompt, answer = OfflineParaphraser().paraphrase(sample, seed)
    after = special_token_multiset(prompt) + special_token_multiset(answer)
    if after != before:
        return _flag_undiversified(sample)
    provenance = dict(sample.provenance)
    provenance["template_id"] = "diversified"
    provenance["seed"] = seed
    return SampleRecord(
        task_type=sample.task_type,
        prompt=prompt,
        answer=answer,
        assets=sample.assets,
        episode_id=sample.episode_id,
        provenance=provenance,
    )


def _flag_undiversified(sample: SampleRecord) -> SampleRecord:
    provenance = dict(sample.provenance)
    flags = list(provenance.get("flags", []))
    if "undiversified" not in flags:
        flags.append("undiversified")
    provenance["flags"] = flags
    return SampleRecord(
        task_type=sample.task_type,
        prompt=sample.prompt,
        answer=sample.answer,
        assets=sample.assets,
        episode_id=sample.episode_id,
        provenance=provenance,
    )
