"""Attacker backends: the deterministic embedding oracle and the LLM client.

Both answer the same two prompt kinds. The oracle resolves every choice by
cosine geometry over the surrogate embeddings and by TF-IDF weight for the
keyword, so it is pure, reproducible and usable offline. The LLM backend
speaks the common chat-completions JSON protocol; malformed or
constraint-violating replies get one corrective re-prompt and then fall back
to the oracle, with the entry marked.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BackendError, ConfigurationError, RetrievalExhaustedError
from .graph import TextAttributedGraph
from .prompts import TextPrompt, TopologyPrompt
from .text_features import Vocabulary, token_edit_distance, tokenize

log = logging.getLogger("tagsiege.backend")

API_KEY_ENV = "TAGSIEGE_API_KEY"
BASE_URL_ENV = "TAGSIEGE_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"

RETENTION_FLOOR = 0.3


@dataclass(frozen=True)
class TopologyDecision:
    delete_choice: int | None
    add_choice: int
    reasoning_summary: str
    justifications: str = ""
    fallback: bool = False


@dataclass(frozen=True)
class TextDecision:
    keyword: str
    rewritten_text: str
    rationale: str = ""
    fallback: bool = False


def validate_topology_decision(
    prompt: TopologyPrompt, delete_id: int | None, add_id: int
) -> str | None:
    """Reason the decision is invalid, or None if it is fine."""
    if prompt.neighbor_ids:
        if delete_id is None:
            return "no delete_id for a target with neighbors"
        if delete_id not in prompt.neighbor_ids:
            return f"delete_id {delete_id} not in the presented neighbor list"
    elif delete_id is not None:
        return "delete_id given for an isolated target"
    if add_id not in prompt.candidate_ids:
        return f"add_id {add_id} not in the presented candidate list"
    return None


def validate_text_decision(
    original_text: str, keyword: str, new_text: str, budget: int
) -> str | None:
    """Reason the rewrite violates its contract, or None if it is fine."""
    if len(tokenize(keyword)) != 1:
        return f"keyword {keyword!r} is not a single token"
    if not new_text.strip():
        return "rewritten text is empty"
    new_tokens = set(tokenize(new_text))
    if tokenize(keyword)[0] not in new_tokens:
        return "rewritten text does not contain the keyword"
    old_tokens = set(tokenize(original_text))
    if old_tokens and not (old_tokens & new_tokens):
        return "rewritten text shares no token with the original"
    if old_tokens:
        retention = len(old_tokens & new_tokens) / len(old_tokens)
        if retention < RETENTION_FLOOR:
            return f"retention {retention:.2f} below {RETENTION_FLOOR}"
    dist = token_edit_distance(original_text, new_text)
    if dist > budget:
        return f"token edit distance {dist} exceeds budget {budget}"
    return None


class AttackerBackend(ABC):
    """Answers topology and text prompts; counts every logical query."""

    kind: str

    def __init__(self):
        self.query_count = 0
        self.retry_count = 0
        self.fallback_count = 0

    @abstractmethod
    def topology_decision(self, prompt: TopologyPrompt) -> TopologyDecision: ...

    @abstractmethod
    def text_decision(self, prompt: TextPrompt, budget: int) -> TextDecision: ...


class OracleBackend(AttackerBackend):
    """Resolves both prompt kinds from embeddings and TF-IDF weights alone."""

    kind = "oracle"

    def __init__(
        self,
        graph: TextAttributedGraph,
        embeddings: np.ndarray,
        vocab: Vocabulary,
    ):
        super().__init__()
        self.graph = graph
        self.embeddings = np.asarray(embeddings, dtype=float)
        self.vocab = vocab
        self._class_tokens = self._collect_class_tokens(graph)

    @staticmethod
    def _collect_class_tokens(graph: TextAttributedGraph) -> dict[int, set[str]]:
        out: dict[int, set[str]] = {c: set() for c in range(graph.class_count)}
        for text, label in zip(graph.texts, graph.labels):
            out[label].update(tokenize(text))
        return out

    def _similarity(self, a: int, b: int) -> float:
        va, vb = self.embeddings[a], self.embeddings[b]
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(np.dot(va, vb) / (na * nb))

    def topology_decision(self, prompt: TopologyPrompt) -> TopologyDecision:
        self.query_count += 1
        t = prompt.target
        delete_choice = None
        if prompt.neighbor_ids:
            # most relevant neighbor: highest similarity, ties to the lower id
            delete_choice = max(
                prompt.neighbor_ids, key=lambda n: (self._similarity(t, n), -n)
            )
        # least similar candidate first, ties to the lower id; skip any that
        # are already wired to the target (possible when the prompt was built
        # by hand rather than through build_topology_prompt)
        add_choice = None
        for cand in sorted(prompt.candidate_ids, key=lambda c: (self._similarity(t, c), c)):
            if cand != t and not self.graph.has_edge(t, cand):
                add_choice = cand
                break
        if add_choice is None:
            raise RetrievalExhaustedError(
                f"target {t}: every candidate is already adjacent"
            )
        summary = (
            f"neighbors of node {t} scored by embedding similarity; "
            f"candidates scored by embedding dissimilarity"
        )
        just = (
            f"delete {delete_choice} (most similar neighbor); "
            f"add {add_choice} (least similar candidate)"
        )
        return TopologyDecision(
            delete_choice=delete_choice,
            add_choice=add_choice,
            reasoning_summary=summary,
            justifications=just,
        )

    def _ranked_terms(self, text: str) -> list[str]:
        """Terms of one text ranked by its own TF-IDF weight, then alphabetically."""
        counts: dict[str, int] = {}
        for tok in tokenize(text):
            if tok in self.vocab.index:
                counts[tok] = counts.get(tok, 0) + 1
        return sorted(counts, key=lambda term: (-counts[term] * self.vocab.idf(term), term))

    def choose_keyword(self, influencer_text: str, target_label: int) -> str:
        """Highest-TF-IDF influencer term outside the target class's vocabulary."""
        ranked = self._ranked_terms(influencer_text)
        if not ranked:
            raise BackendError("influencer text has no in-vocabulary tokens")
        outside = [t for t in ranked if t not in self._class_tokens[target_label]]
        return outside[0] if outside else ranked[0]

    def text_decision(self, prompt: TextPrompt, budget: int) -> TextDecision:
        self.query_count += 1
        original = self.graph.texts[prompt.target]
        influencer_text = self.graph.texts[prompt.influencer]
        label = self.graph.labels[prompt.target]
        keyword = self.choose_keyword(influencer_text, label)
        extras = [t for t in self._ranked_terms(influencer_text) if t != keyword][:2]
        new_text = self._compose_rewrite(original, keyword, extras, budget)
        rationale = (
            f"keyword {keyword!r} carries the influencer's category; "
            f"kept a prefix of the original tokens"
        )
        return TextDecision(keyword=keyword, rewritten_text=new_text, rationale=rationale)

    @staticmethod
    def _compose_rewrite(
        original: str, keyword: str, extras: list[str], budget: int
    ) -> str:
        """Prefix of the original + keyword + extras, trimmed into budget.

        Extras are dropped first, then the kept prefix grows (fewer removals)
        until the token-set edit distance fits. Raises when even keeping the
        whole original cannot absorb the keyword insertion.
        """
        old_tokens = tokenize(original)
        old_set = set(old_tokens)
        n = len(old_tokens)
        kept_count = math.ceil(n / 2)
        extras = list(extras)

        def distinct(tokens: list[str]) -> list[str]:
            seen: set[str] = set()
            out = []
            for tok in tokens:
                if tok not in seen:
                    seen.add(tok)
                    out.append(tok)
            return out

        while True:
            kept = old_tokens[:kept_count]
            # set-level retention floor; duplicates early in the text can
            # make a length-based prefix cover too few distinct tokens
            while (
                old_set
                and len(set(kept) & old_set) / len(old_set) < RETENTION_FLOOR
                and kept_count < n
            ):
                kept_count += 1
                kept = old_tokens[:kept_count]
            tokens = distinct(kept + [keyword] + extras)
            candidate = " ".join(tokens)
            if token_edit_distance(original, candidate) <= budget:
                return candidate
            if extras:
                extras.pop()
            elif kept_count < n:
                kept_count += 1
            else:
                raise ConfigurationError(
                    f"text budget {budget} cannot absorb keyword {keyword!r}"
                )


@dataclass
class LLMConfig:
    model: str = "gpt-4o-mini"
    base_url: str | None = None
    temperature: float = 0.0
    timeout: float = 60.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    trace: bool = False

    def resolved_base_url(self) -> str:
        return self.base_url or os.environ.get(BASE_URL_ENV, DEFAULT_BASE_URL)


def _default_transport(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    import requests

    resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


def extract_json_object(content: str) -> dict:
    """Pull the first JSON object out of a completion, tolerating prose around it."""
    start = content.find("{")
    end = content.rfind("}")
    if start == -1 or end <= start:
        raise ValueError("no JSON object in response")
    obj = json.loads(content[start : end + 1])
    if not isinstance(obj, dict):
        raise ValueError("response JSON is not an object")
    return obj


REPROMPT_SUFFIX = (
    "\n\nYour previous reply could not be used ({reason}). "
    "Answer again with only the JSON object described above."
)


class LLMBackend(AttackerBackend):
    """Chat-completions client with retries and oracle fallback.

    `transport` may be injected for tests; it receives (url, headers, payload,
    timeout) and returns the decoded response body.
    """

    kind = "llm"

    def __init__(
        self,
        config: LLMConfig,
        fallback: OracleBackend,
        transport: Callable[..., dict] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        super().__init__()
        self.config = config
        self.fallback = fallback
        self.transport = transport or _default_transport
        self.sleep = sleep
        if transport is None and not os.environ.get(API_KEY_ENV):
            raise ConfigurationError(f"{API_KEY_ENV} is not set")

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, prompt_text: str) -> str:
        url = self.config.resolved_base_url().rstrip("/") + "/chat/completions"
        payload = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt_text}],
        }
        if self.config.trace:
            log.info("request %s", json.dumps(payload)[:2000])
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                self.retry_count += 1
                self.sleep(self.config.backoff_base * (2 ** (attempt - 1)))
            try:
                body = self.transport(url, self._headers(), payload, self.config.timeout)
                content = body["choices"][0]["message"]["content"]
                if self.config.trace:
                    log.info("response %s", json.dumps(content)[:2000])
                return content
            except Exception as exc:  # transport or shape failure; retry
                last_error = exc
        raise BackendError(
            f"backend failed after {self.config.max_attempts} attempts: {last_error}"
        )

    def topology_decision(self, prompt: TopologyPrompt) -> TopologyDecision:
        self.query_count += 1
        reason = ""
        text = prompt.text
        for _ in range(2):  # initial ask plus one corrective re-prompt
            content = self._complete(text)
            try:
                obj = extract_json_object(content)
                delete_id = obj.get("delete_id")
                delete_id = None if delete_id is None else int(delete_id)
                add_id = int(obj["add_id"])
            except (KeyError, TypeError, ValueError) as exc:
                reason = f"unparseable reply: {exc}"
            else:
                reason = validate_topology_decision(prompt, delete_id, add_id) or ""
                if not reason:
                    return TopologyDecision(
                        delete_choice=delete_id,
                        add_choice=add_id,
                        reasoning_summary=str(obj.get("rationale", "")),
                        justifications=str(obj.get("rationale", "")),
                    )
            self.retry_count += 1
            text = prompt.text + REPROMPT_SUFFIX.format(reason=reason)
        self.fallback_count += 1
        oracle = self.fallback.topology_decision(prompt)
        self.fallback.query_count -= 1  # accounted under this backend's counter
        return TopologyDecision(
            delete_choice=oracle.delete_choice,
            add_choice=oracle.add_choice,
            reasoning_summary=oracle.reasoning_summary,
            justifications=f"oracle fallback after: {reason}",
            fallback=True,
        )

    def text_decision(self, prompt: TextPrompt, budget: int) -> TextDecision:
        self.query_count += 1
        original = self.fallback.graph.texts[prompt.target]
        reason = ""
        text = prompt.text
        for _ in range(2):
            content = self._complete(text)
            try:
                obj = extract_json_object(content)
                keyword = str(obj["keyword"])
                new_text = str(obj["new_text"])
            except (KeyError, TypeError, ValueError) as exc:
                reason = f"unparseable reply: {exc}"
            else:
                reason = validate_text_decision(original, keyword, new_text, budget) or ""
                if not reason:
                    return TextDecision(
                        keyword=keyword,
                        rewritten_text=new_text,
                        rationale=str(obj.get("rationale", "")),
                    )
            self.retry_count += 1
            text = prompt.text + REPROMPT_SUFFIX.format(reason=reason)
        self.fallback_count += 1
        oracle = self.fallback.text_decision(prompt, budget)
        self.fallback.query_count -= 1
        return TextDecision(
            keyword=oracle.keyword,
            rewritten_text=oracle.rewritten_text,
            rationale=f"oracle fallback after: {reason}",
            fallback=True,
        )
