"""Language-model access behind one narrow seam.

Three interchangeable backends: an HTTP client for the common
chat-completion JSON interface, a scripted mock keyed on action markers
for deterministic tests, and a transcript replayer that answers from a
recorded log with zero network use. Every request/response pair can be
appended to a transcript, which is what the replay backend consumes.

Mock embeddings are deterministic: sha256 of the text seeds a SplitMix64
generator, D uniform draws in [-1, 1) are L2-normalized. The scheme is
fixed so independent reference scripts can reproduce it exactly.
"""
from __future__ import annotations

import difflib
import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import httpx

from reqforge import specdoc

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.3
DEFAULT_TOP_P = 1.0
DEFAULT_MAX_TOKENS = 4096
DEFAULT_PENALTY = 0.0

_MARKER = re.compile("«([^»]+)»")  # «action_name»
_MASK = (1 << 64) - 1


class GatewayError(Exception):
    def __init__(self, message: str, retryable: bool = False,
                 status: int | str | None = None, attempt_count: int = 1):
        super().__init__(message)
        self.retryable = retryable
        self.status = status
        self.attempt_count = attempt_count


class DimensionMismatch(GatewayError):
    def __init__(self, message: str):
        super().__init__(message, retryable=False)


class ScriptMiss(GatewayError):
    def __init__(self, message: str):
        super().__init__(message, retryable=False)


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    completion_tokens: int

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    frequency_penalty: float = DEFAULT_PENALTY
    presence_penalty: float = DEFAULT_PENALTY

    def __post_init__(self):
        if not self.messages:
            raise ValueError("message list is empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens {self.max_tokens} < 1")

    def prompt_text(self) -> str:
        return "\n".join([self.system_prompt] + [text for _, text in self.messages])

    def to_record(self) -> dict:
        return {
            "system_prompt": self.system_prompt,
            "messages": [list(pair) for pair in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "frequency_penalty": self.frequency_penalty,
            "presence_penalty": self.presence_penalty,
        }


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: Usage
    attempt_count: int


def _canonical(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


# -- deterministic embedding scheme ---------------------------------------

def _splitmix64_uniforms(seed: int, count: int) -> list[float]:
    state = seed & _MASK
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        z = z ^ (z >> 31)
        out.append(2.0 * ((z >> 11) * (2.0 ** -53)) - 1.0)
    return out


def hash_embedding(text: str, dim: int) -> list[float]:
    """Unit vector derived only from the text; stable across processes."""
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    vec = _splitmix64_uniforms(seed, dim)
    norm = sum(x * x for x in vec) ** 0.5
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return [x / norm for x in vec]


# -- backends --------------------------------------------------------------

@dataclass
class _ScriptRule:
    match: str
    turn: int | None
    body: str
    used: bool = False
    line: int = 0


class MockBackend:
    """Scripted completions matched on «marker» substrings; hash embeddings."""

    def __init__(self, rules: list[_ScriptRule] | None = None, embedding_dim: int = 32):
        self._rules = rules or []
        self._marker_calls: dict[str, int] = {}
        self.embedding_dim = embedding_dim

    @classmethod
    def from_script(cls, path, embedding_dim: int = 32) -> "MockBackend":
        rules = []
        for section in specdoc.parse_file(path):
            if section.get("kind", "response") != "response":
                continue
            match = section.require("match")
            turn_raw = section.get("turn")
            turn = int(turn_raw) if turn_raw else None
            if not section.body:
                raise specdoc.ParseError(str(path), section.line, "response body is empty")
            rules.append(_ScriptRule(match=match, turn=turn, body=section.body,
                                     line=section.line))
        return cls(rules, embedding_dim=embedding_dim)

    def complete_once(self, request: CompletionRequest) -> tuple[str, Usage]:
        prompt = request.prompt_text()
        candidates = [rule for rule in self._rules if rule.match in prompt]
        if not candidates:
            found = [f"«{name}»" for name in _MARKER.findall(prompt)] or ["<no marker>"]
            known = [rule.match for rule in self._rules]
            best = None  # (similarity, prompt marker, rule marker)
            for wanted in found:
                for rule_match in known:
                    score = difflib.SequenceMatcher(None, wanted, rule_match).ratio()
                    if best is None or score > best[0]:
                        best = (score, wanted, rule_match)
            if best is None:
                raise ScriptMiss(f"no scripted response matches {found[0]}")
            raise ScriptMiss(f"no scripted response matches {best[1]}; "
                             f"closest rule is {best[2]}")
        marker = candidates[0].match
        call_index = self._marker_calls.get(marker, 0) + 1
        chosen = None
        for rule in candidates:
            if rule.turn is not None and rule.turn == call_index:
                chosen = rule
                break
            if rule.turn is None and not rule.used:
                chosen = rule
                break
        if chosen is None:
            raise ScriptMiss(
                f"script exhausted for {marker} at call {call_index}; "
                f"closest rule is the one at line {candidates[-1].line}")
        chosen.used = True
        self._marker_calls[marker] = call_index
        usage = Usage(prompt_tokens=len(prompt.split()),
                      completion_tokens=len(chosen.body.split()))
        return chosen.body, usage

    def embed_once(self, texts: Sequence[str]) -> list[list[float]]:
        return [hash_embedding(text, self.embedding_dim) for text in texts]


class ReplayBackend:
    """Answers every call from a recorded transcript, in order."""

    def __init__(self, records: list[dict]):
        self._records = records
        self._cursor = 0

    @classmethod
    def from_transcript(cls, path) -> "ReplayBackend":
        records = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    records.append(json.loads(line))
        return cls(records)

    def _next(self, op: str, request_record: dict) -> dict:
        if self._cursor >= len(self._records):
            raise GatewayError(f"transcript exhausted before {op} call "
                               f"{self._cursor + 1}", retryable=False,
                               status="replay-exhausted")
        record = self._records[self._cursor]
        self._cursor += 1
        if record.get("op") != op or _canonical(record.get("request", {})) != _canonical(request_record):
            raise GatewayError(
                f"replay mismatch at transcript record {record.get('n', self._cursor)}: "
                f"the run diverged from the recording", retryable=False,
                status="replay-mismatch")
        return record["response"]

    def complete_once(self, request: CompletionRequest) -> tuple[str, Usage]:
        response = self._next("complete", request.to_record())
        usage = response.get("usage", {})
        return response["text"], Usage(usage.get("prompt_tokens", 0),
                                       usage.get("completion_tokens", 0))

    def embed_once(self, texts: Sequence[str]) -> list[list[float]]:
        response = self._next("embed", {"texts": list(texts)})
        return response["vectors"]


class HttpBackend:
    """Plain chat-completion / embeddings JSON API client."""

    def __init__(self, base_url: str, model: str, embed_model: str = "",
                 api_key_env: str = "LLM_API_KEY", timeout: float = 60.0,
                 client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.embed_model = embed_model or model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(f"{self.base_url}{path}", json=payload,
                                         headers=self._headers())
        except httpx.HTTPError as exc:
            raise GatewayError(f"transport failure: {exc}", retryable=True,
                               status="transport") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise GatewayError(f"server busy: HTTP {response.status_code}",
                               retryable=True, status=response.status_code)
        if response.status_code >= 400:
            raise GatewayError(f"request rejected: HTTP {response.status_code}: "
                               f"{response.text[:400]}",
                               retryable=False, status=response.status_code)
        return response.json()

    def complete_once(self, request: CompletionRequest) -> tuple[str, Usage]:
        messages = [{"role": "system", "content": request.system_prompt}]
        messages += [{"role": speaker, "content": text} for speaker, text in request.messages]
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
            "frequency_penalty": request.frequency_penalty,
            "presence_penalty": request.presence_penalty,
        }
        data = self._post("/chat/completions", payload)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed completion response: {exc}",
                               retryable=False, status="bad-payload") from exc
        usage = data.get("usage", {})
        return text, Usage(usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0))

    def embed_once(self, texts: Sequence[str]) -> list[list[float]]:
        data = self._post("/embeddings", {"model": self.embed_model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda row: row.get("index", 0))
            return [row["embedding"] for row in rows]
        except (KeyError, TypeError) as exc:
            raise GatewayError(f"malformed embedding response: {exc}",
                               retryable=False, status="bad-payload") from exc


class Gateway:
    """Retry, concurrency cap, and transcript logging around a backend."""

    def __init__(self, backend, transcript_path=None, retry_limit: int = 3,
                 sleeper=time.sleep, max_concurrency: int = 4):
        self.backend = backend
        self.retry_limit = retry_limit
        self._sleeper = sleeper
        self._semaphore = threading.BoundedSemaphore(max_concurrency)
        self._lock = threading.Lock()
        self._transcript_path = transcript_path
        self._transcript_n = 0
        self.call_count = 0
        self.token_count = 0

    def _with_retries(self, call, describe: str):
        last_error: GatewayError | None = None
        for attempt in range(1, self.retry_limit + 1):
            try:
                with self._semaphore:
                    return call(), attempt
            except GatewayError as exc:
                if not exc.retryable:
                    exc.attempt_count = attempt
                    raise
                last_error = exc
                if attempt < self.retry_limit:
                    delay = 2 ** (attempt - 1)  # 1s, 2s, 4s
                    logger.warning("%s failed (attempt %d/%d), retrying in %ds: %s",
                                   describe, attempt, self.retry_limit, delay, exc)
                    self._sleeper(delay)
        assert last_error is not None
        last_error.attempt_count = self.retry_limit
        raise last_error

    def _log(self, op: str, request_record: dict, response_record: dict) -> None:
        if self._transcript_path is None:
            return
        with self._lock:
            self._transcript_n += 1
            record = {"n": self._transcript_n, "op": op,
                      "request": request_record, "response": response_record}
            with open(self._transcript_path, "a", encoding="utf-8") as handle:
                handle.write(_canonical(record) + "\n")

    def complete(self, request: CompletionRequest) -> CompletionResult:
        (text, usage), attempts = self._with_retries(
            lambda: self.backend.complete_once(request), "completion")
        with self._lock:
            self.call_count += 1
            self.token_count += usage.total_tokens
        self._log("complete", request.to_record(),
                  {"text": text, "usage": {"prompt_tokens": usage.prompt_tokens,
                                           "completion_tokens": usage.completion_tokens}})
        return CompletionResult(text=text, usage=usage, attempt_count=attempts)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise ValueError("embedding batch is empty")
        for position, text in enumerate(texts):
            if not text:
                raise ValueError(f"embedding batch item {position} is empty")
        vectors, _ = self._with_retries(
            lambda: self.backend.embed_once(texts), "embedding")
        if len(vectors) != len(texts):
            raise DimensionMismatch(
                f"backend returned {len(vectors)} vectors for {len(texts)} texts")
        lengths = {len(vector) for vector in vectors}
        if len(lengths) > 1:
            raise DimensionMismatch(f"mixed embedding dimensions {sorted(lengths)}")
        self._log("embed", {"texts": list(texts)}, {"vectors": [list(v) for v in vectors]})
        return [list(vector) for vector in vectors]

    def embed_fn(self):
        """The (texts) -> vectors callable shape the metrics take."""
        return lambda texts: self.embed(texts)
