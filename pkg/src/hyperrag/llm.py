"""Chat-completion gateway: prompt templates, response parsers and backends.

Every request carries a correlation key built from the request kind and
the ids involved (question, entity, fact, depth). Real backends ignore it;
:class:`ScriptedBackend` uses it to look up a canned response.
"""

from __future__ import annotations

import json
import logging
import os
import re
import string
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .exceptions import BackendError, GatewayError, TransportError, UnscriptedRequestError

logger = logging.getLogger(__name__)

TEMPLATE_IDS = ("p_topic", "p_edge", "p_entity", "p_ctx", "p_answer_open", "p_answer_closed")
CLOSED_ANSWER_LIMIT = 10


# -- templates -------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str

    @property
    def fields(self) -> set[str]:
        return {name for _, name, _, _ in string.Formatter().parse(self.text) if name}

    def render(self, **values) -> str:
        missing = self.fields - values.keys()
        if missing:
            raise ValueError(f"template {self.id} missing values for {sorted(missing)}")
        return self.text.format(**{k: values[k] for k in self.fields})


def _strip_comments(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.startswith("#")).strip() + "\n"


def load_templates(directory=None) -> dict[str, PromptTemplate]:
    """Load the packaged templates, letting files in ``directory`` override them."""
    out = {}
    pkg = resources.files("hyperrag") / "prompts"
    for tid in TEMPLATE_IDS:
        src = pkg / f"{tid}.txt"
        if directory is not None and (Path(directory) / f"{tid}.txt").exists():
            src = Path(directory) / f"{tid}.txt"
        out[tid] = PromptTemplate(tid, _strip_comments(src.read_text(encoding="utf-8")))
    return out


# -- parsers ---------------------------------------------------------------

_NUMBER = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)")
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.+?)\s*$")
_VERDICT = re.compile(r"^[\s\"'*`]*(yes|no)\b[\s\"'*`.,:;!\u2014\u2013-]*(.*)$", re.IGNORECASE | re.DOTALL)


def _dedupe(items):
    out = []
    for it in items:
        it = it.strip()
        if it and it not in out:
            out.append(it)
    return out


def _json_list(text: str):
    start, end = text.find("["), text.rfind("]")
    if start == -1 or end < start:
        return None
    try:
        val = json.loads(text[start : end + 1])
    except json.JSONDecodeError:
        return None
    if not isinstance(val, list):
        return None
    return [str(v) for v in val if isinstance(v, (str, int, float))]


def parse_entity_list(text: str) -> tuple[list[str], bool]:
    """JSON array, else bullet or numbered lines. Returns (items, parsed_ok)."""
    items = _json_list(text)
    if items is None:
        items = [m.group(1) for line in text.splitlines() if (m := _BULLET.match(line))]
        if not items:
            return [], False
    return _dedupe(items), True


def parse_answer_list(text: str) -> list[str]:
    """Closed-mode answers: JSON array, else one per line with list markers removed."""
    items = _json_list(text)
    if items is None:
        items = []
        for line in text.splitlines():
            m = _BULLET.match(line)
            items.append(m.group(1) if m else line)
    return _dedupe(items)


def parse_score(text: str) -> tuple[float, bool]:
    """First decimal in the text clamped to [0, 1]; (0.0, False) if none."""
    m = _NUMBER.search(text or "")
    if not m:
        return 0.0, False
    return min(1.0, max(0.0, float(m.group(0)))), True


def parse_verdict(text: str) -> tuple[str, str, bool]:
    m = _VERDICT.match(text or "")
    if not m:
        return "no", "", False
    return m.group(1).lower(), m.group(2).strip(), True


# -- backends --------------------------------------------------------------


class ScriptedBackend:
    """Deterministic backend answering from a script keyed by request kind.

    ``script`` maps kind -> {key: response}. Lookup tries the exact key,
    then ``"<question id>:*"``, then ``"*"``; anything else raises.
    Lists are returned as JSON arrays, numbers as decimal text, ``None`` as
    an empty completion.
    """

    def __init__(self, script: dict):
        self.script = script
        self.calls = 0
        self.requests: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> ScriptedBackend:
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def lookup(self, kind: str, key: str):
        table = self.script.get(kind)
        if table is None:
            raise UnscriptedRequestError(f"{kind}:{key}")
        qid = key.split(":", 1)[0]
        for k in (key, f"{qid}:*", "*"):
            if k in table:
                return table[k]
        raise UnscriptedRequestError(f"{kind}:{key}")

    def complete(self, messages, *, kind: str, key: str) -> str:
        with self._lock:
            self.calls += 1
            self.requests.append((kind, key))
        val = self.lookup(kind, key)
        if val is None:
            return ""
        if isinstance(val, (list, dict)):
            return json.dumps(val)
        return str(val)


class HttpChatBackend:
    """OpenAI-compatible chat completions over HTTP."""

    def __init__(self, endpoint: str, model: str, api_key_env: str = "HYPERRAG_CHAT_API_KEY", timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(self, messages, *, kind: str, key: str) -> str:
        import httpx

        headers = {"X-Correlation-Id": f"{kind}:{key}"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = httpx.post(
                self.endpoint,
                json={"model": self.model, "messages": messages, "temperature": 0},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError) as exc:
            raise BackendError(f"unexpected chat response shape: {exc}") from exc


# -- gateway ---------------------------------------------------------------


@dataclass
class GatewayResponse:
    kind: str
    key: str
    raw: str
    parsed: object
    warning: bool = False
    attempts: int = 1
    usage: dict = field(default_factory=dict)


class LlmGateway:
    """Typed requests over a chat backend.

    Transport failures are retried up to ``retries`` attempts with
    exponential backoff; at most ``max_in_flight`` requests run at once.
    Parsed responses are appended to :attr:`history`.
    """

    def __init__(self, backend, templates=None, retries: int = 3, backoff: float = 0.5, max_in_flight: int = 4):
        self.backend = backend
        self.templates = templates if isinstance(templates, dict) else load_templates(templates)
        self.retries = retries
        self.backoff = backoff
        self.history: list[GatewayResponse] = []
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()

    def _call(self, kind: str, key: str, template: str, **values) -> tuple[str, int]:
        prompt = self.templates[template].render(**values)
        messages = [{"role": "user", "content": prompt}]
        for attempt in range(1, self.retries + 1):
            try:
                with self._slots:
                    return self.backend.complete(messages, kind=kind, key=key), attempt
            except TransportError as exc:
                if attempt == self.retries:
                    raise GatewayError(f"transport failure: {exc}", attempts=attempt, kind=kind) from exc
                logger.warning("%s request %s failed (attempt %d): %s", kind, key, attempt, exc)
                time.sleep(self.backoff * 2 ** (attempt - 1))

    def _record(self, resp: GatewayResponse):
        if resp.warning:
            logger.warning("unparseable %s response for %s: %r", resp.kind, resp.key, resp.raw[:80])
        with self._lock:
            self.history.append(resp)

    def topic_entities(self, q) -> list[str]:
        raw, n = self._call("topic", q.id, "p_topic", question=q.text)
        items, ok = parse_entity_list(raw)
        self._record(GatewayResponse("topic", q.id, raw, items, not ok, n))
        return items

    def score_edge(self, entity, fact, q) -> float:
        key = f"{q.id}:{entity.id}:{fact.id}"
        raw, n = self._call("edge", key, "p_edge", question=q.text, entity=entity.name, fact=fact.description)
        score, ok = parse_score(raw)
        self._record(GatewayResponse("edge", key, raw, score, not ok, n))
        return score

    def score_entity(self, fact, entity, q) -> float:
        key = f"{q.id}:{fact.id}:{entity.id}"
        raw, n = self._call("entity", key, "p_entity", question=q.text, entity=entity.name, fact=fact.description)
        score, ok = parse_score(raw)
        self._record(GatewayResponse("entity", key, raw, score, not ok, n))
        return score

    def sufficiency(self, context_text: str, q, depth: int = 1) -> tuple[str, str]:
        key = f"{q.id}:{depth}"
        raw, n = self._call("sufficiency", key, "p_ctx", question=q.text, context=context_text)
        verdict, reason, ok = parse_verdict(raw)
        self._record(GatewayResponse("sufficiency", key, raw, (verdict, reason), not ok, n))
        return verdict, reason

    def generate_answer(self, context_text: str, q, mode: str = "open"):
        """One answer string in open mode, a ranked list of names in closed mode."""
        if mode not in ("open", "closed"):
            raise ValueError(f"unknown answer mode {mode!r}")
        template = "p_answer_open" if mode == "open" else "p_answer_closed"
        raw, n = self._call("answer", q.id, template, question=q.text, context=context_text, limit=CLOSED_ANSWER_LIMIT)
        if not raw.strip():
            raise GatewayError("empty completion", attempts=n, kind="answer")
        parsed = raw.strip() if mode == "open" else parse_answer_list(raw)
        self._record(GatewayResponse("answer", q.id, raw, parsed, False, n))
        return parsed
