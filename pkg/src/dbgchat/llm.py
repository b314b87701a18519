"""Chat-completion client with tool calling, plus a scripted test backend.

Speaks the de-facto chat-completions wire shape over HTTPS with streamed
chunks.  The provider base URL and model name are configuration; nothing
provider-specific is hard-coded.  The scripted backend replays pre-authored
turns from a JSON file for deterministic, network-free runs.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Iterator, Protocol

from .errors import (
    AuthError,
    MalformedToolArgs,
    RateLimited,
    ScriptExhausted,
    ScriptParseError,
    TransportError,
)

log = logging.getLogger(__name__)

SYSTEM = "system"
USER = "user"
ASSISTANT = "assistant"
TOOL = "tool"

SCRIPT_VERSION = 1


@dataclass
class ToolCallRequest:
    id: str
    name: str
    arguments: dict


@dataclass
class ChatMessage:
    role: str
    content: str = ""
    tool_call_id: str | None = None           # Tool role only
    tool_calls: list[ToolCallRequest] = field(default_factory=list)

    def to_wire(self) -> dict:
        msg: dict = {"role": self.role, "content": self.content}
        if self.tool_call_id is not None:
            msg["tool_call_id"] = self.tool_call_id
        if self.tool_calls:
            msg["tool_calls"] = [
                {
                    "id": c.id,
                    "type": "function",
                    "function": {"name": c.name,
                                 "arguments": json.dumps(c.arguments)},
                }
                for c in self.tool_calls
            ]
        return msg


@dataclass
class ToolSpec:
    """A callable the model may invoke; all parameters are text."""

    name: str
    description: str
    parameters: list[tuple[str, str]]  # (param name, param description)

    def to_wire(self) -> dict:
        props = {name: {"type": "string", "description": desc}
                 for name, desc in self.parameters}
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": props,
                    "required": [name for name, _ in self.parameters],
                },
            },
        }


@dataclass
class CompletionEvent:
    kind: str  # "text" | "tool_call" | "done"
    text: str = ""
    tool_call: ToolCallRequest | None = None
    finish_reason: str = ""


class Backend(Protocol):
    def complete(self, messages: list[ChatMessage],
                 tools: list[ToolSpec]) -> Iterator[CompletionEvent]:
        ...


def _validate_tool_call(call: ToolCallRequest, tools: list[ToolSpec]) -> None:
    spec = next((t for t in tools if t.name == call.name), None)
    if spec is None:
        raise MalformedToolArgs(f"unknown tool {call.name!r}")
    if not isinstance(call.arguments, dict):
        raise MalformedToolArgs(f"{call.name}: arguments are not an object")
    for name, _ in spec.parameters:
        if name not in call.arguments:
            raise MalformedToolArgs(f"{call.name}: missing argument {name!r}")
        if not isinstance(call.arguments[name], str):
            raise MalformedToolArgs(f"{call.name}: argument {name!r} is not text")


def validate_conversation(messages: list[ChatMessage]) -> None:
    """Check tool-call pairing: every issued call id gets exactly one
    Tool reply before any other non-Tool message appears."""
    pending: list[str] = []
    for msg in messages:
        if msg.role == TOOL:
            if msg.tool_call_id is None:
                raise ValueError("Tool message without tool_call_id")
            if not pending or pending[0] != msg.tool_call_id:
                raise ValueError(
                    f"Tool reply {msg.tool_call_id!r} does not match the "
                    f"pending call order {pending!r}")
            pending.pop(0)
            continue
        if pending:
            raise ValueError(f"unanswered tool calls: {pending!r}")
        if msg.role == ASSISTANT and msg.tool_calls:
            pending = [c.id for c in msg.tool_calls]
    if pending:
        raise ValueError(f"conversation ends with unanswered calls: {pending!r}")


# --------------------------------------------------------------------------
# HTTP backend
# --------------------------------------------------------------------------

@dataclass
class HttpConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    retry_cap: int = 3
    temperature: float | None = None


class HttpBackend:
    """Streams chat completions from an HTTP provider."""

    def __init__(self, config: HttpConfig):
        self.config = config

    def describe(self) -> dict:
        cfg = self.config
        return {"backend": "http", "base_url": cfg.base_url,
                "model": cfg.model,
                "temperature": cfg.temperature if cfg.temperature is not None
                else "provider-default"}

    def complete(self, messages: list[ChatMessage],
                 tools: list[ToolSpec]) -> Iterator[CompletionEvent]:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise AuthError(
                f"no API key in ${self.config.api_key_env}; set it or use "
                "a scripted backend")
        body: dict = {
            "model": self.config.model,
            "messages": [m.to_wire() for m in messages],
            "stream": True,
        }
        if tools:
            body["tools"] = [t.to_wire() for t in tools]
        if self.config.temperature is not None:
            body["temperature"] = self.config.temperature

        response = self._post_with_retry(key, body)
        try:
            yield from self._stream_events(response, tools)
        finally:
            response.close()

    def _post_with_retry(self, key: str, body: dict):
        import requests

        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {key}",
                   "Content-Type": "application/json"}
        attempt = 0
        while True:
            try:
                response = requests.post(url, json=body, headers=headers,
                                         stream=True,
                                         timeout=self.config.timeout)
            except requests.RequestException as exc:
                attempt += 1
                if attempt > self.config.retry_cap:
                    raise TransportError(str(exc)) from exc
                time.sleep(min(2.0, 0.2 * attempt))
                continue
            if response.status_code == 401:
                raise AuthError("provider rejected the API key")
            if response.status_code == 429:
                header = response.headers.get("Retry-After")
                try:
                    retry_after = float(header) if header else None
                except ValueError:
                    retry_after = None
                attempt += 1
                if attempt > self.config.retry_cap:
                    raise RateLimited("provider throttled the request",
                                      retry_after=retry_after)
                time.sleep(retry_after if retry_after is not None else 1.0)
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"HTTP {response.status_code}: {response.text[:400]}")
            return response

    def _stream_events(self, response, tools) -> Iterator[CompletionEvent]:
        partial: dict[int, dict] = {}
        finish = ""
        for raw in response.iter_lines(decode_unicode=True):
            if not raw or not raw.startswith("data:"):
                continue
            data = raw[len("data:"):].strip()
            if data == "[DONE]":
                break
            try:
                chunk = json.loads(data)
            except json.JSONDecodeError as exc:
                raise TransportError(f"bad stream chunk: {data[:200]}") from exc
            choices = chunk.get("choices") or []
            if not choices:
                continue
            choice = choices[0]
            delta = choice.get("delta") or {}
            if delta.get("content"):
                yield CompletionEvent(kind="text", text=delta["content"])
            for piece in delta.get("tool_calls") or []:
                slot = partial.setdefault(piece.get("index", 0),
                                          {"id": "", "name": "", "args": ""})
                if piece.get("id"):
                    slot["id"] = piece["id"]
                fn = piece.get("function") or {}
                if fn.get("name"):
                    slot["name"] += fn["name"]
                if fn.get("arguments"):
                    slot["args"] += fn["arguments"]
            if choice.get("finish_reason"):
                finish = choice["finish_reason"]
        for index in sorted(partial):
            slot = partial[index]
            try:
                arguments = json.loads(slot["args"] or "{}")
            except json.JSONDecodeError as exc:
                raise MalformedToolArgs(
                    f"{slot['name']}: undecodable arguments "
                    f"{slot['args'][:200]!r}") from exc
            call = ToolCallRequest(id=slot["id"] or f"call_{index}",
                                   name=slot["name"], arguments=arguments)
            _validate_tool_call(call, tools)
            yield CompletionEvent(kind="tool_call", tool_call=call)
        yield CompletionEvent(kind="done", finish_reason=finish or "stop")


# --------------------------------------------------------------------------
# Scripted backend
# --------------------------------------------------------------------------

class ScriptedBackend:
    """Replays pre-authored turns; turn k of the dialog yields entry k.

    Script format (JSON):
        {"version": 1,
         "turns": [[{"text": "..."} | {"tool_call": {"name": "...",
                                                     "arguments": {...}}},
                    ...], ...]}
    """

    def __init__(self, script_path: str):
        self.path = script_path
        try:
            with open(script_path, encoding="utf-8") as fh:
                script = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ScriptParseError(f"{script_path}: {exc}") from exc
        if not isinstance(script, dict) or script.get("version") != SCRIPT_VERSION:
            raise ScriptParseError(
                f"{script_path}: expected version {SCRIPT_VERSION}")
        turns = script.get("turns")
        if not isinstance(turns, list):
            raise ScriptParseError(f"{script_path}: turns must be a list")
        for i, turn in enumerate(turns):
            if not isinstance(turn, list):
                raise ScriptParseError(f"{script_path}: turn {i} not a list")
            for item in turn:
                if not isinstance(item, dict) or not (
                        "text" in item or "tool_call" in item):
                    raise ScriptParseError(
                        f"{script_path}: turn {i} has a bad item: {item!r}")
        self.turns: list[list[dict]] = turns
        self.turn_index = 0

    def describe(self) -> dict:
        return {"backend": "script", "script": os.path.basename(self.path),
                "turns": len(self.turns)}

    def complete(self, messages: list[ChatMessage],
                 tools: list[ToolSpec]) -> Iterator[CompletionEvent]:
        if self.turn_index >= len(self.turns):
            raise ScriptExhausted(
                f"script has only {len(self.turns)} turn(s)")
        turn = self.turns[self.turn_index]
        index = self.turn_index
        self.turn_index += 1
        had_tool_call = False
        for i, item in enumerate(turn):
            if "text" in item:
                yield CompletionEvent(kind="text", text=item["text"])
                continue
            spec = item["tool_call"]
            call = ToolCallRequest(id=f"call_{index}_{i}",
                                   name=spec.get("name", ""),
                                   arguments=spec.get("arguments", {}))
            _validate_tool_call(call, tools)
            had_tool_call = True
            yield CompletionEvent(kind="tool_call", tool_call=call)
        yield CompletionEvent(
            kind="done",
            finish_reason="tool_calls" if had_tool_call else "stop")
