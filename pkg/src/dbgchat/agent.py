"""The command-processing loop: route input, run tool calls, stream prose.

User input is either a debugger command (executed directly, recorded in
the session history) or free text (sent to the model).  During a chat
turn the model may call the debug/code/definition tools; every executed
call is echoed to the user once and returned to the model once.  The
history accumulates between sends and is cleared exactly when a prompt
goes out.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Protocol

from .enrich import DEFAULT_FRAME_CAP, DEFAULT_RADIUS, build_enriched_stack
from .errors import DbgChatError, DebuggerError, LlmError, NotStopped
from .llm import ASSISTANT, TOOL, ChatMessage, ToolCallRequest, ToolSpec
from .prompts import (
    TokenBudget,
    PromptBundle,
    error_section,
    format_history,
    format_inputs,
    instructions_text,
    make_followup_prompt,
    make_initial_prompt,
)
from .sanitizer import DEFAULT_PREFIXES, RESUME_COMMANDS, SanitizerPolicy, \
    sanitize
from .source_nav import LspConnection, SourceLoc, code as code_window, \
    definition, parse_loc

TOOL_LOOP_CAP = 16

TOOLS = [
    ToolSpec("debug",
             "Run a debugger command on the stopped program and return "
             "its output.",
             [("command", "the debugger command to run")]),
    ToolSpec("code",
             "Show the source lines surrounding a location.",
             [("loc", "the location, in the form filename:lineno")]),
    ToolSpec("definition",
             "Show where the symbol occurring at a location is defined.",
             [("loc", "the location, in the form filename:lineno"),
              ("symbol", "the symbol to look up")]),
]

#: First words routed to the debugger instead of the chat.
KNOWN_COMMANDS = frozenset(DEFAULT_PREFIXES) | frozenset(RESUME_COMMANDS) | \
    frozenset({
        "break", "b", "tbreak", "delete", "disable", "enable", "condition",
        "watch", "rwatch", "awatch", "undisplay", "set", "disassemble",
        "directory", "source", "file", "ignore",
    })


def is_debugger_command(line: str) -> bool:
    words = line.split()
    if not words:
        return False
    return words[0].split("/", 1)[0] in KNOWN_COMMANDS


@dataclass
class SessionHistory:
    """Commands and outputs accumulated since the last prompt send."""

    entries: list[tuple[str, str]] = field(default_factory=list)

    def append(self, command: str, output: str) -> None:
        self.entries.append((command, output))

    def clear(self) -> None:
        self.entries.clear()

    def formatted(self) -> str:
        return format_history(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class DialogState:
    chat_in_progress: bool = False
    messages: list[ChatMessage] = field(default_factory=list)
    turn_count: int = 0


class Ui(Protocol):
    def on_prose(self, chunk: str) -> None: ...
    def on_echo(self, command: str, output: str) -> None: ...
    def on_debugger(self, command: str, output: str) -> None: ...
    def on_notice(self, text: str) -> None: ...
    def on_turn_end(self) -> None: ...


class Transcript:
    """Line-delimited structured log of the dialog, for replay audits."""

    def __init__(self, path: str):
        self._fh = open(path, "w", encoding="utf-8")

    def write(self, event: dict) -> None:
        self._fh.write(json.dumps(event, sort_keys=True, ensure_ascii=False)
                       + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


class _NoTranscript:
    def write(self, event: dict) -> None:
        pass

    def close(self) -> None:
        pass


@dataclass
class AgentConfig:
    workspace_root: str
    argv: list[str] = field(default_factory=list)
    stdin_text: str | None = None
    budget: TokenBudget | None = None
    radius: int = DEFAULT_RADIUS
    frame_cap: int = DEFAULT_FRAME_CAP
    tool_loop_cap: int = TOOL_LOOP_CAP


class Agent:
    """Wires one debugger session, one model backend, and one policy."""

    def __init__(self, session, backend, policy: SanitizerPolicy,
                 config: AgentConfig, ui: Ui,
                 lsp: LspConnection | None = None,
                 transcript: Transcript | None = None):
        self.session = session
        self.backend = backend
        self.policy = policy
        self.config = config
        self.ui = ui
        self.lsp = lsp
        self.transcript = transcript or _NoTranscript()
        self.history = SessionHistory()
        self.state = DialogState()
        self.transcript.write({
            "event": "config",
            "backend": backend.describe(),
            "policy": policy.mode.value,
        })

    # -- input routing -----------------------------------------------------

    def handle_input(self, line: str) -> None:
        """One REPL line: debugger command or chat text."""
        if not line.strip():
            return
        if is_debugger_command(line):
            output = self._user_command(line)
            self.ui.on_debugger(line, output)
            self.history.append(line, output)
            self.transcript.write({"event": "debugger", "command": line,
                                   "output": output})
            return
        self._chat(line)

    def _user_command(self, line: str) -> str:
        try:
            return self.session.execute_console(line)
        except DebuggerError as exc:
            return f"error: {exc}"

    # -- chat path ---------------------------------------------------------

    def _chat(self, line: str) -> None:
        history_text = self.history.formatted()
        if self.state.chat_in_progress:
            messages = make_followup_prompt(history_text, line)
        else:
            messages = make_initial_prompt(
                self._initial_bundle(line, history_text), self.config.budget)
        self.history.clear()
        self.state.chat_in_progress = True
        self.state.turn_count += 1
        self.state.messages.extend(messages)
        self.transcript.write({"event": "send",
                               "messages": [m.to_wire() for m in messages]})
        self._run_chat_turn()

    def _initial_bundle(self, line: str, history_text: str) -> PromptBundle:
        try:
            stack = build_enriched_stack(
                self.session, self.config.workspace_root,
                cap=self.config.frame_cap,
                radius=self.config.radius).render()
        except NotStopped:
            stack = ""
        return PromptBundle(
            instructions=instructions_text(),
            enriched_stack=stack,
            inputs=format_inputs(self.config.argv, self.config.stdin_text),
            error=error_section(self.session.stop),
            history=history_text,
            user_text=line,
        )

    def _run_chat_turn(self) -> str:
        final_parts: list[str] = []
        calls_made = 0
        while True:
            text_parts: list[str] = []
            calls: list[tuple[ToolCallRequest, str]] = []
            finish = "stop"
            try:
                for event in self.backend.complete(self.state.messages,
                                                   TOOLS):
                    if event.kind == "text":
                        text_parts.append(event.text)
                        self.ui.on_prose(event.text)
                    elif event.kind == "tool_call":
                        calls_made += 1
                        if calls_made > self.config.tool_loop_cap:
                            output = ("Tool-call limit reached for this "
                                      "turn; the command was not executed.")
                        else:
                            output = self._dispatch(event.tool_call)
                        calls.append((event.tool_call, output))
                    else:
                        finish = event.finish_reason
            except LlmError as exc:
                self._commit(text_parts, calls)
                self.ui.on_notice(f"chat turn ended: {exc}")
                self.ui.on_turn_end()
                self.transcript.write({"event": "turn_error",
                                       "error": str(exc)})
                return "".join(final_parts + text_parts)
            self._commit(text_parts, calls)
            final_parts.extend(text_parts)
            if finish == "tool_calls":
                if calls_made > self.config.tool_loop_cap:
                    self.ui.on_notice(
                        f"tool-call limit ({self.config.tool_loop_cap}) "
                        "reached; turn aborted")
                    self.ui.on_turn_end()
                    self.transcript.write({"event": "turn_aborted",
                                           "calls": calls_made})
                    return "".join(final_parts)
                continue
            final = "".join(final_parts)
            if final:
                self.transcript.write({"event": "prose", "text": final})
            self.ui.on_turn_end()
            return final

    def _commit(self, text_parts: list[str],
                calls: list[tuple[ToolCallRequest, str]]) -> None:
        """Append one completed assistant message plus its tool replies."""
        if not text_parts and not calls:
            return
        self.state.messages.append(ChatMessage(
            ASSISTANT, "".join(text_parts),
            tool_calls=[call for call, _ in calls]))
        for call, output in calls:
            self.state.messages.append(
                ChatMessage(TOOL, output, tool_call_id=call.id))

    # -- tool dispatch -----------------------------------------------------

    def _dispatch(self, call: ToolCallRequest) -> str:
        try:
            output = self._execute_tool(call)
        except DbgChatError as exc:
            output = f"error: {exc}"
        self.ui.on_echo(self._render_call(call), output)
        self.transcript.write({
            "event": "tool_call", "id": call.id, "name": call.name,
            "arguments": call.arguments, "output": output,
        })
        return output

    def _render_call(self, call: ToolCallRequest) -> str:
        if call.name == "debug":
            return call.arguments.get("command", "")
        if call.name == "code":
            return f"code {call.arguments.get('loc', '')}"
        return (f"definition {call.arguments.get('loc', '')} "
                f"{call.arguments.get('symbol', '')}")

    def _resolve_loc(self, text: str) -> SourceLoc:
        loc = parse_loc(text)
        if os.path.isabs(loc.file):
            return loc
        return SourceLoc(
            file=os.path.join(self.config.workspace_root, loc.file),
            line=loc.line)

    def _execute_tool(self, call: ToolCallRequest) -> str:
        if call.name == "debug":
            command = call.arguments["command"]
            verdict = sanitize(command, self.policy)
            if not verdict.allowed:
                return f"command not allowed: {verdict.reason}"
            try:
                output = self.session.execute_console(command)
            except DebuggerError as exc:
                return f"error: {exc}"
            return output if output.strip() else "(no output)"
        if call.name == "code":
            return code_window(self._resolve_loc(call.arguments["loc"]),
                               self.config.radius)
        found = definition(self._resolve_loc(call.arguments["loc"]),
                           call.arguments["symbol"],
                           lsp=self.lsp, session=self.session,
                           radius=self.config.radius)
        return f"{found.loc}\n{found.source}"
