"""Command-line entry point: flags, startup, the interactive loop.

Startup spawns the debugger on the target, runs to the first stop, prints
a short stop report, and hands control to the read-eval loop.  Lines are
routed to the debugger or to the model by the agent; EOF or "quit" ends
the session and the debugger child with it.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

from . import PROMPT, __version__
from .agent import Agent, AgentConfig, Transcript
from .enrich import DEFAULT_FRAME_CAP, DEFAULT_RADIUS, is_user_frame
from .errors import DbgChatError, DebuggerError, AuthError
from .llm import HttpBackend, HttpConfig, ScriptedBackend
from .prompts import TokenBudget
from .sanitizer import (
    SanitizerPolicy,
    load_whitelist,
    native_strict,
    unsafe_policy,
    whitelist,
)
from .session import DebugSession, Frame


@dataclass
class Config:
    """Everything the session needs, resolved from flags and environment."""

    target: str
    target_args: list[str] = field(default_factory=list)
    model: str = "gpt-4o"
    base_url: str = "https://api.openai.com/v1"
    key_env: str = "OPENAI_API_KEY"
    root: str = ""
    unsafe: bool = False
    whitelist_path: str | None = None
    script_path: str | None = None
    log_path: str | None = None
    budget: int | None = None
    radius: int = DEFAULT_RADIUS
    stdin_path: str | None = None

    def __post_init__(self) -> None:
        if self.unsafe and self.whitelist_path:
            raise ValueError(
                "--unsafe and --whitelist are mutually exclusive")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("--budget must be positive")
        if not self.root:
            self.root = os.getcwd()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbgchat",
        description="Debug a crashing program with a chat assistant "
                    "driving gdb.",
        epilog='Everything after "--" is passed to the target program.')
    parser.add_argument("target", help="executable to debug")
    parser.add_argument("target_args", nargs="*", metavar="arg",
                        help="arguments for the target")
    parser.add_argument("--model", default="gpt-4o",
                        help="model name sent to the provider")
    parser.add_argument("--base-url", default="https://api.openai.com/v1",
                        help="chat-completions endpoint root")
    parser.add_argument("--key-env", default="OPENAI_API_KEY",
                        metavar="NAME",
                        help="environment variable holding the API key")
    parser.add_argument("--root", metavar="DIR",
                        help="directory whose sources count as user code "
                             "(default: current directory)")
    parser.add_argument("--unsafe", action="store_true",
                        help="run model commands without sanitizing")
    parser.add_argument("--whitelist", metavar="FILE",
                        help="also allow calls to functions listed in FILE, "
                             "one name per line")
    parser.add_argument("--script", metavar="FILE",
                        help="replay model turns from FILE instead of "
                             "calling the network")
    parser.add_argument("--log", metavar="FILE",
                        help="write a structured transcript to FILE")
    parser.add_argument("--budget", type=int, metavar="TOKENS",
                        help="prompt token budget (default 16000)")
    parser.add_argument("--radius", type=int, default=DEFAULT_RADIUS,
                        metavar="LINES",
                        help="source lines shown around a location")
    parser.add_argument("--stdin-file", metavar="FILE",
                        help="feed FILE to the target's standard input")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    return parser


def _config_from_args(ns: argparse.Namespace) -> Config:
    return Config(
        target=ns.target,
        target_args=ns.target_args,
        model=ns.model,
        base_url=ns.base_url,
        key_env=ns.key_env,
        root=os.path.abspath(ns.root) if ns.root else "",
        unsafe=ns.unsafe,
        whitelist_path=ns.whitelist,
        script_path=ns.script,
        log_path=ns.log,
        budget=ns.budget,
        radius=ns.radius,
        stdin_path=ns.stdin_file,
    )


class TerminalUi:
    """Prose streams flush-left; tool echoes are arrow-marked and indented."""

    def __init__(self, out=None):
        self.out = out or sys.stdout
        self._line_open = False

    def _write(self, text: str) -> None:
        self.out.write(text)
        self.out.flush()

    def _break_line(self) -> None:
        if self._line_open:
            self._write("\n")
            self._line_open = False

    def on_prose(self, chunk: str) -> None:
        if not chunk:
            return
        self._write(chunk)
        self._line_open = not chunk.endswith("\n")

    def on_echo(self, command: str, output: str) -> None:
        self._break_line()
        block = "".join(f"   {line}\n" for line in output.splitlines())
        self._write(f"→ {command}\n{block}")

    def on_debugger(self, command: str, output: str) -> None:
        if output and not output.endswith("\n"):
            output += "\n"
        self._write(output)

    def on_notice(self, text: str) -> None:
        self._break_line()
        self._write(f"[{text}]\n")

    def on_turn_end(self) -> None:
        self._break_line()


def _innermost_user_frame(session: DebugSession, root: str) -> Frame | None:
    if not session.stopped:
        return None
    try:
        for frame in session.backtrace(limit=DEFAULT_FRAME_CAP):
            if is_user_frame(frame, root):
                return frame
    except DebuggerError:
        return None
    return None


def stop_report(session: DebugSession, root: str) -> str:
    stop = session.stop
    if stop is None:
        return "The program did not stop."
    lines = [f"The program {stop.describe()}."]
    frame = _innermost_user_frame(session, root)
    if frame is not None:
        lines.append(f"  at {frame.location()} in {frame.func}()")
    return "\n".join(lines)


def run_repl(agent: Agent, in_stream, out) -> None:
    echo_input = not in_stream.isatty()
    while True:
        out.write(PROMPT)
        out.flush()
        try:
            line = in_stream.readline()
        except KeyboardInterrupt:
            out.write("\n")
            continue
        if not line:
            out.write("\n")
            return
        line = line.rstrip("\n")
        if echo_input:
            out.write(line + "\n")
        if line.strip() in ("quit", "exit"):
            return
        try:
            agent.handle_input(line)
        except KeyboardInterrupt:
            out.write("\n[turn interrupted]\n")


def _build_policy(config: Config) -> SanitizerPolicy:
    if config.unsafe:
        return unsafe_policy(True)
    if config.whitelist_path:
        return whitelist(load_whitelist(config.whitelist_path))
    return native_strict()


def _build_backend(config: Config):
    if config.script_path:
        return ScriptedBackend(config.script_path)
    if not os.environ.get(config.key_env):
        raise AuthError(
            f"no API key: set the {config.key_env} environment variable "
            "or pass --script")
    return HttpBackend(HttpConfig(base_url=config.base_url,
                                  model=config.model,
                                  api_key_env=config.key_env))


def _run(config: Config, in_stream, out) -> int:
    stdin_text = None
    if config.stdin_path:
        with open(config.stdin_path, encoding="utf-8") as fh:
            stdin_text = fh.read()
    # Configuration problems must surface before a debugger child exists.
    policy = _build_policy(config)
    backend = _build_backend(config)
    budget = None
    if config.budget is not None:
        budget = TokenBudget(max_tokens=config.budget)
    transcript = Transcript(config.log_path) if config.log_path else None

    session = DebugSession(config.target, config.target_args)
    try:
        session.run_to_stop(stdin_text)
        out.write(stop_report(session, config.root) + "\n")
        agent = Agent(
            session, backend, policy,
            AgentConfig(workspace_root=config.root,
                        argv=config.target_args,
                        stdin_text=stdin_text,
                        budget=budget,
                        radius=config.radius),
            TerminalUi(out), transcript=transcript)
        run_repl(agent, in_stream, out)
    finally:
        if transcript is not None:
            transcript.close()
        session.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config = _config_from_args(ns)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return _run(config, sys.stdin, sys.stdout)
    except (DbgChatError, OSError, ValueError) as exc:
        print(f"dbgchat: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
