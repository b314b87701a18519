"""Stateful debugging session: run the target, inspect the stopped stack.

Wraps the machine-interface driver with typed queries (frames, variables,
expression evaluation, console passthrough) and the run-to-stop protocol,
including exit-code decoding and failed-assertion detection.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import (
    BadFrameIndex,
    DebuggerExited,
    EvaluationError,
    NotStopped,
)
from .mi import (
    DriverConfig,
    MIRecord,
    RecordKind,
    DebuggerHandle,
    spawn_debugger,
)

log = logging.getLogger(__name__)

# Matches both common libc assertion-failure report styles; group 1 or 2
# captures the asserted expression.
DEFAULT_ASSERT_PATTERN = (
    r"Assertion failed: ([^\n(]+?)(?: \(.*)?$"
    r"|Assertion `(.+)' failed"
)

ASSERT_SCAN_LINES = 50


@dataclass
class Binding:
    """One variable visible in a frame, with gdb's textual value."""

    name: str
    value: str
    type: str = ""
    is_arg: bool = False

    @property
    def is_pointer(self) -> bool:
        return self.type.rstrip().endswith("*")


@dataclass
class Frame:
    level: int
    func: str
    file: str = ""
    fullname: str = ""
    line: int | None = None
    shared_lib: str = ""

    @property
    def has_source(self) -> bool:
        return bool(self.fullname or self.file)

    def location(self) -> str:
        if self.file and self.line is not None:
            return f"{self.file}:{self.line}"
        if self.shared_lib:
            return f"in {self.shared_lib}"
        return "at unknown location"


@dataclass
class StopInfo:
    """Why execution stopped.

    An assertion failure is a derived reason: an abort signal whose captured
    output matches the assertion-message pattern.  signal_name stays set.
    """

    kind: str  # "signal" | "assertion" | "exited" | "breakpoint" | "other"
    signal_name: str = ""
    signal_meaning: str = ""
    exit_code: int | None = None
    frame: Frame | None = None
    assertion_text: str = ""

    @property
    def is_crash(self) -> bool:
        return self.kind in ("signal", "assertion")

    def describe(self) -> str:
        if self.kind == "assertion":
            return (f'failed the assertion "{self.assertion_text}" and '
                    f"stopped on {self.signal_name}")
        if self.kind == "signal":
            desc = f"stopped on {self.signal_name}"
            if self.signal_meaning:
                desc += f" ({self.signal_meaning})"
            return desc
        if self.kind == "exited":
            return f"exited with code {self.exit_code}"
        if self.kind == "breakpoint":
            return "stopped at a breakpoint"
        return "stopped"


@dataclass
class SessionConfig:
    driver: DriverConfig = field(default_factory=DriverConfig)
    assertion_pattern: str = DEFAULT_ASSERT_PATTERN
    run_timeout: float = 60.0


def _frame_from_payload(payload: dict) -> Frame:
    # Source file and line travel together or not at all.
    file = payload.get("file", "")
    fullname = payload.get("fullname", "")
    line = payload.get("line")
    if not file or line is None:
        file, fullname, line = "", "", None
    return Frame(
        level=int(payload.get("level", "0")),
        func=payload.get("func", "??"),
        file=file,
        fullname=fullname,
        line=int(line) if line is not None else None,
        shared_lib=payload.get("from", ""),
    )


class DebugSession:
    """One debugger child attached to one target executable."""

    def __init__(self, executable: str, target_args: list[str] | None = None,
                 config: SessionConfig | None = None):
        self.config = config or SessionConfig()
        self.executable = executable
        self.handle: DebuggerHandle = spawn_debugger(
            executable, target_args, self.config.driver)
        self._stop: StopInfo | None = None

    # -- lifecycle ---------------------------------------------------------

    @property
    def stop(self) -> StopInfo | None:
        return self._stop

    @property
    def stopped(self) -> bool:
        """True when the inferior is paused with a live stack."""
        return self._stop is not None and self._stop.kind != "exited"

    def _require_stack(self) -> None:
        if not self.stopped:
            raise NotStopped("no stopped inferior; run the target first")

    def close(self) -> None:
        self.handle.close()

    def __enter__(self) -> "DebugSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- running -----------------------------------------------------------

    def run_to_stop(self, stdin_text: str | None = None) -> StopInfo:
        """Start the target and block until it stops or exits."""
        out = self.handle.send_command("-exec-run")
        if out.result_class == "error":
            raise DebuggerExited(out.result.payload.get("msg", "run failed"))
        if stdin_text is not None:
            self.handle.feed_target_input(stdin_text)
        records = self.handle.wait_for_async(
            lambda r: r.kind is RecordKind.ASYNC_EXEC and r.klass == "stopped",
            timeout=self.config.run_timeout,
        )
        stop_rec = next(r for r in records if r.klass == "stopped")
        self._stop = self._decode_stop(stop_rec)
        return self._stop

    def _decode_stop(self, rec: MIRecord) -> StopInfo:
        payload = rec.payload
        reason = payload.get("reason", "")
        frame = None
        if isinstance(payload.get("frame"), dict):
            frame = _frame_from_payload(payload["frame"])

        if reason == "signal-received":
            info = StopInfo(
                kind="signal",
                signal_name=payload.get("signal-name", ""),
                signal_meaning=payload.get("signal-meaning", ""),
                frame=frame,
            )
            if info.signal_name == "SIGABRT":
                info.assertion_text = self._detect_assertion()
                if info.assertion_text:
                    info.kind = "assertion"
            return info
        if reason in ("exited", "exited-normally", "exited-signalled"):
            code = 0
            if "exit-code" in payload:
                # gdb reports inferior exit codes in octal.
                code = int(payload["exit-code"], 8)
            return StopInfo(kind="exited", exit_code=code, frame=frame)
        if reason == "breakpoint-hit":
            return StopInfo(kind="breakpoint", frame=frame)
        return StopInfo(kind="other", frame=frame)

    def _detect_assertion(self) -> str:
        """Scan recent target output for a failed-assertion report."""
        text = self.handle.target_output(settle=0.5)
        tail = text.splitlines()[-ASSERT_SCAN_LINES:]
        pattern = re.compile(self.config.assertion_pattern)
        for line in reversed(tail):
            m = pattern.search(line)
            if m:
                for group in m.groups() or (m.group(0),):
                    if group:
                        return group.strip()
                return m.group(0).strip()
        return ""

    # -- stack inspection --------------------------------------------------

    def stack_depth(self, cap: int = 1000) -> int:
        self._require_stack()
        out = self.handle.send_command(f"-stack-info-depth {cap}")
        return int(out.result.payload.get("depth", "0"))

    def backtrace(self, limit: int | None = None) -> list[Frame]:
        self._require_stack()
        depth = self.stack_depth(cap=(limit or 1000))
        if depth == 0:
            return []
        hi = depth - 1 if limit is None else min(depth, limit) - 1
        out = self.handle.send_command(f"-stack-list-frames 0 {hi}")
        if out.result_class != "done":
            raise EvaluationError(out.result.payload.get("msg", "backtrace failed"))
        frames = []
        for entry in out.result.payload.get("stack", []):
            frames.append(_frame_from_payload(entry["frame"]))
        return frames

    def frame_variables(self, level: int) -> list[Binding]:
        """Locals and arguments of one frame, values filled in.

        Aggregate values (arrays, structs) are omitted by the listing
        command and fetched with a frame-scoped evaluation instead.
        """
        self._require_stack()
        out = self.handle.send_command(
            f"-stack-list-variables --thread 1 --frame {level} --simple-values")
        if out.result_class != "done":
            raise BadFrameIndex(out.result.payload.get("msg", str(level)))
        bindings = []
        for var in out.result.payload.get("variables", []):
            name = var["name"]
            value = var.get("value")
            if value is None:
                try:
                    value = self.evaluate(name, frame=level)
                except EvaluationError:
                    value = "<unreadable>"
            bindings.append(Binding(
                name=name,
                value=value,
                type=var.get("type", ""),
                is_arg=var.get("arg") == "1",
            ))
        return bindings

    def evaluate(self, expression: str, frame: int | None = None) -> str:
        """Evaluate an expression, optionally in a specific frame's scope."""
        scope = f"--thread 1 --frame {frame} " if frame is not None else ""
        out = self.handle.send_command(
            f"-data-evaluate-expression {scope}{_quote_mi_arg(expression)}")
        if out.result_class != "done":
            raise EvaluationError(out.result.payload.get("msg", expression))
        return out.result.payload.get("value", "")

    def global_variables(self, fullname: str, frame: int,
                         cap: int = 10) -> list[Binding]:
        """File-scope variables defined in one source file, capped.

        Values are read in the given frame's scope so file statics resolve.
        """
        self._require_stack()
        out = self.handle.send_command("-symbol-info-variables")
        if out.result_class != "done":
            return []
        symbols: list[tuple[int, str, str]] = []
        debug = out.result.payload.get("symbols", {}).get("debug", [])
        for entry in debug:
            if entry.get("fullname") != fullname:
                continue
            for sym in entry.get("symbols", []):
                symbols.append((int(sym.get("line", "0")), sym["name"],
                                sym.get("type", "")))
        symbols.sort()
        bindings = []
        for _, name, type_ in symbols[:cap]:
            try:
                value = self.evaluate(name, frame=frame)
            except EvaluationError:
                value = "<unreadable>"
            bindings.append(Binding(name=name, value=value, type=type_))
        return bindings

    def symbol_definition(self, name: str) -> tuple[str, int] | None:
        """Where a function, variable, or type with this name is defined.

        Returns (fullname, line) from the debug info, or None.
        """
        pattern = _quote_mi_arg("^" + re.escape(name) + "$")
        for command in (f"-symbol-info-functions --name {pattern}",
                        f"-symbol-info-variables --name {pattern}",
                        f"-symbol-info-types --name {pattern}"):
            out = self.handle.send_command(command)
            if out.result_class != "done":
                continue
            debug = out.result.payload.get("symbols", {}).get("debug", [])
            for entry in debug:
                fullname = entry.get("fullname") or entry.get("filename", "")
                for sym in entry.get("symbols", []):
                    if sym.get("name") == name and sym.get("line"):
                        return (fullname, int(sym["line"]))
        return None

    def selected_frame(self) -> Frame:
        self._require_stack()
        out = self.handle.send_command("-stack-info-frame")
        if out.result_class != "done":
            raise NotStopped(out.result.payload.get("msg", "no frame"))
        return _frame_from_payload(out.result.payload["frame"])

    def select_frame(self, level: int) -> None:
        self._require_stack()
        out = self.handle.send_command(f"-stack-select-frame {level}")
        if out.result_class != "done":
            raise BadFrameIndex(out.result.payload.get("msg", str(level)))

    # -- console passthrough ----------------------------------------------

    def execute_console(self, command: str) -> str:
        """Run one CLI debugger command, returning its console output.

        Commands that resume the target block until the next stop and
        refresh the recorded stop state.
        """
        out = self.handle.send_command(
            f"-interpreter-exec console {_quote_mi_arg(command)}")
        if out.result_class == "error":
            raise EvaluationError(out.result.payload.get("msg", command))
        if out.result_class == "running":
            records = self.handle.wait_for_async(
                lambda r: (r.kind is RecordKind.ASYNC_EXEC
                           and r.klass == "stopped"),
                timeout=self.config.run_timeout,
            )
            stop_rec = next(r for r in records if r.klass == "stopped")
            self._stop = self._decode_stop(stop_rec)
        return out.console_text

    def target_output(self, settle: float = 0.0) -> str:
        return self.handle.target_output(settle=settle)


def _quote_mi_arg(text: str) -> str:
    """Quote an argument for the MI command line."""
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'
