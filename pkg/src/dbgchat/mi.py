"""GDB machine-interface (MI) driver.

Spawns GDB with ``--interpreter=mi``, parses its line-oriented output into
structured records, and serializes commands one at a time.  The inferior's
own stdin/stdout/stderr are routed through a pty so that target output
never interleaves with protocol traffic.

Record grammar (one line each, mirroring the MI output syntax):

    (gdb)                prompt
    [token]^class,...    result record
    [token]*class,...    exec async record
    [token]=class,...    notify async record
    [token]+class,...    status async record (normalized to notify)
    ~"text"              console stream
    @"text"              target stream
    &"text"              log stream

Any line matching none of these degrades to a LogStream record tagged
``unparsed`` so that raw target chatter or future protocol extensions can
never break a session.
"""

from __future__ import annotations

import logging
import os
import pty
import queue
import selectors
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

from .errors import (
    CommandInFlight,
    CommandTimeout,
    DebuggerExited,
    DebuggerNotFound,
    ProtocolHandshakeFailed,
    TargetNotFound,
)

log = logging.getLogger(__name__)

DEFAULT_COMMAND_TIMEOUT = 30.0
HANDSHAKE_TIMEOUT = 15.0

# Values are plain Python: unescaped strings for constants, insertion-ordered
# dicts for tuples, lists for lists.
MIValue = Union[str, dict, list]


class RecordKind(Enum):
    RESULT = "result"
    ASYNC_EXEC = "async-exec"
    ASYNC_NOTIFY = "async-notify"
    CONSOLE_STREAM = "console-stream"
    TARGET_STREAM = "target-stream"
    LOG_STREAM = "log-stream"
    PROMPT = "prompt"


_KIND_SIGILS = {
    RecordKind.RESULT: "^",
    RecordKind.ASYNC_EXEC: "*",
    RecordKind.ASYNC_NOTIFY: "=",
}

_STREAM_SIGILS = {
    RecordKind.CONSOLE_STREAM: "~",
    RecordKind.TARGET_STREAM: "@",
    RecordKind.LOG_STREAM: "&",
}


@dataclass
class MIRecord:
    """One parsed record of the MI output stream."""

    kind: RecordKind
    token: int | None = None
    klass: str = ""
    payload: dict = field(default_factory=dict)
    # Unnamed payload values, as emitted by legacy records like +download,{...}.
    positional: list = field(default_factory=list)
    text: str = ""          # stream records only
    unparsed: bool = False  # LogStream fallback for lines outside the grammar

    def serialize(self) -> str:
        """Render the record back to one protocol line (no newline).

        Parsing the result yields a record equal to this one; the textual
        form is normalized, not necessarily byte-identical to the input.
        """
        if self.unparsed:
            return self.text
        if self.kind is RecordKind.PROMPT:
            return "(gdb) "
        if self.kind in _STREAM_SIGILS:
            return _STREAM_SIGILS[self.kind] + _escape_cstring(self.text)
        sigil = _KIND_SIGILS[self.kind]
        head = "" if self.token is None else str(self.token)
        out = f"{head}{sigil}{self.klass}"
        parts = [_serialize_value(v) for v in self.positional]
        parts += [f"{k}={_serialize_value(v)}" for k, v in self.payload.items()]
        if parts:
            out += "," + ",".join(parts)
        return out


@dataclass
class MIOutput:
    """All records produced by one command, ending with the prompt."""

    records: list[MIRecord]

    @property
    def result(self) -> MIRecord | None:
        for r in self.records:
            if r.kind is RecordKind.RESULT:
                return r
        return None

    @property
    def result_class(self) -> str:
        r = self.result
        return r.klass if r else ""

    @property
    def console_text(self) -> str:
        """Concatenated console-stream text, for display."""
        return "".join(
            r.text for r in self.records if r.kind is RecordKind.CONSOLE_STREAM
        )

    def async_records(self, klass: str | None = None) -> list[MIRecord]:
        out = []
        for r in self.records:
            if r.kind in (RecordKind.ASYNC_EXEC, RecordKind.ASYNC_NOTIFY):
                if klass is None or r.klass == klass:
                    out.append(r)
        return out


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_C_UNESCAPE = {
    "n": "\n", "t": "\t", "r": "\r", "f": "\f", "v": "\v",
    "a": "\a", "b": "\b", "e": "\x1b", '"': '"', "'": "'", "\\": "\\",
}


def _parse_cstring(line: str, pos: int) -> tuple[str, int]:
    """Decode the c-string starting at line[pos] (must be '\"')."""
    assert line[pos] == '"'
    pos += 1
    out: list[str] = []
    n = len(line)
    while pos < n:
        ch = line[pos]
        if ch == '"':
            return "".join(out), pos + 1
        if ch == "\\" and pos + 1 < n:
            nxt = line[pos + 1]
            if nxt in _C_UNESCAPE:
                out.append(_C_UNESCAPE[nxt])
                pos += 2
                continue
            if nxt == "x":
                digits = ""
                p = pos + 2
                while p < n and len(digits) < 2 and line[p] in "0123456789abcdefABCDEF":
                    digits += line[p]
                    p += 1
                if digits:
                    out.append(chr(int(digits, 16)))
                    pos = p
                    continue
            if nxt.isdigit():
                digits = ""
                p = pos + 1
                while p < n and len(digits) < 3 and line[p] in "01234567":
                    digits += line[p]
                    p += 1
                out.append(chr(int(digits, 8)))
                pos = p
                continue
            # Unknown escape: keep the escaped character.
            out.append(nxt)
            pos += 2
            continue
        out.append(ch)
        pos += 1
    raise ValueError("unterminated c-string")


def _escape_cstring(text: str) -> str:
    out = ['"']
    for ch in text:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append("\\%03o" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _is_name_char(ch: str) -> bool:
    return ch.isalnum() or ch in "_-"


def _parse_value(line: str, pos: int) -> tuple[MIValue, int]:
    ch = line[pos]
    if ch == '"':
        return _parse_cstring(line, pos)
    if ch == "{":
        return _parse_tuple(line, pos)
    if ch == "[":
        return _parse_list(line, pos)
    raise ValueError(f"expected value at column {pos}")


def _parse_tuple(line: str, pos: int) -> tuple[dict, int]:
    assert line[pos] == "{"
    pos += 1
    out: dict = {}
    if pos < len(line) and line[pos] == "}":
        return out, pos + 1
    while True:
        name, pos = _parse_name(line, pos)
        if pos >= len(line) or line[pos] != "=":
            raise ValueError(f"expected '=' at column {pos}")
        value, pos = _parse_value(line, pos + 1)
        out[name] = value
        if pos < len(line) and line[pos] == ",":
            pos += 1
            continue
        if pos < len(line) and line[pos] == "}":
            return out, pos + 1
        raise ValueError(f"expected ',' or '}}' at column {pos}")


def _parse_list(line: str, pos: int) -> tuple[list, int]:
    assert line[pos] == "["
    pos += 1
    out: list = []
    if pos < len(line) and line[pos] == "]":
        return out, pos + 1
    while True:
        # List elements are either bare values or name=value results; the
        # latter are normalized to single-entry tuples so that repeated
        # names (e.g. frame=... entries) survive.
        if line[pos] in '"{[':
            value, pos = _parse_value(line, pos)
        else:
            name, pos = _parse_name(line, pos)
            if pos >= len(line) or line[pos] != "=":
                raise ValueError(f"expected '=' at column {pos}")
            inner, pos = _parse_value(line, pos + 1)
            value = {name: inner}
        out.append(value)
        if pos < len(line) and line[pos] == ",":
            pos += 1
            continue
        if pos < len(line) and line[pos] == "]":
            return out, pos + 1
        raise ValueError(f"expected ',' or ']' at column {pos}")


def _parse_name(line: str, pos: int) -> tuple[str, int]:
    start = pos
    while pos < len(line) and _is_name_char(line[pos]):
        pos += 1
    if pos == start:
        raise ValueError(f"expected name at column {pos}")
    return line[start:pos], pos


def _parse_results(line: str, pos: int) -> tuple[dict, list]:
    named: dict = {}
    positional: list = []
    while pos < len(line):
        if line[pos] in '"{[':
            value, pos = _parse_value(line, pos)
            positional.append(value)
        else:
            name, pos = _parse_name(line, pos)
            if pos >= len(line) or line[pos] != "=":
                raise ValueError(f"expected '=' at column {pos}")
            value, pos = _parse_value(line, pos + 1)
            named[name] = value
        if pos < len(line):
            if line[pos] != ",":
                raise ValueError(f"expected ',' at column {pos}")
            pos += 1
    return named, positional


def _serialize_value(value: MIValue) -> str:
    if isinstance(value, str):
        return _escape_cstring(value)
    if isinstance(value, dict):
        return "{" + ",".join(f"{k}={_serialize_value(v)}" for k, v in value.items()) + "}"
    if isinstance(value, list):
        parts = []
        for item in value:
            if isinstance(item, dict) and len(item) == 1:
                ((k, v),) = item.items()
                parts.append(f"{k}={_serialize_value(v)}")
            else:
                parts.append(_serialize_value(item))
        return "[" + ",".join(parts) + "]"
    raise TypeError(f"not an MI value: {value!r}")


def parse_mi_line(line: str) -> MIRecord:
    """Parse one complete MI output line (without trailing newline).

    Total by construction: anything outside the grammar comes back as a
    LogStream record tagged unparsed, never an exception.
    """
    try:
        return _parse_mi_line_strict(line)
    except Exception:
        return MIRecord(kind=RecordKind.LOG_STREAM, text=line, unparsed=True)


def _parse_mi_line_strict(line: str) -> MIRecord:
    if line == "(gdb)" or line == "(gdb) ":
        return MIRecord(kind=RecordKind.PROMPT)
    if not line:
        raise ValueError("empty line")

    ch = line[0]
    if ch == "~":
        return MIRecord(kind=RecordKind.CONSOLE_STREAM, text=_parse_whole_cstring(line, 1))
    if ch == "@":
        return MIRecord(kind=RecordKind.TARGET_STREAM, text=_parse_whole_cstring(line, 1))
    if ch == "&":
        return MIRecord(kind=RecordKind.LOG_STREAM, text=_parse_whole_cstring(line, 1))

    pos = 0
    token: int | None = None
    while pos < len(line) and line[pos].isdigit():
        pos += 1
    if pos > 0:
        token = int(line[:pos])
    if pos >= len(line):
        raise ValueError("token with no record")

    sigil = line[pos]
    if sigil == "^":
        kind = RecordKind.RESULT
    elif sigil == "*":
        kind = RecordKind.ASYNC_EXEC
    elif sigil in "=+":
        kind = RecordKind.ASYNC_NOTIFY
    else:
        raise ValueError(f"unknown sigil {sigil!r}")
    pos += 1

    klass, pos = _parse_class(line, pos)
    payload: dict = {}
    positional: list = []
    if pos < len(line):
        if line[pos] != ",":
            raise ValueError(f"expected ',' after class at column {pos}")
        payload, positional = _parse_results(line, pos + 1)
    return MIRecord(kind=kind, token=token, klass=klass, payload=payload,
                    positional=positional)


def _parse_class(line: str, pos: int) -> tuple[str, int]:
    start = pos
    while pos < len(line) and (line[pos].isalnum() or line[pos] == "-"):
        pos += 1
    if pos == start:
        raise ValueError("empty class")
    return line[start:pos], pos


def _parse_whole_cstring(line: str, pos: int) -> str:
    if pos >= len(line) or line[pos] != '"':
        raise ValueError("stream record without c-string")
    text, end = _parse_cstring(line, pos)
    if end != len(line):
        raise ValueError("trailing bytes after c-string")
    return text


# --------------------------------------------------------------------------
# Process driver
# --------------------------------------------------------------------------

@dataclass
class DriverConfig:
    """Launch configuration for the debugger child process."""

    debugger: str = "gdb"
    command_timeout: float = DEFAULT_COMMAND_TIMEOUT
    handshake_timeout: float = HANDSHAKE_TIMEOUT
    transcript_path: str | None = None
    cwd: str | None = None
    env: dict[str, str] | None = None  # None: minimal reproducible environment


def _default_env() -> dict[str, str]:
    # Trimmed environment so that spawned sessions (and inferior stack
    # layouts) are reproducible across runs.
    env = {"LC_ALL": "C", "TERM": "dumb", "COLUMNS": "200"}
    for key in ("PATH", "HOME"):
        if key in os.environ:
            env[key] = os.environ[key]
    return env


class DebuggerHandle:
    """A live debugger child speaking MI on stdio.

    One command may be in flight at a time; a reader thread drains stdout
    into a queue so records are delivered in arrival order.  The inferior
    is wired to a pty whose output is captured separately.
    """

    def __init__(self, proc: subprocess.Popen, tty_master: int,
                 tty_slave: int = -1, transcript: "object | None" = None):
        self._proc = proc
        self._records: queue.Queue[MIRecord | None] = queue.Queue()
        self._tty_master = tty_master
        # Held open so the master never sees EOF while the session lives.
        self._tty_slave = tty_slave
        self._target_buf: list[str] = []
        self._target_lock = threading.Lock()
        self._transcript = transcript
        self._in_flight = threading.Lock()
        self._eof = threading.Event()
        self._closed = False

        self._reader = threading.Thread(target=self._pump_stdout, daemon=True)
        self._reader.start()
        self._tty_reader = threading.Thread(target=self._pump_tty, daemon=True)
        self._tty_reader.start()

    # -- liveness ----------------------------------------------------------

    @property
    def pid(self) -> int:
        return self._proc.pid

    @property
    def alive(self) -> bool:
        return self._proc.poll() is None and not self._eof.is_set()

    # -- reader threads ----------------------------------------------------

    def _pump_stdout(self) -> None:
        stream = self._proc.stdout
        assert stream is not None
        buf = b""
        while True:
            chunk = os.read(stream.fileno(), 65536) if not stream.closed else b""
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                raw, buf = buf.split(b"\n", 1)
                if self._transcript is not None:
                    try:
                        self._transcript.write(raw + b"\n")
                        self._transcript.flush()
                    except ValueError:
                        pass  # closed underneath us during shutdown
                line = raw.decode("utf-8", "replace").rstrip("\r")
                self._records.put(parse_mi_line(line))
        self._eof.set()
        self._records.put(None)

    def _pump_tty(self) -> None:
        sel = selectors.DefaultSelector()
        try:
            sel.register(self._tty_master, selectors.EVENT_READ)
        except (ValueError, OSError):
            return
        while not self._eof.is_set():
            if not sel.select(timeout=0.1):
                continue
            try:
                chunk = os.read(self._tty_master, 65536)
            except OSError:
                break
            if not chunk:
                break
            text = chunk.decode("utf-8", "replace").replace("\r\n", "\n")
            with self._target_lock:
                self._target_buf.append(text)

    # -- target I/O --------------------------------------------------------

    def target_output(self, settle: float = 0.0) -> str:
        """Everything the inferior wrote to its tty so far.

        The pty is drained by a polling thread, so output can trail the MI
        stop record by a few milliseconds.  A nonzero settle waits until the
        buffer stops growing or the deadline passes.
        """
        deadline = time.monotonic() + settle
        while True:
            with self._target_lock:
                size = len(self._target_buf)
            if time.monotonic() >= deadline:
                break
            time.sleep(0.03)
            with self._target_lock:
                if len(self._target_buf) == size and self._target_buf:
                    break
        with self._target_lock:
            return "".join(self._target_buf)

    def feed_target_input(self, text: str, close: bool = True) -> None:
        """Write text to the inferior's stdin; optionally signal EOF."""
        os.write(self._tty_master, text.encode())
        if close:
            if not text.endswith("\n"):
                os.write(self._tty_master, b"\n")
            os.write(self._tty_master, b"\x04")  # pty EOF

    # -- protocol ----------------------------------------------------------

    def read_until_prompt(self, timeout: float) -> list[MIRecord]:
        """Collect records up to and including the next prompt."""
        deadline = time.monotonic() + timeout
        records: list[MIRecord] = []
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise CommandTimeout(
                    f"no prompt within {timeout:.0f}s ({len(records)} records so far)"
                )
            try:
                rec = self._records.get(timeout=min(remaining, 0.25))
            except queue.Empty:
                if not self.alive:
                    raise DebuggerExited("debugger terminated mid-stream")
                continue
            if rec is None:
                raise DebuggerExited("debugger closed its output stream")
            records.append(rec)
            if rec.kind is RecordKind.PROMPT:
                return records

    def send_command(self, command: str,
                     timeout: float = DEFAULT_COMMAND_TIMEOUT) -> MIOutput:
        """Send one MI command and return all records up to the prompt."""
        if not self.alive:
            raise DebuggerExited("debugger is not running")
        if not self._in_flight.acquire(blocking=False):
            raise CommandInFlight(f"command already outstanding: {command!r}")
        try:
            data = command.encode() + b"\n"
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(data)
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError) as exc:
                raise DebuggerExited(str(exc)) from exc
            return MIOutput(records=self.read_until_prompt(timeout))
        finally:
            self._in_flight.release()

    def wait_for_async(self, predicate: Callable[[MIRecord], bool],
                       timeout: float) -> list[MIRecord]:
        """Read prompt-terminated batches until one contains a matching record.

        Returns every record seen, including the batch with the match.
        """
        deadline = time.monotonic() + timeout
        seen: list[MIRecord] = []
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise CommandTimeout("no matching async record before deadline")
            batch = self.read_until_prompt(remaining)
            seen.extend(batch)
            if any(predicate(r) for r in batch):
                return seen

    # -- shutdown ----------------------------------------------------------

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(b"-gdb-exit\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError, OSError):
                pass
            try:
                self._proc.wait(timeout=3)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait(timeout=3)
        self._eof.set()
        for fd in (self._tty_master, self._tty_slave):
            if fd < 0:
                continue
            try:
                os.close(fd)
            except OSError:
                pass
        if self._transcript is not None:
            try:
                self._transcript.close()
            except Exception:
                pass

    def __enter__(self) -> "DebuggerHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def spawn_debugger(executable: str, target_args: list[str] | None = None,
                   config: DriverConfig | None = None) -> DebuggerHandle:
    """Start the debugger on a target and consume the first prompt.

    The target is loaded (symbols read) but not yet running.
    """
    cfg = config or DriverConfig()
    target_args = target_args or []

    if not os.path.exists(executable):
        raise TargetNotFound(f"target executable not found: {executable}")
    if shutil.which(cfg.debugger) is None:
        raise DebuggerNotFound(f"debugger not found on PATH: {cfg.debugger}")

    master, slave = pty.openpty()
    slave_name = os.ttyname(slave)

    transcript = None
    if cfg.transcript_path:
        transcript = open(cfg.transcript_path, "ab")

    argv = [cfg.debugger, "--nx", "--quiet", "--interpreter=mi",
            "--args", executable, *target_args]
    try:
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            cwd=cfg.cwd,
            env=cfg.env if cfg.env is not None else _default_env(),
        )
    except FileNotFoundError as exc:
        os.close(master)
        os.close(slave)
        raise DebuggerNotFound(
            f"debugger not found on PATH: {cfg.debugger}") from exc

    handle = DebuggerHandle(proc, tty_master=master, tty_slave=slave,
                            transcript=transcript)
    try:
        handle.read_until_prompt(cfg.handshake_timeout)
        out = handle.send_command(f"-inferior-tty-set {slave_name}",
                                  timeout=cfg.handshake_timeout)
        if out.result_class != "done":
            raise ProtocolHandshakeFailed(f"tty setup failed: {out.result_class}")
    except (CommandTimeout, DebuggerExited) as exc:
        handle.close()
        raise ProtocolHandshakeFailed(str(exc)) from exc
    except Exception:
        handle.close()
        raise
    return handle
