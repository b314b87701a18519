"""Build the enriched stack trace sent to the model.

Takes a stopped session and produces, frame by frame: a numbered source
window with the current line marked, every variable with its declared type
and a depth/width-limited value, and (for the outermost user frame) global
variables.  Runs of library frames, frames without source, and frames
beyond the depth cap collapse into hidden-frame markers.

Layout, top to bottom, outermost frame first:

    [... skipping 2 hidden frame(s)]

    main.c(31)main()
         26 ...
    ---> 31 ...

       Variables in this frame:
         argc: int = 1

       Global variables:
         table_size: int = 9

    > util.c(9)checksum()
      ...
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NotStopped, SourceUnavailable
from .session import Binding, Frame
from .values import RenderedValue, render_value

DEFAULT_RADIUS = 5
DEFAULT_FRAME_CAP = 200
DEFAULT_GLOBALS_CAP = 10
DEPTH_PROBE_CAP = 10000


def source_window(path: str, line: int, radius: int = DEFAULT_RADIUS) -> str:
    """A numbered source block around line, the line itself marked.

    The window spans 2*radius lines, clamped at file boundaries but kept at
    full size whenever the file allows it.
    """
    try:
        with open(path, encoding="utf-8", errors="replace") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SourceUnavailable(path) from exc
    if not 1 <= line <= len(lines):
        raise SourceUnavailable(f"{path}:{line} is past end of file")

    size = 2 * radius
    start = max(1, line - radius)
    end = min(len(lines), start + size - 1)
    start = max(1, end - size + 1)
    width = len(str(end))
    out = []
    for num in range(start, end + 1):
        prefix = "---> " if num == line else "     "
        out.append(f"{prefix}{str(num).rjust(width)} {lines[num - 1]}".rstrip())
    return "\n".join(out)


@dataclass
class EnrichedFrame:
    frame: Frame
    window: str | None
    bindings: list[tuple[str, str, RenderedValue]]
    globals: list[tuple[str, str, RenderedValue]] = field(default_factory=list)
    marked: bool = False

    def render(self) -> str:
        head = f"{self.frame.file}({self.frame.line}){self.frame.func}()"
        if self.marked:
            head = "> " + head
        parts = [head]
        if self.window:
            parts.append(self.window)
        body = "\n".join(parts)
        for title, bindings in (("Variables in this frame:", self.bindings),
                                ("Global variables:", self.globals)):
            if not bindings:
                continue
            lines = [f"   {title}"]
            for name, type_, value in bindings:
                decl = f"{name}: {type_}" if type_ else name
                lines.append(f"     {decl} = {value.text}")
            body += "\n\n" + "\n".join(lines)
        return body


@dataclass
class ElisionMarker:
    hidden_count: int

    def render(self) -> str:
        return f"[... skipping {self.hidden_count} hidden frame(s)]"


@dataclass
class EnrichedStack:
    entries: list[EnrichedFrame | ElisionMarker]
    total_frames: int

    @property
    def shown_count(self) -> int:
        return sum(1 for e in self.entries if isinstance(e, EnrichedFrame))

    @property
    def hidden_count(self) -> int:
        return sum(e.hidden_count for e in self.entries
                   if isinstance(e, ElisionMarker))

    def render(self) -> str:
        return "\n\n".join(e.render() for e in self.entries)


def is_user_frame(frame: Frame, workspace_root: str) -> bool:
    """A frame is user code when its source file lives under the root.

    The debugger reports resolvable sources with absolute paths; library
    frames often carry relative build-tree paths, which never qualify.
    """
    if not frame.has_source or frame.line is None:
        return False
    path = frame.fullname or frame.file
    if not os.path.isabs(path):
        return False
    root = os.path.abspath(workspace_root)
    try:
        return Path(os.path.normpath(path)).is_relative_to(root)
    except ValueError:
        return False


def _dedup(bindings: list[Binding]) -> list[Binding]:
    seen: set[str] = set()
    out = []
    for b in bindings:
        if b.name in seen:
            continue
        seen.add(b.name)
        out.append(b)
    return out


def _render_bindings(bindings: list[Binding],
                     evaluator) -> list[tuple[str, str, RenderedValue]]:
    out = []
    for b in _dedup(bindings):
        rendered = render_value(b.name, b.value, is_pointer=b.is_pointer,
                                evaluator=evaluator)
        out.append((b.name, b.type, rendered))
    return out


def build_enriched_stack(session, workspace_root: str,
                         cap: int = DEFAULT_FRAME_CAP,
                         radius: int = DEFAULT_RADIUS,
                         globals_cap: int = DEFAULT_GLOBALS_CAP) -> EnrichedStack:
    """Enrich the stopped session's stack.  Raises NotStopped otherwise."""
    if not session.stopped:
        raise NotStopped("cannot enrich a stack without a stopped target")
    total = session.stack_depth(cap=DEPTH_PROBE_CAP)
    frames = session.backtrace(limit=cap)

    entries: list[EnrichedFrame | ElisionMarker] = []
    pending_hidden = total - len(frames)  # frames beyond the cap, outermost
    for frame in reversed(frames):
        if not is_user_frame(frame, workspace_root):
            pending_hidden += 1
            continue
        if pending_hidden:
            entries.append(ElisionMarker(pending_hidden))
            pending_hidden = 0
        entries.append(_enrich_frame(session, frame, radius))
    if pending_hidden:
        entries.append(ElisionMarker(pending_hidden))

    shown = [e for e in entries if isinstance(e, EnrichedFrame)]
    if shown:
        shown[-1].marked = True
        outer = shown[0]
        raw_globals = session.global_variables(
            outer.frame.fullname, frame=outer.frame.level, cap=globals_cap)
        outer.globals = _render_bindings(
            raw_globals, _evaluator_for(session, outer.frame.level))
    return EnrichedStack(entries=entries, total_frames=total)


def _evaluator_for(session, level: int):
    def evaluate(expression: str) -> str:
        return session.evaluate(expression, frame=level)
    return evaluate


def _enrich_frame(session, frame: Frame, radius: int) -> EnrichedFrame:
    try:
        window = source_window(frame.fullname or frame.file, frame.line,
                               radius)
    except SourceUnavailable:
        window = None
    bindings = _render_bindings(session.frame_variables(frame.level),
                                _evaluator_for(session, frame.level))
    return EnrichedFrame(frame=frame, window=window, bindings=bindings)
