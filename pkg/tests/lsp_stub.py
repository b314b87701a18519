#!/usr/bin/env python3
"""Minimal deterministic language server used by the test suite.

Speaks JSON-RPC with Content-Length framing over stdio.  Definition
queries are answered by a naive C scan of the workspace: .c files first,
then headers, first match wins, so results are stable run to run.
Supports initialize/initialized, textDocument/didOpen,
textDocument/definition, shutdown, and exit.  The method "test/never"
deliberately never answers, for client timeout tests.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path
from urllib.parse import unquote, urlparse
from urllib.request import pathname2url


def read_frame(stream):
    buf = b""
    while not buf.endswith(b"\r\n\r\n"):
        ch = stream.read(1)
        if not ch:
            return None
        buf += ch
    length = None
    for header in buf.split(b"\r\n"):
        name, _, value = header.partition(b":")
        if name.strip().lower() == b"content-length":
            length = int(value.strip())
    if length is None:
        return None
    return json.loads(stream.read(length))


def write_frame(stream, payload):
    body = json.dumps(payload).encode("utf-8")
    stream.write(b"Content-Length: %d\r\n\r\n" % len(body) + body)
    stream.flush()


def uri_to_path(uri: str) -> str:
    return unquote(urlparse(uri).path)


def path_to_uri(path: str) -> str:
    return "file:" + pathname2url(str(path))


def word_at(text: str, line0: int, character: int) -> str:
    lines = text.splitlines()
    if line0 >= len(lines):
        return ""
    for m in re.finditer(r"[A-Za-z_]\w*", lines[line0]):
        if m.start() <= character < m.end():
            return m.group(0)
    return ""


def _definition_patterns(sym: str) -> list[re.Pattern]:
    name = re.escape(sym)
    return [
        # function definition: prototype line not ending in ";"
        re.compile(rf"^[A-Za-z_][^;=]*\b{name}\s*\([^;]*$"),
        # variable definition at file scope, not an extern declaration
        re.compile(rf"^(?!extern\b)[A-Za-z_][\w\s\*]*\b{name}\s*(=|;|\[)"),
        # struct/union/enum or typedef introducing the name
        re.compile(rf"^(?:typedef\b.*\b{name}\s*;"
                   rf"|(?:struct|union|enum)\s+{name}\s*(\{{|;|$))"),
    ]


def find_definition(root: Path, sym: str):
    if not sym or root is None:
        return None
    patterns = _definition_patterns(sym)
    files = sorted(root.rglob("*.c")) + sorted(root.rglob("*.h"))
    for path in files:
        try:
            lines = path.read_text(encoding="utf-8",
                                   errors="replace").splitlines()
        except OSError:
            continue
        for lineno, line in enumerate(lines, start=1):
            for pattern in patterns:
                m = pattern.search(line)
                if m:
                    column = line.index(sym)
                    return path, lineno, column
    return None


def main() -> int:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    root: Path | None = None
    documents: dict[str, str] = {}

    while True:
        message = read_frame(stdin)
        if message is None:
            return 0
        method = message.get("method", "")
        params = message.get("params") or {}
        mid = message.get("id")

        if method == "initialize":
            uri = params.get("rootUri")
            if uri:
                root = Path(uri_to_path(uri))
            elif params.get("rootPath"):
                root = Path(params["rootPath"])
            write_frame(stdout, {"jsonrpc": "2.0", "id": mid, "result": {
                "capabilities": {"definitionProvider": True},
                "serverInfo": {"name": "dbgchat-test-stub"},
            }})
        elif method == "textDocument/didOpen":
            doc = params.get("textDocument") or {}
            documents[doc.get("uri", "")] = doc.get("text", "")
        elif method == "textDocument/definition":
            uri = params["textDocument"]["uri"]
            pos = params["position"]
            text = documents.get(uri)
            if text is None:
                try:
                    text = Path(uri_to_path(uri)).read_text(
                        encoding="utf-8", errors="replace")
                except OSError:
                    text = ""
            sym = word_at(text, pos["line"], pos["character"])
            found = find_definition(root, sym)
            result = []
            if found:
                path, lineno, column = found
                position = {"line": lineno - 1, "character": column}
                result = [{"uri": path_to_uri(path),
                           "range": {"start": position, "end": {
                               "line": lineno - 1,
                               "character": column + len(sym)}}}]
            write_frame(stdout, {"jsonrpc": "2.0", "id": mid,
                                 "result": result})
        elif method == "shutdown":
            write_frame(stdout, {"jsonrpc": "2.0", "id": mid, "result": None})
        elif method == "exit":
            return 0
        elif method == "test/never":
            pass
        elif mid is not None:
            write_frame(stdout, {"jsonrpc": "2.0", "id": mid, "error": {
                "code": -32601, "message": f"method not found: {method}"}})

    return 0


if __name__ == "__main__":
    sys.exit(main())
