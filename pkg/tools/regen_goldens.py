#!/usr/bin/env python3
"""Regenerate the reviewed enriched-stack goldens from live sessions.

Run after intentionally changing fixtures or the enrichment renderer, then
review the diff before committing.  The fixtures are designed so that no
varying data (addresses, absolute paths) appears in the output.

Usage: python3 tools/regen_goldens.py
"""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from dbgchat.enrich import build_enriched_stack  # noqa: E402
from dbgchat.session import DebugSession  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = ROOT / "tests" / "data" / "golden"

CRASHERS = ["crash_segv", "crash_fpe", "crash_assert"]


def main() -> int:
    subprocess.run([sys.executable, "-c",
                    "import sys; sys.path.insert(0, 'tests'); "
                    "import conftest; conftest._build_all()"],
                   cwd=ROOT, check=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for name in CRASHERS:
        with DebugSession(str(FIXTURES / "build" / name)) as session:
            session.run_to_stop()
            stack = build_enriched_stack(session, str(FIXTURES))
        out = GOLDEN / f"{name}.stack.txt"
        out.write_text(stack.render() + "\n")
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
