"""Shared fixtures: compile the C crashers once per session."""

from __future__ import annotations

import shutil
import subprocess
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
BUILD = FIXTURES / "build"

CRASHERS = ["crash_segv", "crash_assert", "crash_fpe", "recurse", "libframe"]

CFLAGS = ["-g", "-O0", "-fno-omit-frame-pointer"]


def _build_all() -> None:
    BUILD.mkdir(exist_ok=True)
    for name in CRASHERS:
        src = FIXTURES / f"{name}.c"
        out = BUILD / name
        if out.exists() and out.stat().st_mtime >= src.stat().st_mtime:
            continue
        subprocess.run(
            ["gcc", *CFLAGS, src.name, "-o", str(out)],
            cwd=FIXTURES, check=True,
        )
    proj = FIXTURES / "defproj"
    out = BUILD / "defproj"
    sources = [proj / "main.c", proj / "util.c"]
    if not out.exists() or any(s.stat().st_mtime > out.stat().st_mtime
                               for s in sources + [proj / "util.h"]):
        subprocess.run(
            ["gcc", *CFLAGS, "main.c", "util.c", "-o", str(out)],
            cwd=proj, check=True,
        )


@pytest.fixture(scope="session")
def fixture_bins() -> dict[str, Path]:
    """Map of fixture name to compiled executable path."""
    if shutil.which("gcc") is None or shutil.which("gdb") is None:
        pytest.skip("gcc and gdb are required for debugger fixtures")
    _build_all()
    bins = {name: BUILD / name for name in CRASHERS}
    bins["defproj"] = BUILD / "defproj"
    return bins


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
