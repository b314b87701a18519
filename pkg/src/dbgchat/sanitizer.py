"""Vet model-issued debugger commands before they reach the debugger.

Three policies: NativeStrict allows read-only inspection commands and
rejects anything containing a function call; Whitelist additionally
permits calls to an explicit set of function names; Unsafe allows
everything and can only be constructed when the user passed --unsafe.
Call detection is lexical and deliberately conservative: over-denial is
acceptable, silent execution of target code is not.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass


class Mode(enum.Enum):
    NATIVE_STRICT = "native-strict"
    WHITELIST = "whitelist"
    UNSAFE = "unsafe"


#: Read-only inspection commands the model may run.
DEFAULT_PREFIXES = frozenset({
    "bt", "backtrace", "where", "up", "down", "frame", "f",
    "p", "print", "output", "list", "l", "info", "x",
    "ptype", "whatis", "display", "show", "help", "echo",
})

#: First words that would resume or otherwise alter target execution.
RESUME_COMMANDS = frozenset({
    "run", "r", "start", "continue", "c", "step", "s", "next", "n",
    "finish", "until", "u", "advance", "jump", "return", "call",
    "kill", "detach", "attach",
})


class _Universal:
    """Membership sentinel that contains every command."""

    def __contains__(self, item: object) -> bool:
        return True

    def __repr__(self) -> str:
        return "ALL_COMMANDS"


ALL_COMMANDS = _Universal()


@dataclass(frozen=True)
class Verdict:
    allowed: bool
    reason: str = ""


_ALLOW = Verdict(True)


def _deny(reason: str) -> Verdict:
    return Verdict(False, reason)


@dataclass(frozen=True)
class SanitizerPolicy:
    mode: Mode
    functions: frozenset[str] = frozenset()
    prefixes: frozenset[str] = DEFAULT_PREFIXES
    unsafe_ack: bool = False

    def __post_init__(self):
        if self.mode is Mode.UNSAFE and not self.unsafe_ack:
            raise ValueError("unsafe mode requires the --unsafe flag")


def native_strict() -> SanitizerPolicy:
    return SanitizerPolicy(Mode.NATIVE_STRICT)


def whitelist(functions) -> SanitizerPolicy:
    return SanitizerPolicy(Mode.WHITELIST, functions=frozenset(functions))


def unsafe_policy(flag_given: bool) -> SanitizerPolicy:
    if not flag_given:
        raise ValueError("unsafe mode requires the --unsafe flag")
    return SanitizerPolicy(Mode.UNSAFE, unsafe_ack=True)


def allowed_command_prefixes(mode: Mode):
    if mode is Mode.UNSAFE:
        return ALL_COMMANDS
    return DEFAULT_PREFIXES


# An identifier directly before "(" is a call; sizeof and friends are
# operators with call-like spelling.  ")(" and "](" catch calls through
# pointers, at the cost of over-denying parenthesized casts.
_CALL = re.compile(r"\b([A-Za-z_]\w*)\s*\(")
_INDIRECT_CALL = re.compile(r"[\)\]]\s*\(")
_CALL_EXEMPT = frozenset({
    "sizeof", "alignof", "_Alignof", "typeof", "__typeof__", "offsetof",
})


def called_functions(text: str) -> list[str]:
    """Names of all functions a command would call, in order."""
    return [m.group(1) for m in _CALL.finditer(text)
            if m.group(1) not in _CALL_EXEMPT]


def sanitize(command: str, policy: SanitizerPolicy) -> Verdict:
    """Decide whether the debugger may see this command.  Pure and total."""
    if policy.mode is Mode.UNSAFE:
        return _ALLOW
    text = command.strip()
    if not text:
        return _deny("empty command")
    # "p/x foo" carries its format in the first word; strip it for lookup.
    parts = text.split(None, 1)
    expression = parts[1] if len(parts) > 1 else ""
    word = parts[0].split("/", 1)[0]
    if word not in policy.prefixes:
        if word in RESUME_COMMANDS:
            return _deny(f"'{word}' resumes or alters target execution")
        return _deny(f"'{word}' is not an allowed command")
    if _INDIRECT_CALL.search(expression):
        return _deny("indirect function call")
    permitted = policy.functions if policy.mode is Mode.WHITELIST \
        else frozenset()
    for name in called_functions(expression):
        if name not in permitted:
            if policy.mode is Mode.WHITELIST:
                return _deny(f"calls function '{name}', which is not on "
                             "the whitelist")
            return _deny(f"calls function '{name}'")
    return _ALLOW


def load_whitelist(path: str) -> frozenset[str]:
    """Read one function name per line; blanks and # comments ignored."""
    names = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not re.fullmatch(r"[A-Za-z_]\w*", line):
                raise ValueError(
                    f"{path}:{lineno}: not a function name: {line!r}")
            names.add(line)
    return frozenset(names)
