"""Assemble chat prompts under a token budget with deterministic truncation.

The initial prompt carries six sections in fixed order: Instructions,
Enriched Stack Trace, Inputs, Error, History, User Text.  Instructions go
in the system message, the rest in one user message.  When the estimate
exceeds the budget, content is dropped in a fixed priority: history
entries oldest-first, then the Inputs section, then stack frames from the
outermost end (the stopped frame is never dropped), each dropped run
replaced by a count note.  Instructions, Error, and User Text are never
altered.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable

from . import PROMPT
from .errors import BudgetImpossible
from .llm import SYSTEM, USER, ChatMessage
from .session import StopInfo

DEFAULT_MAX_TOKENS = 16000

# A frame block or hidden-frames marker starts one of these lines.
_FRAME_HEADER = re.compile(r"^(?:> )?\S.*\(\d+\)\S*\(\)$")
_MARKER_LINE = re.compile(r"^\[\.\.\. .*\]$")


def estimate_tokens(text: str) -> int:
    """Deterministic, model-independent size estimate: ceil(bytes / 4)."""
    return (len(text.encode("utf-8")) + 3) // 4


@dataclass
class TokenBudget:
    max_tokens: int = DEFAULT_MAX_TOKENS
    estimator: Callable[[str], int] = estimate_tokens

    def fits(self, text: str) -> bool:
        return self.estimator(text) <= self.max_tokens


@dataclass
class PromptBundle:
    instructions: str
    enriched_stack: str
    inputs: str
    error: str
    history: str
    user_text: str


# --------------------------------------------------------------------------
# Fixed text
# --------------------------------------------------------------------------

_INSTRUCTIONS = """\
You are a debugging assistant. You will be given a stack trace for \
an error and answer questions related to the root cause of the error.

Call the debug function to run debugger commands on the stopped program. \
You may run the following commands: bt, up, down, frame, p expression, \
list, info locals. Print any variable value or expression that you \
believe may contribute to the error.

Call the code function to see the source lines surrounding a location, \
where a location has the form filename:lineno.

Call the definition function to see where the first occurrence of a \
symbol at a given location is declared. Unless it comes from a common, \
widely used library, look up any symbol that is referenced in the lines \
leading up to the error. Call the provided functions as many times as \
you would like.

The root cause of any error is likely due to a problem in the source \
code from the user. Explain why each variable contributing to the error \
has been set to the value that it has. Continue with your explanations \
until you reach the root cause of the error. Your answer may be as long \
as necessary.

End your answer with a section titled "Recommendation" that contains one of:
- a fix if you have identified the root cause
- a numbered list of 1-3 suggestions for how to continue debugging if \
you have not\
"""

HISTORY_INTRO = ("This is the history of some debugger commands I ran "
                 "and the results:")


def instructions_text(mode: str = "native") -> str:
    """The fixed system prompt; byte-stable across calls."""
    if mode != "native":
        raise ValueError(f"unknown mode {mode!r}")
    return _INSTRUCTIONS


def error_section(stop: StopInfo | None) -> str:
    """Describe the stop for the Error section."""
    if stop is None:
        return "The program has not produced an error."
    if stop.kind == "assertion":
        where = _frame_phrase(stop)
        return (f"The program stopped on {stop.signal_name} after a failed "
                f"assertion{where}.\n"
                f'The code "{stop.assertion_text}" is correct and must not '
                "be changed.")
    if stop.kind == "signal":
        meaning = f" ({stop.signal_meaning})" if stop.signal_meaning else ""
        return (f"The program stopped on {stop.signal_name}{meaning}"
                f"{_frame_phrase(stop)}.")
    if stop.kind == "exited":
        if stop.exit_code == 0:
            return "The program exited normally with code 0."
        return f"The program exited with code {stop.exit_code}."
    if stop.kind == "breakpoint":
        return f"The program is stopped at a breakpoint{_frame_phrase(stop)}."
    return "The program is stopped."


def _frame_phrase(stop: StopInfo) -> str:
    if stop.frame is None:
        return ""
    return f" in {stop.frame.func} at {stop.frame.location()}"


def format_history(entries: list[tuple[str, str]]) -> str:
    """Render (command, output) pairs the way the user saw them."""
    parts = []
    for command, output in entries:
        block = f"{PROMPT}{command}"
        if output.rstrip("\n"):
            block += "\n" + output.rstrip("\n")
        parts.append(block)
    return "\n".join(parts)


def format_inputs(argv: list[str], stdin_text: str | None) -> str:
    parts = []
    if argv:
        parts.append("Command-line arguments: " + " ".join(argv))
    if stdin_text:
        parts.append("Standard input:\n" + stdin_text.rstrip("\n"))
    return "\n".join(parts)


# --------------------------------------------------------------------------
# Assembly
# --------------------------------------------------------------------------

def _user_sections(bundle: PromptBundle) -> str:
    sections = []
    if bundle.enriched_stack:
        sections.append("Enriched Stack Trace:\n"
                        "The program has this stack trace:\n"
                        + bundle.enriched_stack)
    if bundle.inputs:
        sections.append("Inputs:\n" + bundle.inputs)
    sections.append("Error:\n" + bundle.error)
    if bundle.history:
        sections.append(f"History:\n{HISTORY_INTRO}\n" + bundle.history)
    sections.append("User Text:\n" + bundle.user_text)
    return "\n\n".join(sections)


def render_messages(bundle: PromptBundle) -> list[ChatMessage]:
    return [
        ChatMessage(role=SYSTEM, content=bundle.instructions),
        ChatMessage(role=USER, content=_user_sections(bundle)),
    ]


def _estimate_bundle(bundle: PromptBundle, budget: TokenBudget) -> int:
    return (budget.estimator(bundle.instructions)
            + budget.estimator(_user_sections(bundle)))


def _drop_oldest_history(history: str) -> str:
    """Remove the oldest entry: everything up to the next prompt marker."""
    lines = history.split("\n")
    for i in range(1, len(lines)):
        if lines[i].startswith(PROMPT):
            return "\n".join(lines[i:])
    return ""


def _split_stack_blocks(stack: str) -> list[str]:
    """Split the rendered stack into frame and marker blocks."""
    blocks: list[list[str]] = []
    for line in stack.split("\n"):
        starts = bool(_FRAME_HEADER.match(line) or _MARKER_LINE.match(line))
        if starts or not blocks:
            blocks.append([line])
        else:
            blocks[-1].append(line)
    return ["\n".join(b).strip("\n") for b in blocks]


def _is_frame_block(block: str) -> bool:
    return bool(_FRAME_HEADER.match(block.split("\n", 1)[0]))


def _drop_outermost_frame(stack: str) -> str | None:
    """Drop the first droppable frame block, maintaining a count note.

    Returns None when only the stopped (marked) frame remains.
    """
    blocks = _split_stack_blocks(stack)
    note_count = 0
    note_at: int | None = None
    target: int | None = None
    for i, block in enumerate(blocks):
        head = block.split("\n", 1)[0]
        m = re.match(r"^\[\.\.\. (\d+) frame\(s\) omitted to fit the "
                     r"token budget\]$", head)
        if m:
            note_count = int(m.group(1))
            note_at = i
            continue
        if _is_frame_block(block) and not head.startswith("> "):
            target = i
            break
    if target is None:
        return None
    del blocks[target]
    note = (f"[... {note_count + 1} frame(s) omitted to fit the "
            "token budget]")
    if note_at is not None and note_at < target:
        blocks[note_at] = note
    else:
        blocks.insert(target, note)
    return "\n\n".join(blocks)


def truncate_bundle(bundle: PromptBundle, budget: TokenBudget) -> PromptBundle:
    """Shrink the bundle deterministically until it fits the budget.

    Idempotent: a bundle that already fits is returned unchanged.
    Raises BudgetImpossible when the protected sections cannot fit.
    """
    current = bundle
    if _estimate_bundle(current, budget) <= budget.max_tokens:
        return current

    while current.history:
        current = replace(current, history=_drop_oldest_history(current.history))
        if _estimate_bundle(current, budget) <= budget.max_tokens:
            return current

    if current.inputs:
        current = replace(current, inputs="")
        if _estimate_bundle(current, budget) <= budget.max_tokens:
            return current

    while current.enriched_stack:
        smaller = _drop_outermost_frame(current.enriched_stack)
        if smaller is None:
            break
        current = replace(current, enriched_stack=smaller)
        if _estimate_bundle(current, budget) <= budget.max_tokens:
            return current

    raise BudgetImpossible(
        f"cannot fit the prompt in {budget.max_tokens} tokens: instructions, "
        "error, and user text alone exceed the budget")


def make_initial_prompt(bundle: PromptBundle,
                        budget: TokenBudget | None = None) -> list[ChatMessage]:
    """Build the first prompt of a dialog, truncating to the budget."""
    if not bundle.instructions or not bundle.user_text:
        raise ValueError("instructions and user text must be nonempty")
    budget = budget or TokenBudget()
    return render_messages(truncate_bundle(bundle, budget))


def make_followup_prompt(history: str, user_text: str) -> list[ChatMessage]:
    """A follow-up carries only the history since the last send plus text."""
    if not history:
        return [ChatMessage(role=USER, content=user_text)]
    content = (f"History:\n{HISTORY_INTRO}\n{history}"
               f"\n\nUser Text:\n{user_text}")
    return [ChatMessage(role=USER, content=content)]
