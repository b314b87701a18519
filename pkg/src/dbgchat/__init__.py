"""dbgchat: a conversational debugging assistant on top of GDB.

The package drives GDB through its machine-interface protocol, builds
enriched stack traces for crashed targets, and hands control of the
debugger to an LLM that can issue vetted commands as tool calls until it
produces an explanation and a recommendation.
"""

__version__ = "0.1.0"

PROMPT = "(dbgchat) "
