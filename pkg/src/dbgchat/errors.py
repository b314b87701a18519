"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DbgChatError(Exception):
    """Base class for all errors raised by this package."""


# --- debugger process / protocol ---

class DebuggerError(DbgChatError):
    pass


class DebuggerNotFound(DebuggerError):
    """The debugger binary could not be executed."""


class TargetNotFound(DebuggerError):
    """The target executable does not exist."""


class ProtocolHandshakeFailed(DebuggerError):
    """No prompt arrived from the debugger within the startup timeout."""


class DebuggerExited(DebuggerError):
    """The debugger child process died while a command was outstanding."""


class CommandTimeout(DebuggerError):
    """A debugger command did not complete within its deadline."""


class CommandInFlight(DebuggerError):
    """A second command was issued while one was still outstanding."""


# --- session-level preconditions ---

class NotStopped(DebuggerError):
    """The operation requires a stopped target."""


class BadFrameIndex(DebuggerError):
    """Frame index outside the current backtrace."""


class EvaluationError(DebuggerError):
    """Expression evaluation failed; carries the debugger's message."""


# --- source navigation ---

class SourceError(DbgChatError):
    pass


class SourceUnavailable(SourceError):
    """The requested source file cannot be read."""


class BadLocSyntax(SourceError):
    """A location string does not have the form filename:lineno."""


class SymbolNotOnLine(SourceError):
    """The symbol does not occur on the given source line."""


class DefinitionNotFound(SourceError):
    """No definition could be resolved for the symbol."""


# --- language server ---

class LspError(DbgChatError):
    pass


class LspUnavailable(LspError):
    """No language server is configured or running, and no fallback applies."""


class LspTransportError(LspError):
    """The language server connection broke or framing was invalid."""


class LspNotInitialized(LspError):
    """A request was issued before the initialize handshake completed."""


class LspTimeout(LspError):
    """The language server did not answer within the deadline."""


class LspErrorResponse(LspError):
    """The server answered with a JSON-RPC error object."""

    def __init__(self, code: int, message: str):
        super().__init__(f"language server error {code}: {message}")
        self.code = code
        self.message = message


# --- LLM client ---

class LlmError(DbgChatError):
    pass


class AuthError(LlmError):
    """Missing or rejected API key."""


class TransportError(LlmError):
    """Network failure talking to the completion endpoint."""


class RateLimited(LlmError):
    """The provider throttled the request."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class MalformedToolArgs(LlmError):
    """The provider produced a tool call whose arguments do not parse."""


class ScriptParseError(LlmError):
    """A scripted-dialog file is not valid."""


class ScriptExhausted(LlmError):
    """The scripted dialog has no entry for this turn."""


# --- prompt assembly ---

class BudgetImpossible(DbgChatError):
    """The untruncatable prompt sections alone exceed the token budget."""
