"""Token budget counting.

Budgets (682 tokens for the method, 1,024 for the whole input) are measured
by a :class:`TokenCounter`.  The default counts lexer tokens; a subword
tokenizer can be plugged in by registering another implementation.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

from .lexer import code_tokens


@runtime_checkable
class TokenCounter(Protocol):
    name: str

    def count(self, text: str) -> int: ...

    def truncate(self, text: str, n: int) -> str:
        """Return the longest prefix of ``text`` holding at most ``n`` tokens."""
        ...


class LexerTokenCounter:
    name = "lexer"

    def count(self, text: str) -> int:
        return len(code_tokens(text))

    def truncate(self, text: str, n: int) -> str:
        if n <= 0:
            return ""
        toks = code_tokens(text)
        if len(toks) <= n:
            return text
        return text[: toks[n - 1].end]


DEFAULT_COUNTER = LexerTokenCounter()

_COUNTERS: dict[str, TokenCounter] = {DEFAULT_COUNTER.name: DEFAULT_COUNTER}


def register_counter(counter: TokenCounter) -> None:
    _COUNTERS[counter.name] = counter


def get_counter(name: str = "lexer") -> TokenCounter:
    try:
        return _COUNTERS[name]
    except KeyError:
        raise KeyError(f"no token counter registered as {name!r}") from None


def count_budget_tokens(text: str, counter: TokenCounter = DEFAULT_COUNTER) -> int:
    return counter.count(text)
