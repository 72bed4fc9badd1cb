"""Method-invocation sites in a token stream."""

from __future__ import annotations

from dataclasses import dataclass

from .lexer import Token, TokenKind, code_tokens
from .methods import match_delimiters, skip_angles

_PRIMITIVES = frozenset(
    {"void", "boolean", "byte", "char", "short", "int", "long", "float", "double"}
)
_TYPE_ARG_WORDS = frozenset({"extends", "super", "?", "&", ".", ",", "[", "]"})


@dataclass(frozen=True)
class CallSite:
    name: str
    arity: int
    index: int  # token index of the callee name
    qualifier: str | None = None
    constructor: bool = False


def _looks_like_type_args(tokens: list[Token], i: int, hi: int) -> int | None:
    """If ``tokens[i] == '<'`` opens type arguments, return the index past them."""
    if i == 0:
        return None
    prev = tokens[i - 1]
    if not (prev.kind is TokenKind.IDENTIFIER and prev.text[:1].isupper()) and prev.text != ".":
        return None
    end = skip_angles(tokens, i, hi)
    if end <= i + 1 or tokens[end - 1].text not in (">", ">>", ">>>"):
        return None
    for tok in tokens[i + 1 : end - 1]:
        if tok.text in ("<", ">", ">>", ">>>") or tok.text in _TYPE_ARG_WORDS:
            continue
        if tok.kind is TokenKind.IDENTIFIER or tok.text in _PRIMITIVES:
            continue
        return None
    return end


def count_args(tokens: list[Token], lo: int, hi: int, match: dict[int, int]) -> int:
    """Arity of an argument list ``tokens[lo:hi]`` (between the parentheses)."""
    if lo >= hi:
        return 0
    commas = 0
    i = lo
    while i < hi:
        tok = tokens[i]
        if tok.kind is TokenKind.PUNCTUATION and tok.text in ("(", "[", "{"):
            i = match.get(i, hi) + 1
            continue
        if tok.text == "<":
            past = _looks_like_type_args(tokens, i, hi)
            if past is not None:
                i = past
                continue
        if tok.text == ",":
            commas += 1
        i += 1
    return commas + 1


def call_sites(tokens: list[Token]) -> list[CallSite]:
    """Invocations (method calls and constructor calls) in ``tokens``.

    Declarations (``Type name(``), annotations and ``this(...)``/``super(...)``
    constructor chaining are not reported.  Works on fragments: unbalanced
    parentheses close at the end of the stream.
    """
    match = match_delimiters(tokens, strict=False)
    n = len(tokens)
    sites: list[CallSite] = []
    consumed: set[int] = set()
    i = 0
    while i < n:
        tok = tokens[i]
        if tok.kind is TokenKind.KEYWORD and tok.text == "new":
            j = i + 1
            name_idx = None
            while j < n and (tokens[j].kind is TokenKind.IDENTIFIER or tokens[j].text == "."):
                if tokens[j].kind is TokenKind.IDENTIFIER:
                    name_idx = j
                j += 1
            if j < n and tokens[j].text == "<":
                j = skip_angles(tokens, j, n)
            if name_idx is not None and j < n and tokens[j].text == "(":
                close = match.get(j, n)
                sites.append(
                    CallSite(tokens[name_idx].text, count_args(tokens, j + 1, close, match), name_idx, None, True)
                )
                consumed.add(name_idx)
            i += 1
            continue
        if (
            tok.kind is TokenKind.IDENTIFIER
            and i not in consumed
            and i + 1 < n
            and tokens[i + 1].text == "("
        ):
            prev = tokens[i - 1] if i > 0 else None
            declaration = prev is not None and (
                prev.kind is TokenKind.IDENTIFIER
                or prev.text in (">", ">>", ">>>", "]", "@")
                or (prev.kind is TokenKind.KEYWORD and prev.text in _PRIMITIVES)
            )
            if not declaration:
                qualifier = None
                if prev is not None and prev.text == "." and i >= 2:
                    q = tokens[i - 2]
                    if q.kind is TokenKind.IDENTIFIER or q.text in ("this", "super"):
                        qualifier = q.text
                    else:
                        qualifier = q.text or "?"
                close = match.get(i + 1, n)
                sites.append(CallSite(tok.text, count_args(tokens, i + 2, close, match), i, qualifier))
        i += 1
    return sites


def invoked_names(text: str) -> list[str]:
    """Names of methods invoked in a code fragment, in order of appearance."""
    return [s.name for s in call_sites(code_tokens(text))]
