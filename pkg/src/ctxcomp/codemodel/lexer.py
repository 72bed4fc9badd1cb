"""A small Java lexer.

The lexer never fails: characters it does not recognise become
single-character punctuation tokens, and unterminated literals or comments
run to the end of the line (or input).  Comments are emitted as tokens of
kind ``comment`` so that joining the token texts preserves every
non-whitespace character of the input; callers that want code only filter
them out with :func:`code_tokens`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass


class TokenKind(str, enum.Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    LITERAL = "literal"
    PUNCTUATION = "punctuation"
    OPERATOR = "operator"
    COMMENT = "comment"


JAVA_KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
    """.split()
)

# true/false/null are literals, not reserved words.
_WORD_LITERALS = frozenset({"true", "false", "null"})

_OPERATORS = sorted(
    """
    >>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= %= &= |= ^=
    << >> + - * / % = < > ! ~ ? : & | ^
    """.split(),
    key=len,
    reverse=True,
)
_PUNCTUATION = frozenset("(){}[];,.@")

_NUMBER = re.compile(
    r"""
    0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?\d+)?[lLfFdD]?
  | 0[bB][01_]+[lL]?
  | (?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?[lLfFdD]?
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class Token:
    text: str
    kind: TokenKind
    start: int = 0
    line: int = 1

    @property
    def end(self) -> int:
        return self.start + len(self.text)

    @property
    def end_line(self) -> int:
        return self.line + self.text.count("\n")

    def __repr__(self) -> str:
        return f"Token({self.text!r}, {self.kind.value})"


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$"


def _is_ident_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_$"


def _scan_quoted(text: str, i: int, quote: str) -> int:
    """Return the end of a quoted literal starting at ``i``; stops at EOL if unterminated."""
    n = len(text)
    j = i + 1
    while j < n:
        ch = text[j]
        if ch == "\\":
            j += 2
            continue
        if ch == quote:
            return j + 1
        if ch == "\n":
            return j
        j += 1
    return n


def tokenize_code(text: str) -> list[Token]:
    """Split ``text`` into tokens, comments included."""
    tokens: list[Token] = []
    n = len(text)
    i = 0
    line = 1
    while i < n:
        ch = text[i]
        if ch.isspace():
            if ch == "\n":
                line += 1
            i += 1
            continue

        start = i
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            kind = TokenKind.COMMENT
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            kind = TokenKind.COMMENT
        elif text.startswith('"""', i):
            j = text.find('"""', i + 3)
            j = n if j < 0 else j + 3
            kind = TokenKind.LITERAL
        elif ch == '"' or ch == "'":
            j = _scan_quoted(text, i, ch)
            kind = TokenKind.LITERAL
        elif _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_part(text[j]):
                j += 1
            word = text[i:j]
            if word in JAVA_KEYWORDS:
                kind = TokenKind.KEYWORD
            elif word in _WORD_LITERALS:
                kind = TokenKind.LITERAL
            else:
                kind = TokenKind.IDENTIFIER
        elif ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER.match(text, i)
            j = m.end() if m and m.end() > i else i + 1
            kind = TokenKind.LITERAL
        elif ch in _PUNCTUATION and not text.startswith("...", i):
            j = i + 1
            kind = TokenKind.PUNCTUATION
        else:
            for op in _OPERATORS:
                if text.startswith(op, i):
                    j = i + len(op)
                    kind = TokenKind.OPERATOR
                    break
            else:
                j = i + 1
                kind = TokenKind.PUNCTUATION

        tok = Token(text[start:j], kind, start, line)
        tokens.append(tok)
        line = tok.end_line
        i = j
    return tokens


def code_tokens(text: str) -> list[Token]:
    """Tokens of ``text`` with comments dropped."""
    return [t for t in tokenize_code(text) if t.kind is not TokenKind.COMMENT]


def render(tokens: list[Token]) -> tuple[str, list[int]]:
    """Re-emit ``tokens`` on one line, keeping their original adjacency.

    Adjacent tokens stay glued; any whitespace or comment between two tokens
    collapses to a single space.  Returns the text and each token's offset in
    it, so spans computed on tokens can be mapped into the rendered string.
    """
    parts: list[str] = []
    offsets: list[int] = []
    pos = 0
    prev_end: int | None = None
    for tok in tokens:
        if prev_end is not None and tok.start != prev_end:
            parts.append(" ")
            pos += 1
        offsets.append(pos)
        parts.append(tok.text)
        pos += len(tok.text)
        prev_end = tok.end
    return "".join(parts), offsets


_NO_SPACE_BEFORE = frozenset({"(", ")", ",", ".", "[", "]", ";", "<", ">", ">>", ">>>", "..."})
_NO_SPACE_AFTER = frozenset({"(", "[", ".", "@", "<"})


def join_compact(tokens: list[Token]) -> str:
    """Normalised single-line rendering used for method signatures."""
    out: list[str] = []
    prev: str | None = None
    for tok in tokens:
        t = tok.text
        if prev is not None:
            glue = t in _NO_SPACE_BEFORE or prev in _NO_SPACE_AFTER
            if prev == "..." or (prev in (">", ">>", ">>>") and t not in _NO_SPACE_BEFORE):
                glue = False
            if not glue:
                out.append(" ")
        out.append(t)
        prev = t
    return "".join(out)
