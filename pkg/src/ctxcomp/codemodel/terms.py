"""Identifier splitting and the keyword/punctuation-free term view of text."""

from __future__ import annotations

import re

from .lexer import TokenKind, tokenize_code

_RESERVED_LITERALS = frozenset({"true", "false", "null"})

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


def _split_part(part: str) -> list[str]:
    words: list[str] = []
    begin = 0
    n = len(part)
    for i in range(1, n):
        prev, cur = part[i - 1], part[i]
        if cur.isupper() and (prev.islower() or prev.isdigit()):
            cut = True
        elif cur.isupper() and prev.isupper() and i + 1 < n and part[i + 1].islower():
            cut = True  # acronym run: HTTPServer -> HTTP | Server
        else:
            cut = False
        if cut:
            words.append(part[begin:i])
            begin = i
    words.append(part[begin:])
    return [w.lower() for w in words if w]


def split_camel_case(identifier: str) -> list[str]:
    """Split an identifier into lowercase words.

    >>> split_camel_case("handleDataProcessException")
    ['handle', 'data', 'process', 'exception']
    >>> split_camel_case("HTTPServer2")
    ['http', 'server2']
    """
    words: list[str] = []
    for part in identifier.split("_"):
        if part:
            words.extend(_split_part(part))
    return words


def preprocess_terms(text: str) -> list[str]:
    """Terms of ``text`` with Java keywords and punctuation removed.

    Identifiers are camel-split; words inside literals (string contents,
    issue prose that the lexer reads as literals) are split the same way.
    Comments in code are treated as prose.
    """
    terms: list[str] = []
    for tok in tokenize_code(text):
        if tok.kind is TokenKind.IDENTIFIER:
            # '$' is legal in identifiers but is punctuation for our purposes
            for word in _WORD.findall(tok.text):
                terms.extend(split_camel_case(word))
        elif tok.kind in (TokenKind.LITERAL, TokenKind.COMMENT):
            if tok.text in _RESERVED_LITERALS:
                continue
            for word in _WORD.findall(tok.text):
                terms.extend(split_camel_case(word))
    return terms
