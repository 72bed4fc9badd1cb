"""Method extraction and statement segmentation for Java sources.

The extractor is structural, not a full parser: it matches delimiters,
walks type bodies member by member and recognises method declarations by
shape (``name ( params ) [throws ...] {``).  Methods of anonymous classes
are attributed to the lexically enclosing named class; methods of nested or
local classes to that class (``Outer.Inner``).

A statement is a simple statement terminated by ``;`` or the header of a
compound statement up to and including its opening brace.  Closing braces
belong to no statement; they are the glue between statements.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import ParseError
from .budget import DEFAULT_COUNTER, TokenCounter
from .lexer import Token, TokenKind, code_tokens, join_compact, render

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {v: k for k, v in _OPEN.items()}

_MODIFIERS = frozenset(
    {
        "public", "protected", "private", "static", "final", "abstract",
        "synchronized", "native", "strictfp", "default", "transient", "volatile",
    }
)
_CONTEXTUAL_MODIFIERS = frozenset({"sealed", "non", "-"})
_TYPE_KEYWORDS = frozenset({"class", "interface", "enum"})
_CONTROL = frozenset(
    {"if", "else", "for", "while", "do", "try", "catch", "finally", "switch", "synchronized"}
)
_HEADER_PREV = frozenset({")", "else", "try", "finally", "do", "->"})


@dataclass(frozen=True)
class Statement:
    text: str
    index: int
    line_span: tuple[int, int]
    # character offsets into the owning MethodRecord.text
    span: tuple[int, int]


@dataclass(frozen=True)
class MethodRecord:
    id: str
    repo: str
    file_path: str
    class_name: str
    name: str
    arity: int
    signature: str
    text: str
    body: str
    statements: tuple[Statement, ...]
    token_count: int
    line_span: tuple[int, int] = (0, 0)
    ordinal: int = 0
    is_constructor: bool = field(default=False)

    @property
    def simple_class_name(self) -> str:
        return self.class_name.rsplit(".", 1)[-1]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> MethodRecord:
        d = dict(d)
        d["statements"] = tuple(
            Statement(
                text=s["text"],
                index=s["index"],
                line_span=tuple(s["line_span"]),
                span=tuple(s["span"]),
            )
            for s in d["statements"]
        )
        d["line_span"] = tuple(d["line_span"])
        return cls(**d)


def match_delimiters(tokens: list[Token], strict: bool = True) -> dict[int, int]:
    """Map each opening ``( [ {`` index to its closer (and back).

    With ``strict`` unbalanced input raises :class:`ParseError`; otherwise
    unmatched openers close at the end of the token list.
    """
    pairs: dict[int, int] = {}
    stack: list[int] = []
    for i, tok in enumerate(tokens):
        if tok.kind is not TokenKind.PUNCTUATION:
            continue
        t = tok.text
        if t in _OPEN:
            stack.append(i)
        elif t in _CLOSE:
            if not stack or tokens[stack[-1]].text != _CLOSE[t]:
                if strict:
                    raise ParseError(f"unbalanced {t!r} at line {tok.line}")
                continue
            j = stack.pop()
            pairs[j] = i
            pairs[i] = j
    if stack:
        if strict:
            tok = tokens[stack[-1]]
            raise ParseError(f"unclosed {tok.text!r} at line {tok.line}")
        end = len(tokens) - 1
        for j in stack:
            pairs[j] = end
    return pairs


def skip_angles(tokens: list[Token], i: int, hi: int) -> int:
    """Given ``tokens[i] == '<'``, return the index just past the matching ``>``."""
    depth = 0
    while i < hi:
        t = tokens[i].text
        if t == "<":
            depth += 1
        elif t in (">", ">>", ">>>"):
            depth -= len(t)
            if depth <= 0:
                return i + 1
        elif t in (";", "{", "}", "="):
            return i
        i += 1
    return i


def count_params(tokens: list[Token], lo: int, hi: int, match: dict[int, int]) -> int:
    """Number of comma-separated entries in ``tokens[lo:hi]`` (declarations; ``<`` is generic)."""
    if lo >= hi:
        return 0
    commas = 0
    i = lo
    while i < hi:
        t = tokens[i].text
        if t in _OPEN and tokens[i].kind is TokenKind.PUNCTUATION:
            i = match.get(i, hi) + 1
            continue
        if t == "<":
            i = skip_angles(tokens, i, hi)
            continue
        if t == ",":
            commas += 1
        i += 1
    return commas + 1


class _Extractor:
    def __init__(self, tokens, source, file_path, repo, counter):
        self.toks: list[Token] = tokens
        self.source = source
        self.file_path = file_path
        self.repo = repo
        self.counter = counter
        self.match = match_delimiters(tokens)
        self.records: list[MethodRecord] = []
        self._ids: dict[str, int] = {}

    def text(self, i: int) -> str:
        return self.toks[i].text

    def run(self) -> list[MethodRecord]:
        self.scan_members(0, len(self.toks), "", "")
        self.records.sort(key=lambda r: r.ordinal)
        return self.records

    # -- member level -------------------------------------------------

    def scan_members(self, lo, hi, cls, simple, record_arity=None):
        toks = self.toks
        member_start = lo
        i = lo
        while i < hi:
            t = toks[i]
            if t.text == ";" and t.kind is TokenKind.PUNCTUATION:
                member_start = i + 1
                i += 1
                continue
            if t.text in ("(", "[") and t.kind is TokenKind.PUNCTUATION:
                i = self.match[i] + 1
                continue
            if t.text == "{" and t.kind is TokenKind.PUNCTUATION:
                close = self.match[i]
                kind, info = self.classify(member_start, i, simple, record_arity)
                if kind == "type":
                    self.type_decl(info, i, close, cls)
                elif kind == "method":
                    if cls:
                        self.method(cls, member_start, info, i, close, record_arity)
                    self.scan_code(i + 1, close, cls)
                elif kind == "init":
                    self.scan_code(i + 1, close, cls)
                else:
                    end = self._member_end(close + 1, hi)
                    self.scan_code(member_start, end, cls)
                    close = end
                member_start = close + 1
                i = close + 1
                continue
            i += 1

    def _member_end(self, i, hi):
        while i < hi:
            t = self.toks[i]
            if t.kind is TokenKind.PUNCTUATION:
                if t.text in _OPEN:
                    i = self.match[i] + 1
                    continue
                if t.text == ";":
                    return i
            i += 1
        return hi - 1

    def classify(self, lo, hi, simple, record_arity):
        toks = self.toks
        i = lo
        method_name = None
        meaningful = False
        while i < hi:
            t = toks[i]
            if t.text == "@" and i + 1 < hi and toks[i + 1].text != "interface":
                # annotation: @Name(.Name)* [ ( ... ) ]
                i += 2
                while i + 1 < hi and toks[i].text == ".":
                    i += 2
                if i < hi and toks[i].text == "(":
                    i = self.match[i] + 1
                continue
            if t.kind is TokenKind.KEYWORD and t.text in _TYPE_KEYWORDS:
                if i == lo or toks[i - 1].text != ".":
                    return "type", i
            if (
                t.kind is TokenKind.IDENTIFIER
                and t.text == "record"
                and i + 2 < hi + 1
                and i + 1 < hi
                and toks[i + 1].kind is TokenKind.IDENTIFIER
                and i + 2 < len(toks)
                and toks[i + 2].text in ("(", "<")
            ):
                return "type", i
            if t.text == "=":
                return "expr", None
            if t.text == "(":
                if method_name is None and i > lo and toks[i - 1].kind is TokenKind.IDENTIFIER:
                    method_name = i - 1
                i = self.match[i] + 1
                continue
            if not (t.kind is TokenKind.KEYWORD and t.text in _MODIFIERS):
                meaningful = True
            i += 1
        if method_name is not None:
            return "method", method_name
        if (
            record_arity is not None
            and hi > lo
            and toks[hi - 1].kind is TokenKind.IDENTIFIER
            and toks[hi - 1].text == simple
        ):
            return "method", hi - 1
        if not meaningful:
            return "init", None
        return "expr", None

    def type_decl(self, kw, lbrace, rbrace, outer):
        toks = self.toks
        name = toks[kw + 1].text if kw + 1 < lbrace else "?"
        qualified = f"{outer}.{name}" if outer else name
        keyword = toks[kw].text
        if keyword == "enum":
            self.scan_enum(lbrace + 1, rbrace, qualified, name)
        elif keyword == "record":
            arity = 0
            for j in range(kw + 2, lbrace):
                if toks[j].text == "(":
                    arity = count_params(toks, j + 1, self.match[j], self.match)
                    break
            self.scan_members(lbrace + 1, rbrace, qualified, name, record_arity=arity)
        else:
            self.scan_members(lbrace + 1, rbrace, qualified, name)

    def scan_enum(self, lo, hi, cls, simple):
        i = lo
        while i < hi:
            t = self.toks[i]
            if t.kind is TokenKind.PUNCTUATION:
                if t.text in ("(", "["):
                    i = self.match[i] + 1
                    continue
                if t.text == "{":
                    close = self.match[i]
                    self.scan_members(i + 1, close, cls, simple)
                    i = close + 1
                    continue
                if t.text == ";":
                    self.scan_members(i + 1, hi, cls, simple)
                    return
            i += 1

    # -- code level ---------------------------------------------------

    def scan_code(self, lo, hi, cls):
        """Find anonymous and local class bodies inside a code region."""
        toks = self.toks
        simple = cls.rsplit(".", 1)[-1]
        i = lo
        while i < hi:
            t = toks[i]
            if t.kind is TokenKind.KEYWORD and t.text == "new":
                j = i + 1
                while j < hi and (
                    toks[j].kind in (TokenKind.IDENTIFIER, TokenKind.KEYWORD)
                    or toks[j].text in (".", "@")
                ):
                    j += 1
                if j < hi and toks[j].text == "<":
                    j = skip_angles(toks, j, hi)
                if j < hi and toks[j].text == "(":
                    k = self.match[j]
                    if k + 1 < hi and toks[k + 1].text == "{":
                        body_close = self.match[k + 1]
                        self.scan_members(k + 2, body_close, cls, simple)
                        i = body_close + 1
                        continue
            elif (
                t.kind is TokenKind.KEYWORD
                and t.text in _TYPE_KEYWORDS
                and (i == lo or toks[i - 1].text != ".")
            ):
                j = i + 1
                while j < hi and toks[j].text != "{":
                    if toks[j].text in ("(", "["):
                        j = self.match[j]
                    j += 1
                if j < hi:
                    self.type_decl(i, j, self.match[j], cls)
                    i = self.match[j] + 1
                    continue
            i += 1

    # -- records --------------------------------------------------------

    def method(self, cls, lo, name_idx, lbrace, rbrace, record_arity):
        toks = self.toks
        sig_start = lo
        while sig_start < name_idx:
            t = toks[sig_start]
            if t.text == "@":
                sig_start += 2
                while sig_start + 1 < name_idx and toks[sig_start].text == ".":
                    sig_start += 2
                if sig_start < name_idx and toks[sig_start].text == "(":
                    sig_start = self.match[sig_start] + 1
                continue
            if (t.kind is TokenKind.KEYWORD and t.text in _MODIFIERS) or t.text in _CONTEXTUAL_MODIFIERS:
                sig_start += 1
                continue
            break
        name = toks[name_idx].text
        lparen = name_idx + 1
        if lparen < lbrace and toks[lparen].text == "(":
            rparen = self.match[lparen]
            arity = count_params(toks, lparen + 1, rparen, self.match)
            sig_end = rparen
        else:  # compact record constructor
            arity = record_arity or 0
            sig_end = name_idx
        signature = join_compact(toks[sig_start : sig_end + 1])
        simple = cls.rsplit(".", 1)[-1]
        is_ctor = name == simple and sig_start == name_idx

        method_toks = toks[lo : rbrace + 1]
        text, offsets = render(method_toks)

        def off(i):
            return offsets[i - lo]

        def end_off(i):
            return offsets[i - lo] + len(toks[i].text)

        body = text[end_off(lbrace) : off(rbrace)].strip()
        statements = []
        for idx, (s, e) in enumerate(segment_statements(toks, lbrace + 1, rbrace, self.match)):
            span = (off(s), end_off(e))
            statements.append(
                Statement(
                    text=text[span[0] : span[1]],
                    index=idx,
                    line_span=(toks[s].line, toks[e].end_line),
                    span=span,
                )
            )

        base_id = f"{self.repo}:{self.file_path}:{cls}::{signature}"
        seen = self._ids.get(base_id, 0)
        self._ids[base_id] = seen + 1
        method_id = base_id if seen == 0 else f"{base_id}#{seen + 1}"

        self.records.append(
            MethodRecord(
                id=method_id,
                repo=self.repo,
                file_path=self.file_path,
                class_name=cls,
                name=name,
                arity=arity,
                signature=signature,
                text=text,
                body=body,
                statements=tuple(statements),
                token_count=max(1, self.counter.count(text)),
                line_span=(toks[lo].line, toks[rbrace].end_line),
                ordinal=lo,
                is_constructor=is_ctor,
            )
        )


def segment_statements(toks: list[Token], lo: int, hi: int, match: dict[int, int]) -> list[tuple[int, int]]:
    """Split ``toks[lo:hi]`` (a block interior) into statement token ranges, inclusive."""
    out: list[tuple[int, int]] = []
    i = lo
    while i < hi:
        if toks[i].text == "}" and toks[i].kind is TokenKind.PUNCTUATION:
            i += 1
            continue
        start = head = i
        if (
            toks[i].kind is TokenKind.IDENTIFIER
            and i + 1 < hi
            and toks[i + 1].text == ":"
        ):
            head = i + 2  # label
        if head >= hi:
            out.append((start, hi - 1))
            break
        first = toks[head]
        if first.text == "{":
            out.append((start, head))
            i = head + 1
            continue
        is_kw = first.kind is TokenKind.KEYWORD
        control = is_kw and first.text in _CONTROL
        label = is_kw and first.text in ("case", "default")
        local_type = any(
            toks[k].kind is TokenKind.KEYWORD and toks[k].text in _TYPE_KEYWORDS
            for k in range(head, min(head + 4, hi))
        ) and (first.text in _TYPE_KEYWORDS or first.text in _MODIFIERS)

        end = None
        j = head
        while j < hi:
            tok = toks[j]
            x = tok.text
            if tok.kind is TokenKind.PUNCTUATION:
                if x in ("(", "["):
                    j = match[j] + 1
                    continue
                if x == "{":
                    prev = toks[j - 1].text if j > head else None
                    if control and prev in _HEADER_PREV:
                        end = j
                        break
                    if label and prev == "->":
                        end = j
                        break
                    if local_type:
                        end = match[j]
                        break
                    j = match[j] + 1
                    continue
                if x == ";":
                    end = j
                    break
                if x == "}":
                    end = j - 1
                    break
            elif label and x == ":":
                end = j
                break
            j += 1
        if end is None:
            end = hi - 1
        if end < start:
            i = start + 1
            continue
        out.append((start, end))
        i = end + 1
    return out


def extract_methods(
    source_file: str,
    file_path: str,
    repo: str = "",
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[MethodRecord]:
    """Extract every method (or constructor) declaration with a body.

    Raises :class:`ParseError` when delimiters are unbalanced.
    """
    tokens = code_tokens(source_file)
    return _Extractor(tokens, source_file, file_path, repo, counter).run()


def filter_by_length(methods: list[MethodRecord], max_tokens: int = 682) -> list[MethodRecord]:
    return [m for m in methods if m.token_count <= max_tokens]
