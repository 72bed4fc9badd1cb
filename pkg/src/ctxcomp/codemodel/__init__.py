"""Lexing, method extraction, term processing and token budgets for Java code."""

from .budget import DEFAULT_COUNTER, LexerTokenCounter, TokenCounter, count_budget_tokens, get_counter, register_counter
from .calls import CallSite, call_sites, invoked_names
from .lexer import JAVA_KEYWORDS, Token, TokenKind, code_tokens, render, tokenize_code
from .methods import MethodRecord, Statement, extract_methods, filter_by_length, segment_statements
from .terms import preprocess_terms, split_camel_case

__all__ = [
    "DEFAULT_COUNTER",
    "JAVA_KEYWORDS",
    "CallSite",
    "LexerTokenCounter",
    "MethodRecord",
    "Statement",
    "Token",
    "TokenCounter",
    "TokenKind",
    "call_sites",
    "code_tokens",
    "count_budget_tokens",
    "extract_methods",
    "filter_by_length",
    "get_counter",
    "invoked_names",
    "preprocess_terms",
    "register_counter",
    "render",
    "segment_statements",
    "split_camel_case",
    "tokenize_code",
]
