"""Lexer for a small Python subset, plus code-block extraction.

The lexer is total: any input string produces a token stream, and characters
outside the subset become single-character Punctuation tokens. Tokens carry
exact source lexemes with (start, end) spans into the decoded text (character
offsets; equal to byte offsets for ASCII sources). The stream tiles the
source except for mid-line runs of spaces, which `detokenize` restores from
the span gaps, so `detokenize(tokenize(s)) == s` holds for any input whose
inter-lexeme whitespace is spaces (tabs and all other characters are tokens
in their own right).

Structure tokens:
  * Newline  - one per "\\n" outside string literals.
  * Indent   - the exact leading-whitespace run of any line that has one,
               or a dangling whitespace run at end of input.
  * Dedent   - zero-width synthetic marker emitted when the indentation
               depth of a content line drops below the enclosing level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import DetokenizeError

__all__ = [
    "TokenKind",
    "Token",
    "SourceUnit",
    "CodeBlock",
    "tokenize",
    "detokenize",
    "extract_code_blocks",
]


class TokenKind(Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    OPERATOR = "operator"
    LITERAL = "literal"
    PUNCTUATION = "punctuation"
    NEWLINE = "newline"
    INDENT = "indent"
    DEDENT = "dedent"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: tuple[int, int]

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]


# Word-shaped operators lex as OPERATOR, everything else in this set as KEYWORD.
WORD_OPERATORS = frozenset({"and", "or", "not", "in", "is"})

KEYWORDS = frozenset(
    {
        "False", "None", "True", "as", "assert", "async", "await", "break",
        "class", "continue", "def", "del", "elif", "else", "except",
        "finally", "for", "from", "global", "if", "import", "lambda",
        "nonlocal", "pass", "raise", "return", "try", "while", "with",
        "yield",
    }
)

# Maximal-munch order: two-character operators before their prefixes.
TWO_CHAR_OPERATORS = ("**", "//", "<=", ">=", "==", "!=", "+=", "-=")
ONE_CHAR_OPERATORS = ("+", "-", "*", "/", "%", "<", ">", "=")

_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")
_STRING_PREFIXES = frozenset("rbufRBUF")


def _scan_string(src: str, i: int) -> int:
    """Return the end index of a string literal starting at src[i].

    src[i] must be a quote character. Handles single and triple quotes and
    backslash escapes. Unterminated single-quoted strings run to end of line,
    unterminated triple-quoted strings to end of input; never an error.
    """
    quote = src[i]
    n = len(src)
    if src.startswith(quote * 3, i):
        close = quote * 3
        j = i + 3
        while j < n:
            if src[j] == "\\":
                j += 2
                continue
            if src.startswith(close, j):
                return j + 3
            j += 1
        return n
    j = i + 1
    while j < n and src[j] != "\n":
        if src[j] == "\\":
            j += 2
            continue
        if src[j] == quote:
            return j + 1
        j += 1
    return min(j, n)


def _scan_number(src: str, i: int) -> int:
    n = len(src)
    j = i
    while j < n and src[j] in _DIGITS:
        j += 1
    if j < n and src[j] == "." and j + 1 < n and src[j + 1] in _DIGITS:
        j += 1
        while j < n and src[j] in _DIGITS:
            j += 1
    elif j < n and src[j] == ".":
        j += 1
    if j < n and src[j] in "eE":
        k = j + 1
        if k < n and src[k] in "+-":
            k += 1
        if k < n and src[k] in _DIGITS:
            j = k
            while j < n and src[j] in _DIGITS:
                j += 1
    return j


def tokenize(source: str) -> list[Token]:
    """Lex `source` into a token stream. Total: never raises on any input."""
    tokens: list[Token] = []
    indents = [0]
    n = len(source)
    i = 0
    at_line_start = True

    def emit(kind: TokenKind, start: int, end: int) -> None:
        tokens.append(Token(kind, source[start:end], (start, end)))

    while i < n:
        if at_line_start:
            j = i
            while j < n and source[j] in " \t":
                j += 1
            lead_width = j - i
            if j >= n or source[j] == "\n" or source[j] == "#":
                # Blank or comment-only line: no indentation bookkeeping.
                if lead_width:
                    emit(TokenKind.INDENT, i, j)
                i = j
                at_line_start = False
                continue
            if lead_width > indents[-1]:
                indents.append(lead_width)
                emit(TokenKind.INDENT, i, j)
            else:
                while lead_width < indents[-1]:
                    indents.pop()
                    tokens.append(Token(TokenKind.DEDENT, "", (i, i)))
                if lead_width > indents[-1]:
                    # Ragged dedent; treat the leftover as a fresh level.
                    indents.append(lead_width)
                if lead_width:
                    emit(TokenKind.INDENT, i, j)
            i = j
            at_line_start = False
            continue

        ch = source[i]
        if ch == "\n":
            emit(TokenKind.NEWLINE, i, i + 1)
            i += 1
            at_line_start = True
            continue
        if ch == " ":
            j = i
            while j < n and source[j] == " ":
                j += 1
            if j >= n:
                # Dangling run at end of input: no later token anchors the
                # gap, so keep it as a whitespace-carrier token.
                emit(TokenKind.INDENT, i, j)
            i = j
            continue
        if ch == "\t":
            # Mid-line tab: keep it as a token so span gaps are spaces only.
            emit(TokenKind.PUNCTUATION, i, i + 1)
            i += 1
            continue
        if ch == "#":
            j = i
            while j < n and source[j] != "\n":
                j += 1
            emit(TokenKind.PUNCTUATION, i, j)
            i = j
            continue
        if ch in ("'", '"'):
            j = _scan_string(source, i)
            emit(TokenKind.LITERAL, i, j)
            i = j
            continue
        if ch in _IDENT_START:
            j = i
            while j < n and source[j] in _IDENT_CONT:
                j += 1
            word = source[i:j]
            if (
                len(word) <= 2
                and all(c in _STRING_PREFIXES for c in word)
                and j < n
                and source[j] in ("'", '"')
            ):
                j = _scan_string(source, j)
                emit(TokenKind.LITERAL, i, j)
            elif word in WORD_OPERATORS:
                emit(TokenKind.OPERATOR, i, j)
            elif word in KEYWORDS:
                emit(TokenKind.KEYWORD, i, j)
            else:
                emit(TokenKind.IDENTIFIER, i, j)
            i = j
            continue
        if ch in _DIGITS:
            j = _scan_number(source, i)
            emit(TokenKind.LITERAL, i, j)
            i = j
            continue
        two = source[i : i + 2]
        if two in TWO_CHAR_OPERATORS:
            emit(TokenKind.OPERATOR, i, i + 2)
            i += 2
            continue
        if ch in ONE_CHAR_OPERATORS:
            emit(TokenKind.OPERATOR, i, i + 1)
            i += 1
            continue
        emit(TokenKind.PUNCTUATION, i, i + 1)
        i += 1

    while len(indents) > 1:
        indents.pop()
        tokens.append(Token(TokenKind.DEDENT, "", (n, n)))
    return tokens


def detokenize(tokens: list[Token]) -> str:
    """Rebuild the source substring covered by `tokens`.

    Gaps between consecutive spans are restored as spaces (the only
    characters the lexer skips). Raises DetokenizeError on unsorted or
    overlapping spans.
    """
    if not tokens:
        return ""
    parts: list[str] = []
    pos = tokens[0].start
    for tok in tokens:
        if len(tok.text) != tok.end - tok.start:
            raise DetokenizeError(
                f"token text length {len(tok.text)} does not match span {tok.span}"
            )
        gap = tok.start - pos
        if gap < 0:
            raise DetokenizeError(f"overlapping or unsorted span at {tok.span}")
        parts.append(" " * gap)
        parts.append(tok.text)
        pos = tok.end
    return "".join(parts)


@dataclass(frozen=True)
class SourceUnit:
    """A source string with its token stream and line-start offsets."""

    raw: str
    tokens: list[Token] = field(repr=False)
    line_offsets: list[int] = field(repr=False)

    @classmethod
    def from_source(cls, raw: str) -> "SourceUnit":
        offsets = [0]
        for idx, ch in enumerate(raw):
            if ch == "\n":
                offsets.append(idx + 1)
        return cls(raw=raw, tokens=tokenize(raw), line_offsets=offsets)


@dataclass(frozen=True)
class CodeBlock:
    """A code region extracted from a model/instruction output."""

    text: str
    origin: tuple[int, int]
    fenced: bool


def _first_line_is_code(line: str) -> bool:
    """Heuristic for fence-less outputs: does the line open a definition or
    bind a name?"""
    toks = [t for t in tokenize(line) if t.kind not in (TokenKind.INDENT, TokenKind.DEDENT)]
    if not toks:
        return False
    head = toks[0]
    if head.kind is TokenKind.KEYWORD and head.text in ("def", "class"):
        return True
    if head.kind is not TokenKind.IDENTIFIER:
        return False
    return any(
        t.kind is TokenKind.OPERATOR and t.text in ("=", "+=", "-=") for t in toks[1:]
    )


def extract_code_blocks(output: str) -> list[CodeBlock]:
    """Find code regions in an output string.

    Triple-backtick fences (optional language tag) delimit blocks; an
    unterminated fence claims the rest of the output. With no fence at all,
    the whole output counts as one unfenced block when its first non-blank
    line looks like code, otherwise nothing is returned.
    """
    blocks: list[CodeBlock] = []
    pos = 0
    n = len(output)
    open_start = None  # char offset where current block's text begins
    saw_fence = False
    while pos <= n:
        line_end = output.find("\n", pos)
        if line_end == -1:
            line_end = n
        line = output[pos:line_end]
        if line.lstrip().startswith("```"):
            saw_fence = True
            if open_start is None:
                open_start = line_end + 1 if line_end < n else n
            else:
                text = output[open_start:pos]
                if text:
                    blocks.append(CodeBlock(text=text, origin=(open_start, pos), fenced=True))
                open_start = None
        if line_end >= n:
            break
        pos = line_end + 1
    if open_start is not None:
        text = output[open_start:n]
        if text:
            blocks.append(CodeBlock(text=text, origin=(open_start, n), fenced=True))
    if saw_fence:
        return blocks
    for raw_line in output.splitlines():
        if raw_line.strip():
            if _first_line_is_code(raw_line):
                return [CodeBlock(text=output, origin=(0, n), fenced=False)]
            return []
    return []
