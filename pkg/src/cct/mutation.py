"""Single-edit bug injection for code blocks.

Each mutant is produced by exactly one recorded, replayable edit drawn from
three kinds: swapping an identifier for another one already present in the
block, swapping an operator for another member of its compatibility class,
or unwrapping a call `name(args)` down to its argument text. Keywords,
literals and plain assignment are never edited, so every mutant re-lexes
cleanly and differs from the original in one contiguous token range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .lexer import CodeBlock, Token, TokenKind, tokenize

__all__ = [
    "MutationKind",
    "MutationCandidate",
    "MutantPair",
    "enumerate_candidates",
    "apply_mutation",
    "make_counterpart",
]


class MutationKind(Enum):
    VARIABLE_MISUSE = "variable_misuse"
    OPERATOR_MISUSE = "operator_misuse"
    FUNCTION_MISSING = "function_missing"


_KIND_ORDER = {
    MutationKind.VARIABLE_MISUSE: 0,
    MutationKind.OPERATOR_MISUSE: 1,
    MutationKind.FUNCTION_MISSING: 2,
}

COMPARISON_OPERATORS = frozenset({"==", "!=", "<", ">", "<=", ">="})
ARITHMETIC_OPERATORS = frozenset({"+", "-", "*", "/", "%", "**", "//"})
BOOLEAN_OPERATORS = frozenset({"and", "or"})

_OPERATOR_CLASSES = (COMPARISON_OPERATORS, ARITHMETIC_OPERATORS, BOOLEAN_OPERATORS)


def _operator_class(text: str) -> Optional[frozenset]:
    for cls in _OPERATOR_CLASSES:
        if text in cls:
            return cls
    return None


@dataclass(frozen=True)
class MutationCandidate:
    """One legal edit: token-index range `site` replaced by `replacement`."""

    kind: MutationKind
    site: tuple[int, int]
    replacement: str


@dataclass(frozen=True)
class MutantPair:
    correct: str
    buggy: str
    record: MutationCandidate
    seed: int = 0


def _call_sites(tokens: list[Token]) -> list[tuple[int, int]]:
    """Index ranges [name .. closing paren] of call-shaped token runs."""
    sites = []
    for i, tok in enumerate(tokens):
        if tok.kind is not TokenKind.IDENTIFIER:
            continue
        if i + 1 >= len(tokens):
            continue
        nxt = tokens[i + 1]
        if nxt.kind is not TokenKind.PUNCTUATION or nxt.text != "(":
            continue
        depth = 1
        j = i + 2
        while j < len(tokens):
            t = tokens[j]
            if t.kind is TokenKind.PUNCTUATION:
                if t.text == "(":
                    depth += 1
                elif t.text == ")":
                    depth -= 1
                    if depth == 0:
                        sites.append((i, j + 1))
                        break
            j += 1
    return sites


def enumerate_candidates(block: CodeBlock) -> list[MutationCandidate]:
    """All legal single edits for `block`, deterministically ordered."""
    tokens = tokenize(block.text)
    candidates: list[MutationCandidate] = []

    identifier_texts = sorted({t.text for t in tokens if t.kind is TokenKind.IDENTIFIER})
    for i, tok in enumerate(tokens):
        if tok.kind is TokenKind.IDENTIFIER:
            for replacement in identifier_texts:
                if replacement != tok.text:
                    candidates.append(
                        MutationCandidate(MutationKind.VARIABLE_MISUSE, (i, i + 1), replacement)
                    )
        elif tok.kind is TokenKind.OPERATOR:
            cls = _operator_class(tok.text)
            if cls is None:
                continue
            for replacement in sorted(cls - {tok.text}):
                candidates.append(
                    MutationCandidate(MutationKind.OPERATOR_MISUSE, (i, i + 1), replacement)
                )

    for start, end in _call_sites(tokens):
        open_paren = tokens[start + 1]
        close_paren = tokens[end - 1]
        args_text = block.text[open_paren.end : close_paren.start]
        candidates.append(
            MutationCandidate(MutationKind.FUNCTION_MISSING, (start, end), args_text)
        )

    candidates.sort(key=lambda c: (c.site[0], _KIND_ORDER[c.kind], c.site[1], c.replacement))
    return candidates


def apply_mutation(block: CodeBlock, candidate: MutationCandidate, seed: int = 0) -> MutantPair:
    """Apply one candidate edit; raises ValueError if it is not legal here."""
    if candidate not in enumerate_candidates(block):
        raise ValueError(f"candidate {candidate} is not legal for this block")
    tokens = tokenize(block.text)
    lo, hi = candidate.site
    start = tokens[lo].start
    end = tokens[hi - 1].end
    buggy = block.text[:start] + candidate.replacement + block.text[end:]
    if buggy == block.text:
        raise ValueError("mutation produced an identical string")
    return MutantPair(correct=block.text, buggy=buggy, record=candidate, seed=seed)


def make_counterpart(block: CodeBlock, rng_seed: int) -> Optional[MutantPair]:
    """Draw one candidate uniformly (seeded) and apply it.

    Returns None when the block admits no legal edit. A pure function of
    (block text, rng_seed).
    """
    candidates = enumerate_candidates(block)
    if not candidates:
        return None
    rng = np.random.default_rng(rng_seed)
    choice = int(rng.integers(len(candidates)))
    return apply_mutation(block, candidates[choice], seed=rng_seed)
