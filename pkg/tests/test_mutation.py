import numpy as np
import pytest

from cct.lexer import CodeBlock, tokenize
from cct.mutation import (
    MutationCandidate,
    MutationKind,
    apply_mutation,
    enumerate_candidates,
    make_counterpart,
)


def block(text):
    return CodeBlock(text=text, origin=(0, len(text)), fenced=False)


def diff_middle(correct, buggy):
    """Maximal common prefix/suffix split of the two token streams; returns
    the differing middle range in the correct stream."""
    a = [(t.kind, t.text) for t in tokenize(correct)]
    c = [(t.kind, t.text) for t in tokenize(buggy)]
    p = 0
    while p < min(len(a), len(c)) and a[p] == c[p]:
        p += 1
    s = 0
    while s < min(len(a), len(c)) - p and a[len(a) - 1 - s] == c[len(c) - 1 - s]:
        s += 1
    return p, len(a) - s


def test_no_legal_edit():
    assert enumerate_candidates(block("x = 1")) == []
    assert make_counterpart(block("x = 1"), 7) is None


def test_enumeration_matches_hand_scan():
    cands = enumerate_candidates(block("if a < b: return a"))
    ops = {c.replacement for c in cands if c.kind is MutationKind.OPERATOR_MISUSE}
    assert ops == {">", "<=", ">=", "==", "!="}
    variables = [(c.site, c.replacement) for c in cands if c.kind is MutationKind.VARIABLE_MISUSE]
    assert variables == [((1, 2), "b"), ((3, 4), "a"), ((6, 7), "b")]
    assert not any(c.kind is MutationKind.FUNCTION_MISSING for c in cands)
    assert len(cands) == 8
    # deterministic ordering by (site start, kind)
    assert cands == enumerate_candidates(block("if a < b: return a"))
    assert [c.site[0] for c in cands] == sorted(c.site[0] for c in cands)


def test_function_missing_unwraps_call():
    b = block("while len(s) > 2: s = s[1:]")
    fm = [c for c in enumerate_candidates(b) if c.kind is MutationKind.FUNCTION_MISSING]
    assert len(fm) == 1
    pair = apply_mutation(b, fm[0])
    assert pair.buggy == "while s > 2: s = s[1:]"


def test_operator_misuse_greater_than():
    b = block("if a < b:")
    cand = next(
        c
        for c in enumerate_candidates(b)
        if c.kind is MutationKind.OPERATOR_MISUSE and c.replacement == ">"
    )
    assert apply_mutation(b, cand).buggy == "if a > b:"


def test_variable_misuse_single_token_diff():
    b = block("total = total + x")
    cand = next(
        c
        for c in enumerate_candidates(b)
        if c.kind is MutationKind.VARIABLE_MISUSE and c.site == (2, 3) and c.replacement == "x"
    )
    pair = apply_mutation(b, cand)
    assert pair.buggy == "total = x + x"
    assert diff_middle(pair.correct, pair.buggy) == (2, 3)


def test_apply_rejects_illegal_candidate():
    b = block("x = 1")
    bogus = MutationCandidate(MutationKind.VARIABLE_MISUSE, (0, 1), "y")
    with pytest.raises(ValueError):
        apply_mutation(b, bogus)


def test_counterpart_seed_determinism():
    b = block("def f(a, b):\n    return a - b\n")
    assert make_counterpart(b, 123) == make_counterpart(b, 123)
    pair = make_counterpart(b, 123)
    assert apply_mutation(b, pair.record, seed=123) == pair


CORPUS = [
    "def add(a, b):\n    return a + b\n",
    "def pick(a, b):\n    if a > b:\n        return a\n    return b\n",
    "def span(a, b):\n    if a > b:\n        return a - b\n    return b - a\n",
    "def trim(s):\n    while len(s) > 2:\n        s = s[1:]\n    return s\n",
    "def total(xs):\n    s = 0\n    for v in xs:\n        s = s + v\n    return s\n",
    "def both(a, b):\n    return a and b\n",
    "def check(n):\n    return n % 2 == 0\n",
    "def wrap(x):\n    return str(len(x))\n",
]


@pytest.mark.parametrize("text", CORPUS)
def test_emitted_pairs_satisfy_invariants(text):
    b = block(text)
    for seed in range(12):
        pair = make_counterpart(b, seed)
        assert pair is not None
        assert pair.correct != pair.buggy
        # replayability
        assert apply_mutation(b, pair.record, seed=seed) == pair
        # lexability (total lexer + round trip of the buggy text)
        from cct.lexer import detokenize

        assert detokenize(tokenize(pair.buggy)) == pair.buggy
        # the differing token range is contiguous and inside the recorded site
        lo, hi = diff_middle(pair.correct, pair.buggy)
        site_lo, site_hi = pair.record.site
        assert site_lo <= lo and hi <= site_hi


def test_uniform_selection_on_four_candidate_block():
    # All identifiers share one text, so no variable swaps; the four boolean
    # operators are the only legal sites -> exactly 4 candidates.
    b = block("s and s or s and s or s")
    cands = enumerate_candidates(b)
    assert len(cands) == 4
    counts = dict.fromkeys(cands, 0)
    draws = 1000
    for seed in range(draws):
        counts[make_counterpart(b, seed).record] += 1
    freqs = np.array(list(counts.values()), dtype=float) / draws
    assert np.all(freqs >= 0.2) and np.all(freqs <= 0.3), freqs


def test_nested_calls_both_enumerated():
    b = block("a = str(len(x))")
    fm = [c for c in enumerate_candidates(b) if c.kind is MutationKind.FUNCTION_MISSING]
    replacements = {c.replacement for c in fm}
    assert replacements == {"len(x)", "x"}
