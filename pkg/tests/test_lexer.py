import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cct.lexer import (
    CodeBlock,
    SourceUnit,
    Token,
    TokenKind,
    detokenize,
    extract_code_blocks,
    tokenize,
)
from cct.errors import DetokenizeError


def kinds_and_texts(source):
    return [(t.kind, t.text) for t in tokenize(source)]


def test_three_lexeme_line():
    assert kinds_and_texts("a < b") == [
        (TokenKind.IDENTIFIER, "a"),
        (TokenKind.OPERATOR, "<"),
        (TokenKind.IDENTIFIER, "b"),
    ]


def test_empty_input():
    assert tokenize("") == []


def test_reference_hand_lex():
    # Hand-lexed reference for a full statement line.
    assert kinds_and_texts("while len(s) > 2:") == [
        (TokenKind.KEYWORD, "while"),
        (TokenKind.IDENTIFIER, "len"),
        (TokenKind.PUNCTUATION, "("),
        (TokenKind.IDENTIFIER, "s"),
        (TokenKind.PUNCTUATION, ")"),
        (TokenKind.OPERATOR, ">"),
        (TokenKind.LITERAL, "2"),
        (TokenKind.PUNCTUATION, ":"),
    ]


def test_word_operators_are_operators():
    kinds = dict(kinds_and_texts("a and b or not c in d is e"))
    # dict maps text -> kind after inversion below
    by_text = {text: kind for kind, text in kinds_and_texts("a and b or not c in d is e")}
    for word in ("and", "or", "not", "in", "is"):
        assert by_text[word] is TokenKind.OPERATOR


def test_unknown_characters_become_punctuation():
    toks = tokenize("x ?? $ \u00e9")
    assert all(
        t.kind is TokenKind.PUNCTUATION for t in toks[1:]
    ), [t.kind for t in toks]
    assert detokenize(toks) == "x ?? $ \u00e9"


@pytest.mark.parametrize(
    "source",
    [
        "x = 1\n",
        "",
        "def f(a, b):\n    return a + b\n",
        "s = 'it\\'s'\nt = \"quoted\"\n",
        'doc = """multi\nline"""\nx = 1\n',
        "if a <= b:\n    while a != 0:\n        a -= 1\n    return a\nreturn b\n",
        "# comment only\nx = 2  # trailing\n",
        "\tweird\ttabs\t\n",
        "value = 3.14e-2 + 7 // 2 ** 3\n",
        "nested = outer(inner(x), y)\n",
        "   \n\n  trailing blank\n   ",
        "no trailing newline",
        "f'interp {x}' and rb'bytes'\n",
    ],
)
def test_round_trip(source):
    assert detokenize(tokenize(source)) == source


@settings(max_examples=300, deadline=None)
@given(
    st.text(
        alphabet=st.sampled_from(list("abcxyz_01 +-*/%<>=!().,:#'\"\n\t")),
        max_size=60,
    )
)
def test_round_trip_property(source):
    assert detokenize(tokenize(source)) == source


def test_streams_are_deterministic():
    src = "def f(x):\n    return x * 2\n"
    assert tokenize(src) == tokenize(src)


def test_spans_sorted_and_non_overlapping():
    src = "def f(a):\n    if a > 0:\n        return a\n    return 0\n"
    toks = tokenize(src)
    pos = 0
    for t in toks:
        assert t.start >= pos
        assert t.end >= t.start
        pos = t.end
    unit = SourceUnit.from_source(src)
    assert unit.raw == src
    assert unit.line_offsets[0] == 0


def test_indent_dedent_emission():
    src = "def f(a):\n    if a:\n        return a\n    return 0\n"
    kinds = [t.kind for t in tokenize(src)]
    assert TokenKind.INDENT in kinds
    assert TokenKind.DEDENT in kinds
    # zero-width synthetics carry empty text
    for t in tokenize(src):
        if t.kind is TokenKind.DEDENT:
            assert t.text == "" and t.start == t.end


def test_detokenize_rejects_unsorted_spans():
    a = Token(TokenKind.IDENTIFIER, "a", (5, 6))
    b = Token(TokenKind.IDENTIFIER, "b", (0, 1))
    with pytest.raises(DetokenizeError):
        detokenize([a, b])


def test_detokenize_empty():
    assert detokenize([]) == ""


# --- code block extraction ---


def test_extract_single_fenced_block():
    out = "Here is code:\n```python\nx=1\n```"
    blocks = extract_code_blocks(out)
    assert len(blocks) == 1
    assert blocks[0].text == "x=1\n"
    assert blocks[0].fenced
    assert out[blocks[0].origin[0] : blocks[0].origin[1]] == "x=1\n"


def test_extract_prose_only():
    assert extract_code_blocks("No code here.") == []


def test_extract_two_blocks_in_order():
    out = "First:\n```\na=1\n```\nthen\n```python\nb=2\n```\n"
    blocks = extract_code_blocks(out)
    assert [b.text for b in blocks] == ["a=1\n", "b=2\n"]


def test_extract_unterminated_fence():
    out = "```python\nwhile x:\n    x -= 1\n"
    blocks = extract_code_blocks(out)
    assert len(blocks) == 1
    assert blocks[0].fenced
    assert blocks[0].text == "while x:\n    x -= 1\n"


def test_extract_bare_code_heuristic():
    code = "def f(a):\n    return a\n"
    blocks = extract_code_blocks(code)
    assert len(blocks) == 1
    assert not blocks[0].fenced
    assert blocks[0].text == code

    assigned = "total = 1 + 2\n"
    assert extract_code_blocks(assigned)[0].text == assigned


def test_extraction_idempotent_on_block_text():
    for out in (
        "intro\n```python\ndef g(x):\n    return x\n```",
        "def g(x):\n    return x\n",
    ):
        for block in extract_code_blocks(out):
            inner = extract_code_blocks(block.text)
            assert inner == [] or inner[0].text == block.text
