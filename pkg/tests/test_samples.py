import pytest

from cct.errors import DegeneratePairError, InvalidPairError
from cct.lexer import CodeBlock
from cct.mutation import MutantPair, MutationCandidate, MutationKind, make_counterpart
from cct.samples import (
    TEMPLATES,
    CctRecord,
    ComparisonSample,
    InstructionSample,
    build_cct_dataset,
    build_comparison,
    first_diff_index,
    read_records,
    record_from_dict,
    record_to_dict,
    render_lm_prompt,
    render_template,
    write_records,
)
from cct.vocab import Vocabulary


def make_pair(correct, buggy):
    # record payload is irrelevant for alignment tests
    rec = MutationCandidate(MutationKind.OPERATOR_MISUSE, (0, 1), "x")
    return MutantPair(correct=correct, buggy=buggy, record=rec, seed=0)


def test_first_diff_index_basics():
    assert first_diff_index([7, 3, 9], [7, 5, 9]) == 1
    assert first_diff_index([7, 3], [7, 3, 9, 2]) == 2
    with pytest.raises(InvalidPairError):
        first_diff_index([1, 2], [1, 2])


def corpus_vocab():
    return Vocabulary.build(
        [
            render_lm_prompt("demo"),
            "a<b a>b len(s) s x=1 total = total + x\n",
        ]
    )


def test_build_comparison_operator_swap():
    vocab = corpus_vocab()
    instr = InstructionSample(instruction="demo", input=None, output="a<b")
    sample = build_comparison(make_pair("a<b", "a>b"), instr, vocab)
    assert sample.diff_index == 1
    assert sample.aligned_length == 3
    assert sample.correct_tokens[0] == sample.buggy_tokens[0]
    assert sample.prompt_tokens[0] == Vocabulary.BOS


def test_build_comparison_call_removal():
    vocab = corpus_vocab()
    instr = InstructionSample(instruction="demo", input=None, output="len(s)")
    sample = build_comparison(make_pair("len(s)", "s"), instr, vocab)
    assert sample.diff_index == 0
    assert sample.aligned_length == 4


def test_build_comparison_degenerate_under_tiny_vocab():
    vocab = Vocabulary([])  # every lexeme maps to UNK
    instr = InstructionSample(instruction="demo", input=None, output="a<b")
    with pytest.raises(DegeneratePairError):
        build_comparison(make_pair("a<b", "a>b"), instr, vocab)


def test_comparison_sample_validates_prefix():
    with pytest.raises(ValueError):
        ComparisonSample(
            prompt_tokens=[1],
            correct_tokens=[5, 6],
            buggy_tokens=[7, 6],
            diff_index=1,  # but position 0 already differs
            aligned_length=2,
        )


def test_record_requires_paired_streams():
    lm = InstructionSample(instruction="i", input=None, output="o")
    with pytest.raises(ValueError):
        CctRecord(lm=lm, comparison=None, seq=lm)


def test_render_template_substitution():
    instr = InstructionSample(
        instruction="Write a function add(a, b) that returns the sum of a and b.",
        input=None,
        output="```python\ndef add(a, b):\n    return a + b\n```",
    )
    pair = make_pair("def add(a, b):\n    return a + b\n", "def add(a, b):\n    return a - b\n")

    first = render_template(TEMPLATES[0], instr, pair)
    assert first.instruction == (
        "Given the instruction: " + instr.instruction + "\n"
        "Here is a piece of code with bugs: " + pair.buggy + "\n"
        "Fix the bugs in the code."
    )
    assert first.output == pair.correct

    third = render_template(TEMPLATES[2], instr, pair)
    assert third.instruction == "Find the bugs in the " + pair.buggy
    assert third.output == pair.correct

    for template in TEMPLATES:
        rendered = render_template(template, instr, pair)
        assert "<Instruction>" not in rendered.instruction
        assert "<Bug output>" not in rendered.instruction
        assert rendered.output == pair.correct


def make_corpus(n):
    samples = []
    for i in range(n):
        name = f"fn{i}"
        code = f"def {name}(a, b):\n    return a + b\n"
        samples.append(
            InstructionSample(
                instruction=f"Write a function {name}(a, b) that returns the sum of a and b.",
                input=None,
                output=f"```python\n{code}```",
            )
        )
    return samples


def test_dataset_prose_only_record():
    vocab = Vocabulary.build(["Die Antwort ist 42."])
    sample = InstructionSample(instruction="q", input=None, output="Die Antwort ist 42.")
    records = build_cct_dataset([sample], seed=0, vocab=vocab)
    assert len(records) == 1
    assert records[0].comparison is None and records[0].seq is None


def test_dataset_deterministic_and_complete(tmp_path):
    samples = make_corpus(100)
    vocab = Vocabulary.build(s.output for s in samples)
    r1 = build_cct_dataset(samples, seed=9, vocab=vocab)
    r2 = build_cct_dataset(samples, seed=9, vocab=vocab)
    assert len(r1) == 100
    assert all(rec.comparison is not None and rec.seq is not None for rec in r1)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_records(p1, r1)
    write_records(p2, r2)
    assert p1.read_bytes() == p2.read_bytes()
    assert read_records(p1) == r1


def test_record_round_trip_via_dict():
    samples = make_corpus(3)
    vocab = Vocabulary.build(s.output for s in samples)
    records = build_cct_dataset(samples, seed=1, vocab=vocab)
    for rec in records:
        assert record_from_dict(record_to_dict(rec)) == rec


def test_comparison_prompt_covers_preamble():
    vocab = Vocabulary.build(["Sure thing:\n```python\nx = y + 1\n```", "y x 1 + -"])
    sample = InstructionSample(
        instruction="demo", input=None, output="Sure thing:\n```python\nx = y + 1\n```"
    )
    records = build_cct_dataset([sample], seed=3, vocab=vocab)
    comp = records[0].comparison
    assert comp is not None
    # prompt ids must extend past the bare instruction framing: they include
    # the output text that precedes the code block
    bare = [Vocabulary.BOS] + vocab.encode(render_lm_prompt("demo"))
    assert len(comp.prompt_tokens) > len(bare)
    assert comp.prompt_tokens[: len(bare)] == bare
