"""Builds the three training streams from instruction data.

Every record keeps its plain instruction sample (the LM stream). When the
sample's output carries a mutable code block, the record also gets a
token-aligned comparison of correct vs buggy code ids, plus a rendered
fix-the-bug instruction sample whose target is the correct code (the
sequence stream). Both extra streams derive from one mutant pair, so they
are present together or not at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, DegeneratePairError, InvalidPairError
from .lexer import extract_code_blocks
from .mutation import MutantPair, make_counterpart
from .vocab import Vocabulary

__all__ = [
    "InstructionSample",
    "Template",
    "TEMPLATES",
    "ComparisonSample",
    "CctRecord",
    "first_diff_index",
    "build_comparison",
    "render_template",
    "build_cct_dataset",
    "render_lm_prompt",
    "read_instruction_samples",
    "write_instruction_samples",
    "write_records",
    "read_records",
]


@dataclass(frozen=True)
class InstructionSample:
    instruction: str
    input: Optional[str]
    output: str

    def __post_init__(self):
        if not self.instruction or not self.output:
            raise ValueError("instruction and output must be non-empty")


@dataclass(frozen=True)
class Template:
    id: int
    body: str

    def __post_init__(self):
        if "<Bug output>" not in self.body:
            raise ValueError("template body must mention <Bug output>")


TEMPLATES: tuple[Template, ...] = (
    Template(
        1,
        "Given the instruction: <Instruction>\n"
        "Here is a piece of code with bugs: <Bug output>\n"
        "Fix the bugs in the code.",
    ),
    Template(
        2,
        "<Bug output> is the code implementation of <Instruction>,\n"
        "However, there are some bugs in the code\n"
        "Please fix bugs in the code.",
    ),
    Template(3, "Find the bugs in the <Bug output>"),
)


@dataclass(frozen=True)
class ComparisonSample:
    prompt_tokens: list[int]
    correct_tokens: list[int]
    buggy_tokens: list[int]
    diff_index: int
    aligned_length: int

    def __post_init__(self):
        m = max(len(self.correct_tokens), len(self.buggy_tokens))
        if self.aligned_length != m:
            raise ValueError("aligned_length must be the max of the two code lengths")
        if not 0 <= self.diff_index < self.aligned_length:
            raise ValueError("diff_index out of range")
        for j in range(self.diff_index):
            if self.correct_tokens[j] != self.buggy_tokens[j]:
                raise ValueError("sides differ before diff_index")


@dataclass(frozen=True)
class CctRecord:
    lm: InstructionSample
    comparison: Optional[ComparisonSample] = None
    seq: Optional[InstructionSample] = None

    def __post_init__(self):
        if (self.comparison is None) != (self.seq is None):
            raise ValueError("comparison and seq streams must come together")


def first_diff_index(a, b) -> int:
    """Smallest index where the sequences diverge; length of the shorter one
    when it is a strict prefix. Raises InvalidPairError for equal inputs."""
    limit = min(len(a), len(b))
    for j in range(limit):
        if a[j] != b[j]:
            return j
    if len(a) == len(b):
        raise InvalidPairError("sequences are identical; no differing segment")
    return limit


INSTRUCTION_HEADER = "Instruction:\n"
INPUT_HEADER = "Input:\n"
RESPONSE_HEADER = "Response:\n"


def render_lm_prompt(instruction: str, input_text: Optional[str] = None) -> str:
    """The textual prefix the model conditions on for one sample."""
    parts = [INSTRUCTION_HEADER, instruction, "\n"]
    if input_text:
        parts += [INPUT_HEADER, input_text, "\n"]
    parts.append(RESPONSE_HEADER)
    return "".join(parts)


def render_template(template: Template, instr: InstructionSample, pair: MutantPair) -> InstructionSample:
    """Render a fix-the-bug sample: templated instruction, correct code as
    the target output."""
    body = template.body.replace("<Instruction>", instr.instruction)
    body = body.replace("<Bug output>", pair.buggy)
    return InstructionSample(instruction=body, input=None, output=pair.correct)


def build_comparison(pair: MutantPair, instr: InstructionSample, vocab: Vocabulary) -> ComparisonSample:
    """Token-align a mutant pair under `vocab`.

    The prompt prefix covers the instruction, optional input, and any output
    text before the code block, so both sides share it exactly. Raises
    DegeneratePairError when the two sides encode identically.
    """
    blocks = extract_code_blocks(instr.output)
    preceding = ""
    for block in blocks:
        if block.text == pair.correct:
            preceding = instr.output[: block.origin[0]]
            break
    prompt_text = render_lm_prompt(instr.instruction, instr.input) + preceding
    prompt_tokens = [Vocabulary.BOS] + vocab.encode(prompt_text)
    correct_tokens = vocab.encode(pair.correct)
    buggy_tokens = vocab.encode(pair.buggy)
    if correct_tokens == buggy_tokens:
        raise DegeneratePairError("pair encodes identically under this vocabulary")
    diff = first_diff_index(correct_tokens, buggy_tokens)
    return ComparisonSample(
        prompt_tokens=prompt_tokens,
        correct_tokens=correct_tokens,
        buggy_tokens=buggy_tokens,
        diff_index=diff,
        aligned_length=max(len(correct_tokens), len(buggy_tokens)),
    )


def build_cct_dataset(
    samples: list[InstructionSample], seed: int, vocab: Vocabulary
) -> list[CctRecord]:
    """One record per sample; mutable first code blocks gain the comparison
    and sequence streams. Deterministic for a fixed seed."""
    records: list[CctRecord] = []
    for index, sample in enumerate(samples):
        rng = np.random.default_rng([seed, index])
        mutation_seed = int(rng.integers(2**32))
        template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        blocks = extract_code_blocks(sample.output)
        pair = make_counterpart(blocks[0], mutation_seed) if blocks else None
        if pair is None:
            records.append(CctRecord(lm=sample))
            continue
        try:
            comparison = build_comparison(pair, sample, vocab)
        except DegeneratePairError:
            records.append(CctRecord(lm=sample))
            continue
        records.append(
            CctRecord(lm=sample, comparison=comparison, seq=render_template(template, sample, pair))
        )
    return records


# ---------------------------------------------------------------------------
# JSON-lines io (UTF-8, LF)


def _sample_to_dict(sample: InstructionSample) -> dict:
    return {"instruction": sample.instruction, "input": sample.input, "output": sample.output}


def _sample_from_dict(obj: dict) -> InstructionSample:
    return InstructionSample(
        instruction=obj["instruction"], input=obj.get("input"), output=obj["output"]
    )


def read_instruction_samples(path: str | Path) -> list[InstructionSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                samples.append(_sample_from_dict(obj))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}: malformed record on line {lineno}: {exc}") from exc
    return samples


def write_instruction_samples(path: str | Path, samples: list[InstructionSample]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(json.dumps(_sample_to_dict(sample), ensure_ascii=False) + "\n")


def record_to_dict(record: CctRecord) -> dict:
    obj: dict = _sample_to_dict(record.lm)
    if record.comparison is not None:
        obj["comparison"] = {
            "prompt_tokens": record.comparison.prompt_tokens,
            "correct_tokens": record.comparison.correct_tokens,
            "buggy_tokens": record.comparison.buggy_tokens,
            "diff_index": record.comparison.diff_index,
            "aligned_length": record.comparison.aligned_length,
        }
        obj["seq"] = _sample_to_dict(record.seq)
    return obj


def record_from_dict(obj: dict) -> CctRecord:
    comparison = None
    seq = None
    if "comparison" in obj:
        c = obj["comparison"]
        comparison = ComparisonSample(
            prompt_tokens=list(c["prompt_tokens"]),
            correct_tokens=list(c["correct_tokens"]),
            buggy_tokens=list(c["buggy_tokens"]),
            diff_index=c["diff_index"],
            aligned_length=c["aligned_length"],
        )
        seq = _sample_from_dict(obj["seq"])
    return CctRecord(lm=_sample_from_dict(obj), comparison=comparison, seq=seq)


def write_records(path: str | Path, records: list[CctRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[CctRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}: malformed record on line {lineno}: {exc}") from exc
    return records
