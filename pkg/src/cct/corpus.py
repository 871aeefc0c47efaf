"""Synthetic instruction corpus and held-out functions for desk-scale runs.

Functions come from small parametric families (arithmetic, comparisons,
list/string walks) crossed with a shared pool of neutral names and argument
spellings. Train and held-out draws use disjoint (family, name) pairings,
while every name lexeme is guaranteed to appear somewhere in training, so a
trained vocabulary always covers the held-out prompts. Tests use asymmetric
values so single-token edits are almost always behaviorally visible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .evaluation import DEFAULT_TASK_TIMEOUT, HeldOutFunction
from .samples import InstructionSample

__all__ = ["make_instruction_corpus", "make_heldout_functions", "FAMILIES"]


@dataclass(frozen=True)
class FunctionFamily:
    key: str
    arg_pool: tuple[tuple[str, ...], ...]
    describe: Callable[[tuple[str, ...]], str]
    body: Callable[[tuple[str, ...]], str]
    tests: Callable[[str], str]


_TWO_NUM = (("a", "b"), ("x", "y"), ("m", "n"), ("p", "q"), ("u", "w"))
_ONE_NUM = (("n",), ("k",), ("z",))
_ONE_SEQ = (("xs",), ("vals",), ("items",))
_ONE_STR = (("s",), ("txt",))


def _fam(key, arg_pool, describe, body, tests):
    return FunctionFamily(key=key, arg_pool=arg_pool, describe=describe, body=body, tests=tests)


FAMILIES: tuple[FunctionFamily, ...] = (
    _fam(
        "add",
        _TWO_NUM,
        lambda a: f"the sum of {a[0]} and {a[1]}",
        lambda a: f"    return {a[0]} + {a[1]}\n",
        lambda f: f"assert {f}(7, 3) == 10\nassert {f}(2, 9) == 11\nassert {f}(-4, 6) == 2\n",
    ),
    _fam(
        "diff",
        _TWO_NUM,
        lambda a: f"the result of subtracting {a[1]} from {a[0]}",
        lambda a: f"    return {a[0]} - {a[1]}\n",
        lambda f: f"assert {f}(7, 3) == 4\nassert {f}(10, 4) == 6\nassert {f}(3, 8) == -5\n",
    ),
    _fam(
        "prod",
        _TWO_NUM,
        lambda a: f"the product of {a[0]} and {a[1]}",
        lambda a: f"    return {a[0]} * {a[1]}\n",
        lambda f: f"assert {f}(7, 3) == 21\nassert {f}(2, 9) == 18\nassert {f}(-4, 6) == -24\n",
    ),
    _fam(
        "bigger",
        _TWO_NUM,
        lambda a: f"the larger of {a[0]} and {a[1]}",
        lambda a: f"    if {a[0]} > {a[1]}:\n        return {a[0]}\n    return {a[1]}\n",
        lambda f: f"assert {f}(7, 3) == 7\nassert {f}(2, 9) == 9\nassert {f}(-4, -6) == -4\n",
    ),
    _fam(
        "smaller",
        _TWO_NUM,
        lambda a: f"the smaller of {a[0]} and {a[1]}",
        lambda a: f"    if {a[0]} < {a[1]}:\n        return {a[0]}\n    return {a[1]}\n",
        lambda f: f"assert {f}(7, 3) == 3\nassert {f}(2, 9) == 2\nassert {f}(-4, -6) == -6\n",
    ),
    _fam(
        "gap",
        _TWO_NUM,
        lambda a: f"the absolute difference between {a[0]} and {a[1]}",
        lambda a: (
            f"    if {a[0]} > {a[1]}:\n        return {a[0]} - {a[1]}\n"
            f"    return {a[1]} - {a[0]}\n"
        ),
        lambda f: f"assert {f}(7, 3) == 4\nassert {f}(2, 9) == 7\nassert {f}(6, 6) == 0\n",
    ),
    _fam(
        "double",
        _ONE_NUM,
        lambda a: f"twice the value of {a[0]}",
        lambda a: f"    return {a[0]} + {a[0]}\n",
        lambda f: f"assert {f}(7) == 14\nassert {f}(-3) == -6\nassert {f}(5) == 10\n",
    ),
    _fam(
        "square",
        _ONE_NUM,
        lambda a: f"the square of {a[0]}",
        lambda a: f"    return {a[0]} * {a[0]}\n",
        lambda f: f"assert {f}(3) == 9\nassert {f}(-4) == 16\nassert {f}(5) == 25\n",
    ),
    _fam(
        "size",
        _ONE_SEQ,
        lambda a: f"the number of items in {a[0]}",
        lambda a: f"    return len({a[0]})\n",
        lambda f: f"assert {f}([1, 2, 3]) == 3\nassert {f}([]) == 0\nassert {f}('abcd') == 4\n",
    ),
    _fam(
        "total",
        _ONE_SEQ,
        lambda a: f"the sum of all items in {a[0]}",
        lambda a: (
            f"    out = 0\n    for v in {a[0]}:\n        out = out + v\n    return out\n"
        ),
        lambda f: f"assert {f}([1, 2, 3]) == 6\nassert {f}([5]) == 5\nassert {f}([2, -7]) == -5\n",
    ),
    _fam(
        "trim_front",
        _ONE_STR,
        lambda a: f"{a[0]} shortened from the front until at most 2 characters remain",
        lambda a: (
            f"    while len({a[0]}) > 2:\n        {a[0]} = {a[0]}[1:]\n    return {a[0]}\n"
        ),
        lambda f: f"assert {f}('abcdef') == 'ef'\nassert {f}('xy') == 'xy'\nassert {f}('q') == 'q'\n",
    ),
    _fam(
        "last_of",
        _ONE_SEQ,
        lambda a: f"the last item of {a[0]}",
        lambda a: f"    return {a[0]}[-1]\n",
        lambda f: f"assert {f}([1, 2, 3]) == 3\nassert {f}([7]) == 7\nassert {f}('abc') == 'c'\n",
    ),
    _fam(
        "first_of",
        _ONE_SEQ,
        lambda a: f"the first item of {a[0]}",
        lambda a: f"    return {a[0]}[0]\n",
        lambda f: f"assert {f}([4, 2, 3]) == 4\nassert {f}([7]) == 7\nassert {f}('abc') == 'a'\n",
    ),
    _fam(
        "is_even",
        _ONE_NUM,
        lambda a: f"whether {a[0]} is even",
        lambda a: f"    return {a[0]} % 2 == 0\n",
        lambda f: f"assert {f}(4) == True\nassert {f}(7) == False\nassert {f}(0) == True\n",
    ),
    _fam(
        "both_positive",
        _TWO_NUM,
        lambda a: f"whether both {a[0]} and {a[1]} are positive",
        lambda a: f"    return {a[0]} > 0 and {a[1]} > 0\n",
        lambda f: (
            f"assert {f}(1, 2) == True\nassert {f}(-1, 2) == False\n"
            f"assert {f}(0, 5) == False\nassert {f}(3, -4) == False\n"
        ),
    ),
)

_VERBS = ("get", "calc", "find", "make", "take", "run")
_NOUNS = ("value", "result", "item", "total", "score", "count", "size", "point", "level", "mark")
NAMES: tuple[str, ...] = tuple(f"{v}_{n}" for v in _VERBS for n in _NOUNS)

_PHRASINGS = (
    "Write a Python function {sig} that returns {what}.",
    "Implement a function {sig} returning {what}.",
    "Create the Python function {sig}; it should return {what}.",
)


def _is_heldout_combo(family_index: int, name_index: int) -> bool:
    return (name_index + 3 * family_index) % 5 == 0


def _function_code(name: str, args: tuple[str, ...], family: FunctionFamily) -> str:
    return f"def {name}({', '.join(args)}):\n{family.body(args)}"


def _instruction_text(rng, name: str, args: tuple[str, ...], family: FunctionFamily) -> str:
    phrasing = _PHRASINGS[int(rng.integers(len(_PHRASINGS)))]
    sig = f"{name}({', '.join(args)})"
    return phrasing.format(sig=sig, what=family.describe(args))


def _train_sample(rng, family_index: int, name_index: int) -> InstructionSample:
    family = FAMILIES[family_index]
    name = NAMES[name_index]
    args = family.arg_pool[int(rng.integers(len(family.arg_pool)))]
    code = _function_code(name, args, family)
    output = f"```python\n{code}```"
    if rng.random() < 0.25:
        output = "Here is the code:\n" + output
    return InstructionSample(
        instruction=_instruction_text(rng, name, args, family), input=None, output=output
    )


def make_instruction_corpus(n_samples: int, seed: int) -> list[InstructionSample]:
    """Seeded corpus of n instruction/code samples over the train pairings.

    The first len(NAMES) samples cycle through every function name so that
    all name lexemes enter the training vocabulary.
    """
    rng = np.random.default_rng([seed, 0])
    train_combos = [
        (f, n)
        for f in range(len(FAMILIES))
        for n in range(len(NAMES))
        if not _is_heldout_combo(f, n)
    ]
    by_name: dict[int, list[int]] = {}
    for f, n in train_combos:
        by_name.setdefault(n, []).append(f)
    samples = []
    for i in range(n_samples):
        if i < len(NAMES):
            name_index = i
            fams = by_name[name_index]
            family_index = fams[int(rng.integers(len(fams)))]
        else:
            family_index, name_index = train_combos[int(rng.integers(len(train_combos)))]
        samples.append(_train_sample(rng, family_index, name_index))
    return samples


def make_heldout_functions(n_functions: int, seed: int) -> list[HeldOutFunction]:
    """Seeded held-out set drawn from pairings never seen in training."""
    rng = np.random.default_rng([seed, 1])
    heldout_combos = [
        (f, n)
        for f in range(len(FAMILIES))
        for n in range(len(NAMES))
        if _is_heldout_combo(f, n)
    ]
    picks = rng.permutation(len(heldout_combos))[:n_functions]
    functions = []
    for i, pick in enumerate(picks):
        family_index, name_index = heldout_combos[int(pick)]
        family = FAMILIES[family_index]
        name = NAMES[name_index]
        args = family.arg_pool[int(rng.integers(len(family.arg_pool)))]
        functions.append(
            HeldOutFunction(
                task_id=f"task_{i:03d}_{family.key}_{name}",
                instruction=_instruction_text(rng, name, args, family),
                code=_function_code(name, args, family),
                tests=family.tests(name),
                entry_point=name,
                timeout=DEFAULT_TASK_TIMEOUT,
            )
        )
    return functions
