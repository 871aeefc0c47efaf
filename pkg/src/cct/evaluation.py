"""Bug-fix benchmark: suite construction, sandboxed execution, pass@k.

Each task pairs a buggy function (one seeded edit away from a reference
implementation) with an assertion program. Tasks whose mutant still passes
its tests are discarded at build time, so a kept task always has
reference -> pass and buggy -> fail. Candidates run in fresh subprocesses
under a configurable command template with a hard wall-clock timeout; the
corpus score is the unweighted mean of the per-task unbiased pass@k
estimates.
"""

from __future__ import annotations

import json
import logging
import os
import signal
import subprocess
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, SandboxConfigError
from .lexer import CodeBlock, extract_code_blocks
from .mutation import make_counterpart
from .samples import TEMPLATES, InstructionSample, render_template
from .sampling import SamplingConfig, sample_completions

__all__ = [
    "EvalTask",
    "EvalResult",
    "RunStatus",
    "SandboxConfig",
    "HeldOutFunction",
    "build_eval_suite",
    "run_candidate",
    "pass_at_k",
    "evaluate",
    "read_tasks",
    "write_tasks",
    "write_results",
]

logger = logging.getLogger(__name__)

DEFAULT_TASK_TIMEOUT = 2.0


class RunStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    TIMEOUT = "timeout"
    CRASH_OR_ERROR = "crash_or_error"


@dataclass(frozen=True)
class SandboxConfig:
    """Command template with a {file} placeholder, plus a worker bound for
    concurrent candidate runs."""

    command: tuple[str, ...] = ()
    workers: int = 4

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolved_command(self, file_path: str) -> list[str]:
        command = self.command or (sys.executable, "-I", "{file}")
        if not any("{file}" in part for part in command):
            raise SandboxConfigError(
                "sandbox command template must contain a {file} placeholder"
            )
        return [part.replace("{file}", file_path) for part in command]


@dataclass(frozen=True)
class EvalTask:
    task_id: str
    prompt: str
    reference: str
    tests: str
    entry_point: str
    timeout: float = DEFAULT_TASK_TIMEOUT


@dataclass(frozen=True)
class EvalResult:
    task_id: str
    n: int
    correct: int
    pass_at_k: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.correct <= self.n:
            raise ValueError("correct must lie in [0, n]")


@dataclass(frozen=True)
class HeldOutFunction:
    """A correct function plus the tests it passes; raw material for tasks."""

    task_id: str
    instruction: str
    code: str
    tests: str
    entry_point: str
    timeout: float = DEFAULT_TASK_TIMEOUT


def run_candidate(candidate: str, task: EvalTask, sandbox: SandboxConfig) -> RunStatus:
    """Execute candidate + tests in a fresh subprocess; map the outcome.

    Exit 0 -> PASS. A failing assertion -> FAIL; any other nonzero exit ->
    CRASH_OR_ERROR. Exceeding the task timeout kills the whole process
    group and reports TIMEOUT.
    """
    program = candidate.rstrip("\n") + "\n\n" + task.tests.rstrip("\n") + "\n"
    with tempfile.TemporaryDirectory(prefix="cct-sandbox-") as workdir:
        file_path = os.path.join(workdir, "candidate.py")
        with open(file_path, "w", encoding="utf-8") as fh:
            fh.write(program)
        command = sandbox.resolved_command(file_path)
        proc = subprocess.Popen(
            command,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=workdir,
            start_new_session=True,
        )
        try:
            _, stderr = proc.communicate(timeout=task.timeout)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                proc.kill()
            proc.communicate()
            return RunStatus.TIMEOUT
    if proc.returncode == 0:
        return RunStatus.PASS
    if b"AssertionError" in stderr:
        return RunStatus.FAIL
    return RunStatus.CRASH_OR_ERROR


def pass_at_k(n: int, correct: int, k: int) -> float:
    """Unbiased estimate of P(at least one of k draws from the n samples is
    correct): 1 - C(n-correct, k) / C(n, k), in stable product form."""
    if not 0 <= correct <= n:
        raise ValueError("correct must lie in [0, n]")
    if not 1 <= k <= n:
        raise ValueError("k must lie in [1, n]")
    if n - correct < k:
        return 1.0
    wrong = n - correct
    product = 1.0
    for i in range(k):
        product *= (wrong - i) / (n - i)
    return 1.0 - product


def build_eval_suite(
    held_out: list[HeldOutFunction],
    seed: int,
    sandbox: SandboxConfig,
    verify: bool = True,
) -> list[EvalTask]:
    """One task per held-out function, with a seeded single-edit bug.

    The prompt renders the instruction and the buggy code through one of
    the shipped fix templates (seeded choice). When `verify` is on, the
    reference must pass its tests and the mutant must fail them in the
    sandbox; functions violating that are discarded and counted in the log.
    """
    tasks: list[EvalTask] = []
    discarded = 0
    for index, fn in enumerate(held_out):
        rng = np.random.default_rng([seed, index])
        block = CodeBlock(text=fn.code, origin=(0, len(fn.code)), fenced=False)
        pair = make_counterpart(block, int(rng.integers(2**32)))
        if pair is None:
            discarded += 1
            continue
        template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
        instr = InstructionSample(instruction=fn.instruction, input=None, output=fn.code)
        prompt = render_template(template, instr, pair).instruction
        task = EvalTask(
            task_id=fn.task_id,
            prompt=prompt,
            reference=fn.code,
            tests=fn.tests,
            entry_point=fn.entry_point,
            timeout=fn.timeout,
        )
        if verify:
            if run_candidate(task.reference, task, sandbox) is not RunStatus.PASS:
                discarded += 1
                continue
            if run_candidate(pair.buggy, task, sandbox) is RunStatus.PASS:
                discarded += 1
                continue
        tasks.append(task)
    if discarded:
        logger.info("build_eval_suite discarded %d of %d functions", discarded, len(held_out))
    return tasks


def extract_candidate(completion: str) -> str:
    """First fenced block of the completion if any, else the raw text."""
    blocks = extract_code_blocks(completion)
    for block in blocks:
        if block.fenced:
            return block.text
    return completion


def _correct_count(
    candidates: list[str], task: EvalTask, sandbox: SandboxConfig, pool: ThreadPoolExecutor
) -> int:
    unique = sorted(set(candidates))
    statuses = list(pool.map(lambda c: run_candidate(c, task, sandbox), unique))
    verdict = dict(zip(unique, statuses))
    return sum(1 for c in candidates if verdict[c] is RunStatus.PASS)


def evaluate(
    model,
    tasks: list[EvalTask],
    sampling: SamplingConfig,
    sandbox: SandboxConfig,
    ks: tuple[int, ...] = (1,),
) -> tuple[list[EvalResult], dict[int, float]]:
    """Sample n completions per task, execute them, aggregate pass@k.

    Sampling is sequential per task with a per-task derived seed; only the
    sandbox executions fan out over the worker pool, and results are
    reduced in task order, so output is deterministic.
    """
    if not tasks:
        raise ValueError("task list must be non-empty")
    sandbox.resolved_command("probe")  # fail fast on a bad command template
    for k in ks:
        if k > sampling.n_samples:
            raise ValueError(f"k={k} exceeds n_samples={sampling.n_samples}")
    results: list[EvalResult] = []
    with ThreadPoolExecutor(max_workers=sandbox.workers) as pool:
        for index, task in enumerate(tasks):
            per_task = replace(sampling, seed=int(np.random.default_rng([sampling.seed, index]).integers(2**32)))
            completions = sample_completions(model, task.prompt, per_task)
            candidates = [extract_candidate(c) for c in completions]
            correct = _correct_count(candidates, task, sandbox, pool)
            results.append(
                EvalResult(
                    task_id=task.task_id,
                    n=per_task.n_samples,
                    correct=correct,
                    pass_at_k={k: pass_at_k(per_task.n_samples, correct, k) for k in ks},
                )
            )
    corpus = {k: float(np.mean([r.pass_at_k[k] for r in results])) for k in ks}
    return results, corpus


# ---------------------------------------------------------------------------
# Task and result files (JSON-lines)


def write_tasks(path: str | Path, tasks: list[EvalTask]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tasks:
            fh.write(
                json.dumps(
                    {
                        "task_id": t.task_id,
                        "prompt": t.prompt,
                        "reference": t.reference,
                        "tests": t.tests,
                        "entry_point": t.entry_point,
                        "timeout_s": t.timeout,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_tasks(path: str | Path) -> list[EvalTask]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                tasks.append(
                    EvalTask(
                        task_id=obj["task_id"],
                        prompt=obj["prompt"],
                        reference=obj["reference"],
                        tests=obj["tests"],
                        entry_point=obj["entry_point"],
                        timeout=float(obj.get("timeout_s", DEFAULT_TASK_TIMEOUT)),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}: malformed task on line {lineno}: {exc}") from exc
    return tasks


def write_results(path: str | Path, results: list[EvalResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in results:
            obj = {"task_id": r.task_id, "n": r.n, "correct": r.correct}
            for k in sorted(r.pass_at_k):
                obj[f"pass_at_{k}"] = r.pass_at_k[k]
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
