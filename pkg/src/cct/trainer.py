"""Training loop: record preparation, the combined objective, and Adam.

Records are encoded once up front. Every step runs each record's LM pass,
the two comparison passes (correct side, buggy side, identical prompt
prefix, shorter side padded to the aligned length), and the sequence pass;
gradients from the token hinge flow through the scalar head into the
backbone. Batch loss is the mean of per-record totals. Fixed seeds give
bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ContextOverflowError, TrainingAbort
from .losses import (
    Ablation,
    LossBreakdown,
    effective_coefficients,
    lm_loss_and_grad,
    token_comparison_loss_and_grads,
)
from .model import CctModel, ModelConfig, backward, forward, zero_grads
from .samples import CctRecord, InstructionSample, render_lm_prompt
from .vocab import Vocabulary

__all__ = [
    "TrainingConfig",
    "PreparedRecord",
    "prepare_records",
    "Trainer",
    "record_losses_and_grads",
]


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float = 2.0
    beta: float = 0.5
    learning_rate: float = 2e-5
    weight_decay: float = 0.0
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0
    ablation: Ablation = Ablation.FULL

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass(frozen=True)
class _LmStream:
    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class _ComparisonStream:
    ids_correct: np.ndarray
    ids_buggy: np.ndarray
    region_start: int
    diff_index: int
    aligned_length: int


@dataclass(frozen=True)
class PreparedRecord:
    record_id: int
    lm: _LmStream
    comparison: Optional[_ComparisonStream]
    seq: Optional[_LmStream]


def _encode_lm_stream(sample: InstructionSample, vocab: Vocabulary) -> _LmStream:
    prompt_ids = vocab.encode(render_lm_prompt(sample.instruction, sample.input))
    output_ids = vocab.encode(sample.output)
    full = [Vocabulary.BOS] + prompt_ids + output_ids + [Vocabulary.EOS]
    inputs = np.array(full[:-1], dtype=np.int64)
    targets = np.array(full[1:], dtype=np.int64)
    # targets[j] == full[j + 1]; output tokens and the EOS terminator are the
    # supervised positions
    output_start = 1 + len(prompt_ids)
    mask = np.arange(1, len(full)) >= output_start
    return _LmStream(inputs=inputs, targets=targets, mask=mask)


def prepare_records(
    records: list[CctRecord], vocab: Vocabulary, config: ModelConfig
) -> list[PreparedRecord]:
    prepared = []
    for index, record in enumerate(records):
        lm = _encode_lm_stream(record.lm, vocab)
        comparison = None
        seq = None
        if record.comparison is not None:
            c = record.comparison
            prompt = list(c.prompt_tokens)
            pad_c = [Vocabulary.PAD] * (c.aligned_length - len(c.correct_tokens))
            pad_b = [Vocabulary.PAD] * (c.aligned_length - len(c.buggy_tokens))
            comparison = _ComparisonStream(
                ids_correct=np.array(prompt + c.correct_tokens + pad_c, dtype=np.int64),
                ids_buggy=np.array(prompt + c.buggy_tokens + pad_b, dtype=np.int64),
                region_start=len(prompt),
                diff_index=c.diff_index,
                aligned_length=c.aligned_length,
            )
            seq = _encode_lm_stream(record.seq, vocab)
        longest = max(
            len(lm.inputs) + 1,
            len(comparison.ids_correct) if comparison else 0,
            len(comparison.ids_buggy) if comparison else 0,
            len(seq.inputs) + 1 if seq else 0,
        )
        if longest > config.context_length:
            raise ContextOverflowError(
                f"record {index} needs {longest} positions but context_length is "
                f"{config.context_length}"
            )
        prepared.append(PreparedRecord(record_id=index, lm=lm, comparison=comparison, seq=seq))
    return prepared


def _lm_pass(params, config, stream: _LmStream, grads, grad_scale: float) -> float:
    cache = forward(params, config, stream.inputs)
    loss, dlogits = lm_loss_and_grad(cache.logits, stream.targets, stream.mask)
    if grad_scale != 0.0:
        backward(params, config, cache, dlogits=dlogits * grad_scale, grads=grads)
    return loss


def _comparison_pass(
    params, config, comp: _ComparisonStream, grads, grad_scale: float
) -> float:
    cache_c = forward(params, config, comp.ids_correct, compute_logits=False)
    cache_b = forward(params, config, comp.ids_buggy, compute_logits=False)
    lo = comp.region_start
    hi = lo + comp.aligned_length
    loss, d_hc, d_hb, d_hw, d_hbias = token_comparison_loss_and_grads(
        cache_c.hidden[lo:hi],
        cache_b.hidden[lo:hi],
        comp.diff_index,
        comp.aligned_length,
        params["head_w"],
        params["head_b"],
    )
    if grad_scale != 0.0:
        full_c = np.zeros_like(cache_c.hidden)
        full_c[lo:hi] = d_hc * grad_scale
        full_b = np.zeros_like(cache_b.hidden)
        full_b[lo:hi] = d_hb * grad_scale
        backward(params, config, cache_c, dhidden=full_c, grads=grads)
        backward(params, config, cache_b, dhidden=full_b, grads=grads)
        grads["head_w"] += d_hw * grad_scale
        grads["head_b"] += d_hbias * grad_scale
    return loss


def record_losses_and_grads(
    params,
    config: ModelConfig,
    record: PreparedRecord,
    alpha_eff: float,
    beta_eff: float,
    grads,
    weight: float = 1.0,
) -> tuple[float, float, float]:
    """Losses for one record; gradients accumulate scaled by each term's
    coefficient times `weight`. Streams whose coefficient is zero are
    skipped entirely."""
    lm = _lm_pass(params, config, record.lm, grads, weight)
    token = 0.0
    seq = 0.0
    if record.comparison is not None and alpha_eff != 0.0:
        token = _comparison_pass(params, config, record.comparison, grads, alpha_eff * weight)
    if record.seq is not None and beta_eff != 0.0:
        seq = _lm_pass(params, config, record.seq, grads, beta_eff * weight)
    return lm, token, seq


class AdamState:
    def __init__(self, params: dict[str, np.ndarray]):
        self.step = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def update(self, params, grads, lr, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
        self.step += 1
        correction1 = 1.0 - beta1**self.step
        correction2 = 1.0 - beta2**self.step
        for name, p in params.items():
            g = grads[name]
            self.m[name] = beta1 * self.m[name] + (1.0 - beta1) * g
            self.v[name] = beta2 * self.v[name] + (1.0 - beta2) * g**2
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            if weight_decay:
                p -= lr * weight_decay * p
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, arr in self.m.items():
            out["adam_m." + name] = arr
        for name, arr in self.v.items():
            out["adam_v." + name] = arr
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray], step: int) -> None:
        self.step = step
        for name in self.m:
            self.m[name] = tensors["adam_m." + name].copy()
            self.v[name] = tensors["adam_v." + name].copy()


class Trainer:
    def __init__(self, model: CctModel, config: TrainingConfig):
        self.model = model
        self.config = config
        self.optimizer = AdamState(model.params)
        self.global_step = 0

    def train_step(self, batch: list[PreparedRecord]) -> LossBreakdown:
        """One optimizer update on the mean combined loss of `batch`."""
        if not batch:
            raise ValueError("batch must be non-empty")
        params = self.model.params
        cfg = self.model.config
        alpha_eff, beta_eff = effective_coefficients(
            self.config.alpha, self.config.beta, self.config.ablation
        )
        grads = zero_grads(params)
        weight = 1.0 / len(batch)
        lm_sum = token_sum = seq_sum = 0.0
        for record in batch:
            lm, token, seq = record_losses_and_grads(
                params, cfg, record, alpha_eff, beta_eff, grads, weight
            )
            total = lm + alpha_eff * token + beta_eff * seq
            if not np.isfinite(total):
                raise TrainingAbort(
                    f"non-finite loss on record {record.record_id} "
                    f"(lm={lm}, token={token}, seq={seq})",
                    record_id=record.record_id,
                )
            lm_sum += lm
            token_sum += token
            seq_sum += seq
        n = len(batch)
        breakdown = LossBreakdown(
            lm=lm_sum / n,
            token=token_sum / n,
            seq=seq_sum / n,
            total=(lm_sum + alpha_eff * token_sum + beta_eff * seq_sum) / n,
        )
        self.optimizer.update(
            params, grads, self.config.learning_rate, self.config.weight_decay
        )
        self.global_step += 1
        return breakdown

    def batches(self, records: list[PreparedRecord]):
        """Deterministic epoch schedule: seeded shuffle, then fixed-size
        chunks. Yields (step_index, batch) over all epochs."""
        step = 0
        for epoch in range(self.config.epochs):
            order = np.random.default_rng([self.config.seed, epoch]).permutation(len(records))
            for lo in range(0, len(records), self.config.batch_size):
                batch = [records[i] for i in order[lo : lo + self.config.batch_size]]
                yield step, batch
                step += 1

    def train(
        self,
        records: list[PreparedRecord],
        on_step: Optional[Callable[[int, LossBreakdown], None]] = None,
    ) -> list[LossBreakdown]:
        """Run the configured epochs. When the trainer already advanced
        (resume), earlier steps of the schedule are skipped so the
        trajectory matches an uninterrupted run."""
        history = []
        for step, batch in self.batches(records):
            if step < self.global_step:
                continue
            breakdown = self.train_step(batch)
            if on_step is not None:
                on_step(step, breakdown)
            history.append(breakdown)
        return history

    def training_meta(self) -> dict:
        return {
            "global_step": self.global_step,
            "optimizer_step": self.optimizer.step,
            "alpha": self.config.alpha,
            "beta": self.config.beta,
            "learning_rate": self.config.learning_rate,
            "weight_decay": self.config.weight_decay,
            "batch_size": self.config.batch_size,
            "epochs": self.config.epochs,
            "seed": self.config.seed,
            "ablation": self.config.ablation.value,
        }

    def load_training_state(self, meta: dict, extra_tensors: dict[str, np.ndarray]) -> None:
        self.global_step = int(meta["global_step"])
        self.optimizer.load_tensors(extra_tensors, int(meta["optimizer_step"]))

    @staticmethod
    def config_from_meta(meta: dict) -> TrainingConfig:
        return TrainingConfig(
            alpha=meta["alpha"],
            beta=meta["beta"],
            learning_rate=meta["learning_rate"],
            weight_decay=meta["weight_decay"],
            batch_size=meta["batch_size"],
            epochs=meta["epochs"],
            seed=meta["seed"],
            ablation=Ablation(meta["ablation"]),
        )
