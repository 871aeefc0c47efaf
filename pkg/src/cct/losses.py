"""The three loss terms and their combination.

* lm_loss: mean negative log-likelihood over the masked output positions.
* token_comparison_loss: unit-margin hinge over per-position scalar scores,
  summed from the first differing token to the aligned length and averaged
  over that range, pushing correct-code scores above buggy-code scores.
* combined: lm + alpha * token + beta * seq, with ablation modes zeroing or
  re-weighting individual terms.

Each loss has an analytic-gradient twin used by the trainer.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Ablation",
    "LossBreakdown",
    "lm_loss",
    "lm_loss_and_grad",
    "token_comparison_loss",
    "token_comparison_loss_and_grads",
    "combined_loss",
    "effective_coefficients",
]


class Ablation(Enum):
    FULL = "full"
    NO_SEQ = "no_seq"
    NO_TOKEN = "no_token"
    INSTRUCT_ONLY = "instruct_only"
    SEQ_DATA_ONLY = "seq_data_only"


def effective_coefficients(alpha: float, beta: float, ablation: Ablation) -> tuple[float, float]:
    """Per-ablation weights for the token and sequence terms.

    SEQ_DATA_ONLY folds the rendered fix samples into training as plain
    instruction data: no token term, sequence term at weight 1.
    """
    if ablation is Ablation.FULL:
        return alpha, beta
    if ablation is Ablation.NO_SEQ:
        return alpha, 0.0
    if ablation is Ablation.NO_TOKEN:
        return 0.0, beta
    if ablation is Ablation.INSTRUCT_ONLY:
        return 0.0, 0.0
    if ablation is Ablation.SEQ_DATA_ONLY:
        return 0.0, 1.0
    raise ValueError(f"unknown ablation {ablation}")


@dataclass(frozen=True)
class LossBreakdown:
    lm: float
    token: float
    seq: float
    total: float


def lm_loss_and_grad(logits: np.ndarray, target_ids, output_mask) -> tuple[float, np.ndarray]:
    """Mean NLL over the positions selected by output_mask, plus dloss/dlogits.

    The mask must mark exactly the output positions; prompt positions are
    excluded and contribute nothing, so the value is invariant to prompt
    length.
    """
    targets = np.asarray(target_ids, dtype=np.int64)
    mask = np.asarray(output_mask, dtype=bool)
    if logits.shape[0] != targets.shape[0] or mask.shape[0] != targets.shape[0]:
        raise ValueError("logits, targets and mask must agree on sequence length")
    n_out = int(mask.sum())
    if n_out == 0:
        raise ValueError("output mask selects no positions")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    log_probs = shifted[np.arange(len(targets)), targets] - log_z
    loss = -log_probs[mask].mean()

    probs = np.exp(shifted) / np.exp(shifted).sum(axis=-1, keepdims=True)
    dlogits = probs
    dlogits[np.arange(len(targets)), targets] -= 1.0
    dlogits *= mask[:, None] / n_out
    return float(loss), dlogits


def lm_loss(logits: np.ndarray, target_ids, output_mask) -> float:
    return lm_loss_and_grad(logits, target_ids, output_mask)[0]


def token_comparison_loss_and_grads(
    hidden_correct: np.ndarray,
    hidden_buggy: np.ndarray,
    diff_index: int,
    aligned_length: int,
    head_w: np.ndarray,
    head_b: np.ndarray,
):
    """Hinge loss over aligned code positions and all of its gradients.

    Returns (loss, d_hidden_correct, d_hidden_buggy, d_head_w, d_head_b).
    Positions before diff_index contribute nothing; the loss is zero exactly
    when every aligned position clears the unit margin.
    """
    if not 0 <= diff_index < aligned_length:
        raise ValueError("diff_index must satisfy 0 <= diff_index < aligned_length")
    if hidden_correct.shape[0] < aligned_length or hidden_buggy.shape[0] < aligned_length:
        raise ValueError("hidden states must cover the aligned code region")
    span = aligned_length - diff_index
    h_c = hidden_correct[:aligned_length]
    h_b = hidden_buggy[:aligned_length]
    score_c = h_c @ head_w + head_b
    score_b = h_b @ head_w + head_b
    margins = 1.0 - (score_c - score_b)
    margins[:diff_index] = 0.0
    active = margins > 0.0
    loss = float(np.maximum(margins, 0.0)[diff_index:].sum() / span)

    dscore_c = np.where(active, -1.0 / span, 0.0)
    dscore_c[:diff_index] = 0.0
    dscore_b = -dscore_c
    d_hc = np.zeros_like(hidden_correct)
    d_hb = np.zeros_like(hidden_buggy)
    d_hc[:aligned_length] = dscore_c[:, None] * head_w
    d_hb[:aligned_length] = dscore_b[:, None] * head_w
    d_head_w = h_c.T @ dscore_c + h_b.T @ dscore_b
    d_head_b = np.asarray(dscore_c.sum() + dscore_b.sum())
    return loss, d_hc, d_hb, d_head_w, d_head_b


def token_comparison_loss(
    hidden_correct: np.ndarray,
    hidden_buggy: np.ndarray,
    diff_index: int,
    aligned_length: int,
    head_w: np.ndarray,
    head_b: np.ndarray,
) -> float:
    return token_comparison_loss_and_grads(
        hidden_correct, hidden_buggy, diff_index, aligned_length, head_w, head_b
    )[0]


def combined_loss(
    lm: float,
    token: float,
    seq: float,
    alpha: float,
    beta: float,
    ablation: Ablation = Ablation.FULL,
) -> LossBreakdown:
    """Weighted total; missing streams enter as 0."""
    eff_alpha, eff_beta = effective_coefficients(alpha, beta, ablation)
    token_term = eff_alpha * token
    seq_term = eff_beta * seq
    return LossBreakdown(lm=lm, token=token, seq=seq, total=lm + token_term + seq_term)
