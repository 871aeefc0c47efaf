"""Nucleus (top-p) sampling and batched autoregressive generation.

Next-token probabilities are sorted descending, the smallest prefix whose
cumulative mass reaches top_p is kept and renormalized, and one token is
drawn; temperature rescales logits before the softmax and temperature 0
degenerates to greedy argmax. Generation keeps per-layer key/value caches
so each new token costs one incremental step, with all n samples advanced
together as a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContextOverflowError
from .model import CctModel, _gelu, _layer_norm, _softmax_rows, forward
from .samples import render_lm_prompt
from .vocab import Vocabulary

__all__ = ["SamplingConfig", "nucleus_pick", "generate", "sample_completions"]


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 0.2
    top_p: float = 0.95
    n_samples: int = 20
    max_new_tokens: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.temperature < 0.0:
            raise ValueError("temperature must be non-negative")
        if self.n_samples < 1 or self.max_new_tokens < 1:
            raise ValueError("n_samples and max_new_tokens must be >= 1")


def nucleus_pick(logits: np.ndarray, temperature: float, top_p: float, rng) -> int:
    """Draw one token id from the nucleus of a logit vector."""
    if temperature == 0.0:
        return int(np.argmax(logits))
    scaled = logits / temperature
    shifted = scaled - scaled.max()
    probs = np.exp(shifted)
    probs /= probs.sum()
    order = np.argsort(-probs, kind="stable")
    cumulative = np.cumsum(probs[order])
    cutoff = int(np.searchsorted(cumulative, top_p, side="left"))
    cutoff = min(cutoff, len(order) - 1)
    kept = order[: cutoff + 1]
    kept_probs = probs[kept]
    kept_probs /= kept_probs.sum()
    return int(rng.choice(kept, p=kept_probs))


class _KvCache:
    """Per-layer key/value buffers for a batch of sequences."""

    def __init__(self, model: CctModel, batch: int):
        cfg = model.config
        shape = (batch, cfg.n_heads, cfg.context_length, cfg.head_dim)
        self.k = [np.zeros(shape) for _ in range(cfg.n_layers)]
        self.v = [np.zeros(shape) for _ in range(cfg.n_layers)]
        self.length = 0

    def fill_from_prefill(self, layer_kv: list[tuple[np.ndarray, np.ndarray]]) -> None:
        t_len = layer_kv[0][0].shape[1]
        for layer, (k, v) in enumerate(layer_kv):
            self.k[layer][:, :, :t_len, :] = k[None, :, :, :]
            self.v[layer][:, :, :t_len, :] = v[None, :, :, :]
        self.length = t_len


def _step(model: CctModel, cache: _KvCache, tokens: np.ndarray) -> np.ndarray:
    """Advance every row by one token; returns next-token logits (B, V)."""
    cfg = model.config
    params = model.params
    batch = tokens.shape[0]
    pos = cache.length
    if pos >= cfg.context_length:
        raise ContextOverflowError("generation reached the context length")
    scale = 1.0 / np.sqrt(cfg.head_dim)

    x = params["wte"][tokens] + params["wpe"][pos]
    for layer in range(cfg.n_layers):
        p = f"layer{layer}."
        a, _ = _layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        qkv = a @ params[p + "qkv_w"] + params[p + "qkv_b"]
        q, k, v = np.split(qkv, 3, axis=-1)
        q = q.reshape(batch, cfg.n_heads, cfg.head_dim)
        cache.k[layer][:, :, pos, :] = k.reshape(batch, cfg.n_heads, cfg.head_dim)
        cache.v[layer][:, :, pos, :] = v.reshape(batch, cfg.n_heads, cfg.head_dim)
        keys = cache.k[layer][:, :, : pos + 1, :]
        values = cache.v[layer][:, :, : pos + 1, :]
        scores = np.einsum("bhd,bhpd->bhp", q, keys) * scale
        probs = _softmax_rows(scores)
        heads_out = np.einsum("bhp,bhpd->bhd", probs, values)
        merged = heads_out.reshape(batch, cfg.d_model)
        x = x + merged @ params[p + "attn_out_w"] + params[p + "attn_out_b"]
        m, _ = _layer_norm(x, params[p + "ln2_g"], params[p + "ln2_b"])
        act, _ = _gelu(m @ params[p + "mlp_in_w"] + params[p + "mlp_in_b"])
        x = x + act @ params[p + "mlp_out_w"] + params[p + "mlp_out_b"]
    hidden, _ = _layer_norm(x, params["lnf_g"], params["lnf_b"])
    cache.length = pos + 1
    return hidden @ params["lm_head_w"] + params["lm_head_b"]


def generate(model: CctModel, prompt_ids: list[int], config: SamplingConfig) -> list[list[int]]:
    """Sample `n_samples` continuations of `prompt_ids`, each ending at EOS
    or after max_new_tokens. Seeded and reproducible."""
    cfg = model.config
    if len(prompt_ids) >= cfg.context_length:
        raise ContextOverflowError(
            f"prompt of {len(prompt_ids)} ids leaves no room in context "
            f"{cfg.context_length}"
        )
    rng = np.random.default_rng(config.seed)
    batch = config.n_samples

    prefill = forward(model.params, cfg, np.asarray(prompt_ids, dtype=np.int64))
    cache = _KvCache(model, batch)
    cache.fill_from_prefill([(c["k"], c["v"]) for c in prefill.layers])
    logits = np.repeat(prefill.logits[-1][None, :], batch, axis=0)

    completions: list[list[int]] = [[] for _ in range(batch)]
    done = np.zeros(batch, dtype=bool)
    for step_idx in range(config.max_new_tokens):
        tokens = np.zeros(batch, dtype=np.int64)
        for row in range(batch):
            if done[row]:
                tokens[row] = Vocabulary.PAD
                continue
            picked = nucleus_pick(logits[row], config.temperature, config.top_p, rng)
            tokens[row] = picked
            if picked == Vocabulary.EOS:
                done[row] = True
            else:
                completions[row].append(picked)
        if (
            done.all()
            or cache.length >= cfg.context_length
            or step_idx == config.max_new_tokens - 1
        ):
            break
        logits = _step(model, cache, tokens)
    return completions


def sample_completions(model: CctModel, prompt: str, config: SamplingConfig) -> list[str]:
    """Treat `prompt` as an instruction, sample n responses, decode to text."""
    prompt_ids = [Vocabulary.BOS] + model.vocab.encode(render_lm_prompt(prompt))
    token_rows = generate(model, prompt_ids, config)
    return [model.vocab.decode(row) for row in token_rows]
