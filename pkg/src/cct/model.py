"""Micro decoder-only transformer in float64 numpy with hand-written
reverse-mode gradients.

Weights live in a flat dict of named arrays. `forward` runs one unbatched
sequence and returns a cache holding every intermediate needed by
`backward`, which accepts gradients w.r.t. the logits and/or the final
hidden states and accumulates parameter gradients. The final hidden states
(post final layer norm) are what both the LM head and the scalar
comparison head read.

Shapes: ids (T,), hidden (T, D), logits (T, V). Attention uses H heads of
width D // H; the causal mask zeroes attention to any later position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContextOverflowError
from .vocab import Vocabulary

__all__ = ["ModelConfig", "CctModel", "init_params", "forward", "backward", "score_hidden"]

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    context_length: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        for name in ("vocab_size", "d_model", "n_layers", "n_heads", "context_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    d, v = config.d_model, config.vocab_size
    params: dict[str, np.ndarray] = {
        "wte": rng.normal(0.0, 0.02, (v, d)),
        "wpe": rng.normal(0.0, 0.02, (config.context_length, d)),
    }
    for layer in range(config.n_layers):
        p = f"layer{layer}."
        params[p + "ln1_g"] = np.ones(d)
        params[p + "ln1_b"] = np.zeros(d)
        params[p + "qkv_w"] = rng.normal(0.0, 0.02, (d, 3 * d))
        params[p + "qkv_b"] = np.zeros(3 * d)
        params[p + "attn_out_w"] = rng.normal(0.0, 0.02, (d, d))
        params[p + "attn_out_b"] = np.zeros(d)
        params[p + "ln2_g"] = np.ones(d)
        params[p + "ln2_b"] = np.zeros(d)
        params[p + "mlp_in_w"] = rng.normal(0.0, 0.02, (d, 4 * d))
        params[p + "mlp_in_b"] = np.zeros(4 * d)
        params[p + "mlp_out_w"] = rng.normal(0.0, 0.02, (4 * d, d))
        params[p + "mlp_out_b"] = np.zeros(d)
    params["lnf_g"] = np.ones(d)
    params["lnf_b"] = np.zeros(d)
    params["lm_head_w"] = rng.normal(0.0, 0.02, (d, v))
    params["lm_head_b"] = np.zeros(v)
    # scalar comparison head: small uniform weights, zero bias; dropped at inference
    params["head_w"] = rng.uniform(-1e-3, 1e-3, d)
    params["head_b"] = np.zeros(())
    return {k: np.ascontiguousarray(a, dtype=np.float64) for k, a in params.items()}


@dataclass
class CctModel:
    """Bundle of weights, architecture and the vocabulary they were trained
    against."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    vocab: Vocabulary

    @classmethod
    def create(cls, config: ModelConfig, vocab: Vocabulary) -> "CctModel":
        if config.vocab_size != len(vocab):
            raise ValueError("config.vocab_size must match the vocabulary size")
        return cls(config=config, params=init_params(config), vocab=vocab)


def _layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma)


def _layer_norm_backward(dout: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv_std, gamma = cache
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


def _gelu(x: np.ndarray):
    u = _GELU_C * (x + _GELU_A * (x * x * x))
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), t


def _gelu_backward(dout: np.ndarray, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * (x * x))
    return dout * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    ids: np.ndarray
    hidden: np.ndarray
    logits: Optional[np.ndarray]
    layers: list[dict] = field(repr=False, default_factory=list)
    lnf_cache: tuple = field(repr=False, default=None)
    final_hidden_pre_norm_input: np.ndarray = field(repr=False, default=None)


def forward(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    ids,
    compute_logits: bool = True,
) -> ForwardCache:
    """Run the model over one token-id sequence.

    Causal by construction: outputs at position i depend only on ids[: i+1].
    Set compute_logits=False when only the hidden states are needed (the
    comparison passes), skipping the LM head matmul.
    """
    ids = np.asarray(ids, dtype=np.int64)
    t_len = ids.shape[0]
    if t_len == 0:
        raise ValueError("empty input sequence")
    if t_len > config.context_length:
        raise ContextOverflowError(
            f"sequence length {t_len} exceeds context_length {config.context_length}"
        )
    if ids.max() >= config.vocab_size or ids.min() < 0:
        raise ValueError("token id out of range")

    h_heads, d_head = config.n_heads, config.head_dim
    scale = 1.0 / np.sqrt(d_head)
    mask = np.triu(np.ones((t_len, t_len), dtype=bool), k=1)

    x = params["wte"][ids] + params["wpe"][:t_len]
    layer_caches = []
    for layer in range(config.n_layers):
        p = f"layer{layer}."
        cache: dict = {"x_in": x}
        a, ln1c = _layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        qkv = a @ params[p + "qkv_w"] + params[p + "qkv_b"]
        q, k, v = np.split(qkv, 3, axis=-1)
        # (T, D) -> (H, T, Dh)
        q = q.reshape(t_len, h_heads, d_head).transpose(1, 0, 2)
        k = k.reshape(t_len, h_heads, d_head).transpose(1, 0, 2)
        v = v.reshape(t_len, h_heads, d_head).transpose(1, 0, 2)
        scores = (q @ k.transpose(0, 2, 1)) * scale
        scores[:, mask] = -np.inf
        attn_probs = _softmax_rows(scores)
        heads_out = attn_probs @ v
        merged = heads_out.transpose(1, 0, 2).reshape(t_len, config.d_model)
        attn = merged @ params[p + "attn_out_w"] + params[p + "attn_out_b"]
        x_mid = x + attn
        m, ln2c = _layer_norm(x_mid, params[p + "ln2_g"], params[p + "ln2_b"])
        pre_act = m @ params[p + "mlp_in_w"] + params[p + "mlp_in_b"]
        act, tanh_cache = _gelu(pre_act)
        mlp = act @ params[p + "mlp_out_w"] + params[p + "mlp_out_b"]
        x = x_mid + mlp
        cache.update(
            ln1=ln1c, a=a, q=q, k=k, v=v, attn_probs=attn_probs, merged=merged,
            x_mid=x_mid, ln2=ln2c, m=m, pre_act=pre_act, act=act, tanh=tanh_cache,
        )
        layer_caches.append(cache)

    hidden, lnfc = _layer_norm(x, params["lnf_g"], params["lnf_b"])
    logits = hidden @ params["lm_head_w"] + params["lm_head_b"] if compute_logits else None
    return ForwardCache(
        ids=ids,
        hidden=hidden,
        logits=logits,
        layers=layer_caches,
        lnf_cache=lnfc,
        final_hidden_pre_norm_input=x,
    )


def zero_grads(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def backward(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    cache: ForwardCache,
    dlogits: Optional[np.ndarray] = None,
    dhidden: Optional[np.ndarray] = None,
    grads: Optional[dict[str, np.ndarray]] = None,
) -> dict[str, np.ndarray]:
    """Accumulate parameter gradients for one forward pass.

    `dlogits` is the upstream gradient at the LM logits, `dhidden` an extra
    gradient injected directly at the final hidden states (used by the
    scalar head); either may be None.
    """
    if dlogits is None and dhidden is None:
        raise ValueError("nothing to backpropagate")
    if grads is None:
        grads = zero_grads(params)

    t_len = cache.ids.shape[0]
    h_heads, d_head = config.n_heads, config.head_dim
    scale = 1.0 / np.sqrt(d_head)

    dh = np.zeros((t_len, config.d_model))
    if dlogits is not None:
        grads["lm_head_w"] += cache.hidden.T @ dlogits
        grads["lm_head_b"] += dlogits.sum(axis=0)
        dh += dlogits @ params["lm_head_w"].T
    if dhidden is not None:
        dh += dhidden

    dx, dg, db = _layer_norm_backward(dh, cache.lnf_cache)
    grads["lnf_g"] += dg
    grads["lnf_b"] += db

    for layer in reversed(range(config.n_layers)):
        p = f"layer{layer}."
        c = cache.layers[layer]
        # MLP block
        grads[p + "mlp_out_w"] += c["act"].T @ dx
        grads[p + "mlp_out_b"] += dx.sum(axis=0)
        dact = dx @ params[p + "mlp_out_w"].T
        dpre = _gelu_backward(dact, c["pre_act"], c["tanh"])
        grads[p + "mlp_in_w"] += c["m"].T @ dpre
        grads[p + "mlp_in_b"] += dpre.sum(axis=0)
        dm = dpre @ params[p + "mlp_in_w"].T
        dx_mid, dg2, db2 = _layer_norm_backward(dm, c["ln2"])
        grads[p + "ln2_g"] += dg2
        grads[p + "ln2_b"] += db2
        dx_mid = dx_mid + dx  # residual
        # Attention block
        grads[p + "attn_out_w"] += c["merged"].T @ dx_mid
        grads[p + "attn_out_b"] += dx_mid.sum(axis=0)
        dmerged = dx_mid @ params[p + "attn_out_w"].T
        dheads = dmerged.reshape(t_len, h_heads, d_head).transpose(1, 0, 2)
        dprobs = dheads @ c["v"].transpose(0, 2, 1)
        dv = c["attn_probs"].transpose(0, 2, 1) @ dheads
        probs = c["attn_probs"]
        dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
        dq = (dscores @ c["k"]) * scale
        dk = (dscores.transpose(0, 2, 1) @ c["q"]) * scale
        dqkv = np.concatenate(
            [
                dq.transpose(1, 0, 2).reshape(t_len, config.d_model),
                dk.transpose(1, 0, 2).reshape(t_len, config.d_model),
                dv.transpose(1, 0, 2).reshape(t_len, config.d_model),
            ],
            axis=-1,
        )
        grads[p + "qkv_w"] += c["a"].T @ dqkv
        grads[p + "qkv_b"] += dqkv.sum(axis=0)
        da = dqkv @ params[p + "qkv_w"].T
        dx_in, dg1, db1 = _layer_norm_backward(da, c["ln1"])
        grads[p + "ln1_g"] += dg1
        grads[p + "ln1_b"] += db1
        dx = dx_in + dx_mid  # residual

    np.add.at(grads["wte"], cache.ids, dx)
    grads["wpe"][:t_len] += dx
    return grads


def score_hidden(params: dict[str, np.ndarray], hidden: np.ndarray) -> np.ndarray:
    """Scalar head: affine map from hidden vectors to per-position scores."""
    return hidden @ params["head_w"] + params["head_b"]
