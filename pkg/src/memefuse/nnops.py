"""Low-level neural net ops as forward/backward pairs over numpy arrays.

Every ``*_forward`` returns (output, cache) and the matching
``*_backward`` consumes (upstream gradient, cache).  All functions work
in the dtype of their inputs, so float64 for gradient checking and
float32 for the training pipeline use the same code path.
"""

from __future__ import annotations

import numpy as np

_GELU_C = float(np.sqrt(2.0 / np.pi))


def sub_params(params: dict, prefix: str) -> dict:
    """Slice a flat {dotted name: array} dict down to one component's view."""
    pre = prefix + "."
    return {k[len(pre):]: v for k, v in params.items() if k.startswith(pre)}


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_backward(d_out: np.ndarray, probs: np.ndarray, axis: int = -1) -> np.ndarray:
    inner = np.sum(d_out * probs, axis=axis, keepdims=True)
    return probs * (d_out - inner)


def gelu(x: np.ndarray) -> np.ndarray:
    u = _GELU_C * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(u))


def gelu_backward(d_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3.0 * 0.044715 * x**2)
    return d_out * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du)


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, (x, w)


def linear_backward(d_y: np.ndarray, cache):
    x, w = cache
    dx = d_y @ w.T
    dw = x.T @ d_y
    db = d_y.sum(axis=0)
    return dx, dw, db


def layernorm_forward(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return xhat * gain + bias, (xhat, inv_std, gain)


def layernorm_backward(d_y: np.ndarray, cache):
    xhat, inv_std, gain = cache
    d = xhat.shape[-1]
    d_xhat = d_y * gain
    # standard per-row reduction of the mean/variance paths
    dx = inv_std * (
        d_xhat
        - d_xhat.mean(axis=-1, keepdims=True)
        - xhat * (d_xhat * xhat).mean(axis=-1, keepdims=True)
    )
    d_gain = (d_y * xhat).reshape(-1, d).sum(axis=0)
    d_bias = d_y.reshape(-1, d).sum(axis=0)
    return dx, d_gain, d_bias


def attention_forward(q: np.ndarray, k: np.ndarray, v: np.ndarray, mask: np.ndarray | None = None):
    """Scaled dot-product attention, softmax over key positions.

    q: L x dk, k: M x dk, v: M x dv (leading head axes broadcast).
    ``mask`` is added to the logits (use -inf to forbid positions).
    """
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query width {q.shape[-1]} != key width {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"key count {k.shape[-2]} != value count {v.shape[-2]}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = (q @ np.swapaxes(k, -1, -2)) * scale
    if mask is not None:
        scores = scores + mask
    probs = softmax(scores, axis=-1)
    out = probs @ v
    return out, (q, k, v, probs, scale)


def attention_backward(d_out: np.ndarray, cache):
    q, k, v, probs, scale = cache
    dv = np.swapaxes(probs, -1, -2) @ d_out
    d_probs = d_out @ np.swapaxes(v, -1, -2)
    d_scores = softmax_backward(d_probs, probs)
    dq = (d_scores @ k) * scale
    dk = (np.swapaxes(d_scores, -1, -2) @ q) * scale
    return dq, dk, dv


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """softmax(q k^T / sqrt(dk)) v."""
    out, _ = attention_forward(q, k, v)
    return out


def split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    """L x d -> n_heads x L x (d / n_heads)."""
    length, width = x.shape
    if width % n_heads:
        raise ValueError(f"width {width} not divisible by {n_heads} heads")
    return x.reshape(length, n_heads, width // n_heads).transpose(1, 0, 2)


def merge_heads(x: np.ndarray) -> np.ndarray:
    n_heads, length, dh = x.shape
    return x.transpose(1, 0, 2).reshape(length, n_heads * dh)


def mha_forward(x_q: np.ndarray, x_kv: np.ndarray, p: dict, n_heads: int,
                mask: np.ndarray | None = None):
    """Multi-head attention with learned projections.

    ``p`` carries wq/bq, wk/bk, wv/bv, wo/bo.  Queries come from x_q and
    keys/values from x_kv, so the same code serves self and cross
    attention.
    """
    q, cq = linear_forward(x_q, p["wq"], p["bq"])
    k, ck = linear_forward(x_kv, p["wk"], p["bk"])
    v, cv = linear_forward(x_kv, p["wv"], p["bv"])
    heads, ca = attention_forward(
        split_heads(q, n_heads), split_heads(k, n_heads), split_heads(v, n_heads), mask=mask
    )
    merged = merge_heads(heads)
    out, co = linear_forward(merged, p["wo"], p["bo"])
    return out, (cq, ck, cv, ca, co, n_heads)


def mha_backward(d_out: np.ndarray, cache):
    cq, ck, cv, ca, co, n_heads = cache
    d_merged, dwo, dbo = linear_backward(d_out, co)
    dq_h, dk_h, dv_h = attention_backward(split_heads(d_merged, n_heads), ca)
    dq, dwq, dbq = linear_backward(merge_heads(dq_h), cq)
    dk, dwk, dbk = linear_backward(merge_heads(dk_h), ck)
    dv, dwv, dbv = linear_backward(merge_heads(dv_h), cv)
    d_p = {"wq": dwq, "bq": dbq, "wk": dwk, "bk": dbk,
           "wv": dwv, "bv": dbv, "wo": dwo, "bo": dbo}
    return dq, dk + dv, d_p
