"""Neural-network building blocks on top of the tensor engine."""

from __future__ import annotations

import numpy as np

from .ndauto import Tensor, concat


class Module:
    """Base class tracking parameters and submodules by attribute name."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                params[key] = value
            elif isinstance(value, Module):
                params.update(value.named_parameters(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        params.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        params[f"{key}.{i}"] = item
        return params

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def normal_param(rng: np.random.Generator, shape, std: float = 0.02, dtype=np.float64) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape).astype(dtype), requires_grad=True)


def zeros_param(shape, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


class Linear(Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int,
                 zero_init: bool = False, dtype=np.float64):
        if zero_init:
            self.weight = zeros_param((in_dim, out_dim), dtype)
        else:
            self.weight = normal_param(rng, (in_dim, out_dim), dtype=dtype)
        self.bias = zeros_param((out_dim,), dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class MLP(Module):
    """Stack of linear layers with a smooth nonlinearity between them."""

    def __init__(self, rng: np.random.Generator, dims: list[int],
                 zero_init_last: bool = False, dtype=np.float64):
        self.layers = [
            Linear(rng, dims[i], dims[i + 1],
                   zero_init=zero_init_last and i == len(dims) - 2, dtype=dtype)
            for i in range(len(dims) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = x.gelu()
        return x


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5, dtype=np.float64):
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.bias = zeros_param((dim,), dtype)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered * (var + self.eps).powr(-0.5) * self.gain + self.bias


class MultiHeadAttention(Module):
    """Standard scaled dot-product attention with optional key masking.

    ``kv_dim`` lets keys/values come from a different feature width than the
    queries. The attention weights of the latest call are kept on
    ``last_attn`` for inspection.
    """

    def __init__(self, rng: np.random.Generator, dim: int, num_heads: int,
                 kv_dim: int | None = None, dtype=np.float64):
        if dim % num_heads:
            raise ValueError(f"dim {dim} not divisible by num_heads {num_heads}")
        kv_dim = dim if kv_dim is None else kv_dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.q_proj = Linear(rng, dim, dim, dtype=dtype)
        self.k_proj = Linear(rng, kv_dim, dim, dtype=dtype)
        self.v_proj = Linear(rng, kv_dim, dim, dtype=dtype)
        self.out_proj = Linear(rng, dim, dim, dtype=dtype)
        self.last_attn: np.ndarray | None = None

    def _split_heads(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        return x.reshape(b, n, self.num_heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, query: Tensor, keyvalue: Tensor,
                 key_mask: np.ndarray | None = None) -> Tensor:
        b, nq, dim = query.shape
        q = self._split_heads(self.q_proj(query))
        k = self._split_heads(self.k_proj(keyvalue))
        v = self._split_heads(self.v_proj(keyvalue))
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(self.head_dim))
        if key_mask is not None:
            scores = scores.masked_fill(key_mask[:, None, None, :], -np.inf)
        attn = scores.softmax(axis=-1)
        self.last_attn = attn.data
        out = attn @ v
        out = out.transpose(0, 2, 1, 3).reshape(b, nq, dim)
        return self.out_proj(out)


class TransformerBlock(Module):
    """Pre-norm self-attention block."""

    def __init__(self, rng: np.random.Generator, dim: int, num_heads: int, dtype=np.float64):
        self.norm1 = LayerNorm(dim, dtype=dtype)
        self.attn = MultiHeadAttention(rng, dim, num_heads, dtype=dtype)
        self.norm2 = LayerNorm(dim, dtype=dtype)
        self.mlp = MLP(rng, [dim, 2 * dim, dim], dtype=dtype)

    def __call__(self, x: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, key_mask=key_mask)
        return x + self.mlp(self.norm2(x))


class DecoderBlock(Module):
    """Pre-norm decoder block: query self-attention, then cross-attention to memory."""

    def __init__(self, rng: np.random.Generator, dim: int, num_heads: int,
                 memory_dim: int, dtype=np.float64):
        self.norm1 = LayerNorm(dim, dtype=dtype)
        self.self_attn = MultiHeadAttention(rng, dim, num_heads, dtype=dtype)
        self.norm2 = LayerNorm(dim, dtype=dtype)
        self.cross_attn = MultiHeadAttention(rng, dim, num_heads, kv_dim=memory_dim, dtype=dtype)
        self.norm3 = LayerNorm(dim, dtype=dtype)
        self.mlp = MLP(rng, [dim, 2 * dim, dim], dtype=dtype)

    def __call__(self, queries: Tensor, memory: Tensor,
                 memory_mask: np.ndarray | None = None) -> Tensor:
        h = self.norm1(queries)
        queries = queries + self.self_attn(h, h)
        queries = queries + self.cross_attn(self.norm2(queries), memory, key_mask=memory_mask)
        return queries + self.mlp(self.norm3(queries))
