"""Analytic FLOP counts for transformer encoders and mask decoders.

Counts cover matrix multiplies (and softmax) only; non-linearities, biases,
normalizations, and other negligible terms are omitted. All per-stage counts
are exact integers. Presets live in editable JSON files under ``presets/``,
so layer schedules and channel schedules can be changed without touching
code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources


@dataclass(frozen=True)
class WindowConfig:
    size: int
    map_side: int
    global_layers: tuple[int, ...]


@dataclass(frozen=True)
class CostConfig:
    d_model: int
    d_attn: int
    d_ff: int
    n_head: int
    n_layers: int
    n_tokens: int
    window: WindowConfig | None = None

    def __post_init__(self):
        for name in ("d_model", "d_attn", "d_ff", "n_head", "n_layers", "n_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.d_attn % self.n_head != 0:
            raise ValueError("d_attn must be divisible by n_head")


# Per-layer components. n_query/n_key separate so cross-attention is covered;
# self-attention passes n_key == n_query.

def qkv_flops(d_model: int, d_attn: int, n_query: int, n_key: int) -> int:
    return 2 * d_model * d_attn * (n_query + 2 * n_key)


def logits_flops(d_attn: int, n_query: int, n_key: int) -> int:
    return 2 * n_query * n_key * d_attn


def softmax_flops(n_head: int, n_query: int, n_key: int) -> int:
    return 3 * n_query * n_key * n_head


def reduce_flops(d_attn: int, n_query: int, n_key: int) -> int:
    return 2 * n_query * n_key * d_attn


def project_flops(d_model: int, d_attn: int, n_query: int) -> int:
    return 2 * n_query * d_model * d_attn


def ffn_flops(d_model: int, d_ff: int, n_query: int) -> int:
    return 4 * n_query * d_model * d_ff


def linear_flops(n_vals: int, d_in: int, d_out: int) -> int:
    return 2 * n_vals * d_in * d_out


def conv_flops(d_in: int, d_out: int, w_out: int, h_out: int, w_k: int, h_k: int) -> int:
    return 2 * d_in * d_out * w_out * h_out * w_k * h_k


def attention_core_flops(cfg: CostConfig, n_query: int, n_key: int) -> int:
    """One attention application without the feedforward block."""
    return (
        qkv_flops(cfg.d_model, cfg.d_attn, n_query, n_key)
        + logits_flops(cfg.d_attn, n_query, n_key)
        + softmax_flops(cfg.n_head, n_query, n_key)
        + reduce_flops(cfg.d_attn, n_query, n_key)
        + project_flops(cfg.d_model, cfg.d_attn, n_query)
    )


def attention_layer_flops(cfg: CostConfig, n_query: int | None = None, n_key: int | None = None) -> int:
    """One full encoder layer: attention plus feedforward."""
    nq = cfg.n_tokens if n_query is None else n_query
    nk = nq if n_key is None else n_key
    return attention_core_flops(cfg, nq, nk) + ffn_flops(cfg.d_model, cfg.d_ff, nq)


def encoder_flops(cfg: CostConfig) -> int:
    """Dense self-attention encoder: n_layers identical layers."""
    return cfg.n_layers * attention_layer_flops(cfg)


def windowed_encoder_flops(cfg: CostConfig) -> int:
    """Encoder mixing local windowed layers with a few global ones.

    A global layer over an s x s token map costs one full layer at s^2
    tokens; a windowed layer costs ceil(s/w)^2 layers at w^2 tokens.
    """
    if cfg.window is None:
        raise ValueError("windowed_encoder_flops requires a window config")
    w = cfg.window
    s2 = w.map_side * w.map_side
    n_windows = math.ceil(w.map_side / w.size) ** 2
    global_cost = attention_layer_flops(cfg, s2, s2)
    local_cost = n_windows * attention_layer_flops(cfg, w.size**2, w.size**2)
    total = 0
    for layer in range(cfg.n_layers):
        total += global_cost if layer in w.global_layers else local_cost
    return total


def mlp_flops(d_in: int, d_hidden: int, d_out: int, depth: int) -> int:
    """A depth-layer MLP applied to one vector."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth == 1:
        return linear_flops(1, d_in, d_out)
    total = linear_flops(1, d_in, d_hidden)
    total += (depth - 2) * linear_flops(1, d_hidden, d_hidden)
    total += linear_flops(1, d_hidden, d_out)
    return total


def _deconv_chain_flops(d_in: int, channels: list[int], kernel: int, start_side: int) -> int:
    """Stride-2 deconvolutions, each doubling resolution, counted at output size."""
    total = 0
    side = start_side
    for c_out in channels:
        side *= 2
        total += conv_flops(d_in, c_out, side, side, kernel, kernel)
        d_in = c_out
    return total


def _two_way_flops(dec: dict, n_queries: int, n_ctx: int) -> int:
    cfg = CostConfig(
        d_model=dec["d_model"],
        d_attn=dec["d_attn"],
        d_ff=dec["d_ff"],
        n_head=dec["n_heads"],
        n_layers=dec["n_layers"],
        n_tokens=n_queries,
    )
    per_layer = (
        attention_core_flops(cfg, n_queries, n_queries)  # queries attend to themselves
        + attention_core_flops(cfg, n_queries, n_ctx)  # queries -> context
        + ffn_flops(cfg.d_model, cfg.d_ff, n_queries)
        + attention_core_flops(cfg, n_ctx, n_queries)  # context -> queries
    )
    total = dec["n_layers"] * per_layer
    if dec.get("final_attention", True):
        total += attention_core_flops(cfg, n_queries, n_ctx)
    return total


def _decoder_flops(dec: dict, n_ctx: int, n_maps: int, start_side: int) -> dict:
    """Mask decoder cost split into two-way transformer, upscaler, heads, dot."""
    d = dec["d_model"]
    n_masks = dec["n_masks"]
    n_queries = n_masks + dec["extra_query_tokens"]
    channels = list(dec["deconv_channels"])
    kernel = dec["deconv_kernel"]
    c_last = channels[-1]
    out_side = start_side * 2 ** len(channels)
    return {
        "decoder.two_way": _two_way_flops(dec, n_queries, n_ctx),
        "decoder.upscale": n_maps * _deconv_chain_flops(d, channels, kernel, start_side),
        "decoder.heads": n_masks * mlp_flops(d, d, c_last, dec["mlp_depth"])
        + mlp_flops(d, d, n_masks, dec["mlp_depth"]),
        "decoder.mask_dot": 2 * n_masks * n_maps * out_side * out_side * c_last,
    }


@dataclass
class FlopsBreakdown:
    name: str
    stages: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.stages.values())

    def gflops(self, key: str | None = None) -> float:
        count = self.total if key is None else self.stages[key]
        return count / 1e9

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "stages": dict(self.stages),
            "total": self.total,
            "total_gflops": round(self.total / 1e9, 2),
        }


def preset_names() -> list[str]:
    root = resources.files("fovtok").joinpath("presets")
    names = [
        entry.name[: -len(".json")]
        for entry in root.iterdir()
        if entry.name.endswith(".json") and not entry.name.startswith("pattern")
    ]
    return sorted(names)


def load_preset(name: str) -> dict:
    path = resources.files("fovtok").joinpath(f"presets/{name}.json")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(
            f"unknown preset {name!r}: valid presets are {', '.join(preset_names())}"
        ) from None
    return json.loads(text)


def model_flops(preset) -> FlopsBreakdown:
    """Per-stage FLOP breakdown for a preset name or an explicit config dict."""
    spec = load_preset(preset) if isinstance(preset, str) else dict(preset)
    family = spec["family"]
    enc = spec["encoder"]
    dec = spec["decoder"]
    patch = spec["patch"]
    stages: dict[str, int] = {}
    if family == "foveated":
        n_tokens = spec["tokens"]["pattern"]
        n_ctx = n_tokens + spec["tokens"]["register"]
        d_patch = patch["size"] * patch["size"] * patch["channels"]
        stages["patch_embed"] = linear_flops(n_tokens, d_patch, enc["d_model"])
        cfg = CostConfig(
            d_model=enc["d_model"],
            d_attn=enc["d_attn"],
            d_ff=enc["d_ff"],
            n_head=enc["n_heads"],
            n_layers=enc["n_layers"],
            n_tokens=n_ctx,
        )
        stages["encoder"] = encoder_flops(cfg)
        stages["neck"] = linear_flops(n_ctx, enc["d_model"], spec["neck"]["linear_out"])
        stages.update(_decoder_flops(dec, n_ctx, n_tokens, 1))
    elif family == "uniform":
        win = enc["window"]
        map_side = win["map_side"]
        stages["patch_embed"] = conv_flops(
            patch["channels"], enc["d_model"], map_side, map_side, patch["size"], patch["size"]
        )
        cfg = CostConfig(
            d_model=enc["d_model"],
            d_attn=enc["d_attn"],
            d_ff=enc["d_ff"],
            n_head=enc["n_heads"],
            n_layers=enc["n_layers"],
            n_tokens=map_side * map_side,
            window=WindowConfig(
                size=win["size"],
                map_side=map_side,
                global_layers=tuple(win["global_layers"]),
            ),
        )
        stages["encoder"] = windowed_encoder_flops(cfg)
        stages["neck"] = sum(
            conv_flops(c["d_in"], c["d_out"], map_side, map_side, c["kernel"], c["kernel"])
            for c in spec["neck"]["convs"]
        )
        stages.update(_decoder_flops(dec, map_side * map_side, 1, map_side))
    else:
        raise ValueError(f"unknown model family {family!r}")
    return FlopsBreakdown(name=spec.get("name", "custom"), stages=stages)
