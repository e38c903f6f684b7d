"""A miniature foveated segmentation transformer for desk-scale verification.

Encoder: linear patch projection, learned per-index position encodings, a
register token, and pre-norm self-attention blocks in which invalid
(out-of-bounds) tokens are excluded as attention keys but still computed as
queries (their outputs are discarded). Decoder: N mask query tokens plus one
IoU query token, a post-norm two-way transformer against the encoder output
(invalid context masked in cross-attention), four 2x2 stride-2
deconvolutions taking each token feature from 1x1 up to a 16x16 map, one
hypernetwork MLP per mask token, and a dot product producing per-token
16x16 mask logits. The IoU head regresses one confidence per mask.

Everything runs in float64 on CPU with seeded initialization, so identical
seeds and inputs give bit-identical outputs. The module also carries the
training-loss mirrors (focal, dice, expected IoU, best-of-N) as torch
functions, token masking for masked-autoencoder pre-training, and the
numeric checks: finite-difference gradient verification, out-of-bounds
invariance, and a single-sample overfit run.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .metrics import DICE_EPS, LOG_CLAMP, LossWeights
from .pattern import (
    FoveationPattern,
    make_pattern,
    require_valid,
    token_count,
    token_strides,
)
from .tokenizer import FoveatedMask, TokenTensor

DTYPE = torch.float64


@dataclass(frozen=True)
class NanoConfig:
    pattern: FoveationPattern
    channels: int = 1
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int | None = None  # defaults to 4 * d_model
    n_masks: int = 3
    decoder_dim: int = 32
    decoder_layers: int = 2
    decoder_heads: int = 4
    decoder_ff: int | None = None
    seed: int = 0

    def __post_init__(self):
        require_valid(self.pattern)
        if self.pattern.patch_size != 16:
            raise ValueError("four resolution doublings fix the patch size at 16")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.n_masks < 1:
            raise ValueError("n_masks must be >= 1")
        for name in ("d_model", "n_layers", "n_heads", "decoder_dim", "decoder_layers", "decoder_heads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.decoder_dim % self.decoder_heads != 0:
            raise ValueError("decoder_dim must be divisible by decoder_heads")

    @property
    def ff_dim(self) -> int:
        return self.d_ff if self.d_ff is not None else 4 * self.d_model

    @property
    def decoder_ff_dim(self) -> int:
        return self.decoder_ff if self.decoder_ff is not None else 4 * self.decoder_dim

    @property
    def deconv_channels(self) -> tuple[int, int, int, int]:
        return tuple(max(1, self.decoder_dim // 2**k) for k in range(1, 5))

    def to_dict(self) -> dict:
        return {
            "pattern": {
                "patch_size": self.pattern.patch_size,
                "levels": [[lvl.stride, lvl.grid] for lvl in self.pattern.levels],
            },
            "channels": self.channels,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_ff": self.d_ff,
            "n_masks": self.n_masks,
            "decoder_dim": self.decoder_dim,
            "decoder_layers": self.decoder_layers,
            "decoder_heads": self.decoder_heads,
            "decoder_ff": self.decoder_ff,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "NanoConfig":
        pat = obj["pattern"]
        pattern = make_pattern(pat["levels"], pat["patch_size"])
        rest = {k: v for k, v in obj.items() if k != "pattern"}
        return cls(pattern=pattern, **rest)


def tiny_config(seed: int = 0) -> NanoConfig:
    """Smallest useful config: 4 tokens, narrow dims. Used by the checks."""
    return NanoConfig(
        pattern=make_pattern([(1, 2)]),
        channels=1,
        d_model=8,
        n_layers=1,
        n_heads=2,
        d_ff=16,
        n_masks=2,
        decoder_dim=8,
        decoder_layers=1,
        decoder_heads=2,
        decoder_ff=16,
        seed=seed,
    )


class Attention(nn.Module):
    """Multi-head attention with an optional key-validity mask."""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)

    def forward(self, queries, keys, values, key_valid=None):
        nq, nk = queries.shape[0], keys.shape[0]
        q = self.q(queries).view(nq, self.n_heads, self.d_head).transpose(0, 1)
        k = self.k(keys).view(nk, self.n_heads, self.d_head).transpose(0, 1)
        v = self.v(values).view(nk, self.n_heads, self.d_head).transpose(0, 1)
        logits = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        if key_valid is not None:
            logits = logits.masked_fill(~key_valid.view(1, 1, nk), float("-inf"))
        attn = torch.softmax(logits, dim=-1)
        out = (attn @ v).transpose(0, 1).reshape(nq, -1)
        return self.out(out)


class Mlp(nn.Module):
    def __init__(self, d_model: int, d_hidden: int, d_out: int | None = None):
        super().__init__()
        self.fc1 = nn.Linear(d_model, d_hidden)
        self.fc2 = nn.Linear(d_hidden, d_out if d_out is not None else d_model)
        self.act = nn.GELU()

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class HeadMlp(nn.Module):
    """Three-layer ReLU MLP used by the hypernetwork and IoU heads."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int):
        super().__init__()
        self.fc1 = nn.Linear(d_in, d_hidden)
        self.fc2 = nn.Linear(d_hidden, d_hidden)
        self.fc3 = nn.Linear(d_hidden, d_out)
        self.act = nn.ReLU()

    def forward(self, x):
        return self.fc3(self.act(self.fc2(self.act(self.fc1(x)))))


class EncoderBlock(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = Attention(d_model, n_heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.mlp = Mlp(d_model, d_ff)

    def forward(self, x, key_valid=None):
        h = self.norm1(x)
        x = x + self.attn(h, h, h, key_valid)
        return x + self.mlp(self.norm2(x))


class NanoEncoder(nn.Module):
    def __init__(self, cfg: NanoConfig):
        super().__init__()
        t = cfg.pattern.patch_size
        n = token_count(cfg.pattern)
        self.n_tokens = n
        self.proj = nn.Linear(t * t * cfg.channels, cfg.d_model)
        self.register_token = nn.Parameter(torch.zeros(cfg.d_model))
        # index 0 is the register token's own position encoding
        self.pos = nn.Parameter(torch.zeros(n + 1, cfg.d_model))
        self.blocks = nn.ModuleList(
            EncoderBlock(cfg.d_model, cfg.n_heads, cfg.ff_dim) for _ in range(cfg.n_layers)
        )
        self.norm = nn.LayerNorm(cfg.d_model)

    def forward(self, data, valid=None):
        """data: (N, T, T, C) tensor; valid: (N,) bool tensor or None.

        Returns (N+1, d_model) features; row 0 is the register token.
        Invalid tokens never act as keys, so their content cannot reach any
        valid row, but they are still carried as queries.
        """
        if data.shape[0] != self.n_tokens:
            raise ValueError(
                f"shape mismatch: got {data.shape[0]} tokens, expected {self.n_tokens}"
            )
        x = self.proj(data.reshape(self.n_tokens, -1))
        x = torch.cat([self.register_token[None, :], x], dim=0) + self.pos
        key_valid = None
        if valid is not None:
            key_valid = torch.cat([torch.ones(1, dtype=torch.bool, device=valid.device), valid])
        for block in self.blocks:
            x = block(x, key_valid)
        return self.norm(x)


class TwoWayBlock(nn.Module):
    """Post-norm block alternating query->context and context->query attention."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.self_attn = Attention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.cross_qc = Attention(d_model, n_heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.mlp = Mlp(d_model, d_ff)
        self.norm3 = nn.LayerNorm(d_model)
        self.cross_cq = Attention(d_model, n_heads)
        self.norm4 = nn.LayerNorm(d_model)

    def forward(self, queries, ctx, ctx_valid=None):
        q = self.norm1(queries + self.self_attn(queries, queries, queries))
        q = self.norm2(q + self.cross_qc(q, ctx, ctx, ctx_valid))
        q = self.norm3(q + self.mlp(q))
        ctx = self.norm4(ctx + self.cross_cq(ctx, q, q))
        return q, ctx


class NanoDecoder(nn.Module):
    def __init__(self, cfg: NanoConfig):
        super().__init__()
        d = cfg.decoder_dim
        self.n_masks = cfg.n_masks
        self.neck = nn.Linear(cfg.d_model, d)
        self.iou_token = nn.Parameter(torch.zeros(d))
        self.mask_tokens = nn.Parameter(torch.zeros(cfg.n_masks, d))
        self.blocks = nn.ModuleList(
            TwoWayBlock(d, cfg.decoder_heads, cfg.decoder_ff_dim)
            for _ in range(cfg.decoder_layers)
        )
        self.final_attn = Attention(d, cfg.decoder_heads)
        self.final_norm = nn.LayerNorm(d)
        channels = cfg.deconv_channels
        ins = (d,) + channels[:-1]
        layers = []
        for c_in, c_out in zip(ins, channels):
            layers += [nn.ConvTranspose2d(c_in, c_out, kernel_size=2, stride=2), nn.GELU()]
        self.upscale = nn.Sequential(*layers)
        self.hypernets = nn.ModuleList(
            HeadMlp(d, d, channels[-1]) for _ in range(cfg.n_masks)
        )
        self.iou_head = HeadMlp(d, d, cfg.n_masks)

    def forward(self, features, valid=None):
        """features: (N+1, d_model) from the encoder (register first).

        Returns (mask_logits (M, N, 16, 16), iou_pred (M,)). Logits of
        invalid tokens are zeroed.
        """
        ctx = self.neck(features)
        n = ctx.shape[0] - 1
        ctx_valid = None
        if valid is not None:
            ctx_valid = torch.cat([torch.ones(1, dtype=torch.bool, device=valid.device), valid])
        q = torch.cat([self.iou_token[None, :], self.mask_tokens], dim=0)
        for block in self.blocks:
            q, ctx = block(q, ctx, ctx_valid)
        q = self.final_norm(q + self.final_attn(q, ctx, ctx, ctx_valid))
        maps = self.upscale(ctx[1:].reshape(n, -1, 1, 1))  # (N, C_last, 16, 16)
        hyper = torch.stack([net(q[1 + i]) for i, net in enumerate(self.hypernets)])
        logits = torch.einsum("mc,nchw->mnhw", hyper, maps)
        if valid is not None:
            logits = logits * valid.view(1, n, 1, 1).to(logits.dtype)
        iou_pred = self.iou_head(q[0])
        return logits, iou_pred


@dataclass
class ModelOutput:
    pattern: FoveationPattern
    mask_logits: np.ndarray  # (M, N, T, T)
    iou_pred: np.ndarray  # (M,)
    valid: np.ndarray  # (N,) bool

    def probability_masks(self) -> list[FoveatedMask]:
        with np.errstate(over="ignore"):  # saturated logits are fine
            probs = 1.0 / (1.0 + np.exp(-self.mask_logits))
        probs[:, ~self.valid] = 0.0
        return [
            FoveatedMask(pattern=self.pattern, data=probs[m], valid=self.valid.copy())
            for m in range(probs.shape[0])
        ]


class NanoModel(nn.Module):
    def __init__(self, cfg: NanoConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = NanoEncoder(cfg)
        self.decoder = NanoDecoder(cfg)
        self.to(DTYPE)
        _init_parameters(self, cfg.seed)

    def forward(self, data, valid=None):
        return self.decoder(self.encoder(data, valid), valid)

    def predict(self, tokens: TokenTensor) -> ModelOutput:
        if tokens.pattern != self.cfg.pattern:
            raise ValueError("shape mismatch: token pattern differs from model pattern")
        if tokens.channels != self.cfg.channels:
            raise ValueError(
                f"shape mismatch: {tokens.channels}-channel tokens, "
                f"model expects {self.cfg.channels}"
            )
        with torch.no_grad():
            logits, iou = self.forward(
                torch.from_numpy(np.ascontiguousarray(tokens.data)).to(DTYPE),
                torch.from_numpy(tokens.valid.copy()),
            )
        return ModelOutput(
            pattern=tokens.pattern,
            mask_logits=logits.numpy(),
            iou_pred=iou.numpy(),
            valid=tokens.valid.copy(),
        )


def _init_parameters(model: nn.Module, seed: int) -> None:
    """Deterministic init: truncated normal (std 0.02) for weights and
    embedding-like parameters, zeros for biases, identity for norms."""
    torch.manual_seed(seed)
    for module in model.modules():
        if isinstance(module, (nn.Linear, nn.ConvTranspose2d)):
            nn.init.trunc_normal_(module.weight, std=0.02)
            nn.init.zeros_(module.bias)
        elif isinstance(module, nn.LayerNorm):
            nn.init.ones_(module.weight)
            nn.init.zeros_(module.bias)
    for name, param in model.named_parameters():
        if name.endswith(("register_token", "pos", "iou_token", "mask_tokens")):
            nn.init.trunc_normal_(param, std=0.02)


# ---------------------------------------------------------------------------
# Torch mirrors of the training losses (kept numerically identical to the
# numpy versions in metrics; see the agreement tests).
# ---------------------------------------------------------------------------


def stride_weights_t(pattern: FoveationPattern) -> torch.Tensor:
    strides = torch.tensor(token_strides(pattern), dtype=DTYPE)
    return (strides**2).view(-1, 1, 1)


def expected_iou_t(p, q, w, valid) -> torch.Tensor:
    wv = (w * valid.view(-1, 1, 1)).expand_as(p)
    num = (wv * p * q).sum()
    den = (wv * (1.0 - (1.0 - p) * (1.0 - q))).sum()
    if den.detach().item() == 0.0:
        return torch.ones((), dtype=p.dtype) + 0.0 * num
    return num / den


def focal_loss_t(p, q, w, valid, gamma: float = 2.0) -> torch.Tensor:
    wv = (w * valid.view(-1, 1, 1)).expand_as(p)
    pc = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
    term = -(q * (1.0 - pc) ** gamma * pc.log() + (1.0 - q) * pc**gamma * (1.0 - pc).log())
    return (wv * term).sum() / wv.sum()


def dice_loss_t(p, q, w, valid) -> torch.Tensor:
    wv = (w * valid.view(-1, 1, 1)).expand_as(p)
    num = 2.0 * (wv * p * q).sum() + DICE_EPS
    den = (wv * p).sum() + (wv * q).sum() + DICE_EPS
    return 1.0 - num / den


def combined_loss_t(
    mask_logits: torch.Tensor,
    iou_pred: torch.Tensor,
    target: torch.Tensor,
    valid: torch.Tensor,
    pattern: FoveationPattern,
    weights: LossWeights | None = None,
) -> tuple[torch.Tensor, int]:
    """Best-of-N loss on logits: segmentation terms for the best mask only,
    IoU regression for all masks. Returns (loss, best_index)."""
    weights = weights or LossWeights()
    w = stride_weights_t(pattern)
    probs = torch.sigmoid(mask_logits)
    per_mask = [
        weights.focal * focal_loss_t(probs[m], target, w, valid)
        + weights.dice * dice_loss_t(probs[m], target, w, valid)
        for m in range(probs.shape[0])
    ]
    best = int(torch.argmin(torch.stack([t.detach() for t in per_mask])))
    iou_term = sum(
        (iou_pred[m] - expected_iou_t(probs[m], target, w, valid)) ** 2
        for m in range(probs.shape[0])
    )
    return per_mask[best] + weights.iou * iou_term, best


# ---------------------------------------------------------------------------
# Masked-autoencoder token masking and reconstruction loss
# ---------------------------------------------------------------------------


def mae_mask(
    tokens: TokenTensor, ratio: float = 0.75, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Split the valid tokens into (kept, masked) index arrays.

    floor(n_valid * (1 - ratio)) tokens are kept; invalid tokens belong to
    neither set. Deterministic given the generator's seed.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    rng = rng or np.random.default_rng()
    valid_idx = np.flatnonzero(tokens.valid)
    n_keep = int(len(valid_idx) * (1.0 - ratio))
    perm = rng.permutation(valid_idx)
    return np.sort(perm[:n_keep]), np.sort(perm[n_keep:])


def mae_reconstruction_loss(
    pred: torch.Tensor, target: torch.Tensor, masked: np.ndarray, valid: np.ndarray
) -> torch.Tensor:
    """Mean squared error over masked, valid tokens only, against the
    downsampled (foveated) target."""
    idx = np.asarray([i for i in masked if valid[i]], dtype=np.int64)
    if idx.size == 0:
        raise ValueError("no masked valid tokens")
    sel = torch.from_numpy(idx)
    return ((pred[sel] - target[sel]) ** 2).mean()


class NanoMAE(nn.Module):
    """Encoder plus a two-layer reconstruction head; masked tokens are zeroed
    at the input and predicted in foveated sample space."""

    def __init__(self, cfg: NanoConfig):
        super().__init__()
        t = cfg.pattern.patch_size
        self.cfg = cfg
        self.encoder = NanoEncoder(cfg)
        self.head = Mlp(cfg.d_model, cfg.d_model, t * t * cfg.channels)
        self.to(DTYPE)
        _init_parameters(self, cfg.seed)

    def forward(self, data, valid, masked: np.ndarray):
        x = data.clone()
        x[torch.from_numpy(np.asarray(masked, dtype=np.int64))] = 0.0
        features = self.encoder(x, valid)
        t = self.cfg.pattern.patch_size
        return self.head(features[1:]).reshape(-1, t, t, self.cfg.channels)


# ---------------------------------------------------------------------------
# Numeric checks
# ---------------------------------------------------------------------------


@contextmanager
def _single_threaded():
    # intra-op threading only adds sync overhead at these tensor sizes
    n = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        yield
    finally:
        torch.set_num_threads(n)


def _random_case(cfg: NanoConfig, seed: int, n_invalid: int = 0):
    rng = np.random.default_rng(seed)
    n = token_count(cfg.pattern)
    t = cfg.pattern.patch_size
    valid = np.ones(n, dtype=bool)
    if n_invalid:
        valid[rng.choice(n, size=n_invalid, replace=False)] = False
    data = rng.random((n, t, t, cfg.channels))
    data[~valid] = 0.0
    target = rng.random((n, t, t))
    target[~valid] = 0.0
    return data, valid, target


def grad_check(
    cfg: NanoConfig | None = None,
    loss_fn=None,
    *,
    epsilon: float = 1e-4,
    seed: int = 0,
) -> float:
    """Compare autograd gradients through the full model against central
    finite differences on every parameter.

    loss_fn(mask_logits, iou_pred, target, valid, pattern) -> scalar tensor;
    defaults to the best-of-N combined loss. Returns the max relative error,
    |a - f| / max(1, |a|, |f|) per element.
    """
    cfg = cfg or tiny_config(seed)
    if loss_fn is None:
        loss_fn = lambda *args: combined_loss_t(*args)[0]  # noqa: E731
    model = NanoModel(cfg)
    data, valid, target = _random_case(cfg, seed + 1)
    data_t = torch.from_numpy(data).to(DTYPE)
    valid_t = torch.from_numpy(valid)
    target_t = torch.from_numpy(target).to(DTYPE)

    def loss_value() -> torch.Tensor:
        logits, iou = model(data_t, valid_t)
        return loss_fn(logits, iou, target_t, valid_t, cfg.pattern)

    model.zero_grad()
    loss = loss_value()
    if not torch.isfinite(loss):
        raise ValueError("non-finite loss")
    loss.backward()
    grads = [
        torch.zeros_like(p).reshape(-1) if p.grad is None else p.grad.detach().clone().reshape(-1)
        for p in model.parameters()
    ]

    worst = 0.0
    with _single_threaded(), torch.no_grad():
        for param, grad in zip(model.parameters(), grads):
            flat = param.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + epsilon
                hi = loss_value().item()
                flat[i] = orig - epsilon
                lo = loss_value().item()
                flat[i] = orig
                fd = (hi - lo) / (2.0 * epsilon)
                a = grad[i].item()
                if not (math.isfinite(fd) and math.isfinite(a)):
                    raise ValueError("non-finite gradient")
                err = abs(a - fd) / max(1.0, abs(a), abs(fd))
                worst = max(worst, err)
    return worst


def invariance_check(seed: int = 0, trials: int = 20) -> tuple[bool, int]:
    """Mutate the contents of invalid tokens and require bit-identical
    outputs (mask logits, IoU predictions, and valid encoder features)."""
    pattern = make_pattern([(1, 2), (2, 3), (3, 4)])
    passed = 0
    for trial in range(trials):
        cfg = NanoConfig(
            pattern=pattern,
            channels=1,
            d_model=16,
            n_layers=2,
            n_heads=2,
            n_masks=2,
            decoder_dim=16,
            decoder_layers=1,
            decoder_heads=2,
            seed=seed + trial,
        )
        model = NanoModel(cfg)
        data, valid, _ = _random_case(cfg, seed + 1000 + trial, n_invalid=5)
        rng = np.random.default_rng(seed + 2000 + trial)
        mutated = data.copy()
        mutated[~valid] = rng.random(((~valid).sum(), 16, 16, 1)) * 10.0 - 5.0
        valid_t = torch.from_numpy(valid)
        with torch.no_grad():
            feats_a = model.encoder(torch.from_numpy(data).to(DTYPE), valid_t)
            logits_a, iou_a = model.decoder(feats_a, valid_t)
            feats_b = model.encoder(torch.from_numpy(mutated).to(DTYPE), valid_t)
            logits_b, iou_b = model.decoder(feats_b, valid_t)
        keep = torch.from_numpy(np.concatenate([[True], valid]))
        same = (
            torch.equal(feats_a[keep], feats_b[keep])
            and torch.equal(logits_a, logits_b)
            and torch.equal(iou_a, iou_b)
        )
        passed += int(same)
    return passed == trials, passed


def overfit_check(
    cfg: NanoConfig | None = None, *, steps: int = 100, lr: float = 2e-3, seed: int = 0
) -> tuple[int, list[float]]:
    """Train on one sample; returns (#strictly-decreasing steps, losses)."""
    cfg = cfg or tiny_config(seed)
    model = NanoModel(cfg)
    data, valid, _ = _random_case(cfg, seed + 1)
    rng = np.random.default_rng(seed + 2)
    n = token_count(cfg.pattern)
    t = cfg.pattern.patch_size
    target = (rng.random((n, t, t)) > 0.5).astype(np.float64)
    data_t = torch.from_numpy(data).to(DTYPE)
    valid_t = torch.from_numpy(valid)
    target_t = torch.from_numpy(target).to(DTYPE)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    losses = []
    with _single_threaded():
        for _ in range(steps + 1):
            optimizer.zero_grad()
            logits, iou = model(data_t, valid_t)
            loss, _ = combined_loss_t(logits, iou, target_t, valid_t, cfg.pattern)
            losses.append(loss.item())
            loss.backward()
            optimizer.step()
    decreases = sum(1 for a, b in zip(losses, losses[1:]) if b < a)
    return decreases, losses


# ---------------------------------------------------------------------------
# Checkpoints: JSON header line + raw little-endian float64 parameters
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "fovtok-nano"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: NanoModel, path) -> None:
    state = model.state_dict()
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.cfg.to_dict(),
        "dtype": "float64",
        "tensors": [[name, list(tensor.shape)] for name, tensor in state.items()],
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        for tensor in state.values():
            f.write(tensor.numpy().astype("<f8").tobytes())


def load_checkpoint(path) -> NanoModel:
    with open(path, "rb") as f:
        header_line = f.readline()
        blob = f.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ValueError("not a model checkpoint: bad header") from None
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a model checkpoint: bad format tag")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')}")
    cfg = NanoConfig.from_dict(header["config"])
    model = NanoModel(cfg)
    state = {}
    offset = 0
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 8
        if end > len(blob):
            raise ValueError("truncated checkpoint")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        state[name] = torch.from_numpy(arr.copy())
        offset = end
    if offset != len(blob):
        raise ValueError("trailing bytes in checkpoint")
    model.load_state_dict(state)
    return model
