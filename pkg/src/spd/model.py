"""Small transformer encoder exposing per-layer hidden states and
attention distributions.

The same class serves as teacher, student-module bank, and assembled
student: a student is a deep copy of the teacher whose encoder layers
get pruned and trained while the copied embeddings stay frozen.
Post-layer-norm residual ordering, learned absolute position embeddings,
no dropout (forward is a pure function of weights and inputs).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, InputError, ShapeError
from .rng import Rng
from .tensor import Tensor

# Weight matrices eligible for magnitude pruning. Biases, layer norms,
# embeddings and the classifier head are never masked.
PRUNABLE = ("w_q", "w_k", "w_v", "w_o", "w_ff1", "w_ff2")

_NEG_BIAS = -1e30  # additive attention bias at padded key positions


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 4
    d_model: int = 64
    num_heads: int = 4
    d_ff: int = 128
    vocab_size: int = 32
    max_seq_len: int = 32
    num_classes: int = 2

    def __post_init__(self):
        for name in ("num_layers", "d_model", "num_heads", "d_ff",
                     "vocab_size", "max_seq_len", "num_classes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_model % self.num_heads != 0:
            raise ConfigError(
                f"d_model={self.d_model} not divisible by num_heads={self.num_heads}"
            )

    @property
    def d_head(self) -> int:
        return self.d_model // self.num_heads

    def to_dict(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "d_model": self.d_model,
            "num_heads": self.num_heads,
            "d_ff": self.d_ff,
            "vocab_size": self.vocab_size,
            "max_seq_len": self.max_seq_len,
            "num_classes": self.num_classes,
        }


@dataclass
class ForwardTrace:
    """Everything the distillation losses need from one forward pass."""

    hidden: list = field(default_factory=list)      # per layer, [B, S, d_model]
    attn: list = field(default_factory=list)        # per layer, [B, H, S, S]
    scores: list = field(default_factory=list)      # pre-softmax, pre-padding-bias
    logits: Tensor | None = None                    # [B, num_classes]


def attention(q: Tensor, k: Tensor, v: Tensor, bias: np.ndarray | None = None):
    """Scaled dot-product attention over [batch, heads, seq, d_head].

    Returns (context, probabilities, scaled scores); probabilities are
    captured before the value product so traces can distill them
    directly.  Scores are pre-bias, so padding machinery stays out of
    any score-matching loss.
    """
    if q.ndim != 4 or q.shape != k.shape or k.shape != v.shape:
        raise ShapeError(
            f"attention expects matching 4-d Q/K/V, got {q.shape}, {k.shape}, {v.shape}"
        )
    d_head = q.shape[-1]
    scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(d_head))
    biased = T.add(scores, Tensor(bias)) if bias is not None else scores
    probs = T.softmax(biased, axis=-1)
    return T.matmul(probs, v), probs, scores


class EncoderLayer:
    """One pre-activation block: self-attention + FFN, post-layer-norm."""

    def __init__(self, cfg: ModelConfig, rng: Rng | None = None):
        d, f = cfg.d_model, cfg.d_ff
        self.cfg = cfg

        def mat(rows, cols):
            if rng is None:
                return Tensor(np.zeros((rows, cols)), requires_grad=True)
            limit = np.sqrt(6.0 / (rows + cols))
            return Tensor(
                rng.uniform(-limit, limit, rows * cols).reshape(rows, cols),
                requires_grad=True,
            )

        self.w_q, self.w_k, self.w_v, self.w_o = (mat(d, d) for _ in range(4))
        self.b_q, self.b_k, self.b_v, self.b_o = (
            Tensor(np.zeros(d), requires_grad=True) for _ in range(4)
        )
        self.w_ff1 = mat(d, f)
        self.b_ff1 = Tensor(np.zeros(f), requires_grad=True)
        self.w_ff2 = mat(f, d)
        self.b_ff2 = Tensor(np.zeros(d), requires_grad=True)
        self.ln1_g = Tensor(np.ones(d), requires_grad=True)
        self.ln1_b = Tensor(np.zeros(d), requires_grad=True)
        self.ln2_g = Tensor(np.ones(d), requires_grad=True)
        self.ln2_b = Tensor(np.zeros(d), requires_grad=True)

    _PARAM_NAMES = (
        "w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o",
        "w_ff1", "b_ff1", "w_ff2", "b_ff2",
        "ln1_g", "ln1_b", "ln2_g", "ln2_b",
    )

    def named_params(self):
        return [(n, getattr(self, n)) for n in self._PARAM_NAMES]

    def prunable(self):
        return [(n, getattr(self, n)) for n in PRUNABLE]

    def forward(self, x: Tensor, attn_bias: np.ndarray, trace: ForwardTrace) -> Tensor:
        cfg = self.cfg
        b, s, d = x.shape
        h, dk = cfg.num_heads, cfg.d_head
        x2 = T.reshape(x, (b * s, d))

        def heads(w, bias):
            proj = T.add(T.matmul(x2, w), bias)
            return T.transpose(T.reshape(proj, (b, s, h, dk)), (0, 2, 1, 3))

        q = heads(self.w_q, self.b_q)
        k = heads(self.w_k, self.b_k)
        v = heads(self.w_v, self.b_v)
        ctx, probs, scores = attention(q, k, v, attn_bias)
        trace.attn.append(probs)
        trace.scores.append(scores)

        ctx2 = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (b * s, d))
        attn_out = T.add(T.matmul(ctx2, self.w_o), self.b_o)
        h1 = T.layer_norm(T.add(x2, attn_out), self.ln1_g, self.ln1_b)

        ff = T.add(T.matmul(T.gelu(T.add(T.matmul(h1, self.w_ff1), self.b_ff1)),
                            self.w_ff2), self.b_ff2)
        out2 = T.layer_norm(T.add(h1, ff), self.ln2_g, self.ln2_b)
        out = T.reshape(out2, (b, s, d))
        trace.hidden.append(out)
        return out


class EncoderModel:
    """Embeddings + N encoder layers + classifier head."""

    def __init__(self, cfg: ModelConfig, rng: Rng | None = None):
        self.cfg = cfg
        d = cfg.d_model

        def emb(rows, scale=0.05):
            if rng is None:
                data = np.zeros((rows, d))
            else:
                data = rng.uniform(-scale, scale, rows * d).reshape(rows, d)
            return Tensor(data, requires_grad=True)

        self.tok_emb = emb(cfg.vocab_size)
        self.pos_emb = emb(cfg.max_seq_len)
        self.seg_emb = emb(2)
        self.emb_ln_g = Tensor(np.ones(d), requires_grad=True)
        self.emb_ln_b = Tensor(np.zeros(d), requires_grad=True)
        self.layers = [EncoderLayer(cfg, rng) for _ in range(cfg.num_layers)]
        if rng is None:
            cls = np.zeros((d, cfg.num_classes))
        else:
            limit = np.sqrt(6.0 / (d + cfg.num_classes))
            cls = rng.uniform(-limit, limit, d * cfg.num_classes).reshape(
                d, cfg.num_classes)
        self.cls_w = Tensor(cls, requires_grad=True)
        self.cls_b = Tensor(np.zeros(cfg.num_classes), requires_grad=True)

    # -- parameter bookkeeping ------------------------------------------

    def named_params(self):
        out = [
            ("tok_emb", self.tok_emb),
            ("pos_emb", self.pos_emb),
            ("seg_emb", self.seg_emb),
            ("emb_ln_g", self.emb_ln_g),
            ("emb_ln_b", self.emb_ln_b),
        ]
        for i, layer in enumerate(self.layers):
            out.extend((f"layers.{i}.{n}", t) for n, t in layer.named_params())
        out.append(("cls_w", self.cls_w))
        out.append(("cls_b", self.cls_b))
        return out

    def parameters(self):
        return [t for _, t in self.named_params()]

    def embedding_params(self):
        return [self.tok_emb, self.pos_emb, self.seg_emb,
                self.emb_ln_g, self.emb_ln_b]

    def head_params(self):
        return [self.cls_w, self.cls_b]

    def set_trainable(self, flag: bool):
        for t in self.parameters():
            t.requires_grad = flag
        return self

    # -- forward ---------------------------------------------------------

    def forward(self, token_ids, segment_ids=None, lengths=None,
                layer_override=None) -> ForwardTrace:
        """Full forward pass collecting hidden states, attention maps and
        logits.  `layer_override[i]`, when given and not None, replaces
        encoder layer i for this pass (used for module grafting)."""
        cfg = self.cfg
        token_ids = np.asarray(token_ids, dtype=np.int64)
        if token_ids.ndim != 2:
            raise ShapeError(f"token_ids must be [batch, seq], got {token_ids.shape}")
        b, s = token_ids.shape
        if s > cfg.max_seq_len:
            raise InputError(f"sequence length {s} exceeds max_seq_len {cfg.max_seq_len}")
        if token_ids.min() < 0 or token_ids.max() >= cfg.vocab_size:
            raise InputError(
                f"token id out of vocab range [0, {cfg.vocab_size}): "
                f"min={token_ids.min()}, max={token_ids.max()}"
            )
        if segment_ids is None:
            segment_ids = np.zeros_like(token_ids)
        if lengths is None:
            lengths = np.full(b, s, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)

        valid = (np.arange(s)[None, :] < lengths[:, None]).astype(np.float64)
        attn_bias = np.where(valid[:, None, None, :] > 0.0, 0.0, _NEG_BIAS)

        emb = T.add(
            T.add(T.embedding(self.tok_emb, token_ids),
                  T.embedding(self.pos_emb, np.arange(s))),
            T.embedding(self.seg_emb, np.asarray(segment_ids, dtype=np.int64)),
        )
        h = T.layer_norm(emb, self.emb_ln_g, self.emb_ln_b)

        trace = ForwardTrace()
        for i, layer in enumerate(self.layers):
            active = layer
            if layer_override is not None and layer_override[i] is not None:
                active = layer_override[i]
            h = active.forward(h, attn_bias, trace)

        # mean over valid positions only, so padding cannot leak into logits
        pooled = T.sum_(T.mul(h, Tensor(valid[:, :, None])), axis=1)
        pooled = T.mul(pooled, Tensor((1.0 / lengths.astype(np.float64))[:, None]))
        trace.logits = T.add(T.matmul(pooled, self.cls_w), self.cls_b)
        return trace


def clone_model(src: EncoderModel) -> EncoderModel:
    """Deep copy: new tensors, same values; mutating the copy leaves src
    untouched."""
    dst = EncoderModel(src.cfg)
    for (_, a), (_, b) in zip(dst.named_params(), src.named_params()):
        a.data = b.data.copy()
        a.requires_grad = b.requires_grad
    return dst
