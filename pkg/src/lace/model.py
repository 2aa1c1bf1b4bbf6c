"""Expandable classifier: embedding, masked projection, classification head.

The projection matrix is pre-allocated at d_max rows. Expansion flips one mask
bit, overwrites the newly activated row with small random weights, and zeros
that row's Adam moments. Rows with index >= d_active never influence the
forward pass and never receive gradient.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import nn

CHECKPOINT_MAGIC = b"LACE"
CHECKPOINT_VERSION = 1


class CapacityError(RuntimeError):
    """Expansion requested with d_active already at d_max."""


class AblationError(ValueError):
    """Ablation set references a dimension outside the active range."""


@dataclass
class ExpansionEvent:
    step: int
    d_before: int
    d_after: int
    signal: str  # "spike" or "sustained"


class DynamicModel:
    """Embedding -> masked projection -> head, with online width expansion.

    If input_dim is given the embedding table is bypassed and the model
    consumes precomputed feature vectors of that width (used for the
    frozen-embedding experiments).
    """

    def __init__(self, vocab_size=128, d_emb=32, d_base=64, d_max=84,
                 num_classes=10, seq_len=32, lr=3e-4, seed=0,
                 dtype=np.float32, input_dim=None):
        if not 0 <= d_base <= d_max:
            raise ValueError("need 0 <= d_base <= d_max")
        self.vocab_size = vocab_size
        self.d_emb = d_emb if input_dim is None else input_dim
        self.d_base = d_base
        self.d_max = d_max
        self.d_active = d_base
        self.num_classes = num_classes
        self.seq_len = seq_len
        self.dtype = dtype
        self.input_dim = input_dim

        # Constant gain on the L2-normalized hidden vector. Adam's step size
        # is lr-bounded, so without the gain logits move too slowly to fit a
        # new domain within one 200-step phase; normalizing the hidden layer
        # bounds the logits so the gain cannot run away on long schedules.
        self.hidden_gain = 64.0

        rng = np.random.default_rng(seed)
        d_in = self.d_emb
        self.embed = rng.standard_normal((vocab_size, d_emb)).astype(dtype)
        # Full buffers are drawn up front so RNG consumption does not depend
        # on d_active; inactive projection rows are then zeroed (they get
        # overwritten at expansion time anyway).
        self.proj = (rng.standard_normal((d_max, d_in))
                     * np.sqrt(2.0 / d_in)).astype(dtype)
        self.proj[d_base:] = 0.0
        self.head = np.zeros((num_classes, d_max), dtype=dtype)
        self.mask = np.zeros(d_max, dtype=dtype)
        self.mask[:d_base] = 1.0

        self.opt_embed = nn.AdamState(self.embed.shape, lr=lr, dtype=dtype)
        self.opt_proj = nn.AdamState(self.proj.shape, lr=lr, dtype=dtype)
        self.opt_head = nn.AdamState(self.head.shape, lr=lr, dtype=dtype)

    def set_active(self, d_active):
        """Force the active width (fixed-mode baselines)."""
        if not self.d_base <= d_active <= self.d_max:
            raise ValueError("d_active outside [d_base, d_max]")
        self.d_active = d_active
        self.mask[:] = 0.0
        self.mask[:d_active] = 1.0

    def features(self, tokens):
        """Mean-pool token embeddings and RMS-normalize: ids -> (B, d_emb).

        The normalization keeps the feature scale constant as the embedding
        table grows during training; without it long runs drift into
        saturated logits and diverge.
        """
        tokens = np.asarray(tokens)
        if tokens.max(initial=0) >= self.vocab_size or tokens.min(initial=0) < 0:
            raise IndexError("token id out of range")
        pooled = self.embed[tokens].mean(axis=-2)
        return self._rms_norm(pooled)

    @staticmethod
    def _rms_norm(pooled, eps=1e-6):
        rms = np.sqrt(np.mean(pooled * pooled, axis=-1, keepdims=True) + eps)
        return pooled / rms

    @staticmethod
    def _rms_norm_backward(pooled, dx, eps=1e-6):
        """Gradient w.r.t. the pooled vector given the gradient at the
        normalized output."""
        rms = np.sqrt(np.mean(pooled * pooled, axis=-1, keepdims=True) + eps)
        xn = pooled / rms
        proj = np.mean(dx * xn, axis=-1, keepdims=True)
        return (dx - xn * proj) / rms

    def _forward_x(self, x, mask):
        pre = x @ self.proj.T
        raw = nn.relu(pre) * mask
        hidden = self._l2_norm(raw) * self.hidden_gain
        logits = hidden @ self.head.T
        return logits, hidden, (pre, raw)

    def forward(self, tokens):
        """Returns (logits, hidden) for a (B, seq_len) or (seq_len,) batch."""
        x = self.features(tokens)
        logits, hidden, _ = self._forward_x(x, self.mask)
        return logits, hidden

    def forward_vec(self, x):
        """Forward pass on precomputed feature vectors (embedding bypassed).

        Inputs get the same RMS normalization as pooled embeddings."""
        xn = self._rms_norm(np.asarray(x, dtype=self.dtype))
        logits, hidden, _ = self._forward_x(xn, self.mask)
        return logits, hidden

    def forward_ablated(self, tokens, disabled_dims):
        """Forward with the given active dimensions additionally masked out."""
        mask = self.mask.copy()
        for i in disabled_dims:
            if not 0 <= i < self.d_active:
                raise AblationError(f"dimension {i} not active (d_active={self.d_active})")
            mask[i] = 0.0
        x = self.features(tokens)
        logits, _, _ = self._forward_x(x, mask)
        return logits

    def expand(self, sigma, step=0, signal="spike", rng=None):
        """Activate one more projection row; returns the ExpansionEvent."""
        if self.d_active >= self.d_max:
            raise CapacityError(f"d_active={self.d_active} is at d_max")
        if rng is None:
            rng = np.random.default_rng(0)
        row = self.d_active
        self.proj[row] = (sigma * rng.standard_normal(self.proj.shape[1])).astype(self.dtype)
        self.mask[row] = 1.0
        self.d_active += 1
        self.opt_proj.reset_rows([row])
        return ExpansionEvent(step=step, d_before=row, d_after=self.d_active,
                              signal=signal)

    @staticmethod
    def _l2_norm(v, eps=1e-6):
        n = np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + eps)
        return v / n

    @staticmethod
    def _l2_norm_backward(v, dy, eps=1e-6):
        n = np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + eps)
        y = v / n
        return (dy - y * np.sum(dy * y, axis=-1, keepdims=True)) / n

    def _backward(self, x, pre_raw, hidden, dlogits):
        pre, raw = pre_raw
        dhead = dlogits.T @ hidden
        dhidden = dlogits @ self.head
        draw = self._l2_norm_backward(raw, dhidden * self.hidden_gain)
        dpre = draw * self.mask * (pre > 0)
        dproj = dpre.T @ x
        dx = dpre @ self.proj
        return dhead, dproj, dx

    def train_step(self, tokens, labels):
        """One Adam step on the mean batch loss; returns the loss."""
        tokens = np.asarray(tokens)
        if tokens.ndim == 1:
            tokens = tokens[None, :]
        pooled = self.embed[tokens].mean(axis=-2)
        x = self._rms_norm(pooled)
        logits, hidden, pre = self._forward_x(x, self.mask)
        loss, dlogits = nn.softmax_xent_batch(logits, labels)
        dhead, dproj, dx = self._backward(x, pre, hidden, dlogits)
        dpooled = self._rms_norm_backward(pooled, dx)
        dembed = np.zeros_like(self.embed)
        np.add.at(dembed, tokens.reshape(-1),
                  np.repeat(dpooled / tokens.shape[1], tokens.shape[1], axis=0))
        nn.adam_step(self.embed, dembed, self.opt_embed)
        nn.adam_step(self.proj, dproj.astype(self.dtype), self.opt_proj)
        nn.adam_step(self.head, dhead.astype(self.dtype), self.opt_head)
        return loss

    def train_step_vec(self, x, labels):
        """train_step on precomputed feature vectors."""
        x = self._rms_norm(np.asarray(x, dtype=self.dtype))
        logits, hidden, pre = self._forward_x(x, self.mask)
        loss, dlogits = nn.softmax_xent_batch(logits, labels)
        dhead, dproj, _ = self._backward(x, pre, hidden, dlogits)
        nn.adam_step(self.proj, dproj.astype(self.dtype), self.opt_proj)
        nn.adam_step(self.head, dhead.astype(self.dtype), self.opt_head)
        return loss

    # -- checkpoint format: magic, version u32, six u32 header fields, then
    #    each matrix as u32 rows, u32 cols, row-major float32 LE.

    def save(self, path):
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<7I", CHECKPOINT_VERSION, self.d_base,
                                self.d_active, self.d_max, self.vocab_size,
                                self.d_emb, self.num_classes))
            for mat in (self.embed, self.proj, self.head):
                f.write(struct.pack("<2I", mat.shape[0], mat.shape[1]))
                f.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != CHECKPOINT_MAGIC:
                raise ValueError(f"bad checkpoint magic {magic!r}")
            version, d_base, d_active, d_max, vocab, d_emb, n_cls = struct.unpack(
                "<7I", f.read(28))
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            mats = []
            for _ in range(3):
                r, c = struct.unpack("<2I", f.read(8))
                buf = f.read(r * c * 4)
                mats.append(np.frombuffer(buf, dtype="<f4").reshape(r, c).copy())
        model = cls(vocab_size=vocab, d_emb=d_emb, d_base=d_base, d_max=d_max,
                    num_classes=n_cls, dtype=np.float32)
        model.embed, model.proj, model.head = mats
        model.set_active(d_active)
        model.opt_embed = nn.AdamState(model.embed.shape, dtype=np.float32)
        model.opt_proj = nn.AdamState(model.proj.shape, dtype=np.float32)
        model.opt_head = nn.AdamState(model.head.shape, dtype=np.float32)
        return model
