"""Model backends producing per-layer, per-sample activation vectors.

A backend maps a list of texts to {layer: (n, d) float32}, where each row is
the mean over non-padding token positions of that layer's hidden states.
TransformersBackend wraps a Hugging Face model; HashBackend is a fast,
deterministic, dependency-free stand-in for tests and offline smoke runs.
"""

import hashlib

import numpy as np


class BackendError(RuntimeError):
    """Backend unavailable or model loading failed; message says what to do."""


class HashBackend:
    """Deterministic pseudo-activations derived from text content.

    Each sample's layer-0 vector is seeded from a SHA-256 of the text, and
    deeper layers apply a fixed random rotation plus a content-dependent
    drift, so texts with shared prefixes stay nearby and layers differ in a
    stable way. Useful for exercising the pipeline without model weights.
    """

    def __init__(self, d=64, seed=0):
        self.d = d
        rng = np.random.default_rng(seed)
        self._rot = np.linalg.qr(rng.standard_normal((d, d)))[0]

    def hidden_states(self, texts, layers):
        base = np.empty((len(texts), self.d), dtype=np.float32)
        for i, t in enumerate(texts):
            digest = hashlib.sha256(t.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            base[i] = rng.standard_normal(self.d).astype(np.float32)
        out = {}
        for layer in layers:
            v = base.astype(np.float64)
            for _ in range(layer):
                v = v @ self._rot + 0.1 * np.tanh(v)
            out[layer] = v.astype(np.float32)
        return out


class TransformersBackend:
    """Mean-pooled hidden states from a Hugging Face transformer.

    Layer numbering follows output_hidden_states: layer 0 is the embedding
    output, layer i the i-th block's output. Pooling averages over positions
    the attention mask marks as real tokens.
    """

    def __init__(self, model_name, device="cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise BackendError(
                "the transformers backend needs the 'transformers' and "
                "'torch' packages; install with "
                "pip install 'lact-extract[transformers]'") from e
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name)
            self.model = AutoModel.from_pretrained(
                model_name, output_hidden_states=True).to(device).eval()
        except Exception as e:
            raise BackendError(
                f"could not load model {model_name!r}: {e}; check the name "
                "and that weights are downloadable (or pre-cached in "
                "HF_HOME)") from e
        if self.tokenizer.pad_token is None:
            self.tokenizer.pad_token = self.tokenizer.eos_token
        self._torch = torch
        self.device = device

    def hidden_states(self, texts, layers, batch_size=16):
        torch = self._torch
        pooled = {l: [] for l in layers}
        for start in range(0, len(texts), batch_size):
            batch = texts[start:start + batch_size]
            enc = self.tokenizer(batch, return_tensors="pt", padding=True,
                                 truncation=True).to(self.device)
            with torch.no_grad():
                hs = self.model(**enc).hidden_states
            if max(layers) >= len(hs):
                raise BackendError(
                    f"layer {max(layers)} requested but model has "
                    f"{len(hs) - 1} blocks")
            mask = enc["attention_mask"].unsqueeze(-1).float()
            denom = mask.sum(dim=1).clamp(min=1.0)
            for l in layers:
                vec = (hs[l] * mask).sum(dim=1) / denom
                pooled[l].append(vec.cpu().numpy().astype(np.float32))
        return {l: np.concatenate(v) for l, v in pooled.items()}
