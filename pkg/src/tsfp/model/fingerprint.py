"""Fingerprint encoder/decoder: k learnable queries compress patch embeddings
into a fixed (k, d) token set; a decoder rebuilds masked patches from those
tokens and positional mask queries alone."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .layers import INIT_STD, FeedForward, LayerNorm, Linear, Module, MultiHeadAttention, Parameter, sinusoidal_positions


@dataclass
class ModelConfig:
    patch_size: int = 20
    k: int = 8
    d: int = 128
    n_heads: int = 8
    encoder_layers: int = 6
    decoder_layers: int = 2
    n_channels: int = 1
    n_classes: int = 3
    ff_mult: int = 4
    # "drop": the encoder only sees visible patches; "placeholder": masked
    # patches are replaced by the mask token plus their position.
    encoder_input: str = "drop"

    def __post_init__(self):
        if self.d % self.n_heads:
            raise ValueError("d: must be divisible by n_heads")
        if self.k < 1:
            raise ValueError("k: must be >= 1")
        if self.patch_size < 1:
            raise ValueError("patch_size: must be >= 1")
        if self.encoder_input not in ("drop", "placeholder"):
            raise ValueError("encoder_input: must be 'drop' or 'placeholder'")

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.n_channels

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PatchSequence:
    embeddings: Tensor  # (B, n, d)
    positions: np.ndarray  # (n,)
    n_valid: int  # patches [n_valid, n) contain edge padding

    @property
    def n_patches(self) -> int:
        return self.embeddings.shape[1]


def patchify(x: np.ndarray, patch_size: int) -> tuple[np.ndarray, int]:
    """Split (B, T, C) into (B, n, patch_size*C) after right edge-padding.

    Returns the patches and the number of patches free of padding.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    b, T, c = x.shape
    n_valid = T // patch_size
    if n_valid < 1:
        raise ValueError(f"series of length {T} shorter than one patch ({patch_size})")
    n = -(-T // patch_size)
    if n * patch_size != T:
        x = np.pad(x, ((0, 0), (0, n * patch_size - T), (0, 0)), mode="edge")
    return x.reshape(b, n, patch_size * c), n_valid


class EncoderBlock(Module):
    def __init__(self, d: int, n_heads: int, ff_mult: int, rng):
        self.norm_q = LayerNorm(d)
        self.norm_kv = LayerNorm(d)
        self.cross = MultiHeadAttention(d, n_heads, rng)
        self.norm_self = LayerNorm(d)
        self.self_attn = MultiHeadAttention(d, n_heads, rng)
        self.norm_ff = LayerNorm(d)
        self.ff = FeedForward(d, ff_mult, rng)

    def __call__(self, tokens: Tensor, patches: Tensor, record: list | None = None) -> Tensor:
        attn = self.cross(self.norm_q(tokens), self.norm_kv(patches), return_weights=record is not None)
        if record is not None:
            attn, w = attn
            record.append(w)
        tokens = tokens + attn
        h = self.norm_self(tokens)
        tokens = tokens + self.self_attn(h, h)
        return tokens + self.ff(self.norm_ff(tokens))


class DecoderBlock(Module):
    def __init__(self, d: int, n_heads: int, ff_mult: int, rng):
        self.norm_q = LayerNorm(d)
        self.norm_kv = LayerNorm(d)
        self.cross = MultiHeadAttention(d, n_heads, rng)
        self.norm_ff = LayerNorm(d)
        self.ff = FeedForward(d, ff_mult, rng)

    def __call__(self, queries: Tensor, tokens: Tensor) -> Tensor:
        queries = queries + self.cross(self.norm_q(queries), self.norm_kv(tokens))
        return queries + self.ff(self.norm_ff(queries))


class FingerprintModel(Module):
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        d = config.d
        self.patch_proj = Linear(config.patch_dim, d, rng)
        self.queries = Parameter(rng.normal(0.0, INIT_STD, (config.k, d)))
        self.encoder = [EncoderBlock(d, config.n_heads, config.ff_mult, rng) for _ in range(config.encoder_layers)]
        self.encoder_norm = LayerNorm(d)
        self.mask_token = Parameter(rng.normal(0.0, INIT_STD, d))
        self.decoder = [DecoderBlock(d, config.n_heads, config.ff_mult, rng) for _ in range(config.decoder_layers)]
        self.decoder_norm = LayerNorm(d)
        self.reconstruct = Linear(d, config.patch_dim, rng)
        self.task_query = Parameter(rng.normal(0.0, INIT_STD, (d, 1)))
        self.head = Linear(d, config.n_classes, rng)

    # -- groups of parameters ---------------------------------------------
    def encoder_parameters(self) -> list[Parameter]:
        names = ("patch_proj", "queries", "encoder", "encoder_norm")
        return [p for n, p in self.named_parameters() if n.split(".")[0] in names]

    def decoder_parameters(self) -> list[Parameter]:
        names = ("mask_token", "decoder", "decoder_norm", "reconstruct")
        return [p for n, p in self.named_parameters() if n.split(".")[0] in names]

    def head_parameters(self) -> list[Parameter]:
        return [p for n, p in self.named_parameters() if n.split(".")[0] in ("task_query", "head")]

    # -- forward pieces -----------------------------------------------------
    def positions(self, n: int) -> np.ndarray:
        return sinusoidal_positions(n, self.config.d)

    def patch_embed(self, x: np.ndarray) -> PatchSequence:
        """Linear patch projection plus sinusoidal positions."""
        patches, n_valid = patchify(x, self.config.patch_size)
        if patches.shape[-1] != self.config.patch_dim:
            raise ValueError(f"expected {self.config.n_channels} channels")
        b, n, _ = patches.shape
        emb = self.patch_proj(Tensor(patches)) + Tensor(np.broadcast_to(self.positions(n), (b, n, self.config.d)))
        return PatchSequence(emb, np.arange(n), n_valid)

    def encode(self, patches: Tensor, visible: np.ndarray | None = None, attention: list | None = None) -> Tensor:
        """Compress (B, n, d) patch embeddings into (B, k, d) tokens.

        ``visible`` (B, n_visible) selects the patches the encoder may read.
        Passing a list as ``attention`` collects each layer's cross-attention
        weights, shape (B, heads, k, n_visible).
        """
        if visible is not None:
            visible = np.asarray(visible)
            if visible.ndim != 2 or visible.shape[1] == 0:
                raise ValueError("encoder needs at least one visible patch")
            patches = ad.take(patches, visible)
        if patches.shape[1] == 0:
            raise ValueError("encoder needs at least one visible patch")
        tokens = ad.expand(self.queries, patches.shape[0])
        for block in self.encoder:
            tokens = block(tokens, patches, attention)
        return self.encoder_norm(tokens)

    def placeholder_inputs(self, patches: Tensor, masked: np.ndarray) -> Tensor:
        """Replace masked patch embeddings with mask token + position."""
        b, n, d = patches.shape
        m = np.zeros((b, n, d))
        m[np.arange(b)[:, None], masked] = 1.0
        pos = Tensor(np.broadcast_to(self.positions(n), (b, n, d)))
        return ad.mul(patches, Tensor(1.0 - m)) + ad.mul(pos + self.mask_token, Tensor(m))

    def decode(self, tokens: Tensor, masked: np.ndarray) -> Tensor:
        """Reconstruct (B, M, patch_dim) patch values at ``masked`` (B, M) positions.

        Queries carry only the shared mask token and positional embedding;
        the decoder reads nothing but ``tokens``.
        """
        masked = np.asarray(masked, dtype=np.int64)
        if masked.ndim != 2 or masked.shape[1] == 0:
            raise ValueError("decode needs at least one masked position per sample")
        table = self.positions(int(masked.max()) + 1)
        queries = Tensor(table[masked]) + self.mask_token
        for block in self.decoder:
            queries = block(queries, tokens)
        return self.reconstruct(self.decoder_norm(queries))

    def attention_pool(self, tokens: Tensor) -> tuple[Tensor, Tensor]:
        """Softmax-weighted token average; returns (z (B, d), alpha (B, k))."""
        b, k, d = tokens.shape
        scores = ad.reshape(ad.matmul(tokens, self.task_query), (b, k))
        alpha = ad.softmax(scores)
        z = ad.reshape(ad.matmul(ad.reshape(alpha, (b, 1, k)), tokens), (b, d))
        return z, alpha

    def classify(self, z: Tensor) -> Tensor:
        return self.head(z)

    # -- composite passes ---------------------------------------------------
    def fingerprints(self, x: np.ndarray, attention: list | None = None) -> Tensor:
        """Tokens for full series (no masking); padded tail patches are skipped."""
        seq = self.patch_embed(x)
        b = seq.embeddings.shape[0]
        visible = None
        if seq.n_valid < seq.n_patches:
            visible = np.broadcast_to(np.arange(seq.n_valid), (b, seq.n_valid))
        return self.encode(seq.embeddings, visible, attention)

    def forward_classify(self, x: np.ndarray, attention: list | None = None):
        tokens = self.fingerprints(x, attention)
        z, alpha = self.attention_pool(tokens)
        return self.classify(z), alpha, tokens
