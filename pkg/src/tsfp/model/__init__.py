from .fingerprint import FingerprintModel, ModelConfig, PatchSequence, patchify
from .layers import Linear, LayerNorm, Module, MultiHeadAttention, Parameter, sinusoidal_positions

__all__ = [
    "FingerprintModel",
    "LayerNorm",
    "Linear",
    "ModelConfig",
    "Module",
    "MultiHeadAttention",
    "Parameter",
    "PatchSequence",
    "patchify",
    "sinusoidal_positions",
]
