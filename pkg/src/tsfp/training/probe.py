"""Class-wise token allocation and time-resolved attention of a trained model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import MotifKind, Split
from ..model import FingerprintModel


@dataclass
class ProbeReport:
    alpha: np.ndarray  # (N, k) pooling weights per sample
    class_alpha: dict[int, np.ndarray]  # class -> mean alpha (k,)
    argmax_token: dict[int, int]
    attention: np.ndarray  # (N, k, n_patches), rows sum to 1
    localization: dict[int, dict]  # class -> {token, mass, fraction, better}

    @property
    def distinct_drop_oscillation(self) -> bool:
        return self.argmax_token[MotifKind.DROP] != self.argmax_token[MotifKind.OSCILLATION]

    @property
    def localizes(self) -> bool:
        return bool(self.localization) and all(v["better"] for v in self.localization.values())

    def summary(self) -> dict:
        return {
            "class_alpha": {int(c): a.tolist() for c, a in self.class_alpha.items()},
            "argmax_token": {int(c): int(t) for c, t in self.argmax_token.items()},
            "distinct_drop_oscillation": self.distinct_drop_oscillation,
            "localization": {int(c): v for c, v in self.localization.items()},
            "localizes": self.localizes,
        }


def patch_overlap(motifs, n_patches: int, patch_size: int, T: int) -> np.ndarray:
    """Fraction of each patch's in-series samples covered by motif intervals."""
    covered = np.zeros(n_patches * patch_size)
    for m in motifs:
        covered[m.start:m.end] = 1.0
    covered[T:] = 0.0
    sizes = np.clip(T - np.arange(n_patches) * patch_size, 0, patch_size)
    return covered.reshape(n_patches, patch_size).sum(axis=1) / np.maximum(sizes, 1)


def attention_maps(model: FingerprintModel, signals: np.ndarray, batch_size: int = 64):
    """Cross-attention averaged over heads and layers, plus pooling weights.

    Returns (attention (N, k, n_valid), alpha (N, k)).
    """
    maps, alphas = [], []
    for i in range(0, len(signals), batch_size):
        record: list[np.ndarray] = []
        _, alpha, _ = model.forward_classify(signals[i:i + batch_size], attention=record)
        maps.append(np.mean([w.mean(axis=1) for w in record], axis=0))
        alphas.append(alpha.data)
    return np.concatenate(maps), np.concatenate(alphas)


def disentanglement_probe(model: FingerprintModel, split: Split) -> ProbeReport:
    """Per-class mean pooling weights, argmax tokens and motif localization.

    Localization compares, for the class's argmax token, the attention mass
    that falls on motif-covered time steps with the share of the series
    those motifs occupy (the expectation under uniform attention).
    """
    if split.motifs is None:
        raise ValueError("probe needs motif annotations")
    att, alpha = attention_maps(model, split.signals)
    T = split.signals.shape[1]
    p = model.config.patch_size
    n = att.shape[-1]
    class_alpha, argmax = {}, {}
    for c in np.unique(split.labels):
        class_alpha[int(c)] = alpha[split.labels == c].mean(axis=0)
        argmax[int(c)] = int(np.argmax(class_alpha[int(c)]))
    localization = {}
    for c in (MotifKind.DROP, MotifKind.OSCILLATION):
        idx = np.flatnonzero(split.labels == c)
        if len(idx) == 0:
            continue
        tok = argmax[int(c)]
        mass, frac = [], []
        for i in idx:
            cover = patch_overlap(split.motifs[i], n, p, T)
            mass.append(float(att[i, tok] @ cover))
            frac.append(sum(m.length for m in split.motifs[i]) / T)
        localization[int(c)] = {
            "token": tok,
            "mass": float(np.mean(mass)),
            "fraction": float(np.mean(frac)),
            "better": bool(np.mean(mass) > np.mean(frac)),
        }
    return ProbeReport(alpha, class_alpha, argmax, att, localization)
