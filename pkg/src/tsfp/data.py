"""Synthetic motif benchmark: a shared smooth base signal with injected
amplitude drops or oscillatory bursts that define the class."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np


class MotifKind(enum.IntEnum):
    DROP = 0
    OSCILLATION = 1
    CLEAN = 2


@dataclass(frozen=True)
class Motif:
    start: int
    end: int  # exclusive
    kind: MotifKind

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class TimeSeriesSample:
    values: np.ndarray  # (T, C)
    label: int | None = None
    motifs: list[Motif] = field(default_factory=list)
    seed: int | None = None

    @property
    def T(self) -> int:
        return self.values.shape[0]


@dataclass
class SyntheticConfig:
    T: int = 1000
    n_train: int = 300
    n_val: int = 100
    n_test: int = 100
    motifs_per_sample: tuple[int, int] = (2, 4)
    motif_length: tuple[int, int] = (40, 80)
    drop_depth: tuple[float, float] = (-2.5, -1.5)
    osc_freq: tuple[float, float] = (15.0, 30.0)  # cycles per window of length T
    osc_amp: tuple[float, float] = (0.8, 1.5)
    base_freq: float = 2.0
    base_amp: float = 1.0
    drift_scale: float = 0.5
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("motifs_per_sample", "motif_length", "drop_depth", "osc_freq", "osc_amp"):
            lo, hi = getattr(self, name)
            setattr(self, name, (type(lo)(lo), type(hi)(hi)))
        self.validate()

    def validate(self) -> None:
        if self.T < 1:
            raise ValueError("T: must be >= 1")
        for name in ("motifs_per_sample", "motif_length", "drop_depth", "osc_freq", "osc_amp"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
        if self.motifs_per_sample[0] < 1:
            raise ValueError("motifs_per_sample: need at least one motif")
        if self.motif_length[0] < 1 or self.motif_length[1] > self.T:
            raise ValueError("motif_length: must lie in [1, T]")
        if self.noise_std < 0:
            raise ValueError("noise_std: must be >= 0")
        if self.drift_scale < 0:
            raise ValueError("drift_scale: must be >= 0")
        for name in ("n_train", "n_val", "n_test"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name}: must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def envelope(self) -> float:
        """Bound on |x(t)| that holds unless noise exceeds 8 standard deviations."""
        return (
            abs(self.base_amp)
            + self.drift_scale
            + max(abs(self.drop_depth[0]), abs(self.drop_depth[1]))
            + max(abs(self.osc_amp[0]), abs(self.osc_amp[1]))
            + 8.0 * self.noise_std
        )


def normalized_random_walk(rng: np.random.Generator, T: int) -> np.ndarray:
    walk = np.cumsum(rng.standard_normal(T))
    peak = np.max(np.abs(walk))
    return walk / peak if peak > 0 else walk


def generate_base_signal(config: SyntheticConfig, seed: int) -> TimeSeriesSample:
    """Sinusoidal trend + scaled normalised random walk + Gaussian noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(config.T)
    x = config.base_amp * np.sin(2 * np.pi * config.base_freq * t / config.T)
    drift = normalized_random_walk(rng, config.T)
    noise = rng.standard_normal(config.T)
    x = x + config.drift_scale * drift + config.noise_std * noise
    return TimeSeriesSample(values=x[:, None], seed=seed)


def inject_motif(
    sample: TimeSeriesSample,
    kind: MotifKind,
    interval: tuple[int, int],
    depth: float = -2.0,
    freq: float = 20.0,
    amp: float = 1.0,
    phase: float = 0.0,
) -> TimeSeriesSample:
    """Return a copy of ``sample`` with one motif added over ``(start, length)``.

    Drop adds the constant ``depth``; Oscillation adds a Hann-windowed sine at
    ``freq`` cycles per series length.
    """
    kind = MotifKind(kind)
    if kind is MotifKind.CLEAN:
        raise ValueError("cannot inject a Clean motif")
    start, length = int(interval[0]), int(interval[1])
    T = sample.values.shape[0]
    if length < 1 or start < 0 or start + length > T:
        raise ValueError(f"interval ({start}, {length}) outside [0, {T})")
    values = sample.values.copy()
    if kind is MotifKind.DROP:
        values[start:start + length] += depth
    else:
        t = np.arange(length)
        burst = amp * np.hanning(length) * np.sin(2 * np.pi * freq * t / T + phase)
        values[start:start + length] += burst[:, None]
    motifs = sample.motifs + [Motif(start, start + length, kind)]
    return TimeSeriesSample(values=values, label=sample.label, motifs=motifs, seed=sample.seed)


def _place_intervals(rng: np.random.Generator, T: int, count: int, length_range) -> list[tuple[int, int]]:
    """Non-overlapping (start, length) pairs by rejection sampling."""
    placed: list[tuple[int, int]] = []
    for _ in range(count):
        length = int(rng.integers(length_range[0], length_range[1] + 1))
        while True:
            for _attempt in range(100):
                start = int(rng.integers(0, T - length + 1))
                if all(start + length <= s or s + n <= start for s, n in placed):
                    placed.append((start, length))
                    break
            else:
                if length == 1:
                    return placed
                length = max(1, length // 2)
                continue
            break
    return placed


def generate_sample(config: SyntheticConfig, kind: MotifKind, seed: int) -> TimeSeriesSample:
    sample = generate_base_signal(config, seed)
    sample.label = int(kind)
    if kind is MotifKind.CLEAN:
        return sample
    rng = np.random.default_rng([seed, 1])
    lo, hi = config.motifs_per_sample
    count = int(rng.integers(lo, hi + 1))
    for start, length in _place_intervals(rng, config.T, count, config.motif_length):
        if kind is MotifKind.DROP:
            sample = inject_motif(sample, kind, (start, length), depth=float(rng.uniform(*config.drop_depth)))
        else:
            sample = inject_motif(
                sample,
                kind,
                (start, length),
                freq=float(rng.uniform(*config.osc_freq)),
                amp=float(rng.uniform(*config.osc_amp)),
                phase=float(rng.uniform(0, 2 * np.pi)),
            )
    return sample


@dataclass
class Split:
    """A stack of equally long samples with labels and motif annotations."""

    signals: np.ndarray  # (N, T, C)
    labels: np.ndarray  # (N,)
    motifs: list[list[Motif]]
    seeds: np.ndarray

    def __len__(self) -> int:
        return self.signals.shape[0]

    def subset(self, idx: Sequence[int]) -> "Split":
        idx = np.asarray(idx, dtype=np.int64)
        return Split(self.signals[idx], self.labels[idx], [self.motifs[i] for i in idx], self.seeds[idx])

    def sample(self, i: int) -> TimeSeriesSample:
        return TimeSeriesSample(self.signals[i], int(self.labels[i]), list(self.motifs[i]), int(self.seeds[i]))

    @classmethod
    def from_samples(cls, samples: Sequence[TimeSeriesSample]) -> "Split":
        return cls(
            signals=np.stack([s.values for s in samples]),
            labels=np.array([s.label for s in samples], dtype=np.int64),
            motifs=[list(s.motifs) for s in samples],
            seeds=np.array([s.seed for s in samples], dtype=np.uint64),
        )


SPLITS = ("train", "val", "test")


def sample_seed(master: int, split: int, index: int) -> int:
    return int(np.random.SeedSequence([master, split, index]).generate_state(1, np.uint64)[0])


def generate_dataset(config: SyntheticConfig) -> dict[str, Split]:
    """Balanced three-class splits; classes are assigned round-robin."""
    out = {}
    for split_id, name in enumerate(SPLITS):
        n = getattr(config, f"n_{name}")
        samples = [
            generate_sample(config, MotifKind(i % 3), sample_seed(config.seed, split_id, i)) for i in range(n)
        ]
        out[name] = Split.from_samples(samples)
    return out


def label_from_motifs(motifs: Sequence[Motif]) -> int:
    kinds = {m.kind for m in motifs}
    if not kinds:
        return int(MotifKind.CLEAN)
    if len(kinds) > 1:
        raise ValueError("sample mixes motif kinds")
    return int(kinds.pop())


def per_class_subset(split: Split, n_per_class: int, seed: int) -> Split:
    """Take ``n_per_class`` random samples of every class (label-scarce regime)."""
    rng = np.random.default_rng(seed)
    idx = []
    for c in np.unique(split.labels):
        pool = np.flatnonzero(split.labels == c)
        if len(pool) < n_per_class:
            raise ValueError(f"class {c} has only {len(pool)} samples")
        idx.extend(sorted(rng.choice(pool, n_per_class, replace=False)))
    return split.subset(sorted(idx))


def frequency_mask_augment(x: np.ndarray, band_fraction: float, rng) -> np.ndarray:
    """Zero one contiguous band of non-DC Fourier bins along axis 0.

    The band covers ``round(band_fraction * n_positive_bins)`` bins. Working
    on the one-sided spectrum keeps the result real.
    """
    if not 0.0 <= band_fraction <= 1.0:
        raise ValueError("band_fraction must be in [0, 1]")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    spec = np.fft.rfft(x, axis=0)
    m = spec.shape[0] - 1
    width = int(round(band_fraction * m))
    if width > 0:
        start = int(rng.integers(1, m - width + 2))
        spec[start:start + width] = 0.0
    return np.fft.irfft(spec, n=n, axis=0)
