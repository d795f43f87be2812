import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsfp.data import (
    Motif,
    MotifKind,
    SyntheticConfig,
    TimeSeriesSample,
    frequency_mask_augment,
    generate_base_signal,
    generate_dataset,
    inject_motif,
    label_from_motifs,
    per_class_subset,
)


def flat(T=200):
    return TimeSeriesSample(values=np.zeros((T, 1)))


def test_pure_sinusoid_without_noise_or_drift():
    cfg = SyntheticConfig(noise_std=0.0, drift_scale=0.0)
    x = generate_base_signal(cfg, seed=3).values[:, 0]
    t = np.arange(cfg.T)
    assert np.max(np.abs(x - cfg.base_amp * np.sin(2 * np.pi * cfg.base_freq * t / cfg.T))) == 0.0


def test_base_signal_deterministic():
    cfg = SyntheticConfig()
    np.testing.assert_array_equal(generate_base_signal(cfg, 11).values, generate_base_signal(cfg, 11).values)
    assert not np.array_equal(generate_base_signal(cfg, 11).values, generate_base_signal(cfg, 12).values)


def test_drift_component_normalised():
    cfg = SyntheticConfig(noise_std=0.0, base_amp=0.0, drift_scale=1.0)
    x = generate_base_signal(cfg, 5).values
    assert np.max(np.abs(x)) == pytest.approx(1.0, abs=1e-15)


def test_drop_on_flat_signal():
    out = inject_motif(flat(), MotifKind.DROP, (50, 30), depth=-2.0)
    v = out.values[:, 0]
    assert np.all(v[50:80] == -2.0)
    assert np.all(v[:50] == 0.0) and np.all(v[80:] == 0.0)
    assert out.motifs == [Motif(50, 80, MotifKind.DROP)]


def test_zero_amplitude_oscillation_is_a_noop_but_annotated():
    out = inject_motif(flat(), MotifKind.OSCILLATION, (10, 40), amp=0.0)
    assert np.all(out.values == 0.0)
    assert len(out.motifs) == 1


def test_disjoint_motifs_superpose():
    a = inject_motif(flat(), MotifKind.DROP, (10, 20), depth=-1.7)
    b = inject_motif(flat(), MotifKind.OSCILLATION, (100, 50), freq=20, amp=1.2)
    both = inject_motif(a, MotifKind.OSCILLATION, (100, 50), freq=20, amp=1.2)
    np.testing.assert_array_equal(both.values, a.values + b.values)


def test_oscillation_hann_window_has_zero_edges():
    out = inject_motif(flat(), MotifKind.OSCILLATION, (10, 41), freq=20, amp=1.0, phase=0.7)
    assert out.values[10, 0] == 0.0 and out.values[50, 0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("interval", [(-1, 10), (195, 10), (0, 0)])
def test_out_of_bounds_interval(interval):
    with pytest.raises(ValueError):
        inject_motif(flat(), MotifKind.DROP, interval)


def test_clean_injection_rejected():
    with pytest.raises(ValueError):
        inject_motif(flat(), MotifKind.CLEAN, (0, 5))


@pytest.fixture(scope="module")
def small_dataset():
    return generate_dataset(SyntheticConfig(n_train=300, n_val=30, n_test=30, seed=4))


def test_balanced_classes(small_dataset):
    counts = np.bincount(small_dataset["train"].labels, minlength=3)
    assert counts.tolist() == [100, 100, 100]


def test_clean_samples_have_no_motifs(small_dataset):
    tr = small_dataset["train"]
    for lab, motifs in zip(tr.labels, tr.motifs):
        if lab == MotifKind.CLEAN:
            assert motifs == []


def test_label_recoverable_from_annotations(small_dataset):
    for split in small_dataset.values():
        for lab, motifs in zip(split.labels, split.motifs):
            assert label_from_motifs(motifs) == lab


def test_non_clean_samples_have_only_dominant_kind(small_dataset):
    cfg = SyntheticConfig()
    for split in small_dataset.values():
        for lab, motifs in zip(split.labels, split.motifs):
            if lab != MotifKind.CLEAN:
                assert len(motifs) >= 1
                assert {m.kind for m in motifs} == {MotifKind(lab)}
                ivs = sorted((m.start, m.end) for m in motifs)
                assert all(a[1] <= b[0] for a, b in zip(ivs, ivs[1:]))
                assert all(0 <= m.start < m.end <= cfg.T for m in motifs)


def test_split_seeds_disjoint(small_dataset):
    seeds = np.concatenate([s.seeds for s in small_dataset.values()])
    assert len(np.unique(seeds)) == len(seeds)


def test_dataset_bit_deterministic():
    cfg = SyntheticConfig(n_train=6, n_val=3, n_test=3, seed=9)
    a, b = generate_dataset(cfg), generate_dataset(cfg)
    for name in a:
        assert a[name].signals.tobytes() == b[name].signals.tobytes()
        assert a[name].motifs == b[name].motifs


def test_values_within_envelope(small_dataset):
    env = SyntheticConfig().envelope()
    for split in small_dataset.values():
        assert np.all(np.isfinite(split.signals))
        assert np.max(np.abs(split.signals)) <= env


def test_per_class_subset(small_dataset):
    sub = per_class_subset(small_dataset["train"], 30, seed=0)
    assert np.bincount(sub.labels).tolist() == [30, 30, 30]


@pytest.mark.parametrize("field,value", [("noise_std", -0.1), ("motif_length", (80, 40)), ("T", 0)])
def test_config_validation(field, value):
    with pytest.raises(ValueError, match=field):
        SyntheticConfig(**{field: value})


# --- frequency masking -------------------------------------------------------


def test_freq_mask_zero_band_round_trips():
    x = np.random.default_rng(0).standard_normal(1000)
    np.testing.assert_allclose(frequency_mask_augment(x, 0.0, 1), x, atol=1e-9)


@pytest.mark.parametrize("n", [999, 1000])
def test_freq_mask_full_band_leaves_mean(n):
    x = np.random.default_rng(1).standard_normal(n)
    np.testing.assert_allclose(frequency_mask_augment(x, 1.0, 1), np.full(n, x.mean()), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 2**31), st.integers(8, 300))
def test_freq_mask_energy_never_increases(frac, seed, n):
    x = np.random.default_rng(seed).standard_normal(n)
    y = frequency_mask_augment(x, frac, seed)
    assert y.shape == x.shape
    assert np.sum(y**2) <= np.sum(x**2) + 1e-9


def test_freq_mask_multichannel_shape():
    x = np.random.default_rng(2).standard_normal((64, 3))
    assert frequency_mask_augment(x, 0.3, 0).shape == (64, 3)
