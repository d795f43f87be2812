"""Pre-training (masked reconstruction + coding rate) and fine-tuning loops."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import NonFiniteError, Tensor
from ..data import Split, frequency_mask_augment
from ..losses import ObjectiveConfig, reconstruction_loss, tcr_diversity_loss, total_loss
from ..model import FingerprintModel, patchify
from .masking import mask_batch
from .metrics import MetricsReport, compute_metrics
from .optim import Adam

log = logging.getLogger(__name__)

MODES = ("scratch", "rec", "rec_div")
_MODE_ALIASES = {"rec_only": "rec", "rec_plus_div": "rec_div"}


def normalize_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"mode: expected one of {MODES}, got {mode!r}")
    return mode


@dataclass
class TrainConfig:
    lr_pretrain: float = 1e-3
    lr_finetune: float = 1e-4
    max_epochs_pretrain: int = 100
    max_epochs_finetune: int = 100
    patience: int = 10
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 5.0
    freq_mask_fraction: float = 0.1  # 0 disables the augmentation
    finetune_lambda: float = 0.0
    freeze_encoder: bool = False
    mode: str = "rec_div"
    seed: int = 0

    def __post_init__(self):
        self.mode = normalize_mode(self.mode)
        for name in ("lr_pretrain", "lr_finetune"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name}: must be > 0")
        for name in ("max_epochs_pretrain", "max_epochs_finetune"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name}: must be >= 1")
        if self.patience < 1:
            raise ValueError("patience: must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        if not 0.0 <= self.freq_mask_fraction <= 1.0:
            raise ValueError("freq_mask_fraction: must be in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, detail: str = ""):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch} {detail}".strip())
        self.epoch = epoch
        self.batch = batch


@dataclass
class History:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_value: float | None = None


def _batches(n: int, size: int, rng: np.random.Generator | None):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for i in range(0, n, size):
        yield order[i:i + size]


def effective_lambda(objective: ObjectiveConfig, mode: str) -> float:
    return objective.lam if normalize_mode(mode) == "rec_div" else 0.0


def pretrain_losses(
    model: FingerprintModel,
    x: np.ndarray,
    masks,
    objective: ObjectiveConfig,
    lam: float,
    x_encoder: np.ndarray | None = None,
):
    """(L_total, L_rec, L_div) for one batch.

    ``x_encoder`` is the (optionally augmented) copy the encoder reads;
    targets always come from the clean ``x``.
    """
    seq = model.patch_embed(x if x_encoder is None else x_encoder)
    if model.config.encoder_input == "drop":
        tokens = model.encode(seq.embeddings, masks.visible)
    else:
        emb = model.placeholder_inputs(seq.embeddings, masks.masked)
        valid = np.broadcast_to(np.arange(seq.n_valid), (x.shape[0], seq.n_valid))
        tokens = model.encode(emb, valid)
    pred = model.decode(tokens, masks.masked)
    patches, _ = patchify(x, model.config.patch_size)
    target = patches[np.arange(x.shape[0])[:, None], masks.masked]
    rec = reconstruction_loss(pred, target)
    div = tcr_diversity_loss(tokens, objective.eps, objective.tcr_pooling)
    return total_loss(rec, div, lam), rec, div


def _augment(x: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    if fraction <= 0:
        return x
    return np.stack([frequency_mask_augment(s, fraction, rng) for s in x])


def _n_valid(model: FingerprintModel, T: int) -> int:
    return T // model.config.patch_size


def pretrain(
    model: FingerprintModel,
    train_signals: np.ndarray,
    val_signals: np.ndarray,
    objective: ObjectiveConfig,
    config: TrainConfig,
) -> History:
    """Self-supervised pre-training; takes signals only, never labels.

    Restores the best-validation parameters before returning.
    """
    mode = config.mode
    if mode == "scratch":
        raise ValueError("scratch mode has no pre-training stage")
    lam = effective_lambda(objective, mode)
    train_signals = np.asarray(train_signals, dtype=np.float64)
    val_signals = np.asarray(val_signals, dtype=np.float64)
    n_valid = _n_valid(model, train_signals.shape[1])
    params = model.encoder_parameters() + model.decoder_parameters()
    opt = Adam(params, config.lr_pretrain, (config.beta1, config.beta2), config.adam_eps, config.clip_norm)
    rng = np.random.default_rng([config.seed, 101])
    history = History()
    best_state = None
    stale = 0
    for epoch in range(config.max_epochs_pretrain):
        sums = np.zeros(3)
        count = 0
        for bi, idx in enumerate(_batches(len(train_signals), config.batch_size, rng)):
            x = train_signals[idx]
            masks = mask_batch(len(idx), n_valid, objective.mask_ratio, rng)
            x_enc = _augment(x, config.freq_mask_fraction, rng)
            try:
                loss, rec, div = pretrain_losses(model, x, masks, objective, lam, x_enc)
                opt.zero_grad()
                loss.backward()
                opt.step()
            except (NonFiniteError, FloatingPointError) as exc:
                raise TrainingDiverged(epoch, bi, str(exc)) from exc
            sums += len(idx) * np.array([loss.item(), rec.item(), div.item()])
            count += len(idx)
        train = sums / count
        val = evaluate_pretrain(model, val_signals, objective, lam, seed=config.seed)
        record = {
            "epoch": epoch,
            "train_total": train[0],
            "train_rec": train[1],
            "train_div": train[2],
            "val_total": val[0],
            "val_rec": val[1],
            "val_div": val[2],
        }
        history.epochs.append(record)
        log.info("pretrain epoch %d: train %.5f val %.5f", epoch, train[0], val[0])
        if history.best_value is None or val[0] < history.best_value:
            history.best_value, history.best_epoch = float(val[0]), epoch
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    return history


def evaluate_pretrain(model, signals, objective: ObjectiveConfig, lam: float, seed: int = 0) -> np.ndarray:
    """Mean (L_total, L_rec, L_div) under fixed masks and no augmentation."""
    signals = np.asarray(signals, dtype=np.float64)
    n_valid = _n_valid(model, signals.shape[1])
    rng = np.random.default_rng([seed, 202])
    sums = np.zeros(3)
    for idx in _batches(len(signals), 64, None):
        masks = mask_batch(len(idx), n_valid, objective.mask_ratio, rng)
        loss, rec, div = pretrain_losses(model, signals[idx], masks, objective, lam)
        sums += len(idx) * np.array([loss.item(), rec.item(), div.item()])
    return sums / len(signals)


# -- fine-tuning ---------------------------------------------------------------


def _check_classes(labels: np.ndarray, n_classes: int) -> None:
    present = set(np.unique(labels).tolist())
    missing = sorted(set(range(n_classes)) - present)
    if missing:
        raise ValueError(f"classes {missing} absent from the training split")


def predict(model: FingerprintModel, signals: np.ndarray, batch_size: int = 64):
    """Logits (N, n_classes) and pooling weights (N, k) for full series."""
    logits, alphas = [], []
    for idx in _batches(len(signals), batch_size, None):
        lg, alpha, _ = model.forward_classify(signals[idx])
        logits.append(lg.data)
        alphas.append(alpha.data)
    return np.concatenate(logits), np.concatenate(alphas)


def evaluate(model: FingerprintModel, split: Split) -> MetricsReport:
    logits, _ = predict(model, split.signals)
    z = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    return compute_metrics(split.labels, logits.argmax(axis=1), probs, model.config.n_classes)


def _encode_all(model: FingerprintModel, signals: np.ndarray, batch_size: int = 64) -> np.ndarray:
    out = [model.fingerprints(signals[idx]).data for idx in _batches(len(signals), batch_size, None)]
    return np.concatenate(out)


def finetune(
    model: FingerprintModel,
    train: Split,
    val: Split,
    config: TrainConfig,
    objective: ObjectiveConfig | None = None,
) -> History:
    """Supervised training of encoder + pooling + head with cross-entropy.

    The encoder sees every patch (no masking). With ``freeze_encoder`` only
    the task query and head are updated, from tokens computed once.
    Early stopping tracks validation macro-F1; the best parameters are
    restored before returning.
    """
    objective = objective or ObjectiveConfig()
    n_classes = model.config.n_classes
    _check_classes(train.labels, n_classes)
    signals = np.asarray(train.signals, dtype=np.float64)
    labels = np.asarray(train.labels, dtype=np.int64)
    frozen = config.freeze_encoder
    if frozen:
        for p in model.encoder_parameters():
            p.requires_grad = False
        params = model.head_parameters()
        cached = _encode_all(model, signals)
    else:
        params = model.encoder_parameters() + model.head_parameters()
    opt = Adam(params, config.lr_finetune, (config.beta1, config.beta2), config.adam_eps, config.clip_norm)
    rng = np.random.default_rng([config.seed, 303])
    lam = config.finetune_lambda
    history = History()
    best_state = None
    stale = 0
    try:
        for epoch in range(config.max_epochs_finetune):
            total, count = 0.0, 0
            for bi, idx in enumerate(_batches(len(signals), config.batch_size, rng)):
                try:
                    if frozen:
                        tokens = Tensor(cached[idx])
                    else:
                        tokens = model.fingerprints(signals[idx])
                    z, _ = model.attention_pool(tokens)
                    loss = ad.cross_entropy(model.classify(z), labels[idx])
                    if lam > 0 and not frozen:
                        loss = total_loss(loss, tcr_diversity_loss(tokens, objective.eps, objective.tcr_pooling), lam)
                    opt.zero_grad()
                    loss.backward()
                    opt.step()
                except (NonFiniteError, FloatingPointError) as exc:
                    raise TrainingDiverged(epoch, bi, str(exc)) from exc
                total += len(idx) * loss.item()
                count += len(idx)
            report = evaluate(model, val)
            history.epochs.append({"epoch": epoch, "train_loss": total / count, "val_f1": report.f1, "val_accuracy": report.accuracy})
            log.info("finetune epoch %d: loss %.5f val f1 %.4f", epoch, total / count, report.f1)
            if history.best_value is None or report.f1 > history.best_value:
                history.best_value, history.best_epoch = report.f1, epoch
                best_state = model.state_dict()
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    finally:
        if frozen:
            for p in model.encoder_parameters():
                p.requires_grad = True
    if best_state is not None:
        model.load_state_dict(best_state)
    return history
