"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
3 a theory oracle failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import tempfile
import time
from pathlib import Path

from . import io
from .config import ConfigError, RunConfig, load_config
from .data import SPLITS, Split, generate_dataset, per_class_subset
from .model import FingerprintModel
from .training import disentanglement_probe, evaluate, finetune, predict, pretrain

log = logging.getLogger("tsfp")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_ORACLE = 0, 1, 2, 3


class UsageError(Exception):
    """Bad arguments or missing inputs (exit code 1)."""


# -- helpers --------------------------------------------------------------------------------


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace("data", seed=args.seed).replace("train", seed=args.seed)
    if getattr(args, "mode", None):
        cfg = cfg.replace("train", mode=args.mode)
    if getattr(args, "freeze_encoder", False):
        cfg = cfg.replace("train", freeze_encoder=True)
    return cfg


def _load_data(data_dir: Path, names=SPLITS) -> dict[str, Split]:
    out = {}
    for name in names:
        path = io.split_path(data_dir, name)
        if not path.exists():
            raise UsageError(f"missing dataset file {path}")
        out[name] = io.read_split(path)
    return out


def _begin(command: str, out: Path, config: dict, seed, inputs: list[Path], force: bool):
    """Return a manifest to fill in, or None when the run is already up to date."""
    digest = io.input_hash(command, config, inputs)
    if not force and io.up_to_date(out, digest):
        log.info("%s: %s is up to date (use --force to rerun)", command, out)
        return None
    return io.RunManifest(command=command, config=config, seed=seed, input_hash=digest)


def _finish(manifest: io.RunManifest, out: Path, artifacts: list[str]) -> None:
    manifest.artifacts = sorted(artifacts)
    manifest.finished = time.time()
    manifest.status = "complete"
    manifest.write(out)


def _stage(out: Path):
    """Temporary directory next to ``out``; its contents are moved in on success."""
    out.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))


def _commit(stage: Path, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for item in sorted(stage.iterdir()):
        target = out / item.name
        if target.exists():
            shutil.rmtree(target) if target.is_dir() else target.unlink()
        shutil.move(str(item), target)
        names.append(item.name)
    stage.rmdir()
    return names


def _write_json(path: Path, obj) -> None:
    io.atomic_write(path, io.dumps(obj).encode("utf-8"))


def _history_rows(epochs: list[dict]):
    keys = list(epochs[0]) if epochs else ["epoch"]
    return keys, [[e[k] for k in keys] for e in epochs]


# -- commands ---------------------------------------------------------------------------------


def cmd_generate_data(args) -> int:
    cfg = _resolve(args)
    out = Path(args.out)
    manifest = _begin("generate-data", out, {"data": cfg.to_dict()["data"]}, cfg.data.seed, [], args.force)
    if manifest is None:
        return EXIT_OK
    splits = generate_dataset(cfg.data)
    stage = _stage(out)
    try:
        for name, split in splits.items():
            io.write_split(io.split_path(stage, name), split, cfg.to_dict()["data"])
        names = _commit(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    _finish(manifest, out, names)
    log.info("wrote %s", ", ".join(f"{k}={len(v)}" for k, v in splits.items()))
    return EXIT_OK


def cmd_pretrain(args) -> int:
    cfg = _resolve(args)
    if cfg.train.mode == "scratch":
        raise UsageError("scratch mode skips pre-training; run finetune --mode scratch instead")
    out, data_dir = Path(args.out), Path(args.data)
    config = cfg.to_dict()
    config.pop("data")
    manifest = _begin("pretrain", out, config, cfg.train.seed, [data_dir], args.force)
    if manifest is None:
        return EXIT_OK
    data = _load_data(data_dir, ("train", "val"))
    model = FingerprintModel(cfg.model, seed=cfg.train.seed)
    # only the signal arrays reach the pre-training loop
    hist = pretrain(model, data["train"].signals, data["val"].signals, cfg.objective, cfg.train)
    stage = _stage(out)
    try:
        io.save_checkpoint(stage / "checkpoint", model, cfg.objective, {"stage": "pretrain", "mode": cfg.train.mode, "best_epoch": hist.best_epoch})
        keys, rows = _history_rows(hist.epochs)
        io.write_csv(stage / "loss_curve.csv", keys, rows)
        names = _commit(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    _finish(manifest, out, names)
    return EXIT_OK


def cmd_finetune(args) -> int:
    cfg = _resolve(args)
    out, data_dir = Path(args.out), Path(args.data)
    mode = cfg.train.mode
    inputs = [data_dir]
    if mode != "scratch":
        if not args.checkpoint:
            raise UsageError(f"--mode {mode} needs --checkpoint from a pretrain run")
        ckpt = _model_dir(args.checkpoint)
        inputs.append(ckpt)
    config = cfg.to_dict()
    config.pop("data")
    config["labels_per_class"] = args.labels_per_class
    manifest = _begin("finetune", out, config, cfg.train.seed, inputs, args.force)
    if manifest is None:
        return EXIT_OK
    data = _load_data(data_dir)
    if mode == "scratch":
        model = FingerprintModel(cfg.model, seed=cfg.train.seed)
    else:
        model, meta = io.load_checkpoint(ckpt)
        if meta["model_config"] != cfg.model.to_dict():
            log.warning("model section of the config differs from the checkpoint; using the checkpoint's")
    train = data["train"]
    if args.labels_per_class:
        train = per_class_subset(train, args.labels_per_class, cfg.train.seed)
    hist = finetune(model, train, data["val"], cfg.train, cfg.objective)
    report = evaluate(model, data["test"])
    stage = _stage(out)
    try:
        io.save_checkpoint(stage / "checkpoint", model, cfg.objective, {"stage": "finetune", "mode": mode, "best_epoch": hist.best_epoch})
        keys, rows = _history_rows(hist.epochs)
        io.write_csv(stage / "finetune_curve.csv", keys, rows)
        _write_json(stage / "metrics.json", {"split": "test", **report.to_dict()})
        names = _commit(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    _finish(manifest, out, names)
    log.info("test accuracy %.4f macro-F1 %.4f", report.accuracy, report.f1)
    return EXIT_OK


def _model_dir(path: str) -> Path:
    p = Path(path)
    p = p / "checkpoint" if (p / "checkpoint").is_dir() else p
    if not (p / io.CKPT_NAME).exists():
        raise UsageError(f"no checkpoint found at {path}")
    return p


def cmd_evaluate(args) -> int:
    out, data_dir = Path(args.out), Path(args.data)
    ckpt = _model_dir(args.checkpoint)
    manifest = _begin("evaluate", out, {"split": args.split}, None, [data_dir / f"{args.split}.tsfp", ckpt], args.force)
    if manifest is None:
        return EXIT_OK
    split = _load_data(data_dir, (args.split,))[args.split]
    model, _ = io.load_checkpoint(ckpt)
    report = evaluate(model, split)
    logits, _ = predict(model, split.signals)
    stage = _stage(out)
    try:
        _write_json(stage / "metrics.json", {"split": args.split, **report.to_dict()})
        header = ["sample", "label", "predicted"] + [f"logit_{c}" for c in range(logits.shape[1])]
        rows = ([i, int(split.labels[i]), int(logits[i].argmax()), *logits[i].tolist()] for i in range(len(split)))
        io.write_csv(stage / "predictions.csv", header, rows)
        names = _commit(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    _finish(manifest, out, names)
    print(json.dumps({"accuracy": report.accuracy, "f1": report.f1, "auroc": report.auroc}))
    return EXIT_OK


def cmd_verify_theory(args) -> int:
    from .theory import run_all

    out = Path(args.out)
    config = {"seed": args.seed, "canary": args.canary}
    manifest = _begin("verify-theory", out, config, args.seed, [], args.force)
    if manifest is None:
        prev = json.loads((out / "verdicts.json").read_text())
        return EXIT_OK if prev["all_pass"] else EXIT_ORACLE
    verdicts = run_all(seed=args.seed, canary=args.canary)
    bundle = {"seed": args.seed, "canary": args.canary, "all_pass": all(v["passes"] for v in verdicts), "verdicts": verdicts}
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "verdicts.json", bundle)
    _finish(manifest, out, ["verdicts.json"])
    for v in verdicts:
        print(f"{v['oracle']:<24} {'PASS' if v['passes'] else 'FAIL'}")
    return EXIT_OK if bundle["all_pass"] else EXIT_ORACLE


def cmd_probe(args) -> int:
    out, data_dir = Path(args.out), Path(args.data)
    ckpt = _model_dir(args.model)
    manifest = _begin("probe", out, {"split": args.split}, None, [data_dir / f"{args.split}.tsfp", ckpt], args.force)
    if manifest is None:
        return EXIT_OK
    split = _load_data(data_dir, (args.split,))[args.split]
    if split.motifs is None:
        raise UsageError("probe needs motif annotations in the dataset footer")
    model, _ = io.load_checkpoint(ckpt)
    rep = disentanglement_probe(model, split)
    k = model.config.k
    stage = _stage(out)
    try:
        io.write_csv(
            stage / "alpha.csv",
            ["sample", "label"] + [f"alpha_{t}" for t in range(k)],
            ([i, int(split.labels[i]), *rep.alpha[i].tolist()] for i in range(len(split))),
        )
        io.write_csv(
            stage / "class_alpha.csv",
            ["label", "argmax_token"] + [f"alpha_{t}" for t in range(k)],
            ([c, rep.argmax_token[c], *a.tolist()] for c, a in sorted(rep.class_alpha.items())),
        )
        n = rep.attention.shape[-1]
        for t in range(k):
            io.write_csv(
                stage / f"attention_token{t}.csv",
                ["sample", "label"] + [f"patch_{j}" for j in range(n)],
                ([i, int(split.labels[i]), *rep.attention[i, t].tolist()] for i in range(len(split))),
            )
        _write_json(stage / "summary.json", rep.summary())
        names = _commit(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    _finish(manifest, out, names)
    print(json.dumps(rep.summary()["argmax_token"]))
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsfp", description="Fingerprint-token time-series models.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, seed=True):
        if config:
            sp.add_argument("--config", help="YAML run configuration (defaults when omitted)")
        if seed:
            sp.add_argument("--seed", type=int, help="overrides data.seed and train.seed")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--force", action="store_true", help="rerun even if the manifest hash matches")

    sp = sub.add_parser("generate-data", help="write train/val/test synthetic splits")
    common(sp)
    sp.set_defaults(func=cmd_generate_data)

    sp = sub.add_parser("pretrain", help="masked-reconstruction pre-training")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--mode", choices=["rec", "rec_div"], default=None)
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("finetune", help="supervised fine-tuning and test evaluation")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--mode", choices=["scratch", "rec", "rec_div"], default=None)
    sp.add_argument("--checkpoint", help="pretrain output directory (rec and rec_div modes)")
    sp.add_argument("--labels-per-class", type=int, default=None, help="label-scarce training subset")
    sp.add_argument("--freeze-encoder", action="store_true")
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("evaluate", help="metrics of a checkpoint on one split")
    common(sp, config=False, seed=False)
    sp.add_argument("--data", required=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", choices=SPLITS, default="test")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("verify-theory", help="run every theory oracle")
    common(sp, config=False, seed=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--canary", action="store_true", help="inject a sign bug that must make the suite fail")
    sp.set_defaults(func=cmd_verify_theory)

    sp = sub.add_parser("probe", help="token allocation and attention maps as CSV")
    common(sp, config=False, seed=False)
    sp.add_argument("--model", required=True, help="finetune output directory")
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", choices=SPLITS, default="test")
    sp.set_defaults(func=cmd_probe)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
