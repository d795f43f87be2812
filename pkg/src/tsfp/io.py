"""On-disk formats: dataset splits, model checkpoints, run manifests, CSV."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Motif, MotifKind, Split
from .losses import ObjectiveConfig
from .model import FingerprintModel, ModelConfig

DATA_MAGIC = "TSFP-DATA v1"
CKPT_NAME = "checkpoint.json"
BLOB_NAME = "params.bin"
MANIFEST_NAME = "manifest.json"
LE_F64 = np.dtype("<f8")


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def atomic_write(path: Path, payload: bytes) -> None:
    """Write via a temporary sibling and rename, so readers never see half a file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


# -- datasets -------------------------------------------------------------------------


def encode_split(split: Split, config: dict | None = None) -> bytes:
    n, T, C = split.signals.shape
    classes = len(MotifKind)
    header = f"{DATA_MAGIC}; T={T}; C={C}; n={n}; classes={classes}\n".encode("ascii")
    body = np.ascontiguousarray(split.signals, dtype=LE_F64).tobytes()
    footer = {
        "labels": [int(v) for v in split.labels],
        "motifs": [[[m.start, m.end, int(m.kind)] for m in ms] for ms in split.motifs],
        "seeds": [int(s) for s in split.seeds],
        "config": config or {},
    }
    return header + body + json.dumps(footer, sort_keys=True).encode("utf-8")


def decode_split(payload: bytes) -> tuple[Split, dict]:
    line, sep, rest = payload.partition(b"\n")
    if not sep:
        raise FormatError("missing header line")
    fields = [f.strip() for f in line.decode("ascii", errors="replace").split(";")]
    if fields[0] != DATA_MAGIC:
        raise FormatError(f"bad magic {fields[0]!r}")
    try:
        meta = {k: int(v) for k, v in (f.split("=") for f in fields[1:])}
        n, T, C = meta["n"], meta["T"], meta["C"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad header {line!r}") from exc
    size = n * T * C * LE_F64.itemsize
    if len(rest) < size:
        raise FormatError("truncated signal block")
    signals = np.frombuffer(rest[:size], dtype=LE_F64).astype(np.float64).reshape(n, T, C)
    try:
        footer = json.loads(rest[size:].decode("utf-8"))
    except ValueError as exc:
        raise FormatError("bad JSON footer") from exc
    motifs = footer.get("motifs")
    split = Split(
        signals=signals,
        labels=np.asarray(footer["labels"], dtype=np.int64),
        motifs=None if motifs is None else [[Motif(s, e, MotifKind(k)) for s, e, k in ms] for ms in motifs],
        seeds=np.asarray(footer.get("seeds", [0] * n), dtype=np.uint64),
    )
    return split, footer.get("config", {})


def split_path(data_dir: Path, name: str) -> Path:
    return Path(data_dir) / f"{name}.tsfp"


def write_split(path: Path, split: Split, config: dict | None = None) -> None:
    atomic_write(path, encode_split(split, config))


def read_split(path: Path) -> Split:
    return decode_split(Path(path).read_bytes())[0]


# -- checkpoints ----------------------------------------------------------------------------


def save_checkpoint(directory: Path, model: FingerprintModel, objective: ObjectiveConfig | None = None, extra: dict | None = None) -> None:
    """JSON manifest (configs + name/shape/offset registry) and one LE float64 blob."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    registry, chunks, offset = [], [], 0
    for name, p in model.named_parameters():
        raw = np.ascontiguousarray(p.data, dtype=LE_F64).tobytes()
        registry.append({"name": name, "shape": list(p.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    manifest = {
        "format": "tsfp-checkpoint v1",
        "model_config": model.config.to_dict(),
        "objective_config": asdict(objective) if objective is not None else None,
        "parameters": registry,
        "blob": BLOB_NAME,
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "extra": extra or {},
    }
    atomic_write(directory / BLOB_NAME, blob)
    atomic_write(directory / CKPT_NAME, dumps(manifest).encode("utf-8"))


def load_checkpoint(directory: Path) -> tuple[FingerprintModel, dict]:
    directory = Path(directory)
    path = directory / CKPT_NAME
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint in {directory}")
    manifest = json.loads(path.read_text())
    blob = (directory / manifest["blob"]).read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest["blob_sha256"]:
        raise FormatError("checkpoint blob does not match its manifest hash")
    model = FingerprintModel(ModelConfig(**manifest["model_config"]))
    state = {}
    for entry in manifest["parameters"]:
        count = int(np.prod(entry["shape"]))
        arr = np.frombuffer(blob, dtype=LE_F64, count=count, offset=entry["offset"])
        state[entry["name"]] = arr.astype(np.float64).reshape(entry["shape"])
    model.load_state_dict(state)
    return model, manifest


# -- manifests -------------------------------------------------------------------------------


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def input_hash(command: str, config: dict, inputs: list[Path]) -> str:
    """Content hash of everything that determines a command's outputs."""
    files = {}
    for path in inputs:
        path = Path(path)
        for f in sorted(path.rglob("*")) if path.is_dir() else [path]:
            if f.is_file() and f.name != MANIFEST_NAME:
                files[f.name if not path.is_dir() else str(f.relative_to(path))] = file_digest(f)
    doc = {"command": command, "config": config, "inputs": files}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    input_hash: str
    started: float = field(default_factory=time.time)
    finished: float | None = None
    artifacts: list[str] = field(default_factory=list)
    status: str = "running"

    def write(self, out_dir: Path) -> None:
        atomic_write(Path(out_dir) / MANIFEST_NAME, dumps(asdict(self)).encode("utf-8"))

    @classmethod
    def read(cls, out_dir: Path) -> "RunManifest | None":
        path = Path(out_dir) / MANIFEST_NAME
        if not path.exists():
            return None
        return cls(**json.loads(path.read_text()))


def up_to_date(out_dir: Path, digest: str) -> bool:
    prev = RunManifest.read(out_dir)
    return prev is not None and prev.status == "complete" and prev.input_hash == digest


# -- CSV -------------------------------------------------------------------------------------


def write_csv(path: Path, header: list[str], rows) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    os.replace(tmp, path)
