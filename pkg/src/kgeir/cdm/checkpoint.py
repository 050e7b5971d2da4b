"""Checkpoints: a directory holding ``manifest.json`` and one CSV per array."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from ..embeddings import RelationMatrices
from .base import CognitiveModel
from .irt import IrtModel, MirtModel
from .nacd import NacdModel

MODEL_KINDS = {"irt": IrtModel, "mirt": MirtModel, "nacd": NacdModel}


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_array(path: Path, arr: np.ndarray) -> None:
    flat = np.asarray(arr, dtype=np.float64).reshape(arr.shape[0] if arr.ndim else 1, -1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in flat:
            writer.writerow([repr(float(v)) for v in row])


def _read_array(path: Path, shape) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        values = [float(v) for row in csv.reader(fh) for v in row]
    return np.array(values, dtype=np.float64).reshape(shape)


def save_checkpoint(model: CognitiveModel, directory: str | Path, config: dict | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    config = dict(config or {})
    arrays = {f"param.{k}": v for k, v in model.params.items()}
    arrays.update({f"const.{k}": v for k, v in model.constants().items()})
    manifest = {
        "kind": model.kind,
        "seed": model.seed,
        "config": config,
        "config_hash": config_hash(config),
        "hyperparams": model.hyperparams(),
        "student_ids": list(model.student_ids),
        "exercise_ids": list(model.exercise_ids),
        "shapes": {k: list(np.shape(v)) for k, v in arrays.items()},
    }
    for name, arr in arrays.items():
        _write_array(out / f"{name}.csv", np.asarray(arr))
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def load_checkpoint(directory: str | Path) -> CognitiveModel:
    src = Path(directory)
    try:
        with open(src / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(f"no manifest.json in {src}") from None
    kind = manifest.get("kind")
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r} in checkpoint")
    arrays = {name: _read_array(src / f"{name}.csv", shape) for name, shape in manifest["shapes"].items()}
    params = {k[len("param."):]: v for k, v in arrays.items() if k.startswith("param.")}
    consts = {k[len("const."):]: v for k, v in arrays.items() if k.startswith("const.")}
    students, exercises, seed = manifest["student_ids"], manifest["exercise_ids"], manifest["seed"]
    if kind == "nacd":
        relations = RelationMatrices(consts["r_e"], consts["r_s"]) if "r_e" in consts else None
        return NacdModel(students, exercises, params, consts["q_weighted"], relations=relations, seed=seed, **manifest["hyperparams"])
    return MODEL_KINDS[kind](students, exercises, params, seed)
