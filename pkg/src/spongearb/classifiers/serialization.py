"""Lossless JSON encoding of fitted estimators.

Floats go through ``repr`` (Python's shortest round-trip form), so a saved
model reloads bit-for-bit. Only classes in ``_REGISTERED`` are revived.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .histgb import FeatureBinner
from .registry import FAMILIES, TrainedModel
from .scaling import MinMaxScaler

FORMAT = "spongearb-model"
VERSION = 1

_REGISTERED = {cls.__name__: cls for cls in (*FAMILIES.values(), MinMaxScaler, FeatureBinner)}


def encode(obj):
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, float)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.ravel().tolist(), "dtype": obj.dtype.str,
                "shape": list(obj.shape)}
    if isinstance(obj, list):
        return [encode(v) for v in obj]
    if isinstance(obj, tuple):
        return {"__tuple__": [encode(v) for v in obj]}
    if isinstance(obj, dict):
        return {"__dict__": [[encode(k), encode(v)] for k, v in obj.items()]}
    name = type(obj).__name__
    if _REGISTERED.get(name) is type(obj):
        return {"__object__": name, "state": encode(vars(obj))}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def decode(obj):
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    if not isinstance(obj, dict):
        return obj
    if "__ndarray__" in obj:
        return np.array(obj["__ndarray__"], dtype=np.dtype(obj["dtype"])).reshape(obj["shape"])
    if "__tuple__" in obj:
        return tuple(decode(v) for v in obj["__tuple__"])
    if "__dict__" in obj:
        return {_hashable(decode(k)): decode(v) for k, v in obj["__dict__"]}
    if "__object__" in obj:
        cls = _REGISTERED.get(obj["__object__"])
        if cls is None:
            raise ValueError(f"refusing to revive unregistered class {obj['__object__']!r}")
        inst = cls.__new__(cls)
        inst.__dict__.update(decode(obj["state"]))
        return inst
    raise ValueError(f"unrecognised encoded value with keys {sorted(obj)}")


def _hashable(k):
    return tuple(k) if isinstance(k, list) else k


def dumps_model(model: TrainedModel) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "family": model.family,
        "seed": model.seed,
        "grid": encode(model.grid),
        "params": encode(model.estimator.get_params()),
        "scaler": encode(model.scaler),
        "estimator": encode(model.estimator),
    }
    return json.dumps(doc)


def loads_model(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValueError("not a serialised model")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    if doc["family"] not in FAMILIES:
        raise ValueError(f"unknown family {doc['family']!r}")
    est = decode(doc["estimator"])
    if not isinstance(est, FAMILIES[doc["family"]]):
        raise ValueError("family tag does not match the stored estimator")
    return TrainedModel(doc["family"], est, doc["seed"], decode(doc["scaler"]), decode(doc["grid"]))


def save_model(path, model: TrainedModel) -> None:
    Path(path).write_text(dumps_model(model))


def load_model(path) -> TrainedModel:
    return loads_model(Path(path).read_text())
