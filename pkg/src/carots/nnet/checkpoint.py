"""JSON parameter checkpoints: name -> shape + row-major values.

Values are serialized through Python's shortest round-trip float repr, so a
save/load cycle reproduces every entry bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .tape import ParamSet

FORMAT = "carots-params-v1"


def save_params(path, pset: ParamSet, meta: dict | None = None,
                config_hash: str | None = None) -> None:
    tensors = {
        name: {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}
        for name, arr in pset.params.items()
    }
    doc = {
        "format": FORMAT,
        "config_hash": config_hash,
        "meta": meta or {},
        "tensors": tensors,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_params(path) -> tuple[ParamSet, dict, str | None]:
    """Returns (params, meta, config_hash)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON ({err})") from err
    if doc.get("format") != FORMAT:
        raise ConfigError(f"{path}: unknown checkpoint format {doc.get('format')!r}")
    pset = ParamSet()
    for name in sorted(doc["tensors"]):
        entry = doc["tensors"][name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        pset.add(name, arr)
    return pset, doc.get("meta", {}), doc.get("config_hash")
