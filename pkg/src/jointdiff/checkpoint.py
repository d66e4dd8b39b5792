"""Checkpoint files: JSON manifest plus raw little-endian float64 blob.

A checkpoint is a pair `<stem>.json` / `<stem>.bin`. The manifest lists every
named tensor (offset and shape), free-form hyperparameters, and a hash of the
outcome schema; round-trips are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .nn import ParamStore
from .schema import OutcomeSchema

__all__ = ["schema_hash", "save_checkpoint", "load_checkpoint"]


def schema_hash(schema: OutcomeSchema) -> str:
    canonical = json.dumps(schema.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def save_checkpoint(stem, params: ParamStore, hyperparameters: dict,
                    schema: OutcomeSchema) -> None:
    stem = Path(stem)
    layers = [
        {"name": name, "offset": off, "shape": list(shape)}
        for name, (off, shape) in sorted(
            params.manifest.items(), key=lambda item: item[1][0]
        )
    ]
    manifest = {
        "dtype": "float64-le",
        "num_values": int(params.vector.size),
        "layers": layers,
        "hyperparameters": hyperparameters,
        "schema_hash": schema_hash(schema),
    }
    stem.with_suffix(".json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    blob = np.ascontiguousarray(params.vector, dtype="<f8").tobytes()
    stem.with_suffix(".bin").write_bytes(blob)


def load_checkpoint(stem, schema: OutcomeSchema | None = None):
    """Return (ParamStore, hyperparameters). Verifies sizes and schema hash."""
    stem = Path(stem)
    try:
        manifest = json.loads(stem.with_suffix(".json").read_text())
        blob = stem.with_suffix(".bin").read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {stem}: {exc}") from exc
    if manifest.get("dtype") != "float64-le":
        raise DataError(f"{stem}: unsupported checkpoint dtype")
    vector = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    if vector.size != manifest["num_values"]:
        raise DataError(
            f"{stem}: blob holds {vector.size} values, manifest says "
            f"{manifest['num_values']}"
        )
    if schema is not None and manifest["schema_hash"] != schema_hash(schema):
        raise DataError(f"{stem}: checkpoint was built for a different schema")
    layout = {
        layer["name"]: (layer["offset"], tuple(layer["shape"]))
        for layer in manifest["layers"]
    }
    params = ParamStore(vector, layout)
    return params, manifest["hyperparameters"]
