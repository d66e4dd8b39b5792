"""Model bundles: a directory holding one checkpoint per outcome slot plus a
manifest (schema, orderings, standardization stats, schedule, seeds, kind).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autoreg import JointOutcomeModel, Standardization, TrainConfig
from .baselines import MarginalProductModel
from .checkpoint import load_checkpoint, save_checkpoint, schema_hash
from .conditioning import ConditionConfig
from .diffusion import DiffusionSchedule, ModelConfig
from .errors import DataError
from .schema import Ordering, OutcomeSchema

__all__ = ["save_bundle", "load_bundle"]

MANIFEST_NAME = "manifest.json"


def _model_cfg_dict(cfg: ModelConfig) -> dict:
    return {
        "emb_dim": cfg.emb_dim,
        "denoiser_hidden": list(cfg.denoiser_hidden),
        "cat_hidden": list(cfg.cat_hidden),
        "x_hidden": cfg.condition.x_hidden,
        "x_emb_dim": cfg.condition.x_emb_dim,
        "token_dim": cfg.condition.token_dim,
        "loss_weighting": cfg.loss_weighting,
    }


def _model_cfg_from_dict(payload: dict) -> ModelConfig:
    return ModelConfig(
        emb_dim=payload["emb_dim"],
        denoiser_hidden=tuple(payload["denoiser_hidden"]),
        cat_hidden=tuple(payload["cat_hidden"]),
        condition=ConditionConfig(
            x_hidden=payload["x_hidden"],
            x_emb_dim=payload["x_emb_dim"],
            token_dim=payload["token_dim"],
        ),
        loss_weighting=payload["loss_weighting"],
    )


def save_bundle(model, out_dir) -> None:
    """Write a JointOutcomeModel or MarginalProductModel to a directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(model, JointOutcomeModel):
        kind = "joint"
        orderings = [list(o.sigma) for o in model.orderings]
    elif isinstance(model, MarginalProductModel):
        kind = "marginal_product"
        orderings = []
    else:
        raise TypeError(f"cannot bundle {type(model).__name__}")
    manifest = {
        "kind": kind,
        "schema": model.schema.to_dict(),
        "schema_hash": schema_hash(model.schema),
        "covariate_dim": model.d_x,
        "orderings": orderings,
        "standardization": model.standardization.to_dict(),
        "schedule": model.schedule.to_dict(),
        "model_config": _model_cfg_dict(model.model_cfg),
        "train_config": {
            "epochs_per_stage": model.train_cfg.epochs_per_stage,
            "batch_size": model.train_cfg.batch_size,
            "learning_rate": model.train_cfg.learning_rate,
            "max_orderings": model.train_cfg.max_orderings,
            "seed": model.train_cfg.seed,
        },
        "trained": model.trained,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    for slot, slot_model in enumerate(model.models):
        save_checkpoint(
            out_dir / f"slot_{slot + 1}",
            slot_model.params,
            slot_model.hyperparameters(),
            model.schema,
        )


def load_bundle(bundle_dir):
    """Reconstruct the model saved by save_bundle."""
    bundle_dir = Path(bundle_dir)
    manifest_path = bundle_dir / MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read bundle manifest {manifest_path}: {exc}")
    schema = OutcomeSchema.from_dict(manifest["schema"])
    schedule = DiffusionSchedule(**manifest["schedule"])
    model_cfg = _model_cfg_from_dict(manifest["model_config"])
    train_cfg = TrainConfig(**manifest["train_config"])
    d_x = manifest["covariate_dim"]
    if manifest["kind"] == "joint":
        orderings = [Ordering(tuple(s)) for s in manifest["orderings"]]
        model = JointOutcomeModel(
            schema, d_x, orderings, schedule, model_cfg, train_cfg
        )
    elif manifest["kind"] == "marginal_product":
        model = MarginalProductModel(schema, d_x, schedule, model_cfg, train_cfg)
    else:
        raise DataError(f"unknown bundle kind {manifest['kind']!r}")
    model.standardization = Standardization.from_dict(manifest["standardization"])
    for slot, slot_model in enumerate(model.models):
        params, _ = load_checkpoint(bundle_dir / f"slot_{slot + 1}", schema)
        if params.vector.size != slot_model.params.vector.size:
            raise DataError(
                f"slot {slot + 1} checkpoint does not fit the configured model"
            )
        slot_model.params.vector[...] = params.vector
        slot_model.trained = manifest["trained"]
    return model
