"""Run configuration: a flat typed key-value file with section headers.

Three sections drive the pipeline: [dgp] (which generator, sizes, seeds),
[model] (schedule, widths, training budget), [eval] (sampling and metric
caps). Every key has a default; unknown sections or keys are rejected with
the offending name.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .conditioning import ConditionConfig
from .diffusion import DiffusionSchedule, ModelConfig
from .autoreg import TrainConfig
from .errors import ConfigError

__all__ = ["DgpSection", "ModelSection", "EvalSection", "RunConfig"]


@dataclass
class DgpSection:
    kind: str = "bvn"  # "bvn" or "rho"
    d_x: int = 10
    rho: float = 0.5
    sigma_noise: float = 1.0
    coef_seed: int = 0
    n: int = 100000
    test_fraction: float = 0.2
    data_seed: int = 0

    def validate(self) -> None:
        if self.kind not in ("bvn", "rho"):
            raise ConfigError(f"dgp.kind must be 'bvn' or 'rho', got {self.kind!r}")
        if self.d_x < 1:
            raise ConfigError("dgp.d_x must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("dgp.rho must lie in [0, 1]")
        if self.sigma_noise <= 0.0:
            raise ConfigError("dgp.sigma_noise must be positive")
        if self.n < 2:
            raise ConfigError("dgp.n must be >= 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("dgp.test_fraction must lie in (0, 1)")


@dataclass
class ModelSection:
    beta_min: float = 0.1
    beta_max: float = 20.0
    time_horizon: float = 1.0
    num_steps: int = 200
    t_min: float = 1e-3
    emb_dim: int = 64
    denoiser_hidden: tuple[int, ...] = (128, 128, 128)
    cat_hidden: tuple[int, ...] = (128,)
    x_hidden: int = 64
    x_emb_dim: int = 32
    token_dim: int = 16
    loss_weighting: str = "sigma2"
    epochs_per_stage: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-3
    max_orderings: int = 8
    seed: int = 0

    def validate(self) -> None:
        try:
            self.schedule()
            self.model_config()
        except ValueError as exc:
            raise ConfigError(f"model section: {exc}") from exc
        if self.epochs_per_stage < 1:
            raise ConfigError("model.epochs_per_stage must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("model.batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ConfigError("model.learning_rate must be positive")
        if self.max_orderings < 1:
            raise ConfigError("model.max_orderings must be >= 1")

    def schedule(self) -> DiffusionSchedule:
        return DiffusionSchedule(
            beta_min=self.beta_min,
            beta_max=self.beta_max,
            time_horizon=self.time_horizon,
            num_steps=self.num_steps,
            t_min=self.t_min,
        )

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            emb_dim=self.emb_dim,
            denoiser_hidden=self.denoiser_hidden,
            cat_hidden=self.cat_hidden,
            condition=ConditionConfig(
                x_hidden=self.x_hidden,
                x_emb_dim=self.x_emb_dim,
                token_dim=self.token_dim,
            ),
            loss_weighting=self.loss_weighting,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs_per_stage=self.epochs_per_stage,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            max_orderings=self.max_orderings,
            seed=self.seed,
        )


@dataclass
class EvalSection:
    n_samples_per_unit: int = 1000
    n_eval_units: int = 20
    w1_max_pairs: int = 2000
    eval_seed: int = 0

    def validate(self) -> None:
        if self.n_samples_per_unit < 0:
            raise ConfigError("eval.n_samples_per_unit must be >= 0")
        if self.n_eval_units < 1:
            raise ConfigError("eval.n_eval_units must be >= 1")
        if self.w1_max_pairs < 1:
            raise ConfigError("eval.w1_max_pairs must be >= 1")


_SECTIONS = {"dgp": DgpSection, "model": ModelSection, "eval": EvalSection}


def _parse_value(section: str, key: str, raw: str, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw.strip()
        if kind == tuple[int, ...]:
            parts = [p for p in raw.replace(" ", "").split(",") if p]
            return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r}: {exc}") from exc
    raise ConfigError(f"{section}.{key}: unsupported type")


@dataclass
class RunConfig:
    dgp: DgpSection = field(default_factory=DgpSection)
    model: ModelSection = field(default_factory=ModelSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def validate(self) -> None:
        self.dgp.validate()
        self.model.validate()
        self.eval.validate()

    @classmethod
    def parse(cls, path) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        config = cls()
        for section_name in parser.sections():
            if section_name not in _SECTIONS:
                raise ConfigError(f"unknown config section [{section_name}]")
            target = getattr(config, section_name)
            known = {f.name: f.type for f in fields(target)}
            type_map = {
                "denoiser_hidden": tuple[int, ...],
                "cat_hidden": tuple[int, ...],
            }
            for key, raw in parser.items(section_name):
                if key not in known:
                    raise ConfigError(
                        f"unknown key {key!r} in section [{section_name}]"
                    )
                kind = type_map.get(key, type(getattr(target, key)))
                setattr(target, key, _parse_value(section_name, key, raw, kind))
        config.validate()
        return config

    @classmethod
    def default_text(cls) -> str:
        """Default config file content, with every key spelled out."""
        config = cls()
        lines = []
        for section_name in ("dgp", "model", "eval"):
            lines.append(f"[{section_name}]")
            target = getattr(config, section_name)
            for f in fields(target):
                value = getattr(target, f.name)
                if isinstance(value, tuple):
                    value = ",".join(str(v) for v in value)
                lines.append(f"{f.name} = {value}")
            lines.append("")
        return "\n".join(lines)

    def override_seed(self, seed: int) -> None:
        """Apply a global --seed override to every seed-valued key."""
        self.dgp.coef_seed = seed
        self.dgp.data_seed = seed
        self.model.seed = seed
        self.eval.eval_seed = seed
