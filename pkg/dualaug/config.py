"""
Configuration Management
========================

Validated experiment configuration loaded from JSON/YAML files with
environment variable overrides. Unknown keys are rejected.
"""

import os
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
import logging

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .behavior import HessianMode, HessianSettings
from .evalgen.synthetic import AnomalyKind
from .nncore import OptimizerKind
from .windows import ALL_ACTIONS, Action

logger = logging.getLogger(__name__)

ENV_PREFIX = "DUALAUG_"


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


class Variant(str, Enum):
    PLDA = "plda"
    PARAM_ONLY = "param_only"
    LOSS_ONLY = "loss_only"
    NO_EXPAND = "no_expand"
    NO_DELETE = "no_delete"
    CLUS = "clus"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class DataConfig(_Section):
    """Synthetic benchmark generation."""

    n_points: int = Field(3000, ge=64)
    n_features: int = Field(1, ge=1)
    frequencies: List[float] = Field(default_factory=lambda: [0.02, 0.05], min_length=1)
    amplitudes: List[float] = Field(default_factory=lambda: [1.0, 0.5], min_length=1)
    noise: float = Field(0.05, ge=0.0)
    n_anomalies: int = Field(12, ge=0)
    anomaly_length: Tuple[int, int] = (20, 60)
    anomaly_kinds: List[AnomalyKind] = Field(default_factory=lambda: list(AnomalyKind), min_length=1)
    n_hard: int = Field(6, ge=0)
    hard_length: Tuple[int, int] = (30, 60)
    jitter: float = Field(0.6, ge=0.0)
    contamination: float = Field(0.1, ge=0.0, le=0.5)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if len(self.frequencies) != len(self.amplitudes):
            raise ValueError("frequencies and amplitudes must have equal length")
        for name in ("anomaly_length", "hard_length"):
            low, high = getattr(self, name)
            if not 1 <= low <= high:
                raise ValueError(f"{name} must satisfy 1 <= min <= max, got {(low, high)}")
        if self.contamination > 0 and self.n_anomalies == 0:
            raise ValueError("contamination needs at least one anomaly segment to draw from")
        return self


class OptimizerConfig(_Section):
    kind: OptimizerKind = OptimizerKind.ADAM
    lr: float = Field(1e-3, gt=0.0)


class HessianConfig(_Section):
    mode: HessianMode = HessianMode.DIAGONAL
    damping: float = Field(1e-3, gt=0.0)
    max_iter: int = Field(200, ge=1)
    tol: float = Field(1e-10, gt=0.0)
    subsample: int = Field(512, ge=1)

    def build(self) -> HessianSettings:
        return HessianSettings(self.mode, self.damping, self.max_iter, self.tol, self.subsample)


class DetectorSettings(_Section):
    hidden_sizes: List[int] = Field(default_factory=lambda: [16])
    bottleneck: int = Field(8, ge=1)
    batch_size: int = Field(8, ge=1)


class AgentSettings(_Section):
    hidden_sizes: List[int] = Field(default_factory=lambda: [64, 64])
    minibatch: int = Field(64, ge=1)
    updates_per_iteration: int = Field(4, ge=0)
    double_dqn: bool = False
    state_with_rewards: bool = True
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)


class RunConfig(_Section):
    """Training and augmentation settings for one run."""

    w: int = Field(30, ge=3)
    e: int = Field(10, ge=0)
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    k: int = Field(1000, ge=1)
    gamma: float = Field(0.9, ge=0.0, le=1.0)
    p_explore: float = Field(0.2, ge=0.0, le=1.0)
    n_iters: Optional[int] = Field(None, ge=0)
    q: int = Field(10, ge=1)
    m: int = Field(2048, ge=1)
    warm_start_steps: int = Field(256, ge=0)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    hessian: HessianConfig = Field(default_factory=HessianConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    patience: int = Field(5, ge=1)
    max_epochs: int = Field(50, ge=1)
    validation_fraction: float = Field(0.2, ge=0.0, le=0.5)
    hs_quantile: float = Field(0.9, ge=0.0, le=1.0)
    reference_epochs: int = Field(5, ge=0)
    variant: Variant = Variant.PLDA
    checkpoints: bool = False
    detector: DetectorSettings = Field(default_factory=DetectorSettings)
    agent: AgentSettings = Field(default_factory=AgentSettings)

    @property
    def effective_alpha(self) -> float:
        if self.variant is Variant.PARAM_ONLY:
            return 0.0
        if self.variant is Variant.LOSS_ONLY:
            return 1.0
        return self.alpha

    @property
    def allowed_actions(self) -> Tuple[Action, ...]:
        if self.variant is Variant.NO_EXPAND:
            return (Action.PRESERVE, Action.DELETE)
        if self.variant is Variant.NO_DELETE:
            return (Action.EXPAND, Action.PRESERVE)
        return ALL_ACTIONS


class ExperimentConfig(_Section):
    """Main configuration object."""

    data: DataConfig = Field(default_factory=DataConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    # Performance
    num_threads: int = Field(1, ge=1)

    @classmethod
    def from_file(cls, file_path) -> 'ExperimentConfig':
        """
        Load configuration from JSON or YAML file.

        Args:
            file_path: Path to config file

        Returns:
            ExperimentConfig object
        """
        file_path = Path(file_path)

        if not file_path.exists():
            raise FileNotFoundError(f"Config file not found: {file_path}")

        try:
            if file_path.suffix == '.json':
                with open(file_path, 'r') as f:
                    data = json.load(f)
            elif file_path.suffix in ['.yaml', '.yml']:
                import yaml
                with open(file_path, 'r') as f:
                    data = yaml.safe_load(f)
            else:
                raise ConfigError(f"Unsupported config file format: {file_path.suffix}")
        except ConfigError:
            raise
        except Exception as e:
            raise ConfigError(f"Failed to parse config {file_path}: {e}") from e

        logger.debug(f"Loaded configuration from {file_path}")
        return cls.from_dict(data or {})

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """
        Create ExperimentConfig from dictionary.

        Raises:
            ConfigError: On unknown keys or out-of-range values
        """
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"invalid configuration: {problems}") from e

    @classmethod
    def from_env(cls, base: Optional['ExperimentConfig'] = None) -> 'ExperimentConfig':
        """
        Apply environment variable overrides.

        Environment variables are prefixed with DUALAUG_
        Example: DUALAUG_LOG_LEVEL=DEBUG

        Returns:
            ExperimentConfig object
        """
        data = (base or cls()).to_dict()
        data['log_level'] = os.getenv(f'{ENV_PREFIX}LOG_LEVEL', data['log_level'])
        data['log_file'] = os.getenv(f'{ENV_PREFIX}LOG_FILE', data['log_file'])
        threads = os.getenv(f'{ENV_PREFIX}NUM_THREADS')
        if threads is not None:
            try:
                data['num_threads'] = int(threads)
            except ValueError as e:
                raise ConfigError(f"{ENV_PREFIX}NUM_THREADS must be an integer, got {threads!r}") from e
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert ExperimentConfig to dictionary.

        Returns:
            Configuration dictionary
        """
        return self.model_dump(mode="json")

    def save(self, file_path):
        """
        Save configuration to file.

        Args:
            file_path: Path to save config
        """
        file_path = Path(file_path)
        data = self.to_dict()

        if file_path.suffix == '.json':
            with open(file_path, 'w') as f:
                json.dump(data, f, indent=2)
        elif file_path.suffix in ['.yaml', '.yml']:
            import yaml
            with open(file_path, 'w') as f:
                yaml.safe_dump(data, f, default_flow_style=False, sort_keys=True)
        else:
            raise ConfigError(f"Unsupported config file format: {file_path.suffix}")

        logger.info(f"Saved configuration to {file_path}")
