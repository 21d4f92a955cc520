"""Configuration management for uvface."""

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator

from ..models.fitting import FitConfig
from ..models.losses import LossWeights

ENV_PREFIX = "UVFACE_"

# key=value names for every LossWeights field
WEIGHT_KEYS = {
    "LAMBDA_L": "lambda_L",
    "LAMBDA_REG": "lambda_reg",
    "LAMBDA_F": "lambda_f",
    "LAMBDA_T": "lambda_T",
    "LAMBDA_M": "lambda_m",
    "LAMBDA_L0": "lambda_L0",
    "LAMBDA_REG0": "lambda_reg0",
    "W_SYM": "w_sym",
    "W_CONST": "w_const",
    "W_SMOOTH": "w_smooth",
    "ALPHA": "alpha",
    "P": "p",
}

FIT_KEYS = {
    "STEP_SIZE": "step_size",
    "MAX_ITERATIONS": "max_iterations",
    "TOLERANCE": "tolerance",
    "RELATIVE_TOLERANCE": "relative_tolerance",
    "MAX_HALVINGS": "max_halvings",
    "STEP_GROWTH": "step_growth",
    "DIVERGENCE_PATIENCE": "divergence_patience",
    "STALL_PATIENCE": "stall_patience",
    "FIT_PROJECTION": "fit_projection",
    "FIT_LIGHTING": "fit_lighting",
    "FIT_SHAPE": "fit_shape",
    "FIT_ALBEDO": "fit_albedo",
    "STAGED": "staged",
    "AUTO_SCALE": "auto_scale",
    "NORMAL_WEIGHT": "normal_weight",
    "TEXTURE_SPACE": "texture_space",
}

RUN_KEYS = {
    "WIDTH": "width",
    "HEIGHT": "height",
    "BACKGROUND": "background",
    "METRIC": "metric",
    "MODEL_PATH": "model_path",
    "OUTPUT_DIR": "output_dir",
    "SEED": "seed",
}


class RunConfig(BaseModel):
    """Validated settings of one CLI run."""

    weights: LossWeights = Field(default_factory=LossWeights)
    fit: FitConfig = Field(default_factory=FitConfig)
    width: int = Field(64, gt=0, description="Rendered image width")
    height: int = Field(64, gt=0, description="Rendered image height")
    background: Tuple[float, float, float] = Field(
        (0.0, 0.0, 0.0), description="Colour of uncovered pixels"
    )
    metric: Literal["interocular", "bbox"] = Field(
        "interocular", description="NME normaliser"
    )
    model_path: Optional[str] = Field(None, description="Default model container")
    output_dir: str = Field(".", description="Default directory for synth output")
    seed: int = Field(0, ge=0, description="Seed for randomised initialisation")

    @field_validator("background", mode="before")
    @classmethod
    def _background(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(float(x) for x in value.replace(",", " ").split())
        return value

    @field_validator("background")
    @classmethod
    def _unit(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not 0.0 <= c <= 1.0 for c in value):
            raise ValueError("background colour must lie in [0, 1]")
        return value


class Config:
    """Configuration manager: a key=value file layered under UVFACE_* variables."""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize configuration.

        Args:
            config_file: Path to a key=value file, defaults to .env in the
                current directory and then ~/.uvface/.env
        """
        self.config_file = config_file or ".env"
        self._values: Dict[str, Optional[str]] = {}
        self._load_config()

    def _load_config(self) -> None:
        """Load values from the home file, then the selected file on top."""
        home_env = Path.home() / ".uvface" / ".env"
        if home_env.exists():
            self._values.update(dotenv_values(home_env))
        if Path(self.config_file).exists():
            self._values.update(dotenv_values(self.config_file))

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration value.

        Args:
            key: Key without the UVFACE_ prefix
            default: Default value if key not found

        Returns:
            Environment value, else file value, else default
        """
        env = os.getenv(ENV_PREFIX + key)
        if env is not None:
            return env
        for name in (key, ENV_PREFIX + key):
            value = self._values.get(name)
            if value is not None:
                return value
        return default

    def get_bool(self, key: str, default: bool = False) -> bool:
        value = str(self.get(key, str(default))).lower()
        return value in ("true", "1", "yes", "on", "enabled")

    def get_int(self, key: str, default: int = 0) -> int:
        try:
            return int(self.get(key, str(default)))
        except ValueError:
            return default

    def get_float(self, key: str, default: float = 0.0) -> float:
        try:
            return float(self.get(key, str(default)))
        except ValueError:
            return default

    def _section(self, keys: Dict[str, str]) -> Dict[str, Any]:
        raw = {field: self.get(key) for key, field in keys.items()}
        return {field: value for field, value in raw.items() if value is not None}

    def run_config(self) -> RunConfig:
        """
        Build the validated run configuration.

        Raises:
            pydantic.ValidationError: A value is malformed or out of range
        """
        weights = LossWeights(**self._section(WEIGHT_KEYS))
        fit = FitConfig(weights=weights, **self._section(FIT_KEYS))
        return RunConfig(weights=weights, fit=fit, **self._section(RUN_KEYS))

    @property
    def seed(self) -> int:
        return self.get_int("SEED", 0)

    @property
    def enable_colors(self) -> bool:
        return self.get_bool("ENABLE_COLORS", True)

    def to_dict(self) -> Dict[str, Any]:
        """Every recognised key with its effective raw value."""
        keys: List[str] = [*WEIGHT_KEYS, *FIT_KEYS, *RUN_KEYS, "ENABLE_COLORS"]
        return {key: self.get(key) for key in keys}

    def validate(self) -> Dict[str, str]:
        """
        Validate configuration.

        Returns:
            Dictionary of validation errors (empty if valid)
        """
        try:
            self.run_config()
        except ValidationError as exc:
            return {
                ".".join(str(part) for part in error["loc"]) or "config": error["msg"]
                for error in exc.errors()
            }
        return {}
