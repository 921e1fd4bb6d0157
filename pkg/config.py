from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from error_handler import ConfigError, UsageError

MAX_SEED = 2**64 - 1


def _check_seed(value: int) -> int:
    if not 0 <= value <= MAX_SEED:
        raise ValueError("must be an unsigned 64-bit integer")
    return value


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="CURVATURE_", env_file=".env", extra="ignore")

    # Logging Configuration
    log_level: str = "INFO"
    log_file: str = ""
    log_format: str = "json"  # json, text

    # Execution
    workers: int = 1

    # Estimation defaults
    default_delta: float = 0.001
    default_eta_mult: float = 3.0
    histogram_bins: int = 50

    # Figures
    svg_dpi: int = 100


settings = Settings()


class RunConfig(BaseModel):
    """Validated parameters of a single CLI command"""
    model_config = ConfigDict(extra="forbid")

    input: Optional[Path] = None
    format: Optional[str] = None
    eta: Optional[float] = None
    eta_mult: Optional[float] = None
    delta: float = 0.001
    t: float = 4.0
    d: float = 0.5
    d_prime: Optional[float] = None
    runs: int = 50
    sigma: float = 0.1
    seed: int = 0
    bins: int = 50
    workers: int = 1
    subsample: Optional[int] = None
    output: Optional[Path] = None

    @field_validator("delta", "t", "d", "sigma")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be > 0")
        return value

    @field_validator("eta", "eta_mult", "d_prime")
    @classmethod
    def _positive_optional(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("must be > 0")
        return value

    @field_validator("runs", "bins", "workers")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("subsample")
    @classmethod
    def _subsample_size(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 2:
            raise ValueError("must be >= 2")
        return value

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value: int) -> int:
        return _check_seed(value)

    @field_validator("format")
    @classmethod
    def _known_format(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in ("xyz", "csv", "ply-ascii"):
            raise ValueError("must be one of xyz, csv, ply-ascii")
        return value

    @model_validator(mode="after")
    def _eta_exclusive(self) -> "RunConfig":
        if self.eta is not None and self.eta_mult is not None:
            raise ValueError("--eta and --eta-mult are mutually exclusive")
        return self

    @property
    def resolved_d_prime(self) -> float:
        """Linkage threshold, t/2 unless given"""
        return self.d_prime if self.d_prime is not None else self.t / 2.0

    def resolve_eta(self, diameter: float) -> float:
        """Absolute eta, either given directly or as a multiple of the diameter"""
        if self.eta is not None:
            return self.eta
        mult = self.eta_mult if self.eta_mult is not None else settings.default_eta_mult
        return mult * diameter

    @classmethod
    def build(cls, **values: Any) -> "RunConfig":
        """Construct a config, turning validation failures into UsageError"""
        try:
            return cls(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            raise _usage_error(e)


class GeneratorConfig(BaseModel):
    """Validated parameters of the generate command"""
    n: int = 3000
    radius: float = 0.5
    n_side: int = 1500
    n_cap: int = 750
    cap_height: float = 0.9
    sigma: float = 0.1
    seed: int = 0

    @field_validator("n", "n_side", "n_cap")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("radius", "cap_height")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be > 0")
        return value

    @field_validator("sigma")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not value >= 0:
            raise ValueError("must be >= 0")
        return value

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value: int) -> int:
        return _check_seed(value)

    @classmethod
    def build(cls, **values: Any) -> "GeneratorConfig":
        """Construct a generator config, turning validation failures into UsageError"""
        try:
            return cls(**values)
        except ValidationError as e:
            raise _usage_error(e)


def _usage_error(e: ValidationError) -> UsageError:
    problems = "; ".join(
        f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
    )
    return UsageError(problems)


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a key=value configuration file

    Args:
        path: File with one key=value pair per line, '#' comments allowed

    Returns:
        Mapping of RunConfig field names to raw string values
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")

    raw = dotenv_values(path)
    known = set(RunConfig.model_fields)
    values: Dict[str, str] = {}
    for key, value in raw.items():
        name = key.strip().replace("-", "_").lower()
        if name not in known:
            raise ConfigError(f"unknown config key '{key}' in {path}")
        if value is None:
            raise ConfigError(f"config key '{key}' has no value in {path}")
        values[name] = value.strip()
    return values
