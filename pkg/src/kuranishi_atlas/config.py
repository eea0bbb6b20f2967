import os
from fractions import Fraction
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, field_validator

load_dotenv()

KURANISHI_RESOLUTION = os.getenv("KURANISHI_RESOLUTION", "1/64")
MAP_TOLERANCE = float(os.getenv("MAP_TOLERANCE", 1e-9))
JACOBIAN_RTOL = float(os.getenv("JACOBIAN_RTOL", 1e-6))
DENOMINATOR_BOUND = int(os.getenv("DENOMINATOR_BOUND", 2**40))
ZERO_TOLERANCE = float(os.getenv("ZERO_TOLERANCE", 1e-10))
TRANSVERSALITY_RETRIES = int(os.getenv("TRANSVERSALITY_RETRIES", 32))
SEEDS = os.getenv("SEEDS", "0,1,2,3,4")
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "")
SERVICE_PORT = os.getenv("SERVICE_PORT", 8000)
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

CHECK_NAMES = ("maps", "index", "cocycle", "additivity", "tame")
DEFAULT_CHECKS = ("maps", "index", "cocycle")
LEVELS = ("weak", "standard", "strong")


def default_resolution() -> Fraction:
    return Fraction(KURANISHI_RESOLUTION)


def parse_seeds(text: str) -> List[int]:
    """
    Parse a seed list or count.

    Either a comma separated list ("0,1,2") or a single count ("5", meaning seeds 0..4).
    """
    text = str(text).strip()
    if not text:
        raise ValueError("empty seed list")
    if "," in text:
        return [int(part) for part in text.split(",") if part.strip()]
    return list(range(int(text)))


class RunConfig(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    resolution: Fraction
    map_tolerance: float = MAP_TOLERANCE
    zero_tolerance: float = ZERO_TOLERANCE
    seeds: List[int] = [0, 1, 2, 3, 4]
    out: str = OUTPUT_DIR
    verb: Optional[str] = None
    checks: List[str] = list(DEFAULT_CHECKS)
    level: str = "standard"
    independence: bool = False

    @field_validator("resolution", mode="before")
    @classmethod
    def parse_resolution(cls, value):
        resolution = Fraction(str(value)) if not isinstance(value, Fraction) else value
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        return resolution

    @field_validator("map_tolerance", "zero_tolerance")
    @classmethod
    def positive_tolerance(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerances must be positive")
        return value

    @field_validator("seeds")
    @classmethod
    def nonempty_seeds(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one seed is required")
        return value

    @field_validator("checks")
    @classmethod
    def known_checks(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in CHECK_NAMES]
        if unknown:
            raise ValueError(f"unknown checks: {', '.join(unknown)}")
        return value

    @field_validator("level")
    @classmethod
    def known_level(cls, value: str) -> str:
        if value not in LEVELS:
            raise ValueError(f"level must be one of {', '.join(LEVELS)}")
        return value

    @classmethod
    def from_env(cls, **overrides) -> "RunConfig":
        values = {"resolution": KURANISHI_RESOLUTION, "seeds": parse_seeds(SEEDS)}
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)
