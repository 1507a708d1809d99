"""Application configuration settings."""

import configparser
import os
from pathlib import Path

from pydantic import BaseModel, Field

from app.schemas.process import WeightFamily

APP_NAME = "Complex Time Wick Workbench"
APP_VERSION = "1.0.0"
API_V1_PREFIX = "/api/v1"

# Artifacts land here unless --out is given
DEFAULT_OUT_DIR = os.getenv("WORKBENCH_OUT_DIR", "runs")
LOG_LEVEL = os.getenv("WORKBENCH_LOG_LEVEL", "INFO")

# INI section merged under explicit CLI flags
CONFIG_SECTION = "workbench"

# Numerical defaults shared by the services
GAUSS_POINTS = 15
QUADRATURE_MAX_DEPTH = 40
MAGNITUDE_CAP = 1e300
P_MARGIN = 1.1
MAX_REFINEMENT_LEVEL = 20
BOUNDARY_SAMPLES = 1024


class WorkbenchSettings(BaseModel):
    """Run configuration shared by every CLI subcommand."""

    radius: float = Field(1.0, gt=0, le=8, description="Disk radius R")
    p: int | None = Field(None, ge=1, description="Graded norm order (planned when omitted)")
    nmax: int | None = Field(None, ge=1, description="Degree cap or series truncation; each command has its own default")
    tol: float = Field(1e-6, gt=0, description="Target tolerance")
    seed: int = Field(7, ge=0)
    out: str = DEFAULT_OUT_DIR
    eps: float = Field(0.3, ge=0, lt=1)
    T: float = Field(1.0, description="Real time t or imaginary height T")
    z: str = Field("0.5j", description="Complex evaluation point")
    contour: str = "segment:0,1"
    integrand: str = "brownian"
    family: WeightFamily = Field(WeightFamily.UNIT, description="Weight m of the process X_z")
    k: int = Field(1, ge=1, le=8, description="Exponent parameter of the weight family")
    samples: int = Field(10_000, ge=1)
    grid: str = "0.5,1.0"
    workers: int = Field(1, ge=1)


def load_settings(
    path: str | Path | None = None,
    overrides: dict | None = None,
) -> WorkbenchSettings:
    """
    Build settings from an INI file with explicit overrides on top.

    Args:
        path: Optional INI file with a [workbench] section
        overrides: Flag values; entries equal to None are skipped

    Returns:
        Validated settings

    Raises:
        FileNotFoundError: If path is given but cannot be read
    """
    values: dict = {}

    if path is not None:
        parser = configparser.ConfigParser()
        # Keys are case sensitive (T)
        parser.optionxform = str
        if not parser.read(path, encoding="utf-8"):
            raise FileNotFoundError(f"Config file not found: {path}")
        if parser.has_section(CONFIG_SECTION):
            values.update(dict(parser[CONFIG_SECTION]))

    # Flags win over the file
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    return WorkbenchSettings(**values)
