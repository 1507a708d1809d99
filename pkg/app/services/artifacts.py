"""Run manifests (JSON) and result tables (CSV) written by the batch driver."""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pydantic
import scipy
from pydantic import BaseModel

from app.core.config import APP_VERSION

logger = logging.getLogger(__name__)


def versions() -> dict[str, str]:
    return {
        "app": APP_VERSION,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become None."""
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(value.real)), "im": to_jsonable(float(value.imag))}
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_manifest(
    out_dir: str | Path,
    command: str,
    config: BaseModel | dict,
    seed: int | None,
    results: Any,
    failures: Sequence[dict] = (),
) -> Path:
    """
    Write manifest.json with {command, config, seed, versions, results, failures}.

    Keys are sorted and no clock values are recorded, so identical runs
    produce identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    document = {
        "command": command,
        "config": to_jsonable(config),
        "seed": seed,
        "versions": versions(),
        "results": to_jsonable(results),
        "failures": to_jsonable(list(failures)),
    }
    path = out_dir / "manifest.json"
    path.write_text(
        json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n",
        encoding="utf-8",
    )
    logger.info(f"Wrote {path}")
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """UTF-8 CSV with dot decimals; floats use their shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {path}")
    return path
