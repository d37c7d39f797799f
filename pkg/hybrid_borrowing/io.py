"""
Loading configs and datasets, writing results and run manifests.
"""
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

import hybrid_borrowing
from hybrid_borrowing.beta_mixture import HistoricalPool, HistoricalTrial
from hybrid_borrowing.exceptions import ConfigError, DomainError

logger = logging.getLogger(__name__)

HISTORICAL_COLUMNS = ("study", "responders", "size")


def load_config(path, model):
    """
    Parse a JSON config file and validate it against a pydantic model.

    Raises:
        ConfigError: naming the line of a JSON syntax error or the field path
            of every validation error.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigError(f"{path}: {problems}") from exc


def load_historical_csv(path):
    """Historical control arms from a CSV with columns study, responders, size."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Historical dataset not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse CSV: {exc}") from exc
    missing = [column for column in HISTORICAL_COLUMNS if column not in frame.columns]
    if missing:
        raise ConfigError(f"{path}: missing columns {', '.join(missing)}")
    frame = frame.sort_values("study", kind="stable")
    try:
        trials = tuple(
            HistoricalTrial(int(row.study), int(row.responders), int(row.size))
            for row in frame.itertuples(index=False)
        )
        pool = HistoricalPool(trials)
    except (DomainError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if pool.k == 0:
        logger.warning(f"{path} holds no historical trials")
    return pool


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _clean(value):
    # NaN is not valid JSON
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {key: _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(item) for item in value]
    return value


def dumps_json(payload):
    return json.dumps(_clean(payload), sort_keys=True, indent=2, default=_json_default) + "\n"


def write_json(payload, path):
    path = Path(path)
    path.write_text(dumps_json(payload), encoding="utf-8", newline="\n")
    return path


def write_csv(frame, path):
    path = Path(path)
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return path


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = hybrid_borrowing.__version__
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    runtimes: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def record_input(self, name, path):
        self.inputs[name] = {"path": str(path), "sha256": file_sha256(path)}

    def record_output(self, path):
        self.outputs[Path(path).name] = file_sha256(path)

    def write(self, path):
        return write_json(asdict(self), path)
