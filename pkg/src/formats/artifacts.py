"""Temperature files, JSON reports, model checkpoints and run provenance."""

import hashlib
import json
import math
import struct
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.calibration.metrics import ReliabilityReport
from src.calibration.scaling import Temperature
from src.classifier.network import ModelConfig, ModelParams
from src.errors import ArtifactError, MissingArtifactError

CHECKPOINT_MAGIC = b"TCAL"
CHECKPOINT_VERSION = 1
FORMAT_VERSION = 1


def require(path: str | Path, command: str) -> Path:
    """Return `path` if it exists, else raise naming the command that produces it."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, command)
    return path


def _write_bytes(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_bytes(data)
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e
    return path


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError as e:
        raise ArtifactError(f"{path} not found") from e
    except OSError as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e


def write_json(payload: dict | BaseModel, path: str | Path) -> Path:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
    return _write_bytes(Path(path), text.encode("utf-8"))


def read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        return json.loads(_read_bytes(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArtifactError(f"{path}: invalid JSON ({e})") from e


# -- temperature -------------------------------------------------------------

def write_temperature(t: Temperature, path: str | Path) -> tuple[Path, Path]:
    """Write `T=<value>` and a sibling `<stem>.json` with fit diagnostics."""
    path = Path(path)
    text_path = _write_bytes(path, f"T={t.value!r}\n".encode("ascii"))
    json_path = write_json(
        {
            "format_version": FORMAT_VERSION,
            "value": t.value,
            "nll_at_fit": t.nll_at_fit if math.isfinite(t.nll_at_fit) else None,
            "iterations": t.iterations,
        },
        path.with_suffix(".json"),
    )
    return text_path, json_path


def read_temperature(path: str | Path) -> Temperature:
    path = Path(path)
    text = _read_bytes(path).decode("ascii", errors="replace").strip()
    if not text.startswith("T="):
        raise ArtifactError(f"{path}: expected 'T=<value>', got {text[:20]!r}")
    try:
        value = float(text[2:])
    except ValueError as e:
        raise ArtifactError(f"{path}: bad temperature value {text[2:]!r}") from e
    if not (math.isfinite(value) and value > 0):
        raise ArtifactError(f"{path}: temperature must be finite and > 0, got {value}")

    diagnostics = path.with_suffix(".json")
    nll_at_fit, iterations = float("nan"), 0
    if diagnostics.exists():
        info = read_json(diagnostics)
        if info.get("nll_at_fit") is not None:
            nll_at_fit = float(info["nll_at_fit"])
        iterations = int(info.get("iterations", 0))
    return Temperature(value=value, nll_at_fit=nll_at_fit, iterations=iterations)


# -- evaluation report -------------------------------------------------------

class EvaluationReport(BaseModel):
    """Persisted metrics of one report run."""
    format_version: int = FORMAT_VERSION
    variant: str
    calibrated: bool
    temperature: float
    bins: int
    metrics: dict
    nll: float
    groups: dict[str, dict] = Field(default_factory=dict)

    @classmethod
    def build(
        cls,
        variant: str,
        calibrated: bool,
        temperature: float,
        overall: ReliabilityReport,
        nll: float,
        groups: dict[str, ReliabilityReport],
    ) -> "EvaluationReport":
        return cls(
            variant=variant,
            calibrated=calibrated,
            temperature=temperature,
            bins=overall.m,
            metrics=overall.to_dict(),
            nll=nll,
            groups={g: r.to_dict() for g, r in groups.items()},
        )


def read_report(path: str | Path) -> EvaluationReport:
    try:
        return EvaluationReport.model_validate(read_json(path))
    except ValidationError as e:
        raise ArtifactError(f"{path}: malformed report ({e.error_count()} errors)") from e


# -- checkpoint --------------------------------------------------------------
#
# Layout: b"TCAL" | u16 version | u32 n | n bytes config JSON (utf-8)
#         | u64 count | count little-endian float64 parameters (layer order)

_HEAD = struct.Struct("<4sHI")
_COUNT = struct.Struct("<Q")


def save_checkpoint(params: ModelParams, path: str | Path) -> Path:
    config = json.dumps(params.config.to_dict(), sort_keys=True).encode("utf-8")
    payload = b"".join([
        _HEAD.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(config)),
        config,
        _COUNT.pack(params.count),
        params.flat.astype("<f8").tobytes(),
    ])
    return _write_bytes(Path(path), payload)


def load_checkpoint(path: str | Path) -> ModelParams:
    path = Path(path)
    data = _read_bytes(path)
    if len(data) < _HEAD.size:
        raise ArtifactError(f"{path}: truncated checkpoint header")
    magic, version, config_len = _HEAD.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise ArtifactError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise ArtifactError(f"{path}: unsupported checkpoint version {version}")

    offset = _HEAD.size
    try:
        raw = json.loads(data[offset:offset + config_len].decode("utf-8"))
        config = ModelConfig(
            input_size=raw["input_size"],
            channels=tuple(raw["channels"]),
            kernel_size=raw["kernel_size"],
            dilations=tuple(raw["dilations"]),
            num_classes=raw["num_classes"],
            in_channels=raw.get("in_channels", 1),
        )
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"{path}: bad checkpoint config ({e})") from e
    offset += config_len

    if len(data) < offset + _COUNT.size:
        raise ArtifactError(f"{path}: truncated checkpoint")
    (count,) = _COUNT.unpack_from(data, offset)
    offset += _COUNT.size
    if count != config.parameter_count or len(data) != offset + 8 * count:
        raise ArtifactError(
            f"{path}: expected {config.parameter_count} parameters, file holds "
            f"{(len(data) - offset) // 8}"
        )
    flat = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise ArtifactError(f"{path}: non-finite parameters")
    return ModelParams(config, flat)


# -- provenance --------------------------------------------------------------

def _package_version() -> str:
    try:
        return metadata.version("texcal")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_run_info(out_dir: str | Path, command: str, config_toml: str) -> Path:
    """The only artifact carrying a timestamp; data files never do."""
    return write_json(
        {
            "command": command,
            "config_sha256": hashlib.sha256(config_toml.encode("utf-8")).hexdigest(),
            "version": _package_version(),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        },
        Path(out_dir) / "run_info.json",
    )
