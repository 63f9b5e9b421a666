"""CSV artifacts: dataset manifest, logits, reliability bins and sweeps."""

from pathlib import Path

import numpy as np
import pandas as pd

from src.calibration.metrics import BinStats
from src.calibration.scaling import LogitMatrix
from src.errors import ArtifactError
from src.models.schemas import (
    DatasetManifest,
    PhantomSpec,
    SampleRecord,
    Split,
    TestGroup,
    TextureClass,
)

MANIFEST_COLUMNS = [
    "sample_id",
    "class",
    "geometry_variant",
    "material_level",
    "contact_angle",
    "split",
    "fold",
    "group",
    "blur_sigma",
    "noise_sigma",
    "path",
]
RELIABILITY_COLUMNS = ["bin_index", "lower", "upper", "count", "accuracy", "confidence"]
SWEEP_COLUMNS = ["perturbation", "sigma", "accuracy", "avg_confidence", "ece"]


def _write_frame(df: pd.DataFrame, path: str | Path, **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        df.to_csv(path, index=False, lineterminator="\n", **kwargs)
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e
    return path


def _read_strings(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[])
    except FileNotFoundError as e:
        raise ArtifactError(f"{path} not found") from e
    except pd.errors.ParserError as e:
        raise ArtifactError(f"{path}: ragged row ({e})") from e
    except (OSError, pd.errors.EmptyDataError) as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e


def _opt(value) -> object:
    return "" if value is None else value


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        return float("nan")


# -- manifest ----------------------------------------------------------------

def write_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    rows = []
    for s in sorted(manifest.samples, key=lambda r: r.sample_id):
        rows.append({
            "sample_id": s.sample_id,
            "class": s.spec.texture_class.value,
            "geometry_variant": s.spec.geometry_variant,
            "material_level": s.spec.material_level,
            "contact_angle": s.spec.contact_angle,
            "split": _opt(s.split.value if s.split else None),
            "fold": _opt(s.fold),
            "group": _opt(s.group.value if s.group else None),
            "blur_sigma": _opt(s.blur_sigma),
            "noise_sigma": _opt(s.noise_sigma),
            "path": s.path,
        })
    df = pd.DataFrame(rows, columns=MANIFEST_COLUMNS, dtype=object)
    return _write_frame(df, path)


def read_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest CSV. Phantom seeds are not stored and come back as 0."""
    df = _read_strings(path)
    if list(df.columns) != MANIFEST_COLUMNS:
        raise ArtifactError(f"{path}: unexpected manifest header {list(df.columns)}")
    samples = []
    for line, row in enumerate(df.itertuples(index=False), start=2):
        values = dict(zip(MANIFEST_COLUMNS, row))
        try:
            samples.append(SampleRecord(
                sample_id=values["sample_id"],
                spec=PhantomSpec(
                    texture_class=TextureClass(values["class"]),
                    geometry_variant=int(values["geometry_variant"]),
                    material_level=int(values["material_level"]),
                    contact_angle=int(values["contact_angle"]),
                ),
                path=values["path"],
                split=Split(values["split"]) if values["split"] else None,
                fold=int(values["fold"]) if values["fold"] else None,
                group=TestGroup(values["group"]) if values["group"] else None,
                blur_sigma=float(values["blur_sigma"]) if values["blur_sigma"] else None,
                noise_sigma=float(values["noise_sigma"]) if values["noise_sigma"] else None,
            ))
        except (ValueError, TypeError) as e:
            raise ArtifactError(f"{path}: bad manifest row at line {line}: {e}") from e
    return DatasetManifest(samples=samples)


# -- logits ------------------------------------------------------------------

def write_logits(m: LogitMatrix, path: str | Path) -> Path:
    columns = {"sample_id": m.sample_ids, "label": m.labels.astype(np.int64)}
    for j in range(m.k):
        columns[f"z{j}"] = m.logits[:, j]
    return _write_frame(pd.DataFrame(columns), path)


def read_logits(path: str | Path) -> LogitMatrix:
    """Read a logits CSV; the class count is the column count minus two."""
    df = _read_strings(path)
    header = list(df.columns)
    k = len(header) - 2
    if header[:2] != ["sample_id", "label"] or k < 2 or header[2:] != [f"z{j}" for j in range(k)]:
        raise ArtifactError(f"{path}: bad logits header {header}")

    cells = df[header[1:]]
    short = df.index[(cells.isna() | (cells == "")).any(axis=1)]
    if len(short):
        raise ArtifactError(f"{path}: ragged row at line {short[0] + 2}, expected {k} logits")

    logits = df[header[2:]].map(_parse_float).to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(logits).all(axis=1))
    if bad.size:
        raise ArtifactError(f"{path}: non-numeric logit at line {bad[0] + 2}")
    labels = df["label"].map(_parse_float).to_numpy(dtype=np.float64)
    out_of_range = np.flatnonzero(
        ~np.isfinite(labels) | (labels < 0) | (labels >= k) | (labels != np.floor(labels))
    )
    if out_of_range.size:
        raise ArtifactError(f"{path}: label out of range at line {out_of_range[0] + 2}")
    return LogitMatrix(
        logits=logits,
        labels=labels.astype(np.int64),
        sample_ids=df["sample_id"].tolist(),
    )


# -- reliability and sweeps --------------------------------------------------

def write_reliability(bins: list[BinStats], path: str | Path) -> Path:
    df = pd.DataFrame(
        [
            {
                "bin_index": b.bin_index,
                "lower": b.lower,
                "upper": b.upper,
                "count": b.count,
                "accuracy": b.accuracy,
                "confidence": b.confidence,
            }
            for b in bins
        ],
        columns=RELIABILITY_COLUMNS,
    )
    return _write_frame(df, path, float_format="%.6f")


def write_sweep(df: pd.DataFrame, path: str | Path) -> Path:
    if list(df.columns) != SWEEP_COLUMNS:
        raise ArtifactError(f"sweep table must have columns {SWEEP_COLUMNS}")
    return _write_frame(df, path)


def read_sweep(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as e:
        raise ArtifactError(f"{path} not found") from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e
    if list(df.columns) != SWEEP_COLUMNS:
        raise ArtifactError(f"{path}: bad sweep header {list(df.columns)}")
    return df
