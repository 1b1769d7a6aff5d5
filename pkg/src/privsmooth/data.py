"""Insurance-style records: synthetic generation, CSV ingestion, one-hot
plus z-score featurization, and percentile threshold labeling.

The charges column is carried for schema fidelity but never used as a
model feature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream

CATEGORIES = {
    "sex": ("female", "male"),
    "smoker": ("no", "yes"),
    "region": ("northeast", "northwest", "southeast", "southwest"),
}

_CSV_COLUMNS = ("age", "sex", "bmi", "children", "smoker", "region", "charges")

_GEN_STREAM = 201

# featurized column layout: numerics first, then one-hot blocks
NUMERIC_FIELDS = ("age", "bmi", "children")
BMI_COLUMN = 1


@dataclass(frozen=True)
class InsuranceRecord:
    age: float
    sex: str
    bmi: float
    children: int
    smoker: str
    region: str
    charges: float

    def __post_init__(self):
        if self.bmi <= 0:
            raise ValueError(f"bmi must be > 0, got {self.bmi}")
        for fieldname in ("sex", "smoker", "region"):
            value = getattr(self, fieldname)
            if value not in CATEGORIES[fieldname]:
                raise ValueError(f"unknown {fieldname} category {value!r}")


class IngestError(ValueError):
    """CSV rows or columns that failed validation, with row numbers."""


def generate_synthetic_insurance(n: int, seed: int) -> list[InsuranceRecord]:
    """Seeded records: bmi ~ Normal(27, 5) clipped at 14, ages uniform on
    18..65, categories uniform; charges follow a rough cost model."""
    if n < 1:
        raise ValueError(f"record count must be >= 1, got {n}")
    stream = RngStream(seed, _GEN_STREAM)
    ages = stream.integers(18, 66, n).astype(float)
    bmis = np.maximum(14.0, 27.0 + 5.0 * stream.standard_normal(n))
    children = stream.integers(0, 6, n)
    sex_idx = stream.integers(0, 2, n)
    smoker_idx = stream.integers(0, 2, n)
    region_idx = stream.integers(0, 4, n)
    noise = stream.standard_normal(n)
    charges = np.maximum(
        1000.0,
        2500.0 + 240.0 * ages + 320.0 * (bmis - 25.0)
        + 21000.0 * smoker_idx + 3000.0 * noise,
    )
    return [
        InsuranceRecord(
            age=float(ages[i]),
            sex=CATEGORIES["sex"][sex_idx[i]],
            bmi=float(bmis[i]),
            children=int(children[i]),
            smoker=CATEGORIES["smoker"][smoker_idx[i]],
            region=CATEGORIES["region"][region_idx[i]],
            charges=float(round(charges[i], 2)),
        )
        for i in range(n)
    ]


def export_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for r in records:
            writer.writerow([repr(r.age), r.sex, repr(r.bmi), r.children,
                             r.smoker, r.region, repr(r.charges)])


def ingest_csv(path) -> list[InsuranceRecord]:
    """Parse a header-driven delimited file; bad rows are reported by number."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file, expected a header row")
        missing = [c for c in _CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}")
        records = []
        errors = []
        for rownum, row in enumerate(reader, start=2):  # 1-based incl. header
            try:
                records.append(
                    InsuranceRecord(
                        age=float(row["age"]),
                        sex=row["sex"],
                        bmi=float(row["bmi"]),
                        children=int(row["children"]),
                        smoker=row["smoker"],
                        region=row["region"],
                        charges=float(row["charges"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                errors.append(f"row {rownum}: {exc}")
    if errors:
        raise IngestError(f"{path}: {len(errors)} bad rows: " + "; ".join(errors[:10]))
    return records


@dataclass(frozen=True)
class FeatureStats:
    """Training-split means and stds of the numeric columns."""

    means: tuple
    stds: tuple

    @property
    def feature_names(self) -> tuple:
        names = list(NUMERIC_FIELDS)
        for fieldname, values in CATEGORIES.items():
            names.extend(f"{fieldname}={v}" for v in values)
        return tuple(names)


def featurize(records, stats: FeatureStats | None = None):
    """One-hot categories, z-score numerics.

    With stats=None the standardization statistics are computed from the
    given records (training call); otherwise the provided training stats
    are reused, so evaluation rows never see their own statistics.
    Returns (matrix, bmi_column_index, stats).
    """
    records = list(records)
    if not records:
        raise ValueError("featurize requires at least one record")
    numerics = np.array(
        [[getattr(r, f) for f in NUMERIC_FIELDS] for r in records], dtype=float
    )
    if stats is None:
        means = numerics.mean(axis=0)
        stds = numerics.std(axis=0)
        zero = [NUMERIC_FIELDS[i] for i in range(len(stds)) if stds[i] == 0.0]
        if zero:
            raise ValueError(f"zero-variance numeric columns: {zero}")
        stats = FeatureStats(means=tuple(means), stds=tuple(stds))
    z = (numerics - np.asarray(stats.means)) / np.asarray(stats.stds)

    blocks = [z]
    for fieldname, values in CATEGORIES.items():
        index = {v: i for i, v in enumerate(values)}
        onehot = np.zeros((len(records), len(values)))
        for row, r in enumerate(records):
            onehot[row, index[getattr(r, fieldname)]] = 1.0
        blocks.append(onehot)
    return np.hstack(blocks), BMI_COLUMN, stats


def label_by_percentile(records, q: float):
    """Nearest-rank q-quantile threshold on bmi; label 1 iff bmi > threshold."""
    records = list(records)
    if not records:
        raise ValueError("label_by_percentile requires at least one record")
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must be in (0, 1), got {q}")
    bmis = np.array([r.bmi for r in records])
    rank = math.ceil(q * len(bmis))  # 1-based nearest rank
    threshold = float(np.sort(bmis)[rank - 1])
    return (bmis > threshold).astype(int), threshold


def labels_for(records, threshold: float) -> np.ndarray:
    return np.array([1 if r.bmi > threshold else 0 for r in records], dtype=int)


def split_indices(n: int, train_fraction: float, stream: RngStream):
    """Seeded permutation split; a pure function of (n, fraction, stream key)."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    perm = stream.permutation(n)
    cut = int(round(train_fraction * n))
    return perm[:cut], perm[cut:]
