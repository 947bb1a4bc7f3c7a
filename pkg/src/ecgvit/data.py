"""Class registry, manifest I/O and in-memory lead datasets."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

CLASS_NAMES = ("MI", "AbnormalHB", "HistoryMI", "Normal")
CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}
NUM_CLASSES = len(CLASS_NAMES)

# Report counts per class in the public 12-lead dataset (four cardiac classes).
REPORT_COUNTS = {"MI": 240, "AbnormalHB": 233, "HistoryMI": 172, "Normal": 172}

MANIFEST_FIELDS = ("report_id", "lead_label", "class", "path")


@dataclass(frozen=True)
class ManifestRow:
    report_id: str
    lead_label: str
    cls: str
    path: str


def write_manifest(path: Path, rows: list[ManifestRow]):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_FIELDS)
        for r in rows:
            w.writerow([r.report_id, r.lead_label, r.cls, r.path])


def read_manifest(path: Path) -> list[ManifestRow]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: manifest missing columns {sorted(missing)}")
        return [ManifestRow(r["report_id"], r["lead_label"], r["class"], r["path"]) for r in reader]


@dataclass
class LeadDataset:
    """Stacked lead images (n, S, S) in {0, 1} with labels and report ids."""

    images: np.ndarray
    labels: np.ndarray
    report_ids: list[str]

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise ValueError(f"images must be (n, S, S), got {self.images.shape}")
        if len(self.labels) != len(self.images) or len(self.report_ids) != len(self.images):
            raise ValueError("images, labels and report_ids must have equal length")

    def __len__(self):
        return len(self.labels)

    @property
    def side(self) -> int:
        return self.images.shape[1]

    def subset(self, idx) -> "LeadDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LeadDataset(self.images[idx], self.labels[idx], [self.report_ids[i] for i in idx])


def load_lead_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr > 127).astype(np.uint8)


def load_dataset(manifest: Path, side: int | None = None) -> LeadDataset:
    """Load every lead listed in ``manifest``; paths are relative to its folder."""
    from .preprocess import BinaryImage, resize_nearest

    manifest = Path(manifest)
    rows = read_manifest(manifest)
    if not rows:
        raise ValueError(f"{manifest}: manifest is empty")
    images, labels, reports = [], [], []
    for r in rows:
        if r.cls not in CLASS_INDEX:
            raise ValueError(f"{manifest}: unknown class {r.cls!r}")
        bits = load_lead_png(manifest.parent / r.path)
        if side is not None and bits.shape != (side, side):
            bits = resize_nearest(BinaryImage(bits), side).pixels
        images.append(bits)
        labels.append(CLASS_INDEX[r.cls])
        reports.append(r.report_id)
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"{manifest}: lead images have mixed sizes {sorted(shapes)}; pass side=")
    return LeadDataset(np.stack(images), np.array(labels), reports)
