"""ECG report preprocessing: grayscale, ROI crop, global threshold, lead split."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .data import CLASS_NAMES, ManifestRow, write_manifest

logger = logging.getLogger(__name__)

# Row-major order of the standard 3x4 report layout.
LEAD_LABELS = ("I", "aVR", "V1", "V4", "II", "aVL", "V2", "V5", "III", "aVF", "V3", "V6")
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


@dataclass
class GrayImage:
    pixels: np.ndarray  # (height, width) uint8, 0 = black

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError(f"GrayImage needs a non-empty 2-d array, got shape {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class BinaryImage:
    pixels: np.ndarray  # (height, width) uint8 in {0, 1}, 1 = waveform

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise ValueError(f"BinaryImage needs a 2-d array, got shape {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class RoiRect:
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class LeadGridSpec:
    rows: int = 3
    cols: int = 4

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols != 12:
            raise ValueError(f"lead grid must hold 12 cells, got {self.rows}x{self.cols}")


@dataclass(frozen=True)
class BinarizeConfig:
    threshold: int = 40

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"threshold must be in [0, 255], got {self.threshold}")


@dataclass
class LeadImage:
    lead_label: str
    image: BinaryImage
    source_report_id: str


@dataclass
class PreprocessConfig:
    roi: RoiRect | None = None  # None: whole image
    binarize: BinarizeConfig = field(default_factory=BinarizeConfig)
    grid: LeadGridSpec = field(default_factory=LeadGridSpec)
    resize: int | None = 64
    lead_labels: tuple[str, ...] = LEAD_LABELS


def to_grayscale(rgb) -> GrayImage:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) RGB array, got shape {rgb.shape}")
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValueError("zero-sized image")
    c = rgb.astype(np.float64)
    lum = 0.299 * c[..., 0] + 0.587 * c[..., 1] + 0.114 * c[..., 2]
    return GrayImage(np.clip(np.floor(lum + 0.5), 0, 255).astype(np.uint8))


def crop_roi(img: GrayImage, roi: RoiRect) -> GrayImage:
    if roi.w < 1 or roi.h < 1 or roi.x < 0 or roi.y < 0 or roi.x + roi.w > img.width or roi.y + roi.h > img.height:
        raise ValueError(f"ROI {roi} is outside the {img.width}x{img.height} image")
    return GrayImage(img.pixels[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w].copy())


def binarize(img: GrayImage, cfg: BinarizeConfig = BinarizeConfig()) -> BinaryImage:
    # dark ink becomes foreground
    return BinaryImage((img.pixels < cfg.threshold).astype(np.uint8))


def split_leads(
    img: BinaryImage,
    grid: LeadGridSpec = LeadGridSpec(),
    labels: Sequence[str] = LEAD_LABELS,
    report_id: str = "",
) -> list[LeadImage]:
    """Cut the waveform region into ``rows x cols`` equal cells, row-major.

    Remainder pixels on the right and bottom edges are dropped.
    """
    if len(labels) != 12 or len(set(labels)) != 12:
        raise ValueError("need 12 distinct lead labels")
    if img.width < grid.cols or img.height < grid.rows:
        raise ValueError(f"{img.width}x{img.height} image is smaller than the {grid.rows}x{grid.cols} grid")
    cw, ch = img.width // grid.cols, img.height // grid.rows
    leads = []
    for k, label in enumerate(labels):
        r, c = divmod(k, grid.cols)
        cell = img.pixels[r * ch : (r + 1) * ch, c * cw : (c + 1) * cw].copy()
        leads.append(LeadImage(label, BinaryImage(cell), report_id))
    return leads


def resize_nearest(img: BinaryImage, side: int) -> BinaryImage:
    if side < 1:
        raise ValueError("target side must be >= 1")
    rows = (np.arange(side) * img.height) // side
    cols = (np.arange(side) * img.width) // side
    return BinaryImage(img.pixels[np.ix_(rows, cols)])


def read_rgb(path: Path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc


def preprocess_report(
    path: Path,
    roi: RoiRect | None = None,
    cfg: BinarizeConfig = BinarizeConfig(),
    grid: LeadGridSpec = LeadGridSpec(),
    side: int | None = None,
    labels: Sequence[str] = LEAD_LABELS,
) -> list[LeadImage]:
    path = Path(path)
    gray = to_grayscale(read_rgb(path))
    if roi is not None:
        gray = crop_roi(gray, roi)
    leads = split_leads(binarize(gray, cfg), grid, labels, report_id=path.stem)
    if side is not None:
        for lead in leads:
            lead.image = resize_nearest(lead.image, side)
    return leads


def save_binary_png(img: BinaryImage, path: Path):
    Image.fromarray((img.pixels * 255).astype(np.uint8)).save(path, format="PNG")


@dataclass
class PreprocessSummary:
    reports: dict[str, int]
    leads: dict[str, int]
    failures: list[tuple[str, str]]
    manifest: Path

    @property
    def total_reports(self) -> int:
        return sum(self.reports.values())

    @property
    def total_leads(self) -> int:
        return sum(self.leads.values())


def scan_dataset(root: Path) -> list[tuple[str, Path]]:
    """List ``(class, report path)`` pairs under one subdirectory per class."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")
    found = []
    for cls in CLASS_NAMES:
        d = root / cls
        if not d.is_dir():
            continue
        files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        found.extend((cls, p) for p in files)
    if not found:
        raise FileNotFoundError(f"no report images under {root} (expected subdirectories {', '.join(CLASS_NAMES)})")
    return found


def _process_one(args):
    cls, path, cfg, lead_dir = args
    try:
        leads = preprocess_report(path, cfg.roi, cfg.binarize, cfg.grid, cfg.resize, cfg.lead_labels)
    except (OSError, ValueError) as exc:
        return cls, path, None, str(exc)
    rows = []
    for lead in leads:
        name = f"{path.stem}__{lead.lead_label}.png"
        save_binary_png(lead.image, lead_dir / name)
        rows.append(ManifestRow(path.stem, lead.lead_label, cls, f"{lead_dir.name}/{name}"))
    return cls, path, rows, None


def preprocess_dataset(root: Path, out_dir: Path, cfg: PreprocessConfig = PreprocessConfig(), jobs: int = 1) -> PreprocessSummary:
    """Preprocess every report under ``root`` into ``out_dir/leads`` plus ``manifest.csv``.

    Per-file failures are logged and collected; the run continues.
    """
    reports = scan_dataset(root)
    out_dir = Path(out_dir)
    lead_dir = out_dir / "leads"
    lead_dir.mkdir(parents=True, exist_ok=True)

    seen: dict[str, str] = {}
    work, failures = [], []
    for cls, path in reports:
        if path.stem in seen:
            failures.append((str(path), f"report stem {path.stem!r} already used by class {seen[path.stem]}"))
            continue
        seen[path.stem] = cls
        work.append((cls, path, cfg, lead_dir))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_process_one, work, chunksize=8))
    else:
        results = [_process_one(w) for w in work]

    counts = {c: 0 for c in CLASS_NAMES}
    lead_counts = {c: 0 for c in CLASS_NAMES}
    manifest_rows: list[ManifestRow] = []
    for cls, path, rows, err in results:
        if err is not None:
            failures.append((str(path), err))
            continue
        counts[cls] += 1
        lead_counts[cls] += len(rows)
        manifest_rows.extend(rows)
    for path, err in failures:
        logger.warning("skipped %s: %s", path, err)

    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, manifest_rows)
    return PreprocessSummary(counts, lead_counts, failures, manifest)
