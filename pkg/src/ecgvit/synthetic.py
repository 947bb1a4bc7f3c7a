"""Synthetic lead images, report scans and dataset trees for tests and demos."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .data import CLASS_NAMES, REPORT_COUNTS, LeadDataset, ManifestRow, write_manifest
from .preprocess import BinaryImage, save_binary_png


def waveform_image(side: int, cycles: float, phase: float, amplitude: float = 0.3, thickness: int = 1) -> np.ndarray:
    """Binary (side, side) trace of a sine wave, 1 on the curve."""
    img = np.zeros((side, side), dtype=np.uint8)
    xs = np.arange(side)
    ys = side / 2 + amplitude * side * np.sin(2 * np.pi * cycles * xs / side + phase)
    ys = np.clip(np.round(ys).astype(int), 0, side - 1)
    prev = ys[0]
    for x, y in zip(xs, ys):
        lo, hi = min(prev, y), max(prev, y)
        img[max(lo - thickness + 1, 0) : min(hi + thickness, side), x] = 1
        prev = y
    return img


def synthetic_leads(n_per_class: int = 8, side: int = 64, seed: int = 0) -> LeadDataset:
    """Class ``c`` draws ``c + 1`` sine cycles with random phase and amplitude."""
    rng = np.random.default_rng(seed)
    images, labels, reports = [], [], []
    for c in range(len(CLASS_NAMES)):
        for i in range(n_per_class):
            amp = rng.uniform(0.15, 0.35)
            images.append(waveform_image(side, c + 1, rng.uniform(0, 2 * np.pi), amp))
            labels.append(c)
            reports.append(f"{CLASS_NAMES[c]}_{i:03d}")
    return LeadDataset(np.stack(images), np.array(labels), reports)


def separable_leads(n_per_class: int = 6, side: int = 32, leads_per_report: int = 1) -> LeadDataset:
    """Every class is one fixed image: a horizontal bar in its own quarter of the frame."""
    images, labels, reports = [], [], []
    band = side // len(CLASS_NAMES)
    for c in range(len(CLASS_NAMES)):
        img = np.zeros((side, side), dtype=np.uint8)
        img[c * band : (c + 1) * band, :] = 1
        for i in range(n_per_class):
            images.append(img)
            labels.append(c)
            reports.append(f"{CLASS_NAMES[c]}_{i // leads_per_report:03d}")
    return LeadDataset(np.stack(images), np.array(labels), reports)


def synthetic_report(
    width: int = 400,
    height: int = 300,
    rows: int = 3,
    cols: int = 4,
    stroke: int = 3,
    header: int = 0,
    seed: int | None = None,
    blank: bool = False,
) -> np.ndarray:
    """RGB report scan: white page, faint background dots, one black stroke per lead cell.

    ``header`` rows of gray text-like blocks sit above the lead grid.
    """
    rng = np.random.default_rng(seed)
    img = np.full((header + height, width, 3), 255, dtype=np.uint8)
    if blank:
        return img
    # light-gray grid dots stay above the threshold
    img[header::5, ::5] = (200, 180, 180)
    if header:
        img[2 : header - 2 : 4, 10 : width // 2] = (20, 20, 20)
    ch, cw = height // rows, width // cols
    for r in range(rows):
        for c in range(cols):
            y0 = header + r * ch + ch // 2 + (int(rng.integers(-ch // 6, ch // 6 + 1)) if seed is not None else 0)
            x0, x1 = c * cw + cw // 8, (c + 1) * cw - cw // 8
            img[y0 - stroke // 2 : y0 - stroke // 2 + stroke, x0:x1] = (0, 0, 0)
    return img


def write_dataset_tree(
    root: Path,
    counts: dict[str, int] = REPORT_COUNTS,
    width: int = 48,
    height: int = 36,
    fmt: str = "png",
) -> Path:
    """Create ``root/<class>/<class>(i).<fmt>`` report scans, ``counts[class]`` per class."""
    root = Path(root)
    for c, (cls, n) in enumerate(counts.items()):
        d = root / cls
        d.mkdir(parents=True, exist_ok=True)
        for i in range(n):
            arr = synthetic_report(width, height, stroke=1, seed=c * 100_000 + i)
            Image.fromarray(arr).save(d / f"{cls}({i + 1}).{fmt}")
    return root


def write_lead_manifest(dataset: LeadDataset, out_dir: Path) -> Path:
    """Save a lead set as ``out_dir/leads/*.png`` plus ``manifest.csv``; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "leads").mkdir(parents=True, exist_ok=True)
    rows = []
    for i, (img, label, report) in enumerate(zip(dataset.images, dataset.labels, dataset.report_ids)):
        name = f"leads/{report}__{i:04d}.png"
        save_binary_png(BinaryImage(img.astype(np.uint8)), out_dir / name)
        rows.append(ManifestRow(report, f"L{i:04d}", CLASS_NAMES[int(label)], name))
    write_manifest(out_dir / "manifest.csv", rows)
    return out_dir / "manifest.csv"
