"""Regenerate the binarization golden pair in tests/data.

The expected mask is computed with a plain per-pixel loop, independent of
the package code.
"""
from pathlib import Path

import numpy as np
from PIL import Image

THRESHOLD = 40
OUT = Path(__file__).resolve().parent.parent / "tests" / "data"


def main():
    # every intensity 0..255 once, raster order, then transposed copy below it
    ramp = np.arange(256, dtype=np.uint8).reshape(16, 16)
    gray = np.vstack([ramp, ramp.T])
    mask = np.zeros_like(gray)
    for y in range(gray.shape[0]):
        for x in range(gray.shape[1]):
            mask[y, x] = 255 if int(gray[y, x]) < THRESHOLD else 0
    OUT.mkdir(parents=True, exist_ok=True)
    Image.fromarray(gray).save(OUT / "binarize_input.png")
    Image.fromarray(mask).save(OUT / "binarize_expected_t40.png")
    print(f"wrote golden pair to {OUT} ({int((mask > 0).sum())} foreground pixels)")


if __name__ == "__main__":
    main()
