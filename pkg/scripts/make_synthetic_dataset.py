"""Write a synthetic report tree (one subdirectory per class) for the preprocess command.

    python3 scripts/make_synthetic_dataset.py data/raw --scale 0.1
"""
import argparse
from pathlib import Path

from ecgvit.data import REPORT_COUNTS
from ecgvit.synthetic import write_dataset_tree


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("root", type=Path)
    ap.add_argument("--scale", type=float, default=1.0, help="fraction of the full per-class report counts")
    ap.add_argument("--width", type=int, default=400)
    ap.add_argument("--height", type=int, default=300)
    ap.add_argument("--format", default="png", choices=["png", "jpg"])
    args = ap.parse_args()
    counts = {c: max(1, round(n * args.scale)) for c, n in REPORT_COUNTS.items()}
    write_dataset_tree(args.root, counts, width=args.width, height=args.height, fmt=args.format)
    for c, n in counts.items():
        print(f"{c:<12}{n:>6}")
    print(f"{'total':<12}{sum(counts.values()):>6}  -> {args.root}")


if __name__ == "__main__":
    main()
