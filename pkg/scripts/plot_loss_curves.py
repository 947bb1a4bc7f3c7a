"""Plot one or more loss_curve.csv files on shared axes (needs the ``scripts`` extra).

    python3 scripts/plot_loss_curves.py runs/overfit/*_loss.csv -o loss.png
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ecgvit.trainer import read_loss_curve  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("curves", nargs="+", type=Path)
    ap.add_argument("-o", "--output", type=Path, default=Path("loss_curves.png"))
    ap.add_argument("--log", action="store_true", help="log-scale loss axis")
    args = ap.parse_args()
    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.curves:
        curve = read_loss_curve(path)
        ax.plot([r.step for r in curve], [r.loss for r in curve], label=path.stem)
    ax.set_xlabel("step")
    ax.set_ylabel("training loss")
    if args.log:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
