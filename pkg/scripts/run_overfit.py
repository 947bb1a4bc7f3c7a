"""Overfit each model variant on a fixed 32-lead synthetic set and report training accuracy.

    python3 scripts/run_overfit.py --epochs 60 --out runs/overfit
"""
import argparse
import time
from pathlib import Path

from ecgvit.models import preset_config
from ecgvit.synthetic import synthetic_leads
from ecgvit.trainer import TrainConfig, accuracy, train, write_loss_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--variants", nargs="+", default=["vit", "swin", "beit"])
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--batch-size", type=int, default=8)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, help="write <variant>_loss.csv files here")
    args = ap.parse_args()
    data = synthetic_leads(8, 64, seed=args.seed)
    tc = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, base_lr=args.lr, seed=args.seed)
    for variant in args.variants:
        cfg = preset_config(variant, "tiny")
        start = time.perf_counter()
        res = train(data, cfg, tc)
        acc = accuracy(cfg, res.params, data)
        print(f"{variant:<5} loss {res.curve[0].loss:.3f} -> {res.curve[-1].loss:.4f}  "
              f"train acc {acc:.3f}  ({time.perf_counter() - start:.1f}s)")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            write_loss_curve(args.out / f"{variant}_loss.csv", res.curve)


if __name__ == "__main__":
    main()
