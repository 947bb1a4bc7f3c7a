"""Command-line entry point: preprocess, train, evaluate, gradcheck.

Exit codes: 0 success, 1 computation failure, 2 configuration or I/O failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import ConfigError, RunConfig, load
from .data import CLASS_NAMES, load_dataset
from .evaluate import cross_validate, holdout_evaluate
from .gradcheck import model_gradcheck
from .metrics import compute_metrics, confusion, write_table
from .models import config_from_dict, config_to_dict, preset_config
from .preprocess import preprocess_dataset
from .splits import holdout_split
from .trainer import TrainingDiverged, accuracy, predict, train, write_loss_curve

logger = logging.getLogger("ecgvit")

DISPLAY_NAMES = {"vit": "Google-Vit", "swin": "Swin", "beit": "BEiT"}
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _setup_logging(out_dir: Path | None, verbose: bool):
    logger.handlers.clear()
    logger.setLevel(logging.DEBUG)
    logger.propagate = False
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    logger.addHandler(console)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(out_dir / "run.log")
        fh.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
        logger.addHandler(fh)


def _run_config(args) -> RunConfig:
    train = {}
    for key, attr in (("epochs", "epochs"), ("batch_size", "batch_size"), ("base_lr", "lr")):
        val = getattr(args, attr, None)
        if val is not None:
            train[key] = val
    return load(
        args.config,
        dataset_root=getattr(args, "root", None),
        out=args.out,
        seed=args.seed,
        jobs=args.jobs,
        model=getattr(args, "model", None),
        preset=getattr(args, "preset", None),
        profile=getattr(args, "profile", None),
        mode=getattr(args, "mode", None),
        manifest=getattr(args, "manifest", None),
        checkpoint=getattr(args, "checkpoint", None),
        train=train,
    )


def _model_config(cfg: RunConfig):
    return preset_config(cfg.model, cfg.preset)


def _load_leads(cfg: RunConfig, model_cfg):
    if not cfg.manifest_path.is_file():
        raise FileNotFoundError(f"manifest {cfg.manifest_path} not found; run `preprocess` first")
    return load_dataset(cfg.manifest_path, side=model_cfg.image_side)


def cmd_preprocess(cfg: RunConfig) -> int:
    if not cfg.dataset_root:
        raise ConfigError("dataset_root is required (config key or --root)")
    summary = preprocess_dataset(Path(cfg.dataset_root), cfg.out_dir, cfg.preprocess_config(), jobs=cfg.jobs)
    print(f"{'class':<12}{'reports':>9}{'leads':>9}")
    for cls in CLASS_NAMES:
        print(f"{cls:<12}{summary.reports[cls]:>9}{summary.leads[cls]:>9}")
    print(f"{'total':<12}{summary.total_reports:>9}{summary.total_leads:>9}")
    if summary.failures:
        print(f"{len(summary.failures)} report(s) skipped, see {cfg.out_dir / 'run.log'}")
    print(f"manifest: {summary.manifest}")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    model_cfg = _model_config(cfg)
    train_cfg = cfg.train_config()
    dataset = _load_leads(cfg, model_cfg)
    logger.info("training %s on %d leads with %s", cfg.model, len(dataset), train_cfg)
    out = cfg.out_dir
    meta = {"model": cfg.model, "model_config": config_to_dict(model_cfg), "train_config": dataclasses.asdict(train_cfg)}
    try:
        result = train(dataset, model_cfg, train_cfg)
    except TrainingDiverged as exc:
        checkpoint.save(out / "checkpoint.last_good.bin", exc.params, meta)
        write_loss_curve(out / "loss_curve.csv", exc.curve)
        print(f"training diverged: {exc}; last good parameters in {out / 'checkpoint.last_good.bin'}", file=sys.stderr)
        return EXIT_FAIL
    checkpoint.save(out / "checkpoint.bin", result.params, meta)
    write_loss_curve(out / "loss_curve.csv", result.curve)
    acc = accuracy(model_cfg, result.params, dataset)
    print(f"steps: {len(result.curve)}  final loss: {result.curve[-1].loss:.6f}  train accuracy: {acc:.4f}")
    print(f"checkpoint: {out / 'checkpoint.bin'}")
    return EXIT_OK


def _eval_checkpoint_only(cfg: RunConfig, ckpt_path: Path):
    params, meta = checkpoint.load(ckpt_path, requires_grad=False)
    model_cfg = config_from_dict(meta["model"], meta["model_config"])
    dataset = _load_leads(cfg, model_cfg)
    groups = dataset.report_ids if cfg.group_by_report else None
    _, _, test = holdout_split(list(range(len(dataset))), dataset.labels, cfg.holdout, cfg.seed, cfg.stratified, groups)
    test_set = dataset.subset(test)
    cm = confusion(predict(model_cfg, params, test_set.images), test_set.labels, model_cfg.num_classes)
    body = {"model": meta["model"], "n_test": len(test), "confusion": cm.counts.tolist(), "metrics": compute_metrics(cm).to_dict()}
    return body, cm


def cmd_evaluate(cfg: RunConfig) -> int:
    out = cfg.out_dir
    ratio_label = "/".join(f"{round(r * 100)}" for r in cfg.holdout)
    if cfg.mode == "holdout" and cfg.checkpoint:
        body, cm = _eval_checkpoint_only(cfg, Path(cfg.checkpoint))
        cm.to_csv(out / "confusion_holdout.csv")
        payload = {"mode": cfg.mode, "checkpoint": cfg.checkpoint, **body}
        rows = [{"model": DISPLAY_NAMES[body["model"]], "setup": f"Holdout {ratio_label}", **compute_metrics(cm).table_row()}]
        acc = body["metrics"]["accuracy"]
        return _write_eval(out, payload, rows, acc)
    model_cfg = _model_config(cfg)
    train_cfg = cfg.train_config()
    dataset = _load_leads(cfg, model_cfg)
    name = DISPLAY_NAMES[cfg.model]
    if cfg.mode == "5fold":
        res = cross_validate(dataset, model_cfg, train_cfg, k=cfg.folds, stratified=cfg.stratified,
                             group_by_report=cfg.group_by_report, reducer=cfg.reducer, jobs=cfg.jobs)
        for f in res.folds:
            f.cm.to_csv(out / f"confusion_fold{f.fold}.csv")
        payload = {"mode": cfg.mode, "model": cfg.model, **res.to_dict()}
        rows = [{"model": name, "setup": f"{cfg.folds}-Fold", **res.pooled.table_row()},
                {"model": name, "setup": f"{cfg.folds}-Fold (fold mean)", **res.fold_mean()}]
        acc = res.pooled.accuracy
    else:
        res = holdout_evaluate(dataset, model_cfg, train_cfg, cfg.holdout, cfg.stratified, cfg.group_by_report, cfg.reducer)
        res.cm.to_csv(out / "confusion_holdout.csv")
        payload = {"mode": cfg.mode, "model": cfg.model, **res.to_dict()}
        rows = [{"model": name, "setup": f"Holdout {ratio_label}", **res.report.table_row()}]
        acc = res.report.accuracy
    return _write_eval(out, payload, rows, acc)


def _write_eval(out: Path, payload: dict, rows: list[dict], acc: float) -> int:
    (out / "metrics.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_table(out / "metrics_table.csv", rows)
    for r in rows:
        print(f"{r['model']:<11}{r['setup']:<22}P={r['precision']:.3f} R={r['recall']:.3f} F1={r['f1_score']:.3f} Acc={r['accuracy']:.3f}")
    logger.info("evaluation done, accuracy %.4f", acc)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    t0 = time.perf_counter()
    report = model_gradcheck(args.variant, args.preset, seed=args.seed, tol=args.tol,
                             max_coords=args.max_coords, corrupt=args.corrupt_backward)
    print(f"gradcheck {args.variant}: {report} [{time.perf_counter() - t0:.1f}s]")
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecgvit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_model=True):
        p.add_argument("--config", type=Path, help="YAML run config")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="max concurrent folds/files")
        p.add_argument("-v", "--verbose", action="store_true")
        if with_model:
            p.add_argument("--model", choices=sorted(DISPLAY_NAMES))
            p.add_argument("--preset", help="model geometry preset (default: tiny)")
            p.add_argument("--profile", help="training profile: google-vit, swin or beit")
            p.add_argument("--manifest", help="manifest CSV (default: <out>/manifest.csv)")
            p.add_argument("--epochs", type=int)
            p.add_argument("--batch-size", type=int)
            p.add_argument("--lr", type=float)

    p = sub.add_parser("preprocess", help="split report scans into binarized lead images")
    common(p, with_model=False)
    p.add_argument("--root", help="dataset root with one subdirectory per class")

    p = sub.add_parser("train", help="train one model on a manifest")
    common(p)

    p = sub.add_parser("evaluate", help="5-fold cross-validation or 80/0/20 holdout")
    common(p)
    p.add_argument("--mode", choices=["5fold", "holdout"])
    p.add_argument("--checkpoint", help="holdout only: score this checkpoint instead of training")

    p = sub.add_parser("gradcheck", help="finite-difference check of a model's gradients")
    p.add_argument("variant", choices=sorted(DISPLAY_NAMES))
    p.add_argument("--preset", default="gradcheck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-coords", type=int, help="sample at most this many coordinates per tensor")
    p.add_argument("--corrupt-backward", action="store_true", help="debug: break the gelu backward rule")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gradcheck":
        _setup_logging(None, False)
        return cmd_gradcheck(args)
    try:
        cfg = _run_config(args)
        _setup_logging(cfg.out_dir, args.verbose)
        np.seterr(all="ignore")
        handler = {"preprocess": cmd_preprocess, "train": cmd_train, "evaluate": cmd_evaluate}[args.command]
        return handler(cfg)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, FloatingPointError, RuntimeError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
