"""Command-line entry point.

Subcommands:
  gen        synthetic scenes + regression dataset (masks, manifest, CSV)
  extract    annotation manifest + masks -> features CSV (coin scaling)
  train      features CSV -> model bundle JSON (split/filter/normalize/fit)
  eval       model bundle + CSV -> MAE/MSE/RMSE/R^2 report
  pipeline   scene manifest + model bundle -> per-item kcal estimates
  gradcheck  finite-difference check of a block's analytic gradients
  detmetrics prediction + ground-truth manifests -> detection report

Exit codes: 0 success, 1 usage error, 2 data/processing error. Every
file-writing run also emits ``run_manifest.json`` beside its outputs.
Option precedence: explicit flags > --config JSON file > built-in defaults.
The FOODCAL_OUT_DIR environment variable supplies a default --out directory.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path


import foodcal
from foodcal import manifests, measurement, metrics, preprocess, regress, synth
from foodcal.errors import FoodcalError
from foodcal.measurement import ClassLabel
from foodcal.nnblocks.gradcheck import BLOCK_NAMES, gradcheck

MODEL_NAMES = {
    "lr": "linear",
    "knn": "knn",
    "dt": "dtree",
    "rf": "rforest",
    "gb": "gboost",
    "ada": "adaboost",
}

BUNDLE_FORMAT = "foodcal-model-bundle"
BUNDLE_VERSION = 1

GRADCHECK_TOLERANCE = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    inputs: list[str]
    outputs: list[str]
    version: str = foodcal.__version__
    wall_clock_s: float = 0.0

    def write(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=1)
            f.write("\n")


def _default_out():
    return os.environ.get("FOODCAL_OUT_DIR")


def _load_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise FoodcalError(f"{path}: config must be a JSON object")
    return cfg


def _resolve(args, config, key, default):
    """Explicit flag > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _scene_config(args, config) -> synth.SceneConfig:
    base = synth.SceneConfig()
    return replace(
        base,
        width=int(_resolve(args, config, "width", base.width)),
        height=int(_resolve(args, config, "height", base.height)),
        items_per_scene=int(_resolve(args, config, "items_per_scene", base.items_per_scene)),
        views_per_item=int(_resolve(args, config, "views_per_item", base.views_per_item)),
        boundary_noise=float(_resolve(args, config, "boundary_noise", base.boundary_noise)),
        weight_noise=float(_resolve(args, config, "weight_noise", base.weight_noise)),
    )


def _require_out(args, parser):
    out = args.out or _default_out()
    if out is None:
        parser.error("--out is required (or set FOODCAL_OUT_DIR)")
    return Path(out)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args, parser):
    config = _load_config(args.config)
    out = _require_out(args, parser)
    seed = int(_resolve(args, config, "seed", 0))
    records = int(_resolve(args, config, "records", 100))
    cfg = _scene_config(args, config)
    t0 = time.perf_counter()
    recs, scenes = synth.generate_regression_dataset(cfg, records, seed)
    out.mkdir(parents=True, exist_ok=True)
    images = [
        manifests.ImageAnnotations(
            name=f"scene_{i:04d}",
            width=s.width,
            height=s.height,
            instances=s.instances,
            calories=[t.calories_kcal for t in s.truth.instances],
        )
        for i, s in enumerate(scenes)
    ]
    manifests.write_manifest(out / "annotations.json", images)
    preprocess.write_csv(out / "dataset.csv", recs)
    RunManifest(
        command="gen",
        argv=sys.argv[1:],
        config={"records": records, **_public_scene_config(cfg)},
        seed=seed,
        inputs=[],
        outputs=["annotations.json", "dataset.csv", "masks/"],
        wall_clock_s=round(time.perf_counter() - t0, 3),
    ).write(out)
    print(f"wrote {len(recs)} records from {len(scenes)} scenes to {out}")
    return 0


def _public_scene_config(cfg: synth.SceneConfig) -> dict:
    return {
        "width": cfg.width,
        "height": cfg.height,
        "items_per_scene": cfg.items_per_scene,
        "views_per_item": cfg.views_per_item,
        "boundary_noise": cfg.boundary_noise,
        "weight_noise": cfg.weight_noise,
        "coin_radius_range": list(cfg.coin_radius_range),
    }


def cmd_extract(args, parser):
    out = _require_out(args, parser)
    t0 = time.perf_counter()
    images = manifests.read_manifest(args.annotations)
    records = []
    for img in images:
        scale = measurement.scale_from_detections(img.instances)
        recs = measurement.extract_features(img.instances, scale)
        cal_by_index = [
            cal for inst, cal in zip(img.instances, img.calories) if inst.label is not ClassLabel.COIN
        ]
        for rec, cal in zip(recs, cal_by_index):
            rec.calories_kcal = cal
            records.append(rec)
    out.mkdir(parents=True, exist_ok=True)
    preprocess.write_csv(out / "features.csv", records)
    RunManifest(
        command="extract",
        argv=sys.argv[1:],
        config={},
        seed=None,
        inputs=[str(args.annotations)],
        outputs=["features.csv"],
        wall_clock_s=round(time.perf_counter() - t0, 3),
    ).write(out)
    print(f"extracted {len(records)} records from {len(images)} images to {out / 'features.csv'}")
    return 0


def _split_and_prepare(dataset, seed, threshold=2.0, fractions=(0.8, 0.1, 0.1)):
    train, valid, test = preprocess.split(dataset, fractions=fractions, seed=seed)
    train = preprocess.zscore_filter(train, threshold)
    params = preprocess.minmax_fit(train)
    return params, preprocess.minmax_apply(params, train), valid, test


def cmd_train(args, parser):
    config = _load_config(args.config)
    out = _require_out(args, parser)
    seed = int(_resolve(args, config, "seed", 0))
    threshold = float(_resolve(args, config, "zscore_threshold", 2.0))
    t0 = time.perf_counter()
    dataset = preprocess.RegressionDataset.from_records(preprocess.read_csv(args.data))
    params, train_n, _, _ = _split_and_prepare(dataset, seed, threshold)
    algorithm = MODEL_NAMES[args.model]
    hyper = {}
    if algorithm == "rforest" and args.threads is not None:
        hyper["threads"] = args.threads
    model = regress.fit(regress.ModelSpec(algorithm, seed=seed, hyperparameters=hyper), train_n)
    bundle = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "preprocessing": {
            "normalization": {"mins": list(params.mins), "maxs": list(params.maxs)},
            "split": {"fractions": [0.8, 0.1, 0.1], "seed": seed},
            "zscore_threshold": threshold,
        },
        "regressor": regress.to_dict(model),
    }
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.json"
    with open(model_path, "w", encoding="utf-8") as f:
        json.dump(bundle, f)
        f.write("\n")
    RunManifest(
        command="train",
        argv=sys.argv[1:],
        config={"model": args.model, "zscore_threshold": threshold},
        seed=seed,
        inputs=[str(args.data)],
        outputs=["model.json"],
        wall_clock_s=round(time.perf_counter() - t0, 3),
    ).write(out)
    print(f"trained {algorithm} on {len(train_n)} rows -> {model_path}")
    return 0


def _load_bundle(path):
    with open(path, encoding="utf-8") as f:
        try:
            bundle = json.load(f)
        except json.JSONDecodeError as exc:
            raise FoodcalError(f"{path}: invalid JSON model bundle") from exc
    if bundle.get("format") != BUNDLE_FORMAT or bundle.get("version") != BUNDLE_VERSION:
        raise FoodcalError(f"{path}: not a {BUNDLE_FORMAT} v{BUNDLE_VERSION} file")
    pre = bundle["preprocessing"]
    params = preprocess.NormalizationParams(
        mins=tuple(pre["normalization"]["mins"]), maxs=tuple(pre["normalization"]["maxs"])
    )
    model = regress.from_dict(bundle["regressor"])
    return model, params, pre


def cmd_eval(args, parser):
    t0 = time.perf_counter()
    model, params, pre = _load_bundle(args.model)
    dataset = preprocess.RegressionDataset.from_records(preprocess.read_csv(args.data))
    if args.split == "all":
        part = dataset
    else:
        fractions = tuple(pre["split"]["fractions"])
        seed = pre["split"]["seed"] if args.seed is None else args.seed
        train, valid, test = preprocess.split(dataset, fractions=fractions, seed=seed)
        part = {"train": train, "valid": valid, "test": test}[args.split]
    part_n = preprocess.minmax_apply(params, part)
    pred = regress.predict_matrix(model, part_n.X)
    report = metrics.regression_metrics(pred, part_n.y)
    line = (
        f"n={len(part_n)} split={args.split} "
        f"MAE={report.mae:.4f} MSE={report.mse:.4f} RMSE={report.rmse:.4f} R2={report.r2:.4f}"
    )
    print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "eval.json", "w", encoding="utf-8") as f:
            json.dump({"n": len(part_n), "split": args.split, **report.as_dict()}, f)
            f.write("\n")
        RunManifest(
            command="eval",
            argv=sys.argv[1:],
            config={"split": args.split},
            seed=pre["split"]["seed"],
            inputs=[str(args.model), str(args.data)],
            outputs=["eval.json"],
            wall_clock_s=round(time.perf_counter() - t0, 3),
        ).write(out)
    return 0


def cmd_pipeline(args, parser):
    t0 = time.perf_counter()
    model, params, _ = _load_bundle(args.model)
    images = manifests.read_manifest(args.annotations)
    rows = []
    for img in images:
        scale = measurement.scale_from_detections(img.instances)
        recs = measurement.extract_features(img.instances, scale)
        ds = preprocess.RegressionDataset.from_records([_without_target(r) for r in recs])
        ds_n = preprocess.minmax_apply(params, ds)
        preds = regress.predict_matrix(model, ds_n.X)
        for rec, kcal in zip(recs, preds):
            rows.append({"image": img.name, "class": rec.label.value, "kcal": float(kcal)})
            print(f"{img.name}  {rec.label.value:<8} {kcal:8.2f} kcal")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "estimates.json", "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=1)
            f.write("\n")
        RunManifest(
            command="pipeline",
            argv=sys.argv[1:],
            config={},
            seed=None,
            inputs=[str(args.annotations), str(args.model)],
            outputs=["estimates.json"],
            wall_clock_s=round(time.perf_counter() - t0, 3),
        ).write(out)
    return 0


def _without_target(rec):
    """Feature record with a placeholder target (prediction input)."""
    return measurement.FeatureRecord(
        label=rec.label,
        height_mm=rec.height_mm,
        width_mm=rec.width_mm,
        area_mm2=rec.area_mm2,
        perimeter_mm=rec.perimeter_mm,
        calories_kcal=0.0,
    )


def cmd_gradcheck(args, parser):
    worst = 0.0
    for seed in range(args.seeds):
        err = gradcheck(args.block, seed=seed)
        worst = max(worst, err)
        print(f"{args.block} seed {seed}: max relative error {err:.3e}")
    status = "PASS" if worst < GRADCHECK_TOLERANCE else "FAIL"
    print(f"{args.block}: worst {worst:.3e} over {args.seeds} seeds -> {status}")
    return 0 if status == "PASS" else 2


def cmd_detmetrics(args, parser):
    t0 = time.perf_counter()
    preds = manifests.read_manifest(args.pred)
    gts = manifests.read_manifest(args.gt)
    names_p = [img.name for img in preds]
    names_g = [img.name for img in gts]
    if names_p != names_g:
        raise FoodcalError("prediction and ground-truth manifests list different images")
    report = metrics.detection_report(
        [img.instances for img in preds],
        [img.instances for img in gts],
        conf_threshold=args.conf_threshold,
    )
    print(metrics.summary_text(report.box, title="boxes"))
    if report.mask is not None:
        print(metrics.summary_text(report.mask, title="masks"))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "detmetrics.json", "w", encoding="utf-8") as f:
            json.dump(report.as_dict(), f, indent=1)
            f.write("\n")
        RunManifest(
            command="detmetrics",
            argv=sys.argv[1:],
            config={"conf_threshold": args.conf_threshold},
            seed=None,
            inputs=[str(args.pred), str(args.gt)],
            outputs=["detmetrics.json"],
            wall_clock_s=round(time.perf_counter() - t0, 3),
        ).write(out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="foodcal", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"foodcal {foodcal.__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate synthetic scenes and a regression dataset")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--records", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None, help="JSON config file")
    for key in ("width", "height", "items-per-scene", "views-per-item"):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=int, default=None)
    for key in ("boundary-noise", "weight-noise"):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=float, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("extract", help="extract mm-scaled features from an annotation manifest")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a regression model on a features CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=sorted(MODEL_NAMES), required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None, help="tree-fitting threads (rf only)")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model bundle on a features CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "valid", "test", "all"), default="test")
    p.add_argument("--seed", type=int, default=None, help="override the stored split seed")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="end-to-end kcal estimates for a scene manifest")
    p.add_argument("--annotations", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    p.add_argument("--block", choices=BLOCK_NAMES, required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("detmetrics", help="detection metrics from manifests")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--conf-threshold", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_detmetrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except FoodcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
