"""``fruitgrade`` command line: extract, select, train, evaluate, predict, synth.

Exit codes: 0 success, 1 usage error, 2 data or processing error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from . import features, imgcore, segment, select, synth
from .config import PipelineConfig, load_config
from .errors import FruitGradeError
from .learn.models import PRESETS, SelectionConfig, cross_validate, evaluate, fit_pipeline, load_model, save_model
from .learn.protocol import Dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _config_flag(p):
    p.add_argument("--config", type=Path, help="pipeline configuration JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fruitgrade", description="Grade dried fruit from calibrated photographs.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("extract", help="images + labels -> feature CSV")
    p.add_argument("--images", type=Path, required=True, help="directory of images")
    p.add_argument("--labels", type=Path, required=True, help="CSV with filename,grade rows")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--mm-per-pixel", type=float, help="skip frame detection and use this scale")
    _config_flag(p)

    p = sub.add_parser("select", help="feature CSV -> selection transform JSON")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--method", choices=["none", "pca", "cfs"])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pca-target", type=float)
    p.add_argument("--cfs-stall", type=int)
    _config_flag(p)

    p = sub.add_parser("train", help="feature CSV -> model JSON")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--transform", type=Path, help="fitted selection transform JSON")
    p.add_argument("--selection", choices=["none", "pca", "cfs"], help="fit this selection when no transform is given")
    p.add_argument("--model-preset", choices=sorted(PRESETS))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)
    _config_flag(p)

    p = sub.add_parser("evaluate", help="model + feature CSV -> accuracy report")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--cv", type=int, help="k-fold cross-validation of the model's preset and selection")
    p.add_argument("--seed", type=int)
    p.add_argument("--json", type=Path, help="also write the report as JSON")

    p = sub.add_parser("predict", help="model + images -> one grade per image")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("images", type=Path, nargs="+")
    p.add_argument("--mm-per-pixel", type=float)
    _config_flag(p)

    p = sub.add_parser("synth", help="synthetic corpus spec -> image directory + labels.csv")
    p.add_argument("--spec", type=Path, help="SynthSpec JSON (default: built-in three-grade spec)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--samples-per-grade", type=int, default=50, help="only with the built-in spec")
    p.add_argument("--seed", type=int, help="override the corpus seed")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _extract_one(job):
    path, cfg_json = job
    cfg = PipelineConfig.model_validate_json(cfg_json)
    try:
        img = imgcore.read_image(path)
        view = segment.fruit_view_from_image(img, cfg.policy(), cfg.frame_side_mm, cfg.mm_per_pixel)
        return features.extract_all(view, cfg.extraction()).values, None
    except (FruitGradeError, OSError, ValueError) as exc:
        return None, f"{path}: {exc}"


def _extract_many(paths: Sequence[Path], cfg: PipelineConfig, jobs: int):
    work = [(p, cfg.model_dump_json()) for p in paths]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_extract_one, work, chunksize=4))
    return [_extract_one(w) for w in work]


def read_labels(path: Path) -> list[tuple[str, str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise FruitGradeError(f"{path}: {exc.strerror}") from None
    if rows and [c.strip().lower() for c in rows[0][:2]] == ["filename", "grade"]:
        rows = rows[1:]
    out = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) < 2 or not row[0] or not row[1]:
            raise FruitGradeError(f"{path}:{lineno}: expected filename,grade")
        out.append((row[0], row[1]))
    if not out:
        raise FruitGradeError(f"{path}: no labeled images")
    return sorted(out)


def cmd_extract(args) -> int:
    cfg = load_config(args.config, mm_per_pixel=args.mm_per_pixel)
    labeled = read_labels(args.labels)
    if not args.images.is_dir():
        raise FruitGradeError(f"{args.images}: not a directory")
    results = _extract_many([args.images / name for name, _ in labeled], cfg, max(1, args.jobs))
    rows, failures = [], []
    for (name, grade), (values, err) in zip(labeled, results):
        if err is None:
            rows.append((values, grade))
        else:
            failures.append(err)
    features.write_feature_csv(args.out, rows)
    for msg in failures:
        print(msg, file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.out}; {len(failures)} failed")
    return EXIT_DATA if failures else EXIT_OK


def _load_dataset(path: Path) -> Dataset:
    x, labels, names = features.read_feature_csv(path)
    return Dataset.from_strings(x, labels, names)


def cmd_select(args) -> int:
    cfg = load_config(args.config, selection=args.method, pca_target=args.pca_target, cfs_stall=args.cfs_stall)
    data = _load_dataset(args.inp)
    transform = cfg.selection_config().fit(data.features, data.labels, data.names)
    args.out.write_text(json.dumps(transform.to_dict(), indent=1), encoding="utf-8")
    print(f"{transform.method}: {len(transform.output_names)} outputs -> {args.out}")
    return EXIT_OK


def _load_transform(path: Path) -> select.SelectionTransform:
    try:
        return select.SelectionTransform.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FruitGradeError(f"{path}: cannot read transform ({exc})") from None


def cmd_train(args) -> int:
    cfg = load_config(args.config, preset=args.model_preset, seed=args.seed, selection=args.selection)
    data = _load_dataset(args.inp)
    selection = _load_transform(args.transform) if args.transform else cfg.selection_config()
    overrides = {"hidden": cfg.hidden} if PRESETS[cfg.preset]["kind"] == "mlp" else None
    model = fit_pipeline(data, cfg.preset, selection, cfg.seed, overrides=overrides)
    save_model(model, args.out)
    print(f"trained {cfg.preset} on {len(data)} rows -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = _load_dataset(args.inp)
    if args.cv:
        sel = model.config.get("selection", {})
        if sel.get("prefit"):
            sel_cfg = SelectionConfig(sel["method"])
        else:
            sel_cfg = SelectionConfig(**{k: sel[k] for k in ("method", "pca_target", "cfs_stall") if k in sel})
        seed = model.seed if args.seed is None else args.seed
        report = cross_validate(data, model.preset, sel_cfg, args.cv, seed)
    else:
        report = evaluate(model, data)
    print(report.to_table())
    if args.json:
        args.json.write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = load_config(args.config, mm_per_pixel=args.mm_per_pixel)
    model = load_model(args.model)
    status = EXIT_OK
    for path, (values, err) in zip(args.images, _extract_many(args.images, cfg, 1)):
        if err is not None:
            print(err, file=sys.stderr)
            status = EXIT_DATA
            continue
        print(f"{path}\t{model.predict_labels(values)[0]}")
    return status


def cmd_synth(args) -> int:
    if args.spec is not None:
        try:
            spec = synth.load_spec(args.spec)
        except OSError as exc:
            raise FruitGradeError(f"{args.spec}: {exc.strerror}") from None
        except ValidationError as exc:
            raise FruitGradeError(f"{args.spec}: invalid spec\n{exc}") from None
    else:
        spec = synth.default_spec(args.samples_per_grade)
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    labels = synth.generate_synthetic_corpus(spec, args.out, max(1, args.jobs))
    print(f"wrote {spec.samples_per_grade * len(spec.grades)} images and {labels}")
    return EXIT_OK


COMMANDS = {
    "extract": cmd_extract,
    "select": cmd_select,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "synth": cmd_synth,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:  # FruitGradeError and model-fitting input errors
        print(f"fruitgrade {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"fruitgrade {args.command}: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
