"""``tagscope`` command line: extract | train | evaluate | explain | ablate | synth.

Exit codes: 0 ok, 2 bad arguments, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import extract as _extract
from . import pipeline, synth
from .errors import DataError, NumericFailure, TagscopeError
from .explain import ablation, permutation_importance, shap_summary, shap_values, weight_importance
from .gbdt import BoostedModel, Params
from .midlevel import MidLevelModel, train_from_files
from .svg import emit_bar_svg
from .tabular import GROUPS, LabelMatrix, config_hash, load_gtzan, read_labels, read_store, write_store

log = logging.getLogger("tagscope")

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    """Bad or inconsistent arguments (exit 2)."""


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _need(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"input path does not exist: {p}")


def _labels(path, task_kind=None) -> LabelMatrix:
    """Indicator CSV, Jamendo-style TSV, or a GTZAN-style genre directory."""
    if Path(path).is_dir():
        return load_gtzan(path)[1]
    return read_labels(path, task_kind)


def _params(args) -> Params:
    over = {
        k: getattr(args, k)
        for k in ("n_trees", "max_depth", "learning_rate", "reg_lambda", "gamma", "min_child_weight",
                  "subsample", "colsample")
        if getattr(args, k, None) is not None
    }
    try:
        return Params(seed=args.seed, **over).validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fractions(text: str):
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--fractions must be three numbers, got {text!r}") from exc
    if len(parts) != 3 or any(p < 0 for p in parts) or abs(sum(parts) - 1.0) > 1e-9:
        raise UsageError("--fractions must be three non-negative numbers summing to 1")
    return parts


def _groups(text: str | None):
    if not text:
        return None
    groups = [g.strip() for g in text.split(",") if g.strip()]
    bad = [g for g in groups if g not in GROUPS]
    if bad or not groups:
        raise UsageError(f"--groups takes a comma list from {GROUPS}, got {text!r}")
    return groups


# commands


def cmd_synth(args) -> int:
    try:
        manifest = synth.generate(args.out, args.seed)
    except OSError as exc:
        raise DataError(f"cannot write corpus to {args.out}: {exc}") from exc
    print(f"wrote {len(manifest['files'])} files to {args.out} (checksum {synth.corpus_checksum(manifest)[:16]})")
    return EXIT_OK


def cmd_train_midlevel(args) -> int:
    _need(args.annotations, args.clips)
    model = train_from_files(args.annotations, args.clips, args.ridge_lambda)
    model.save(args.out)
    print(f"mid-level model: lambda {model.ridge_lambda:g}, train mse {model.train_mse:.4g} -> {args.out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    _need(args.audio, args.chords, args.midlevel)
    tracks = _extract.find_audio(args.audio)
    chords = _extract.read_chords_manifest(args.chords) if args.chords else {}
    model = MidLevelModel.load(args.midlevel) if args.midlevel else None
    if model is None:
        log.warning("no --midlevel model given: mid-level block is the neutral 0.5")
    vectors, failed = _extract.extract_corpus(tracks, chords, model, args.jobs)
    print(f"extracted {len(vectors)} tracks, skipped {len(failed)}")
    no_chords = sum(v.missing_chords for v in vectors)
    if no_chords:
        log.info("%d tracks have no chord annotation; their harmonic block is zero", no_chords)
    if not vectors:
        raise DataError(f"no track under {args.audio} could be extracted")
    config = {
        "midlevel": "neutral" if model is None else config_hash(model.to_dict()),
        "chords_manifest": bool(args.chords),
    }
    write_store(args.out, vectors, config=config, extra={"skipped": dict(sorted(failed.items()))})
    return EXIT_OK


def cmd_train(args) -> int:
    _need(args.features, args.labels)
    store = read_store(args.features)
    labels = _labels(args.labels, args.task_kind)
    groups = _groups(args.groups)
    cols = None if groups is None else np.flatnonzero(store.group_mask(groups))
    model = pipeline.fit(store, labels, _params(args), _fractions(args.fractions), args.seed, args.jobs,
                         columns=cols)
    model.save(args.out)
    print(f"trained {len(model.boosters)} labels x {model.params.n_trees} trees on "
          f"{len(model.split['train'])} rows -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _need(args.model, args.features, args.labels)
    model = BoostedModel.load(args.model)
    store = read_store(args.features)
    labels = _labels(args.labels, model.task_kind)
    metrics = pipeline.evaluate(model, store, labels, args.part)
    out = metrics.to_dict()
    out["part"] = args.part
    _write_json(args.out, out)
    headline = f"accuracy {metrics.accuracy:.4f}" if metrics.accuracy is not None else ""
    auc = "n/a" if metrics.macro_auc is None else f"{metrics.macro_auc:.4f}"
    print(f"{args.part}: macro AUC {auc} {headline} ({metrics.n_rows} rows) -> {args.out}")
    return EXIT_OK


def _pick_label(model: BoostedModel, label, x):
    if label is not None:
        if label not in model.labels:
            raise UsageError(f"model has no label {label!r}; labels are {model.labels}")
        return label
    # default: the label the model is most confident about for this track
    return model.labels[int(np.argmax(model.predict_margin(x[None, :])[0]))]


def cmd_explain(args) -> int:
    _need(args.model, args.features, args.labels)
    model = BoostedModel.load(args.model)
    store = read_store(args.features)
    if args.track is not None and args.method != "shap":
        raise UsageError("--track is only meaningful with --method shap")
    if args.method in ("weight", "gain"):
        if args.label is not None and args.label not in model.labels:
            raise UsageError(f"model has no label {args.label!r}")
        report = weight_importance(model, args.label, args.method).to_dict()
        scores = report["scores"]
    elif args.method == "permutation":
        if args.labels is None:
            raise UsageError("--method permutation needs --labels")
        labels = _labels(args.labels, model.task_kind)
        ids = pipeline.part_ids(model, store, labels, args.part)
        metric = args.metric or ("accuracy" if model.task_kind == "multiclass" else "macro_auc")
        report = permutation_importance(model, pipeline.model_inputs(model, store, ids), labels.rows(ids),
                                        metric, args.repeats, args.seed).to_dict()
        report["part"] = args.part
        scores = report["scores"]
    elif args.track is not None:
        x = pipeline.model_inputs(model, store, [args.track])[0]
        report = shap_values(model, x, _pick_label(model, args.label, x)).to_dict()
        report["track_id"] = args.track
        scores = report["phi"]
    else:
        ids = store.track_ids
        if model.split is not None and args.part != "all":
            ids = list(model.split[args.part])
        report = shap_summary(model, pipeline.model_inputs(model, store, ids), args.max_instances, args.seed)
        report["method"] = "shap"
        scores = report["overall"] if args.label is None else report["per_label"][args.label]
    _write_json(args.out, report)
    if args.svg:
        Path(args.svg).write_text(emit_bar_svg(scores, f"{args.method} importance"))
    print(f"{args.method}: {len(scores)} features -> {args.out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    _need(args.features, args.labels)
    store = read_store(args.features)
    labels = _labels(args.labels, args.task_kind)
    report = ablation(store, labels, _params(args), _fractions(args.fractions), args.seed, args.jobs)
    _write_json(args.out, report.to_dict())
    if args.svg:
        scores = {r["name"]: (r["metric"] if r["metric"] is not None else 0.0) for r in report.rows}
        Path(args.svg).write_text(emit_bar_svg(scores, f"ablation ({report.metric_name})"))
    for r in report.rows:
        value = "failed" if r["metric"] is None else f"{r['metric']:.4f}"
        print(f"{r['name']:<26} {r['n_features']:>3} features  {value}")
    return EXIT_OK


# parser


def _add_params(p):
    g = p.add_argument_group("boosting")
    g.add_argument("--n-trees", type=int)
    g.add_argument("--max-depth", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--reg-lambda", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--min-child-weight", type=float)
    g.add_argument("--subsample", type=float)
    g.add_argument("--colsample", type=float)
    p.add_argument("--fractions", default="0.8,0.1,0.1", help="train,validation,test")
    p.add_argument("--task-kind", choices=("multilabel", "multiclass"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--jobs", type=int, default=_extract.default_jobs(),
                        help="worker count (default: $TAGSCOPE_JOBS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tagscope", description="Interpretable music tagging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="audio -> feature store")
    p.add_argument("--audio", required=True)
    p.add_argument("--chords", help="TSV: track_id, chords (.lab path), key, vocal")
    p.add_argument("--midlevel", help="mid-level model JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-midlevel", parents=[common], help="fit the MFCC -> mid-level regressor")
    p.add_argument("--annotations", required=True)
    p.add_argument("--clips", required=True)
    p.add_argument("--ridge-lambda", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_midlevel)

    p = sub.add_parser("train", parents=[common], help="fit the boosted tagger")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True, help="label CSV, Jamendo TSV or genre directory")
    p.add_argument("--groups", help="comma list of feature groups to train on")
    p.add_argument("--out", required=True)
    _add_params(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="metrics on a split part")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--part", choices=("train", "validation", "test", "all"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", parents=[common], help="feature importance and SHAP")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels")
    p.add_argument("--method", choices=("weight", "gain", "permutation", "shap"), default="shap")
    p.add_argument("--track")
    p.add_argument("--label")
    p.add_argument("--part", choices=("train", "validation", "test", "all"), default="test")
    p.add_argument("--metric", choices=("macro_auc", "accuracy"))
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--max-instances", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("ablate", parents=[common], help="retrain on every feature-group subset")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    _add_params(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", parents=[common], help="write the seeded synthetic corpus")
    p.add_argument("out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.jobs < 1:
        print("tagscope: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_ARGS
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tagscope: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except NumericFailure as exc:
        print(f"tagscope: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TagscopeError as exc:
        print(f"tagscope: data error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"tagscope: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
