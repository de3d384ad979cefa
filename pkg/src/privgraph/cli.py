"""Command-line entry point for the full workflow.

Subcommands: synth, validate, prior, train, ablate-prior,
ablate-features, gradcheck. Options come from an optional JSON config
file plus ``--flag`` overrides (flags win). Exit codes: 0 success,
2 usage/config error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import warnings

import numpy as np

from .corpus import (DEFAULT_K, DEFAULT_MAX_OBJECTS, SYNTH_RULES, Corpus,
                     load_corpus, synth_corpus, write_corpus)
from .errors import ConfigError, DataError, NumericError
from .metrics import (EvalReport, evaluate, format_report_table,
                      random_baseline, write_reports_csv, write_reports_json)
from .model import PARAM_ORDER, save_checkpoint
from .prior import build_prior, save_prior
from .training import (TrainConfig, gradient_check, predict_labels, train,
                       write_log_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# keys accepted in a JSON config file
_CONFIG_KEYS = {
    "corpus", "output_dir", "k", "max_objects",
    "epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_eps",
    "n_folds", "test_fraction", "seed", "rounds", "hidden_units", "attn_dim",
    "prior_kind", "loss_reduction", "use_scene", "use_cardinality",
}

# Table row labels for the prior ablation, mapped to builder kinds.
PRIOR_ABLATION_ROWS = (
    ("uniform", "uniform"),
    ("random", "random"),
    ("ones", "ones"),
    ("class", "class_freq"),
    ("co-occurrence", "cooccurrence"),
)

FEATURE_ABLATION_ROWS = (
    ("scene", True, False),
    ("cardinality", False, True),
    ("scene+cardinality", True, True),
)


def _load_config_file(path) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _merged_options(args: argparse.Namespace) -> dict:
    """Config-file values overridden by any flag the user actually set."""
    options: dict = {}
    if getattr(args, "config", None):
        options.update(_load_config_file(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def _train_config(options: dict) -> TrainConfig:
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    cfg = TrainConfig(**{k: v for k, v in options.items() if k in fields})
    cfg.validate()
    return cfg


def _require_corpus(options: dict) -> Corpus:
    path = options.get("corpus")
    if not path:
        raise ConfigError("a corpus path is required (config key 'corpus' "
                          "or --corpus)")
    if not os.path.isfile(path):
        raise ConfigError(f"corpus file not found: {path}")
    return load_corpus(path, k=int(options.get("k", DEFAULT_K)),
                       max_objects=int(options.get("max_objects",
                                                   DEFAULT_MAX_OBJECTS)))


def _prepare_output_dir(options: dict, overwrite: bool) -> str:
    out = options.get("output_dir")
    if not out:
        raise ConfigError("an output directory is required (config key "
                          "'output_dir' or --output-dir)")
    if os.path.isdir(out) and os.listdir(out) and not overwrite:
        raise ConfigError(f"output dir {out} is not empty; pass --overwrite")
    os.makedirs(out, exist_ok=True)
    return out


def _best_fold(result) -> int:
    best_uf1 = [max((e.val_uf1 for e in result.log if e.fold == f),
                    default=float("-inf"))
                for f in range(len(result.checkpoints))]
    return int(np.argmax(best_uf1))


def _test_report(corpus: Corpus, result, cfg: TrainConfig) -> EvalReport | None:
    if not result.split.test_ids:
        return None
    fold = _best_fold(result)
    test_records = corpus.subset(result.split.test_ids).records
    preds = predict_labels(test_records, result.priors[fold],
                           result.checkpoints[fold],
                           use_scene=cfg.use_scene,
                           use_cardinality=cfg.use_cardinality)
    return evaluate(preds, [r.label for r in test_records])


def run_prior_ablation(corpus: Corpus, cfg: TrainConfig,
                       ) -> list[tuple[str, EvalReport]]:
    """Train/evaluate once per prior kind on a shared test split, plus the
    random-generator baseline row."""
    if cfg.test_fraction <= 0:
        raise ConfigError("prior ablation needs test_fraction > 0")
    rows: list[tuple[str, EvalReport]] = []
    test_labels = None
    for label, kind in PRIOR_ABLATION_ROWS:
        run_cfg = dataclasses.replace(cfg, prior_kind=kind)
        result = train(corpus, run_cfg)
        report = _test_report(corpus, result, run_cfg)
        if test_labels is None:
            test_labels = [r.label
                           for r in corpus.subset(result.split.test_ids).records]
        rows.append((label, report))
    baseline = random_baseline(test_labels, seed=cfg.seed)
    return [("random-generator", baseline)] + rows


def run_feature_ablation(corpus: Corpus, cfg: TrainConfig,
                         ) -> list[tuple[str, EvalReport]]:
    """Train/evaluate once per feature subset on a shared test split."""
    if cfg.test_fraction <= 0:
        raise ConfigError("feature ablation needs test_fraction > 0")
    rows: list[tuple[str, EvalReport]] = []
    for label, use_scene, use_cardinality in FEATURE_ABLATION_ROWS:
        run_cfg = dataclasses.replace(cfg, use_scene=use_scene,
                                      use_cardinality=use_cardinality)
        result = train(corpus, run_cfg)
        rows.append((label, _test_report(corpus, result, run_cfg)))
    return rows


# -- commands ----------------------------------------------------------------

def _cmd_synth(args) -> int:
    corpus = synth_corpus(args.n, args.k or DEFAULT_K, rule=args.rule,
                          seed=args.seed or 0)
    write_corpus(corpus, args.out)
    labels = corpus.labels()
    print(f"wrote {len(corpus)} records to {args.out} "
          f"({int(labels.sum())} private / {int((1 - labels).sum())} public)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    options = _merged_options(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        corpus = _require_corpus(options)
    for w in caught:
        print(f"warning: {w.message}")
    labels = corpus.labels()
    print(f"OK: {len(corpus)} records, K={corpus.k}, "
          f"{int(labels.sum())} private / {int((1 - labels).sum())} public, "
          f"{len(caught)} warning(s)")
    return EXIT_OK


def _cmd_prior(args) -> int:
    options = _merged_options(args)
    corpus = _require_corpus(options)
    prior = build_prior(args.kind, corpus, seed=int(options.get("seed", 0)))
    save_prior(prior, args.out)
    print(f"wrote {prior.kind} prior ({prior.n_nodes}x{prior.n_nodes}) "
          f"to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    options = _merged_options(args)
    corpus = _require_corpus(options)
    cfg = _train_config(options)
    out = _prepare_output_dir(options, args.overwrite)
    result = train(corpus, cfg)
    for fold, (params, prior) in enumerate(zip(result.checkpoints,
                                               result.priors)):
        save_checkpoint(params, os.path.join(out, f"fold{fold}_best.json"))
        save_prior(prior, os.path.join(out, f"fold{fold}_prior.json"))
    write_log_csv(result.log, os.path.join(out, "train_log.csv"))
    with open(os.path.join(out, "split.json"), "w", encoding="utf-8") as fh:
        json.dump(result.split.to_json(), fh)
        fh.write("\n")
    rows = []
    for fold, (train_ids, val_ids) in enumerate(result.split.folds):
        val_records = corpus.subset(val_ids).records
        preds = predict_labels(val_records, result.priors[fold],
                               result.checkpoints[fold],
                               use_scene=cfg.use_scene,
                               use_cardinality=cfg.use_cardinality)
        rows.append((f"fold{fold}_val",
                     evaluate(preds, [r.label for r in val_records])))
    test_report = _test_report(corpus, result, cfg)
    if test_report is not None:
        rows.append(("test", test_report))
    write_reports_csv(rows, os.path.join(out, "reports.csv"))
    write_reports_json(rows, os.path.join(out, "reports.json"))
    table = format_report_table(rows)
    with open(os.path.join(out, "reports.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    print(f"artifacts written to {out}")
    return EXIT_OK


def _run_ablation(args, runner, stem: str) -> int:
    options = _merged_options(args)
    corpus = _require_corpus(options)
    if "test_fraction" not in options:
        options["test_fraction"] = 0.2
    cfg = _train_config(options)
    out = _prepare_output_dir(options, args.overwrite)
    rows = runner(corpus, cfg)
    write_reports_csv(rows, os.path.join(out, f"{stem}.csv"))
    table = format_report_table(rows)
    with open(os.path.join(out, f"{stem}.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    return EXIT_OK


def _cmd_ablate_prior(args) -> int:
    return _run_ablation(args, run_prior_ablation, "prior_ablation")


def _cmd_ablate_features(args) -> int:
    return _run_ablation(args, run_feature_ablation, "feature_ablation")


def _cmd_gradcheck(args) -> int:
    report = gradient_check(k=args.k or 3, rounds=args.rounds or 2,
                            batch=args.batch, seed=args.seed or 0,
                            eps=args.eps, tolerance=args.tolerance,
                            corrupt=args.corrupt)
    for name in PARAM_ORDER:
        print(f"{name:<14} max rel. error {report.per_tensor[name]:.3e}")
    print(f"worst tensor: {report.worst_tensor} "
          f"({report.max_rel_error:.3e}, tolerance {report.tolerance:.1e})")
    print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def _add_config_flags(p: argparse.ArgumentParser, train_flags: bool = True):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--corpus", help="corpus JSON Lines path")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--k", type=int, help="number of object categories")
    p.add_argument("--max-objects", dest="max_objects", type=int)
    p.add_argument("--seed", type=int)
    if train_flags:
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--n-folds", dest="n_folds", type=int)
        p.add_argument("--test-fraction", dest="test_fraction", type=float)
        p.add_argument("--rounds", type=int)
        p.add_argument("--hidden-units", dest="hidden_units", type=int)
        p.add_argument("--attn-dim", dest="attn_dim", type=int)
        p.add_argument("--prior-kind", dest="prior_kind")
        p.add_argument("--loss-reduction", dest="loss_reduction",
                       choices=("sum", "mean"))
        p.add_argument("--overwrite", action="store_true")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privgraph",
        description="Graph-based image privacy classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--rule", choices=SYNTH_RULES, default="scene_and_objects")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="validate a corpus file")
    p.add_argument("corpus_pos", nargs="?", help="corpus path")
    _add_config_flags(p, train_flags=False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("prior", help="build and export a prior matrix")
    p.add_argument("--kind", required=True,
                   choices=("cooccurrence", "class_freq", "uniform", "ones",
                            "random"))
    p.add_argument("--out", required=True)
    _add_config_flags(p, train_flags=False)
    p.set_defaults(func=_cmd_prior)

    p = sub.add_parser("train", help="k-fold training run")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("ablate-prior", help="compare prior initializations")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_ablate_prior)

    p = sub.add_parser("ablate-features", help="compare feature subsets")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_ablate_features)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--k", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--corrupt", help="test hook: perturb one tensor's "
                                     "analytic gradient")
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "corpus_pos", None) and not args.corpus:
        args.corpus = args.corpus_pos
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
