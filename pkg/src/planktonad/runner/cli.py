"""Command-line entry point: ``planktonad <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from planktonad.autoencoder import build_model, load_checkpoint, train
from planktonad.errors import PipelineError
from planktonad.runner.config import load_config
from planktonad.runner.pipeline import (
    Combination,
    grid_root,
    load_grid_result,
    prepare_data,
    run_experiment,
    run_grid,
    write_ranking,
)
from planktonad.runner.plots import render_plots
from planktonad.runner.tables import TableStyle, export_tables

logger = logging.getLogger("planktonad")


def _overrides(args) -> dict:
    doc: dict = {}
    if args.species is not None:
        doc.setdefault("dataset", {})["species"] = args.species
    if args.seed is not None:
        doc["split"] = {"seed": args.seed}
        doc["training"] = {"seed": args.seed}
    if args.out is not None:
        doc["output"] = {"dir": args.out}
    if getattr(args, "parallel", None) is not None:
        doc.setdefault("output", {})["parallel"] = args.parallel
    return doc


def _config(args):
    return load_config(args.config, overrides=_overrides(args))


def cmd_prepare_data(args) -> int:
    config = _config(args)
    data = prepare_data(config)
    root = grid_root(config)
    root.mkdir(parents=True, exist_ok=True)
    data.split.save(root / "split.json")
    counts = {"train": len(data.split.train), "validation": len(data.split.validation),
              "test": len(data.split.test), "input_shape": list(data.input_shape)}
    print(json.dumps({"split": str(root / "split.json"), **counts}))
    return 0


def cmd_train(args) -> int:
    config = _config(args)
    data = prepare_data(config)
    root = grid_root(config)
    for core in config.cores:
        for pair in config.conv_pairs:
            model_dir = root / "models" / f"{pair.value}-{core.value}"
            if args.resume and (model_dir / "model.json").exists():
                print(f"{model_dir} exists, skipped")
                continue
            spec = build_model(core, pair, data.input_shape, config.latent)
            model = train(spec, data.split, data.images, config.training_config(), labels=data.labels)
            model.save(model_dir)
            print(f"{spec.name}: {len(model.training_log)} epochs, final loss {model.training_log[-1]:.6f}, "
                  f"saved to {model_dir}")
    return 0


def cmd_run(args) -> int:
    config = _config(args)
    report = run_experiment(config, resume=args.resume)
    print(report.display())
    if not args.no_plots:
        cell = grid_root(config) / Combination.parse(report.combination_id).dirname
        _plot_cell(config, cell, args.samples)
    return 0


def cmd_grid(args) -> int:
    config = _config(args)
    result = run_grid(config, resume=args.resume)
    root = grid_root(config)
    write_ranking(result, root / "ranking.csv")
    print(f"grid {result.grid_id}: {len(result.reports)} done, {len(result.failed())} failed, "
          f"{result.trainings} trainings")
    for report in result.ranking()[:10]:
        print(report.display())
    return 1 if result.failed() and not result.reports else 0


def cmd_report(args) -> int:
    config = _config(args)
    roots = [Path(p) for p in args.grid] if args.grid else [grid_root(config)]
    results = [load_grid_result(r) for r in roots]
    styles = [TableStyle(args.style)] if args.style else [s for s in TableStyle if s is not TableStyle.per_species]
    if len(results) > 1 and not args.style:
        styles.append(TableStyle.per_species)
    fixed = {k: v for k, v in (("core", args.core), ("conv_pair", args.conv_pair), ("extractor", args.extractor),
                               ("classifier", args.classifier), ("combination", args.combination)) if v}
    out = Path(args.tables_dir) if args.tables_dir else roots[0] / "tables"
    for style in styles:
        for table in export_tables(results if style is TableStyle.per_species else results, style, out, fixed):
            print(table.to_text())
            print(f"-> {table.path}\n")
    return 0


def _plot_cell(config, cell: Path, n_samples: int) -> None:
    meta = json.loads((cell / "checkpoint.json").read_text(encoding="utf-8"))
    model = load_checkpoint((cell / meta["path"]).resolve())
    samples = {}
    if n_samples > 0:
        data = prepare_data(config)
        test = data.split.test
        oks = [i for i, lab in test if lab.value == "OK"][:(n_samples + 1) // 2]
        noks = [i for i, lab in test if lab.value == "NOK"][:n_samples // 2]
        samples = {i: data.images[i] for i in oks + noks}
    for artifact in render_plots(cell, model, samples):
        print(artifact.path)


def cmd_plot(args) -> int:
    config = _config(args)
    root = grid_root(config)
    combination = args.combination or load_grid_result(root).best().combination_id
    _plot_cell(config, root / Combination.parse(combination).dirname, args.samples)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--species", help="species name or 'all'")
    common.add_argument("--seed", type=int, help="seed for the split and training")
    common.add_argument("--out", help="output directory")
    common.add_argument("--resume", action="store_true", help="skip completed work")
    common.add_argument("--parallel", type=int, help="concurrent model trainings in the grid")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="planktonad", description="Autoencoder-based plankton anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare-data", parents=[common], help="build and save the dataset split")
    sub.add_parser("train", parents=[common], help="train the configured autoencoders")
    p = sub.add_parser("run", parents=[common], help="run one fixed combination end to end")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--samples", type=int, default=2, help="reconstruction panels to draw")
    sub.add_parser("grid", parents=[common], help="run every configured combination")
    p = sub.add_parser("report", parents=[common], help="export result tables of finished grids")
    p.add_argument("--style", choices=[s.value for s in TableStyle])
    p.add_argument("--grid", action="append", help="grid directory (repeat for per-species tables)")
    p.add_argument("--core")
    p.add_argument("--conv-pair")
    p.add_argument("--extractor")
    p.add_argument("--classifier")
    p.add_argument("--combination")
    p.add_argument("--tables-dir")
    p = sub.add_parser("plot", parents=[common], help="render ROC, feature-space and panel plots")
    p.add_argument("--combination", help="combination id (default: best of the grid)")
    p.add_argument("--samples", type=int, default=2)
    return parser


COMMANDS = {"prepare-data": cmd_prepare_data, "train": cmd_train, "run": cmd_run, "grid": cmd_grid,
            "report": cmd_report, "plot": cmd_plot}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
