"""Command-line entry point: gen-synth, train, eval-labels, report."""
import argparse
import json
import logging
import sys
from pathlib import Path

from . import analysis, harness
from .data import read_synth_spec, write_synthetic
from .encoder import load_checkpoint
from .errors import ConfigError, DataError, NumericError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("adaptive_labels")


def cmd_gen_synth(args):
    spec = read_synth_spec(args.spec)
    ds, _ = write_synthetic(args.out, spec)
    print(f"wrote {len(ds)} samples, {ds.num_classes} classes to {args.out}")


def cmd_train(args):
    cfg = harness.parse_run_config(args.config)
    out = Path(args.out_dir or cfg.out_dir)
    records = harness.run(cfg, out)
    hierarchy = cfg.hierarchy
    if hierarchy is None and cfg.dataset_kind == "synth":
        hierarchy = str(Path(cfg.dataset_paths[0]) / "hierarchy.tsv")
    meta = json.loads((out / "run.json").read_text())
    meta["hierarchy"] = hierarchy
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n")
    for r in records:
        print(f"{r.method} seed={r.seed} best_acc={r.best_accuracy:.4f} auac={harness.auac(r):.4f}")


def cmd_eval_labels(args):
    try:
        _, table, names = load_checkpoint(args.checkpoint)
        tree = analysis.read_hierarchy(args.hierarchy)
    except OSError as exc:
        raise DataError(str(exc)) from None
    if table is None:
        raise DataError(f"{args.checkpoint}: checkpoint has no label table")
    record = harness.RunRecord("checkpoint", 0, [], table, names)
    score, taus, learned, mapped = harness.semantic_score(record, tree)
    lines = [f"correlation_score={score!r}"] + [f"tau_b[{n}]={t!r}" for n, t in taus.items()]
    print("\n".join(lines))
    newick = analysis.export_newick(analysis.average_linkage(learned, mapped))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        harness.write_score(out / "score.txt", score, taus)
        (out / "dendrogram.nwk").write_text(newick + "\n")
    else:
        print(newick)


def cmd_report(args):
    runs = Path(args.runs)
    records = harness.load_records(runs)
    if not records:
        raise DataError(f"no run records under {runs}")
    tree = None
    hierarchy = args.hierarchy
    if hierarchy is None:
        for meta_path in sorted(runs.rglob("run.json")):
            hierarchy = json.loads(meta_path.read_text()).get("hierarchy")
            if hierarchy:
                break
    if hierarchy:
        try:
            tree = analysis.read_hierarchy(hierarchy)
        except OSError as exc:
            raise DataError(str(exc)) from None
    text = harness.format_report(harness.summarize(records, tree))
    (runs / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")


def build_parser():
    parser = argparse.ArgumentParser(prog="adaptive-labels", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic hierarchical dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train every configured seed")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None, help="override out_dir from the config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-labels", help="score a checkpoint's label table against a hierarchy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval_labels)

    p = sub.add_parser("report", help="summarize run records under a directory")
    p.add_argument("--runs", required=True)
    p.add_argument("--hierarchy", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
