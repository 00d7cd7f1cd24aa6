"""``evtmatch`` command line.

Exit codes: 0 success, 2 input validation, 3 numerical failure, 4 usage.
Run settings come from ``--config`` (a JSON object, see ``RunConfig``) and
are overridden by explicit flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, io, pipeline
from .metrics import REPORT_FORMAT
from .pipeline import CONFIG_FORMAT, RunConfig
from .sgfilter import derive_kernel
from .trainer import TrainConfig, TrainingDiverged

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_USAGE = 0, 2, 3, 4

log = logging.getLogger("evtmatch")


class UsageError(Exception):
    pass


class _VersionAction(argparse.Action):
    def __init__(self, option_strings, dest, **kw):
        super().__init__(option_strings, dest, nargs=0, help="print package and file-format versions")

    def __call__(self, parser, namespace, values, option_string=None):
        print(_version_text())
        parser.exit(EXIT_OK)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _version_text() -> str:
    return "\n".join(
        [
            f"evtmatch {__version__}",
            f"features: {io.FEATURE_FORMAT}",
            f"dataset: {io.DATASET_FORMAT}",
            f"params: {io.PARAMS_FORMAT}",
            f"config: {CONFIG_FORMAT}",
            f"report: {REPORT_FORMAT}",
        ]
    )


# -------------------------------------------------------------- run config

_RUN_FLAGS = {
    "sigma": float,
    "alpha": float,
    "halo_width": int,
    "smoothing": str,
    "sg_half_window": int,
    "sg_order": int,
    "window_convention": str,
    "smooth_window": int,
    "edge_mode": str,
    "squash": str,
    "temperature": float,
    "aggregation": str,
    "merge_gap": int,
    "min_duration": float,
    "fallback": str,
    "highlight_count": int,
    "seed": int,
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="JSON run config file")
    for name, typ in _RUN_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    g.add_argument("--layer-mask", default=None, help="comma-separated 0/1 per layer")
    g.add_argument("--threads", type=int, default=1)


def _run_config(args) -> RunConfig:
    cfg = pipeline.load_config(args.config) if args.config else RunConfig()
    over = {k: getattr(args, k) for k in _RUN_FLAGS if getattr(args, k) is not None}
    if args.layer_mask is not None:
        over["layer_mask"] = tuple(bool(int(x)) for x in args.layer_mask.split(","))
    return replace(cfg, **over)


def _load(args):
    records = io.ingest(args.data)
    params = io.load_params(args.params) if args.params else None
    return records, params


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


# -------------------------------------------------------------- commands


def cmd_sg_kernel(args) -> int:
    k = args.half_window if args.window_convention == "half" else args.half_window // 2
    if args.window_convention == "full" and args.half_window % 2 == 0:
        raise ValueError("a full window length must be odd")
    kern = derive_kernel(k, args.poly_order)
    for c in kern.coefficients:
        print(f"{c:.17g}")
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    from .synth import ACCEPTANCE_SCENARIO, ACCEPTANCE_SIGMA, generate

    sc = replace(
        ACCEPTANCE_SCENARIO,
        **{
            k: getattr(args, k)
            for k in ("num_videos", "fps", "num_layers", "dim", "num_queries", "noise", "boundary_strength", "distractor_rate", "seed")
            if getattr(args, k) is not None
        },
    )
    suite = generate(sc)
    out = args.out
    (out / "features").mkdir(parents=True, exist_ok=True)
    rows = []
    for v in suite.videos:
        ref = f"features/{v.video_id}.emgf"
        io.write_features(out / ref, v.stack)
        rows.append(
            io.DatasetRecord(
                video_id=v.video_id,
                query_id=v.query_id,
                fps=v.fps,
                num_frames=v.num_frames,
                gt_segments=(tuple(v.gt.as_list()),),
                features_ref=ref,
                saliency=v.saliency,
            )
        )
    io.write_jsonl(out / "dataset.jsonl", rows)
    io.save_params(out / "oracle_params.json", suite.oracle_params())
    cfg = {"format": CONFIG_FORMAT, "squash": "shifted", "sigma": ACCEPTANCE_SIGMA}
    (out / "config.json").write_text(json.dumps(cfg, indent=1) + "\n", encoding="utf-8")
    log.info("wrote %d videos to %s", len(rows), out)
    return EXIT_OK


def cmd_train_toy(args) -> int:
    from .trainer import examples_from_records, train_examples

    records = io.ingest(args.data)
    if any(r.scores is not None for r in records):
        raise ValueError("train-toy needs feature records (features_ref), not inline scores")
    over = {
        k: getattr(args, k)
        for k in ("learning_rate", "epochs", "squash", "temperature", "alpha", "halo", "aggregation", "init_scale", "seed")
        if getattr(args, k) is not None
    }
    cfg = TrainConfig(**over)
    res = train_examples(examples_from_records(records, cfg), cfg)
    io.save_params(args.out_params, res.params)
    if args.loss_csv:
        io.write_loss_csv(args.loss_csv, res.losses)
    print(f"initial loss {res.losses[0]!r}")
    print(f"final loss {res.losses[-1]!r}")
    return EXIT_OK


def cmd_smooth(args) -> int:
    cfg = _run_config(args)
    records, params = _load(args)
    lines = []
    for r in records:
        track = pipeline.process_track(pipeline.raw_track(r, cfg, params), cfg)
        lines.append(json.dumps({"video_id": r.video_id, "query_id": r.query_id, "scores": track.scores.tolist()}) + "\n")
    _emit("".join(lines), args.out)
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _run_config(args)
    records, params = _load(args)
    res = pipeline.run_pipeline(records, cfg, params, args.threads)
    _emit(res.predictions_jsonl(), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    records, params = _load(args)
    res = pipeline.run_pipeline(records, cfg, params, args.threads)
    if args.predictions:
        args.predictions.write_text(res.predictions_jsonl(), encoding="utf-8")
    if args.out:
        args.out.write_text(res.report.to_json(), encoding="utf-8")
    print(res.report.to_table())
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _run_config(args)
    records, params = _load(args)
    res = pipeline.run_pipeline(records, cfg, params, args.threads)
    parts = ["# taxonomy\n", analysis.taxonomy_report(res.records).to_csv()]
    edges = [float(x) for x in args.bucket_edges.split(",")] if args.bucket_edges else analysis.DEFAULT_BUCKET_EDGES
    parts += ["# length buckets\n", analysis.buckets_to_csv(analysis.length_bucketed_miou(res.records, edges))]
    _emit("".join(parts), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    records, params = _load(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise UsageError("--values needs at least one entry")
    train_cfg = TrainConfig(epochs=args.train_epochs) if args.axis == "alpha" and args.retrain else None
    rows = pipeline.sweep(records, args.axis, values, cfg, params, args.threads, train_cfg)
    _emit(pipeline.sweep_to_csv(args.axis, rows), args.out)
    return EXIT_OK


# -------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evtmatch", description="Event-token temporal grounding toolkit.")
    p.add_argument("--version", action=_VersionAction)
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("sg-kernel", help="print Savitzky-Golay smoothing coefficients")
    s.add_argument("--half-window", type=int, required=True, help="k (or the full window with --window-convention full)")
    s.add_argument("--poly-order", type=int, default=2)
    s.add_argument("--window-convention", choices=("half", "full"), default="half")
    s.set_defaults(func=cmd_sg_kernel)

    s = sub.add_parser("gen-synth", help="write a synthetic feature dataset")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--num-videos", type=int)
    s.add_argument("--fps", type=float)
    s.add_argument("--num-layers", type=int)
    s.add_argument("--dim", type=int)
    s.add_argument("--num-queries", type=int)
    s.add_argument("--noise", type=float)
    s.add_argument("--boundary-strength", type=float)
    s.add_argument("--distractor-rate", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_gen_synth)

    s = sub.add_parser("train-toy", help="fit projectors and event embeddings")
    s.add_argument("--data", type=Path, required=True)
    s.add_argument("--out-params", type=Path, required=True)
    s.add_argument("--loss-csv", type=Path)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--squash", choices=("softmax", "shifted"))
    s.add_argument("--temperature", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--halo", type=int)
    s.add_argument("--aggregation", choices=("average", "max", "median"))
    s.add_argument("--init-scale", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train_toy)

    for name, func, text in (
        ("smooth", cmd_smooth, "write squashed and smoothed score tracks"),
        ("extract", cmd_extract, "write predicted segments as JSON Lines"),
        ("eval", cmd_eval, "run the pipeline and report metrics"),
        ("analyze", cmd_analyze, "error taxonomy and length-bucketed mIoU"),
        ("sweep", cmd_sweep, "one pipeline run per value of a hyperparameter"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("--data", type=Path, required=True, help="JSON Lines dataset")
        s.add_argument("--params", type=Path, help="matching parameters (needed for feature records)")
        s.add_argument("--out", type=Path)
        _add_run_flags(s)
        s.set_defaults(func=func)
        if name == "eval":
            s.add_argument("--predictions", type=Path)
        if name == "analyze":
            s.add_argument("--bucket-edges", help="comma-separated duration edges in seconds, e.g. 0,5,10,inf")
        if name == "sweep":
            s.add_argument("--axis", choices=pipeline.SWEEP_AXES, required=True)
            s.add_argument("--values", required=True, help="comma-separated axis values")
            s.add_argument("--retrain", action="store_true", help="retrain the head per alpha value")
            s.add_argument("--train-epochs", type=int, default=150)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"evtmatch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"evtmatch: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"evtmatch: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
