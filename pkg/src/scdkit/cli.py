"""Batch command-line entry points.

Subcommands: simulate, label, train, infer, eval, inspect-weights.
Data goes to stdout (or files under --out); diagnostics go to stderr.
Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .annotations import ChangePoints, derive_change_points, dump_rttm, load_rttm
from .config import RunConfig, default_config_json
from .detection import DetectionConfig, detect_change_points, points_to_csv
from .errors import ConfigError, ScdError, ValidationError
from .labeling import FrameGrid, fuzzy_labels, labels_to_csv
from .metrics import aggregate, evaluate_annotation
from .model import FrameClassifier, ModelConfig, load_checkpoint, save_checkpoint
from .simulator import Dialogue, read_features, simulate_corpus, write_features
from .training import train as run_training

MANIFEST_NAME = "manifest.txt"


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _load_run_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def _read_manifest(path: Path) -> list[str]:
    stems = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    return [s for s in stems if s]


def _load_dialogue(folder: Path, stem: str) -> Dialogue:
    stack = read_features(folder / f"{stem}.scdf")
    annotation = load_rttm(folder / f"{stem}.rttm")
    grid = FrameGrid(num_frames=stack.num_frames, frame_rate=stack.frame_rate)
    return Dialogue(stack=stack, annotation=annotation, grid=grid)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dialogues = simulate_corpus(config.simulate, args.count)
    stems = []
    for i, dlg in enumerate(dialogues):
        stem = f"dlg{i:04d}"
        write_features(dlg.stack, out / f"{stem}.scdf")
        dump_rttm(dlg.annotation, out / f"{stem}.rttm", file_id=stem)
        stems.append(stem)
    manifest = out / MANIFEST_NAME
    manifest.write_text("".join(s + "\n" for s in stems), encoding="utf-8")
    _log(f"wrote {len(stems)} dialogues to {out}")
    print(manifest)
    return 0


def cmd_label(args, config: RunConfig) -> int:
    annotation = load_rttm(args.rttm)
    rate = args.frame_rate or config.simulate.frame_rate
    duration = args.duration or annotation.extent.end
    num_frames = int(np.ceil(duration * rate))
    if num_frames < 1:
        raise ValidationError("annotation covers no frames at this rate")
    grid = FrameGrid(num_frames=num_frames, frame_rate=rate)
    points = derive_change_points(annotation)
    sys.stdout.write(labels_to_csv(fuzzy_labels(points, grid)))
    return 0


def cmd_train(args, config: RunConfig) -> int:
    if args.alpha is not None:
        if args.alpha < 0:
            raise ConfigError(f"--alpha must be non-negative, got {args.alpha}")
        config = dataclasses.replace(
            config, loss=dataclasses.replace(config.loss, alpha=args.alpha)
        )
    manifest = Path(args.manifest)
    folder = manifest.parent
    stems = _read_manifest(manifest)
    if not stems:
        raise ValidationError(f"manifest {manifest} lists no dialogues")
    dialogues = [_load_dialogue(folder, stem) for stem in stems]
    first = dialogues[0].stack
    model = FrameClassifier(
        ModelConfig(
            num_input_layers=first.num_layers,
            input_dim=first.dim,
            hidden_dim=config.model.hidden_dim,
            num_blocks=config.model.num_blocks,
            kernel_size=config.model.kernel_size,
        ),
        seed=config.train.seed,
    )
    result = run_training(
        model,
        dialogues,
        config=config.train,
        loss_config=config.loss,
        detection=config.detect,
        log_fn=_log,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / "checkpoint.scdn"
    save_checkpoint(model, checkpoint)
    log_path = out / "training_log.json"
    log_path.write_text(
        json.dumps(
            {
                "epochs": [r.to_dict() for r in result.log],
                "best_epoch": result.best_epoch,
                "best_val_f1": result.best_f1,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    _log(f"best validation F1 {result.best_f1} at epoch {result.best_epoch}")
    print(checkpoint)
    return 0


def cmd_infer(args, config: RunConfig) -> int:
    model = load_checkpoint(args.checkpoint)
    detect = config.detect
    if args.threshold is not None:
        detect = DetectionConfig(threshold=args.threshold, min_gap=detect.min_gap)
    rows = []
    for feature_path in args.features:
        path = Path(feature_path)
        stack = read_features(path)
        grid = FrameGrid(num_frames=stack.num_frames, frame_rate=stack.frame_rate)
        probs = model.predict(stack.layers)
        rows.append((path.stem, detect_change_points(probs, grid, detect)))
    sys.stdout.write(points_to_csv(rows))
    return 0


def _read_hypothesis_csv(path: Path) -> dict[str, list[float]]:
    by_file: dict[str, list[float]] = {}
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line == "file_id,time_seconds":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValidationError(f"{path}:{i}: expected 'file_id,time_seconds'")
        try:
            t = float(parts[1])
        except ValueError as exc:
            raise ValidationError(f"{path}:{i}: bad time {parts[1]!r}") from exc
        by_file.setdefault(parts[0], []).append(t)
    return by_file


def cmd_eval(args, config: RunConfig) -> int:
    hyp = _read_hypothesis_csv(Path(args.hypothesis))
    ref_dir = Path(args.reference)
    ref_ids = sorted(p.stem for p in ref_dir.glob("*.rttm"))
    if not ref_ids:
        raise ValidationError(f"no reference RTTM files under {ref_dir}")
    missing = sorted(set(hyp) - set(ref_ids))
    if missing:
        raise ValidationError(
            "hypothesis names files with no reference: " + ", ".join(missing)
        )
    per_file = []
    reports = []
    for file_id in ref_ids:
        annotation = load_rttm(ref_dir / f"{file_id}.rttm")
        times = tuple(sorted(hyp.get(file_id, [])))
        report = evaluate_annotation(annotation, ChangePoints(times))
        reports.append(report)
        per_file.append({"file_id": file_id, **report.to_dict()})
    overall = aggregate(reports)
    print(json.dumps({**overall.to_dict(), "files": per_file}, indent=2))
    return 0


def cmd_inspect_weights(args, config: RunConfig) -> int:
    model = load_checkpoint(args.checkpoint)
    weights = model.fusion_weights()
    bypassed = model.config.num_input_layers == 1
    for i, w in enumerate(weights):
        _log(f"layer {i}: {w:.6f}")
    if bypassed:
        _log("fusion bypassed: single-layer checkpoint")
    print(
        json.dumps(
            {
                "num_layers": model.config.num_input_layers,
                "weights": [float(w) for w in weights],
                "argmax": int(np.argmax(weights)),
                "fusion_bypassed": bypassed,
            },
            indent=2,
        )
    )
    return 0


def cmd_default_config(args, config: RunConfig) -> int:
    sys.stdout.write(default_config_json())
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scdkit",
        description="Speaker-change detection on synthetic feature stacks.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override simulate/train seeds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=10, help="number of dialogues")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("label", parents=[common],
                       help="fuzzy frame labels for an RTTM, as CSV")
    p.add_argument("--rttm", required=True)
    p.add_argument("--frame-rate", type=float, default=None)
    p.add_argument("--duration", type=float, default=None,
                   help="override the labeled extent in seconds")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", parents=[common], help="train a classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint/log directory")
    p.add_argument("--alpha", type=float, default=None,
                   help="override the contrastive weight (0 disables it)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common],
                       help="detect change points, CSV to stdout")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("features", nargs="+", help="feature files (.scdf)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[common],
                       help="score hypothesis CSV against reference RTTMs")
    p.add_argument("--hypothesis", required=True, help="CSV from `infer`")
    p.add_argument("--reference", required=True, help="directory of .rttm files")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect-weights", parents=[common],
                       help="fusion weight table for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_inspect_weights)

    p = sub.add_parser("default-config", parents=[common],
                       help="print the full default run configuration")
    p.set_defaults(func=cmd_default_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_run_config(args)
    except (ConfigError, OSError) as exc:
        _log(f"config error: {exc}")
        return 2
    try:
        return args.func(args, config)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return 2
    except (ScdError, OSError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
