"""Command-line entry point.

Subcommands: make-dataset, train, predict, evaluate, probe, flow-viz,
inspect. Every flag has a documented default; unknown flags are errors. A
config file (INI, ``[train]`` section) can preset any training field; an
explicit command-line flag wins over the file, which wins over built-in
defaults. All documented error paths exit nonzero with a one-line
diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .data import (
    DatasetManifest,
    ManifestEntry,
    load_frame_folder,
    load_split,
    read_manifest,
    save_flow_files,
    save_frame_folder,
    write_manifest,
)
from .errors import DatasetError, FramecastError
from .evaluation import evaluate_dataset, representation_probe
from .flo import flow_to_color, read_flo
from .synthetic import direction_class, generate_moving_shapes, random_scene_spec
from .training import (
    Trainer,
    TrainingConfig,
    load_checkpoint,
    model_from_checkpoint,
    predict_multi,
    predict_next,
    save_checkpoint,
)

ABLATION_TOKENS = {
    "flow_off": {"flow_branch_on": False, "flow_gan_on": False},
    "frame_off": {"frame_branch_on": False, "frame_gan_on": False},
    "frame_gan_off": {"frame_gan_on": False},
    "flow_gan_off": {"flow_gan_on": False},
    "gan_off": {"frame_gan_on": False, "flow_gan_on": False},
    "mean_encoder": {"encoder_probabilistic_on": False},
}


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(p) for p in text.lower().split("x"))
        return h, w
    except ValueError as exc:
        raise DatasetError(f"size must look like 64x64, got {text!r}") from exc


def _parse_pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(p) for p in text.split(","))
        return a, b
    except ValueError as exc:
        raise DatasetError(f"expected two comma-separated integers, got {text!r}") from exc


# --------------------------------------------------------------- make-dataset
def cmd_make_dataset(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.txt"
    if args.append and manifest_path.exists():
        manifest = read_manifest(manifest_path)
    else:
        manifest = DatasetManifest(root=out)
    start_index = len(manifest.entries)
    rng = np.random.default_rng(args.seed)
    velocity = _parse_pair(args.velocity) if args.velocity else None
    size = _parse_size(args.size)
    for i in range(args.sequences):
        spec = random_scene_spec(
            rng,
            canvas_size=size,
            num_frames=args.frames,
            num_shapes=args.shapes,
            velocity=velocity,
            speed=args.speed,
            global_motion=not args.independent,
        )
        frames, flows = generate_moving_shapes(spec, seed=args.seed + i)
        name = f"seq_{start_index + i:04d}"
        seq_dir = out / name
        save_frame_folder(frames, seq_dir)
        if not args.no_flows:
            save_flow_files(flows, seq_dir)
        label = direction_class(spec.background_velocity) if not args.independent else None
        manifest.entries.append(ManifestEntry(path=name, split=args.split, label=label))
    write_manifest(manifest, manifest_path)
    print(f"wrote {args.sequences} sequences under {out} (manifest: {manifest_path})")
    return 0


# ---------------------------------------------------------------------- train
_CONFIG_FLAGS = {
    # CLI flag dest -> TrainingConfig field
    "steps": "steps",
    "width": "width",
    "window": "window",
    "lambda_": "lambda_",
    "learning_rate": "learning_rate",
    "critic_steps": "critic_steps_per_gen_step",
    "clip_bound": "clip_bound",
    "batch_size": "batch_size",
    "seed": "seed",
    "checkpoint_interval": "checkpoint_interval",
}


def _read_config_file(path: str | None) -> dict:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise DatasetError(f"config file {path} does not exist or is unreadable")
    if "train" not in parser:
        return {}
    mapping = dict(parser["train"])
    if "lambda" in mapping:
        mapping["lambda_"] = mapping.pop("lambda")
    return mapping


def _merged_config(args, base: dict | None = None) -> TrainingConfig:
    merged = dict(base or {})
    merged.update(_read_config_file(args.config))
    for dest, field in _CONFIG_FLAGS.items():
        value = getattr(args, dest)
        if value is not None:
            merged[field] = value
    if args.deterministic is not None:
        merged["deterministic"] = args.deterministic
    for token in args.ablation or []:
        if token not in ABLATION_TOKENS:
            raise DatasetError(f"unknown ablation token {token!r}; known: {sorted(ABLATION_TOKENS)}")
        merged.update(ABLATION_TOKENS[token])
    return TrainingConfig.from_dict(merged)


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.txt"
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        config = _merged_config(args, base=ckpt["config"])
        ckpt["config"] = config.to_dict()
        manifest = read_manifest(args.manifest)
        records = load_split(manifest, args.split)
        trainer = Trainer.from_checkpoint(ckpt, records, log_path=log_path)
    else:
        config = _merged_config(args)
        manifest = read_manifest(args.manifest)
        records = load_split(manifest, args.split)
        if log_path.exists():
            log_path.unlink()
        trainer = Trainer(config, records, log_path=log_path)
    trainer.run(out_dir=out)
    last = trainer.log_lines[-1] if trainer.log_lines else "(no steps)"
    print(f"trained {trainer.cycles} cycles ({trainer.optimizer_steps} optimizer steps)")
    print(f"final: {last}")
    print(f"checkpoint: {out / 'checkpoint.pt'}")
    return 0


# -------------------------------------------------------------------- predict
def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    target_size = _parse_size(args.size) if args.size else None
    sequence = load_frame_folder(args.input, target_size=target_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .data import denormalize_frame
    from .flo import FlowField, write_flo

    if args.steps == 1:
        bundle = predict_next(ckpt, sequence, mode=args.mode)
        mode = bundle.default_mode() if args.mode == "default" else args.mode
        frames = bundle.prediction(mode)[0].numpy()[None]
        flows = None if bundle.flow_pred is None else bundle.flow_pred[0].numpy()[None]
    else:
        frames, flows = predict_multi(ckpt, sequence, args.steps, mode=args.mode)
    for h in range(frames.shape[0]):
        img8, _ = denormalize_frame(frames[h])
        Image.fromarray(img8.transpose(1, 2, 0)).save(out / f"pred_{h + 1:04d}.png")
        if flows is not None:
            flow = FlowField.from_array(flows[h])
            write_flo(flow, out / f"flow_{h + 1:04d}.flo")
            if args.flow_color:
                Image.fromarray(flow_to_color(flow)).save(out / f"flow_{h + 1:04d}.png")
    print(f"wrote {frames.shape[0]} prediction(s) to {out}")
    return 0


# ------------------------------------------------------------------- evaluate
def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    manifest = read_manifest(args.manifest)
    records = load_split(manifest, args.split)
    horizons = [int(h) for h in args.horizons.split(",")]
    report = evaluate_dataset(ckpt, records, horizons=horizons)
    print(report.to_text())
    if args.out:
        written = report.write(args.out)
        print(f"wrote {len(written)} report files to {args.out}")
    return 0


# ---------------------------------------------------------------------- probe
def cmd_probe(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    manifest = read_manifest(args.manifest)
    if args.split == "all":
        records = [r for tag in ("train", "val", "test") for r in
                   (load_split(manifest, tag) if manifest.split(tag) else [])]
    else:
        records = load_split(manifest, args.split)
    result = representation_probe(
        ckpt,
        records,
        seed=args.seed,
        heldout_fraction=args.heldout_fraction,
        compare_random=not args.no_random_baseline,
    )
    print(f"classes={result.num_classes} train={result.n_train} test={result.n_test}")
    print(f"trained-encoder probe accuracy: {result.trained_accuracy:.4f}")
    if result.random_accuracy is not None:
        print(f"random-encoder probe accuracy:  {result.random_accuracy:.4f}")
    return 0


# ------------------------------------------------------------------- flow-viz
def cmd_flow_viz(args) -> int:
    flow = read_flo(args.flo)
    image = flow_to_color(flow, max_magnitude=args.max_magnitude)
    Image.fromarray(image).save(args.out)
    print(f"wrote {args.out}")
    return 0


# -------------------------------------------------------------------- inspect
def cmd_inspect(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model, config = model_from_checkpoint(ckpt)
    print(f"checkpoint version {ckpt['version']}, cycles={ckpt['cycles']}, "
          f"optimizer_steps={ckpt['optimizer_steps']}")
    print("config:")
    for key, value in sorted(config.to_dict().items()):
        print(f"  {key} = {value}")
    print("parameter groups:")
    total = 0
    for group, module in model.parameter_groups().items():
        count = sum(p.numel() for p in module.parameters())
        total += count
        print(f"  {group}: {count} parameters")
        for name, p in module.named_parameters():
            print(f"    {group}.{name} {tuple(p.shape)}")
    for critic_name in ("frame_critic", "flow_critic"):
        state = ckpt.get(critic_name)
        if state is not None:
            count = sum(int(np.prod(t.shape)) for t in state.values())
            total += count
            print(f"  {critic_name}: {count} parameters")
            for name, t in state.items():
                print(f"    {critic_name}.{name} {tuple(t.shape)}")
    print(f"total parameters: {total}")
    return 0


# ----------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framecast",
        description="Train, run, and evaluate the dual frame/flow video predictor.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-dataset", help="render a synthetic moving-shapes dataset")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--seed", type=int, default=0, help="determinism seed (default 0)")
    p.add_argument("--sequences", type=int, default=1, help="number of sequences (default 1)")
    p.add_argument("--frames", type=int, default=6, help="frames per sequence (default 6)")
    p.add_argument("--size", default="64x64", help="canvas HxW, multiples of 8 (default 64x64)")
    p.add_argument("--shapes", type=int, default=2, help="shapes per scene (default 2)")
    p.add_argument("--velocity", default=None, help="pin scene velocity 'vx,vy' in px/frame")
    p.add_argument("--speed", type=int, default=2, help="speed for drawn directions (default 2)")
    p.add_argument("--independent", action="store_true",
                   help="shapes move independently over a static background (default: global motion)")
    p.add_argument("--split", default="train", choices=("train", "val", "test"),
                   help="split tag for the new entries (default train)")
    p.add_argument("--no-flows", action="store_true", help="skip writing ground-truth .flo files")
    p.add_argument("--append", action="store_true", help="extend an existing dataset/manifest")
    p.set_defaults(handler=cmd_make_dataset)

    p = sub.add_parser("train", help="train a model on a dataset manifest")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--out", required=True, help="output directory (checkpoints + log)")
    p.add_argument("--config", default=None, help="INI config file with a [train] section")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--split", default="train", help="manifest split to train on (default train)")
    p.add_argument("--steps", type=int, default=None, help="training cycles (default 2000)")
    p.add_argument("--width", type=int, default=None, help="network channel width (default 64)")
    p.add_argument("--window", type=int, default=None, help="input frames per prediction (default 4)")
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="GAN term weight (default 0.001)")
    p.add_argument("--learning-rate", type=float, default=None, help="RMSprop learning rate (default 0.0001)")
    p.add_argument("--critic-steps", type=int, default=None,
                   help="critic updates per generator update (default 5)")
    p.add_argument("--clip-bound", type=float, default=None, help="critic weight clip (default 0.01)")
    p.add_argument("--batch-size", type=int, default=None, help="sequences per step (default 1)")
    p.add_argument("--seed", type=int, default=None, help="determinism seed (default 0)")
    p.add_argument("--checkpoint-interval", type=int, default=None,
                   help="cycles between periodic checkpoints (default 500)")
    p.add_argument("--ablation", action="append", default=None, metavar="TOKEN",
                   help=f"ablation switch, repeatable; one of {sorted(ABLATION_TOKENS)}")
    det = p.add_mutually_exclusive_group()
    det.add_argument("--deterministic", dest="deterministic", action="store_true", default=None)
    det.add_argument("--no-deterministic", dest="deterministic", action="store_false", default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="predict future frames for a frame folder")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="folder of frames in lexicographic order")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", default="default", choices=("default", "fused", "frame_only", "flow_only"))
    p.add_argument("--steps", type=int, default=1, help="prediction horizon (default 1)")
    p.add_argument("--size", default=None, help="resize input frames to HxW first")
    p.add_argument("--flow-color", action="store_true", help="also write flow color images")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="run the metrics suite on a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", help="manifest split to evaluate (default test)")
    p.add_argument("--horizons", default="1", help="comma-separated horizons (default 1)")
    p.add_argument("--out", default=None, help="directory for metrics.txt/json and curve files")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("probe", help="linear motion-class probe on the frozen encoder")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="all", help="split with labeled sequences (default all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heldout-fraction", type=float, default=0.5)
    p.add_argument("--no-random-baseline", action="store_true")
    p.set_defaults(handler=cmd_probe)

    p = sub.add_parser("flow-viz", help="render a .flo file on the flow color wheel")
    p.add_argument("--flo", required=True)
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--max-magnitude", type=float, default=None,
                   help="saturation normalization (default: max observed)")
    p.set_defaults(handler=cmd_flow_viz)

    p = sub.add_parser("inspect", help="summarize a checkpoint's config and parameters")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(handler=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except FramecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
