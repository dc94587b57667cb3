"""The ``bodyflow`` command: train, evaluate, reshape, serve, benchmark.

Every subcommand reports failures as ``error (<command>): <message>`` on
stderr with a nonzero exit, so scripts can branch on the stage that failed.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .bench import format_table, run_benchmark
from .data import (
    load_image,
    load_manifest,
    load_sample,
    make_synthetic_dataset,
    save_image,
    synth_example,
)
from .errors import BodyflowError
from .generator import ablation_config
from .losses import LossWeights
from .pipeline import FlowStats, ReshapePipeline
from .priors import (
    build_pafs,
    encode_structure,
    ingest_keypoints,
    keypoints_to_document,
    rasterize_skeletons,
)
from .train import TrainConfig, evaluate_metrics, load_checkpoint, run_ablation_suite, train
from .warp import validate_mu, visualize_flow, write_flo

log = logging.getLogger(__name__)


def _load_image_file(path):
    if not os.path.isfile(path):
        raise BodyflowError(f"image not found: {path}")
    return load_image(path)


def _load_keypoints_file(path):
    if not os.path.isfile(path):
        raise BodyflowError(f"keypoint file not found: {path}")
    with open(path, "rb") as fh:
        return ingest_keypoints(fh.read())


def _generator_for(args, size):
    overrides = {}
    if getattr(args, "base_channels", None) is not None:
        overrides["base_channels"] = args.base_channels
    if getattr(args, "depth", None) is not None:
        overrides["depth"] = args.depth
    if not overrides:
        return None
    return ablation_config(args.ablation, input_size=size, **overrides)


def _training_pairs(args):
    if args.manifest:
        size = args.size or 256
        split = args.split or "train"  # never train on rows tagged for validation
        manifest = load_manifest(args.manifest, split=split)
        if not len(manifest):
            raise BodyflowError(
                f"manifest {args.manifest} has no usable rows for split {split!r}"
            )
        return [load_sample(desc, size=size) for desc in manifest], size
    size = args.size or 64
    return make_synthetic_dataset(args.synthetic, size=size, seed=args.seed), size


def cmd_reshape(args) -> int:
    pipeline = ReshapePipeline.from_checkpoint(args.checkpoint)
    image = _load_image_file(args.image)
    kp = _load_keypoints_file(args.keypoints)
    mu = validate_mu(args.mu, strict=False)  # warn but allow extrapolation
    flow = pipeline.compute_flow(image, kp)
    out = pipeline.reshape(image, flow, mu)
    save_image(out, args.out)
    if args.flow_out:
        write_flo(args.flow_out, flow)
    stats = FlowStats.of(flow)
    print(json.dumps({"out": args.out, "mu": mu, "flow_stats": stats.to_dict()}))
    return 0


def cmd_priors(args) -> int:
    kp = _load_keypoints_file(args.keypoints)
    size = args.size
    kp = kp.scaled(size / kp.image_width, size / kp.image_height, size, size)
    skel = rasterize_skeletons(kp, (size, size))
    pafs = build_pafs(kp, (size, size))
    heat = encode_structure(pafs, (args.heatmap_size, args.heatmap_size))
    os.makedirs(args.out_dir, exist_ok=True)

    def preview(stack, name):
        rgb = np.repeat(stack.max(axis=0)[None], 3, axis=0)
        save_image(rgb, os.path.join(args.out_dir, name))

    preview(skel.data, "skeletons.png")
    preview(pafs.magnitude, "paf_support.png")
    preview(heat.data[:3], "structure.png")
    from . import containers

    containers.write_container(
        os.path.join(args.out_dir, "priors.bft"),
        {
            "skeletons": skel.data,
            "paf_vectors": pafs.vectors,
            "paf_magnitude": pafs.magnitude,
            "paf_orientation": pafs.orientation,
            "heatmaps": heat.data,
        },
        meta={"size": size, "heatmap_size": args.heatmap_size},
    )
    print(json.dumps({"out_dir": args.out_dir, "size": size}))
    return 0


def cmd_synth(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for i in range(args.count):
        sample_seed = int(np.random.default_rng((args.seed, i)).integers(0, 2**31))
        kp, pair = synth_example(args.size, sample_seed, args.strength)
        stem = f"synth-{args.seed}-{i}"
        save_image(pair.source, os.path.join(args.out_dir, f"{stem}.png"))
        save_image(pair.target, os.path.join(args.out_dir, f"{stem}_target.png"))
        with open(os.path.join(args.out_dir, f"{stem}.json"), "w") as fh:
            json.dump(keypoints_to_document(kp), fh)
        write_flo(os.path.join(args.out_dir, f"{stem}.flo"), pair.gt_flow)
        rows.append(
            {
                "id": stem,
                "source_path": f"{stem}.png",
                "keypoints_path": f"{stem}.json",
                "target_path": f"{stem}_target.png",
                "gt_flow_path": f"{stem}.flo",
            }
        )
    manifest = os.path.join(args.out_dir, "manifest.jsonl")
    with open(manifest, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print(json.dumps({"manifest": manifest, "count": len(rows)}))
    return 0


def cmd_train(args) -> int:
    pairs, size = _training_pairs(args)
    if args.manifest:
        # held-out rows tagged split=val in the same manifest, when present
        val_rows = load_manifest(args.manifest, split="val")
        val_pairs = [load_sample(desc, size=size) for desc in val_rows]
    else:
        n_val = args.val_count if args.val_count is not None else max(1, len(pairs) // 8)
        val_pairs = make_synthetic_dataset(n_val, size=size, seed=args.seed + 1)
    config = TrainConfig(
        max_steps=args.steps,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        ablation=args.ablation,
        generator=_generator_for(args, size),
        weights=LossWeights(args.lambda_img, args.lambda_flow, args.lambda_orth),
        val_every=args.val_every,
        early_stop_epe=args.early_stop_epe,
        augment=args.augment,
    )
    result = train(
        config, pairs, val_pairs, log_path=args.log, checkpoint_path=args.out
    )
    print(
        json.dumps(
            {
                "checkpoint": args.out,
                "steps_run": result.steps_run,
                "val_epe": result.val_epe,
                "stopped_early": result.stopped_early,
            }
        )
    )
    return 0


def cmd_eval(args) -> int:
    loaded = load_checkpoint(args.checkpoint)
    if args.manifest:
        size = args.size or loaded.model.config.input_size
        manifest = load_manifest(args.manifest, split=args.split)
        if not len(manifest):
            raise BodyflowError(f"manifest {args.manifest} has no usable rows")
        pairs = [load_sample(desc, size=size) for desc in manifest]
    else:
        size = args.size or loaded.model.config.input_size
        pairs = make_synthetic_dataset(args.synthetic, size=size, seed=args.seed)
    report = evaluate_metrics(loaded.model, pairs)
    print(json.dumps(report.to_dict()))
    return 0


def cmd_ablate(args) -> int:
    pairs = make_synthetic_dataset(args.synthetic, size=args.size, seed=args.seed)
    val_pairs = make_synthetic_dataset(
        max(1, args.synthetic // 4), size=args.size, seed=args.seed + 1
    )
    base = TrainConfig(
        max_steps=args.steps,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        val_every=args.val_every,
    )
    overrides = {}
    if args.base_channels is not None:
        overrides["base_channels"] = args.base_channels
    if args.depth is not None:
        overrides["depth"] = args.depth
    if overrides:
        overrides["input_size"] = args.size
    report = run_ablation_suite(
        base,
        pairs,
        val_pairs,
        checkpoint_dir=args.checkpoint_dir,
        generator_overrides=overrides or None,
    )
    print(report.table())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    if args.checkpoint:
        pipeline = ReshapePipeline.from_checkpoint(args.checkpoint)
    else:
        log.warning("no checkpoint given; serving an untrained (identity) model")
        pipeline = ReshapePipeline.untrained(size=args.size)
    app = create_app(pipeline, max_sessions=args.max_sessions)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_bench(args) -> int:
    rows = run_benchmark(size=args.size, repeats=args.repeats)
    print(format_table(rows))
    if any(r["bitwise"] is False for r in rows):
        print("error (bench): backends disagree bitwise", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bodyflow",
        description="Deformation-flow body reshaping: priors, training, inference, serving.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="INFO-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reshape", help="warp one image with a trained model")
    p.add_argument("--image", required=True)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mu", type=float, default=1.0, help="retouch amount, nominally in [-1, 1]")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--flow-out", default=None, help="optionally also write the .flo field")
    p.set_defaults(fn=cmd_reshape)

    p = sub.add_parser("priors", help="rasterize structural priors for one pose")
    p.add_argument("--keypoints", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--heatmap-size", type=int, default=32)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_priors)

    p = sub.add_parser("synth", help="write a synthetic dataset with a manifest")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synth)

    def add_train_data_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--manifest", help="JSONL manifest of real samples")
        src.add_argument("--synthetic", type=int, help="generate N synthetic samples")
        p.add_argument("--split", default=None)
        p.add_argument("--size", type=int, default=None,
                       help="sample resolution (default 256 manifest, 64 synthetic)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a flow generator")
    add_train_data_args(p)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=2e-5)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--ablation", default="full", choices=["full", "wo_sp", "wo_aff"])
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--lambda-img", type=float, default=15.0)
    p.add_argument("--lambda-flow", type=float, default=15.0)
    p.add_argument("--lambda-orth", type=float, default=2.0)
    p.add_argument("--val-every", type=int, default=100)
    p.add_argument("--val-count", type=int, default=None)
    p.add_argument("--early-stop-epe", type=float, default=None)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--log", default=None, help="JSONL metrics path")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="metrics of a checkpoint on a dataset")
    add_train_data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="train and compare the three input/attention variants")
    p.add_argument("--synthetic", type=int, default=32)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=600)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--val-every", type=int, default=100)
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--checkpoint-dir", default=None)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("serve", help="run the HTTP reshaping service")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--size", type=int, default=256, help="model size when untrained")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-sessions", type=int, default=16)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("bench", help="compare the numpy and numba pixel kernels")
    p.add_argument("--size", type=int, default=1024)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except BodyflowError as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
