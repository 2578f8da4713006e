"""Command-line entry points: train, render, query, eval, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataset_io import (load_checkpoint, load_config, load_dataset,
                         load_query_embeddings, save_checkpoint, save_image,
                         write_metrics_log)
from .render import render
from .scene import Camera
from .semantics import DEFAULT_THRESHOLD, embed_query, resolve_query
from .training import LossConfig, TrainConfig, evaluate_scene, train


def _camera_from_pose_json(text: str) -> Camera:
    pose = json.loads(text)
    return Camera.from_camera_to_world(
        np.asarray(pose["camera_to_world"], dtype=np.float64),
        fx=float(pose["fx"]), fy=float(pose["fy"]), cx=float(pose["cx"]),
        cy=float(pose["cy"]), width=int(pose["width"]), height=int(pose["height"]))


def _pick_camera(args) -> Camera:
    if getattr(args, "pose", None):
        return _camera_from_pose_json(args.pose)
    if args.dataset is None:
        raise SystemExit("need --dataset (for --frame) or --pose")
    dataset = load_dataset(args.dataset)
    if not 0 <= args.frame < len(dataset):
        raise SystemExit(f"--frame {args.frame} out of range; dataset has {len(dataset)} frames")
    return dataset.cameras[args.frame]


def cmd_train(args) -> int:
    dataset = load_dataset(args.dataset)
    if args.config:
        train_cfg, loss_cfg = load_config(args.config)
    else:
        train_cfg, loss_cfg = TrainConfig(), LossConfig()
    if args.iterations is not None:
        train_cfg.iterations = args.iterations
    if args.seed is not None:
        train_cfg.seed = args.seed

    scene, log = train(dataset, train_cfg, loss_cfg)
    save_checkpoint(scene, args.checkpoint)
    log_path = args.log or str(Path(args.checkpoint).with_suffix(".metrics.ndjson"))
    write_metrics_log(log, log_path)
    last = log[-1]
    print(f"trained {train_cfg.iterations} iterations: "
          f"psnr {last['psnr']:.2f} dB, {last['num_gaussians']} gaussians")
    print(f"checkpoint: {args.checkpoint}")
    print(f"metrics log: {log_path}")
    return 0


def cmd_render(args) -> int:
    scene = load_checkpoint(args.checkpoint)
    camera = _pick_camera(args)
    out = render(scene, camera)
    save_image(out.color, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_query(args) -> int:
    scene = load_checkpoint(args.checkpoint)
    camera = _pick_camera(args)
    lookup = load_query_embeddings(args.lookup) if args.lookup else None
    vec = embed_query(args.prompt, lookup=lookup, encoder_url=args.encoder_url)
    result = resolve_query(scene, vec, camera, args.threshold, query_text=args.prompt)
    if not result.ranked:
        print(f"query {args.prompt!r} -> no label above threshold {args.threshold}")
        return 0
    for i, hit in enumerate(result.ranked):
        prefix = f"query {args.prompt!r} ->" if i == 0 else " " * (len(args.prompt) + 11)
        print(f"{prefix} {hit.label} (relevancy {hit.relevancy:.2f})")
    if args.out:
        top = result.ranked[0]
        save_image(np.repeat(top.pixel_mask[:, :, None], 3, axis=2).astype(np.float64),
                   args.out)
        print(f"wrote mask for {top.label!r}: {args.out}")
    return 0


def cmd_eval(args) -> int:
    scene = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    report = evaluate_scene(scene, dataset)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    scene = load_checkpoint(args.checkpoint)
    cameras = None
    if args.dataset:
        cameras = load_dataset(args.dataset).cameras
    lookup = load_query_embeddings(args.lookup) if args.lookup else None
    app = create_app(scene, cameras=cameras, lookup=lookup,
                     encoder_url=args.encoder_url, checkpoint_path=args.checkpoint)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semsplat",
                                     description="semantic gaussian splatting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a scene on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log", default=None, help="metrics NDJSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render a trained scene")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--pose", default=None, help="JSON camera spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("query", help="open-vocabulary query")
    p.add_argument("prompt")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--pose", default=None)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--lookup", default=None, help="query embedding lookup file")
    p.add_argument("--encoder-url", default=None)
    p.add_argument("--out", default=None, help="write top mask as PNG")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="report PSNR/SSIM/mIoU on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="HTTP service for the viewer")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--lookup", default=None)
    p.add_argument("--encoder-url", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
