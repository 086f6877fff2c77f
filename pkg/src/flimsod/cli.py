"""`flim` command line: train, infer, simplify, eval.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import datasets, evalpp, pngio
from .decoder import saliency
from .encoder import ArchitectureSpec, arch_params, count_flops, count_params, train_encoder
from .modelio import ModelFormatError, load_model, save_model
from .numerics import wilcoxon_signed_rank
from .simplify import simplify_network

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train an encoder from images and markers")
    t.add_argument("--arch", required=True)
    t.add_argument("--images", required=True)
    t.add_argument("--markers", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--separable", action="store_true",
                   help="force separable mode on every layer")
    t.add_argument("--simplify-each-layer", type=int, default=0, metavar="K")

    i = sub.add_parser("infer", help="produce saliency PNGs for a directory")
    i.add_argument("--model", required=True)
    i.add_argument("--images", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--layer", type=int, default=-1)
    i.add_argument("--min-area", type=int, default=None)
    i.add_argument("--max-area", type=int, default=None)
    i.add_argument("--delineate", action="store_true")

    s = sub.add_parser("simplify", help="remove redundant kernels from a layer")
    s.add_argument("--model", required=True)
    s.add_argument("--images", required=True)
    s.add_argument("--markers", required=True)
    s.add_argument("--layer", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--report", default=None)

    e = sub.add_parser("eval", help="score saliency maps against ground truth")
    e.add_argument("--saliency", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--baseline", default=None)
    e.add_argument("--alpha", type=float, default=0.05)
    e.add_argument("--report", default=None)
    return p


def _cmd_train(args) -> int:
    arch = ArchitectureSpec.load(args.arch)
    if args.separable:
        for spec in arch.layers:
            spec.mode = "separable"
    names, imgs, marker_sets = datasets.load_training_set(args.images, args.markers)
    model = train_encoder(
        imgs, marker_sets, arch, args.seed,
        simplify_each_layer=args.simplify_each_layer,
    )
    model.provenance = {"images": names, "markers": names}
    save_model(model, args.out)
    for li, layer in enumerate(model.layers):
        print(f"layer {li + 1}: {layer.bank.m} kernels ({layer.spec.mode})")
    h, w, _ = imgs[0].shape
    print(f"params: {count_params(model.layers)}")
    print(f"flops@{h}x{w}: {count_flops(model.layers, (h, w))}")
    return EXIT_OK


def _cmd_infer(args) -> int:
    model = load_model(args.model)
    names = datasets.list_pngs(args.images)
    os.makedirs(args.out, exist_ok=True)
    for name in names:
        img = pngio.load_image(os.path.join(args.images, name))
        sal = saliency(model, img, args.layer)
        if args.min_area is not None or args.max_area is not None:
            sal = evalpp.size_filter(
                sal, args.min_area or 0, args.max_area
            )
        if args.delineate:
            obj, bg = evalpp.estimate_seeds(sal)
            sal = evalpp.seeded_delineation(img, obj, bg)
        pngio.write_gray_png(
            np.round(np.clip(sal[:, :, 0], 0, 1) * 255).astype(np.uint8),
            os.path.join(args.out, name),
        )
    print(f"wrote {len(names)} saliency maps to {args.out}")
    return EXIT_OK


def _cmd_simplify(args) -> int:
    model = load_model(args.model)
    _, imgs, marker_sets = datasets.load_training_set(args.images, args.markers)
    model, report = simplify_network(
        model, args.layer, args.n, imgs=imgs, marker_sets=marker_sets
    )
    save_model(model, args.out)
    payload = report.to_json()
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(payload, fh, indent=2)
    print(json.dumps(payload))
    return EXIT_OK


def _load_pairs(sal_dir, gt_dir):
    names = datasets.list_pngs(sal_dir)
    pairs = []
    for name in names:
        gt_path = os.path.join(gt_dir, name)
        if not os.path.exists(gt_path):
            raise FileNotFoundError(f"missing ground truth for {name}")
        sal = pngio.load_image(os.path.join(sal_dir, name))[:, :, :1]
        gt = pngio.load_image(gt_path)[:, :, :1]
        pairs.append((name, sal, gt))
    return pairs


def _cmd_eval(args) -> int:
    report = evalpp.evaluate_pairs(_load_pairs(args.saliency, args.gt))
    payload = report.to_json()
    if args.baseline:
        base = evalpp.evaluate_pairs(_load_pairs(args.baseline, args.gt))
        by_name = {n: (f, m) for n, f, m in base.per_image}
        shared = [n for n, _, _ in report.per_image if n in by_name]
        ours = {n: (f, m) for n, f, m in report.per_image}
        comparison = {"baseline_fbw": base.fbw, "baseline_mae": base.mae}
        for metric, idx in (("fbw", 0), ("mae", 1)):
            try:
                res = wilcoxon_signed_rank(
                    [ours[n][idx] for n in shared],
                    [by_name[n][idx] for n in shared],
                    alpha=args.alpha,
                )
                comparison[f"wilcoxon_{metric}"] = {
                    "statistic": res.statistic,
                    "p_value": res.p_value,
                    "significant": res.significant,
                }
            except ValueError as exc:
                comparison[f"wilcoxon_{metric}"] = {"error": str(exc)}
        payload["baseline"] = comparison
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(payload, fh, indent=2)
    print(f"{'#Params':>10} {'FLOPs(G)':>10} {'Fwb':>8} {'MAE':>8}")
    print(f"{'-':>10} {'-':>10} {report.fbw:8.3f} {report.mae:8.3f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "infer":
            return _cmd_infer(args)
        if args.command == "simplify":
            return _cmd_simplify(args)
        if args.command == "eval":
            return _cmd_eval(args)
        raise UsageError(f"unknown command {args.command}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ModelFormatError, ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
