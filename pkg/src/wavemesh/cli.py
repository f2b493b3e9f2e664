"""Command-line frontend for the superpixel pipeline.

Exit codes: 0 success, 1 runtime/data error, 2 usage error.  Batch commands
process images with a bounded worker pool but collect and write results in
input order, so the thread count never changes the output bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import WaveMeshError
from .graph import RagGraph, build_rag, wavepool
from .imageio import (
    Image,
    OverlayOptions,
    load_cifar_batch,
    load_idx,
    load_label_map,
    load_png_or_pgm,
    pad_image,
    render_overlay,
)
from .mesh import SuperpixelMesh, calibrate_multiplier, superpixel_pipeline
from .metrics import asa, explained_variation, mesh_stats

IMAGE_SUFFIXES = (".png", ".pgm")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavemesh",
        description="Content-adaptive multiscale superpixels, region adjacency graphs, "
        "hierarchical pooling, and quality metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("superpixel", help="superpixel one image and export mesh/graph")
    sp.add_argument("--input", required=True, help="PNG or PGM image path")
    sp.add_argument("--lambda", dest="lam", type=_nonneg_float, default=1.0,
                    help="threshold multiplier (default 1.0)")
    sp.add_argument("--pad", choices=("zero", "edge"), default="edge",
                    help="padding mode for non power-of-two inputs (default edge)")
    sp.add_argument("--out-dir", default=".", help="directory for mesh/graph/overlay files")
    sp.add_argument("--render", action="store_true", help="also write a boundary overlay PNG")
    sp.add_argument("--csv", action="store_true", help="also write nodes.csv/edges.csv for the graph")

    bt = sub.add_parser("batch", help="superpixel a dataset and export graphs plus stats")
    bt.add_argument("--dataset", required=True, choices=("mnist", "fashion-mnist", "cifar10", "dir"))
    bt.add_argument("--images", required=True, help="IDX images file, CIFAR batch file, or image directory")
    bt.add_argument("--labels", help="IDX labels file (required for mnist/fashion-mnist)")
    bt.add_argument("--limit", type=_positive_int, help="process only the first N images")
    bt.add_argument("--lambda", dest="lam", type=_nonneg_float, default=1.0)
    bt.add_argument("--pad", choices=("zero", "edge"), default="edge",
                    help="padding mode for dir datasets (default edge)")
    bt.add_argument("--out-dir", required=True)
    bt.add_argument("--threads", type=_positive_int, default=None)

    pl = sub.add_parser("pool", help="apply pooling steps to an exported mesh/graph pair")
    pl.add_argument("--input", required=True, help="mesh JSON path (sibling .graph.json is used)")
    pl.add_argument("--levels", type=_positive_int, default=1)
    pl.add_argument("--agg", choices=("max", "mean"), default="max")
    pl.add_argument("--out-dir", default=".")

    mt = sub.add_parser("metrics", help="score meshes against images and optional ground truth")
    mt.add_argument("--input", required=True, help="mesh JSON file or directory of *.mesh.json")
    mt.add_argument("--images", required=True, help="image file or directory (paired by sorted order)")
    mt.add_argument("--gt", help="label-map image file or directory")
    mt.add_argument("--pad", choices=("zero", "edge"), default="edge")
    mt.add_argument("--out", help="write the JSON report here (plus per-image CSV rows)")

    cal = sub.add_parser("calibrate", help="find the multiplier matching a target mean cell count")
    cal.add_argument("--dataset", required=True, choices=("mnist", "fashion-mnist", "cifar10", "dir"))
    cal.add_argument("--images", required=True)
    cal.add_argument("--labels")
    cal.add_argument("--limit", type=_positive_int, default=50, help="sample size (default 50)")
    cal.add_argument("--pad", choices=("zero", "edge"), default="edge")
    cal.add_argument("--target-count", dest="target_count", type=float, required=True)
    cal.add_argument("--seed", type=int, default=0, help="subset sampling seed (default 0)")

    st = sub.add_parser("stats", help="aggregate cell statistics over exported meshes")
    st.add_argument("--input", required=True, help="directory of *.mesh.json files")
    st.add_argument("--limit", type=_positive_int, help="sample only N meshes")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--out", help="write the stats JSON here as well")

    return parser


def _dataset_pad_mode(args) -> str:
    # IDX datasets have zero background; natural images replicate their edges.
    if args.dataset in ("mnist", "fashion-mnist"):
        return "zero"
    if args.dataset == "cifar10":
        return "edge"  # no-op: inputs are already 32x32
    return args.pad


def _list_image_files(directory: Path) -> list[Path]:
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise WaveMeshError(f"{directory}: no .png/.pgm files found")
    return files


def _load_dataset(args, limit: int | None) -> list[Image]:
    mode = _dataset_pad_mode(args)
    if args.dataset in ("mnist", "fashion-mnist"):
        if not args.labels:
            raise WaveMeshError(f"--labels is required for dataset {args.dataset}")
        pairs = load_idx(args.images, args.labels, limit)
        return [pad_image(img, mode) for img, _ in pairs]
    if args.dataset == "cifar10":
        pairs = load_cifar_batch(args.images, limit)
        return [pad_image(img, mode) for img, _ in pairs]
    files = _list_image_files(Path(args.images))
    if limit is not None:
        files = files[:limit]
    return [pad_image(load_png_or_pgm(p), mode) for p in files]


def _process_image(image: Image, lam: float) -> tuple[SuperpixelMesh, RagGraph, list]:
    mesh, thresholds = superpixel_pipeline(image, lam)
    return mesh, build_rag(mesh, image), thresholds


def _threshold_obj(thresholds) -> list[dict]:
    return [
        {
            "channel": i,
            "value": t.value,
            "variance": t.variance,
            "iterations": t.iterations,
            "multiplier": t.multiplier,
        }
        for i, t in enumerate(thresholds)
    ]


def cmd_superpixel(args) -> int:
    image = pad_image(load_png_or_pgm(args.input), args.pad)
    mesh, rag, thresholds = _process_image(image, args.lam)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    (out_dir / f"{stem}.mesh.json").write_text(mesh.to_json())
    (out_dir / f"{stem}.graph.json").write_text(rag.to_json())
    if args.csv:
        nodes_csv, edges_csv = rag.to_csv()
        (out_dir / f"{stem}.nodes.csv").write_text(nodes_csv)
        (out_dir / f"{stem}.edges.csv").write_text(edges_csv)
    if args.render:
        (out_dir / f"{stem}.overlay.png").write_bytes(render_overlay(image, mesh, OverlayOptions()))
    print(json.dumps({
        "cells": mesh.cell_count,
        "side": mesh.side,
        "thresholds": _threshold_obj(thresholds),
    }))
    return 0


def cmd_batch(args) -> int:
    images = _load_dataset(args, args.limit)
    threads = args.threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda im: _process_image(im, args.lam), images))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meshes = []
    iteration_counts = []
    for i, (mesh, rag, thresholds) in enumerate(results):
        (out_dir / f"{i:05d}.mesh.json").write_text(mesh.to_json())
        (out_dir / f"{i:05d}.graph.json").write_text(rag.to_json())
        meshes.append(mesh)
        iteration_counts.extend(t.iterations for t in thresholds)
    stats = mesh_stats(meshes)
    (out_dir / "stats.json").write_text(stats.to_json())
    line = stats.to_json_obj()
    line["threshold_iterations"] = {
        "mean": float(np.mean(iteration_counts)),
        "max": int(max(iteration_counts)),
    }
    print(json.dumps(line))
    return 0


def cmd_pool(args) -> int:
    mesh_path = Path(args.input)
    name = mesh_path.name
    if not name.endswith(".mesh.json"):
        raise WaveMeshError(f"{mesh_path}: expected a *.mesh.json file")
    graph_path = mesh_path.with_name(name.replace(".mesh.json", ".graph.json"))
    mesh = SuperpixelMesh.from_json(mesh_path.read_text())
    rag = RagGraph.from_json(graph_path.read_text())

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = name[: -len(".mesh.json")]
    for level in range(1, args.levels + 1):
        mesh, rag, assignment = wavepool(mesh, rag, None, args.agg)
        (out_dir / f"{stem}.pool{level}.mesh.json").write_text(mesh.to_json())
        (out_dir / f"{stem}.pool{level}.graph.json").write_text(rag.to_json())
        (out_dir / f"{stem}.pool{level}.assign.json").write_text(assignment.to_json())
    print(json.dumps({"levels": args.levels, "agg": args.agg, "cells": mesh.cell_count}))
    return 0


def _pair_inputs(args) -> list[tuple[Path, Path, Path | None]]:
    mesh_arg, image_arg = Path(args.input), Path(args.images)
    if mesh_arg.is_dir():
        mesh_paths = sorted(mesh_arg.glob("*.mesh.json"))
        if not mesh_paths:
            raise WaveMeshError(f"{mesh_arg}: no *.mesh.json files found")
        image_paths = _list_image_files(image_arg)
        gt_paths: list[Path | None]
        gt_paths = _list_image_files(Path(args.gt)) if args.gt else [None] * len(mesh_paths)
        if len(mesh_paths) != len(image_paths) or len(mesh_paths) != len(gt_paths):
            raise WaveMeshError(
                f"count mismatch: {len(mesh_paths)} meshes, {len(image_paths)} images"
                + (f", {len(gt_paths)} ground truths" if args.gt else "")
            )
        return list(zip(mesh_paths, image_paths, gt_paths))
    return [(mesh_arg, image_arg, Path(args.gt) if args.gt else None)]


def cmd_metrics(args) -> int:
    rows = []
    for mesh_path, image_path, gt_path in _pair_inputs(args):
        mesh = SuperpixelMesh.from_json(mesh_path.read_text())
        image = pad_image(load_png_or_pgm(image_path), args.pad)
        row = {
            "mesh": str(mesh_path),
            "cells": mesh.cell_count,
            "ev": explained_variation(mesh, image),
        }
        if gt_path is not None:
            row["asa"] = asa(mesh, load_label_map(gt_path))
        rows.append(row)

    def summary(key: str):
        vals = [r[key] for r in rows if key in r]
        if not vals:
            return None
        arr = np.asarray(vals, dtype=np.float64)
        return {"mean": float(arr.mean()), "std": float(arr.std())}

    report = {"asa": summary("asa"), "ev": summary("ev"), "counts": summary("cells")}
    print(json.dumps(report))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report))
        header = ["mesh", "cells", "ev"] + (["asa"] if args.gt else [])
        lines = [",".join(header)]
        for r in rows:
            lines.append(",".join(str(r.get(k, "")) for k in header))
        out.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    return 0


def _sample(items: list, limit: int | None, seed: int) -> list:
    if limit is None or limit >= len(items):
        return items
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(items), size=limit, replace=False))
    return [items[i] for i in keep]


def cmd_calibrate(args) -> int:
    images = _load_dataset(args, None)
    images = _sample(images, args.limit, args.seed)
    lam = calibrate_multiplier(images, args.target_count)
    print(json.dumps({"lambda": lam}))
    return 0


def cmd_stats(args) -> int:
    directory = Path(args.input)
    paths = sorted(directory.glob("*.mesh.json"))
    if not paths:
        raise WaveMeshError(f"{directory}: no *.mesh.json files found")
    paths = _sample(paths, args.limit, args.seed)
    stats = mesh_stats(SuperpixelMesh.from_json(p.read_text()) for p in paths)
    print(stats.to_json())
    if args.out:
        Path(args.out).write_text(stats.to_json())
    return 0


_COMMANDS = {
    "superpixel": cmd_superpixel,
    "batch": cmd_batch,
    "pool": cmd_pool,
    "metrics": cmd_metrics,
    "calibrate": cmd_calibrate,
    "stats": cmd_stats,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (WaveMeshError, OSError) as exc:
        print(f"wavemesh: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
