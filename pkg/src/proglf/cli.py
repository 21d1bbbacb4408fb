"""Command-line entry point.

Subcommands: synth, train, eval, render, bench, pack, serve. Options can
come from a JSON config file (--config) with flags taking precedence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data, evaluation, modelfile, training
from .geometry import Camera, EncodingConfig
from .network import ArchSpec
from .render import RenderPolicy, benchmark, render

log = logging.getLogger(__name__)


def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise SystemExit(f"config file not found: {path}")
    return json.loads(p.read_text())


def _arch_from(cfgdict: dict) -> ArchSpec:
    return ArchSpec.from_dict({**ArchSpec().to_dict(), **cfgdict.get("arch", {})})


def _train_config_from(cfgdict: dict, args) -> training.TrainConfig:
    fields = dict(cfgdict.get("train", {}))
    for name in ("batch_size", "epochs", "seed", "mode", "learning_rate", "eval_every"):
        val = getattr(args, name, None)
        if val is not None:
            fields[name] = val
    return training.TrainConfig(**fields)


def _load_model(path):
    raw = Path(path).read_bytes()
    header, _ = modelfile.parse_header(raw)
    net = modelfile.load_prefix(raw, len(header["chunks"]))
    return net, modelfile.load_occupancy(raw), modelfile.load_encoding(raw)


def cmd_synth(args):
    cfg = _load_config(args.config)
    scene = data.SyntheticScene.from_dict(
        {**data.SyntheticScene().to_dict(), **cfg.get("scene", {})}
    )
    views = data.synthesize_views(
        scene,
        num_views=args.views,
        width=args.width,
        height=args.height,
        supersample=args.supersample,
        seed=args.seed,
    )
    manifest = data.save_dataset(views, args.out, scene=scene)
    print(f"wrote {len(views)} views to {manifest}")


def cmd_train(args):
    cfg = _load_config(args.config)
    dataset = data.load_dataset(args.dataset, encoding=EncodingConfig())
    arch = _arch_from(cfg)
    tcfg = _train_config_from(cfg, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    net, records = training.train(dataset, arch, tcfg, log_path=out / "train_log.jsonl")
    occ = None
    if args.occupancy:
        occ = training.train_occupancy(dataset, tcfg)
    (out / "model.plfn").write_bytes(modelfile.pack(net, occupancy=occ, encoding=dataset.encoding))
    print(f"trained {tcfg.epochs} epochs, final loss {records[-1]['loss']:.6f}")
    print(f"checkpoint: {out / 'model.plfn'}")


def cmd_eval(args):
    dataset = data.load_dataset(args.dataset, encoding=EncodingConfig())
    net, occ, _ = _load_model(args.checkpoint)
    report = evaluation.evaluate(net, dataset, split=args.split, occupancy=occ)

    def _clean(o):
        if isinstance(o, float) and not np.isfinite(o):
            if np.isnan(o):
                return None
            return "inf" if o > 0 else "-inf"
        if isinstance(o, dict):
            return {k: _clean(v) for k, v in o.items()}
        if isinstance(o, list):
            return [_clean(v) for v in o]
        return o

    text = json.dumps(_clean(report), indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"report: {args.out}")
    else:
        print(text)


def cmd_render(args):
    net, occ, enc = _load_model(args.checkpoint)
    cam = Camera.from_dict(json.loads(Path(args.camera).read_text()))
    policy_fields = json.loads(args.policy) if args.policy else {}
    policy = RenderPolicy(**policy_fields)
    result = render(net, cam, policy, occupancy=occ, encoding=enc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data.save_png(out, result.rgba)
    lod_png = out.with_name(out.stem + "_lodmap.png")
    from PIL import Image

    # stretch LOD indices across the 8-bit range for visibility
    scale = 255 // max(int(result.lod_map.max()), 1)
    Image.fromarray((result.lod_map * scale).astype(np.uint8), mode="L").save(lod_png)
    timing = out.with_name(out.stem + "_timing.json")
    timing.write_text(json.dumps(result.report(), indent=2))
    print(f"frame: {out}\nlodmap: {lod_png}\ntiming: {timing}")


def cmd_bench(args):
    dataset = data.load_dataset(args.dataset, encoding=EncodingConfig())
    net, occ, enc = _load_model(args.checkpoint)
    from .geometry import scale_intrinsics

    cams = [dataset.views[i].camera for i in dataset.split_indices("train")]
    rows = []
    for lod in args.lods:
        for scale in args.scales:
            scaled = [scale_intrinsics(c, scale) for c in cams]
            row = benchmark(
                net,
                scaled,
                lod,
                repetitions=args.reps,
                occupancy=occ,
                use_occupancy=args.occupancy,
                encoding=enc,
            )
            row["scale"] = scale
            rows.append(row)
    text = json.dumps(rows, indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"benchmark table: {args.out}")
    else:
        print(text)


def cmd_pack(args):
    # repack (e.g. to strip or add an occupancy net) and verify checksums
    net, occ, enc = _load_model(args.checkpoint)
    blob = modelfile.pack(net, occupancy=None if args.strip_occupancy else occ, encoding=enc)
    Path(args.out).write_bytes(blob)
    print(f"packed {len(blob)} bytes to {args.out}")


def cmd_serve(args):
    from .server import serve

    serve(args.checkpoint, host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="proglf", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate the synthetic dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--views", type=int, default=24)
    s.add_argument("--width", type=int, default=256)
    s.add_argument("--height", type=int, default=192)
    s.add_argument("--supersample", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train a progressive model")
    s.add_argument("--dataset", required=True, help="path to manifest.json")
    s.add_argument("--out", required=True, help="run directory")
    s.add_argument("--config")
    s.add_argument("--mode", choices=["combined", "single_scale", "coarse_to_fine"])
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", dest="batch_size", type=int)
    s.add_argument("--learning-rate", dest="learning_rate", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--eval-every", dest="eval_every", type=int)
    s.add_argument("--occupancy", action="store_true", help="also train the occupancy net")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="per-LOD PSNR/SSIM report")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--split", default="test", choices=["train", "validation", "test"])
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("render", help="render one frame")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--camera", required=True, help="camera JSON file")
    s.add_argument("--policy", help="RenderPolicy fields as inline JSON")
    s.add_argument("--out", required=True, help="output PNG path")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("bench", help="timing table across LODs and scales")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--lods", type=int, nargs="+", default=[1, 2, 3, 4])
    s.add_argument("--scales", type=float, nargs="+", default=[0.125])
    s.add_argument("--reps", type=int, default=3)
    s.add_argument("--occupancy", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("pack", help="repack a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--strip-occupancy", action="store_true")
    s.set_defaults(func=cmd_pack)

    s = sub.add_parser("serve", help="run the streaming/render HTTP service")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(func=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
