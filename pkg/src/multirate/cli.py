"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .codec import CodecConfig
from .frameio import FORMATS, load_frames, read_container, save_frames, write_container
from .metrics import vcpr
from .planner import DEFAULT_W
from .stream import KeyframeEmbedding, KeyframePredictor, decode_stream, deserialize, serialize
from .synth import PATTERNS, SynthSpec, Video, make_corpus, make_mixed_corpus, make_video, synth_generate

QUALITY_FLAGS = ("psnr", "compress", "random")

# option name -> (type, builtin default)
SETTINGS = {
    "seed": (int, 0),
    "w": (float, DEFAULT_W),
    "rates": (str, "4,8,16"),
    "spatial_factor": (int, 8),
    "segment_len": (int, 17),
    "quality": (str, "psnr"),
    "embedding": (str, "begin"),
    "beta": (float, 0.5),
    "out": (str, "out"),
    "videos": (int, 64),
    "corpus": (str, "default"),
    "height": (int, 64),
    "width": (int, 64),
    "frames": (int, 34),
    "pattern": (str, "drift-grating"),
    "speed": (float, 1.0),
    "frequency": (float, 2.0),
    "format": (str, "raw-container"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SETTINGS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(args) -> dict:
    cfg_file = read_config(args.config) if args.config else {}
    out = {}
    for key, (typ, default) in SETTINGS.items():
        cli = getattr(args, key, None)
        raw = cli if cli is not None else cfg_file.get(key, default)
        try:
            out[key] = typ(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
    if out["quality"] not in QUALITY_FLAGS:
        raise UsageError(f"quality must be one of {QUALITY_FLAGS}")
    if out["embedding"] not in ("begin", "end", "none"):
        raise UsageError("embedding must be begin, end or none")
    if out["format"] not in FORMATS:
        raise UsageError(f"format must be one of {FORMATS}")
    try:
        out["rates"] = tuple(int(r) for r in str(out["rates"]).split(","))
    except ValueError as exc:
        raise UsageError(f"bad rate list {out['rates']!r}") from exc
    return out


def codec_config(s: dict) -> CodecConfig:
    try:
        return CodecConfig(
            spatial_factor=s["spatial_factor"],
            planner_rates=s["rates"],
            analysis_rates=tuple(sorted({2, *s["rates"]})),
            segment_len=s["segment_len"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_video(path, fmt):
    if fmt == "raw-container":
        frames, fps = read_container(path)
        return frames, fps
    return np.stack(load_frames(path, fmt)), 25.0


def _corpus(s):
    kind = s["corpus"]
    common = dict(seed=s["seed"], height=s["height"], width=s["width"])
    if kind == "default":
        return make_corpus(s["videos"], frames=s["frames"], segment_len=s["segment_len"], **common)
    if kind == "mixed":
        return make_mixed_corpus(s["videos"], segment_len=s["segment_len"], **common)
    if kind in PATTERNS:
        return [
            make_video(SynthSpec(pattern=kind, speed=s["speed"], frequency=s["frequency"],
                                 seed=s["seed"] + i, height=s["height"], width=s["width"],
                                 frames=s["frames"], segment_len=s["segment_len"]), f"{kind}-{i:03d}")
            for i in range(s["videos"])
        ]
    raise UsageError(f"unknown corpus {kind!r}")


def cmd_generate(args, s):
    spec = SynthSpec(pattern=s["pattern"], speed=s["speed"], frequency=s["frequency"], seed=s["seed"],
                     height=s["height"], width=s["width"], frames=s["frames"], segment_len=s["segment_len"])
    frames = synth_generate(spec)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    target = out / "video.mtcv" if s["format"] == "raw-container" else out / "frames"
    save_frames(frames, target, s["format"])
    print(target)


def cmd_plan(args, s):
    cfg = codec_config(s)
    frames, fps = _load_video(args.input, s["format"])
    video = Video(Path(args.input).stem, frames, None, fps)
    a = bench.analyze_video(video, cfg, motion=False)
    p = bench.plan_video(a, s["w"], s["quality"], cfg, s["seed"])
    rows = [{"segment_id": i, "rate": r, "alpha": float(p.alphas[i]) if p.alphas is not None else float("nan")}
            for i, r in enumerate(p.rates)]
    bench.write_csv(rows, Path(s["out"]) / "plan.csv")
    print(json.dumps({"rates": p.rates, "w": p.w, "score": p.score, "vcpr": vcpr(p, cfg)}))


def cmd_encode(args, s):
    cfg = codec_config(s)
    frames, fps = _load_video(args.input, s["format"])
    a = bench.analyze_video(Video(Path(args.input).stem, frames, None, fps), cfg, motion=False)
    p = bench.plan_video(a, s["w"], s["quality"], cfg, s["seed"])
    emb = KeyframeEmbedding(s["beta"], s["embedding"])
    stream = bench.encode_video(a.segmented, p.rates, emb, cfg)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "stream.mtcs").write_bytes(serialize(stream))
    pred = bench.training_predictor(emb, cfg, s["seed"], channels=frames.shape[3])
    pred.save(out / "predictor.json")
    print(json.dumps({"rates": p.rates, "latent_frames": len(stream), "vcpr": vcpr(p, cfg)}))


def cmd_decode(args, s):
    cfg = codec_config(s)
    stream = deserialize(Path(args.input).read_bytes())
    if stream.T != cfg.segment_len:
        cfg = CodecConfig(cfg.spatial_factor, cfg.planner_rates, cfg.analysis_rates,
                          segment_len=stream.T)
    if args.predictor:
        pred = KeyframePredictor.load(args.predictor)
    else:
        emb = KeyframeEmbedding(stream.beta, stream.policy)
        pred = bench.training_predictor(emb, cfg, s["seed"], channels=stream.channels)
    frames = decode_stream(stream, pred, cfg)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_container(frames, out / "decoded.mtcv")
    print(json.dumps({"frames": int(frames.shape[0])}))


def cmd_bench(args, s):
    cfg = codec_config(s)
    emb = KeyframeEmbedding(s["beta"], s["embedding"])
    report = bench.run_bench(_corpus(s), s["w"], s["quality"], cfg, emb, seed=s["seed"])
    path = Path(s["out"]) / "bench.csv"
    report.to_csv(path)
    print(json.dumps({"rows": len(report.rows), "vcpr": report.mean("vcpr", per_video=True),
                      "psnr": report.mean("psnr")}))


def _sweep(s, name):
    cfg = codec_config(s)
    analyses = bench.analyze_corpus(_corpus(s), cfg, motion=(name == "scatter"))
    out = Path(s["out"])
    if name == "sweep-w":
        rows = bench.sweep_w(analyses, cfg)
    elif name == "sweep-embedding":
        rows = bench.sweep_embedding(analyses, cfg, w=s["w"], beta=s["beta"], seed=s["seed"])
    elif name == "sweep-quality":
        rows = bench.sweep_quality(analyses, cfg, w=s["w"], seed=s["seed"])
    else:
        rows = bench.scatter_rows(analyses)
    stem = name.replace("-", "_")
    bench.write_csv(rows, out / f"{stem}.csv")
    if name == "sweep-w":
        bench.write_line_svg(rows, out / f"{stem}.svg")
    if name == "scatter":
        bench.write_scatter_svg(rows, out / f"{stem}.svg")
        print(json.dumps(bench.scatter_summary(rows)))
    else:
        print(json.dumps(rows))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config")
    common.add_argument("--seed", type=int)
    common.add_argument("--w", type=float)
    common.add_argument("--rates")
    common.add_argument("--spatial-factor", type=int, dest="spatial_factor")
    common.add_argument("--segment-len", type=int, dest="segment_len")
    common.add_argument("--quality", choices=QUALITY_FLAGS)
    common.add_argument("--embedding", choices=("begin", "end", "none"))
    common.add_argument("--beta", type=float)
    common.add_argument("--out")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("-v", "--verbose", action="store_true")

    corpus = _Parser(add_help=False)
    corpus.add_argument("--videos", type=int)
    corpus.add_argument("--corpus", help="default, mixed, or a single pattern name")
    corpus.add_argument("--height", type=int)
    corpus.add_argument("--width", type=int)
    corpus.add_argument("--frames", type=int)
    corpus.add_argument("--speed", type=float)
    corpus.add_argument("--frequency", type=float)

    parser = _Parser(prog="multirate", description="Multi-rate temporal video compression toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common, corpus], help="render a synthetic video")
    g.add_argument("--pattern", choices=PATTERNS)
    for name, helptext in (("plan", "choose per-segment rates"), ("encode", "write an MTCS stream")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--input", required=True)
    d = sub.add_parser("decode", parents=[common], help="decode an MTCS stream")
    d.add_argument("--input", required=True)
    d.add_argument("--predictor")
    for name in ("bench", "sweep-w", "sweep-embedding", "sweep-quality", "scatter"):
        sub.add_parser(name, parents=[common, corpus])
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "plan": cmd_plan,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        s = resolve(args)
        handler = COMMANDS.get(args.command)
        if handler is None:
            _sweep(s, args.command)
        else:
            handler(args, s)
    except UsageError as exc:
        print(f"multirate: usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"multirate: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
