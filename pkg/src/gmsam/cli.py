"""Command-line entry point: generate, cache, distill, eval, profile, visualize.

Exit codes: 0 success, 1 configuration or input error, 2 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from gmsam import numerics as nx
from gmsam import profile as prof
from gmsam.distill import PAPER_SETTINGS, DistillConfig, TeacherCache, cache_teacher, distill
from gmsam.encoders import build_encoder, encode, load_spec, toy_teacher
from gmsam.errors import GmsamError, NumericDomainError, TrainingDivergenceError
from gmsam.io import Dataset, DatasetManifest, export_feature_pgm, export_mask_pgm, read_ppm
from gmsam.io import load_checkpoint, save_checkpoint, write_ppm
from gmsam.ledger import format_distillation_table, format_miou_table
from gmsam.segment import (
    DEFAULT_THRESHOLD,
    Prompt,
    SegmentationPipeline,
    decode_mask,
    default_prompts,
    evaluate_miou,
    read_prompts,
    write_prompts,
)

log = logging.getLogger("gmsam")


class InputError(GmsamError):
    """Bad command-line input detected before any work starts."""


def _paper(value):
    return f" (paper: {value})"


def _shape(text):
    try:
        shape = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(shape) != 4:
        raise argparse.ArgumentTypeError(f"expected 4 comma-separated integers (b,c,h,w), got {text!r}")
    return shape


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise InputError(f"path not found: {p}")


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model(spec_path, ckpt_path, seed, default=None):
    """Build an encoder from a spec file (or default spec) and optional weights."""
    spec = load_spec(spec_path) if spec_path else default
    if spec is None:
        raise InputError("no encoder spec given")
    model = build_encoder(spec, seed)
    if ckpt_path:
        model.load_state_dict(load_checkpoint(ckpt_path))
    return model


def _dataset(args):
    if getattr(args, "dataset", None):
        return Dataset.load(args.dataset)
    return Dataset.synthetic(args.seed, args.count, args.image_size)


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args):
    out = _out_dir(args)
    ds = Dataset.synthetic(args.seed, args.count, args.image_size, args.split)
    manifest = ds.manifest
    if args.write_images:
        (out / "images").mkdir(exist_ok=True)
        for item_id, image in ds:
            write_ppm(image, out / "images" / f"{item_id}.ppm")
        manifest = DatasetManifest([(i, f"images/{i}.ppm") for i in ds.ids], ds.image_size, args.split)
    manifest.save(out / "manifest.tsv")
    write_prompts(default_prompts(ds, args.prompt_kind), out / "prompts.tsv")
    print(f"wrote {len(ds)} items ({args.image_size}px, split={args.split}) to {out / 'manifest.tsv'}")
    return 0


def cmd_cache(args):
    _require(args.teacher, args.teacher_ckpt, args.dataset)
    out = _out_dir(args)
    teacher = _model(args.teacher, args.teacher_ckpt, args.teacher_seed, toy_teacher())
    ds = _dataset(args)
    config = DistillConfig(image_size=ds.image_size, precision=args.precision, seed=args.seed)
    teacher.astype(config.dtype)
    cache = cache_teacher(teacher, ds, config, jobs=args.jobs)
    cache.save(out)
    if not args.teacher_ckpt:
        save_checkpoint(teacher.state_dict(), out / "teacher.gmkd")
    print(f"cached {len(cache)} teacher embeddings in {out} (teacher {cache.teacher_hash[:12]})")
    return 0


def cmd_distill(args):
    _require(args.student, args.teacher, args.teacher_ckpt, args.dataset, args.cache)
    student_spec = load_spec(args.student)
    config = DistillConfig(image_size=args.image_size, batch_size=args.batch_size, learning_rate=args.lr,
                           epochs=args.epochs, huber_delta=args.huber_delta, seed=args.seed,
                           precision=args.precision)
    out = _out_dir(args)
    ds = _dataset(args)
    if ds.image_size != config.image_size:
        config = DistillConfig(**{**vars(config), "image_size": ds.image_size})
    if not len(ds):
        raise InputError("dataset has no items")
    teacher = _model(args.teacher, args.teacher_ckpt, args.teacher_seed, toy_teacher()).astype(config.dtype)
    if args.cache:
        targets = TeacherCache.load(args.cache, config, teacher)
    else:
        targets = cache_teacher(teacher, ds, config, jobs=args.jobs)
    student = build_encoder(student_spec, args.student_seed).astype(config.dtype)

    feat_dir = out / "features"
    feat_dir.mkdir(exist_ok=True)
    probe_id = ds.ids[0]
    probe = nx.Tensor(ds.image(probe_id)[None].astype(config.dtype))
    export_feature_pgm(targets.target(probe_id), feat_dir / "teacher.pgm", args.pgm_mode)

    def on_epoch(epoch, model, curve):
        with nx.no_grad():
            export_feature_pgm(encode(model, probe).data, feat_dir / f"epoch_{epoch + 1:02d}.pgm", args.pgm_mode)
        print(f"epoch {epoch + 1}/{config.epochs} mean_huber={curve.epochs[-1][1]:.6g}", flush=True)

    _, curve = distill(student, ds, targets, config, on_epoch=on_epoch)
    save_checkpoint(student.state_dict(), out / "student.gmkd")
    curve.write_csv(out / "loss.csv", include_timing=args.timing)
    print(f"last_loss={curve.last_loss:.6g} first_epoch={curve.epoch_means[0]:.6g} steps={len(curve.steps)}")
    print(f"wrote {out / 'student.gmkd'} and {out / 'loss.csv'}")
    return 0


def cmd_eval(args):
    if args.show_published:
        print(format_miou_table())
        return 0
    _require(args.teacher, args.teacher_ckpt, args.student, args.student_ckpt, args.dataset, args.prompts)
    if not args.student:
        raise InputError("--student spec is required (or use --show-published)")
    out = _out_dir(args)
    ds = _dataset(args)
    if not len(ds):
        raise InputError("dataset has no items to evaluate")
    prompts = read_prompts(args.prompts) if args.prompts else default_prompts(ds, args.prompt_kind)
    teacher = _model(args.teacher, args.teacher_ckpt, args.teacher_seed, toy_teacher())
    student = _model(args.student, args.student_ckpt, args.student_seed)
    result = evaluate_miou(SegmentationPipeline(teacher, args.threshold), SegmentationPipeline(student, args.threshold),
                           ds, prompts, jobs=args.jobs, dataset_name=args.dataset or "synthetic")
    result.write_csv(out / "eval.csv")
    print(result.summary())
    return 0


def cmd_profile(args):
    if args.show_published:
        print(format_distillation_table())
        red = prof.published_reductions()
        print(f"recomputed: params -{red['params_percent']:.2f}% ({red['params_abs_m']:.2f}M), "
              f"flops -{red['flops_percent']:.2f}% ({red['flops_abs_m']:.1f}M)")
        if not args.spec:
            return 0
    if not args.spec:
        raise InputError("at least one --spec is required")
    _require(*args.spec)
    specs = [load_spec(p) for p in args.spec]
    out = Path(args.out_dir) if args.out_dir else None
    status = 0
    for spec in specs:
        model = build_encoder(spec, args.seed)
        report = prof.profile_model(model, args.input_shape)
        print(report.to_text())
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{model.name}.profile.csv").write_text(report.to_csv())
        if args.oracle:
            for key, (analytic, oracle, ok) in prof.oracle_check(model, args.oracle_shape).items():
                line = f"oracle {key} @ {','.join(map(str, args.oracle_shape))}: analytic={analytic} oracle={oracle}"
                print(f"{line} {'PASS' if ok else 'FAIL'}")
                status = status if ok else 2
        if args.timing:
            x = nx.Tensor(np.zeros(args.oracle_shape, dtype=np.float32))
            model.astype(np.float32)
            start = time.perf_counter()
            with nx.no_grad():
                model(x)
            print(f"timing {model.name}: {time.perf_counter() - start:.3f}s (single run, unvalidated)")
        print()
    if args.compare:
        print(prof.compare_structures(specs, args.input_shape, args.seed).to_text())
    return status


def cmd_visualize(args):
    _require(args.spec, args.ckpt, args.image, args.dataset)
    out = _out_dir(args)
    model = _model(args.spec, args.ckpt, args.seed, toy_teacher())
    if args.image:
        image = read_ppm(args.image)
        stem = Path(args.image).stem
    else:
        ds = _dataset(args)
        if not len(ds):
            raise InputError("dataset has no items")
        stem = args.item or ds.ids[0]
        if stem not in ds.ids:
            raise InputError(f"item {stem!r} is not in the dataset")
        image = ds.image(stem)
    with nx.no_grad():
        emb = encode(model, nx.Tensor(image[None].astype(model.parameters()[0].dtype))).data
    path = out / f"{stem}.{args.mode}.pgm"
    export_feature_pgm(emb, path, args.mode)
    print(f"wrote {path} ({emb.shape[2]}x{emb.shape[3]})")
    if args.point:
        x, y = (float(v) for v in args.point.split(","))
        mask = decode_mask(emb, Prompt.point(x, y), image.shape[1:], args.threshold)
        export_mask_pgm(mask, out / f"{stem}.mask.pgm")
        print(f"wrote {out / f'{stem}.mask.pgm'} ({int(mask.data.sum())} foreground pixels)")
    return 0


# -- parser --------------------------------------------------------------------


def _common(p, out_default="out"):
    p.add_argument("--out-dir", default=out_default, help="directory for every output artifact")
    p.add_argument("--seed", type=int, default=0, help="seed for data order and synthetic data")
    p.add_argument("--jobs", type=int, default=1, help="threads for per-image work (cache build, evaluation)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _data_flags(p, with_size=True):
    p.add_argument("--dataset", help="manifest file (item_id<TAB>source); default: synthetic images")
    p.add_argument("--count", type=int, default=64, help="synthetic image count when no --dataset is given")
    if with_size:
        p.add_argument("--image-size", type=int, default=64,
                       help="side length of synthetic images" + _paper(PAPER_SETTINGS["image_size"]))


def _teacher_flags(p):
    p.add_argument("--teacher", help="teacher spec file (default: toy ViT, width 32, depth 4)")
    p.add_argument("--teacher-ckpt", help="teacher weights; default: initialise from --teacher-seed")
    p.add_argument("--teacher-seed", type=int, default=1000, help="teacher initialisation seed")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="gmsam", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset manifest and prompts", formatter_class=fmt)
    _common(p)
    p.add_argument("--count", type=int, default=64, help="number of images")
    p.add_argument("--image-size", type=int, default=64, help="image side" + _paper(PAPER_SETTINGS["image_size"]))
    p.add_argument("--split", default="train", choices=("train", "eval"), help="split tag")
    p.add_argument("--prompt-kind", default="point", choices=("point", "box"), help="prompt type written")
    p.add_argument("--write-images", action="store_true", help="also write PPM files and point the manifest at them")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cache", help="precompute teacher embeddings", formatter_class=fmt)
    _common(p, "cache")
    _data_flags(p)
    _teacher_flags(p)
    p.add_argument("--precision", type=int, default=32, choices=(32, 64), help="float width")
    p.set_defaults(func=cmd_cache)

    p = sub.add_parser("distill", help="distill a student encoder from the teacher", formatter_class=fmt)
    _common(p)
    _data_flags(p)
    _teacher_flags(p)
    p.add_argument("--student", required=True, help="student spec file")
    p.add_argument("--student-seed", type=int, default=2000, help="student initialisation seed")
    p.add_argument("--cache", help="teacher cache directory from `gmsam cache`")
    p.add_argument("--epochs", type=int, default=PAPER_SETTINGS["epochs"],
                   help="training epochs" + _paper(PAPER_SETTINGS["epochs"]))
    p.add_argument("--lr", type=float, default=PAPER_SETTINGS["learning_rate"],
                   help="Adam learning rate" + _paper(PAPER_SETTINGS["learning_rate"]))
    p.add_argument("--batch-size", type=int, default=PAPER_SETTINGS["batch_size"],
                   help="images per step" + _paper(PAPER_SETTINGS["batch_size"]))
    p.add_argument("--huber-delta", type=float, default=1.0, help="Huber transition point")
    p.add_argument("--precision", type=int, default=32, choices=(32, 64), help="float width")
    p.add_argument("--pgm-mode", default="first_channel", choices=("first_channel", "channel_mean"),
                   help="per-epoch feature map rendering")
    p.add_argument("--timing", action="store_true", help="add per-epoch seconds to loss.csv (not reproducible)")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("eval", help="mIoU of a student pipeline against the teacher's masks",
                       formatter_class=fmt)
    _common(p)
    _data_flags(p)
    _teacher_flags(p)
    p.add_argument("--student", help="student spec file")
    p.add_argument("--student-ckpt", help="student weights")
    p.add_argument("--student-seed", type=int, default=2000, help="student initialisation seed")
    p.add_argument("--prompts", help="prompt file (item_id<TAB>kind<TAB>coords); default: one per shape")
    p.add_argument("--prompt-kind", default="point", choices=("point", "box"), help="default prompt type")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD, help="similarity threshold")
    p.add_argument("--show-published", action="store_true", help="print the published mIoU rows and exit")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("profile", help="per-layer params and FLOPs", formatter_class=fmt)
    p.add_argument("--spec", action="append", default=[], help="spec file (repeatable)")
    p.add_argument("--input-shape", type=_shape, default=prof.PAPER_INPUT_SHAPE,
                   help="accounting input b,c,h,w" + _paper("1,3,1024,1024"))
    p.add_argument("--compare", action="store_true", help="sorted table with pairwise reductions")
    p.add_argument("--oracle", action="store_true",
                   help="cross-check against inventory walk and instrumented execution")
    p.add_argument("--oracle-shape", type=_shape, default=(1, 3, 64, 64),
                   help="input for the instrumented forward pass of --oracle/--timing")
    p.add_argument("--timing", action="store_true", help="time one forward pass (unvalidated)")
    p.add_argument("--show-published", action="store_true", help="print the published cost table")
    p.add_argument("--seed", type=int, default=0, help="initialisation seed")
    p.add_argument("--out-dir", help="also write one CSV report per spec here")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("visualize", help="render an embedding (and optional point mask) as PGM",
                       formatter_class=fmt)
    _common(p)
    _data_flags(p)
    p.add_argument("--spec", help="encoder spec file (default: toy teacher)")
    p.add_argument("--ckpt", help="encoder weights")
    p.add_argument("--image", help="PPM image instead of a dataset item")
    p.add_argument("--item", help="dataset item id (default: first)")
    p.add_argument("--mode", default="first_channel", choices=("first_channel", "channel_mean"),
                   help="channel selection")
    p.add_argument("--point", help="x,y point prompt; also writes the decoded mask")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD, help="similarity threshold")
    p.set_defaults(func=cmd_visualize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingDivergenceError as exc:
        print(f"error: training diverged at step {exc.step}: {exc}", file=sys.stderr)
        return 2
    except NumericDomainError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return 2
    except (GmsamError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
