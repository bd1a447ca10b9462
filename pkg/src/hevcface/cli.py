"""Command-line entry point: ``hevcface <command> ...``.

Exit codes:
    0   success
    1   check failed (gradcheck) or other runtime error
    2   UnsupportedFeature in an input stream
    3   malformed input (bitstream, FIMG or HFCN file)
    64  command-line usage error
"""
import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import cabac, cnn, featimg, harness
from .errors import (BitstreamError, EmptyDataset, FormatError, HevcFaceError, TilingGap,
                     UnsupportedFeature)
from .syntax import decode_stream

EXIT_OK, EXIT_FAIL, EXIT_UNSUPPORTED, EXIT_MALFORMED, EXIT_USAGE = 0, 1, 2, 3, 64


class _Parser(argparse.ArgumentParser):
    # argparse's own exit status 2 would collide with EXIT_UNSUPPORTED
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def exit_code_for(exc):
    if isinstance(exc, UnsupportedFeature):
        return EXIT_UNSUPPORTED
    if isinstance(exc, (BitstreamError, FormatError, TilingGap)):
        return EXIT_MALFORMED
    return EXIT_FAIL


def _default_jobs():
    return os.cpu_count() or 1


# extract

def _extract_one(path):
    """Worker: (images, None) or (None, (exit code, message))."""
    try:
        return harness.extract_file(path), None
    except HevcFaceError as exc:
        kind = "unsupported feature" if isinstance(exc, UnsupportedFeature) else "malformed stream"
        return None, (exit_code_for(exc), f"{path}: {kind}: {exc}")


def _extract_targets(inputs, counts, out):
    """Output path per (input, picture). A single one-picture input writes ``out``
    itself; anything else treats ``out`` as a directory."""
    out = Path(out)
    if len(inputs) == 1 and counts[0] == 1 and out.suffix:
        return [[out]]
    out.mkdir(parents=True, exist_ok=True)
    targets = []
    for path, n in zip(inputs, counts):
        stem = Path(path).stem
        if n == 1:
            targets.append([out / f"{stem}.fimg"])
        else:
            targets.append([out / f"{stem}_{k:03d}.fimg" for k in range(n)])
    return targets


def cmd_extract(args):
    results = harness._pmap(_extract_one, args.inputs, args.jobs)
    code = EXIT_OK
    for _, err in results:
        if err is not None:
            print(err[1], file=sys.stderr)
            code = code or err[0]
    if code:
        return code
    images = [imgs for imgs, _ in results]
    targets = _extract_targets(args.inputs, [len(i) for i in images], args.output)
    entries = []
    for imgs, paths in zip(images, targets):
        for img, path in zip(imgs, paths):
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            featimg.save_fimg(path, img, compact=args.compact)
            if args.label:
                entries.append(harness.Entry(str(path), args.label, img.qp, img.width))
    if args.ppm:
        if len(targets) != 1 or len(targets[0]) != 1:
            print("--ppm needs a single one-picture input", file=sys.stderr)
            return EXIT_USAGE
        featimg.save_ppm(args.ppm, images[0][0])
    if args.manifest:
        if not args.label:
            print("--manifest needs --label", file=sys.stderr)
            return EXIT_USAGE
        mpath = Path(args.manifest)
        old = harness.read_manifest(mpath) if mpath.exists() else []
        harness.write_manifest(mpath, old + entries)
    n = sum(len(t) for t in targets)
    print(f"wrote {n} feature image{'s' if n != 1 else ''}", file=sys.stderr)
    return EXIT_OK


# inspect

def _write_csv(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def cmd_inspect(args):
    data = Path(args.input).read_bytes()
    pictures = decode_stream(data, trace=args.bins_trace is not None)
    if not 0 <= args.picture < len(pictures):
        print(f"picture {args.picture} out of range (stream has {len(pictures)})", file=sys.stderr)
        return EXIT_USAGE
    pic = pictures[args.picture]
    rows = [(r.x, r.y, r.size, r.ipm, r.bins) for r in pic.records]
    header = ("x", "y", "size", "ipm", "bins")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            _write_csv(fh, header, rows)
    else:
        _write_csv(sys.stdout, header, rows)
    if args.bins_trace is not None:
        trace = cabac.bin_trace_rows(pic.bin_log)
        theader = ("bin_index", "mode", "ctx_index", "bin_value")
        if args.bins_trace == "-":
            if not args.csv:
                sys.stdout.write("\n")
            _write_csv(sys.stdout, theader, trace)
        else:
            with open(args.bins_trace, "w", newline="", encoding="utf-8") as fh:
                _write_csv(fh, theader, trace)
    print(f"{len(pic.records)} PUs, {pic.bins_total} bins, qp {pic.qp}, "
          f"{pic.alignment_bits} alignment bits", file=sys.stderr)
    return EXIT_OK


# training and evaluation

def _train_config(args):
    cfg = cnn.TrainConfig(seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, max_epochs=args.epochs)
    if getattr(args, "batch", None) is not None:
        cfg = replace(cfg, batch_size=args.batch)
    return cfg


def _progress(args):
    if getattr(args, "quiet", False):
        return None
    return lambda msg: print(msg, file=sys.stderr)


def cmd_train(args):
    cfg = _train_config(args)
    entries = [e for e in harness.read_manifest(args.manifest)
               if e.size == args.size and e.qp == args.qp]
    if not entries:
        raise EmptyDataset(f"no manifest entries for size {args.size}, qp {args.qp}")
    if not all(e.split in ("train", "val", "test") for e in entries):
        entries = harness.split(entries, seed=cfg.seed)
    harness.check_manifest(entries)
    train = [e for e in entries if e.split == "train"]
    val = [e for e in entries if e.split == "val"]
    tx, ty = harness.load_arrays(train, args.jobs)
    vx, vy = harness.load_arrays(val, args.jobs)
    model = cnn.build_model(args.size, seed=cfg.seed, qp=args.qp)
    model, hist = cnn.train(model, tx, ty, vx, vy, cfg, log=_progress(args))
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    cnn.save_model(out, model)
    if args.history:
        Path(args.history).write_text(harness.history_csv(hist), encoding="utf-8")
    if args.split_manifest:
        harness.write_manifest(args.split_manifest, entries)
    print(f"best epoch {hist.best_epoch} of {len(hist.epochs)}; model written to {out}",
          file=sys.stderr)
    return EXIT_OK


def cmd_predict(args):
    model = cnn.load_model(args.model)
    for path in args.inputs:
        img = featimg.load_fimg(path)
        p = float(cnn.predict_proba(model, img.as_input(model.dtype)))
        label = harness.FACE if p >= args.threshold else harness.NON_FACE
        print(f"{path}\t{p:.6f}\t{label}")
    return EXIT_OK


def cmd_eval(args):
    model = cnn.load_model(args.model)
    entries = harness.read_manifest(args.manifest)
    if any(e.split for e in entries):
        entries = [e for e in entries if e.split == "test"]
    report = harness.evaluate(model, entries, args.threshold, args.jobs)
    report.provenance = {"threshold": args.threshold, "n_test": len(entries),
                         "corpus_sha256": harness.corpus_hash(entries)}
    text = report.to_json()
    Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _train_config(args)
    reports = harness.sweep(args.manifest_dir, args.output, cfg, args.threshold, args.jobs,
                            _progress(args))
    for tag, r in reports.items():
        f1 = harness.UNDEFINED if r.f1 is None else f"{r.f1:.4f}"
        print(f"{tag}\tf1 {f1}\ttp {r.tp} fp {r.fp} tn {r.tn} fn {r.fn}")
    return EXIT_OK


def cmd_gradcheck(args):
    seeds = tuple(range(args.seed, args.seed + args.seeds))
    ok, _ = cnn.run_gradcheck_suite(seeds=seeds, sizes=tuple(args.sizes),
                                    per_layer=args.per_layer, log=print)
    print("gradient check passed" if ok else "gradient check FAILED")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args):
    report = harness.bench_extract(args.corpus, seed=args.seed, jobs=args.jobs)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args):
    entries = harness.make_synthetic_corpus(args.output, n=args.n, size=args.size, qp=args.qp,
                                            seed=args.seed, face_fraction=args.face_fraction)
    print(f"wrote {len(entries)} feature images and manifest.jsonl to {args.output}",
          file=sys.stderr)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="hevcface", description="Face detection from HEVC entropy-decoder features.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def jobs(sp):
        sp.add_argument("--jobs", type=int, default=_default_jobs(),
                        help="worker processes for file-level parallelism (default: CPU count)")

    sp = sub.add_parser("extract", help="parse HEVC streams into FIMG feature images")
    sp.add_argument("inputs", nargs="+", metavar="in.hevc")
    sp.add_argument("-o", "--output", required=True,
                    help="output .fimg (single one-picture input) or directory")
    sp.add_argument("--ppm", help="also write a PPM preview (single picture only)")
    sp.add_argument("--compact", action="store_true", help="store planes at 4x4 granularity")
    sp.add_argument("--label", choices=harness.LABELS, help="label for --manifest entries")
    sp.add_argument("--manifest", help="append the written files to this JSONL manifest")
    jobs(sp)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("inspect", help="dump per-PU records and optional CABAC bin trace")
    sp.add_argument("input", metavar="in.hevc")
    sp.add_argument("--csv", help="write x,y,size,ipm,bins here instead of stdout")
    sp.add_argument("--bins-trace", nargs="?", const="-", default=None, metavar="PATH",
                    help="write bin_index,mode,ctx_index,bin_value (default: stdout)")
    sp.add_argument("--picture", type=int, default=0, help="picture index in the stream")
    sp.set_defaults(func=cmd_inspect)

    def train_opts(sp, seed_required):
        sp.add_argument("--seed", type=int, required=seed_required, default=0)
        sp.add_argument("--epochs", type=int, help="maximum epochs (default 50)")
        sp.add_argument("--batch", type=int, help="mini-batch size (default 64)")
        sp.add_argument("-q", "--quiet", action="store_true", help="no per-epoch progress")

    sp = sub.add_parser("train", help="train one (size, qp) model")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--size", type=int, choices=harness.SIZES, required=True)
    sp.add_argument("--qp", type=int, choices=harness.QPS, required=True)
    sp.add_argument("-o", "--output", required=True, metavar="model.hfcn")
    sp.add_argument("--history", help="write epoch,train_loss,val_loss CSV here")
    sp.add_argument("--split-manifest", help="write the manifest with split tags here")
    train_opts(sp, True)
    jobs(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="face probability and label per feature image")
    sp.add_argument("--model", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("inputs", nargs="+", metavar="in.fimg")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("eval", help="precision, recall and F1 on a manifest's test split")
    sp.add_argument("--model", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("-o", "--output", required=True, metavar="report.json")
    sp.add_argument("--threshold", type=float, default=0.5)
    jobs(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="train and evaluate the {64,128} x {22,32,42} grid")
    sp.add_argument("--manifest-dir", required=True)
    sp.add_argument("-o", "--output", required=True, metavar="reports-dir")
    sp.add_argument("--threshold", type=float, default=0.5)
    train_opts(sp, False)
    jobs(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient check suite")
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds")
    sp.add_argument("--sizes", type=int, nargs="+", default=list(harness.SIZES),
                    choices=harness.SIZES)
    sp.add_argument("--per-layer", type=int, default=200,
                    help="sampled parameters per layer on the full network")
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("bench", help="per-patch timing of extraction and CNN evaluation")
    sp.add_argument("--corpus", required=True, help="directory of .hevc/.bin/.265 files")
    sp.add_argument("-o", "--output", required=True, metavar="timing.json")
    sp.add_argument("--seed", type=int, default=0)
    jobs(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("synth", help="write a synthetic separable feature-image corpus")
    sp.add_argument("-o", "--output", required=True, metavar="dir")
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--size", type=int, choices=harness.SIZES, default=64)
    sp.add_argument("--qp", type=int, choices=harness.QPS, default=32)
    sp.add_argument("--face-fraction", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except HevcFaceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
