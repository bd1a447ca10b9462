"""Manifests, dataset splits, experiments, metrics and timing.

Manifest lines are JSON objects {"path", "label", "qp", "size", "split"};
relative paths are resolved against the manifest's directory.
"""
import csv
import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import cnn, featimg
from .errors import EmptyDataset
from .syntax import PuRecord, decode_stream

log = logging.getLogger(__name__)

FACE, NON_FACE = "face", "non-face"
LABELS = (NON_FACE, FACE)
SIZES = (64, 128)
QPS = (22, 32, 42)
UNDEFINED = "undefined"


@dataclass
class Entry:
    path: str
    label: str
    qp: int
    size: int
    split: str = ""

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")

    @property
    def y(self):
        return 1 if self.label == FACE else 0


def read_manifest(path):
    path = Path(path)
    base = path.parent
    entries = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{n}: {exc}") from None
            p = Path(obj["path"])
            if not p.is_absolute():
                p = base / p
            entries.append(Entry(str(p), obj["label"], int(obj["qp"]), int(obj["size"]),
                                 obj.get("split", "") or ""))
    return entries


def write_manifest(path, entries, relative_to=None):
    path = Path(path)
    base = Path(relative_to) if relative_to is not None else path.parent
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            p = Path(e.path)
            try:
                p = p.resolve().relative_to(base.resolve())
            except ValueError:
                pass
            obj = {"path": p.as_posix(), "label": e.label, "qp": e.qp, "size": e.size, "split": e.split}
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def _apportion(counts, frac):
    """Per-class sample counts summing to round(total * frac) (largest remainder)."""
    total = sum(counts)
    target = int(np.floor(total * frac + 0.5))
    exact = [c * frac for c in counts]
    out = [int(np.floor(v)) for v in exact]
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - out[i]), i))
    for i in order[:target - sum(out)]:
        out[i] += 1
    return out


def split(entries, test_frac=0.15, val_frac=0.10, seed=0):
    """Stratified shuffled split; val_frac is a fraction of the non-test part.

    Returns new entries in the caller's order with split tags set.
    """
    if not entries:
        raise EmptyDataset("nothing to split")
    rng = np.random.default_rng(seed)
    groups = [[i for i, e in enumerate(entries) if e.label == lab] for lab in LABELS]
    n_test = _apportion([len(g) for g in groups], test_frac)
    n_val = _apportion([len(g) - t for g, t in zip(groups, n_test)], val_frac)
    tags = [""] * len(entries)
    for g, nt, nv in zip(groups, n_test, n_val):
        for rank, k in enumerate(rng.permutation(len(g))):
            tags[g[k]] = "test" if rank < nt else ("val" if rank < nt + nv else "train")
    return [Entry(e.path, e.label, e.qp, e.size, t) for e, t in zip(entries, tags)]


def check_manifest(entries):
    """Warnings for protocol drift (never errors: users bring their own corpora)."""
    msgs = []
    if len({(e.size, e.qp) for e in entries}) > 1:
        msgs.append("entries mix several (size, qp) configurations")
    if entries:
        n_test = sum(e.split == "test" for e in entries)
        if abs(n_test / len(entries) - 0.15) > 0.02:
            msgs.append(f"test fraction {n_test / len(entries):.3f} differs from 0.15")
        faces = sum(e.label == FACE for e in entries)
        if faces and not 7 <= (len(entries) - faces) / faces <= 11:
            msgs.append(f"non-face:face ratio {(len(entries) - faces) / faces:.2f} is not about 9:1")
    for m in msgs:
        log.warning(m)
    return msgs


# metrics

@dataclass
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: object
    recall: object
    f1: object
    size: int = 0
    qp: int = 0
    provenance: dict = field(default_factory=dict)

    def to_json(self):
        d = asdict(self)
        for k in ("precision", "recall", "f1"):
            if d[k] is None:
                d[k] = UNDEFINED
        return json.dumps(d, sort_keys=True, indent=2) + "\n"


def metrics_from_counts(tp, fp, tn, fn):
    """(precision, recall, f1); None where a denominator is zero."""
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def report_from_predictions(pred, labels, size=0, qp=0, provenance=None):
    pred = np.asarray(pred, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    tn = int(np.sum(~pred & ~labels))
    fn = int(np.sum(~pred & labels))
    p, r, f = metrics_from_counts(tp, fp, tn, fn)
    return EvalReport(tp, fp, tn, fn, p, r, f, size, qp, dict(provenance or {}))


# data

def _pmap(fn, items, jobs):
    items = list(items)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _load_input(path):
    return featimg.load_fimg(path).as_input(np.float32)


def load_arrays(entries, jobs=1):
    if not entries:
        raise EmptyDataset("no entries to load")
    x = np.stack(_pmap(_load_input, [e.path for e in entries], jobs))
    y = np.array([e.y for e in entries], dtype=np.float32)
    return x, y


def corpus_hash(entries):
    """SHA-256 over the labelled entries and the bytes of every file they name."""
    h = hashlib.sha256()
    for e in sorted(entries, key=lambda e: (e.split, e.path)):
        h.update(f"{Path(e.path).name}|{e.label}|{e.qp}|{e.size}|{e.split}\n".encode())
        with open(e.path, "rb") as fh:
            h.update(hashlib.sha256(fh.read()).digest())
    return h.hexdigest()


def extract_file(path):
    """Feature images for every picture of an Annex-B file."""
    with open(path, "rb") as fh:
        return [featimg.from_parse(p) for p in decode_stream(fh.read())]


# experiments

def evaluate(model, entries, threshold=0.5, jobs=1):
    x, y = load_arrays(entries, jobs)
    pred = cnn.predict(model, x, threshold)
    return report_from_predictions(pred, y.astype(bool), model.input_size, model.qp)


def history_csv(hist):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_loss"])
    for epoch, tr, va in hist.epochs:
        w.writerow([epoch, repr(float(tr)), repr(float(va))])
    return buf.getvalue()


def run_experiment(entries, size, qp, cfg, out_dir, threshold=0.5, jobs=1, progress=None):
    """Train and evaluate one (size, qp) model; writes model, report and history.

    Entries without split tags are split here with cfg.seed.
    Returns (EvalReport, dict of artifact paths).
    """
    entries = [e for e in entries if e.size == size and e.qp == qp]
    if not entries:
        raise EmptyDataset(f"no entries for size {size}, qp {qp}")
    if not all(e.split in ("train", "val", "test") for e in entries):
        entries = split(entries, seed=cfg.seed)
    check_manifest(entries)
    parts = {tag: [e for e in entries if e.split == tag] for tag in ("train", "val", "test")}
    for tag, part in parts.items():
        if not part:
            raise EmptyDataset(f"{tag} split is empty for size {size}, qp {qp}")
    tx, ty = load_arrays(parts["train"], jobs)
    vx, vy = load_arrays(parts["val"], jobs)
    model = cnn.build_model(size, seed=cfg.seed, qp=qp)
    model, hist = cnn.train(model, tx, ty, vx, vy, cfg, log=progress)
    report = evaluate(model, parts["test"], threshold, jobs)
    report.provenance = {
        "seed": cfg.seed,
        "config": asdict(cfg),
        "threshold": threshold,
        "corpus_sha256": corpus_hash(entries),
        "n_train": len(parts["train"]),
        "n_val": len(parts["val"]),
        "n_test": len(parts["test"]),
        "epochs_run": len(hist.epochs),
        "best_epoch": hist.best_epoch,
        "stopped_early": hist.stopped_early,
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"model": out / "model.hfcn", "report": out / "report.json", "history": out / "history.csv"}
    cnn.save_model(paths["model"], model)
    paths["report"].write_text(report.to_json(), encoding="utf-8")
    paths["history"].write_text(history_csv(hist), encoding="utf-8")
    return report, paths


def sweep(manifest_dir, out_dir, cfg, threshold=0.5, jobs=1, progress=None):
    """One experiment per (size, qp) in {64, 128} x {22, 32, 42} found in the manifests."""
    entries = []
    for mf in sorted(Path(manifest_dir).glob("*.jsonl")):
        entries.extend(read_manifest(mf))
    if not entries:
        raise EmptyDataset(f"no manifest entries under {manifest_dir}")
    reports = {}
    for size in SIZES:
        for qp in QPS:
            subset = [e for e in entries if e.size == size and e.qp == qp]
            tag = f"size{size}_qp{qp}"
            if not subset:
                log.warning("no entries for %s; skipped", tag)
                continue
            if progress is not None:
                progress(f"== {tag}")
            report, _ = run_experiment(subset, size, qp, cfg, Path(out_dir) / tag, threshold, jobs, progress)
            reports[tag] = report
    summary = {tag: json.loads(r.to_json()) for tag, r in reports.items()}
    Path(out_dir, "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                                             encoding="utf-8")
    return reports


# timing

def _stats(samples):
    a = np.asarray(samples, dtype=np.float64)
    return {"count": int(a.size), "mean": float(a.mean()),
            "p50": float(np.percentile(a, 50)), "p95": float(np.percentile(a, 95))}


def _time_extract(path):
    """Per-picture seconds for parse + assembly of one file."""
    data = Path(path).read_bytes()
    t0 = time.perf_counter()
    pics = decode_stream(data)
    for p in pics:
        featimg.from_parse(p)
    dt = time.perf_counter() - t0
    return [dt / len(pics)] * len(pics)


def bench_extract(corpus_dir, sizes=SIZES, min_cnn_runs=10, seed=0, jobs=1):
    """Per-patch seconds for entropy parse + feature assembly and for CNN evaluation.

    The parse path contains no dequantization, transform, prediction or
    reconstruction code, so its timing is the entropy-decoding cost alone.
    Extraction is timed inside each worker; CNN timing is always sequential.
    """
    files = sorted(p for p in Path(corpus_dir).rglob("*") if p.suffix in (".hevc", ".bin", ".265"))
    if not files:
        raise EmptyDataset(f"no .hevc/.bin/.265 files under {corpus_dir}")
    extract = [t for ts in _pmap(_time_extract, files, jobs) for t in ts]
    report = {"corpus": str(corpus_dir), "patches": len(extract), "stages": {"extract": _stats(extract)}}
    rng = np.random.default_rng(seed)
    runs = max(min_cnn_runs, len(extract))
    for size in sizes:
        model = cnn.build_model(size, seed=seed)
        x = rng.random((size, size, 3)).astype(np.float32)
        model.forward(x)
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            model.forward(x)
            times.append(time.perf_counter() - t0)
        report["stages"][f"cnn_{size}"] = _stats(times)
    return report


# synthetic corpus

def _synthetic_records(rng, size, face):
    """Random PU tiling with class-dependent statistics.

    Faces: 4x4/8x8 PUs, near-horizontal angular modes (2..10), many bins.
    Non-faces: 16x16/32x32 PUs, near-vertical angular modes (24..30), few bins.
    The classes never share a PU size or a mode, so the set is separable.
    """
    records = []

    def leaf(x, y, s):
        if face:
            ipm = int(rng.integers(2, 11))
            bins = int(rng.integers(30, 60))
        else:
            ipm = int(rng.integers(24, 31))
            bins = int(rng.integers(2, 20))
        records.append(PuRecord(x, y, s, ipm, bins))

    def tree(x, y, s):
        lo, hi = (4, 8) if face else (16, 32)
        if s > hi or (s > lo and rng.random() < 0.5):
            h = s // 2
            for dy in (0, h):
                for dx in (0, h):
                    tree(x + dx, y + dy, h)
        else:
            leaf(x, y, s)

    for y in range(0, size, 32):
        for x in range(0, size, 32):
            tree(x, y, 32)
    return records


def make_synthetic_corpus(out_dir, n=400, size=64, qp=32, seed=0, face_fraction=0.5,
                          manifest_name="manifest.jsonl"):
    """Write ``n`` synthetic FIMG files plus a manifest; returns the entries."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_face = int(round(n * face_fraction))
    labels = [FACE] * n_face + [NON_FACE] * (n - n_face)
    entries = []
    for i, label in enumerate(labels):
        recs = _synthetic_records(rng, size, label == FACE)
        img = featimg.assemble(recs, size, size, qp)
        path = out / f"s{size}_qp{qp}_{i:05d}.fimg"
        featimg.save_fimg(path, img)
        entries.append(Entry(str(path), label, qp, size))
    write_manifest(out / manifest_name, entries)
    return entries
