import json
import logging
from fractions import Fraction

import numpy as np
import pytest

from hevcface import cnn, featimg, harness
from hevcface.errors import EmptyDataset
from hevcface.harness import Entry, EvalReport, metrics_from_counts, split

import helpers


def entries(n_face, n_non, size=64, qp=32):
    return ([Entry(f"f{i}.fimg", "face", qp, size) for i in range(n_face)]
            + [Entry(f"n{i}.fimg", "non-face", qp, size) for i in range(n_non)])


def test_split_1000_gives_150_test():
    out = split(entries(100, 900), seed=0)
    tags = [e.split for e in out]
    assert tags.count("test") == 150
    assert tags.count("val") == 85
    assert tags.count("train") == 765


def test_split_stratified_small():
    out = split(entries(10, 90), seed=3)
    test = [e for e in out if e.split == "test"]
    assert 13 <= sum(e.label == "non-face" for e in test) <= 14
    assert 1 <= sum(e.label == "face" for e in test) <= 2


def test_split_deterministic_and_seeded():
    es = entries(30, 70)
    a = [e.split for e in split(es, seed=5)]
    assert a == [e.split for e in split(es, seed=5)]
    assert a != [e.split for e in split(es, seed=6)]
    assert [e.path for e in split(es, seed=5)] == [e.path for e in es]


def test_split_empty():
    with pytest.raises(EmptyDataset):
        split([])


def test_bad_label():
    with pytest.raises(ValueError):
        Entry("x", "cat", 32, 64)


def test_metric_examples():
    assert metrics_from_counts(1, 0, 9, 0) == (1.0, 1.0, 1.0)
    p, r, f = metrics_from_counts(95, 3, 0, 5)
    assert p == pytest.approx(0.9694, abs=1e-4)
    assert r == 0.95
    assert f == pytest.approx(0.9596, abs=1e-4)
    assert metrics_from_counts(0, 0, 10, 4) == (None, 0.0, None)


def test_metrics_random_matrices_exact():
    rng = np.random.default_rng(11)
    for _ in range(20):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 500, 4))
        p, r, f = metrics_from_counts(tp, fp, tn, fn)
        P = Fraction(tp, tp + fp)
        R = Fraction(tp, tp + fn)
        F = 2 * P * R / (P + R)
        assert abs(p - float(P)) <= 1e-12 and abs(r - float(R)) <= 1e-12 and abs(f - float(F)) <= 1e-12


def test_report_from_predictions_order_independent():
    rng = np.random.default_rng(2)
    pred = rng.random(200) > 0.5
    lab = rng.random(200) > 0.3
    a = harness.report_from_predictions(pred, lab)
    perm = rng.permutation(200)
    b = harness.report_from_predictions(pred[perm], lab[perm])
    assert (a.tp, a.fp, a.tn, a.fn) == (b.tp, b.fp, b.tn, b.fn)
    assert a.tp + a.fp + a.tn + a.fn == 200


def test_report_json_undefined():
    r = EvalReport(0, 0, 7, 3, *metrics_from_counts(0, 0, 7, 3), size=64, qp=22)
    d = json.loads(r.to_json())
    assert d["precision"] == "undefined" and d["f1"] == "undefined" and d["recall"] == 0.0
    assert d["size"] == 64 and d["qp"] == 22


def test_manifest_round_trip(tmp_path):
    es = split(entries(3, 5), seed=1)
    es = [Entry(str(tmp_path / e.path), e.label, e.qp, e.size, e.split) for e in es]
    harness.write_manifest(tmp_path / "m.jsonl", es)
    lines = (tmp_path / "m.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["path"] == "f0.fimg"  # stored relative to the manifest
    back = harness.read_manifest(tmp_path / "m.jsonl")
    assert back == es


def test_check_manifest_warnings(caplog):
    with caplog.at_level(logging.WARNING):
        msgs = harness.check_manifest(split(entries(50, 50), seed=0))
    assert any("9:1" in m for m in msgs)
    assert not harness.check_manifest(split(entries(100, 900), seed=0))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("syn")
    return d, harness.make_synthetic_corpus(d, n=80, size=64, qp=32, seed=4)


def test_synthetic_corpus(corpus):
    d, es = corpus
    assert len(es) == 80 and sum(e.label == "face" for e in es) == 40
    img = featimg.load_fimg(es[0].path)
    assert (img.width, img.height, img.qp) == (64, 64, 32)
    assert harness.read_manifest(d / "manifest.jsonl") == es


def test_evaluate_counts(corpus):
    _, es = corpus
    m = cnn.build_model(64)
    for p in m.params.values():
        p[...] = 0
    rep = harness.evaluate(m, es)  # p = 0.5 everywhere -> every entry predicted face
    assert (rep.tp, rep.fp, rep.tn, rep.fn) == (40, 40, 0, 0)
    assert rep.precision == 0.5 and rep.recall == 1.0
    assert harness.evaluate(m, es[::-1]).to_json() == rep.to_json()


def test_run_experiment_reproducible(corpus, tmp_path):
    _, es = corpus
    cfg = cnn.TrainConfig(max_epochs=2, seed=9)
    r1, p1 = harness.run_experiment(es, 64, 32, cfg, tmp_path / "a")
    r2, p2 = harness.run_experiment(es, 64, 32, cfg, tmp_path / "b")
    for k in ("model", "report", "history"):
        assert p1[k].read_bytes() == p2[k].read_bytes()
    prov = json.loads(p1["report"].read_text())["provenance"]
    assert prov["seed"] == 9 and prov["config"]["learning_rate"] == 1e-4
    assert len(prov["corpus_sha256"]) == 64
    assert prov["n_train"] + prov["n_val"] + prov["n_test"] == 80
    assert p1["history"].read_text().splitlines()[0] == "epoch,train_loss,val_loss"


def test_run_experiment_empty(corpus, tmp_path):
    _, es = corpus
    with pytest.raises(EmptyDataset):
        harness.run_experiment(es, 128, 32, cnn.TrainConfig(max_epochs=1), tmp_path)


def test_sweep_grid(tmp_path):
    mdir = tmp_path / "manifests"
    mdir.mkdir()
    for size in harness.SIZES:
        for qp in harness.QPS:
            es = harness.make_synthetic_corpus(tmp_path / f"c{size}_{qp}", n=40, size=size, qp=qp,
                                               seed=qp, manifest_name="m.jsonl")
            harness.write_manifest(mdir / f"s{size}_q{qp}.jsonl", es)
    reports = harness.sweep(mdir, tmp_path / "out", cnn.TrainConfig(max_epochs=1, batch_size=16))
    assert sorted(reports) == sorted(f"size{s}_qp{q}" for s in harness.SIZES for q in harness.QPS)
    for tag, r in reports.items():
        assert tag == f"size{r.size}_qp{r.qp}"
        assert (tmp_path / "out" / tag / "model.hfcn").exists()
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert set(summary) == set(reports)


def test_bench_report_shape():
    rep = harness.bench_extract(helpers.CONF, min_cnn_runs=5)
    assert rep["patches"] == 24
    for stage in ("extract", "cnn_64", "cnn_128"):
        assert set(rep["stages"][stage]) == {"count", "mean", "p50", "p95"}
    assert rep["stages"]["cnn_64"]["mean"] < rep["stages"]["cnn_128"]["mean"]


def test_bench_empty(tmp_path):
    with pytest.raises(EmptyDataset):
        harness.bench_extract(tmp_path)


def test_extract_file_parallel_matches_serial():
    files = [helpers.CONF / f"{n}.hevc" for n in ("face_64_qp22", "scene_64_qp42", "cat_64_qp37_ctu16")]
    serial = harness._pmap(harness.extract_file, files, 1)
    parallel = harness._pmap(harness.extract_file, files, 2)
    assert serial == parallel
