import csv
import io
import json

import pytest

from hevcface import cli, featimg
from hevcface.bitio import NAL_VPS, split_annexb

import helpers


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_extract_writes_fimg_and_ppm(capsys, tmp_path):
    code, _, _ = run(capsys, "extract", helpers.CONF / "face_64_qp32.hevc", "-o", tmp_path / "a.fimg",
                     "--ppm", tmp_path / "a.ppm")
    assert code == 0
    img = featimg.load_fimg(tmp_path / "a.fimg")
    assert (img.width, img.height, img.qp) == (64, 64, 32)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n64 64\n255\n")


def test_extract_compact_and_multi(capsys, tmp_path):
    code, _, _ = run(capsys, "extract", helpers.CONF / "mixed_64_qp32_3frames.hevc",
                     helpers.CONF / "face_128_qp22.hevc", "-o", tmp_path / "out", "--compact",
                     "--jobs", 1, "--label", "face", "--manifest", tmp_path / "m.jsonl")
    assert code == 0
    names = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert names == ["face_128_qp22.fimg", "mixed_64_qp32_3frames_000.fimg",
                     "mixed_64_qp32_3frames_001.fimg", "mixed_64_qp32_3frames_002.fimg"]
    assert featimg.load_fimg(tmp_path / "out" / names[0]).compact
    lines = (tmp_path / "m.jsonl").read_text().splitlines()
    assert len(lines) == 4 and json.loads(lines[0])["label"] == "face"


def test_extract_truncated_exit_3(capsys, tmp_path):
    data = helpers.stream_bytes("face_64_qp32")
    (tmp_path / "t.hevc").write_bytes(data[:300])
    code, _, err = run(capsys, "extract", tmp_path / "t.hevc", "-o", tmp_path / "t.fimg")
    assert code == 3
    assert "CTU (" in err
    assert not (tmp_path / "t.fimg").exists()


def test_extract_garbage_exit_3(capsys, tmp_path):
    (tmp_path / "g.hevc").write_bytes(b"not a stream")
    assert run(capsys, "extract", tmp_path / "g.hevc", "-o", tmp_path / "g.fimg")[0] == 3


def test_extract_unsupported_exit_2(capsys, tmp_path):
    vps = next(u for u in split_annexb(helpers.stream_bytes("face_64_qp32")) if u.nal_unit_type == NAL_VPS)
    stream = helpers.annexb(vps, helpers.sps_nal(bit_depth_luma=10), helpers.pps_nal())
    (tmp_path / "u.hevc").write_bytes(stream)
    code, _, err = run(capsys, "extract", tmp_path / "u.hevc", "-o", tmp_path / "u.fimg")
    assert code == 2
    assert "bit_depth" in err


def test_usage_error_exit_64(capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main(["extract"])
    assert ei.value.code == 64


def test_inspect_csv_and_trace(capsys, tmp_path):
    code, out, err = run(capsys, "inspect", helpers.CONF / "face_64_qp32.hevc", "--csv",
                         tmp_path / "r.csv", "--bins-trace", tmp_path / "b.csv")
    assert code == 0
    rows = list(csv.reader((tmp_path / "r.csv").open()))
    assert rows[0] == ["x", "y", "size", "ipm", "bins"]
    recs = helpers.parsed("face_64_qp32")[0].records
    assert [tuple(map(int, r)) for r in rows[1:]] == [(r.x, r.y, r.size, r.ipm, r.bins) for r in recs]
    trace = list(csv.reader((tmp_path / "b.csv").open()))
    assert trace[0] == ["bin_index", "mode", "ctx_index", "bin_value"]
    assert len(trace) - 1 == helpers.trace("face_64_qp32")["slices"][0]["bin_count"]
    assert "3948 bins" in err


def test_inspect_stdout(capsys):
    code, out, _ = run(capsys, "inspect", helpers.CONF / "scene_64_qp42.hevc")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x", "y", "size", "ipm", "bins"]
    assert sum(int(r[2]) ** 2 for r in rows[1:]) == 64 * 64


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "-o", str(d / "syn"), "--n", "60", "--seed", "2"]) == 0
    assert cli.main(["train", "--manifest", str(d / "syn" / "manifest.jsonl"), "--size", "64",
                     "--qp", "32", "--seed", "2", "--epochs", "2", "-q", "-o", str(d / "m.hfcn"),
                     "--history", str(d / "h.csv"), "--split-manifest", str(d / "split.jsonl")]) == 0
    return d


def test_train_outputs(trained):
    assert (trained / "m.hfcn").read_bytes()[:4] == b"HFCN"
    assert (trained / "h.csv").read_text().startswith("epoch,train_loss,val_loss\n")
    tags = {json.loads(l)["split"] for l in (trained / "split.jsonl").read_text().splitlines()}
    assert tags == {"train", "val", "test"}


def test_train_requires_seed(capsys, trained):
    with pytest.raises(SystemExit) as ei:
        cli.main(["train", "--manifest", str(trained / "syn" / "manifest.jsonl"), "--size", "64",
                  "--qp", "32", "-o", str(trained / "x.hfcn")])
    assert ei.value.code == 64


def test_predict_is_repeatable(capsys, trained):
    files = sorted((trained / "syn").glob("*.fimg"))[:3]
    _, out1, _ = run(capsys, "predict", "--model", trained / "m.hfcn", *files)
    _, out2, _ = run(capsys, "predict", "--model", trained / "m.hfcn", *files)
    assert out1 == out2
    lines = out1.splitlines()
    assert len(lines) == 3
    path, p, label = lines[0].split("\t")
    assert 0 < float(p) < 1 and label in ("face", "non-face")


def test_predict_bad_model_exit_3(capsys, trained):
    f = sorted((trained / "syn").glob("*.fimg"))[0]
    assert run(capsys, "predict", "--model", f, f)[0] == 3


def test_eval_report(capsys, trained):
    code, out, _ = run(capsys, "eval", "--model", trained / "m.hfcn", "--manifest",
                       trained / "split.jsonl", "-o", trained / "r.json", "--jobs", 1)
    assert code == 0
    rep = json.loads((trained / "r.json").read_text())
    assert rep["tp"] + rep["fp"] + rep["tn"] + rep["fn"] == rep["provenance"]["n_test"] == 9
    assert json.loads(out) == rep


def test_gradcheck_small(capsys):
    code, out, _ = run(capsys, "gradcheck", "--sizes", 64, "--seeds", 1, "--per-layer", 3)
    assert code == 0
    assert "gradient check passed" in out


def test_bench(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", "--corpus", helpers.CONF, "-o", tmp_path / "t.json", "--jobs", 1)
    assert code == 0
    rep = json.loads((tmp_path / "t.json").read_text())
    assert rep["patches"] == 24 and set(rep["stages"]) == {"extract", "cnn_64", "cnn_128"}
