"""Build the parser conformance fixtures.

Encodes small patches with libx265 (through PyAV) using the reference
all-intra configuration, then decodes every stream with the instrumented
pure-Rust decoder in tools/reftrace to record its block structure and bin
sequence.  Output lands in tests/data/conformance/.

    python tools/make_conformance.py            # needs `pip install av` and cargo
"""
import argparse
import hashlib
import io
import json
import pathlib
import subprocess

import av
import numpy as np
from skimage import data as skdata
from skimage.transform import resize

ROOT = pathlib.Path(__file__).resolve().parent.parent
REFTRACE = ROOT / "tools" / "reftrace"

# all-intra, fixed QP, SAO off, no WPP, one slice, CTU 64
BASE_PARAMS = {
    "keyint": "1",
    "ipratio": "1",
    "no-sao": "1",
    "no-wpp": "1",
    "ctu": "64",
    "info": "0",
    "hash": "0",
    "frame-threads": "1",
    "pools": "1",
    "log-level": "error",
}


def _crop(img, y, x, size, scale=1.0):
    if scale != 1.0:
        h = int(round(size * scale))
        patch = img[y:y + h, x:x + h]
        patch = resize(patch, (size, size), anti_aliasing=True, preserve_range=True)
        return patch.astype(np.uint8)
    return img[y:y + size, x:x + size]


def _rgb(img):
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    return np.ascontiguousarray(img[..., :3])


def contents(size):
    rng = np.random.default_rng(size)
    return {
        "face": _rgb(_crop(skdata.astronaut(), 20, 160, size, 110 / size * 1.0 if size == 64 else 1.0)),
        "scene": _rgb(_crop(skdata.coffee(), 100, 200, size)),
        "cat": _rgb(_crop(skdata.chelsea(), 40, 120, size)),
        "noise": rng.integers(0, 256, (size, size, 3), dtype=np.uint8),
    }


def encode(frames, qp, extra=None, width=None, height=None):
    params = dict(BASE_PARAMS, qp=str(qp))
    params.update(extra or {})
    out = io.BytesIO()
    container = av.open(out, "w", format="hevc")
    stream = container.add_stream("libx265", rate=25)
    stream.height, stream.width = frames[0].shape[:2]
    stream.pix_fmt = "yuv420p"
    stream.options = {"x265-params": ":".join(f"{k}={v}" for k, v in params.items())}
    for img in frames:
        frame = av.VideoFrame.from_ndarray(img, format="rgb24").reformat(format="yuv420p")
        for packet in stream.encode(frame):
            container.mux(packet)
    for packet in stream.encode():
        container.mux(packet)
    container.close()
    return out.getvalue(), params


def reference_trace(path):
    exe = REFTRACE / "target" / "release" / "reftrace"
    if not exe.exists():
        subprocess.run(["cargo", "build", "--release"], cwd=REFTRACE, check=True)
    out = subprocess.run([str(exe), str(path)], check=True, capture_output=True, text=True).stdout
    slices = []
    for s in json.loads(out)["slices"]:
        bins = s.pop("bins")
        s["bin_count"] = len(bins)
        s["bins_sha256"] = hashlib.sha256(bins.encode()).hexdigest()
        s["first_bins"] = bins[:100]
        slices.append(s)
    return slices


def cases():
    for size in (64, 128):
        content = contents(size)
        for qp in (22, 32, 42):
            for name in ("face", "scene"):
                yield f"{name}_{size}_qp{qp}", [content[name]], qp, {}
    c64 = contents(64)
    c128 = contents(128)
    yield "cat_128_qp27_ctu32", [c128["cat"]], 27, {"ctu": "32"}
    yield "cat_64_qp37_ctu16", [c64["cat"]], 37, {"ctu": "16"}
    yield "noise_128_qp22", [c128["noise"]], 22, {}
    yield "noise_64_qp12", [c64["noise"]], 12, {}
    yield "face_136x80_qp30", [np.ascontiguousarray(skdata.astronaut()[10:90, 140:276])], 30, {}
    yield "scene_128_qp32_tskip", [c128["scene"]], 32, {"tskip": "1"}
    yield "face_128_crf28_aq", [c128["face"]], 28, {"crf": "28", "aq-mode": "2"}
    yield "scene_64_qp32_nosdh", [c64["scene"]], 32, {"no-signhide": "1"}
    yield "face_64_qp32_lossless", [c64["face"]], 32, {"cu-lossless": "1"}
    yield "mixed_64_qp32_3frames", [c64["face"], c64["scene"], c64["cat"]], 32, {}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-o", "--out", default=str(ROOT / "tests" / "data" / "conformance"))
    args = parser.parse_args()
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for name, frames, qp, extra in cases():
        stream, params = encode(frames, qp, extra)
        if "crf" in params:
            params.pop("qp")
        path = out_dir / f"{name}.hevc"
        path.write_bytes(stream)
        trace = {"stream": path.name, "x265_params": params, "slices": reference_trace(path)}
        (out_dir / f"{name}.trace.json").write_text(json.dumps(trace, indent=1))
        index.append(name)
        print(name, len(stream), [s["bin_count"] for s in trace["slices"]])
    (out_dir / "index.json").write_text(json.dumps(index, indent=1))


if __name__ == "__main__":
    main()
