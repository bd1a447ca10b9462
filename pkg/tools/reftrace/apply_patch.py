"""Copy heic-decoder 0.1.0 from the cargo registry and add bin/CU tracing hooks."""
import pathlib
import shutil
import sys

src = pathlib.Path(sys.argv[1])
dst = pathlib.Path(sys.argv[2])
if dst.exists():
    shutil.rmtree(dst)
shutil.copytree(src, dst)
here = pathlib.Path(__file__).parent
shutil.copy(here / "trace.rs", dst / "src/hevc/trace.rs")


def edit(rel, old, new, count=1):
    path = dst / rel
    text = path.read_text()
    if text.count(old) != count:
        raise SystemExit(f"{rel}: expected {count} match(es) for {old!r}, found {text.count(old)}")
    path.write_text(text.replace(old, new))


edit("src/hevc/mod.rs", "pub mod cabac;", "pub mod cabac;\npub mod trace;")
edit("src/hevc/cabac.rs", "        self.renormalize()?;\n        Ok(bin_val)\n",
     "        self.renormalize()?;\n        crate::hevc::trace::bin(0, bin_val);\n        Ok(bin_val)\n")
edit("src/hevc/cabac.rs", "            0\n        };\n        Ok(bin_val)\n    }\n\n    /// `FL(n)`",
     "            0\n        };\n        crate::hevc::trace::bin(1, bin_val);\n        Ok(bin_val)\n    }\n\n    /// `FL(n)`")
edit("src/hevc/cabac.rs", "            self.renormalize()?;\n            0\n        };\n        Ok(bin_val)",
     "            self.renormalize()?;\n            0\n        };\n        crate::hevc::trace::bin(2, bin_val);\n        Ok(bin_val)")
edit("src/hevc/ctu.rs", "            modes[0]\n        } else {",
     "            crate::hevc::trace::cu([x0 as u32, y0 as u32, log2_cb_size, 1, modes[0] as u32, modes[1] as u32, modes[2] as u32, modes[3] as u32]);\n            modes[0]\n        } else {")
edit("src/hevc/ctu.rs", "            pic.set_intra_mode(x0, y0, size, mode);\n            mode\n        };",
     "            pic.set_intra_mode(x0, y0, size, mode);\n            crate::hevc::trace::cu([x0 as u32, y0 as u32, log2_cb_size, 0, mode as u32, 0, 0, 0]);\n            mode\n        };")
toml = dst / "Cargo.toml"
toml.write_text(toml.read_text().replace('[[example]]\nname = "decode_file"', '[[example]]\nname = "decode_file"', 1))
edit("src/hevc/ctu.rs", "pub(crate) fn decode_slice_rows(", "pub fn decode_slice_rows(")
