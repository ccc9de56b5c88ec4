use std::path::Path;

use lpr_core::denoise::{box_blur3, ExternalBridge};
use lpr_core::{Error, RealImage};

const BOX_BLUR_PY: &str = r#"
import json, struct, sys
d = sys.argv[1]
raw = open(d + "/in.lprf", "rb").read()
h, w, n = struct.unpack("<III", raw[4:16])
v = struct.unpack("<%df" % (h * w), raw[16:16 + 4 * h * w])
def m(i, k):
    p = 2 * k
    i %= p
    return i if i < k else p - 1 - i
out = [sum(v[m(y + a, h) * w + m(x + b, w)] for a in (-1, 0, 1) for b in (-1, 0, 1)) / 9.0
       for y in range(h) for x in range(w)]
open(d + "/out.lprf", "wb").write(b"LPRF" + struct.pack("<III", h, w, 1) + struct.pack("<%df" % (h * w), *out))
"#;

const SIGMA_PY: &str = r#"
import json, struct, sys
d = sys.argv[1]
s = json.load(open(d + "/meta.json"))["sigma"]
raw = open(d + "/in.lprf", "rb").read()
h, w, n = struct.unpack("<III", raw[4:16])
open(d + "/out.lprf", "wb").write(b"LPRF" + struct.pack("<III", h, w, 1) + struct.pack("<f", s) * (h * w))
"#;

fn sample() -> RealImage {
    RealImage::from_fn(13, 17, |r, c| ((r * 31 + c * 7) % 23) as f64 / 22.0 + 0.25 * (r as f64 * 0.3).sin()).unwrap()
}

fn has_python() -> bool {
    std::process::Command::new("python3").arg("--version").output().is_ok_and(|o| o.status.success())
}

fn script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn sh(cmd: &str) -> ExternalBridge {
    ExternalBridge::new(vec!["sh".into(), "-c".into(), cmd.into()])
}

fn max_abs_diff(a: &RealImage, b: &RealImage) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn copy_command_is_identity() {
    let v = sample();
    let out = sh(r#"cp "$0/in.lprf" "$0/out.lprf""#).run(&v, 0.1).unwrap();
    assert!(max_abs_diff(&v, &out) < 1e-6);
}

#[test]
fn box_blur_script_matches_in_process_filter() {
    if !has_python() {
        eprintln!("python3 not available, skipping");
        return;
    }
    let d = tempfile::tempdir().unwrap();
    let path = script(d.path(), "blur.py", BOX_BLUR_PY);
    let v = sample();
    let out = ExternalBridge::new(vec!["python3".into(), path]).run(&v, 0.1).unwrap();
    assert!(max_abs_diff(&box_blur3(&v), &out) < 1e-6);
}

#[test]
fn sigma_reaches_the_command() {
    if !has_python() {
        eprintln!("python3 not available, skipping");
        return;
    }
    let d = tempfile::tempdir().unwrap();
    let path = script(d.path(), "sigma.py", SIGMA_PY);
    let out = ExternalBridge::new(vec!["python3".into(), path]).run(&sample(), 0.375).unwrap();
    assert!(out.data().iter().all(|&x| x == 0.375));
}

#[test]
fn failures_are_bridge_errors() {
    let v = sample();
    let cases = [
        ("nonzero exit", sh("exit 4")),
        ("timeout", sh("sleep 5").with_timeout(0.2)),
        ("missing output", sh("true")),
        ("garbage output", sh(r#"printf junk > "$0/out.lprf""#)),
        ("empty command", ExternalBridge::new(vec![])),
        ("missing program", ExternalBridge::new(vec!["/nonexistent/denoiser".into()])),
    ];
    for (label, bridge) in cases {
        assert!(matches!(bridge.run(&v, 0.1), Err(Error::Bridge(_))), "{label}");
    }
}

#[test]
fn wrong_response_shape_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let small = d.path().join("small.lprf");
    lpr_core::io::write_lprf(&small, &[RealImage::filled(4, 4, 1.0).unwrap()]).unwrap();
    let two = d.path().join("two.lprf");
    let v = sample();
    lpr_core::io::write_lprf(&two, &[v.clone(), v.clone()]).unwrap();
    for src in [small, two] {
        let bridge = sh(&format!(r#"cp '{}' "$0/out.lprf""#, src.display()));
        assert!(matches!(bridge.run(&v, 0.1), Err(Error::Bridge(_))));
    }
}

#[test]
fn exchange_directory_is_removed() {
    let d = tempfile::tempdir().unwrap();
    let bridge = sh(r#"cp "$0/in.lprf" "$0/out.lprf""#).with_workdir(d.path());
    bridge.run(&sample(), 0.1).unwrap();
    assert!(matches!(sh("exit 1").with_workdir(d.path()).run(&sample(), 0.1), Err(Error::Bridge(_))));
    assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 0);
}
