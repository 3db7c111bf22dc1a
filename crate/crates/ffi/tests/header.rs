//! The generated header compiles, and a C program links against the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_is_valid_c_and_cpp() {
    if !have_cc() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let h = header_dir().join("stochheat.h");
    for args in [vec!["-fsyntax-only", "-Wall", "-Wextra", "-std=c99"], vec!["-fsyntax-only", "-x", "c++"]] {
        let st = Command::new("cc").args(&args).arg(&h).status().unwrap();
        assert!(st.success(), "cc {args:?} rejected the header");
    }
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "stochheat.h"

int main(void) {
    ShKernel *k = NULL;
    ShSpectral *s = NULL;
    double inv = 0.0;
    if (sh_kernel_new("simple1", &k) != SH_STATUS_OK) return 1;
    if (sh_spectral_new(k, &s) != SH_STATUS_OK) return 2;
    if (sh_spectral_upsilon_inverse(s, 1.0, &inv) != SH_STATUS_OK) return 3;
    if (sh_kernel_new("bogus", &k) != SH_STATUS_INVALID_ARGUMENT || strlen(sh_last_error()) == 0) return 4;
    printf("%.12f\n", inv);
    sh_spectral_free(s);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    if !have_cc() {
        eprintln!("no C compiler; skipping");
        return;
    }
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(Path::parent).unwrap().join("libstochheat_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let st = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success(), "linking against the static library failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.618033988750");
}
