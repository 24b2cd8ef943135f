//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "qemitter.h"

int main(void) {
    double v = 0.0;
    if (qe_hom_visibility(7.44, 0.0, INFINITY, &v) != QE_STATUS_OK) return 1;
    if (fabs(v - 1.0) > 1e-9) return 2;
    QeEmitter *h = NULL;
    if (qe_emitter_new(-1.0, 0.0, 0.0, 0.0, &h) != QE_STATUS_DOMAIN) return 3;
    if (qe_last_error_message() == NULL || h != NULL) return 4;
    if (qe_emitter_new(7.44, 0.0, 0.0, 0.0, &h) != QE_STATUS_OK) return 5;
    double t[8], p[8];
    if (qe_simulate_rabi(h, 50.0, 2.0, 8, 4, t, p, 8) != QE_STATUS_OK) return 6;
    qe_emitter_free(h);
    printf("%.6f\n", p[7]);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let lib = target_dir().join("libqemitter_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let p: f64 = String::from_utf8(run.stdout).unwrap().trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
}
