// SPDX-License-Identifier: Apache-2.0
//! Compiles and runs a small C program against the generated header and the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "bntrace.h"

#define CHECK(call) do { BntStatus s_ = (call); if (s_ != BNT_STATUS_OK) { \
    fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, bnt_last_error_message()); return 1; } } while (0)

int main(void) {
    const char *json = "{\"nodes\": ["
        "{\"name\": \"a\", \"cardinality\": 2, \"parents\": [], \"cpt\": [[0.6, 0.4]]},"
        "{\"name\": \"b\", \"cardinality\": 2, \"parents\": [\"a\"], \"cpt\": [[0.7, 0.3], [0.2, 0.8]]}]}";
    BntNetwork *net = NULL;
    CHECK(bnt_network_from_json(json, &net));
    uint64_t c = 0;
    CHECK(bnt_network_complexity(net, &c));
    uint32_t rec[2] = {1, 1};
    double lp = 0.0;
    CHECK(bnt_network_log_joint(net, rec, 2, &lp));
    BntDataset *pool = NULL;
    CHECK(bnt_network_sample(net, 100, 7, &pool));
    BntNetwork *learned = NULL;
    CHECK(bnt_learn(pool, 1, 1.0, &learned));
    double auc = 0.0;
    CHECK(bnt_bound_auc(446.0, 3000.0, &auc));
    if (bnt_network_load("/nonexistent.json", &net) != BNT_STATUS_IO || bnt_last_error_message() == NULL)
        return 2;
    printf("%llu %.6f %zu %.4f\n", (unsigned long long)c, lp, bnt_dataset_rows(pool), auc);
    bnt_dataset_free(pool);
    bnt_network_free(learned);
    bnt_network_free(net);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/<test> -> target/<profile>
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libbntrace_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let bin = work.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("a C compiler named cc is on PATH");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        format!("3 {:.6} 100 0.6074", (0.4f64 * 0.8).ln())
    );
}
