use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tokenpress::harness::hand_trace_bundle;
use tokenpress::manifest::{write_bundle, Manifest, SubImageEntry};
use tokenpress::output::{read_meta, read_results};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokenpress"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) -> String {
    let out = dir.join("doc").to_string_lossy().into_owned();
    ok(&[
        "synth",
        "--out",
        &out,
        "--global",
        "--n-tokens",
        "100",
        "--redundancy",
        "0.3,0.6,0.9",
    ]);
    dir.join("doc/manifest.toml").to_string_lossy().into_owned()
}

#[test]
fn density_flags_default_to_shipped_values() {
    let tmp = tempfile::tempdir().unwrap();
    let m = synth(tmp.path());
    let plain = ok(&["density", "--manifest", &m]);
    let explicit = ok(&[
        "density",
        "--manifest",
        &m,
        "--alpha",
        "0.7",
        "--limit-k",
        "50",
    ]);
    assert_eq!(plain, explicit);
    assert_eq!(plain.lines().count(), 5);
    // 30 clones stay under the 50-peer limit; 60 and 90 exceed it.
    assert!(plain.lines().nth(2).unwrap().contains("1.0000"), "{plain}");
    assert!(plain.lines().nth(3).unwrap().contains("0.4000"), "{plain}");
}

#[test]
fn fixed_baseline_is_within_one_token_of_target() {
    let tmp = tempfile::tempdir().unwrap();
    let m = synth(tmp.path());
    let out = tmp.path().join("fixed");
    let o = out.to_string_lossy();
    ok(&[
        "baseline",
        "--manifest",
        &m,
        "--out",
        &o,
        "--method",
        "fixed",
        "--ratio",
        "0.5",
    ]);
    let index = read_results(&out).unwrap();
    assert_eq!(index.method.name, "fixed");
    assert_eq!(index.method.ratio, Some(0.5));
    for e in index.entries.iter().filter(|e| !e.is_global) {
        let target = 0.5 * e.n_tokens as f64;
        assert!(
            (e.n_retained as f64 - target).abs() <= 1.0,
            "{}: {}",
            e.id,
            e.n_retained
        );
    }
    for method in ["random", "uniform"] {
        let o = tmp.path().join(method);
        ok(&[
            "baseline",
            "--manifest",
            &m,
            "--out",
            &o.to_string_lossy(),
            "--method",
            method,
        ]);
        assert_eq!(read_results(&o).unwrap().entries.len(), 4);
    }
}

#[test]
fn outputs_embed_the_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let m = synth(tmp.path());
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[aggregation]\nknn_k = 2\n").unwrap();
    let out = tmp.path().join("res");
    ok(&[
        "compress",
        "--manifest",
        &m,
        "--out",
        &out.to_string_lossy(),
        "--config",
        &cfg.to_string_lossy(),
        "--seed",
        "7",
    ]);
    let index = read_results(&out).unwrap();
    assert_eq!(index.config.seed, 7);
    assert_eq!(index.config.aggregation.knn_k, 2);
    assert_eq!(index.config.density.limit_k, 50);
    let meta = read_meta(&out, &index.entries[1]).unwrap();
    assert_eq!(meta.config, index.config);
    let c = meta.compression.unwrap();
    assert_eq!(c.stream, 1);
    assert_eq!(c.retained_indices.len(), meta.n_retained);
    let global = read_meta(&out, &index.entries[0]).unwrap();
    assert!(global.is_global && global.compression.is_none() && global.ratio == 1.0);
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.toml");
    let out = run(&[
        "compress",
        "--manifest",
        &missing.to_string_lossy(),
        "--out",
        "x",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[Io]: "), "{err}");

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[density]\nalpha = 2.0\n").unwrap();
    let m = synth(tmp.path());
    let out = run(&[
        "compress",
        "--manifest",
        &m,
        "--out",
        "x",
        "--config",
        &bad.to_string_lossy(),
    ]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[InvalidConfig]: "), "{err}");
}

#[test]
fn usage_errors_document_flags() {
    let out = run(&[
        "baseline",
        "--manifest",
        "m",
        "--out",
        "o",
        "--method",
        "fixed",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--ratio"));
}

#[test]
fn selftest_passes() {
    let stdout = ok(&["selftest", "--instances", "200"]);
    assert_eq!(
        stdout.lines().filter(|l| l.starts_with("PASS")).count(),
        6,
        "{stdout}"
    );
    assert!(stdout.contains("6/6 checks passed"));
}

#[test]
fn stats_and_masks_from_hand_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let b = hand_trace_bundle();
    let manifest = Manifest {
        sub_images: vec![SubImageEntry::with_default_paths("trace", "toy", b.grid())],
        ..Default::default()
    };
    let m = tmp.path().join("doc/manifest.toml");
    write_bundle(&m, &manifest, &[b]).unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[density]\nlimit_k = 3\n").unwrap();
    let (m, cfg) = (
        m.to_string_lossy().into_owned(),
        cfg.to_string_lossy().into_owned(),
    );
    let res = tmp.path().join("res").to_string_lossy().into_owned();
    ok(&[
        "compress",
        "--manifest",
        &m,
        "--out",
        &res,
        "--config",
        &cfg,
    ]);

    let masks = tmp.path().join("masks");
    ok(&[
        "masks",
        "--manifest",
        &m,
        "--results",
        &res,
        "--out",
        &masks.to_string_lossy(),
    ]);
    let redundancy = fs::read_to_string(masks.join("trace_redundancy.pgm")).unwrap();
    let expected: String = (0..4)
        .map(|r| {
            let row: Vec<&str> = (0..4).map(|c| if r == c { "0" } else { "255" }).collect();
            row.join(" ") + "\n"
        })
        .collect();
    assert_eq!(redundancy, format!("P2\n4 4\n255\n{expected}"));
    let selection = fs::read_to_string(masks.join("trace_selection.pgm")).unwrap();
    assert_eq!(
        selection
            .split_whitespace()
            .skip(4)
            .filter(|&v| v == "255")
            .count(),
        4
    );

    let stats = tmp.path().join("stats");
    let printed = ok(&[
        "stats",
        "--results",
        &res,
        "--out",
        &stats.to_string_lossy(),
    ]);
    assert!(
        printed.contains("toy,1,0.25,0.25,0.25,0.25,0.25,0.25"),
        "{printed}"
    );
    for f in ["stats.json", "boxplot.csv", "histogram.csv"] {
        assert!(stats.join(f).is_file(), "{f}");
    }
    let hist = fs::read_to_string(stats.join("histogram.csv")).unwrap();
    assert!(hist.contains("toy,0.25,0.3,1\n"), "{hist}");
}
