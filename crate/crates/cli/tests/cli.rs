//! End-to-end tests of the `tempogen` binary at miniature scale.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tempogen")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        "[bank]\nper_class = 2\n\n[sim]\nsplit_sizes = [6, 2, 2]\n\n\
         [train]\nepochs = 3\nsteps = 10\nhidden = 16\nembed = 8\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["evaluate"]); // missing required args
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for verb in ["bank", "simulate", "train", "generate", "evaluate", "report"] {
        assert!(text.contains(verb), "help must list {verb}");
    }
}

#[test]
fn runtime_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work").display().to_string();
    // Simulate without a bank.
    let out = run(&["--out", &work, "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    // Broken config file.
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "nonsense = true\n").unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "--out", &work, "bank"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_pipeline_small() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let work = dir.path().join("work").display().to_string();
    let base = ["--config", config.as_str(), "--out", work.as_str()];

    for verb in ["bank", "simulate", "train"] {
        let out = run(&[&base[..], &[verb]].concat());
        assert_eq!(out.status.code(), Some(0), "{verb}: {out:?}");
    }
    assert!(dir.path().join("work/bank/index.json").exists());
    assert!(dir.path().join("work/data/train.jsonl").exists());
    assert!(dir.path().join("work/models/denoiser.json").exists());
    assert!(dir.path().join("work/runs/train.json").exists());

    let manifest = dir.path().join("work/data/test_multi.jsonl");
    let out = run(&[
        &base[..],
        &[
            "generate",
            "--manifest",
            manifest.to_str().unwrap(),
            "--caption",
            "a dog barks twice",
            "--label",
            "demo",
            "--jobs",
            "2",
        ],
    ]
    .concat());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let gen_dir = dir.path().join("work/generated/demo");
    assert!(gen_dir.join("caption_000.wav").exists());
    assert!(gen_dir.join("manifest.jsonl").exists());
    // Caption got normalized into the canonical grammar.
    let body = std::fs::read_to_string(gen_dir.join("manifest.jsonl")).unwrap();
    assert!(body.contains("\"caption\":\"dog barking 2 times\""), "{body}");

    let out = run(&[
        &base[..],
        &[
            "evaluate",
            "--manifest",
            manifest.to_str().unwrap(),
            "--generated",
            gen_dir.to_str().unwrap(),
            "--label",
            "demo",
        ],
    ]
    .concat());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(dir.path().join("work/reports/demo.json").exists());

    let out = run(&[&base[..], &["report"]].concat());
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let summary = std::fs::read_to_string(dir.path().join("work/reports/summary.csv")).unwrap();
    assert!(summary.starts_with("label,clips,f1_segment"));
    assert!(summary.lines().count() >= 2);
}

#[test]
fn evaluate_partial_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let work = dir.path().join("work").display().to_string();
    let base = ["--config", config.as_str(), "--out", work.as_str()];
    for verb in ["bank", "simulate"] {
        assert_eq!(run(&[&base[..], &[verb]].concat()).status.code(), Some(0));
    }
    // Point evaluate at an empty directory: all clips missing -> partial.
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let manifest = dir.path().join("work/data/test_single.jsonl");
    let out = run(&[
        &base[..],
        &[
            "evaluate",
            "--manifest",
            manifest.to_str().unwrap(),
            "--generated",
            empty.to_str().unwrap(),
            "--label",
            "partial",
        ],
    ]
    .concat());
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn seed_changes_simulation_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let mk = |name: &str, seed: &str| {
        let work = dir.path().join(name).display().to_string();
        for args in [
            vec!["--config", config.as_str(), "--out", work.as_str(), "--seed", seed, "bank"],
            vec!["--config", config.as_str(), "--out", work.as_str(), "--seed", seed, "simulate"],
        ] {
            assert_eq!(run(&args).status.code(), Some(0));
        }
        std::fs::read(dir.path().join(name).join("data/train.jsonl")).unwrap()
    };
    let a = mk("a", "4");
    let b = mk("b", "4");
    let c = mk("c", "5");
    assert_eq!(a, b, "same seed must reproduce byte-identical manifests");
    assert_ne!(a, c, "different seed must change the dataset");
}
