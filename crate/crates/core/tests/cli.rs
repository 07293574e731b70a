use std::path::Path;
use std::process::{Command, Output};

use hybrid_dp::eval::{parse_metrics, METRICS_HEADER};

fn bin(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybrid-dp"))
        .args(args)
        .env("HYBRID_DP_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("data/mix");
    let o = bin(
        dir.path(),
        &["synth", "--out", prefix.to_str().unwrap(), "--docs", "120", "--alpha", "6", "--seed", "4"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let docword = dir.path().join("data/mix.docword");
    assert!(docword.exists() && dir.path().join("data/mix.labels").exists());

    let o = bin(
        dir.path(),
        &["train", "--algo", "hcvb0", "--corpus", docword.to_str().unwrap(), "--sweeps", "6", "--seed", "1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run_dirs: Vec<_> = std::fs::read_dir(dir.path()).unwrap().flatten().filter(|e| e.file_name() != "data").collect();
    assert_eq!(run_dirs.len(), 1);
    let run = run_dirs[0].path();
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(METRICS_HEADER));
    let records = parse_metrics(csv.as_bytes()).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.heldout_perplexity > 0.0 && r.algorithm == "hcvb0"));
    assert!(records.windows(2).all(|w| w[0].wall_clock_s <= w[1].wall_clock_s));

    let o = bin(
        dir.path(),
        &[
            "eval",
            "--snapshot",
            run.join("model.snapshot").to_str().unwrap(),
            "--corpus",
            docword.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("perplexity="));
}

#[test]
fn stochastic_training_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("lda");
    let o = bin(
        dir.path(),
        &["synth", "--model", "lda", "--out", prefix.to_str().unwrap(), "--docs", "80", "--alpha", "0.3"],
    );
    assert!(o.status.success());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# small stochastic run\nalgo=hcsvb0\ncorpus={}\nsteps=4\nbatch-size=20\neval-every=2\nseed=3\n",
            dir.path().join("lda.docword").display()
        ),
    )
    .unwrap();
    let o = bin(dir.path(), &["train", "--config", cfg.to_str().unwrap(), "--steps", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = std::fs::read_dir(dir.path())
        .unwrap()
        .flatten()
        .find(|e| e.path().is_dir())
        .unwrap()
        .path();
    let records = parse_metrics(std::fs::read(run.join("metrics.csv")).unwrap().as_slice()).unwrap();
    let iterations: Vec<u64> = records.iter().map(|r| r.iteration).collect();
    assert_eq!(iterations, vec![2, 4, 6]);
    assert_eq!(records.last().unwrap().docs_processed, 120);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.docword");
    std::fs::write(&corpus, "2\n3\n2\n1 1 2\n2 3 1\n").unwrap();

    let o = bin(dir.path(), &["train", "--algo", "hcvb0", "--corpus", corpus.to_str().unwrap(), "-T", "40"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(dir.path(), &["train", "--algo", "tcvb0", "--corpus", corpus.to_str().unwrap(), "-T", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(dir.path(), &["train", "--algo", "nope", "--corpus", corpus.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(dir.path(), &["train", "--algo", "hcsvb0", "--corpus", corpus.to_str().unwrap(), "--kappa", "0.3"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.docword");
    std::fs::write(&bad, "2\n3\n2\n1 1 2\n2 9 1\n").unwrap();
    let o = bin(dir.path(), &["train", "--algo", "hcvb0", "--corpus", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
    let o = bin(dir.path(), &["train", "--algo", "cgs", "--corpus", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn properties_subcommand_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["properties", "--vectors", "4", "--draws", "5000", "--seed", "2"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.starts_with("PASS") || l.starts_with("FAIL")));
}
