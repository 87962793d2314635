use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flydram::simkit::{read_stats_csv, speedup};

const SMALL: [&str; 6] = ["--channels", "1", "--banks", "2", "--rows", "128"];

fn flydram(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flydram"))
        .current_dir(dir)
        .env_remove("FLYDRAM_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = flydram(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = flydram(dir, args);
    assert_eq!(out.status.code(), Some(1), "{args:?}");
    String::from_utf8(out.stderr).unwrap()
}

fn profile(dir: &Path) {
    ok(dir, &[&["profile-gen", "--seed", "1", "--out", "p.csv"][..], &SMALL].concat());
}

#[test]
fn profile_gen_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    profile(d.path());
    let first = fs::read(d.path().join("p.csv")).unwrap();
    let weak = fs::read(d.path().join("p.weak.csv")).unwrap();
    profile(d.path());
    assert_eq!(fs::read(d.path().join("p.csv")).unwrap(), first);
    assert_eq!(fs::read(d.path().join("p.weak.csv")).unwrap(), weak);
    ok(d.path(), &[&["profile-gen", "--seed", "2", "--out", "q.csv"][..], &SMALL].concat());
    assert_ne!(fs::read(d.path().join("q.csv")).unwrap(), first);
}

#[test]
fn guardband_timings_are_error_free() {
    let d = tempfile::tempdir().unwrap();
    profile(d.path());
    ok(d.path(), &["characterize", "--profile", "p.csv", "--trcd", "12.5,10", "--out", "ber.csv"]);
    let text = fs::read_to_string(d.path().join("ber.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert!(!rows.is_empty());
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], "trcd");
        assert_eq!((f[4], f[6].parse::<f64>().unwrap()), ("0", 0.0), "{row}");
    }
}

#[test]
fn truncated_map_names_the_address() {
    let d = tempfile::tempdir().unwrap();
    profile(d.path());
    ok(d.path(), &["regionmap", "--profile", "p.csv", "--out", "m.csv"]);
    let full = fs::read_to_string(d.path().join("m.csv")).unwrap();
    let truncated: Vec<&str> = full.lines().take(20).collect();
    fs::write(d.path().join("short.csv"), truncated.join("\n") + "\n").unwrap();
    ok(
        d.path(),
        &[
            &["simulate", "--workload", "stream", "--length", "4000", "--trace-out", "t.txt", "--out", "s.csv"][..],
            &SMALL,
        ]
        .concat(),
    );
    let err = fails(
        d.path(),
        &[&["simulate", "--trace", "t.txt", "--mode", "flydram", "--map", "short.csv", "--out", "x.csv"][..], &SMALL]
            .concat(),
    );
    assert!(err.contains("address 0x"), "{err}");
}

#[test]
fn validation_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    fails(d.path(), &["frobnicate"]);
    fails(d.path(), &["profile-gen", "--out", "p.csv"]);
    fails(d.path(), &["sweep", "--out-dir", "runs"]);
    profile(d.path());
    let text = fs::read_to_string(d.path().join("p.csv")).unwrap();
    fs::write(d.path().join("bad.csv"), text.replacen(",7.500,", ",-7.500,", 1)).unwrap();
    let err = fails(d.path(), &["regionmap", "--profile", "bad.csv", "--weak", "p.weak.csv", "--out", "m.csv"]);
    assert!(err.contains("line 5"), "{err}");
    fs::write(d.path().join("stale.csv"), "#flydram-stats v0\n").unwrap();
    fails(d.path(), &["report", "stale.csv", "--out-dir", "r"]);
}

#[test]
fn sweep_jobs_from_environment() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("run.toml"), "[geometry]\nchannels = 1\nbanks = 2\nrows = 128\n[trace]\nlength = 2000\n")
        .unwrap();
    let run = |dir: &str, jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_flydram"))
            .current_dir(d.path())
            .env("FLYDRAM_JOBS", jobs)
            .args(["sweep", "--config", "run.toml", "--seed", "5", "--out-dir", dir])
            .output()
            .unwrap()
    };
    assert_eq!(run("a", "lots").status.code(), Some(1));
    assert!(run("a", "3").status.success());
    assert!(run("b", "1").status.success());
    let list = |dir: &str| {
        let mut files: Vec<_> = fs::read_dir(d.path().join(dir)).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    // Three workloads, baseline plus one flydram granularity each.
    assert_eq!(list("a").len(), 6);
    assert_eq!(list("a"), list("b"));
}

#[test]
fn sweep_without_config_uses_defaults() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["sweep", "--seed", "2", "--out-dir", "runs"]);
    assert!(out.contains("6 runs"), "{out}");
    assert_eq!(fs::read_dir(d.path().join("runs")).unwrap().count(), 6);
}

#[test]
fn report_aggregates() {
    let d = tempfile::tempdir().unwrap();
    profile(d.path());
    let sim = |mode: &str, out: &str| {
        ok(
            d.path(),
            &["simulate", "--profile", "p.csv", "--mode", mode, "--length", "5000", "--seed", "2", "--out", out],
        );
    };
    sim("baseline", "base.csv");
    sim("flydram", "fly.csv");

    ok(d.path(), &["report", "base.csv", "--out-dir", "one"]);
    let input = fs::read_to_string(d.path().join("base.csv")).unwrap();
    let summary = fs::read_to_string(d.path().join("one/summary.csv")).unwrap();
    let f: Vec<&str> = input.lines().nth(2).unwrap().split(',').collect();
    let s: Vec<&str> = summary.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(s[..3], f[..3]);
    assert_eq!(s[3], "1");
    assert_eq!(s[4..12], f[5..13]);

    ok(d.path(), &["report", "base.csv", "base.csv", "--out-dir", "two"]);
    let two = fs::read_to_string(d.path().join("two/summary.csv")).unwrap();
    let t: Vec<&str> = two.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(t[3], "2");
    assert_eq!(t[4..12], s[4..12]);

    ok(d.path(), &["report", "base.csv", "fly.csv", "--out-dir", "pair"]);
    let base = read_stats_csv(fs::File::open(d.path().join("base.csv")).map(std::io::BufReader::new).unwrap()).unwrap();
    let fly = read_stats_csv(fs::File::open(d.path().join("fly.csv")).map(std::io::BufReader::new).unwrap()).unwrap();
    let expected = speedup(&base[0].stats, &fly[0].stats).unwrap();
    let pair = fs::read_to_string(d.path().join("pair/summary.csv")).unwrap();
    let row = pair.lines().find(|l| l.starts_with("flydram,")).unwrap();
    assert_eq!(row.rsplit(',').next().unwrap().parse::<f64>().unwrap(), expected);
    let bars = fs::read_to_string(d.path().join("pair/speedup.csv")).unwrap();
    assert_eq!(bars.lines().count(), 3);
}
