use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nr-pdcch"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn nr-pdcch")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lint_clean_config_exits_zero() {
    let cell = data("cell.toml");
    let o = run(&["lint", path(&cell), "--horizon", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 20);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["slot"], i as u64);
        assert!(l["cces"].as_u64().unwrap() <= l["limits"]["cces"].as_u64().unwrap());
        assert!(l["candidates"].as_u64().unwrap() <= l["limits"]["candidates"].as_u64().unwrap());
    }
    assert_eq!(lines[0]["dropped_ss"], serde_json::json!([3]));
}

#[test]
fn lint_violations_only_prints_nothing_for_clean_config() {
    let o = run(&["lint", path(&data("cell.toml")), "--violations-only"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
}

#[test]
fn lint_invalid_config_exits_one_with_json_violations() {
    let o = run(&["lint", path(&data("bad_cell.toml"))]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(first["code"], "coreset_duration");
    assert_eq!(first["subject"]["kind"], "coreset");
    for l in out.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v["code"].is_string() && v["detail"].is_string());
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["lint", "/nonexistent/cell.toml"])), 2);
    assert_eq!(code(&run(&["lint", path(&data("cell.toml")), "--ca", "1,2"])), 2);
    assert_eq!(
        code(&run(&[
            "candidates",
            path(&data("cell.toml")),
            "--rnti",
            "1",
            "--slots",
            "5..5"
        ])),
        2
    );
    assert_eq!(
        code(&run(&["dump-mapping", path(&data("cell.toml")), "--coreset", "9"])),
        2
    );

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.toml");
    fs::write(&junk, "mu = \"fast\"\n").unwrap();
    assert_eq!(code(&run(&["lint", path(&junk)])), 2);
}

#[test]
fn dump_mapping_covers_every_re_once() {
    let o = run(&["dump-mapping", path(&data("cell.toml")), "--coreset", "1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "cce,reg,prb,symbol,subcarrier,kind");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // 22 CCEs x 6 REGs x 12 subcarriers.
    assert_eq!(rows.len(), 22 * 6 * 12);
    let mut seen = std::collections::BTreeSet::new();
    for r in &rows {
        assert!(seen.insert((r[2], r[3], r[4])), "RE mapped twice: {r:?}");
    }
    let dmrs = rows.iter().filter(|r| r[5] == "dmrs").count();
    assert_eq!(dmrs, 22 * 6 * 3);
}

#[test]
fn candidates_csv_is_in_range() {
    let o = run(&[
        "candidates",
        path(&data("cell.toml")),
        "--rnti",
        "0x4601",
        "--slots",
        "0..=3",
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "ss,slot,symbol,L,m,first_cce");
    let mut slots = std::collections::BTreeSet::new();
    for l in lines {
        let f: Vec<u64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        slots.insert(f[1]);
        assert_eq!(f[5] % f[3], 0, "{l}");
    }
    assert_eq!(slots.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
}

#[test]
fn candidates_rejects_invalid_config() {
    let o = run(&[
        "candidates",
        path(&data("bad_cell.toml")),
        "--rnti",
        "1",
        "--slots",
        "0..1",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let sc = data("scenario.toml");
    let a = run(&["simulate", path(&sc)]);
    let b = run(&["simulate", path(&sc)]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["simulate", path(&sc), "--seed", "7"]);
    assert_eq!(a.stdout, c.stdout);
    let stats: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(stats["seed"], 7);
    assert_eq!(stats["scheduled"], stats["successes"]);
    assert!(stats["scheduled"].as_u64().unwrap() > 0);
}

#[test]
fn simulate_reports_invalid_cell_and_bad_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cell = fs::read_to_string(data("bad_cell.toml")).unwrap();
    let sc = dir.path().join("s.toml");
    fs::write(
        &sc,
        format!(
            "seed = 1\nhorizon = 4\n\n[[ue]]\nrnti = 1\n\n[cell]\n{}",
            indent_tables(&bad_cell)
        ),
    )
    .unwrap();
    let o = run(&["simulate", path(&sc)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(&sc, "seed = 1\n").unwrap();
    assert_eq!(code(&run(&["simulate", path(&sc)])), 2);
}

/// Re-roots a standalone cell file under `[cell]`.
fn indent_tables(cell: &str) -> String {
    cell.lines()
        .map(|l| {
            if let Some(rest) = l.strip_prefix("[[") {
                format!("[[cell.{rest}")
            } else if let Some(rest) = l.strip_prefix('[') {
                format!("[cell.{rest}")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn vectors_pass_and_detect_corruption() {
    let o = run(&["vectors", path(&data("vectors.txt"))]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().all(|l| l.ends_with("PASS")));

    let text = fs::read_to_string(data("vectors.txt")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("v.txt");
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let last = lines[2].pop().unwrap();
    lines[2].push(if last == '0' { '1' } else { '0' });
    fs::write(&f, lines.join("\n")).unwrap();
    let o = run(&["vectors", path(&f)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("line 3: FAIL"));

    let regen = run(&["vectors", path(&f), "--regenerate"]);
    assert_eq!(code(&regen), 0);
    assert_eq!(stdout(&regen).trim_end(), text.trim_end());

    fs::write(&f, "zz,1,1,0,00\n").unwrap();
    assert_eq!(code(&run(&["vectors", path(&f)])), 2);
}
