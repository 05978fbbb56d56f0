//! End-to-end checks of the binary: exit codes, output files, manifest
//! replay and byte-for-byte determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_binshrink"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("binshrink-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_fixture(dir: &Path) -> PathBuf {
    // Six regulars plus two pitchers, months 4..9, with real between-period
    // movement so the naive normalizers stay positive.
    let mut csv = String::from("player_id,name,is_pitcher,month,ab,h\n");
    let players: [(&str, u8, [(u32, u32); 6]); 8] = [
        ("a1", 0, [(120, 40), (110, 35), (100, 28), (105, 22), (100, 21), (95, 20)]),
        ("b2", 0, [(80, 16), (85, 18), (90, 20), (88, 30), (92, 31), (85, 28)]),
        ("c3", 0, [(60, 20), (55, 19), (65, 21), (60, 10), (58, 11), (62, 12)]),
        ("d4", 0, [(200, 58), (190, 50), (210, 60), (205, 48), (195, 44), (200, 47)]),
        ("e5", 0, [(150, 50), (140, 39), (145, 40), (148, 34), (150, 33), (152, 36)]),
        ("f6", 0, [(90, 22), (95, 28), (92, 25), (88, 25), (90, 27), (93, 24)]),
        ("p7", 1, [(20, 3), (22, 2), (18, 4), (21, 6), (19, 5), (20, 5)]),
        ("p8", 1, [(15, 2), (16, 3), (14, 1), (15, 3), (17, 4), (16, 2)]),
    ];
    for (id, pit, months) in players {
        for (m, (ab, h)) in months.iter().enumerate() {
            csv.push_str(&format!("{id},{id} name,{pit},{},{ab},{h}\n", m + 4));
        }
    }
    let path = dir.join("data.csv");
    fs::write(&path, csv).unwrap();
    path
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn curves_runs_without_data() {
    let dir = tmp_dir("curves");
    let out = bin()
        .args(["curves", "--c", "0,0.25,0.375", "--n", "12", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let csv = fs::read_to_string(dir.join("out/curves.csv")).unwrap();
    assert!(csv.starts_with("c,N,p,bias,var_ratio"));
    // 3 offsets × 1 N × 99 grid points.
    assert_eq!(csv.lines().count(), 1 + 3 * 99);
}

#[test]
fn validate_writes_reports_and_replays_manifest() {
    let dir = tmp_dir("validate");
    let data = write_fixture(&dir);
    let out1 = dir.join("run1");
    let out = bin()
        .args(["validate", "--data"])
        .arg(&data)
        .args(["--scheme", "halves", "--cohort", "nonpitchers"])
        .args(["--estimators", "naive,mean,eb-mm,js"])
        .args(["--criteria", "tse-star,twse-star"])
        .arg("--out")
        .arg(&out1)
        .output()
        .unwrap();
    assert_success(&out);
    let report = fs::read_to_string(out1.join("report.csv")).unwrap();
    assert!(report.contains("nonpitchers,halves,naive,tse-star,1.000000"));
    assert!(out1.join("table.txt").is_file());

    // Replay the manifest into a second directory and compare everything
    // except the manifests' timestamp comment.
    let manifest_text = fs::read_to_string(out1.join("manifest.txt")).unwrap();
    let out2 = dir.join("run2");
    let replay_manifest = manifest_text.replace(
        &out1.display().to_string(),
        &out2.display().to_string(),
    );
    let replay_path = dir.join("replay.txt");
    fs::write(&replay_path, replay_manifest).unwrap();
    let out = bin().arg("--from-manifest").arg(&replay_path).output().unwrap();
    assert_success(&out);
    for file in ["report.csv", "table.txt"] {
        let a = fs::read_to_string(out1.join(file)).unwrap();
        let b = fs::read_to_string(out2.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs across replay");
    }
    let strip = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.replace("run2", "run1"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let m1 = strip(&fs::read_to_string(out1.join("manifest.txt")).unwrap());
    let m2 = strip(&fs::read_to_string(out2.join("manifest.txt")).unwrap());
    assert_eq!(m1, m2);
}

#[test]
fn missing_data_file_exits_three() {
    let dir = tmp_dir("missing");
    let out = bin()
        .args(["validate", "--data", "/nonexistent/file.csv", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--data"), "stderr was: {err}");
}

#[test]
fn config_errors_exit_two() {
    let dir = tmp_dir("cfg");
    let data = write_fixture(&dir);
    let out = bin()
        .args(["validate", "--data"])
        .arg(&data)
        .args(["--estimators", "bogus", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--estimators"));

    // Unknown flags are a clap-level config error (also exit 2).
    let out = bin().args(["curves", "--bogus-flag", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_cohort_exits_three() {
    let dir = tmp_dir("cohort");
    // Fixture with pitchers only; the nonpitcher estimation set is empty.
    let csv = "player_id,name,is_pitcher,month,ab,h\n\
               p1,P One,1,4,20,3\np1,P One,1,5,20,4\np1,P One,1,6,20,5\n\
               p1,P One,1,7,20,3\np1,P One,1,8,20,4\np1,P One,1,9,20,5\n";
    let data = dir.join("pitchers.csv");
    fs::write(&data, csv).unwrap();
    let out = bin()
        .args(["fit", "--data"])
        .arg(&data)
        .args(["--cohort", "nonpitchers", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("estimation set is empty"));
}

#[test]
fn scan_on_monthly_data_exits_three_naming_granularity() {
    let dir = tmp_dir("scan");
    let data = write_fixture(&dir);
    let out = bin()
        .args(["scan", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent from the dataset"));
}

#[test]
fn gof_months_emits_quantile_data() {
    let dir = tmp_dir("gof");
    let data = write_fixture(&dir);
    let out = bin()
        .args(["gof", "--data"])
        .arg(&data)
        .args(["--mode", "months", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let gof = fs::read_to_string(dir.join("out/gof.csv")).unwrap();
    assert!(gof.starts_with("player_id,m_i,z2,u,phi_inv_u,p_value,discovery"));
    let quant = fs::read_to_string(dir.join("out/quantiles.csv")).unwrap();
    assert!(quant.starts_with("theoretical_q,empirical_q"));
    let summary = fs::read_to_string(dir.join("out/summary.txt")).unwrap();
    assert!(summary.contains("effective_sample=8"), "{summary}");
}

#[test]
fn breakeven_reports_all_cohorts() {
    let dir = tmp_dir("breakeven");
    let data = write_fixture(&dir);
    let out = bin()
        .args(["breakeven", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let csv = fs::read_to_string(dir.join("out/breakeven.csv")).unwrap();
    assert!(csv.starts_with(
        "cohort,sum_inv_4n1,sum_inv_4n2,expected_sspe_naive,sse_to_mean,c_factor"
    ));
    for cohort in ["all", "nonpitchers", "pitchers"] {
        assert!(csv.contains(&format!("\n{cohort},")), "missing {cohort} row:\n{csv}");
    }
}

#[test]
fn gof_halves_runs_two_period_analysis() {
    let dir = tmp_dir("gofhalves");
    let data = write_fixture(&dir);
    let out = bin()
        .args(["gof", "--data"])
        .arg(&data)
        .args(["--mode", "halves", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let csv = fs::read_to_string(dir.join("out/gof.csv")).unwrap();
    assert!(csv.starts_with("player_id,z,p_value,discovery"));
    let summary = fs::read_to_string(dir.join("out/summary.txt")).unwrap();
    assert!(summary.contains("ks_p_value="), "{summary}");
}

#[test]
fn scan_runs_on_segment_level_data() {
    let dir = tmp_dir("scanok");
    // Three players with 18 ten-day segments each; one alternates sharply.
    let mut csv = String::from("player_id,name,is_pitcher,month,ab,h\n");
    for (id, amplitude) in [("steady1", 0u32), ("steady2", 0), ("streaky", 9)] {
        for seg in 1..=18u32 {
            let h = if seg % 2 == 0 { 10 + amplitude } else { 10 - amplitude };
            csv.push_str(&format!("{id},{id} Name,0,{seg},40,{h}\n"));
        }
    }
    let data = dir.join("segments.csv");
    fs::write(&data, csv).unwrap();
    let out = bin()
        .args(["scan", "--data"])
        .arg(&data)
        .args(["--q-star", "0.05", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let scan = fs::read_to_string(dir.join("out/scan.csv")).unwrap();
    assert!(scan.starts_with("player_id,m_i,z2,u,phi_inv_u,p_value,discovery"));
    let streaky_row = scan.lines().find(|l| l.starts_with("streaky,")).unwrap();
    assert!(streaky_row.ends_with(",1"), "streaky player not discovered: {streaky_row}");
    let series = fs::read_to_string(dir.join("out/series.csv")).unwrap();
    assert!(series.lines().count() >= 19, "series should carry 18 segments");
}

#[test]
fn simulate_is_deterministic_given_seed() {
    let dir = tmp_dir("simulate");
    let run = |out: &Path| {
        let o = bin()
            .args([
                "simulate",
                "--players",
                "60",
                "--reps",
                "8",
                "--seed",
                "42",
                "--estimators",
                "mean,js",
                "--criteria",
                "tse-star",
                "--out",
            ])
            .arg(out)
            .output()
            .unwrap();
        assert_success(&o);
        fs::read_to_string(out.join("summary.csv")).unwrap()
    };
    let a = run(&dir.join("a"));
    let b = run(&dir.join("b"));
    assert_eq!(a, b);
    assert!(a.starts_with("config_hash,estimator,criterion,mean,sd,q05,q50,q95,reps"));
    assert!(a.contains("mean-js,tse-star"));
}
