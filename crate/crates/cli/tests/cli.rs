use std::path::Path;
use std::process::{Command, Output};

fn mlcbart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlcbart")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = mlcbart(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--scenario", "weak", "--seed", "7", "--n-train", "50", "--n-test", "20", "--out", out.to_str().unwrap()]);
    }
    for f in ["train.csv", "test.csv", "test_true_means.csv", "test_true_dist.csv", "scenario.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let header = String::from_utf8(read(&a.join("train.csv"))).unwrap();
    assert!(header.starts_with("x1,x2,x3,y1,y2,y3\n"));
}

#[test]
fn fit_predict_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |f: &str| d.join(f).to_str().unwrap().to_string();
    ok(&["simulate", "--scenario", "weak", "--seed", "3", "--n-train", "120", "--n-test", "40", "--out", d.to_str().unwrap()]);
    ok(&["fit", "--data", &p("train.csv"), "--labels", "y1,y2,y3", "--iters", "60", "--burn", "20", "--trees", "10", "--seed", "1", "--out", &p("model.json")]);
    ok(&["predict", "--model", &p("model.json"), "--data", &p("test.csv"), "--level", "0.9", "--seed", "2", "--out", &p("report.csv"), "--distribution-out", &p("dist.csv")]);

    let report = String::from_utf8(read(&d.join("report.csv"))).unwrap();
    let mut lines = report.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "instance_id");
    assert_eq!(header[1..3], ["top1_pattern", "top1_prob"]);
    assert_eq!(header[9..11], ["top5_pattern", "top5_prob"]);
    assert_eq!(header[11..14], ["marginal_y1", "ci_low_y1", "ci_high_y1"]);
    assert_eq!(*header.last().unwrap(), "decision_pattern");
    assert_eq!(lines.count(), 40);

    ok(&["evaluate", "--pred", &p("report.csv"), "--truth", &p("test.csv"), "--out", &p("metrics.json")]);
    let m: serde_json::Value = serde_json::from_slice(&read(&d.join("metrics.json"))).unwrap();
    for key in ["subset_accuracy", "hamming_loss", "macro_precision", "macro_f1", "mean_kl", "median_kl"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    assert!(m["mean_kl"].is_null());

    ok(&["evaluate", "--pred", &p("report.csv"), "--truth", &p("test.csv"), "--pred-dist", &p("dist.csv"), "--true-dist", &p("test_true_dist.csv"), "--out", &p("metrics2.json")]);
    let m: serde_json::Value = serde_json::from_slice(&read(&d.join("metrics2.json"))).unwrap();
    assert!(m["mean_kl"].as_f64().unwrap() >= 0.0);

    // same seed, same report
    ok(&["predict", "--model", &p("model.json"), "--data", &p("test.csv"), "--level", "0.9", "--seed", "2", "--out", &p("report2.csv")]);
    assert_eq!(read(&d.join("report.csv")), read(&d.join("report2.csv")));

    ok(&["predict", "--model", &p("model.json"), "--data", &p("test.csv"), "--loss", "hamming", "--out", &p("report3.csv")]);
}

#[test]
fn independent_mode_and_loss_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |f: &str| d.join(f).to_str().unwrap().to_string();
    std::fs::write(d.join("train.csv"), "a,b,y1,y2\n0.1,1,1,0\n0.5,2,0,1\n-0.3,0,1,1\n0.9,3,0,0\n0.2,1.5,1,0\n").unwrap();
    ok(&["fit", "--data", &p("train.csv"), "--labels", "y1,y2", "--mode", "independent", "--iters", "20", "--trees", "3", "--out", &p("m.json")]);
    let mut table = String::from("predicted,observed,loss\n");
    for a in ["00", "01", "10", "11"] {
        for b in ["00", "01", "10", "11"] {
            if a != b {
                table.push_str(&format!("{a},{b},1\n"));
            }
        }
    }
    std::fs::write(d.join("loss.csv"), table).unwrap();
    ok(&["predict", "--model", &p("m.json"), "--data", &p("train.csv"), "--loss", &p("loss.csv"), "--out", &p("r.csv")]);
}

#[test]
fn experiment_centered_columns_sum_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["experiment", "--reps", "5", "--scenarios", "weak", "--models", "mlcbart,ubart", "--iters", "20", "--trees", "5", "--n-train", "60", "--n-test", "20", "--seed", "4", "--out", out]);
    let mut r = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    let sa: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[3] == "subset_accuracy").collect();
    assert_eq!(sa.len(), 10);
    for rep in 1..=5 {
        let s: f64 = sa.iter().filter(|r| r[1] == *rep.to_string()).map(|r| r[5].parse::<f64>().unwrap()).sum();
        assert!(s.abs() < 1e-12);
    }
    let summary: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("summary.json"))).unwrap();
    assert_eq!(summary["summaries"].as_array().unwrap().len(), 2);
}

#[test]
fn errors_exit_nonzero() {
    let out = mlcbart(&["fit", "--bogus"]);
    assert!(!out.status.success());
    let out = mlcbart(&["predict", "--model", "/nonexistent/model.json", "--data", "x.csv", "--out", "r.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "x,y\n0.1,1\n0.2,0.5\n").unwrap();
    let out = mlcbart(&["fit", "--data", data.to_str().unwrap(), "--labels", "y", "--out", dir.path().join("m.json").to_str().unwrap()]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 2") && msg.contains('y'), "{msg}");
}
