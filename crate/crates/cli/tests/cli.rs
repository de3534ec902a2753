use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn scenarios(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn basket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_basket"))
        .args(args)
        .env_remove("BASKET_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, contents).unwrap();
    p
}

#[test]
fn analyze_vemurafenib_text() {
    let o = basket(&["analyze", path(&data("vemurafenib.csv"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("RD      0.064  (-0.017, 0.146)"), "{out}");
    assert!(out.contains("iwRR    1.429  (0.884, 1.973)"), "{out}");
    assert!(out.contains("p = 0.0719  [exact]"), "{out}");
    assert!(out.contains("Z2 = 13.149  df = 5  p = 0.0220"), "{out}");
    assert!(out.contains("ATC             2    7  0.150  0.286  (0.037, 0.710)"));
}

#[test]
fn analyze_imatinib_json_matches_text() {
    let file = data("imatinib.csv");
    let text = stdout(&basket(&["analyze", path(&file)]));
    let o = basket(&["analyze", path(&file), "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rd = &v["estimates"][0]["estimate"]["value"];
    let point = rd["point"].as_f64().unwrap();
    assert!(text.contains(&format!("RD    {point:>7.3}")), "{text}");
    assert_eq!(format!("{point:.3}"), "0.056");
    let p = v["tests"][0]["result"]["value"]["p_value"]
        .as_f64()
        .unwrap();
    assert_eq!(format!("{p:.3}"), "0.012");
    assert!(text.contains(&format!("p = {p:.4}")));
    assert_eq!(v["tests"][0]["result"]["value"]["method"], "exact");
    let gof = v["gof"][1]["result"]["value"]["p_value"].as_f64().unwrap();
    assert_eq!(format!("{gof:.3}"), "0.784");
}

#[test]
fn analyze_csv_is_long_format() {
    let o = basket(&["analyze", path(&data("vemurafenib.csv")), "--format", "csv"]);
    let out = stdout(&o);
    let mut rows = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(
        rows.headers().unwrap(),
        vec!["section", "item", "quantity", "value"]
    );
    let point: f64 = rows
        .records()
        .map(|r| r.unwrap())
        .find(|r| &r[0] == "estimate" && &r[1] == "iwRR" && &r[2] == "point")
        .unwrap()[3]
        .parse()
        .unwrap();
    assert!((point - 1.428_571_428_571_428_5).abs() < 1e-12);
}

#[test]
fn models_reproduce_rankings() {
    let o = basket(&[
        "models",
        path(&data("vemurafenib.csv")),
        "--top",
        "5",
        "--last",
        "5",
    ]);
    let out = stdout(&o);
    assert!(out.contains("32 candidates, min GIC 35.494"), "{out}");
    for line in [
        "    1 *    35.494  1 2 6/ 3 4 5",
        "   17      47.228  1 2 3 4 5 6",
        "   32      50.488  1 2 3 5/ 4 6",
    ] {
        assert!(out.contains(line), "{line}\n{out}");
    }
    let o = basket(&["models", path(&data("imatinib.csv")), "--scale", "iwrr"]);
    let out = stdout(&o);
    assert!(out.contains("9 within 1"), "{out}");
    assert!(
        out.contains("    1 *    79.663  1 2 3 6 9 10/ 4 5 7 8"),
        "{out}"
    );
    assert!(out.contains("0.989 (0.367, 1.611)"));
    assert!(out.contains("2.159 (1.280, 3.038)"));
    assert!(
        out.contains("   10      80.864  1 2 3 6 8/ 4 5 7 9 10"),
        "{out}"
    );
}

#[test]
fn single_basket_has_one_model() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "one.csv", "label,y,n,pi0\nonly,3,12,0.2\n");
    let o = basket(&["models", path(&f), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["total_models"], 1);
    assert_eq!(v["models"][0]["homogeneous"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let o = basket(&["analyze", path(&empty)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));

    let bad = write(
        dir.path(),
        "bad.csv",
        "label,y,n,pi0\na,1,5,0.2\nb,7,5,0.2\n",
    );
    let o = basket(&["analyze", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv:3:"), "{}", stderr(&o));

    let o = basket(&["analyze", path(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = basket(&["analyze", path(&data("imatinib.csv")), "--scale", "xx"]);
    assert_eq!(o.status.code(), Some(2));

    let one = write(dir.path(), "one.csv", "label,y,n,pi0\na,1,5,0.2\n");
    let o = basket(&["gof", path(&one)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let rows: String = (0..13).map(|i| format!("b{i},1,10,0.1\n")).collect();
    let big = write(dir.path(), "big.csv", &format!("label,y,n,pi0\n{rows}"));
    let o = basket(&["models", path(&big), "--strategy", "all"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("restrict the strategy"));
    let o = basket(&["models", path(&big)]);
    assert!(o.status.success());
}

#[test]
fn weight_column_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "w.csv",
        "label,y,n,pi0,weight\na,2,10,0.1,2\nb,3,10,0.2,1\n",
    );
    let o = basket(&["test", path(&f), "--scale", "rr", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["result"]["value"]["statistic"], 7.0);
}

#[test]
fn monte_carlo_reports_seed_and_is_reproducible() {
    let file = data("vemurafenib.csv");
    let args = [
        "test",
        path(&file),
        "--method",
        "mc",
        "--seed",
        "11",
        "--reps",
        "5000",
    ];
    let a = stdout(&basket(&args));
    assert!(a.contains("Monte Carlo, 5000 draws, seed 11"), "{a}");
    assert_eq!(a, stdout(&basket(&args)));
    let mut one = args.to_vec();
    one.push("--add-one");
    let b = stdout(&basket(&one));
    assert_ne!(a, b);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested/report.json");
    let o = basket(&[
        "gof",
        path(&data("vemurafenib.csv")),
        "--format",
        "json",
        "--out",
        path(&target),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(target).unwrap()).unwrap();
    assert_eq!(v[0]["result"]["value"]["df"], 5);
}

#[test]
fn simulate_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_basket"))
        .args([
            "simulate",
            path(&scenarios("table7_2ga.json")),
            "--reps",
            "200",
            "--format",
            "csv",
        ])
        .env("BASKET_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed 20230216"));
    let table = fs::read_to_string(dir.path().join("identification.csv")).unwrap();
    assert_eq!(table, stdout(&o));
    assert!(table.starts_with(
        "scenario,strategy,basket,true_rate,estimate,bias_x100,mse_x100,reject_pct,replicates,failures"
    ));
    assert_eq!(table.lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    let entry = &manifest["scenarios"][0];
    assert_eq!(entry["seed"], 20_230_216);
    assert_eq!(entry["replicates"], 200);
    assert_eq!(entry["strategy"], "two-subclass");
    assert!(entry["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_estimation_layout() {
    let o = basket(&[
        "simulate",
        path(&scenarios("table5_rd_a_2_1.json")),
        "--reps",
        "100",
        "--seed",
        "5",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,estimator,truth,mean,bias,coverage,wald_rejection,exact_rejection,completed,failures"
    );
    assert!(lines
        .next()
        .unwrap()
        .starts_with("RD-A-2-1,MH-RD,0.0690476"));
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn simulate_rejects_bad_scenarios() {
    let o = basket(&[
        "simulate",
        path(&scenarios("table7_2ga.json")),
        "--reps",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replicates"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "s.json",
        r#"{"study":"estimation","label":"x","sizes":[5,5],"null_rates":[0.1],
            "truth":{"kind":"rates","values":[0.2,0.2]}}"#,
    );
    let o = basket(&["simulate", path(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("null_rates"), "{}", stderr(&o));
}
