use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn glgmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glgmm"))
        .args(args)
        .output()
        .unwrap()
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fit_bundled_example() {
    let out = tempfile::tempdir().unwrap();
    let data = bundled("example_panel.csv");
    let before = fs::read(&data).unwrap();
    let o = glgmm(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        bundled("example_model.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(
        table.contains("Coef.") && table.contains("p-val"),
        "{table}"
    );

    let csv = fs::read_to_string(out.path().join("coefficients.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,estimate,se,z,p,ci_lo,ci_hi");
    assert_eq!(lines.len(), 1 + 4, "intercept plus three lag blocks");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(report["n_params"], 4);
    assert_eq!(report["n_subjects"], 200);
    assert_eq!(report["converged"], true);
    // input untouched
    assert_eq!(fs::read(&data).unwrap(), before);
}

#[test]
fn malformed_csv_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(
        &data,
        "id,time,y,x\n1,1,0.5,1.0\n1,2,abc,2.0\n2,1,0.1,0.3\n2,2,0.2,0.4\n",
    )
    .unwrap();
    let o = glgmm(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        bundled("example_model.toml").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));

    fs::write(&data, "id,time,y,x\n1,1,0.5,1.0\n1,2,0.5\n").unwrap();
    let o = glgmm(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--spec",
        bundled("example_model.toml").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn underidentified_spec_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("panel.csv");
    let o = glgmm(&[
        "simulate",
        "--setting",
        "2",
        "--subjects",
        "50",
        "--times",
        "2",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = dir.path().join("model.toml");
    fs::write(
        &spec,
        "link = \"identity\"\nintercept = true\n[[covariate]]\nname = \"x\"\nclass = \"III\"\nblocks = [[0], [1]]\n",
    )
    .unwrap();
    let fit = |spec: &Path| {
        glgmm(&[
            "fit",
            "--data",
            data.to_str().unwrap(),
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
    };
    // intercept 2 conditions, lag 0 two, lag 1 one: q = 5, p = 3
    assert_eq!(fit(&spec).status.code(), Some(0), "{}", stderr(&fit(&spec)));

    // two subjects for three parameters
    let tiny = dir.path().join("tiny.csv");
    fs::write(
        &tiny,
        "id,time,y,x\n1,1,0.5,1.0\n1,2,0.7,2.0\n2,1,0.1,0.3\n2,2,0.2,0.4\n",
    )
    .unwrap();
    let o = glgmm(&[
        "fit",
        "--data",
        tiny.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("underidentified"), "{}", stderr(&o));
}

#[test]
fn replicate_tables_quick_mode_skips_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = glgmm(&[
        "replicate-tables",
        "--reps",
        "10",
        "--setting",
        "2",
        "--threads",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("skipping tolerance checks"));
    let files: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files, vec![std::ffi::OsString::from("setting2.csv")]);
    let report = fs::read_to_string(dir.path().join("setting2.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 3 * 2);
    assert!(report
        .starts_with("setting,estimator,parameter,coverage,avg_ci_length,n_converged,n_failed"));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(!stdout.contains("PASS") && !stdout.contains("FAIL"));
}

#[test]
fn invalid_arguments_exit_nonzero() {
    assert!(!glgmm(&["replicate-tables", "--setting", "4"])
        .status
        .success());
    let o = glgmm(&["replicate-tables", "--reps", "0", "--setting", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = glgmm(&[
        "fit",
        "--data",
        "/nonexistent.csv",
        "--spec",
        "/nonexistent.toml",
        "--out",
        "/tmp/x",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
