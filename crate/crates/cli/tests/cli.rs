use std::path::PathBuf;
use std::process::Command;

fn feec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_feec"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("feec-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_mesh_counts() {
    for (n, m, verts, cells) in [(1, 4, 5, 4), (2, 2, 9, 8), (3, 1, 8, 6)] {
        let out = feec().args(["gen-mesh", &n.to_string(), &m.to_string()]).output().unwrap();
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["dim"], n);
        assert_eq!(v["vertices"].as_array().unwrap().len(), verts);
        assert_eq!(v["cells"].as_array().unwrap().len(), cells);
    }
}

#[test]
fn run_writes_reports_and_succeeds() {
    let dir = scratch("run");
    let mesh = dir.join("mesh.json");
    assert!(feec().args(["gen-mesh", "2", "2", "-o"]).arg(&mesh).status().unwrap().success());
    let status = feec()
        .args(["run", "--mesh"])
        .arg(&mesh)
        .args(["--r", "1..1", "--stages", "complex,whitney,projection", "--format", "csv", "--out"])
        .arg(&dir)
        .env("FEEC_THREADS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(dir.join("constants.csv").exists());
}

#[test]
fn negative_control_exits_nonzero() {
    let dir = scratch("neg");
    let out = feec()
        .args(["run", "--gen", "2,2", "--stages", "complex", "--fault", "flip-boundary-sign", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dd_zero"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json[0]["op"], "complex");
}

#[test]
fn bad_arguments_are_errors() {
    let out = feec().args(["run", "--gen", "5,1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = feec().args(["run", "--r", "3..1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
