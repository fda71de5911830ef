use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kinomapf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinomapf")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kinomapf-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_run_compare_heatmap() {
    let dir = scratch("flow");
    let inst = dir.join("desk.inst");
    let out = kinomapf(&["gen", "desk", "-o", s(&inst)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("waypoints="));

    let mut csvs = Vec::new();
    for method in ["whca-v", "far-e"] {
        let res = dir.join(method);
        let out = kinomapf(&[
            "run", "-i", s(&inst), "-m", method, "--horizon", "120", "--reps", "2", "--timeout", "0", "--trace", "-o", s(&res),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read_dir(&res).unwrap().map(|e| e.unwrap().path()).find(|p| p.extension().is_some_and(|e| e == "csv")).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("instance,method,rep,seed,handled_units"));
        assert_eq!(text.lines().count(), 3);
        assert!(res.join(format!("trace_{method}_1.txt")).exists());
        csvs.push(csv);
    }

    let out = kinomapf(&["compare", s(&csvs[0]), s(&csvs[1])]);
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("whca-v") && table.contains("far-e"));

    let grids = dir.join("grids");
    let out = kinomapf(&["heatmap", s(&dir.join("whca-v/polls.bin")), "-o", s(&grids), "--pgm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(grids.join("tier0.txt").exists() && grids.join("tier0.pgm").exists());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = scratch("config");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "preset = \"desk\"\nmethod = \"cbs\"\nhorizon = 60.0\nseed = 4\n\n[solver]\ntimeout = 0.0\n").unwrap();
    let out = kinomapf(&["run", "-c", s(&cfg), "-m", "whca-n", "-o", s(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains(" whca-n rep=0 seed=4 "), "{stdout}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn unknown_names_are_rejected() {
    assert!(!kinomapf(&["run", "--preset", "desk", "-m", "dijkstra"]).status.success());
    assert!(!kinomapf(&["gen", "no-such-layout", "-o", "/dev/null"]).status.success());
}
