use std::fs;
use std::path::Path;
use std::process::Command;

fn pudwr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pudwr")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn history(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("history.csv")).unwrap().lines().map(str::to_string).collect()
}

const SMALL_ADAPTIVE: &str = "experiment = config1\nmode = adaptive\norders = 1/1\nM_init = 8\nloops = 3\ntiming = false\n";

#[test]
fn reruns_are_byte_identical_without_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.txt", SMALL_ADAPTIVE);
    let mut outputs = Vec::new();
    for run in ["one", "two"] {
        let out = tmp.path().join(run);
        let flag = format!("--output={}", out.display());
        let res = pudwr(&["run", &cfg, &flag]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push((fs::read(out.join("history.csv")).unwrap(), fs::read(out.join("indicators.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(history(&tmp.path().join("one")).len(), 4);
}

#[test]
fn meta_file_replays_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.txt", SMALL_ADAPTIVE);
    let first = tmp.path().join("first");
    assert!(pudwr(&["run", &cfg, &format!("--output={}", first.display()), "--theta_x=0.3"]).status.success());
    let meta = first.join("meta.txt").to_str().unwrap().to_string();
    let text = fs::read_to_string(&meta).unwrap();
    assert!(text.contains("theta_x = 0.3"));
    assert!(text.contains("# status = ok"));
    let second = tmp.path().join("second");
    assert!(pudwr(&["run", &meta, &format!("--output={}", second.display())]).status.success());
    assert_eq!(history(&first), history(&second));
}

#[test]
fn uniform_mode_doubles_both_meshes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("u");
    let text = format!("experiment = config1\nmode = uniform\norders = 1/1\nM_init = 4\nloops = 4\noutput = {}\n", out.display());
    let cfg = write_config(tmp.path(), "u.txt", &text);
    assert!(pudwr(&["run", &cfg]).status.success());
    let rows = history(&out);
    assert_eq!(rows.len(), 5);
    for (i, row) in rows[1..].iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[1].parse::<usize>().unwrap(), 4 << i);
        assert_eq!(cols[2].parse::<usize>().unwrap(), 64 << (2 * i));
    }
}

#[test]
fn dof_budget_stops_after_the_first_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let cfg = write_config(tmp.path(), "b.txt", SMALL_ADAPTIVE);
    let res = pudwr(&["run", &cfg, "--dof_budget=10", &format!("--output={}", out.display())]);
    assert!(res.status.success());
    assert_eq!(history(&out).len(), 2);
}

#[test]
fn bad_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("experiment = config4\n", "experiment"),
        ("theta_x = 1.5\n", "theta_x"),
        ("pu = cg1\nestimator = full\n", "pu"),
        ("experiment = config2\ngoal = j1\n", "goal"),
        ("colour = blue\n", "colour"),
    ] {
        let cfg = write_config(tmp.path(), "bad.txt", text);
        let res = pudwr(&["run", &cfg, &format!("--output={}", tmp.path().join("x").display())]);
        assert_eq!(res.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&res.stderr).contains(key), "{text}");
    }
}

#[test]
fn listings_print() {
    let res = pudwr(&["list-experiments"]);
    let text = String::from_utf8_lossy(&res.stdout);
    for name in ["config1", "config2", "config3"] {
        assert!(text.contains(name));
    }
    let res = pudwr(&["print-defaults"]);
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("experiment = config1"));
    assert!(pudwr_config_parses(&text));
}

fn pudwr_config_parses(text: &str) -> bool {
    pudwr::cli_io::RunConfig::from_text(text).is_ok()
}
