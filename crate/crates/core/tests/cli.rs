use std::process::Command;

fn vortlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortlab"))
}

fn write_config(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn presets_list_names_every_preset() {
    let out = vortlab().args(["presets", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (name, _) in vortlab::presets::PRESETS {
        assert!(text.contains(name));
    }
}

#[test]
fn config_errors_exit_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "experiment = inequalities\ncampaign.trials = many\n");
    let out = vortlab().arg("validate").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = vortlab().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_under_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "experiment = inequalities\ncampaign.trials = 20\noutput = ineq\n");
    let out = vortlab()
        .arg("run")
        .arg(&p)
        .env("VORTLAB_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("ineq/manifest.txt")).unwrap();
    assert!(manifest.starts_with("tool = vortlab\n"));
    for f in ["summary.csv", "campaign_product.csv", "ratio_product.svg", "config.resolved"] {
        assert!(dir.path().join("ineq").join(f).exists(), "{f}");
    }
}

#[test]
fn failed_assertion_exits_one_and_names_it() {
    // the ratio D_δ/|log δ| grows as δ shrinks, so this trend assertion fails
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "experiment = uniqueness_demo\ndomain.n = 32\ntime.snapshots = 2\ntime.t_final = 0.1\nassert.delta_trend = true\n",
    );
    let out = vortlab()
        .arg("run")
        .arg(&p)
        .env("VORTLAB_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assertion failed: delta_trend"));
}
