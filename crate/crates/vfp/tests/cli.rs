use std::path::Path;
use std::process::{Command, Output};

const VFP: &str = env!("CARGO_BIN_EXE_vfp");

fn vfp(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(VFP);
    c.args(args).env_remove("VFP_THREADS");
    if let Some(t) = threads {
        c.env("VFP_THREADS", t);
    }
    c.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const EQUILIBRIUM: &str = r#"{"grid":{"dim":1,"nx":16,"nv":64,"vmax":8},"t_end":0.25}"#;

#[test]
fn run_on_equilibrium_passes_and_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "eq.json", EQUILIBRIUM);
    let out = dir.path().join("out");
    let o = vfp(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("time,mass,mom_1,energy,entropy,dissipation,third_moment\n"));
    assert_eq!(traj.lines().count(), 1 + 65);
    let audit = std::fs::read_to_string(out.join("audit.csv")).unwrap();
    assert!(audit.starts_with("check,value,bound,status,anchor\n"));
    assert!(out.join("config.json").exists() && out.join("final.txt").exists());
}

#[test]
fn check_on_corrupted_snapshot_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "eq.json", EQUILIBRIUM);
    let good = dir.path().join("good");
    assert_eq!(
        vfp(&["run", "--config", &cfg, "--out", good.to_str().unwrap()], None)
            .status
            .code(),
        Some(0)
    );

    let text = std::fs::read_to_string(good.join("final.txt")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[100] = "-1.0000000000000000e-3".into();
    write(dir.path(), "bad.txt", &(lines.join("\n") + "\n"));
    std::fs::copy(good.join("final.txt"), dir.path().join("ok.txt")).unwrap();
    let check = |snap: &str| {
        let c = format!(
            r#"{{"grid":{{"dim":1,"nx":16,"nv":64,"vmax":8}},"t_end":0.25,"initial":{{"preset":"file","path":"{snap}"}}}}"#
        );
        let cfg = write(dir.path(), "check.json", &c);
        let out = dir.path().join(format!("check_{snap}"));
        vfp(&["check", "--config", &cfg, "--out", out.to_str().unwrap()], None)
    };
    let o = check("bad.txt");
    assert_eq!(o.status.code(), Some(1));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("f_min") && table.contains("FAIL"), "{table}");
    assert_eq!(check("ok.txt").status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let odd = write(dir.path(), "odd.json", &EQUILIBRIUM.replace("64", "63"));
    let o = vfp(&["run", "--config", &odd, "--out", out], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nv must be even"));
    let unknown = write(
        dir.path(),
        "u.json",
        &EQUILIBRIUM.replace("\"t_end\"", "\"foo\":1,\"t_end\""),
    );
    let o = vfp(&["run", "--config", &unknown, "--out", out], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
    let eq = write(dir.path(), "eq.json", EQUILIBRIUM);
    assert_eq!(
        vfp(&["frobnicate", "--config", &eq, "--out", out], None).status.code(),
        Some(1)
    );
    assert_eq!(
        vfp(&["run", "--config", &eq, "--out", out], Some("zero")).status.code(),
        Some(1)
    );
}

#[test]
fn flag_only_audits_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // a momentum tolerance no discretization meets
    let cfg = write(
        dir.path(),
        "tight.json",
        r#"{"grid":{"dim":1,"nx":16,"nv":64,"vmax":8},"t_end":0.25,
            "initial":{"preset":"sin-perturbed-maxwellian","u":[0.3,0],"u_amplitude":[0.2,0]},
            "audit":{"momentum_tol":1e-18}}"#,
    );
    let out = dir.path().join("o");
    let o = vfp(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn compare_matched_runs_pass_with_distance_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cmp.json",
        r#"{"grid":{"dim":1,"nx":16,"nv":64,"vmax":8},"t_end":0.25,"reg":{"eps":0.2,"delta":0.1},
            "initial":{"preset":"sin-perturbed-maxwellian"},"particles":{"n_p":20000},"seed":11}"#,
    );
    let out = dir.path().join("o");
    let o = vfp(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("L1 distance") && stdout.contains("max |z|"), "{stdout}");
    assert!(out.join("compare.csv").exists());
}

#[test]
fn plot_writes_svgs_and_needs_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "eq.json", EQUILIBRIUM);
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(
        vfp(&["plot", "--config", &cfg, "--out", out], None).status.code(),
        Some(1)
    );
    assert_eq!(
        vfp(&["run", "--config", &cfg, "--out", out], None).status.code(),
        Some(0)
    );
    assert_eq!(
        vfp(&["plot", "--config", &cfg, "--out", out], None).status.code(),
        Some(0)
    );
    let svg = std::fs::read_to_string(Path::new(out).join("entropy.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(Path::new(out).join("moment_drift.svg").exists());
}
