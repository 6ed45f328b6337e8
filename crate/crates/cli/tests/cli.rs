use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
# four-element arrays on a 2-wavelength region keep this fast
num_tx = 4
num_rx = 4
region_side_wavelengths = 2
num_inits = 2
sensing_max_outer = 20
estimate_trials = 2
mle_grid_step = 0.02
";

fn lab(args: &[&str], threads_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ma-isac-lab"));
    cmd.args(args);
    match threads_env {
        Some(t) => cmd.env("MA_ISAC_THREADS", t),
        None => cmd.env_remove("MA_ISAC_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_kind_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.txt", SMALL);
    let out = dir.path().join("o.csv");
    let o = lab(&["fig-99", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "1"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_argument_is_a_config_error() {
    let o = lab(&["ma-count", "--seed", "1"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_config_files_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("nope.txt");
    let o = lab(&["ma-count", "--config", missing.to_str().unwrap(), "--out", out, "--seed", "1"], None);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write(dir.path(), "bad.txt", "snapshots = lots\n");
    let o = lab(&["ma-count", "--config", &cfg, "--out", out, "--seed", "1"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("snapshots"));

    let cfg = write(dir.path(), "c.txt", SMALL);
    let o = lab(&["ma-count", "--config", &cfg, "--out", out, "--seed", "1", "--trials", "0"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.txt", SMALL);
    let out = dir.path().join("no-such-dir").join("o.csv");
    let o = lab(
        &["convergence-sensing", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3"],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_inputs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.txt", &format!("{SMALL}sweep = 4\n"));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run = |out: &Path, env: Option<&str>, extra: &[&str]| {
        let mut args = vec!["ma-count", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"];
        args.extend_from_slice(extra);
        let o = lab(&args, env);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(&a, Some("1"), &[]);
    run(&b, None, &["--threads", "2"]);
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());

    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("experiment,sweep,scheme,metric,value,seed,wall_ms"));
    let metrics: Vec<&str> = lines.map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(metrics, vec!["crb_alpha", "crb_beta", "secrecy_rate"]);

    let c = dir.path().join("c.csv");
    run(&c, None, &[]);
    let o = lab(&["ma-count", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"], None);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn convergence_trace_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.txt", SMALL);
    let out = dir.path().join("o.csv");
    let o = lab(&["convergence-sensing", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 3);
    assert!(text.contains("eta_bar/init0") && text.contains("eta_bar/init1"));
}
