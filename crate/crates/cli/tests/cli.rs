use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ergodic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergodic")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scenarios_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(ergodic(&["scenarios", "--out", path(&a)]).status.success());
    assert!(ergodic(&["scenarios", "--out", path(&b)]).status.success());
    for name in ["two_state.csv", "two_post.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap());
        let text = String::from_utf8(x).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# config_hash=") && first.ends_with(" seed=0"), "{first}");
    }
    let two_state = fs::read_to_string(a.join("two_state.csv")).unwrap();
    assert!(two_state.contains("perfectly_ergodic,10,1,1,10,0,0"));
    assert!(two_state.contains("perfectly_ergodic,20,1,1,18,10,8"));
    assert!(two_state.contains("repeated_ergodic_5,10,1,2,10,0,0"));
}

#[test]
fn optimize_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, "k = 8\nn = 30\nfield_resolution = 40\n[optimizer]\nmax_iters = 200\n").unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(format!("{sub}{seed}"));
        let o = ergodic(&["optimize", "--config", path(&cfg), "--seed", seed, "--out", path(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("optimize_trajectory.csv")).unwrap()
    };
    assert_eq!(run("a", "3"), run("b", "3"));
    assert_ne!(run("c", "3"), run("d", "4"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "n = 0\n").unwrap();
    assert_eq!(ergodic(&["scenarios", "--config", path(&bad)]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(ergodic(&["scenarios", "--config", path(&missing)]).status.code(), Some(2));
    let out = dir.path().join("out");
    assert_eq!(ergodic(&["horizon", "--n", "7", "--out", path(&out)]).status.code(), Some(2));
}

#[test]
fn non_finite_objective_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wild.toml");
    fs::write(&cfg, "k = 4\nn = 10\nfield_resolution = 20\n[optimizer]\ninit_jitter = 1e300\n").unwrap();
    let out = dir.path().join("out");
    let o = ergodic(&["optimize", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_field_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("f.grid");
    fs::write(&field, "2 2 0 0 1 1\n1 1\n1 oops\n").unwrap();
    let traj = dir.path().join("t.csv");
    fs::write(&traj, "n,x,y,ux,uy\n0,0.5,0.5,0,0\n1,0.5,0.5,,\n").unwrap();
    let out = dir.path().join("out");
    let o = ergodic(&["reconstruct", "--field", path(&field), "--trajectory", path(&traj), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn reconstruct_order_zero_is_constant_one() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("uniform.grid");
    let mut text = String::from("4 4 0 0 1 1\n");
    for _ in 0..4 {
        text.push_str("1 1 1 1\n");
    }
    fs::write(&field, text).unwrap();
    let traj = dir.path().join("t.csv");
    fs::write(&traj, "n,x,y,ux,uy\n0,0.2,0.2,0.2,0.4\n1,0.3,0.4,0.6,0\n2,0.6,0.4,,\n").unwrap();
    let out = dir.path().join("out");
    let o = ergodic(&[
        "reconstruct", "--field", path(&field), "--trajectory", path(&traj), "--orders", "0,3", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k0 = fs::read_to_string(out.join("reconstruct_k0.grid")).unwrap();
    let values: Vec<f64> = k0
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert_eq!(values.len(), 16);
    assert!(values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    let errors = fs::read_to_string(out.join("reconstruct_error.csv")).unwrap();
    assert!(errors.lines().nth(1).unwrap().starts_with("k,l2_to_histogram,l2_to_field"));
}

#[test]
fn residual_reproduces_two_cell_oversampling() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("two.grid");
    fs::write(&field, "2 1 0 0 1 1\n1 1\n").unwrap();
    let traj = dir.path().join("t.csv");
    fs::write(
        &traj,
        "n,x,y,ux,uy\n0,0.25,0.5,0,0\n1,0.25,0.5,0,0\n2,0.25,0.5,0,0\n3,0.25,0.5,1,0\n4,0.75,0.5,,\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ergodic(&[
        "residual", "--field", path(&field), "--trajectory", path(&traj), "--split", "0.75", "--k", "1", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let flagged = fs::read_to_string(out.join("residual_flagged.csv")).unwrap();
    let rows: Vec<&str> = flagged.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0,0.25,0.5,"), "{}", rows[0]);
}
