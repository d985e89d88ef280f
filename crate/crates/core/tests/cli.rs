use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::process::Command;

use ptrans::io;

fn ptrans(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_ptrans")).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "ptrans {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn gen_transform_estimate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (moments, grid, poles, modulus, est) = (
        path(dir.path(), "a.csv"),
        path(dir.path(), "p.txt"),
        path(dir.path(), "poles.csv"),
        path(dir.path(), "mod.txt"),
        path(dir.path(), "est.json"),
    );
    ptrans(&["gen", "--n", "40", "--sigma", "0.05", "--seed", "3", "--out", &moments]);
    let data = io::read_moments(BufReader::new(File::open(&moments).unwrap()), 0.05).unwrap();
    assert_eq!(data.n(), 40);

    let stdout = ptrans(&[
        "ptransform", "--moments", &moments, "--sigma", "0.05", "--grid", "-1.1,1.1,-1.1,1.1,101", "--R", "30",
        "--seed", "3", "--out", &grid, "--poles", &poles, "--modulus", &modulus,
    ]);
    assert!(stdout.starts_with("mass "), "{stdout}");
    let field = io::read_grid(BufReader::new(File::open(&grid).unwrap())).unwrap();
    assert_eq!((field.lattice.nx, field.lattice.ny), (101, 101));
    let pool = io::read_pool(BufReader::new(File::open(&poles).unwrap()), f64::NAN).unwrap();
    assert_eq!(pool.len(), 30);
    assert!(Path::new(&modulus).exists());

    let stdout = ptrans(&[
        "estimate", "--ptrans", &grid, "--poles", &poles, "--radius", "0.05", "--reference-order", "5", "--out", &est,
    ]);
    assert!(stdout.starts_with("p_hat "), "{stdout}");
    let json: serde_json::Value = serde_json::from_reader(File::open(&est).unwrap()).unwrap();
    let p_hat = json["p_hat"].as_u64().unwrap() as usize;
    assert!(p_hat >= 4, "p_hat {p_hat}");
    assert_eq!(json["nodes"].as_array().unwrap().len(), p_hat);
    assert_eq!(json["clusters"].as_array().unwrap().len(), p_hat);
}

#[test]
fn density_modes_write_grids() {
    let dir = tempfile::tempdir().unwrap();
    for (mode, extra) in [
        ("analytic", vec!["--n", "10", "--sigma", "0.1"]),
        ("mc", vec!["--n", "4", "--sigma", "0.3", "--trials", "50"]),
        ("closed2", vec!["--s0", "1,0", "--s1", "0.5,-0.2", "--sigma", "0.5"]),
        ("purenoise", vec!["--n", "8"]),
    ] {
        let out = path(dir.path(), &format!("{mode}.txt"));
        let mut args = vec!["density", "--mode", mode, "--grid", "-1,1,-1,1,21", "--out", &out];
        args.extend(extra);
        ptrans(&args);
        let field = io::read_grid(BufReader::new(File::open(&out).unwrap())).unwrap();
        assert_eq!(field.values.len(), 441, "{mode}");
        assert!(field.max_value() > 0.0, "{mode}");
    }
}

#[test]
fn bad_arguments_are_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_ptrans"))
        .args(["density", "--mode", "closed2", "--s0", "1,0", "--out", "/dev/null"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--s1"));

    let out = Command::new(env!("CARGO_BIN_EXE_ptrans"))
        .args(["gen", "--n", "7", "--out", "/dev/null"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn small_table1_and_fig2_runs() {
    let dir = tempfile::tempdir().unwrap();
    let table = path(dir.path(), "t1.csv");
    let stdout = ptrans(&["table1", "--M", "2", "--R", "10", "--grid", "-1.1,1.1,-1.1,1.1,81", "--seed", "1", "--out", &table]);
    assert!(stdout.starts_with("accepted "), "{stdout}");
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("parameter,true_re,true_im,bias_re,bias_im,sd,mse"));
    assert!(text.contains("\nacceptance_rate,"));

    let fig = path(dir.path(), "fig2.csv");
    ptrans(&["fig2", "--M", "2", "--R", "10", "--seed", "1", "--out", &fig]);
    let text = std::fs::read_to_string(&fig).unwrap();
    assert_eq!(text.lines().next(), Some("m,e0,eR"));
    assert_eq!(text.lines().count(), 3);
}
