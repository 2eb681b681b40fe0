use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn recon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().unwrap())
                .collect()
        })
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "domain.elements = 10\ntime.steps = 10\nregularization.deltas = 0.1, 0.01\n";

#[test]
fn generate_writes_one_row_per_level() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "fig.cfg", "");
    let out = tmp.path().join("same");
    let run = recon(&["generate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let m = rows(&out.join("measurements.csv"));
    assert_eq!(m.len(), 51);
    assert!(m.iter().all(|r| r.len() == 3));
    assert_eq!(m[50][0], 1.0);
    assert_eq!(rows(&out.join("sigma_true.csv")).len(), 50);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("noise.seed = 0"));

    let cfg = write_config(tmp.path(), "fine.cfg", "data.space_refinement = 4\ndata.time_refinement = 4\n");
    let out = tmp.path().join("fine");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&out)]).status.success());
    assert_eq!(rows(&out.join("measurements.csv")).len(), 201);
    assert_eq!(rows(&out.join("sigma_true.csv")).len(), 50);
}

#[test]
fn zero_flux_gives_zero_measurements() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zero.cfg", "flux.kind = constant\nflux.value = 0\n");
    let out = tmp.path().join("out");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&out)]).status.success());
    assert!(rows(&out.join("measurements.csv")).iter().all(|r| r[1] == 0.0 && r[2] == 0.0));
}

#[test]
fn generation_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "noisy.cfg", "noise.eta = 0.1\nnoise.seed = 11\n");
    let run = |dir: &str, extra: &[&str]| -> Vec<u8> {
        let out = tmp.path().join(dir);
        let mut args = vec!["generate", "--config", s(&cfg), "--out", s(&out)];
        args.extend_from_slice(extra);
        assert!(recon(&args).status.success());
        fs::read(out.join("measurements.csv")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let c = run("c", &["--seed", "12"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let manifest = fs::read_to_string(tmp.path().join("c/manifest.txt")).unwrap();
    assert!(manifest.contains("noise.seed = 12"));
}

#[test]
fn same_grid_round_trip_needs_no_interpolation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let data = tmp.path().join("data");
    let res = tmp.path().join("res");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&data)]).status.success());
    let run = recon(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--measurements",
        s(&data.join("measurements.csv")),
        "--out",
        s(&res),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(!String::from_utf8_lossy(&run.stderr).contains("interpolating"));
    for f in ["sigma_avg1.csv", "sigma_avg2.csv", "sigma_avg3.csv"] {
        let r = rows(&res.join(f));
        assert_eq!(r.len(), 10);
        assert!(r.iter().all(|row| (0.5..=1.0).contains(&row[1])));
    }
    assert_eq!(rows(&res.join("sigma_spacetime.csv")).len(), 100);
    assert_eq!(rows(&res.join("diagnostics.csv")).len(), 2);
    let fit = rows(&res.join("fit.csv"));
    assert_eq!(fit.len(), 11);
    assert!(fit.iter().all(|r| r.len() == 5));
    // full-precision numbers
    let text = fs::read_to_string(res.join("fit.csv")).unwrap();
    let first = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(first.split(',').all(|c| c.split('e').next().unwrap().trim_start_matches('-').len() == 18));
}

#[test]
fn saturated_regularization_returns_midpoint_coefficient() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "huge.cfg",
        "domain.elements = 8\ntime.steps = 8\nregularization.deltas = 1e12\n",
    );
    let data = tmp.path().join("data");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&data)]).status.success());
    let run = recon(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--measurements",
        s(&data.join("measurements.csv")),
        "--out",
        s(&data),
    ]);
    assert!(run.status.success());
    for f in ["sigma_avg1.csv", "sigma_avg2.csv", "sigma_avg3.csv"] {
        assert!(rows(&data.join(f)).iter().all(|r| (r[1] - 0.75).abs() < 1e-6));
    }
}

#[test]
fn wave_pipeline_produces_the_same_file_set() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "wave.cfg",
        "problem.equation = wave\ndomain.elements = 6\ntime.steps = 8\ndata.time_refinement = 4\nregularization.deltas = 0.1, 0.01\nsolver.linear = gmres_gs\n",
    );
    let data = tmp.path().join("data");
    let res = tmp.path().join("res");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&data)]).status.success());
    assert_eq!(rows(&data.join("measurements.csv")).len(), 33);
    let run = recon(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--measurements",
        s(&data.join("measurements.csv")),
        "--out",
        s(&res),
    ]);
    let code = run.status.code().unwrap();
    assert!(code == 0 || code == 2, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stderr).contains("interpolating"));
    assert_eq!(rows(&res.join("sigma_avg3.csv")).len(), 6);
    assert_eq!(rows(&res.join("sigma_spacetime.csv")).len(), 48);
    assert_eq!(rows(&res.join("fit.csv")).len(), 9);
    assert_eq!(rows(&res.join("u_spacetime.csv")).len(), 9 * 7);
    assert!(rows(&res.join("diagnostics.csv")).iter().all(|r| r[3].is_finite()));
    assert!(recon(&["report", s(&res)]).status.success());
}

#[test]
fn wave_generation_reports_unstable_steps() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cfl.cfg", "problem.equation = wave\n");
    let run = recon(&["generate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("stability"));
}

#[test]
fn report_requires_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let run = recon(&["report", s(tmp.path())]);
    assert_eq!(run.status.code(), Some(3));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("sigma_avg1.csv") && err.contains("fit.csv"), "{err}");
}

#[test]
fn report_writes_plot_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let res = tmp.path().join("res");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&res)]).status.success());
    assert!(recon(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--measurements",
        s(&res.join("measurements.csv")),
        "--out",
        s(&res),
    ])
    .status
    .success());
    let plots = tmp.path().join("plots");
    let run = recon(&["report", s(&res), "--out", s(&plots)]);
    assert!(run.status.success());
    let avg = rows(&plots.join("averages.dat"));
    assert_eq!(avg.len(), 10);
    assert!(avg.iter().all(|r| r.len() == 5));
    for f in ["averages.dat", "u_spacetime.dat", "q_spacetime.dat", "sigma_spacetime.dat", "objective.dat", "fit.dat"] {
        let text = fs::read_to_string(plots.join(f)).unwrap();
        assert!(text.starts_with('#'), "{f}");
    }
    assert_eq!(rows(&plots.join("objective.dat")).len(), 2);
    assert_eq!(rows(&plots.join("u_spacetime.dat")).len(), 11 * 11);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.cfg", "domain.elements = many\n");
    assert_eq!(recon(&["generate", "--config", s(&bad)]).status.code(), Some(1));
    assert_eq!(recon(&["generate", "--config", s(&tmp.path().join("absent.cfg"))]).status.code(), Some(3));
    assert_eq!(recon(&["frobnicate"]).status.code(), Some(1));

    let cfg = write_config(tmp.path(), "short.cfg", &format!("{SMALL}newton.max_iters = 1\n"));
    let res = tmp.path().join("res");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&res)]).status.success());
    let run = recon(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--measurements",
        s(&res.join("measurements.csv")),
        "--out",
        s(&res),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(rows(&res.join("diagnostics.csv")).len(), 2);
    assert!(res.join("sigma_avg3.csv").is_file());
}

#[test]
fn tanh_twin_run_meets_objective_threshold() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "fig.cfg", "");
    let res = tmp.path().join("res");
    assert!(recon(&["generate", "--config", s(&cfg), "--out", s(&res)]).status.success());
    let run = recon(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--measurements",
        s(&res.join("measurements.csv")),
        "--out",
        s(&res),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(res.join("diagnostics.csv")).unwrap();
    let baseline: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# baseline_objective = "))
        .unwrap()
        .parse()
        .unwrap();
    let diag = rows(&res.join("diagnostics.csv"));
    assert_eq!(diag.len(), 8);
    assert_eq!(diag[7][0], 1e-6);
    let last = diag[7][3];
    assert!(last <= 1e-2 * baseline, "final objective {last:e} vs baseline {baseline:e}");
}
