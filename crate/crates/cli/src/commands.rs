use std::fs;
use std::path::{Path, PathBuf};

use recon_core::fem1d::{SpaceGrid, TimeGrid};
use recon_core::reconstruct::{
    add_noise, average_time_independent, continuation_solve, interpolate_trace, synthesize_data, AverageMethod,
    DataSettings, ReconstructionProblem,
};
use recon_core::regularization::RegularizedHamiltonian;
use recon_core::trace::BoundaryTrace;

use crate::config::ExperimentConfig;
use crate::csv::{read_table, write_annotated, write_table};
use crate::error::CliError;

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = seed {
        cfg.noise_seed = seed;
    }
    Ok(cfg)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_sigma_true(cfg: &ExperimentConfig, space: &SpaceGrid, dir: &Path) -> Result<(), CliError> {
    let sigma = cfg.sigma_true().on_grid(space);
    write_table(
        &dir.join("sigma_true.csv"),
        &["x_element_center", "sigma"],
        space.element_centers().into_iter().zip(sigma.iter()).map(|(x, s)| vec![x, *s]),
        ",",
    )
}

/// Synthesizes (optionally noisy) measurements on the data grid.
pub fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let space = cfg.space_grid()?;
    let data_time = cfg.data_time_grid()?;
    let settings = DataSettings {
        equation: cfg.equation,
        space: cfg.data_space_grid()?,
        time: data_time.clone(),
        leapfrog: cfg.leapfrog(),
    };
    let clean = synthesize_data(&cfg.sigma_true(), &cfg.flux(), &settings)?;
    let data = add_noise(&clean, &cfg.noise()?);

    prepare_dir(out)?;
    write_table(
        &out.join("measurements.csv"),
        &["time", "u_left", "u_right"],
        data_time
            .times()
            .into_iter()
            .enumerate()
            .map(|(n, t)| vec![t, data.left()[n], data.right()[n]]),
        ",",
    )?;
    write_sigma_true(cfg, &space, out)?;
    let manifest = out.join("manifest.txt");
    fs::write(&manifest, cfg.manifest()).map_err(CliError::io(&manifest))
}

fn read_measurements(path: &Path, time: &TimeGrid) -> Result<BoundaryTrace, CliError> {
    let rows = read_table(path, 3)?;
    if rows.len() < 2 {
        return Err(CliError::Parse {
            path: path.into(),
            message: "need at least two time levels".into(),
        });
    }
    let trace = BoundaryTrace::new(rows.iter().map(|r| r[1]).collect(), rows.iter().map(|r| r[2]).collect())?;
    if rows.len() == time.n_levels() {
        return Ok(trace);
    }
    let span = rows[rows.len() - 1][0];
    let source = TimeGrid::new(span, rows.len() - 1)?;
    eprintln!(
        "warning: {} has {} levels, solver grid has {}; interpolating in time",
        path.display(),
        rows.len(),
        time.n_levels()
    );
    Ok(interpolate_trace(&trace, &source, time)?)
}

fn spacetime_rows(times: &[f64], xs: &[f64], values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(times.len() * xs.len());
    for (t, row) in times.iter().zip(values) {
        for (x, v) in xs.iter().zip(row) {
            rows.push(vec![*t, *x, *v]);
        }
    }
    rows
}

/// Runs the continuation and writes every result file. Non-converged stages
/// still produce all outputs before the error is returned.
pub fn reconstruct(cfg: &ExperimentConfig, measurements: &Path, out: &Path) -> Result<(), CliError> {
    let space = cfg.space_grid()?;
    let time = cfg.time_grid()?;
    let data = read_measurements(measurements, &time)?;
    let problem = ReconstructionProblem {
        equation: cfg.equation,
        space: space.clone(),
        time: time.clone(),
        bounds: cfg.bounds()?,
        schedule: cfg.schedule()?,
        flux: cfg.flux().trace(&time),
        measurements: data.clone(),
        observation: cfg.observation,
        newton: cfg.newton(),
        krylov: cfg.krylov(),
        linear_solver: cfg.linear_solver,
    };
    let result = continuation_solve(&problem, None)?;
    let reg = RegularizedHamiltonian::new(problem.bounds, problem.schedule.target())?;

    prepare_dir(out)?;
    let centers = space.element_centers();
    for method in AverageMethod::ALL {
        let avg = average_time_independent(&result.control, time.k(), &reg, method);
        write_table(
            &out.join(format!("sigma_{}.csv", method.name())),
            &["x_element_center", "sigma"],
            centers.iter().zip(avg.sigma.iter()).map(|(x, s)| vec![*x, *s]),
            ",",
        )?;
    }
    write_sigma_true(cfg, &space, out)?;
    write_table(
        &out.join("sigma_spacetime.csv"),
        &["time", "x_element_center", "sigma_tilde"],
        spacetime_rows(&result.control.times, &centers, &result.control.sigma),
        ",",
    )?;
    let times = time.times();
    write_table(
        &out.join("u_spacetime.csv"),
        &["time", "x_node", "u"],
        spacetime_rows(&times, space.nodes(), result.trajectory.u()),
        ",",
    )?;
    write_table(
        &out.join("q_spacetime.csv"),
        &["time", "x_node", "q"],
        spacetime_rows(&times, space.nodes(), result.trajectory.q()),
        ",",
    )?;
    write_annotated(
        &out.join("diagnostics.csv"),
        &[format!("baseline_objective = {}", crate::csv::fmt(result.baseline_objective))],
        &["delta_stage", "newton_iters", "final_residual", "objective"],
        result
            .stages
            .iter()
            .map(|s| vec![s.delta, s.newton_iters as f64, s.final_residual, s.objective]),
        ",",
    )?;
    let u = result.trajectory.u();
    let last = space.n_nodes() - 1;
    write_table(
        &out.join("fit.csv"),
        &["time", "u_left", "u_right", "ustar_left", "ustar_right"],
        times
            .iter()
            .enumerate()
            .map(|(n, t)| vec![*t, u[n][0], u[n][last], data.left()[n], data.right()[n]]),
        ",",
    )?;

    let failed = result.stages.iter().filter(|s| !s.converged).count();
    for s in result.stages.iter().filter(|s| !s.converged) {
        eprintln!(
            "warning: stage δ={:e} stopped after {} Newton iterations at residual {:e}{}",
            s.delta,
            s.newton_iters,
            s.final_residual,
            s.failure.as_deref().map(|f| format!(" ({f})")).unwrap_or_default()
        );
    }
    if failed > 0 {
        return Err(CliError::NotConverged(failed));
    }
    Ok(())
}

const REQUIRED: [&str; 9] = [
    "sigma_true.csv",
    "sigma_avg1.csv",
    "sigma_avg2.csv",
    "sigma_avg3.csv",
    "sigma_spacetime.csv",
    "u_spacetime.csv",
    "q_spacetime.csv",
    "diagnostics.csv",
    "fit.csv",
];

/// Writes a space-time table as gnuplot blocks, one per time, separated by blank lines.
fn write_blocks(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut text = format!("# {}\n", header.join(" "));
    let mut prev: Option<f64> = None;
    for r in rows {
        if prev.is_some_and(|t| t != r[0]) {
            text.push('\n');
        }
        prev = Some(r[0]);
        let cells: Vec<String> = r.iter().map(|v| crate::csv::fmt(*v)).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(CliError::io(path))
}

/// Converts a result directory into whitespace-separated plot data files.
pub fn report(results: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|f| !results.join(f).is_file())
        .map(|f| f.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Missing {
            dir: results.into(),
            missing,
        });
    }
    let truth = read_table(&results.join("sigma_true.csv"), 2)?;
    let avgs = ["sigma_avg1.csv", "sigma_avg2.csv", "sigma_avg3.csv"]
        .iter()
        .map(|f| read_table(&results.join(f), 2))
        .collect::<Result<Vec<_>, _>>()?;
    if avgs.iter().any(|a| a.len() != truth.len()) {
        return Err(CliError::Parse {
            path: results.into(),
            message: "averaged and true coefficients have different lengths".into(),
        });
    }

    prepare_dir(out)?;
    let mut written = Vec::new();
    let averages = out.join("averages.dat");
    write_table(
        &averages,
        &["x", "sigma_true", "avg1", "avg2", "avg3"],
        truth
            .iter()
            .enumerate()
            .map(|(e, r)| vec![r[0], r[1], avgs[0][e][1], avgs[1][e][1], avgs[2][e][1]]),
        " ",
    )?;
    written.push(averages);

    for (src, dst, header) in [
        ("u_spacetime.csv", "u_spacetime.dat", ["time", "x", "u"]),
        ("q_spacetime.csv", "q_spacetime.dat", ["time", "x", "q"]),
        ("sigma_spacetime.csv", "sigma_spacetime.dat", ["time", "x", "sigma_tilde"]),
    ] {
        let rows = read_table(&results.join(src), 3)?;
        let path = out.join(dst);
        write_blocks(&path, &header, &rows)?;
        written.push(path);
    }

    let diag = read_table(&results.join("diagnostics.csv"), 4)?;
    let objective = out.join("objective.dat");
    write_table(
        &objective,
        &["stage", "delta", "objective", "final_residual"],
        diag.iter().enumerate().map(|(i, r)| vec![(i + 1) as f64, r[0], r[3], r[2]]),
        " ",
    )?;
    written.push(objective);

    let fit = read_table(&results.join("fit.csv"), 5)?;
    let fit_path = out.join("fit.dat");
    write_table(
        &fit_path,
        &["time", "u_left", "u_right", "ustar_left", "ustar_right"],
        fit,
        " ",
    )?;
    written.push(fit_path);
    Ok(written)
}
