//! Command implementations.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde_json::Value;

use chronoctl_core::analysis::{
    controllability_gramian, kalman_controllability, kalman_observability, observability_gramian,
    pk_controllability, pk_observability, tv_controllability, tv_observability,
};
use chronoctl_core::exact::{self, TimePoint};
use chronoctl_core::linsys::{
    solve_backward_ivp, solve_forward_ivp, Direction, LinearSystem, Trajectory,
};
use chronoctl_core::realization::{
    default_sample_points, is_minimal, sample_kernel, separable_rank, Factorization,
    SEPARABLE_REL_TOL,
};
use chronoctl_core::timescale::Grid;

use crate::config::{LoadedSystem, SystemConfig};
use crate::report;
use crate::{CliError, TestKind};

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))
}

fn trajectory_csv(direction: Direction, traj: &Trajectory) -> String {
    let n = traj.states.first().map(|s| s.len()).unwrap_or(0);
    let p = traj.outputs.first().map(|o| o.len()).unwrap_or(0);
    let time_name = match direction {
        Direction::Backward => "s",
        Direction::Forward => "t",
    };
    let state_name = match direction {
        Direction::Backward => "y",
        Direction::Forward => "x",
    };
    let mut header: Vec<String> = vec![time_name.to_string()];
    header.extend((1..=n).map(|i| format!("{state_name}_{i}")));
    header.extend((1..=p).map(|i| format!("gamma_{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..traj.len() {
        let mut row: Vec<String> = vec![report::csv_float(traj.times[i])];
        row.extend(traj.states[i].iter().map(|&x| report::csv_float(x)));
        row.extend(traj.outputs[i].iter().map(|&x| report::csv_float(x)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_simulate(config_path: &Path, output: &Path, timing: bool) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = SystemConfig::from_path(config_path)?;
    let loaded = cfg.load()?;
    let state = loaded
        .initial_state
        .as_ref()
        .ok_or_else(|| CliError::Config("initial state required".into()))?;
    let control = loaded
        .control
        .as_ref()
        .ok_or_else(|| CliError::Config("control required".into()))?;
    let y0 = DVector::from_column_slice(state);
    let horizon = loaded.system.horizon();
    let traj = match loaded.system.direction() {
        Direction::Backward => {
            solve_backward_ivp(&loaded.system, &loaded.grid, &y0, control, &horizon)?
        }
        Direction::Forward => {
            solve_forward_ivp(&loaded.system, &loaded.grid, &y0, control, &horizon)?
        }
    };
    write_file(output, &trajectory_csv(loaded.system.direction(), &traj))?;
    if timing {
        println!(
            "wrote {} ({} rows) in {:.1} ms",
            output.display(),
            traj.len(),
            started.elapsed().as_secs_f64() * 1e3
        );
    } else {
        println!("wrote {} ({} rows)", output.display(), traj.len());
    }
    Ok(())
}

/// The backward-side view of a loaded system: forward inputs are dualized so
/// the nabla-side tests and quadrature oracles apply.
struct BackwardView {
    system: LinearSystem,
    grid: Arc<Grid>,
    dualized: bool,
}

fn backward_view(loaded: &LoadedSystem) -> BackwardView {
    match loaded.system.direction() {
        Direction::Backward => BackwardView {
            system: loaded.system.clone(),
            grid: loaded.grid.clone(),
            dualized: false,
        },
        Direction::Forward => BackwardView {
            system: loaded.system.dualize(),
            grid: Arc::new(loaded.grid.dual()),
            dualized: true,
        },
    }
}

fn working_window(view: &BackwardView) -> (TimePoint, TimePoint) {
    (view.system.horizon(), view.system.anchor())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_analyze(
    config_path: &Path,
    test: TestKind,
    sc: Option<&str>,
    r: Option<usize>,
    output: Option<&Path>,
    timing: bool,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = SystemConfig::from_path(config_path)?;
    let loaded = cfg.load()?;
    let view = backward_view(&loaded);
    let (s1, s0) = working_window(&view);
    let n = view.system.dims().n;

    let test_point = match sc {
        Some(text) => Some(exact::parse_time(text)?),
        None => None,
    };
    let order = r.unwrap_or_else(|| usize::min(3, n.saturating_sub(1)));

    let mut tests: Vec<Value> = Vec::new();
    let mut selections: Vec<&'static str> = Vec::new();

    if matches!(test, TestKind::Controllability | TestKind::Both) {
        let constant = view.system.a().is_constant() && view.system.b().is_constant();
        if constant {
            selections.push("constant");
            tests.push(report::rank_report(&kalman_controllability(&view.system)?));
            tests.push(report::rank_report(&pk_controllability(&view.system)?));
        } else {
            selections.push("time_varying");
            let s_c = test_point.ok_or_else(|| {
                CliError::Config("test point --sc required for time-varying controllability".into())
            })?;
            tests.push(report::rank_report(&tv_controllability(
                &view.system,
                &view.grid,
                &s_c,
                order,
            )?));
        }
        tests.push(report::gramian_report(
            "controllability_gramian",
            &controllability_gramian(&view.system, &view.grid, &s1, &s0)?,
        ));
    }
    if matches!(test, TestKind::Observability | TestKind::Both) {
        let constant = view.system.a().is_constant() && view.system.c().is_constant();
        if constant {
            selections.push("constant");
            tests.push(report::rank_report(&kalman_observability(&view.system)?));
            tests.push(report::rank_report(&pk_observability(&view.system)?));
        } else {
            selections.push("time_varying");
            let s_c = test_point.ok_or_else(|| {
                CliError::Config("test point --sc required for time-varying observability".into())
            })?;
            tests.push(report::rank_report(&tv_observability(
                &view.system,
                &view.grid,
                &s_c,
                order,
            )?));
        }
        tests.push(report::gramian_report(
            "observability_gramian",
            &observability_gramian(&view.system, &view.grid, &s1, &s0)?,
        ));
    }

    let selection = if selections.iter().all(|&s| s == "constant") {
        "constant"
    } else if selections.iter().all(|&s| s == "time_varying") {
        "time_varying"
    } else {
        "mixed"
    };
    let body = vec![
        ("dualized_for_analysis", Value::Bool(view.dualized)),
        ("test_selection", Value::String(selection.to_string())),
        ("tests", Value::Array(tests)),
    ];
    let wall = timing.then(|| started.elapsed().as_secs_f64() * 1e3);
    let envelope = report::envelope(
        "analyze",
        &config_path.display().to_string(),
        view.grid.dense_step(),
        body,
        wall,
    );
    let text = report::render(&envelope);
    print!("{text}");
    if let Some(path) = output {
        write_file(path, &text)?;
    }
    Ok(())
}

pub fn cmd_dualize(config_path: &Path, output: &Path) -> Result<(), CliError> {
    let cfg = SystemConfig::from_path(config_path)?;
    let dual = cfg.dualize()?;
    let mut text = serde_json::to_string_pretty(&dual)
        .map_err(|e| CliError::Numeric(format!("cannot serialize dual config: {e}")))?;
    text.push('\n');
    write_file(output, &text)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn factor_csv(times: &[TimePoint], factors: &[nalgebra::DMatrix<f64>]) -> String {
    let mut out = String::new();
    let (rows, cols) = factors
        .first()
        .map(|f| (f.nrows(), f.ncols()))
        .unwrap_or((0, 0));
    let mut header = vec!["time".to_string()];
    for i in 1..=rows {
        for j in 1..=cols {
            header.push(format!("f_{i}{j}"));
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (t, f) in times.iter().zip(factors) {
        let mut row = vec![report::csv_float(exact::to_f64(t))];
        for i in 0..rows {
            for j in 0..cols {
                row.push(report::csv_float(f[(i, j)]));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write_factors(prefix: &Path, f: &Factorization) -> Result<(), CliError> {
    let mut h_path = PathBuf::from(prefix);
    let mut f_path = PathBuf::from(prefix);
    let stem = prefix
        .file_name()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "factor".into());
    h_path.set_file_name(format!("{stem}_h.csv"));
    f_path.set_file_name(format!("{stem}_f.csv"));
    write_file(&h_path, &factor_csv(&f.s_points, &f.h_factors))?;
    write_file(&f_path, &factor_csv(&f.z_points, &f.f_factors))?;
    Ok(())
}

pub fn cmd_realize(
    config_path: &Path,
    tol: Option<f64>,
    factors_out: Option<&Path>,
    output: Option<&Path>,
    timing: bool,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = SystemConfig::from_path(config_path)?;
    let loaded = cfg.load()?;
    let view = backward_view(&loaded);
    let (s1, s0) = working_window(&view);
    let minimality = is_minimal(&view.system, &view.grid, &s1, &s0)?;

    let tol = tol.unwrap_or(SEPARABLE_REL_TOL);
    let (s_pts, z_pts) = default_sample_points(&view.grid, &s1, &s0)?;
    let ks = sample_kernel(&view.system, &view.grid, &s_pts, &z_pts)?;
    let (rank, factorization) = separable_rank(&ks, tol)?;
    if let Some(prefix) = factors_out {
        write_factors(prefix, &factorization)?;
    }

    let body = vec![
        ("dualized_for_analysis", Value::Bool(view.dualized)),
        ("minimality", report::minimality_report(&minimality)),
        ("separable_rank", Value::from(rank)),
        ("kernel_residual", report::float(factorization.residual)),
        (
            "factor_split",
            report::float(exact::to_f64(&factorization.split)),
        ),
        ("separable_tol", report::float(tol)),
        (
            "kernel_sample_size",
            Value::Array(vec![
                Value::from(ks.s_points.len()),
                Value::from(ks.z_points.len()),
            ]),
        ),
    ];
    let wall = timing.then(|| started.elapsed().as_secs_f64() * 1e3);
    let envelope = report::envelope(
        "realize",
        &config_path.display().to_string(),
        view.grid.dense_step(),
        body,
        wall,
    );
    let text = report::render(&envelope);
    print!("{text}");
    if let Some(path) = output {
        write_file(path, &text)?;
    }
    Ok(())
}
