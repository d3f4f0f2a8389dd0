//! Time-stepping driver behind the `run` and `validate` commands.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::dynamics::{Model, SimState, StabilityRoute};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::initial_data::{self, HypothesisReport, InitialData};
use crate::io::{self, RunConfig, Snapshot};
use crate::vacuum::VacuumState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    WindowStop,
    SolverFailure,
    InvalidInput,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::WindowStop => 2,
            RunStatus::SolverFailure => 3,
            RunStatus::InvalidInput => 4,
        }
    }

    /// Status an error maps to when it ends a run.
    pub fn from_error(e: &Error) -> RunStatus {
        match e {
            Error::InvalidParameter(_) | Error::InvalidInput(_) | Error::Config(_) => RunStatus::InvalidInput,
            Error::WindowViolation { .. } => RunStatus::WindowStop,
            _ => RunStatus::SolverFailure,
        }
    }
}

/// One simulation at a single mollifier width.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub kappa_dz: f64,
    pub kappa: f64,
    pub route: Option<StabilityRoute>,
    pub status: RunStatus,
    pub message: Option<String>,
    pub steps: usize,
    pub t_final: f64,
    pub initial_energy: Option<f64>,
    pub final_energy: Option<f64>,
    pub series: Option<PathBuf>,
    pub snapshots: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub exit_code: i32,
    pub output_dir: PathBuf,
    pub message: Option<String>,
    pub validation: Option<HypothesisReport>,
    pub runs: Vec<RunSummary>,
    /// `(max - min) / max |E|` of the final energies over a sweep.
    pub energy_spread: Option<f64>,
}

impl RunOutcome {
    fn new(status: RunStatus, output_dir: PathBuf) -> Self {
        RunOutcome {
            status,
            exit_code: status.exit_code(),
            output_dir,
            message: None,
            validation: None,
            runs: Vec::new(),
            energy_spread: None,
        }
    }
}

/// In-memory result of one simulation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub summary: RunSummary,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: SimState,
}

/// Validates the configured initial data at the first mollifier width.
pub fn validate_config(cfg: &RunConfig) -> Result<(Grid, InitialData, HypothesisReport)> {
    let grid = cfg.build_grid()?;
    let data = cfg.initial_data(&grid)?;
    data.check_well_formed(&grid)?;
    let report = initial_data::validate(&grid, &data, cfg.kappas()[0] * grid.dz)?;
    Ok((grid, data, report))
}

/// Integrates one configuration at width `kappa_dz * dz` without touching
/// the filesystem.
pub fn simulate(cfg: &RunConfig, grid: &Grid, data: &InitialData, kappa_dz: f64, route: Option<StabilityRoute>) -> Trajectory {
    let step_cfg = cfg.step_config(grid, data, kappa_dz, route);
    let mut summary = RunSummary {
        kappa_dz,
        kappa: step_cfg.kappa,
        route,
        status: RunStatus::Completed,
        message: None,
        steps: 0,
        t_final: 0.0,
        initial_energy: None,
        final_energy: None,
        series: None,
        snapshots: Vec::new(),
    };
    let fail = |mut summary: RunSummary, e: Error, records, state: SimState| {
        summary.status = RunStatus::from_error(&e);
        summary.message = Some(e.to_string());
        summary.t_final = state.t;
        Trajectory {
            summary,
            records,
            final_state: state,
        }
    };
    let state0 = match data.state(grid) {
        Ok(s) => s,
        Err(e) => {
            let vac = VacuumState {
                c: data.c0,
                rs: data.rs,
                a_coeff: 0.0,
            };
            return fail(summary, e, Vec::new(), SimState::at_rest(grid, vac));
        }
    };
    let model = match step_cfg.validate().and_then(|_| Model::new(grid, data.seed(), step_cfg)) {
        Ok(m) => m,
        Err(e) => return fail(summary, e, Vec::new(), state0),
    };

    let t_end = cfg.numerics.t_end;
    let every = cfg.numerics.diag_every;
    let check_every = cfg.numerics.window_check_every;
    let mut records = Vec::new();
    let mut state = state0;
    let mut n = 0usize;
    // the last step is shortened to land on t_end
    while t_end - state.t > 1e-12 * t_end.max(1.0) {
        let dt = model.stable_dt(&state).min(t_end - state.t);
        let (next, stage) = match model.step(&state, dt) {
            Ok(x) => x,
            Err(e) => return fail(summary, e, records, state),
        };
        let violation = if n % check_every == 0 { model.window_violation(&state, &stage) } else { None };
        if n % every == 0 || violation.is_some() {
            let rec = diagnostics::record(&model, &state, &stage, violation.is_none());
            summary.initial_energy.get_or_insert(rec.energy);
            summary.final_energy = Some(rec.energy);
            records.push(rec);
        }
        if let Some(reason) = violation {
            log::warn!("window stop at t = {:.6}: {reason}", state.t);
            summary.steps = n;
            return fail(summary, Error::WindowViolation { t: state.t, reason }, records, state);
        }
        state = next;
        n += 1;
    }
    summary.steps = n;
    match model.evaluate(&state) {
        Ok(stage) => {
            let violation = model.window_violation(&state, &stage);
            let rec = diagnostics::record(&model, &state, &stage, violation.is_none());
            summary.initial_energy.get_or_insert(rec.energy);
            summary.final_energy = Some(rec.energy);
            records.push(rec);
            if let Some(reason) = violation {
                return fail(summary, Error::WindowViolation { t: state.t, reason }, records, state);
            }
        }
        Err(e) => return fail(summary, e, records, state),
    }
    summary.t_final = state.t;
    Trajectory {
        summary,
        records,
        final_state: state,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

fn file_stem(base: &str, kappa_dz: f64, sweep: bool) -> String {
    if sweep {
        format!("{base}_kappa{kappa_dz}")
    } else {
        base.to_string()
    }
}

/// Validates, integrates every configured width and writes
/// `validation.json`, the series, final snapshots and `summary.json` to
/// the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let out = cfg.output_dir();
    fs::create_dir_all(&out)?;
    let mut outcome = RunOutcome::new(RunStatus::Completed, out.clone());

    let (grid, data, report) = match validate_config(cfg) {
        Ok(x) => x,
        Err(e) => {
            outcome.status = RunStatus::from_error(&e);
            outcome.exit_code = outcome.status.exit_code();
            outcome.message = Some(e.to_string());
            write_json(&out.join("summary.json"), &outcome)?;
            return Ok(outcome);
        }
    };
    write_json(&out.join("validation.json"), &report)?;
    outcome.validation = Some(report.clone());
    if !report.admissible {
        outcome.status = RunStatus::InvalidInput;
        outcome.exit_code = outcome.status.exit_code();
        outcome.message = Some(format!("initial data rejected: {}", report.failures.join("; ")));
        write_json(&out.join("summary.json"), &outcome)?;
        return Ok(outcome);
    }
    let route = cfg.numerics.route.or(report.route);
    if route.is_none() {
        log::warn!("no stability route holds for the initial data; the margin is not enforced");
    }

    let kappas = cfg.kappas();
    let sweep = kappas.len() > 1;
    for &k in &kappas {
        log::info!("running kappa = {k} dz");
        let traj = simulate(cfg, &grid, &data, k, route);
        let mut summary = traj.summary;
        let series = out.join(format!("{}.csv", file_stem("series", k, sweep)));
        io::write_series(&series, &traj.records)?;
        summary.series = Some(series);
        let snap = Snapshot::from_state(&grid, &traj.final_state);
        for &fmt in &cfg.output.formats {
            let path = out.join(format!("{}.{}", file_stem("final", k, sweep), fmt.extension()));
            snap.write(&path, fmt)?;
            summary.snapshots.push(path);
        }
        outcome.status = outcome.status.max(summary.status);
        outcome.runs.push(summary);
    }
    outcome.exit_code = outcome.status.exit_code();
    if sweep {
        let finals: Vec<f64> = outcome.runs.iter().filter_map(|r| r.final_energy).collect();
        if finals.len() == outcome.runs.len() {
            let hi = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = finals.iter().cloned().fold(f64::INFINITY, f64::min);
            let scale = finals.iter().fold(0f64, |m, e| m.max(e.abs()));
            outcome.energy_spread = Some(if scale > 0.0 { (hi - lo) / scale } else { 0.0 });
        }
    }
    outcome.message = outcome.runs.iter().find_map(|r| r.message.clone());
    write_json(&out.join("summary.json"), &outcome)?;
    Ok(outcome)
}
