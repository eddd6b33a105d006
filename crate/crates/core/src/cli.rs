//! Commands behind the `thinfilm` binary: file output and exit codes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use crate::config::{parse_config, ConfigError, InitialCondition, RunConfig};
use crate::diagnostics::DiagnosticsRecord;
use crate::grid::{derivative, FilmState, Grid1D};
use crate::mms::{convergence_study, ManufacturedSolution, TimeRefinement};
use crate::rheology::{pressure, FluidParams};
use crate::stepper::{run_observed, Termination};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TOUCHDOWN: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_STEP_FAILURE: i32 = 4;
pub const EXIT_MMS_THRESHOLD: i32 = 5;

/// Overrides `[output] directory`.
pub const OUTPUT_DIR_ENV: &str = "THINFILM_OUTPUT_DIR";

pub fn exit_code(termination: &Termination) -> i32 {
    match termination {
        Termination::EndTime => EXIT_OK,
        Termination::Touchdown { .. } => EXIT_TOUCHDOWN,
        Termination::BlowUp { .. } => EXIT_BLOWUP,
        Termination::StepFailure { .. } => EXIT_STEP_FAILURE,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        source: ConfigError,
    },
    #[error("{0}")]
    Solver(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads and validates a configuration file. Returns the directory that
/// relative sample paths resolve against.
pub fn load_config(path: &Path) -> Result<(RunConfig, PathBuf), CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let config = parse_config(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

fn output_dir(config: &RunConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| config.output.directory.clone())
}

fn config_err(path: &Path) -> impl Fn(ConfigError) -> CliError + '_ {
    move |source| CliError::Config {
        path: path.to_path_buf(),
        source,
    }
}

/// Snapshot CSV with columns `x,u,u_x,u_xxx,pressure`.
pub fn snapshot_csv(state: &FilmState, grid: &Grid1D, params: &FluidParams) -> String {
    let u = &state.heights;
    let d1 = derivative(u, 1, grid).expect("state matches grid");
    let d2 = derivative(u, 2, grid).expect("state matches grid");
    let d3 = derivative(u, 3, grid).expect("state matches grid");
    let mut out = String::from("x,u,u_x,u_xxx,pressure\n");
    for (i, x) in grid.nodes().into_iter().enumerate() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            x,
            u[i],
            d1[i],
            d3[i],
            pressure(d2[i], params)
        ));
    }
    out
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord], every: usize) -> String {
    let mut out = String::from(DiagnosticsRecord::CSV_HEADER);
    out.push('\n');
    let last = records.len().saturating_sub(1);
    for (i, r) in records.iter().enumerate() {
        if i % every == 0 || i == last {
            out.push_str(&r.to_csv_row());
            out.push('\n');
        }
    }
    out
}

/// Summary of one finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub termination: Termination,
    pub final_record: DiagnosticsRecord,
    pub steps: usize,
}

/// Runs `config` and writes `diagnostics.csv`, `snap_<step>.csv` and
/// `report.json` into `out_dir`.
pub fn execute_run(config: &RunConfig, base_dir: &Path, out_dir: &Path) -> Result<RunSummary, CliError> {
    let cfg_path = base_dir.join("<config>");
    let params = config.params().map_err(config_err(&cfg_path))?;
    let grid = config.grid().map_err(config_err(&cfg_path))?;
    let initial = config.initial_state(base_dir).map_err(config_err(&cfg_path))?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let write = |name: String, body: String| -> Result<(), CliError> {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))
    };
    write("snap_0.csv".into(), snapshot_csv(&initial, &grid, &params))?;
    let interval = config.output.snapshot_interval;
    let mut io_failure: Option<CliError> = None;
    let mut last: Option<(usize, FilmState)> = None;
    let report = run_observed(&initial, &grid, &params, &config.solver, None, |n, outcome| {
        if interval > 0 && n % interval == 0 && io_failure.is_none() {
            if let Err(e) = write(format!("snap_{n}.csv"), snapshot_csv(&outcome.state, &grid, &params)) {
                io_failure = Some(e);
            }
        }
        last = Some((n, outcome.state.clone()));
    })?;
    if let Some(e) = io_failure {
        return Err(e);
    }
    let steps = last.as_ref().map_or(0, |(n, _)| *n);
    if let Some((n, state)) = &last {
        if interval == 0 || n % interval != 0 {
            write(format!("snap_{n}.csv"), snapshot_csv(state, &grid, &params))?;
        }
    }
    write(
        "diagnostics.csv".into(),
        diagnostics_csv(&report.records, config.output.diagnostics_every),
    )?;
    let final_record = *report.records.last().expect("initial record always present");
    let touchdown_time = match report.termination {
        Termination::Touchdown { time, .. } => Some(time),
        _ => None,
    };
    let doc = json!({
        "termination": report.termination.label(),
        "termination_detail": report.termination,
        "touchdown_time": touchdown_time,
        "touchdown_threshold": report.touchdown_threshold,
        "steps": steps,
        "final": final_record,
        "params": params,
        "config": config,
        "config_text": config.to_config_string(),
    });
    write(
        "report.json".into(),
        serde_json::to_string_pretty(&doc).expect("report serializes"),
    )?;
    Ok(RunSummary {
        termination: report.termination,
        final_record,
        steps,
    })
}

pub fn cmd_run(path: &Path) -> i32 {
    let (config, base) = match load_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let out = output_dir(&config);
    match execute_run(&config, &base, &out) {
        Ok(summary) => {
            println!(
                "{}: {} steps, t = {}, energy = {:e}, min height = {:e}",
                summary.termination.label(),
                summary.steps,
                summary.final_record.time,
                summary.final_record.energy,
                summary.final_record.min_height
            );
            exit_code(&summary.termination)
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Required MMS order when none is configured.
pub fn default_min_order(params: &FluidParams) -> f64 {
    if params.b == 0.0 || params.alpha >= 2.0 {
        1.8
    } else {
        1.3
    }
}

pub fn cmd_mms(path: &Path) -> i32 {
    let result = (|| -> Result<bool, CliError> {
        let (config, _) = load_config(path)?;
        let m = config.mms.ok_or_else(|| CliError::Config {
            path: path.to_path_buf(),
            source: ConfigError::Validation {
                key: "mms".into(),
                message: "the mms command needs an [mms] block".into(),
            },
        })?;
        let params = config.params().map_err(config_err(path))?;
        let grid = config.grid().map_err(config_err(path))?;
        let ms = ManufacturedSolution::new(m.c0, m.c1, m.lambda, m.k, grid.half_length())?;
        let rule = TimeRefinement {
            horizon: m.horizon,
            base_steps: m.base_steps,
        };
        let report = convergence_study(&ms, &params, &grid, m.levels, rule, &config.solver)?;
        let out = output_dir(&config);
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        let file = out.join("mms_orders.csv");
        fs::write(&file, report.to_csv()).map_err(io_err(&file))?;
        let threshold = m.min_order.unwrap_or_else(|| default_min_order(&params));
        let mut stdout = std::io::stdout().lock();
        for r in &report.rows {
            let order = r.observed_order.map_or("-".to_string(), |o| format!("{o:.3}"));
            let _ = writeln!(stdout, "N = {:5}  dt = {:.3e}  error = {:.4e}  order = {order}", r.n_cells, r.dt, r.max_error);
        }
        let pass = report.min_order() >= threshold && report.errors_strictly_decreasing();
        let _ = writeln!(
            stdout,
            "minimum observed order {:.3} (required {threshold}): {}",
            report.min_order(),
            if pass { "pass" } else { "FAIL" }
        );
        Ok(pass)
    })();
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_MMS_THRESHOLD,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Alpha,
    #[value(name = "tau_star")]
    TauStar,
    Amplitude,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::TauStar => "tau_star",
            SweepParam::Amplitude => "amplitude",
        }
    }

    /// Copy of `config` with the parameter set to `value`.
    pub fn apply(&self, config: &RunConfig, value: f64) -> Result<RunConfig, ConfigError> {
        let mut c = config.clone();
        match self {
            SweepParam::Alpha => c.coefficients = c.coefficients.with_alpha(value),
            SweepParam::TauStar => match &mut c.coefficients {
                crate::config::Coefficients::Fluid { tau_star, .. } => *tau_star = value,
                _ => {
                    return Err(ConfigError::Validation {
                        key: "tau_star".into(),
                        message: "sweeping tau_star needs a [fluid] block".into(),
                    })
                }
            },
            SweepParam::Amplitude => match &mut c.initial {
                InitialCondition::Cosine { c1, .. } => *c1 = value,
                _ => {
                    return Err(ConfigError::Validation {
                        key: "amplitude".into(),
                        message: "sweeping the amplitude needs a cosine initial condition".into(),
                    })
                }
            },
        }
        c.params()?;
        Ok(c)
    }
}

/// One line of `sweep_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub value: f64,
    pub outcome: Result<(Termination, DiagnosticsRecord), String>,
}

impl SweepEntry {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, Ok((Termination::EndTime, _)))
    }

    fn csv_row(&self) -> String {
        match &self.outcome {
            Ok((t, r)) => format!(
                "{:?},{},{:.16e},{:.16e}",
                self.value,
                t.label(),
                r.energy,
                r.min_height
            ),
            Err(msg) => format!("{:?},\"error: {}\",,", self.value, msg.replace('"', "'")),
        }
    }
}

/// Runs one simulation per value, each in its own subdirectory of `out_dir`.
pub fn execute_sweep(
    config: &RunConfig,
    base_dir: &Path,
    out_dir: &Path,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepEntry>, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let entries: Vec<SweepEntry> = values
        .par_iter()
        .map(|&value| {
            let sub = out_dir.join(format!("{}_{value:?}", param.name()));
            let outcome = param
                .apply(config, value)
                .map_err(|e| e.to_string())
                .and_then(|c| execute_run(&c, base_dir, &sub).map_err(|e| e.to_string()))
                .map(|s| (s.termination, s.final_record));
            SweepEntry { value, outcome }
        })
        .collect();
    let mut summary = String::from("value,termination,final_energy,final_min_height\n");
    for e in &entries {
        summary.push_str(&e.csv_row());
        summary.push('\n');
    }
    let path = out_dir.join("sweep_summary.csv");
    fs::write(&path, summary).map_err(io_err(&path))?;
    Ok(entries)
}

pub fn cmd_sweep(path: &Path, param: SweepParam, values: &[f64]) -> i32 {
    let (config, base) = match load_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let out = output_dir(&config);
    match execute_sweep(&config, &base, &out, param, values) {
        Ok(entries) => {
            for e in &entries {
                match &e.outcome {
                    Ok((t, r)) => println!(
                        "{} = {}: {}, final energy {:e}",
                        param.name(),
                        e.value,
                        t.label(),
                        r.energy
                    ),
                    Err(msg) => println!("{} = {}: error: {msg}", param.name(), e.value),
                }
            }
            if entries.iter().all(SweepEntry::completed) {
                EXIT_OK
            } else {
                EXIT_STEP_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
