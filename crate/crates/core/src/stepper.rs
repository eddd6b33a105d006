//! Mass-conservative semi-implicit time stepping.
//!
//! Each step solves the linear problem
//!
//! ```text
//! u_i + dt * (q_{i+1/2} - q_{i-1/2}) / |V_i| = u_i^old + dt * g_i
//! q_{i+1/2} = M_{i+1/2}(v) * (u_xxx at x_{i+1/2})
//! ```
//!
//! where the face mobility `M` is frozen at the iterate `v` and the third
//! derivative is taken from the unknown (see [`Linearization`] for the
//! variant that also linearizes the shear-thinning factor). `|V_i|` is the trapezoidal
//! control volume (`h` inside, `h/2` at the end nodes) and the flux through
//! the boundary itself is zero. Picard sweeps repeat until the iterate stops
//! moving; on failure the step is halved.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::{LinearSystem, PentaMatrix};
use crate::diagnostics::{blowup_monitor, DiagnosticsRecord};
use crate::error::{domain, Error, Result};
use crate::grid::{face_third_unchecked, FilmState, Grid1D};
use crate::operators::{face_mobility, RegularizationConfig, DEFAULT_EPSILON};
use crate::rheology::{abs_pow, FluidParams};

/// Source term `g(t, x)` added to the right-hand side (manufactured solutions).
pub type Forcing = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Relative touchdown threshold used when none is configured.
pub const DEFAULT_TOUCHDOWN_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub picard_max: usize,
    /// Relative max-norm change between Picard iterates.
    pub picard_tol: f64,
    pub epsilon: f64,
    /// `None` means `1e-6 * min(u0)`.
    pub touchdown_threshold: Option<f64>,
    pub blowup_norm_cap: f64,
    pub growth_factor: f64,
    pub use_regularized: bool,
    pub linearization: Linearization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_initial: 1e-6,
            dt_min: 1e-12,
            dt_max: 1e-2,
            t_end: 1.0,
            picard_max: 25,
            picard_tol: 1e-10,
            epsilon: DEFAULT_EPSILON,
            touchdown_threshold: None,
            blowup_norm_cap: 1e6,
            growth_factor: 1.2,
            use_regularized: true,
            linearization: Linearization::Newton,
        }
    }
}

impl SolverConfig {
    /// Constant step `dt` up to `t_end`.
    pub fn fixed_step(dt: f64, t_end: f64) -> Self {
        SolverConfig {
            dt_initial: dt,
            dt_min: dt,
            dt_max: dt,
            t_end,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_initial", self.dt_initial),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("t_end", self.t_end),
            ("picard_tol", self.picard_tol),
            ("epsilon", self.epsilon),
            ("blowup_norm_cap", self.blowup_norm_cap),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(name, format!("must be finite and positive, got {v}")));
            }
        }
        if let Some(t) = self.touchdown_threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(domain("touchdown_threshold", format!("must be positive, got {t}")));
            }
        }
        if self.picard_max == 0 {
            return Err(domain("picard_max", "need at least one Picard iteration"));
        }
        if !(self.growth_factor.is_finite() && self.growth_factor > 1.0) {
            return Err(domain("growth_factor", "must exceed 1"));
        }
        if !(self.dt_min <= self.dt_initial && self.dt_initial <= self.dt_max) {
            return Err(domain("dt_initial", "need dt_min <= dt_initial <= dt_max"));
        }
        Ok(())
    }

    fn regularization(&self) -> Option<RegularizationConfig> {
        self.use_regularized.then_some(RegularizationConfig {
            epsilon: self.epsilon,
        })
    }
}

/// How the flux is linearized around the current iterate `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearization {
    /// `q = M(v) * D3 u`: the mobility is frozen and the unknown enters
    /// through its third derivative only.
    Picard,
    /// `q = A(v) * D3 u - (A(v) - M(v)) * D3 v` with the principal
    /// coefficient `A = a u^3 (1 + alpha |b u w|^(alpha-1))`, the derivative
    /// of the flux with respect to `w`. Same fixed point as `Picard`, but the
    /// iteration stays contractive when the shear-thinning term dominates.
    Newton,
}

impl std::str::FromStr for Linearization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "picard" => Ok(Linearization::Picard),
            "newton" => Ok(Linearization::Newton),
            other => Err(format!("unknown linearization `{other}`")),
        }
    }
}

impl std::fmt::Display for Linearization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Linearization::Picard => "picard",
            Linearization::Newton => "newton",
        })
    }
}

/// Face coefficients frozen at one iterate. Represents the affine operator
/// `L u = div(P * D3 u - E)` with implicit coefficient `P` and explicit
/// face flux `E`, discretized on the trapezoidal control volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxOperator {
    implicit: Vec<f64>,
    explicit: Vec<f64>,
    h: f64,
    floor_active: bool,
}

impl FluxOperator {
    /// Frozen-mobility operator (`P = M(v)`, `E = 0`).
    pub fn frozen(
        frozen: &[f64],
        grid: &Grid1D,
        params: &FluidParams,
        reg: Option<&RegularizationConfig>,
    ) -> Result<Self> {
        Self::linearized(frozen, grid, params, reg, Linearization::Picard)
    }

    pub fn linearized(
        frozen: &[f64],
        grid: &Grid1D,
        params: &FluidParams,
        reg: Option<&RegularizationConfig>,
        linearization: Linearization,
    ) -> Result<Self> {
        grid.check_len(frozen)?;
        let w = face_third_unchecked(frozen, grid.spacing());
        let mut floor_active = false;
        let mut implicit = Vec::with_capacity(w.len());
        let mut explicit = Vec::with_capacity(w.len());
        for (f, &wf) in w.iter().enumerate() {
            let u_face = 0.5 * (frozen[f] + frozen[f + 1]);
            let (m, floored) = face_mobility(u_face, wf, params, reg);
            floor_active |= floored;
            let (p, e) = match linearization {
                Linearization::Newton if !floored => {
                    let u = u_face.max(0.0);
                    let extra = (params.alpha - 1.0)
                        * params.a
                        * u
                        * u
                        * u
                        * abs_pow(params.b * u * wf, params.alpha - 1.0);
                    (m + extra, extra * wf)
                }
                _ => (m, 0.0),
            };
            if !(p.is_finite() && e.is_finite()) {
                return Err(Error::NonFinite { index: f });
            }
            implicit.push(p);
            explicit.push(e);
        }
        Ok(FluxOperator {
            implicit,
            explicit,
            h: grid.spacing(),
            floor_active,
        })
    }

    /// Coefficient multiplying the face third derivative of the unknown.
    pub fn mobility(&self) -> &[f64] {
        &self.implicit
    }

    pub fn floor_active(&self) -> bool {
        self.floor_active
    }

    /// `q_{i+1/2} = P_{i+1/2} * (u_xxx at the face) - E_{i+1/2}`.
    pub fn face_fluxes(&self, u: &[f64]) -> Vec<f64> {
        face_third_unchecked(u, self.h)
            .into_iter()
            .zip(&self.implicit)
            .zip(&self.explicit)
            .map(|((w, p), e)| p * w - e)
            .collect()
    }

    /// Net outflow per unit control volume at every node.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.divergence(&self.face_fluxes(u))
    }

    /// Divergence of the explicit part alone.
    pub fn explicit_divergence(&self) -> Vec<f64> {
        self.divergence(&self.explicit)
    }

    fn divergence(&self, q: &[f64]) -> Vec<f64> {
        let n = q.len() + 1;
        let h = self.h;
        (0..n)
            .map(|i| {
                if i == 0 {
                    2.0 * q[0] / h
                } else if i == n - 1 {
                    -2.0 * q[n - 2] / h
                } else {
                    (q[i] - q[i - 1]) / h
                }
            })
            .collect()
    }

    /// Adds `scale` times the linear part of the operator to `matrix`.
    pub fn add_scaled_to(&self, matrix: &mut PentaMatrix, scale: f64) {
        let n = matrix.dim();
        let n_cells = n - 1;
        let h = self.h;
        let reflect = |j: isize| -> usize {
            if j < 0 {
                (-j) as usize
            } else if j as usize > n_cells {
                2 * n_cells - j as usize
            } else {
                j as usize
            }
        };
        const STENCIL: [(isize, f64); 4] = [(-1, -1.0), (0, 3.0), (1, -3.0), (2, 1.0)];
        for (f, &m) in self.implicit.iter().enumerate() {
            let coeff = m / (h * h * h);
            // face f sits between nodes f and f + 1
            let left_volume = if f == 0 { 0.5 * h } else { h };
            let right_volume = if f + 1 == n_cells { 0.5 * h } else { h };
            for (off, c) in STENCIL {
                let j = reflect(f as isize + off);
                matrix.add(f, j, scale * coeff * c / left_volume);
                matrix.add(f + 1, j, -scale * coeff * c / right_volume);
            }
        }
    }
}

/// Linear system of one frozen-coefficient solve,
/// `u + dt div(P(frozen) D3 u - E(frozen)) = u_old`. With
/// [`Linearization::Picard`] this is `(I + dt K(frozen)) u = u_old`.
pub fn assemble_system(
    state: &FilmState,
    grid: &Grid1D,
    params: &FluidParams,
    config: &SolverConfig,
    dt: f64,
    frozen: &FilmState,
) -> Result<LinearSystem> {
    grid.check_len(&state.heights)?;
    let reg = config.regularization();
    let op = FluxOperator::linearized(
        &frozen.heights,
        grid,
        params,
        reg.as_ref(),
        config.linearization,
    )?;
    let mut matrix = PentaMatrix::identity(grid.n_nodes());
    op.add_scaled_to(&mut matrix, dt);
    let rhs = state
        .heights
        .iter()
        .zip(op.explicit_divergence())
        .map(|(u, e)| u + dt * e)
        .collect();
    LinearSystem::new(matrix, rhs)
}

/// Event that ends a run after an otherwise successful step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Touchdown { min_height: f64 },
    BlowUp { monitor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: FilmState,
    pub dt_used: f64,
    pub picard_iterations: usize,
    pub mobility_floor_activated: bool,
    pub signal: Option<Signal>,
}

struct Converged {
    heights: Vec<f64>,
    iterations: usize,
    floor: bool,
}

/// Adaptive stepper owning the step-size state of one run.
pub struct Stepper {
    grid: Grid1D,
    params: FluidParams,
    config: SolverConfig,
    reg: Option<RegularizationConfig>,
    forcing: Option<Forcing>,
    touchdown: f64,
    dt: f64,
    nodes: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: Grid1D, params: FluidParams, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Stepper {
            grid,
            params,
            reg: config.regularization(),
            forcing: None,
            touchdown: config.touchdown_threshold.unwrap_or(0.0),
            dt: config.dt_initial,
            nodes: grid.nodes(),
            config,
        })
    }

    pub fn with_forcing(mut self, forcing: Option<Forcing>) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_touchdown_threshold(mut self, threshold: f64) -> Self {
        self.touchdown = threshold;
        self
    }

    /// Step size the next call will try first.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn touchdown_threshold(&self) -> f64 {
        self.touchdown
    }

    /// Advances `state` by one accepted step, never past `t_end`.
    pub fn step(&mut self, state: &FilmState) -> Result<StepOutcome> {
        self.grid.check_len(&state.heights)?;
        let remaining = self.config.t_end - state.time;
        if !(remaining > 0.0) {
            return Err(domain("time", "state is already at the final time"));
        }
        let mut dt = self.dt;
        let mut last_step = false;
        if dt >= remaining * (1.0 - 1e-12) {
            dt = remaining;
            last_step = true;
        }
        loop {
            match self.picard(state, dt) {
                Some(done) => {
                    let time = if last_step {
                        self.config.t_end
                    } else {
                        state.time + dt
                    };
                    if !last_step {
                        self.dt = (dt * self.config.growth_factor).min(self.config.dt_max);
                    }
                    let next = FilmState {
                        time,
                        heights: done.heights,
                    };
                    let signal = self.signal(&next);
                    return Ok(StepOutcome {
                        state: next,
                        dt_used: dt,
                        picard_iterations: done.iterations,
                        mobility_floor_activated: done.floor,
                        signal,
                    });
                }
                None => {
                    if dt <= self.config.dt_min {
                        return Err(Error::StepFailure {
                            time: state.time,
                            dt,
                        });
                    }
                    dt = (0.5 * dt).max(self.config.dt_min);
                    last_step = false;
                    self.dt = dt;
                }
            }
        }
    }

    fn signal(&self, state: &FilmState) -> Option<Signal> {
        let min_height = state.min_height();
        if min_height <= self.touchdown {
            return Some(Signal::Touchdown { min_height });
        }
        let monitor = blowup_monitor(state, &self.grid);
        (monitor > self.config.blowup_norm_cap).then_some(Signal::BlowUp { monitor })
    }

    /// Picard iteration on the increment `u - u_old`; `None` if it fails to
    /// converge or the linear solve breaks down.
    fn picard(&self, state: &FilmState, dt: f64) -> Option<Converged> {
        let old = &state.heights;
        let n = old.len();
        let source: Vec<f64> = match &self.forcing {
            Some(g) => {
                let t_new = state.time + dt;
                self.nodes.iter().map(|&x| dt * g(t_new, x)).collect()
            }
            None => vec![0.0; n],
        };
        let mut iterate = old.clone();
        let mut floor = false;
        for k in 1..=self.config.picard_max {
            let op = FluxOperator::linearized(
                &iterate,
                &self.grid,
                &self.params,
                self.reg.as_ref(),
                self.config.linearization,
            )
            .ok()?;
            floor |= op.floor_active();
            let mut matrix = PentaMatrix::identity(n);
            op.add_scaled_to(&mut matrix, dt);
            let rhs: Vec<f64> = op
                .apply(old)
                .iter()
                .zip(&source)
                .map(|(ku, s)| s - dt * ku)
                .collect();
            let delta = matrix.solve(&rhs).ok()?;
            let next: Vec<f64> = old.iter().zip(&delta).map(|(u, d)| u + d).collect();
            let scale = next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let change = next
                .iter()
                .zip(&iterate)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if !change.is_finite() {
                return None;
            }
            iterate = next;
            if change <= self.config.picard_tol * scale.max(f64::MIN_POSITIVE) {
                return Some(Converged {
                    heights: iterate,
                    iterations: k,
                    floor,
                });
            }
        }
        None
    }
}

/// One step with the configured initial step size; see [`Stepper::step`].
pub fn step(
    state: &FilmState,
    grid: &Grid1D,
    params: &FluidParams,
    config: &SolverConfig,
) -> Result<StepOutcome> {
    Stepper::new(*grid, *params, *config)?
        .with_touchdown_threshold(config.touchdown_threshold.unwrap_or(0.0))
        .step(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    EndTime,
    Touchdown { time: f64, min_height: f64 },
    BlowUp { time: f64, monitor: f64 },
    StepFailure { time: f64, dt: f64 },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::EndTime => "t_end",
            Termination::Touchdown { .. } => "touchdown",
            Termination::BlowUp { .. } => "blow_up",
            Termination::StepFailure { .. } => "step_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub final_state: FilmState,
    /// One record for the initial state and one per accepted step.
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub touchdown_threshold: f64,
}

/// Integrates from `initial` to `t_end` or until touchdown, blow-up or
/// step failure.
pub fn run(
    initial: &FilmState,
    grid: &Grid1D,
    params: &FluidParams,
    config: &SolverConfig,
    forcing: Option<Forcing>,
) -> Result<RunReport> {
    run_observed(initial, grid, params, config, forcing, |_, _| {})
}

/// [`run`] with a callback receiving every accepted step and its index
/// (starting at 1).
pub fn run_observed(
    initial: &FilmState,
    grid: &Grid1D,
    params: &FluidParams,
    config: &SolverConfig,
    forcing: Option<Forcing>,
    mut observer: impl FnMut(usize, &StepOutcome),
) -> Result<RunReport> {
    grid.check_len(&initial.heights)?;
    initial.check_positive()?;
    let threshold = config
        .touchdown_threshold
        .unwrap_or(DEFAULT_TOUCHDOWN_FRACTION * initial.min_height());
    let mut stepper = Stepper::new(*grid, *params, *config)?
        .with_forcing(forcing)
        .with_touchdown_threshold(threshold);

    let mut records = vec![DiagnosticsRecord::capture(initial, grid, params, 0.0, 0)?];
    let mut state = initial.clone();
    let mut n = 0;
    let termination = loop {
        if state.time >= config.t_end {
            break Termination::EndTime;
        }
        let outcome = match stepper.step(&state) {
            Ok(o) => o,
            Err(Error::StepFailure { time, dt }) => break Termination::StepFailure { time, dt },
            Err(e) => return Err(e),
        };
        n += 1;
        observer(n, &outcome);
        records.push(DiagnosticsRecord::capture(
            &outcome.state,
            grid,
            params,
            outcome.dt_used,
            outcome.picard_iterations,
        )?);
        state = outcome.state;
        match outcome.signal {
            Some(Signal::Touchdown { min_height }) => {
                break Termination::Touchdown {
                    time: state.time,
                    min_height,
                }
            }
            Some(Signal::BlowUp { monitor }) => {
                break Termination::BlowUp {
                    time: state.time,
                    monitor,
                }
            }
            None => {}
        }
    };
    Ok(RunReport {
        final_state: state,
        records,
        termination,
        touchdown_threshold: threshold,
    })
}
