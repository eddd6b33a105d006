//! Manufactured solutions `u*(t, x) = c0 + c1 exp(-lambda t) cos(k pi x / l)`
//! and grid-refinement studies of the forced solver.
//!
//! The forcing is the exact residual `u*_t + (flux(u*))_x`, expanded as
//!
//! ```text
//! a [u^3 w_x + 3 u^2 u_x w
//!    + b^(alpha-1) ((alpha+2) u^(alpha+1) u_x |w|^(alpha-1) w
//!                   + alpha u^(alpha+2) |w|^(alpha-1) w_x)]
//! ```
//!
//! with `w = u_xxx`. Only `|w|^(alpha-1)` appears, which is continuous.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{FilmState, Grid1D};
use crate::rheology::{abs_pow, FluidParams};
use crate::stepper::{run, Forcing, SolverConfig, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedSolution {
    pub base: f64,
    pub amplitude: f64,
    pub decay_rate: f64,
    pub wavenumber: u32,
    pub half_length: f64,
}

/// `(u, u_t, u_x, u_xxx, u_xxxx)` of the manufactured solution.
#[derive(Debug, Clone, Copy)]
struct Jet {
    u: f64,
    u_t: f64,
    u_x: f64,
    u_xxx: f64,
    u_xxxx: f64,
}

impl ManufacturedSolution {
    pub fn new(
        base: f64,
        amplitude: f64,
        decay_rate: f64,
        wavenumber: u32,
        half_length: f64,
    ) -> Result<Self> {
        if !(base.is_finite() && base > 0.0) {
            return Err(domain("c0", "base height must be positive"));
        }
        if !(amplitude.is_finite() && amplitude.abs() < base) {
            return Err(domain("c1", "need |c1| < c0 for a positive film"));
        }
        if !(decay_rate.is_finite() && decay_rate > 0.0) {
            return Err(domain("lambda", "decay rate must be positive"));
        }
        if wavenumber == 0 {
            return Err(domain("k", "wavenumber must be at least 1"));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(domain("half_length", "must be positive"));
        }
        Ok(ManufacturedSolution {
            base,
            amplitude,
            decay_rate,
            wavenumber,
            half_length,
        })
    }

    fn kappa(&self) -> f64 {
        self.wavenumber as f64 * PI / self.half_length
    }

    fn jet(&self, t: f64, x: f64) -> Jet {
        let k = self.kappa();
        let e = self.amplitude * (-self.decay_rate * t).exp();
        let (s, c) = (k * x).sin_cos();
        Jet {
            u: self.base + e * c,
            u_t: -self.decay_rate * e * c,
            u_x: -e * k * s,
            u_xxx: e * k.powi(3) * s,
            u_xxxx: e * k.powi(4) * c,
        }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.jet(t, x).u
    }

    pub fn exact_state(&self, t: f64, grid: &Grid1D) -> FilmState {
        FilmState {
            time: t,
            heights: grid.nodes().into_iter().map(|x| self.value(t, x)).collect(),
        }
    }

    /// Source term making `u*` an exact solution.
    pub fn forcing(&self, t: f64, x: f64, params: &FluidParams) -> f64 {
        let Jet {
            u,
            u_t,
            u_x,
            u_xxx: w,
            u_xxxx: w_x,
        } = self.jet(t, x);
        let alpha = params.alpha;
        let newtonian = u.powi(3) * w_x + 3.0 * u * u * u_x * w;
        let thinning = if params.b == 0.0 {
            0.0
        } else {
            let kernel = abs_pow(w, alpha - 1.0);
            params.b.powf(alpha - 1.0)
                * kernel
                * ((alpha + 2.0) * u.powf(alpha + 1.0) * u_x * w
                    + alpha * u.powf(alpha + 2.0) * w_x)
        };
        u_t + params.a * (newtonian + thinning)
    }

    pub fn as_forcing(&self, params: &FluidParams) -> Forcing {
        let ms = *self;
        let params = *params;
        Arc::new(move |t, x| ms.forcing(t, x, &params))
    }
}

/// Time step rule of a refinement study: level `j` takes
/// `base_steps * 4^j` equal steps to `horizon`, so `dt` scales with `h^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRefinement {
    pub horizon: f64,
    pub base_steps: usize,
}

impl TimeRefinement {
    pub fn steps(&self, level: usize) -> usize {
        self.base_steps * 4usize.pow(level as u32)
    }

    pub fn dt(&self, level: usize) -> f64 {
        self.horizon / self.steps(level) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderRow {
    pub level: usize,
    pub n_cells: usize,
    pub dt: f64,
    pub max_error: f64,
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub rows: Vec<OrderRow>,
}

impl OrderReport {
    pub const CSV_HEADER: &'static str = "level,N,dt,max_error,observed_order";

    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.observed_order).collect()
    }

    pub fn min_order(&self) -> f64 {
        self.orders().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn errors_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].max_error < w[0].max_error)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let order = r.observed_order.map(|o| format!("{o:.16e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{}\n",
                r.level, r.n_cells, r.dt, r.max_error, order
            ));
        }
        out
    }
}

/// Forced runs on `levels` successively doubled grids; max-norm errors
/// against the manufactured solution at the horizon.
pub fn convergence_study(
    ms: &ManufacturedSolution,
    params: &FluidParams,
    base_grid: &Grid1D,
    levels: usize,
    rule: TimeRefinement,
    solver: &SolverConfig,
) -> Result<OrderReport> {
    if levels < 3 {
        return Err(domain("levels", format!("need at least 3 refinement levels, got {levels}")));
    }
    if !(rule.horizon > 0.0) || rule.base_steps == 0 {
        return Err(domain("horizon", "need a positive horizon and at least one step"));
    }
    if (ms.half_length - base_grid.half_length()).abs() > 1e-14 * ms.half_length {
        return Err(domain("half_length", "manufactured solution and grid disagree"));
    }
    let grids: Vec<Grid1D> = std::iter::successors(Some(*base_grid), |g| Some(g.refined()))
        .take(levels)
        .collect();
    let errors: Vec<Result<(usize, f64, f64)>> = grids
        .par_iter()
        .enumerate()
        .map(|(level, grid)| {
            let dt = rule.dt(level);
            let config = SolverConfig {
                t_end: rule.horizon,
                ..SolverConfig::fixed_step(dt, rule.horizon)
            };
            let config = SolverConfig {
                picard_max: solver.picard_max,
                picard_tol: solver.picard_tol,
                epsilon: solver.epsilon,
                use_regularized: solver.use_regularized,
                linearization: solver.linearization,
                ..config
            };
            let initial = ms.exact_state(0.0, grid);
            let report = run(&initial, grid, params, &config, Some(ms.as_forcing(params)))?;
            if report.termination != Termination::EndTime {
                return Err(domain(
                    "mms",
                    format!("level {level} ended early: {:?}", report.termination),
                ));
            }
            let exact = ms.exact_state(report.final_state.time, grid);
            let err = report
                .final_state
                .heights
                .iter()
                .zip(&exact.heights)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            Ok((grid.n_cells(), dt, err))
        })
        .collect();
    let mut rows: Vec<OrderRow> = Vec::with_capacity(levels);
    for (level, e) in errors.into_iter().enumerate() {
        let (n_cells, dt, max_error) = e?;
        let observed_order = rows
            .last()
            .map(|prev: &OrderRow| (prev.max_error / max_error).log2());
        rows.push(OrderRow {
            level,
            n_cells,
            dt,
            max_error,
            observed_order,
        });
    }
    Ok(OrderReport { rows })
}
