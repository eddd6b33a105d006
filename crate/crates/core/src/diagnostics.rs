//! Conserved and dissipated functionals of a film state.
//!
//! The energy `E(u) = 1/2 int u_x^2` is evaluated with the staggered
//! (face) gradient and the midpoint rule, and the dissipation
//! `D(u) = a int u^3 |u_xxx|^2 + b^(alpha-1) u^(alpha+2) |u_xxx|^(alpha+1)`
//! with the same face mobility and face third derivative as the stepper.
//! With these two discretizations every implicit step satisfies
//! `E^{n+1} - E^n <= -dt D(u^{n+1})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, face_third_unchecked, FilmState, Grid1D};
use crate::operators::face_mobility;
use crate::rheology::FluidParams;
use crate::stepper::{run_observed, Forcing, SolverConfig};

/// Lower bound for `min u` inside the blow-up monitor.
pub const TINY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub min_height: f64,
    pub max_third_derivative: f64,
    pub blowup_monitor: f64,
    pub dt: f64,
    pub picard_iterations: usize,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "time,mass,energy,dissipation,min_height,max_third_derivative,blowup_monitor,dt,picard_iterations";

    /// Record for `state` reached with step `dt` after `picard_iterations`
    /// sweeps. Negative heights (possible under regularization) enter the
    /// dissipation through their positive part.
    pub fn capture(
        state: &FilmState,
        grid: &Grid1D,
        params: &FluidParams,
        dt: f64,
        picard_iterations: usize,
    ) -> Result<Self> {
        grid.check_len(&state.heights)?;
        let d3 = derivative(&state.heights, 3, grid)?;
        Ok(DiagnosticsRecord {
            time: state.time,
            mass: mass(state, grid),
            energy: energy(state, grid),
            dissipation: dissipation_unchecked(&state.heights, grid, params),
            min_height: state.min_height(),
            max_third_derivative: d3.iter().fold(0.0, |m, v| m.max(v.abs())),
            blowup_monitor: blowup_monitor(state, grid),
            dt,
            picard_iterations,
        })
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.time,
            self.mass,
            self.energy,
            self.dissipation,
            self.min_height,
            self.max_third_derivative,
            self.blowup_monitor,
            self.dt,
            self.picard_iterations
        )
    }
}

/// Trapezoidal integral of the heights.
pub fn mass(state: &FilmState, grid: &Grid1D) -> f64 {
    grid.integrate(&state.heights)
}

fn gradient_energy(heights: &[f64], h: f64) -> f64 {
    0.5 * heights
        .windows(2)
        .map(|w| {
            let g = (w[1] - w[0]) / h;
            h * g * g
        })
        .sum::<f64>()
}

/// `1/2 int u_x^2`.
pub fn energy(state: &FilmState, grid: &Grid1D) -> f64 {
    gradient_energy(&state.heights, grid.spacing())
}

fn dissipation_unchecked(heights: &[f64], grid: &Grid1D, params: &FluidParams) -> f64 {
    let h = grid.spacing();
    face_third_unchecked(heights, h)
        .iter()
        .enumerate()
        .map(|(f, &w)| {
            let u = 0.5 * (heights[f] + heights[f + 1]);
            let (m, _) = face_mobility(u, w, params, None);
            h * m * w * w
        })
        .sum()
}

/// Rate of energy loss `D(u)`; requires non-negative heights.
pub fn dissipation(state: &FilmState, grid: &Grid1D, params: &FluidParams) -> Result<f64> {
    grid.check_len(&state.heights)?;
    if let Some(index) = state.heights.iter().position(|&u| u < 0.0) {
        return Err(Error::NegativeHeight {
            index,
            value: state.heights[index],
        });
    }
    Ok(dissipation_unchecked(&state.heights, grid, params))
}

/// `|E(T) + sum dt D - E(0)| / E(0)` along an unforced run, with the
/// dissipation integrated by the trapezoidal rule in time.
pub fn energy_budget_residual(series: &[DiagnosticsRecord]) -> f64 {
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return 0.0;
    };
    let dissipated: f64 = series
        .windows(2)
        .map(|w| w[1].dt * 0.5 * (w[0].dissipation + w[1].dissipation))
        .sum();
    (last.energy + dissipated - first.energy).abs() / first.energy.max(TINY)
}

/// `1/2 int (u_x - v_x)^2`.
pub fn relative_energy(u: &FilmState, v: &FilmState, grid: &Grid1D) -> Result<f64> {
    if u.heights.len() != v.heights.len() {
        return Err(Error::GridMismatch {
            left: u.heights.len(),
            right: v.heights.len(),
        });
    }
    grid.check_len(&u.heights)?;
    let diff: Vec<f64> = u.heights.iter().zip(&v.heights).map(|(a, b)| a - b).collect();
    Ok(gradient_energy(&diff, grid.spacing()))
}

/// `1/max(min u, TINY) + max_i (|u| + |u_x| + |u_xx| + |u_xxx| + |u_xxxx|)`.
///
/// The second term stands in for the Sobolev norm of the solution; any
/// derivative that blows up registers in it.
pub fn blowup_monitor(state: &FilmState, grid: &Grid1D) -> f64 {
    let u = &state.heights;
    let derivs: Vec<Vec<f64>> = (1..=4)
        .map(|k| derivative(u, k, grid).expect("state length checked by caller"))
        .collect();
    let norm = (0..u.len())
        .map(|i| u[i].abs() + derivs.iter().map(|d| d[i].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    1.0 / state.min_height().max(TINY) + norm
}

/// Outcome of two runs started from `u0` and `u0 + scale * cos(2 pi x / l)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub relative_energy: Vec<f64>,
    /// `relative_energy(t) / relative_energy(0)`, zero when the initial
    /// relative energy vanishes.
    pub ratio: Vec<f64>,
    /// Smallest `L >= 0` with `ratio(t) <= exp(L t)` on the sampled times.
    pub fitted_rate: f64,
}

impl StabilityReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratio.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the reference and the perturbed problem with the fixed step
/// `config.dt_initial` and tracks their relative energy.
pub fn uniqueness_stability_check(
    u0: &FilmState,
    perturbation_scale: f64,
    grid: &Grid1D,
    params: &FluidParams,
    config: &SolverConfig,
) -> Result<StabilityReport> {
    let l = grid.half_length();
    let perturbed = FilmState::new(
        u0.time,
        u0.heights
            .iter()
            .zip(grid.nodes())
            .map(|(u, x)| u + perturbation_scale * (2.0 * std::f64::consts::PI * x / l).cos())
            .collect(),
        grid,
    )?;
    perturbed.check_positive()?;
    let fixed = SolverConfig {
        dt_min: config.dt_initial,
        dt_max: config.dt_initial,
        ..*config
    };
    let collect = |init: &FilmState| -> Result<Vec<FilmState>> {
        let mut states = vec![init.clone()];
        let forcing: Option<Forcing> = None;
        run_observed(init, grid, params, &fixed, forcing, |_, o| {
            states.push(o.state.clone())
        })?;
        Ok(states)
    };
    let a = collect(u0)?;
    let b = collect(&perturbed)?;
    let steps = a.len().min(b.len());
    let mut times = Vec::with_capacity(steps);
    let mut rel = Vec::with_capacity(steps);
    for (sa, sb) in a.iter().zip(&b).take(steps) {
        times.push(sa.time);
        rel.push(relative_energy(sa, sb, grid)?);
    }
    let e0 = rel[0];
    let ratio: Vec<f64> = rel
        .iter()
        .map(|e| if e0 > 0.0 { e / e0 } else { 0.0 })
        .collect();
    let fitted_rate = times
        .iter()
        .zip(&ratio)
        .filter(|(t, r)| **t > u0.time && **r > 0.0)
        .map(|(t, r)| r.ln() / (t - u0.time))
        .fold(0.0, f64::max);
    Ok(StabilityReport {
        times,
        relative_energy: rel,
        ratio,
        fitted_rate,
    })
}
