//! Ellis constitutive law and the lubrication coefficients derived from it.
//!
//! The Ellis law relates shear rate `s` and shear stress `tau` implicitly by
//!
//! ```text
//! s = (1/mu0) * (1 + |tau/tau_star|^(alpha-1)) * tau
//! ```
//!
//! and defines the apparent viscosity `mu(s) = tau(s)/s`. Integrating the
//! resulting horizontal velocity across the film yields the flux
//! `a u^3 (1 + |b u u_xxx|^(alpha-1)) u_xxx` that drives the thin-film equation.
//! All quantities are dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Smallest accepted distance of `alpha` above 1. The coefficient `b`
/// contains the exponent `1/(alpha-1)` and overflows as `alpha -> 1`.
pub const ALPHA_MARGIN: f64 = 1e-6;

const STRESS_TOL: f64 = 1e-12;
const STRESS_MAX_ITER: usize = 100;

/// Physical fluid inputs together with the derived lubrication coefficients.
///
/// `a = sigma / (3 mu0)`, `b = (3/(alpha+2))^(1/(alpha-1)) sigma/tau_star`
/// and `b_tilde = sigma/tau_star`. The Newtonian limit `1/tau_star -> 0`
/// is represented by `tau_star = inf`, which gives `b = b_tilde = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub sigma: f64,
    pub mu0: f64,
    pub tau_star: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub b_tilde: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(domain("alpha", "alpha must exceed 1"));
    }
    if alpha <= 1.0 + ALPHA_MARGIN {
        return Err(domain(
            "alpha",
            format!("alpha must exceed 1 + {ALPHA_MARGIN:e}; use b = 0 for the Newtonian limit"),
        ));
    }
    Ok(())
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain(name, format!("must be finite and positive, got {value}")))
    }
}

/// `(3/(alpha+2))^(1/(alpha-1))`, the factor relating `b` to `b_tilde`.
fn b_ratio(alpha: f64) -> f64 {
    (3.0 / (alpha + 2.0)).powf(1.0 / (alpha - 1.0))
}

/// Builds [`FluidParams`] from surface tension, zero-shear viscosity,
/// half-viscosity stress and flow behaviour exponent.
pub fn derive_params(sigma: f64, mu0: f64, tau_star: f64, alpha: f64) -> Result<FluidParams> {
    check_positive("sigma", sigma)?;
    check_positive("mu0", mu0)?;
    check_positive("tau_star", tau_star)?;
    check_alpha(alpha)?;
    let b_tilde = sigma / tau_star;
    Ok(FluidParams {
        sigma,
        mu0,
        tau_star,
        alpha,
        a: sigma / (3.0 * mu0),
        b: b_ratio(alpha) * b_tilde,
        b_tilde,
    })
}

impl FluidParams {
    /// Builds parameters directly from the lubrication coefficients `a` and
    /// `b`. `b = 0` selects the Newtonian flux. The physical fields are
    /// filled with a representative fluid: `mu0 = 1`, `sigma = 3a` and
    /// `tau_star = sigma/b_tilde`.
    pub fn from_coefficients(a: f64, b: f64, alpha: f64) -> Result<Self> {
        check_positive("a", a)?;
        check_alpha(alpha)?;
        if !b.is_finite() || b < 0.0 {
            return Err(domain("b", format!("must be finite and non-negative, got {b}")));
        }
        let b_tilde = b / b_ratio(alpha);
        let sigma = 3.0 * a;
        let tau_star = if b_tilde > 0.0 { sigma / b_tilde } else { f64::INFINITY };
        Ok(FluidParams {
            sigma,
            mu0: 1.0,
            tau_star,
            alpha,
            a,
            b,
            b_tilde,
        })
    }

    /// Same fluid with another flow behaviour exponent. The physical inputs
    /// are kept when `tau_star` is finite, otherwise `a` and `b` are kept.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if self.tau_star.is_finite() {
            derive_params(self.sigma, self.mu0, self.tau_star, alpha)
        } else {
            FluidParams::from_coefficients(self.a, self.b, alpha)
        }
    }

    /// Newtonian flux `a u^3 u_xxx` with the same `a` and `alpha`.
    pub fn newtonian(&self) -> Self {
        FluidParams {
            tau_star: f64::INFINITY,
            b: 0.0,
            b_tilde: 0.0,
            ..*self
        }
    }
}

/// `|w|^exponent`, continuous at zero for `exponent > 0`.
#[inline]
pub fn abs_pow(w: f64, exponent: f64) -> f64 {
    w.abs().powf(exponent)
}

/// Shear rate produced by the stress `tau`.
fn shear_rate_of(tau: f64, params: &FluidParams) -> f64 {
    (1.0 + abs_pow(tau / params.tau_star, params.alpha - 1.0)) * tau / params.mu0
}

/// Shear stress `tau(s)` solving the implicit Ellis relation.
///
/// Safeguarded Newton iteration on the bracket `[0, mu0 |s|]`; odd symmetry
/// handles negative rates.
pub fn shear_stress(s: f64, params: &FluidParams) -> Result<f64> {
    if !s.is_finite() {
        return Err(domain("s", "shear rate must be finite"));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let target = s.abs();
    let tol = STRESS_TOL * target.max(1.0);
    let (mut lo, mut hi) = (0.0_f64, params.mu0 * target);
    let mut tau = hi;
    for _ in 0..STRESS_MAX_ITER {
        let residual = shear_rate_of(tau, params) - target;
        if residual.abs() <= tol {
            return Ok(tau.copysign(s));
        }
        if residual > 0.0 {
            hi = tau;
        } else {
            lo = tau;
        }
        let slope =
            (1.0 + params.alpha * abs_pow(tau / params.tau_star, params.alpha - 1.0)) / params.mu0;
        let newton = tau - residual / slope;
        tau = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            let residual = shear_rate_of(tau, params) - target;
            if residual.abs() <= tol {
                return Ok(tau.copysign(s));
            }
            break;
        }
    }
    Err(Error::NoConvergence {
        shear_rate: s,
        iterations: STRESS_MAX_ITER,
    })
}

/// Apparent viscosity `tau(s)/s`, equal to `mu0` at zero shear.
pub fn viscosity(s: f64, params: &FluidParams) -> Result<f64> {
    if s == 0.0 {
        return Ok(params.mu0);
    }
    Ok(shear_stress(s, params)? / s)
}

/// Horizontal velocity at height `z` above the substrate in a film of
/// thickness `u` with curvature gradient `u_xxx`.
pub fn velocity_profile(u: f64, u_xxx: f64, z: f64, params: &FluidParams) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(domain("u", format!("film height must be non-negative, got {u}")));
    }
    if !(0.0..=u).contains(&z) {
        return Err(domain("z", format!("{z} lies outside [0, {u}]")));
    }
    let FluidParams {
        sigma,
        mu0,
        tau_star,
        alpha,
        ..
    } = *params;
    let newtonian = sigma / mu0 * u_xxx * (u * z - 0.5 * z * z);
    let thinning = sigma.powf(alpha) / ((alpha + 1.0) * mu0 * tau_star.powf(alpha - 1.0))
        * abs_pow(u_xxx, alpha - 1.0)
        * u_xxx
        * ((u - z).powf(alpha + 1.0) - u.powf(alpha + 1.0));
    Ok(newtonian - thinning)
}

/// Volume flux `a u^3 (1 + |b u u_xxx|^(alpha-1)) u_xxx` through a film of
/// height `u`.
pub fn flux(u: f64, u_xxx: f64, params: &FluidParams) -> f64 {
    params.a * u.powi(3) * (1.0 + abs_pow(params.b * u * u_xxx, params.alpha - 1.0)) * u_xxx
}

/// Film pressure at the free surface, `-sigma u_xx`.
pub fn pressure(u_xx: f64, params: &FluidParams) -> f64 {
    -params.sigma * u_xx
}
