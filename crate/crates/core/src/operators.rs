//! Coefficients of the non-divergence form `u_t + A u_xxxx = F` and the
//! face mobility used by the conservative scheme.
//!
//! `A(z) = a z0^3 (1 + alpha |b z0 z3|^(alpha-1))` is only defined for
//! `z0 > 0`; the global extension takes the positive part of `z0` and is
//! floored at `epsilon/2` so that it stays uniformly parabolic.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{derivative, FilmState, Grid1D};
use crate::rheology::{abs_pow, flux, FluidParams};

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Pointwise jet `(u, u_x, u_xx, u_xxx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub z0: f64,
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

impl CoefficientSample {
    pub fn new(z0: f64, z1: f64, z2: f64, z3: f64) -> Self {
        CoefficientSample { z0, z1, z2, z3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub epsilon: f64,
}

impl RegularizationConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(domain("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(RegularizationConfig { epsilon })
    }

    pub fn floor(&self) -> f64 {
        0.5 * self.epsilon
    }

    /// Height below which `a u^3` falls under the floor, `(epsilon / 2a)^(1/3)`.
    pub fn positivity_height(&self, params: &FluidParams) -> f64 {
        (self.floor() / params.a).cbrt()
    }
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        RegularizationConfig {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

fn a_unchecked(z0: f64, z3: f64, params: &FluidParams) -> f64 {
    let shear = abs_pow(params.b * z0 * z3, params.alpha - 1.0);
    params.a * z0.powi(3) * (1.0 + params.alpha * shear)
}

/// Principal coefficient `A` on its natural domain `z0 > 0`.
pub fn coeff_a(z: CoefficientSample, params: &FluidParams) -> Result<f64> {
    if !(z.z0 > 0.0) {
        return Err(domain("z0", format!("A is defined for positive heights only, got {}", z.z0)));
    }
    Ok(a_unchecked(z.z0, z.z3, params))
}

/// `max(A(z0^+, z1, z2, z3), epsilon/2)`, defined for every input.
pub fn coeff_a_bar_eps(
    z: CoefficientSample,
    params: &FluidParams,
    reg: &RegularizationConfig,
) -> f64 {
    a_unchecked(z.z0.max(0.0), z.z3, params).max(reg.floor())
}

/// Lower-order term `F = -3a z0^2 (1 + |b_tilde z0 z3|^(alpha-1)) z1 z3`.
pub fn coeff_f(z: CoefficientSample, params: &FluidParams) -> f64 {
    let shear = abs_pow(params.b_tilde * z.z0 * z.z3, params.alpha - 1.0);
    -3.0 * params.a * z.z0 * z.z0 * (1.0 + shear) * z.z1 * z.z3
}

/// Flux mobility `a u^3 (1 + |b u w|^(alpha-1))` at a face with mean height
/// `u` and third derivative `w`. Negative heights contribute their positive
/// part. With a regularization the value is floored at `epsilon/2`; the
/// returned flag reports whether the floor was active.
pub fn face_mobility(
    u: f64,
    w: f64,
    params: &FluidParams,
    reg: Option<&RegularizationConfig>,
) -> (f64, bool) {
    let u = u.max(0.0);
    let m = params.a * u * u * u * (1.0 + abs_pow(params.b * u * w, params.alpha - 1.0));
    match reg {
        Some(reg) if m < reg.floor() => (reg.floor(), true),
        _ => (m, false),
    }
}

/// Nodal jets `(u, u_x, u_xx, u_xxx)` from the central stencils.
pub fn nodal_samples(state: &FilmState, grid: &Grid1D) -> Result<Vec<CoefficientSample>> {
    let u = &state.heights;
    let d1 = derivative(u, 1, grid)?;
    let d2 = derivative(u, 2, grid)?;
    let d3 = derivative(u, 3, grid)?;
    Ok((0..u.len())
        .map(|i| CoefficientSample::new(u[i], d1[i], d2[i], d3[i]))
        .collect())
}

/// Difference between the central divergence of the nodal flux and the
/// non-divergence form `A u_xxxx - F`, node by node.
pub fn divergence_residual(
    state: &FilmState,
    grid: &Grid1D,
    params: &FluidParams,
) -> Result<Vec<f64>> {
    state.check_positive()?;
    let samples = nodal_samples(state, grid)?;
    let d4 = derivative(&state.heights, 4, grid)?;
    let n = samples.len();
    let h = grid.spacing();
    let node_flux: Vec<f64> = samples.iter().map(|z| flux(z.z0, z.z3, params)).collect();
    // the flux is odd under the even reflection of u
    let f = |j: isize| -> f64 {
        if j < 0 {
            -node_flux[(-j) as usize]
        } else if j as usize >= n {
            -node_flux[2 * (n - 1) - j as usize]
        } else {
            node_flux[j as usize]
        }
    };
    samples
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let i = i as isize;
            let divergence = (f(i + 1) - f(i - 1)) / (2.0 * h);
            Ok(divergence - (coeff_a(z, params)? * d4[i as usize] - coeff_f(z, params)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rheology::derive_params;

    fn coeffs(a: f64, b: f64, alpha: f64) -> FluidParams {
        FluidParams::from_coefficients(a, b, alpha).unwrap()
    }

    #[test]
    fn coeff_a_examples() {
        let p = coeffs(1.0, 1.0, 2.0);
        assert_eq!(coeff_a(CoefficientSample::new(1.0, 0.3, 0.2, 0.0), &p).unwrap(), 1.0);
        assert_eq!(coeff_a(CoefficientSample::new(1.0, 0.0, 0.0, 2.0), &p).unwrap(), 5.0);
        assert_eq!(coeff_a(CoefficientSample::new(2.0, 0.0, 0.0, 0.0), &p).unwrap(), 8.0);
        assert!(coeff_a(CoefficientSample::new(0.0, 0.0, 0.0, 1.0), &p).is_err());
        assert!(coeff_a(CoefficientSample::new(-1.0, 0.0, 0.0, 1.0), &p).is_err());
    }

    #[test]
    fn coeff_a_bar_examples() {
        let p = coeffs(1.0, 1.0, 2.0);
        let reg = RegularizationConfig::new(0.1).unwrap();
        for z3 in [-3.0, 0.0, 11.0] {
            assert_eq!(coeff_a_bar_eps(CoefficientSample::new(-1.0, 0.0, 0.0, z3), &p, &reg), 0.05);
        }
        assert_eq!(coeff_a_bar_eps(CoefficientSample::new(1.0, 0.0, 0.0, 2.0), &p, &reg), 5.0);
        let reg = RegularizationConfig::new(2.0).unwrap();
        assert_eq!(coeff_a_bar_eps(CoefficientSample::new(0.0, 0.0, 0.0, 7.0), &p, &reg), 1.0);
        assert!(RegularizationConfig::new(0.0).is_err());
    }

    #[test]
    fn coeff_f_examples() {
        // b_tilde = 1 at alpha = 2 needs b = 3/4
        let p = coeffs(1.0, 0.75, 2.0);
        assert!((p.b_tilde - 1.0).abs() < 1e-15);
        assert_eq!(coeff_f(CoefficientSample::new(1.3, 0.0, 0.5, 2.0), &p), 0.0);
        assert_eq!(coeff_f(CoefficientSample::new(1.3, 0.7, 0.5, 0.0), &p), 0.0);
        let v = coeff_f(CoefficientSample::new(1.0, 1.0, 0.0, 1.0), &p);
        assert!((v + 6.0).abs() < 1e-14);
    }

    #[test]
    fn extension_agrees_above_positivity_height() {
        let p = derive_params(1.0, 1.0, 1.0, 1.5).unwrap();
        let reg = RegularizationConfig::new(1e-3).unwrap();
        let z0 = reg.positivity_height(&p) * 1.0001;
        for z3 in [-5.0, 0.0, 0.1, 4.0] {
            let z = CoefficientSample::new(z0, 0.2, -0.3, z3);
            assert_eq!(coeff_a_bar_eps(z, &p, &reg), coeff_a(z, &p).unwrap());
        }
    }

    #[test]
    fn mobility_floor_flag() {
        let p = coeffs(1.0, 1.0, 1.5);
        let reg = RegularizationConfig::new(1e-2).unwrap();
        assert_eq!(face_mobility(1.0, 0.0, &p, Some(&reg)), (1.0, false));
        assert_eq!(face_mobility(0.1, 0.0, &p, Some(&reg)), (0.005, true));
        assert_eq!(face_mobility(-0.5, 3.0, &p, None), (0.0, false));
    }

    #[test]
    fn residual_vanishes_on_constants() {
        let g = Grid1D::new(1.0, 16).unwrap();
        let s = FilmState::constant(&g, 1.4).unwrap();
        let p = derive_params(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(divergence_residual(&s, &g, &p).unwrap().iter().all(|&r| r == 0.0));
        let bad = FilmState::from_fn(&g, 0.0, |x| x).unwrap();
        assert!(divergence_residual(&bad, &g, &p).is_err());
    }
}
