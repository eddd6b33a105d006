use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thinfilm::diagnostics::{dissipation, energy_budget_residual};
use thinfilm::mms::ManufacturedSolution;
use thinfilm::rheology::{abs_pow, derive_params, flux};
use thinfilm::stepper::{run, FluxOperator};
use thinfilm::{FilmState, FluidParams, Grid1D, SolverConfig};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    h / 3.0 * (f(a) + inner + f(b))
}

#[test]
fn dissipation_matches_fine_quadrature() {
    let p = FluidParams::from_coefficients(1.0, 1.0, 2.0).unwrap();
    let oracle = simpson(
        |x| {
            let u = 2.0 + (PI * x).cos();
            let w = PI.powi(3) * (PI * x).sin();
            p.a * (u.powi(3) * w * w + p.b.powf(p.alpha - 1.0) * u.powf(p.alpha + 2.0) * abs_pow(w, p.alpha + 1.0))
        },
        -1.0,
        1.0,
        200_000,
    );
    let errors: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&n| {
            let grid = Grid1D::new(1.0, n).unwrap();
            let u = FilmState::from_fn(&grid, 0.0, |x| 2.0 + (PI * x).cos()).unwrap();
            (dissipation(&u, &grid, &p).unwrap() - oracle).abs() / oracle
        })
        .collect();
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.95, "{errors:?}");
    }
    assert!(errors[1] <= 3e-4 && errors[2] <= 1e-4, "{errors:?}");
}

#[test]
fn single_step_budget_shrinks_with_dt() {
    let grid = Grid1D::new(1.0, 64).unwrap();
    let p = derive_params(1.0, 1.0, 1.0, 1.5).unwrap();
    let u0 = FilmState::from_fn(&grid, 0.0, |x| 1.0 + 0.3 * (PI * x).cos()).unwrap();
    let residuals: Vec<f64> = [4e-4, 2e-4, 1e-4, 5e-5]
        .iter()
        .map(|&dt| {
            let report = run(&u0, &grid, &p, &SolverConfig::fixed_step(dt, dt), None).unwrap();
            assert_eq!(report.records.len(), 2);
            energy_budget_residual(&report.records)
        })
        .collect();
    for w in residuals.windows(2) {
        assert!(w[0] / w[1] >= 1.8, "{residuals:?}");
    }
}

/// Centered difference of the analytic flux of the manufactured solution.
fn fd_divergence(ms: &ManufacturedSolution, p: &FluidParams, t: f64, x: f64, d: f64) -> f64 {
    let q = |x: f64| {
        let e = ms.amplitude * (-ms.decay_rate * t).exp();
        let k = ms.wavenumber as f64 * PI / ms.half_length;
        flux(ms.value(t, x), e * k.powi(3) * (k * x).sin(), p)
    };
    (q(x + d) - q(x - d)) / (2.0 * d)
}

#[test]
fn forcing_matches_finite_difference_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for alpha in [1.5, 2.0, 3.0] {
        let p = derive_params(1.0, 1.0, 1.0, alpha).unwrap();
        let ms = ManufacturedSolution::new(1.0, 0.3, 2.0, 2, 1.0).unwrap();
        for _ in 0..50 {
            let t = rng.gen_range(0.0..0.5);
            // stay clear of the zeros of u_xxx, where the flux is not smooth
            let x = loop {
                let x: f64 = rng.gen_range(-1.0..1.0);
                if (2.0 * PI * x).sin().abs() > 0.2 {
                    break x;
                }
            };
            let e = ms.amplitude * (-ms.decay_rate * t).exp();
            let u_t = -ms.decay_rate * e * (2.0 * PI * x).cos();
            let g = ms.forcing(t, x, &p);
            let coarse = (u_t + fd_divergence(&ms, &p, t, x, 1e-4) - g).abs();
            let fine = (u_t + fd_divergence(&ms, &p, t, x, 5e-5) - g).abs();
            let scale = g.abs() + u_t.abs() + 1.0;
            assert!(fine <= 1e-6 * scale, "alpha {alpha} x {x}: {fine}");
            assert!(fine <= coarse / 3.0 || fine <= 1e-9 * scale, "{coarse} -> {fine}");
        }
    }
}

fn discrete_residual(ms: &ManufacturedSolution, p: &FluidParams, n: usize, t: f64) -> f64 {
    let grid = Grid1D::new(1.0, n).unwrap();
    let u = ms.exact_state(t, &grid);
    let op = FluxOperator::frozen(&u.heights, &grid, p, None).unwrap();
    let lu = op.apply(&u.heights);
    grid.nodes()
        .iter()
        .zip(&lu)
        .map(|(&x, l)| {
            let e = ms.amplitude * (-ms.decay_rate * t).exp();
            let k = ms.wavenumber as f64 * PI;
            let u_t = -ms.decay_rate * e * (k * x).cos();
            (u_t + l - ms.forcing(t, x, p)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn discrete_operator_reproduces_forcing() {
    let ms = ManufacturedSolution::new(1.0, 0.2, 1.0, 1, 1.0).unwrap();
    for p in [
        derive_params(1.0, 1.0, 1.0, 3.0).unwrap(),
        derive_params(1.0, 1.0, 1.0, 1.5).unwrap().newtonian(),
    ] {
        let r: Vec<f64> = [32, 64, 128].iter().map(|&n| discrete_residual(&ms, &p, n, 0.1)).collect();
        for w in r.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "alpha {}: {r:?}", p.alpha);
        }
    }
}

#[test]
fn zero_amplitude_pipeline_is_steady() {
    let ms = ManufacturedSolution::new(1.3, 0.0, 1.0, 1, 1.0).unwrap();
    let p = derive_params(1.0, 1.0, 1.0, 1.5).unwrap();
    let grid = Grid1D::new(1.0, 32).unwrap();
    let u0 = ms.exact_state(0.0, &grid);
    let report = run(&u0, &grid, &p, &SolverConfig::fixed_step(1e-3, 1e-2), Some(ms.as_forcing(&p))).unwrap();
    assert_eq!(report.final_state.heights, u0.heights);
}

#[test]
fn one_forced_step_error_is_small() {
    let ms = ManufacturedSolution::new(1.0, 0.2, 1.0, 1, 1.0).unwrap();
    let p = derive_params(1.0, 1.0, 1.0, 2.0).unwrap();
    let errors: Vec<f64> = [32, 64]
        .iter()
        .map(|&n| {
            let grid = Grid1D::new(1.0, n).unwrap();
            let h = grid.spacing();
            let dt = 0.1 * h * h;
            let u0 = ms.exact_state(0.0, &grid);
            let report = run(&u0, &grid, &p, &SolverConfig::fixed_step(dt, dt), Some(ms.as_forcing(&p))).unwrap();
            let exact = ms.exact_state(dt, &grid);
            let err = report
                .final_state
                .heights
                .iter()
                .zip(&exact.heights)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            err / (dt + h * h)
        })
        .collect();
    // error / (dt + h^2) stays bounded
    assert!(errors.iter().all(|&c| c < 1.0), "{errors:?}");
}
