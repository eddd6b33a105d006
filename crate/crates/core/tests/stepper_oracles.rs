use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thinfilm::banded::{solve_banded, LinearSystem, PentaMatrix};
use thinfilm::diagnostics::{energy, mass};
use thinfilm::rheology::{abs_pow, derive_params};
use thinfilm::stepper::{assemble_system, step, Linearization};
use thinfilm::{FilmState, FluidParams, Grid1D, SolverConfig};

/// Dense `(N) x (N+1)` face third-difference matrix built from the even
/// extension `u_{-j} = u_j`, `u_{N+j} = u_{N-j}`.
fn dense_face_third(n: usize, h: f64) -> DMatrix<f64> {
    let reflect = |j: i64| -> usize {
        let n = n as i64;
        (if j < 0 { -j } else if j > n { 2 * n - j } else { j }) as usize
    };
    let mut d = DMatrix::zeros(n, n + 1);
    for f in 0..n {
        let f = f as i64;
        for (off, c) in [(-1, -1.0), (0, 3.0), (1, -3.0), (2, 1.0)] {
            d[(f as usize, reflect(f + off))] += c / h.powi(3);
        }
    }
    d
}

/// Conservative divergence with zero boundary flux over trapezoidal cells.
fn dense_divergence(n: usize, h: f64) -> DMatrix<f64> {
    let mut div = DMatrix::zeros(n + 1, n);
    for i in 0..=n {
        let volume = if i == 0 || i == n { 0.5 * h } else { h };
        if i < n {
            div[(i, i)] += 1.0 / volume;
        }
        if i > 0 {
            div[(i, i - 1)] -= 1.0 / volume;
        }
    }
    div
}

fn face_mobilities(u: &[f64], grid: &Grid1D, p: &FluidParams) -> Vec<f64> {
    let n = grid.n_cells();
    let w = dense_face_third(n, grid.spacing()) * DVector::from_column_slice(u);
    (0..n)
        .map(|f| {
            let ub = 0.5 * (u[f] + u[f + 1]);
            p.a * ub.powi(3) * (1.0 + abs_pow(p.b * ub * w[f], p.alpha - 1.0))
        })
        .collect()
}

fn dense_system(grid: &Grid1D, mobility: &[f64], dt: f64) -> DMatrix<f64> {
    let n = grid.n_cells();
    let h = grid.spacing();
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(mobility));
    DMatrix::identity(n + 1, n + 1) + dense_divergence(n, h) * m * dense_face_third(n, h) * dt
}

fn compare(u: &FilmState, grid: &Grid1D, p: &FluidParams, mobility: &[f64], dt: f64) -> f64 {
    let config = SolverConfig {
        linearization: Linearization::Picard,
        use_regularized: false,
        ..SolverConfig::default()
    };
    let sys = assemble_system(u, grid, p, &config, dt, u).unwrap();
    let oracle = dense_system(grid, mobility, dt);
    let n = grid.n_nodes();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((sys.matrix.get(i, j) - oracle[(i, j)]).abs());
        }
    }
    worst / oracle.amax()
}

#[test]
fn assembly_matches_dense_oracle_on_constants() {
    let grid = Grid1D::new(1.0, 8).unwrap();
    let p = derive_params(1.0, 1.0, 1.0, 1.5).unwrap();
    let u = FilmState::constant(&grid, 1.7).unwrap();
    // constant frozen state: w = 0 and the mobility is a c^3
    let mobility = vec![p.a * 1.7f64.powi(3); 8];
    let err = compare(&u, &grid, &p, &mobility, 0.01);
    assert!(err < 1e-15, "{err:e}");
}

#[test]
fn assembly_matches_dense_oracle_on_varying_states() {
    let grid = Grid1D::new(1.0, 8).unwrap();
    for alpha in [1.3, 2.0, 3.5] {
        let p = derive_params(2.0, 0.5, 0.7, alpha).unwrap();
        let u = FilmState::from_fn(&grid, 0.0, |x| 1.0 + 0.4 * (PI * x).cos() + 0.1 * x).unwrap();
        let mobility = face_mobilities(&u.heights, &grid, &p);
        assert!(compare(&u, &grid, &p, &mobility, 1e-3) < 1e-14, "alpha {alpha}");
    }
}

#[test]
fn newton_system_has_the_picard_fixed_point() {
    // at a fixed point v = u both linearizations give the same residual
    let grid = Grid1D::new(1.0, 16).unwrap();
    let p = derive_params(1.0, 1.0, 1.0, 1.5).unwrap();
    let u = FilmState::from_fn(&grid, 0.0, |x| 1.0 + 0.3 * (PI * x).cos()).unwrap();
    let residual = |lin| {
        let config = SolverConfig {
            linearization: lin,
            ..SolverConfig::default()
        };
        let sys = assemble_system(&u, &grid, &p, &config, 1e-3, &u).unwrap();
        let au = sys.matrix.matvec(&u.heights);
        au.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect::<Vec<f64>>()
    };
    let (a, b) = (residual(Linearization::Picard), residual(Linearization::Newton));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

fn random_penta(rng: &mut ChaCha8Rng, n: usize) -> (PentaMatrix, DMatrix<f64>) {
    let mut m = PentaMatrix::zeros(n);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i.saturating_sub(2)..(i + 3).min(n) {
            let v = rng.gen_range(-1.0..1.0);
            m.set(i, j, v);
            d[(i, j)] = v;
        }
    }
    (m, d)
}

#[test]
fn banded_solve_matches_dense_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let (m, d) = random_penta(&mut rng, 12);
        let rhs: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = d.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let sys = LinearSystem::new(m, rhs).unwrap();
        let x = solve_banded(&sys).unwrap();
        let scale = oracle.amax().max(1.0);
        for (a, b) in x.iter().zip(oracle.iter()) {
            assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn banded_residual_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in [5, 12, 40, 200] {
        let (mut m, _) = random_penta(&mut rng, n);
        for i in 0..n {
            m.add(i, i, 5.0);
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = LinearSystem::new(m, rhs.clone()).unwrap();
        let x = solve_banded(&sys).unwrap();
        let rhs_norm = rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(sys.residual_norm(&x) <= 1e-11 * rhs_norm);
    }
}

fn smooth_state(grid: &Grid1D, c0: f64, amps: &[f64]) -> FilmState {
    FilmState::from_fn(grid, 0.0, |x| {
        c0 + amps
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * PI * x).cos())
            .sum::<f64>()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steps_conserve_mass_and_dissipate(
        c0 in 0.5f64..2.0,
        amps in proptest::collection::vec(-0.1f64..0.1, 1..4),
        alpha in 1.1f64..3.0,
        dt in 1e-6f64..1e-4,
    ) {
        let grid = Grid1D::new(1.0, 48).unwrap();
        let p = derive_params(1.0, 1.0, 1.0, alpha).unwrap();
        let u = smooth_state(&grid, c0, &amps);
        let out = step(&u, &grid, &p, &SolverConfig::fixed_step(dt, 1.0)).unwrap();
        let m0 = mass(&u, &grid);
        prop_assert!((mass(&out.state, &grid) - m0).abs() <= 1e-11 * m0);
        let e0 = energy(&u, &grid);
        prop_assert!(energy(&out.state, &grid) <= e0 * (1.0 + 1e-10));
    }

    #[test]
    fn constants_never_move(c in 0.05f64..5.0, alpha in 1.01f64..4.0, dt in 1e-6f64..1e-1) {
        let grid = Grid1D::new(2.0, 16).unwrap();
        let p = derive_params(1.0, 1.0, 1.0, alpha).unwrap();
        let u = FilmState::constant(&grid, c).unwrap();
        let out = step(&u, &grid, &p, &SolverConfig::fixed_step(dt, 1.0)).unwrap();
        prop_assert_eq!(out.state.heights, u.heights);
    }

    #[test]
    fn newtonian_assembly_is_alpha_free(alpha in 1.01f64..4.0, c1 in -0.5f64..0.5) {
        let grid = Grid1D::new(1.0, 12).unwrap();
        let base = FluidParams::from_coefficients(0.7, 0.0, 2.0).unwrap();
        let other = FluidParams::from_coefficients(0.7, 0.0, alpha).unwrap();
        let u = smooth_state(&grid, 1.0, &[c1]);
        let cfg = SolverConfig::default();
        let a = assemble_system(&u, &grid, &base, &cfg, 1e-3, &u).unwrap();
        let b = assemble_system(&u, &grid, &other, &cfg, 1e-3, &u).unwrap();
        prop_assert_eq!(a, b);
    }
}
