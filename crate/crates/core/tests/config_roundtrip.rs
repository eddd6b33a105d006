use std::path::PathBuf;

use proptest::prelude::*;

use thinfilm::config::{
    parse_config, Coefficients, DomainConfig, InitialCondition, MmsConfig, OutputConfig, RunConfig,
};
use thinfilm::stepper::Linearization;
use thinfilm::SolverConfig;

fn coefficients() -> impl Strategy<Value = Coefficients> {
    let fluid = (0.1f64..10.0, 0.1f64..10.0, 0.1f64..10.0, 1.01f64..4.0).prop_map(|(sigma, mu0, tau_star, alpha)| {
        Coefficients::Fluid { sigma, mu0, tau_star, alpha }
    });
    let direct = (0.1f64..10.0, 0.0f64..5.0, 1.01f64..4.0, any::<bool>()).prop_map(|(a, b, alpha, with_tilde)| {
        let b_tilde = with_tilde.then(|| b / (3.0 / (alpha + 2.0)).powf(1.0 / (alpha - 1.0)));
        Coefficients::Direct { a, b, b_tilde, alpha }
    });
    prop_oneof![fluid, direct]
}

fn initial() -> impl Strategy<Value = InitialCondition> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|value| InitialCondition::Constant { value }),
        (0.5f64..5.0, -0.99f64..0.99, 1u32..6).prop_map(|(c0, f, k)| InitialCondition::Cosine { c0, c1: f * c0, k }),
        "[a-z]{1,8}\\.txt".prop_map(|p| InitialCondition::Samples { path: PathBuf::from(p) }),
    ]
}

fn solver() -> impl Strategy<Value = SolverConfig> {
    (
        (1e-12f64..1e-8, 1.0f64..100.0, 1.0f64..100.0, 1e-3f64..10.0),
        (1usize..50, 1e-14f64..1e-6, 1e-12f64..1e-2),
        (proptest::option::of(1e-9f64..1e-2), 1e3f64..1e12, 1.01f64..3.0, any::<bool>(), any::<bool>()),
    )
        .prop_map(|((dt_min, f1, f2, t_end), (picard_max, picard_tol, epsilon), (td, cap, growth, reg, newton))| {
            SolverConfig {
                dt_initial: dt_min * f1,
                dt_min,
                dt_max: dt_min * f1 * f2,
                t_end,
                picard_max,
                picard_tol,
                epsilon,
                touchdown_threshold: td,
                blowup_norm_cap: cap,
                growth_factor: growth,
                use_regularized: reg,
                linearization: if newton { Linearization::Newton } else { Linearization::Picard },
            }
        })
}

fn mms() -> impl Strategy<Value = Option<MmsConfig>> {
    proptest::option::of(
        (0.5f64..3.0, -0.9f64..0.9, 1u32..4, 0.1f64..5.0, 3usize..6, 1e-4f64..1.0, 1usize..10, proptest::option::of(0.5f64..3.0))
            .prop_map(|(c0, f, k, lambda, levels, horizon, base_steps, min_order)| MmsConfig {
                c0,
                c1: f * c0,
                k,
                lambda,
                levels,
                horizon,
                base_steps,
                min_order,
            }),
    )
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        coefficients(),
        (0.1f64..10.0, 8usize..1000),
        initial(),
        solver(),
        ("[a-z_]{1,10}", 0usize..100, 1usize..100),
        mms(),
    )
        .prop_map(|(coefficients, (half_length, n_cells), initial, solver, (dir, snap, every), mms)| RunConfig {
            coefficients,
            domain: DomainConfig { half_length, n_cells },
            initial,
            solver,
            output: OutputConfig {
                directory: PathBuf::from(dir),
                snapshot_interval: snap,
                diagnostics_every: every,
            },
            mms,
        })
}

proptest! {
    #[test]
    fn serialized_configs_parse_back(config in run_config()) {
        let text = config.to_config_string();
        let parsed = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(parsed, config);
    }
}
