//! Property tests for the structural invariants: predictability, growth,
//! exact no-op controls, and noise-scale linearity.

use proptest::prelude::*;

use ldpkit::{
    euler_maruyama, eval_drift, eval_dispersion, rate_explicit, sample_brownian, solve_skeleton,
    Control, InitialData, Model, Poly, StatePath, TimeGrid,
};

fn built_ins() -> Vec<Model> {
    vec![
        Model::schilder(1),
        Model::ornstein_uhlenbeck(1, 1.3),
        Model::fw_poly(Poly(vec![0.5, -1.0]), Poly(vec![1.0, 0.25])).unwrap(),
        Model::cir(1.0, 1.0, 1.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Coefficients at (t_k, phi) are unchanged by any modification of the
    /// path strictly after t_k, bit for bit.
    #[test]
    fn predictability_under_future_edits(
        values in prop::collection::vec(-5.0f64..5.0, 17),
        edits in prop::collection::vec(-10.0f64..10.0, 17),
        k in 0usize..16,
    ) {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        for model in built_ins() {
            let base = StatePath::new(grid.clone(), 1, 1.0, values.clone(), None).unwrap();
            let mut edited_values = values.clone();
            for j in (k + 1)..=16 {
                edited_values[j] += edits[j];
            }
            let edited = StatePath::new(grid.clone(), 1, 1.0, edited_values, None).unwrap();
            let t = grid.node(k);
            let b0 = eval_drift(&model, t, &base).unwrap();
            let b1 = eval_drift(&model, t, &edited).unwrap();
            let s0 = eval_dispersion(&model, t, &base).unwrap();
            let s1 = eval_dispersion(&model, t, &edited).unwrap();
            prop_assert_eq!(b0[0].to_bits(), b1[0].to_bits());
            prop_assert_eq!(s0[0].to_bits(), s1[0].to_bits());
        }
    }

    /// An explicit zero control takes the exact same floating-point path as
    /// no control at all.
    #[test]
    fn zero_control_never_changes_a_path(seed in 0u64..1000, eps in 0.0f64..2.0, rate in 0.0f64..3.0) {
        let model = Model::ornstein_uhlenbeck(1, rate);
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let noise = sample_brownian(&grid, 1, seed);
        let init = InitialData::point(vec![0.7]);
        let zero = Control::zero(grid.clone(), 1);
        let with = euler_maruyama(&model, eps, &init, Some(&zero), &noise).unwrap();
        let without = euler_maruyama(&model, eps, &init, None, &noise).unwrap();
        for k in 0..with.n_nodes() {
            prop_assert_eq!(with.value(k)[0].to_bits(), without.value(k)[0].to_bits());
        }
    }

    /// For b = 0, sigma = I, the path at noise level 1/4 is exactly half the
    /// unit-noise path: sqrt(1/4) is a power of two, so the scaling commutes
    /// with every rounding.
    #[test]
    fn noise_scale_linearity_at_quarter(seed in 0u64..1000) {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let noise = sample_brownian(&grid, 1, seed);
        let init = InitialData::point(vec![0.0]);
        let unit = euler_maruyama(&model, 1.0, &init, None, &noise).unwrap();
        let quarter = euler_maruyama(&model, 0.25, &init, None, &noise).unwrap();
        for k in 0..unit.n_nodes() {
            prop_assert_eq!(quarter.value(k)[0].to_bits(), (0.5 * unit.value(k)[0]).to_bits());
        }
    }

    /// Every computed skeleton obeys the Gronwall growth bound at all nodes.
    #[test]
    fn skeleton_growth_bound_holds(
        steps in prop::collection::vec(-2.0f64..2.0, 32),
        x0 in -2.0f64..2.0,
    ) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let control = Control::new(grid.clone(), 1, steps).unwrap();
        for model in [Model::ornstein_uhlenbeck(1, 1.0), Model::cir(1.0, 1.0, 1.0).unwrap()] {
            let start = if model.holder_modulus().is_some() { x0.abs() + 0.1 } else { x0 };
            let init = InitialData::point(vec![start]);
            let sol = solve_skeleton(&model, &init, &control).unwrap();
            let f_sq = control.norm_sq();
            let mut sup_sq = 0.0f64;
            for k in 0..sol.path.n_nodes() {
                sup_sq = sup_sq.max(sol.path.value(k)[0].powi(2));
                let bound = ldpkit::growth_bound(
                    init.initial_state(),
                    model.growth_constant(),
                    grid.node(k),
                    f_sq,
                );
                prop_assert!(sup_sq <= bound * (1.0 + 1e-12));
            }
        }
    }

    /// The control action is nonnegative and exactly quadratic under scaling.
    #[test]
    fn action_is_quadratic(
        values in prop::collection::vec(-4.0f64..4.0, 16),
        scale in -3.0f64..3.0,
    ) {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let f = Control::new(grid.clone(), 1, values.clone()).unwrap();
        let a = ldpkit::action_of_control(&f);
        prop_assert!(a >= 0.0);
        let scaled_values: Vec<f64> = values.iter().map(|v| scale * v).collect();
        let g = Control::new(grid, 1, scaled_values).unwrap();
        let b = ldpkit::action_of_control(&g);
        prop_assert!((b - scale * scale * a).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    /// Explicit rates are nonnegative whenever they are finite.
    #[test]
    fn explicit_rate_nonnegative(values in prop::collection::vec(-3.0f64..3.0, 17)) {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let mut vals = values;
        vals[0] = 0.4;
        let path = StatePath::new(grid, 1, 0.0, vals, None).unwrap();
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let init = InitialData::point(vec![0.4]);
        let r = rate_explicit(&model, &init, &path, 1e-10).unwrap();
        prop_assert!(r >= 0.0);
    }

    /// Brownian refinement preserves the increments it splits.
    #[test]
    fn refinement_telescopes(seed in 0u64..500) {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let coarse = sample_brownian(&grid, 2, seed);
        let fine = ldpkit::refine_brownian(&coarse, seed ^ 0xabc).unwrap();
        for k in 0..16 {
            for j in 0..2 {
                let sum = fine.increment(2 * k)[j] + fine.increment(2 * k + 1)[j];
                prop_assert!((sum - coarse.increment(k)[j]).abs() <= 1e-13);
            }
        }
    }
}
