use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use inflate_core::povm::strength_upper_bound;
use inflate_core::{
    cluster_fidelity_max, ggm_value, haar_random_pure, inflate_all, inflate_step, optimize_biased, proposition2_plan,
    strategy_residual, tangle, tangle_extrema, AuxParams, OptConfig, ProtocolParams, PureState, PureStateF32, RngSpec,
    C,
};
use inflate_core::optimize::cluster_candidate;
use proptest::prelude::*;

/// Three-tangle as `4|Det a|` with Cayley's hyperdeterminant.
fn hyperdeterminant_tangle(s: &PureState<f64>) -> f64 {
    let a = s.amplitudes();
    let at = |i: usize, j: usize, k: usize| a[4 * i + 2 * j + k];
    let sq = |z: C<f64>| z * z;
    let d1 = sq(at(0, 0, 0) * at(1, 1, 1))
        + sq(at(0, 0, 1) * at(1, 1, 0))
        + sq(at(0, 1, 0) * at(1, 0, 1))
        + sq(at(1, 0, 0) * at(0, 1, 1));
    let d2 = at(0, 0, 0) * at(1, 1, 1) * at(0, 1, 1) * at(1, 0, 0)
        + at(0, 0, 0) * at(1, 1, 1) * at(1, 0, 1) * at(0, 1, 0)
        + at(0, 0, 0) * at(1, 1, 1) * at(1, 1, 0) * at(0, 0, 1)
        + at(0, 1, 1) * at(1, 0, 0) * at(1, 0, 1) * at(0, 1, 0)
        + at(0, 1, 1) * at(1, 0, 0) * at(1, 1, 0) * at(0, 0, 1)
        + at(1, 0, 1) * at(0, 1, 0) * at(1, 1, 0) * at(0, 0, 1);
    let d3 = at(0, 0, 0) * at(1, 1, 0) * at(1, 0, 1) * at(0, 1, 1)
        + at(1, 1, 1) * at(0, 0, 1) * at(0, 1, 0) * at(1, 0, 0);
    4.0 * (d1 - d2 * 2.0 + d3 * 4.0).norm()
}

fn gghz(theta: f64) -> PureState<f64> {
    let mut amps = vec![C::new(0.0, 0.0); 4];
    amps[0] = C::new(theta.cos(), 0.0);
    amps[3] = C::new(theta.sin(), 0.0);
    PureState::new(2, amps).unwrap()
}

fn params(rank: usize, frac: f64, theta_a: f64, phi_a: f64) -> ProtocolParams<f64> {
    ProtocolParams::new(rank, frac * strength_upper_bound(rank), AuxParams::new(theta_a, phi_a))
}

#[test]
fn maximal_rank2_output_is_ghz_like() {
    let out = inflate_step(&gghz(FRAC_PI_4), &ProtocolParams::new(2, 0.5, AuxParams::new(FRAC_PI_2, 0.0)), 0).unwrap();
    assert!((tangle(&out.state, 0).unwrap().value - 1.0).abs() < 1e-12);
    assert!((ggm_value(&out.state) - 0.5).abs() < 1e-12);
}

#[test]
fn rank2_tangle_extremum_on_maximal_input() {
    let ext = tangle_extrema(&gghz(FRAC_PI_4), 2, 0, 1e-3, &OptConfig::default()).unwrap();
    assert!(ext.feasible());
    assert!((ext.t_max.best_value - 1.0).abs() < 1e-6, "{}", ext.t_max.best_value);
    assert!(ext.t_min.best_value > 1e-6);
}

#[test]
fn outcome_probabilities_sum_to_one() {
    for i in 0..20 {
        let input = haar_random_pure::<f64>(3, RngSpec::new(3, i)).unwrap();
        for rank in 2..=4 {
            let outs = inflate_all(&input, &params(rank, 0.37, 1.1, 0.4)).unwrap();
            let total: f64 = outs.iter().flatten().map(|o| o.probability).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn cluster_candidates_stay_in_the_even_sector() {
    let allowed = [0b0000, 0b0011, 0b1100, 0b1111];
    for (i, x) in [[0.3, 0.4, 1.0, 0.7, 2.0], [0.9, 2.5, 4.0, 2.9, 0.1], [0.55, 1.3, 5.5, 1.6, 3.3]]
        .iter()
        .enumerate()
    {
        let s = cluster_candidate(0.2 + 0.3 * i as f64, x).unwrap();
        for (idx, a) in s.amplitudes().iter().enumerate() {
            if !allowed.contains(&idx) {
                assert!(a.norm() < 1e-12, "amplitude {idx:04b} = {a}");
            }
        }
    }
}

#[test]
fn product_input_caps_cluster_fidelity_at_one_half() {
    // With gGHZ(0) = |000>, the output is |00> ⊗ φ and |<C|00 φ>|² ≤ ‖<00|C>‖² = 1/2.
    let r = cluster_fidelity_max(0.0f64, &OptConfig::with_grid(7, 2)).unwrap();
    assert!((r.best_value - 0.5).abs() < 1e-4, "{}", r.best_value);
    let mut worst: f64 = 0.0;
    let target = PureState::<f64>::cluster4();
    for i in 0..200u32 {
        let t = f64::from(i);
        let x = [(t * 0.37).fract(), (t * 0.71).fract() * PI, (t * 0.13).fract() * 2.0 * PI, 1.3, 0.2 * t];
        let Ok(s) = cluster_candidate(0.0, &x) else { continue };
        worst = worst.max(s.inner(&target).unwrap().norm_sqr());
    }
    assert!(worst <= 0.5 + 1e-12);
}

#[test]
fn analytic_plan_disentangles_rank2_four_qubit_outputs() {
    let plan = proposition2_plan::<f64>(4, 2, 0).unwrap();
    for i in 0..10 {
        let input = haar_random_pure::<f64>(3, RngSpec::new(11, i)).unwrap();
        let best = optimize_biased(&input, 2, Some(0), &OptConfig::with_grid(5, 1)).unwrap();
        let out = inflate_step(&input, &best.params, 0).unwrap();
        assert!(strategy_residual(&out.state, &plan).unwrap() < 1e-8);
    }
}

#[test]
fn single_precision_tracks_double() {
    let input = haar_random_pure::<f64>(2, RngSpec::new(5, 0)).unwrap();
    let p64 = params(3, 0.6, 0.9, 1.7);
    let out64 = inflate_step(&input, &p64, 0).unwrap();
    let input32: PureStateF32 = input.cast();
    let p32 = ProtocolParams::new(3, p64.p as f32, AuxParams::new(0.9f32, 1.7f32));
    let out32 = inflate_step(&input32, &p32, 0).unwrap();
    assert!((f64::from(out32.probability) - out64.probability).abs() < 1e-5);
    assert!((f64::from(ggm_value(&out32.state)) - ggm_value(&out64.state)).abs() < 1e-4);
    assert!((f64::from(tangle(&out32.state, 0).unwrap().value) - tangle(&out64.state, 0).unwrap().value).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tangle_matches_hyperdeterminant(
        seed in 0u64..1000,
        rank in 2usize..=4,
        k in 0usize..4,
        frac in 0.01f64..0.99,
        theta_a in 0.0f64..PI,
        phi_a in 0.0f64..(2.0 * PI),
    ) {
        let input = haar_random_pure::<f64>(2, RngSpec::new(seed, 0)).unwrap();
        if let Ok(out) = inflate_step(&input, &params(rank, frac, theta_a, phi_a), k) {
            let t = tangle(&out.state, 0).unwrap().value;
            prop_assert!((t - hyperdeterminant_tangle(&out.state)).abs() < 1e-9);
        }
    }

    #[test]
    fn rank4_outputs_have_no_three_tangle(
        seed in 0u64..1000,
        frac in 0.01f64..0.99,
        theta_a in 0.0f64..PI,
        phi_a in 0.0f64..(2.0 * PI),
    ) {
        let input = haar_random_pure::<f64>(2, RngSpec::new(seed, 1)).unwrap();
        let outs = inflate_all(&input, &params(4, frac, theta_a, phi_a)).unwrap();
        for o in outs.iter().flatten() {
            prop_assert!(hyperdeterminant_tangle(&o.state) < 1e-8);
        }
    }
}
