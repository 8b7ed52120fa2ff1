//! One step of entanglement inflation and its biased/unbiased optimizations.
//!
//! A step appends an auxiliary qubit `cos(θa/2)|0> + e^{iφa} sin(θa/2)|1>` to
//! the input and measures the pair (last input qubit, auxiliary qubit) with a
//! Bell-basis unsharp family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ggm_value, tangle_raw};
use crate::optimize::{grid_refine_maximize, Dim, OptConfig, OptResult};
use crate::povm::{apply_povm_element, strength_upper_bound, unsharp_family, InflationOutcome, MeasurementFamily};
use crate::scalar::{c, Real, C};
use crate::statekit::PureState;

/// Distance kept from the open end of the strength range during optimization.
pub const STRENGTH_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxParams<T> {
    pub theta_a: T,
    pub phi_a: T,
}

impl<T: Real> AuxParams<T> {
    pub fn new(theta_a: T, phi_a: T) -> Self {
        Self { theta_a, phi_a }
    }

    /// `(α, β)` with `α = cos(θa/2)` and `β = e^{iφa} sin(θa/2)`.
    pub fn coefficients(&self) -> (C<T>, C<T>) {
        let half = self.theta_a * T::lit(0.5);
        let (s, co) = half.sin_cos();
        let (sp, cp) = self.phi_a.sin_cos();
        (c(co, T::zero()), c(cp * s, sp * s))
    }

    pub fn state(&self) -> PureState<T> {
        let (a, b) = self.coefficients();
        PureState::from_raw(1, vec![a, b])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams<T> {
    pub rank: usize,
    pub p: T,
    pub aux: AuxParams<T>,
    /// Post-selected outcome (0-based) for the biased protocol.
    pub outcome: Option<usize>,
}

impl<T: Real> ProtocolParams<T> {
    pub fn new(rank: usize, p: T, aux: AuxParams<T>) -> Self {
        Self { rank, p, aux, outcome: None }
    }

    pub fn family(&self) -> Result<MeasurementFamily<T>> {
        unsharp_family(self.rank, self.p)
    }
}

fn extend<T: Real>(input: &PureState<T>, aux: &AuxParams<T>) -> Result<PureState<T>> {
    if input.n_qubits() < 2 {
        return Err(Error::UnsupportedQubitCount(input.n_qubits()));
    }
    input.tensor(&aux.state())
}

fn targets<T: Real>(input: &PureState<T>) -> (usize, usize) {
    let n = input.n_qubits();
    (n - 1, n)
}

/// Appends the auxiliary qubit and applies `√M_k` to (last input qubit, aux).
pub fn inflate_step<T: Real>(input: &PureState<T>, params: &ProtocolParams<T>, k: usize) -> Result<InflationOutcome<T>> {
    let family = params.family()?;
    let joint = extend(input, &params.aux)?;
    apply_povm_element(&joint, &family, k, targets(input))
}

/// All four outcomes of one step; null outcomes are `None`.
pub fn inflate_all<T: Real>(input: &PureState<T>, params: &ProtocolParams<T>) -> Result<[Option<InflationOutcome<T>>; 4]> {
    let family = params.family()?;
    let joint = extend(input, &params.aux)?;
    let t = targets(input);
    let mut out: [Option<InflationOutcome<T>>; 4] = Default::default();
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = match apply_povm_element(&joint, &family, k, t) {
            Ok(o) => Some(o),
            Err(Error::NullOutcome { .. }) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

/// GGM of the outcome-`k` state; a null outcome scores 0.
pub fn biased_objective<T: Real>(input: &PureState<T>, rank: usize, k: usize, p: T, aux: AuxParams<T>) -> Result<T> {
    match inflate_step(input, &ProtocolParams::new(rank, p, aux), k) {
        Ok(o) => Ok(ggm_value(&o.state)),
        Err(Error::NullOutcome { .. }) => Ok(T::zero()),
        Err(e) => Err(e),
    }
}

/// `Σ_k q_k GGM(outcome k)`.
pub fn unbiased_objective<T: Real>(input: &PureState<T>, rank: usize, p: T, aux: AuxParams<T>) -> Result<T> {
    let outs = inflate_all(input, &ProtocolParams::new(rank, p, aux))?;
    Ok(outs.iter().flatten().map(|o| o.probability * ggm_value(&o.state)).sum())
}

/// Search box over `(p, θa, φa)` for a rank-`r` Bell family.
pub fn protocol_box<T: Real>(rank: usize) -> [Dim<T>; 3] {
    let hi = strength_upper_bound(rank) - STRENGTH_MARGIN;
    [
        Dim::new(T::lit(STRENGTH_MARGIN), T::lit(hi)),
        Dim::new(T::zero(), T::PI()),
        Dim::periodic(T::zero(), T::TAU()),
    ]
}

fn params_at<T: Real>(rank: usize, x: &[T]) -> ProtocolParams<T> {
    ProtocolParams::new(rank, x[0], AuxParams::new(x[1], x[2]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolOptimum<T> {
    pub params: ProtocolParams<T>,
    pub value: T,
    pub search: OptResult<T>,
}

fn check_rank(rank: usize) -> Result<()> {
    if (2..=4).contains(&rank) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange { name: "rank", value: rank as f64, range: "{2, 3, 4}".into() })
    }
}

fn finish<T: Real>(rank: usize, search: OptResult<T>, outcome: Option<usize>) -> Result<ProtocolOptimum<T>> {
    if !search.feasible {
        return Err(Error::Unsupported("no feasible protocol parameters".into()));
    }
    let mut params = params_at(rank, &search.best_point);
    params.outcome = outcome;
    Ok(ProtocolOptimum { params, value: search.best_value, search })
}

/// Maximizes the biased objective. With `outcome = None` every outcome is
/// optimized and the best one is kept (ties go to the lowest index).
pub fn optimize_biased<T: Real>(
    input: &PureState<T>,
    rank: usize,
    outcome: Option<usize>,
    cfg: &OptConfig,
) -> Result<ProtocolOptimum<T>> {
    check_rank(rank)?;
    extend(input, &AuxParams::new(T::zero(), T::zero()))?;
    let ks: Vec<usize> = match outcome {
        Some(k) if k < 4 => vec![k],
        Some(k) => return Err(Error::ParameterOutOfRange { name: "outcome", value: k as f64, range: "0..4".into() }),
        None => (0..4).collect(),
    };
    let boxes = protocol_box(rank);
    let mut best: Option<ProtocolOptimum<T>> = None;
    for k in ks {
        let f = |x: &[T]| biased_objective(input, rank, k, x[0], AuxParams::new(x[1], x[2])).ok();
        let found = finish(rank, grid_refine_maximize(f, &boxes, cfg)?, Some(k))?;
        if best.as_ref().is_none_or(|b| found.value > b.value) {
            best = Some(found);
        }
    }
    Ok(best.expect("at least one outcome"))
}

pub fn optimize_unbiased<T: Real>(input: &PureState<T>, rank: usize, cfg: &OptConfig) -> Result<ProtocolOptimum<T>> {
    check_rank(rank)?;
    extend(input, &AuxParams::new(T::zero(), T::zero()))?;
    let f = |x: &[T]| unbiased_objective(input, rank, x[0], AuxParams::new(x[1], x[2])).ok();
    finish(rank, grid_refine_maximize(f, &protocol_box(rank), cfg)?, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    /// Optimize and follow one post-selected outcome (0-based).
    Biased { outcome: usize },
    /// Optimize the average GGM and follow the given outcome between steps.
    Unbiased { follow: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainStep<T> {
    pub params: ProtocolParams<T>,
    /// Optimized objective value of this step.
    pub objective: T,
    pub probabilities: [T; 4],
    /// GGM of each outcome state (0 for null outcomes).
    pub ggm: [T; 4],
    /// Tangle of the followed state with qubit 0 as focus.
    pub tangle: T,
    pub followed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord<T> {
    pub initial_qubits: usize,
    pub steps: Vec<ChainStep<T>>,
    pub final_state: PureState<T>,
}

/// Greedy multi-step inflation: each step optimizes its own objective and
/// passes the followed outcome's state on.
pub fn inflate_chain<T: Real>(
    input: &PureState<T>,
    steps: usize,
    strategy: Strategy,
    rank: usize,
    cfg: &OptConfig,
) -> Result<ChainRecord<T>> {
    let mut state = input.clone();
    let mut record = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (opt, followed) = match strategy {
            Strategy::Biased { outcome } => (optimize_biased(&state, rank, Some(outcome), cfg)?, outcome),
            Strategy::Unbiased { follow } => (optimize_unbiased(&state, rank, cfg)?, follow),
        };
        let outs = inflate_all(&state, &opt.params)?;
        let mut probabilities = [T::zero(); 4];
        let mut ggm = [T::zero(); 4];
        for (k, o) in outs.iter().enumerate() {
            if let Some(o) = o {
                probabilities[k] = o.probability;
                ggm[k] = ggm_value(&o.state);
            }
        }
        let next = outs[followed]
            .clone()
            .ok_or(Error::NullOutcome { outcome: followed, probability: probabilities[followed].as_f64() })?
            .state;
        let tangle = tangle_raw(&next, 0)?;
        record.push(ChainStep { params: opt.params, objective: opt.value, probabilities, ggm, tangle, followed });
        state = next;
    }
    Ok(ChainRecord { initial_qubits: input.n_qubits(), steps: record, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ggm;
    use crate::statekit::{haar_random_pure, RngSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use super::Strategy;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    type S = PureState<f64>;

    fn cfg() -> OptConfig {
        OptConfig::with_grid(7, 2)
    }

    #[test]
    fn aux_state_is_normalized() {
        let a = AuxParams::new(1.3, 4.0);
        assert_abs_diff_eq!(a.state().norm_sqr(), 1.0, epsilon = 1e-15);
        let (al, be) = AuxParams::new(FRAC_PI_2, 0.0).coefficients();
        assert_abs_diff_eq!(al.re, be.re, epsilon = 1e-15);
    }

    #[test]
    fn gghz_at_balanced_point_gives_ghz() {
        let params = ProtocolParams::new(2, 0.5, AuxParams::new(FRAC_PI_2, 0.0));
        let out = inflate_step(&S::gghz(FRAC_PI_4), &params, 0).unwrap();
        let ghz = S::ghz(3).unwrap();
        assert_abs_diff_eq!(out.state.inner(&ghz).unwrap().norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ggm(&out.state).unwrap().value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn product_input_stays_biseparable() {
        let s = S::gghz(0.0);
        for rank in 2..=4 {
            for k in 0..4 {
                for &(p, t, ph) in &[(0.1, 0.3, 0.0), (0.3, FRAC_PI_2, 1.0), (0.2, 2.5, 4.0)] {
                    let v = biased_objective(&s, rank, k, p, AuxParams::new(t, ph)).unwrap();
                    assert!(v < 1e-12);
                }
            }
            assert!(unbiased_objective(&s, rank, 0.2, AuxParams::new(1.0, 0.5)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn step_rejects_single_qubit_input() {
        let s = S::basis(1, 0).unwrap();
        assert!(inflate_step(&s, &ProtocolParams::new(2, 0.3, AuxParams::new(0.0, 0.0)), 0).is_err());
        assert!(biased_objective(&S::phi_plus(), 2, 0, 1.5, AuxParams::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn haar_rank2_second_outcome_matches_expansion() {
        // √M_2 maps (x|0>+y|1>)(α|0>+β|1>) on the measured pair to
        // √p/2 (αx-βy)(|00>-|11>) + √(1-p)/2 (βx+αy)(|01>+|10>).
        for seed in 0..50 {
            let s: S = haar_random_pure(2, RngSpec::new(seed, 7)).unwrap();
            let a = s.amplitudes();
            let aux = AuxParams::new(0.2 + 0.05 * seed as f64, 0.13 * seed as f64);
            let (al, be) = aux.coefficients();
            let p = 0.02 + 0.019 * seed as f64;
            let (sp, sq) = (p.sqrt(), (1.0 - p).sqrt());
            let mut want = vec![crate::scalar::czero::<f64>(); 8];
            for (first, x, y) in [(0usize, a[0], a[1]), (1, a[2], a[3])] {
                let u = (al * x - be * y) * (sp / 2.0);
                let v = (be * x + al * y) * (sq / 2.0);
                let b = first << 2;
                want[b] = u;
                want[b | 0b11] = -u;
                want[b | 0b01] = v;
                want[b | 0b10] = v;
            }
            let want = S::from_unnormalized(3, want).unwrap();
            let out = inflate_step(&s, &ProtocolParams::new(2, p, aux), 1).unwrap();
            assert_abs_diff_eq!(out.state.inner(&want).unwrap().norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn biased_gghz_optimum_is_half() {
        let opt = optimize_biased(&S::gghz(FRAC_PI_4), 2, Some(0), &OptConfig::default()).unwrap();
        assert_abs_diff_eq!(opt.value, 0.5, epsilon = 1e-4);
        let again = biased_objective(&S::gghz(FRAC_PI_4), 2, 0, opt.params.p, opt.params.aux).unwrap();
        assert_abs_diff_eq!(again, opt.value, epsilon = 1e-10);
        assert_eq!(opt.params.outcome, Some(0));
    }

    #[test]
    fn outer_loop_over_outcomes_keeps_the_best() {
        let s: S = haar_random_pure(2, RngSpec::new(3, 3)).unwrap();
        let all = optimize_biased(&s, 3, None, &cfg()).unwrap();
        for k in 0..4 {
            let one = optimize_biased(&s, 3, Some(k), &cfg()).unwrap();
            assert!(all.value >= one.value);
        }
        assert!(optimize_biased(&s, 3, Some(4), &cfg()).is_err());
        assert!(optimize_biased(&s, 5, Some(0), &cfg()).is_err());
    }

    #[test]
    fn biased_dominates_unbiased() {
        for seed in 0..100 {
            let s: S = haar_random_pure(2, RngSpec::new(seed, 11)).unwrap();
            let rank = 2 + (seed as usize % 3);
            let ub = optimize_unbiased(&s, rank, &cfg()).unwrap();
            let outs = inflate_all(&s, &ub.params).unwrap();
            let best_term = outs.iter().flatten().map(|o| ggm_value(&o.state)).fold(0.0, f64::max);
            assert!(best_term >= ub.value - 1e-12);
            let b = optimize_biased(&s, rank, None, &cfg()).unwrap();
            assert!(b.value >= ub.value - 1e-9, "seed {seed}: {} < {}", b.value, ub.value);
        }
    }

    #[test]
    fn chain_of_zero_steps_is_identity() {
        let s: S = haar_random_pure(2, RngSpec::new(1, 2)).unwrap();
        let rec = inflate_chain(&s, 0, Strategy::Biased { outcome: 0 }, 2, &cfg()).unwrap();
        assert!(rec.steps.is_empty());
        assert_eq!(rec.final_state, s);
    }

    #[test]
    fn chain_grows_one_qubit_per_step() {
        let s: S = haar_random_pure(2, RngSpec::new(4, 0)).unwrap();
        for strategy in [Strategy::Biased { outcome: 0 }, Strategy::Unbiased { follow: 0 }] {
            let rec = inflate_chain(&s, 2, strategy, 2, &cfg()).unwrap();
            assert_eq!(rec.final_state.n_qubits() - rec.initial_qubits, rec.steps.len());
            for step in &rec.steps {
                assert_abs_diff_eq!(step.probabilities.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
            }
            let last = rec.steps.last().unwrap();
            assert_abs_diff_eq!(last.ggm[0], ggm_value(&rec.final_state), epsilon = 1e-12);
        }
    }

    #[test]
    fn theorem_one_separation_on_gghz() {
        let mut rank3_zero = false;
        let mut rank3_positive = false;
        for i in 1..8 {
            let ts = i as f64 * PI / 16.0;
            let s = S::gghz(ts);
            for j in 0..=8 {
                let ta = j as f64 * PI / 8.0;
                for &p in &[0.1, 0.2, 0.3, 0.45] {
                    for &ph in &[0.0, 1.1] {
                        let aux = AuxParams::new(ta, ph);
                        for rank in 2..=4 {
                            if p >= strength_upper_bound(rank) {
                                continue;
                            }
                            for k in 0..4 {
                                let Ok(o) = inflate_step(&s, &ProtocolParams::new(rank, p, aux), k) else { continue };
                                let g = ggm_value(&o.state);
                                let t = tangle_raw(&o.state, 0).unwrap();
                                if g <= 1e-3 {
                                    continue;
                                }
                                match rank {
                                    2 => assert!(t > 1e-6, "rank 2 θs={ts} θa={ta} p={p} k={k}: {t}"),
                                    4 => assert!(t.abs() < 1e-8, "rank 4: {t}"),
                                    _ => {
                                        rank3_zero |= t.abs() < 1e-8 && (j == 0 || j == 8);
                                        rank3_positive |= t > 1e-6;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(rank3_zero && rank3_positive);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn outcome_probabilities_are_complete(
            seed in 0u64..1_000_000, n in 2usize..5, rank in 2usize..5,
            frac in 0.0f64..0.999, ta in 0.0f64..PI, ph in 0.0f64..std::f64::consts::TAU,
        ) {
            let s: S = haar_random_pure(n, RngSpec::new(seed, 0)).unwrap();
            let p = frac * strength_upper_bound(rank);
            let outs = inflate_all(&s, &ProtocolParams::new(rank, p, AuxParams::new(ta, ph))).unwrap();
            let total: f64 = outs.iter().flatten().map(|o| o.probability).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            for o in outs.iter().flatten() {
                prop_assert!(ggm_value(&o.state) <= 0.5 + 1e-12);
            }
        }
    }
}
