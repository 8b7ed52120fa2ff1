//! Ensemble drivers behind each experiment. Every sample draws its input from
//! `RngSpec::new(master_seed, sample_index)`, so results do not depend on how
//! rayon schedules the work.

use std::f64::consts::{FRAC_PI_2, PI};

use inflate_core::povm::strength_upper_bound;
use inflate_core::{
    cluster_fidelity_max, ggm_value, grid_refine_maximize, haar_random_pure, inflate_all, inflate_chain, inflate_step,
    optimize_biased, optimize_unbiased, persistency_estimate, proposition2_plan, protocol_box, strategy_residual,
    tangle, tangle_extrema, w_class_random, AuxParams, ChainRecord, Dim, OptConfig, PersistencyCertificate,
    PersistencyConfig, ProtocolParams, PureState, RngSpec, Strategy,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::error::Result;

/// GGM below which an output counts as not genuinely entangled.
pub const GGM_FLOOR: f64 = 1e-3;
/// Tangles below this after optimization are treated as vanishing.
pub const TANGLE_ZERO: f64 = 1e-6;

/// Runs `f` for every sample index in parallel, keeping index order.
pub fn per_sample<R, F>(samples: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    (0..samples).into_par_iter().map(f).collect()
}

pub fn haar_input(qubits: usize, seed: u64, sample_index: usize) -> Result<PureState<f64>> {
    Ok(haar_random_pure(qubits, RngSpec::new(seed, sample_index as u64))?)
}

fn tangle0(s: &PureState<f64>) -> Result<f64> {
    Ok(tangle(s, 0)?.value)
}

/// Everything measured at one optimized protocol point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSample {
    pub sample_index: usize,
    pub rank: usize,
    pub p: f64,
    pub theta_a: f64,
    pub phi_a: f64,
    pub objective: f64,
    /// Per outcome (0-based); null outcomes have probability 0 and NaN measures.
    pub probability: [f64; 4],
    pub ggm: [f64; 4],
    pub tangle: [f64; 4],
}

impl ProtocolSample {
    fn at(input: &PureState<f64>, params: &ProtocolParams<f64>, objective: f64, sample_index: usize) -> Result<Self> {
        let outs = inflate_all(input, params)?;
        let mut probability = [0.0; 4];
        let mut ggm = [f64::NAN; 4];
        let mut tan = [f64::NAN; 4];
        for (k, o) in outs.iter().enumerate() {
            if let Some(o) = o {
                probability[k] = o.probability;
                ggm[k] = ggm_value(&o.state);
                tan[k] = tangle0(&o.state)?;
            }
        }
        Ok(Self {
            sample_index,
            rank: params.rank,
            p: params.p,
            theta_a: params.aux.theta_a,
            phi_a: params.aux.phi_a,
            objective,
            probability,
            ggm,
            tangle: tan,
        })
    }

    /// Largest difference between the GGMs of non-null outcomes.
    pub fn ggm_spread(&self) -> f64 {
        spread(self.ggm.iter().copied().filter(|g| g.is_finite()))
    }

    pub fn probability_spread(&self) -> f64 {
        spread(self.probability.iter().copied())
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Biased optimization of outcome `M_1` on Haar inputs, with all four outcomes
/// recorded at the optimum.
pub fn biased_ensemble(
    input_qubits: usize,
    samples: usize,
    seed: u64,
    rank: usize,
    cfg: &OptConfig,
) -> Result<Vec<ProtocolSample>> {
    per_sample(samples, |i| {
        let input = haar_input(input_qubits, seed, i)?;
        let opt = optimize_biased(&input, rank, Some(0), cfg)?;
        ProtocolSample::at(&input, &opt.params, opt.value, i)
    })
}

/// Unbiased optimization on Haar inputs.
pub fn unbiased_ensemble(
    input_qubits: usize,
    samples: usize,
    seed: u64,
    rank: usize,
    cfg: &OptConfig,
) -> Result<Vec<ProtocolSample>> {
    per_sample(samples, |i| {
        let input = haar_input(input_qubits, seed, i)?;
        let opt = optimize_unbiased(&input, rank, cfg)?;
        ProtocolSample::at(&input, &opt.params, opt.value, i)
    })
}

/// Closed-form tangle of outcome `M_1` on `cos θs|00> + sin θs|11>`, for ranks 2 and 3.
pub fn closed_form_tangle(rank: usize, p: f64, theta_a: f64, theta_s: f64) -> Option<f64> {
    let num = theta_a.sin().powi(2) * (2.0 * theta_s).sin().powi(2);
    let ca = theta_a.cos() * (2.0 * theta_s).cos();
    match rank {
        2 => Some(4.0 * p * (1.0 - p) * num / (1.0 + ca).powi(2)),
        3 => Some(4.0 * p * (3.0 * p - 1.0) * num / (1.0 + (4.0 * p - 1.0) * ca).powi(2)),
        _ => None,
    }
}

/// One point of the gGHZ parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub rank: usize,
    /// 0-based outcome.
    pub outcome: usize,
    pub theta_s: f64,
    pub theta_a: f64,
    pub phi_a: f64,
    pub p: f64,
    pub probability: f64,
    pub ggm: f64,
    pub tangle: f64,
    pub closed_form: Option<f64>,
}

/// Grid axes for the gGHZ scan.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzGrid {
    pub theta_s: Vec<f64>,
    pub theta_a: Vec<f64>,
    pub phi_a: Vec<f64>,
    /// Fractions of the admissible strength range.
    pub p_fraction: Vec<f64>,
}

impl Default for GhzGrid {
    fn default() -> Self {
        Self {
            theta_s: (1..=12).map(|j| FRAC_PI_2 * j as f64 / 13.0).collect(),
            theta_a: (0..=8).map(|j| PI * j as f64 / 8.0).collect(),
            phi_a: vec![0.0, 0.7],
            p_fraction: (1..=8).map(|j| j as f64 / 9.0).collect(),
        }
    }
}

/// Every outcome at every grid point, null outcomes skipped.
pub fn ghz_grid_scan(rank: usize, grid: &GhzGrid) -> Result<Vec<GridPoint>> {
    let hi = strength_upper_bound(rank);
    let mut jobs = Vec::new();
    for &ts in &grid.theta_s {
        for &ta in &grid.theta_a {
            for &pa in &grid.phi_a {
                for &f in &grid.p_fraction {
                    jobs.push((ts, ta, pa, f * hi));
                }
            }
        }
    }
    let per_job: Vec<Vec<GridPoint>> = jobs
        .par_iter()
        .map(|&(ts, ta, pa, p)| -> Result<Vec<GridPoint>> {
            let input = PureState::gghz(ts);
            let params = ProtocolParams::new(rank, p, AuxParams::new(ta, pa));
            let mut out = Vec::with_capacity(4);
            for (k, o) in inflate_all(&input, &params)?.into_iter().enumerate() {
                if let Some(o) = o {
                    out.push(GridPoint {
                        rank,
                        outcome: k,
                        theta_s: ts,
                        theta_a: ta,
                        phi_a: pa,
                        p,
                        probability: o.probability,
                        ggm: ggm_value(&o.state),
                        tangle: tangle0(&o.state)?,
                        closed_form: if k == 0 { closed_form_tangle(rank, p, ta, ts) } else { None },
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Tangle extremes of outcome `M_1`, plus for rank 3 the best output with the
/// auxiliary pinned to a pole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremaSample {
    pub sample_index: usize,
    pub rank: usize,
    pub feasible: bool,
    pub t_max: f64,
    pub t_min: f64,
    pub pinned_ggm: Option<f64>,
    pub pinned_tangle: Option<f64>,
}

/// Maximizes the GGM of outcome `M_1` with `θa` fixed; returns `(GGM, tangle)` at the optimum.
pub fn pinned_aux_optimum(input: &PureState<f64>, rank: usize, theta_a: f64, cfg: &OptConfig) -> Result<(f64, f64)> {
    let [p_box, _, phi_box] = protocol_box::<f64>(rank);
    let boxes = [p_box, Dim::fixed(theta_a), phi_box];
    let f = |x: &[f64]| {
        let out = inflate_step(input, &ProtocolParams::new(rank, x[0], AuxParams::new(x[1], x[2])), 0).ok()?;
        Some(ggm_value(&out.state))
    };
    let r = grid_refine_maximize(f, &boxes, cfg)?;
    let x = &r.best_point;
    let out = inflate_step(input, &ProtocolParams::new(rank, x[0], AuxParams::new(x[1], x[2])), 0)?;
    Ok((ggm_value(&out.state), tangle0(&out.state)?))
}

pub fn extrema_ensemble(samples: usize, seed: u64, rank: usize, cfg: &OptConfig) -> Result<Vec<ExtremaSample>> {
    per_sample(samples, |i| {
        let input = haar_input(2, seed, i)?;
        let e = tangle_extrema(&input, rank, 0, GGM_FLOOR, cfg)?;
        let (pinned_ggm, pinned_tangle) = if rank == 3 {
            let a = pinned_aux_optimum(&input, rank, 0.0, cfg)?;
            let b = pinned_aux_optimum(&input, rank, PI, cfg)?;
            let best = if b.0 > a.0 { b } else { a };
            (Some(best.0), Some(best.1))
        } else {
            (None, None)
        };
        Ok(ExtremaSample {
            sample_index: i,
            rank,
            feasible: e.feasible(),
            t_max: if e.t_max.feasible { e.t_max.best_value } else { f64::NAN },
            t_min: if e.t_min.feasible { e.t_min.best_value } else { f64::NAN },
            pinned_ggm,
            pinned_tangle,
        })
    })
}

/// Initial state of a resource split.
pub fn scenario_input(sc: Scenario, seed: u64, sample_index: usize) -> Result<PureState<f64>> {
    match sc {
        Scenario::WPlusTwo => Ok(w_class_random(RngSpec::new(seed, sample_index as u64))?),
        _ => haar_input(sc.initial_qubits(), seed, sample_index),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Biased,
    Unbiased,
}

impl ChainKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Biased => "biased",
            Self::Unbiased => "unbiased",
        }
    }

    fn strategy(self) -> Strategy {
        match self {
            Self::Biased => Strategy::Biased { outcome: 0 },
            Self::Unbiased => Strategy::Unbiased { follow: 0 },
        }
    }
}

/// Final five-qubit record of one grown state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    pub sample_index: usize,
    /// Biased: GGM of the followed outcome. Unbiased: the optimized average GGM of the last step.
    pub ggm: f64,
    /// Tangle of the final followed state, qubit 0 as focus.
    pub tangle: f64,
    pub followed_ggm: f64,
    pub final_probability: f64,
}

impl ResourceSample {
    fn from_chain(sample_index: usize, kind: ChainKind, chain: &ChainRecord<f64>) -> Self {
        let last = chain.steps.last().expect("at least one step");
        let followed_ggm = last.ggm[last.followed];
        let ggm = match kind {
            ChainKind::Biased => followed_ggm,
            ChainKind::Unbiased => last.objective,
        };
        Self {
            sample_index,
            ggm,
            tangle: last.tangle,
            followed_ggm,
            final_probability: last.probabilities[last.followed],
        }
    }
}

pub fn resource_ensemble(
    sc: Scenario,
    kind: ChainKind,
    rank: usize,
    samples: usize,
    seed: u64,
    cfg: &OptConfig,
) -> Result<Vec<ResourceSample>> {
    per_sample(samples, |i| {
        let input = scenario_input(sc, seed, i)?;
        let chain = inflate_chain(&input, sc.steps(), kind.strategy(), rank, cfg)?;
        Ok(ResourceSample::from_chain(i, kind, &chain))
    })
}

/// Best cluster fidelity per `θs` on an even grid over `[0, π/2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPoint {
    pub theta_s: f64,
    pub fidelity: f64,
    /// `(p, ζ, ξ, θa, φa)` at the optimum.
    pub point: Vec<f64>,
}

pub fn cluster_sweep(points: usize, cfg: &OptConfig) -> Result<Vec<ClusterPoint>> {
    let thetas: Vec<f64> = (0..points).map(|j| FRAC_PI_2 * j as f64 / (points.max(2) - 1) as f64).collect();
    thetas
        .iter()
        .map(|&t| {
            let r = cluster_fidelity_max(t, cfg)?;
            Ok(ClusterPoint { theta_s: t, fidelity: r.best_value, point: r.best_point })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencySample {
    pub sample_index: usize,
    pub qubits: usize,
    pub rank: usize,
    /// Optimized measurement strength.
    pub p: f64,
    pub upper: Option<usize>,
    pub lower: Option<usize>,
    pub resolved: bool,
    /// Residual of the rank-2 analytic plan for outcome `M_1`.
    pub analytic_residual: Option<f64>,
    /// Best residual found with one measurement fewer than the upper bound.
    pub residual_below_upper: Option<f64>,
}

impl PersistencySample {
    pub fn value(&self) -> Option<usize> {
        if self.resolved {
            self.upper
        } else {
            None
        }
    }
}

/// Persistency bounds of `M_1` outputs of biased inflation, `output_qubits` in total.
pub fn persistency_ensemble(
    output_qubits: usize,
    samples: usize,
    seed: u64,
    rank: usize,
    opt: &OptConfig,
    pcfg: &PersistencyConfig,
) -> Result<Vec<PersistencySample>> {
    per_sample(samples, |i| {
        let input = haar_input(output_qubits - 1, seed, i)?;
        let best = optimize_biased(&input, rank, Some(0), opt)?;
        let out = inflate_step(&input, &best.params, 0)?.state;
        let analytic_residual = if rank == 2 {
            Some(strategy_residual(&out, &proposition2_plan(output_qubits, 2, 0)?)?)
        } else {
            None
        };
        let cert: PersistencyCertificate<f64> = persistency_estimate(&out, pcfg, &[])?;
        let residual_below_upper = cert.upper.and_then(|u| u.checked_sub(1)).and_then(|s| cert.best_residual(s));
        Ok(PersistencySample {
            sample_index: i,
            qubits: output_qubits,
            rank,
            p: best.params.p,
            upper: cert.upper,
            lower: cert.lower,
            resolved: cert.resolved,
            analytic_residual,
            residual_below_upper,
        })
    })
}

/// Persistency expected for a GME `M_1` output of the given rank.
pub fn expected_persistency(qubits: usize, rank: usize) -> usize {
    if rank == 2 {
        qubits - 2
    } else {
        qubits - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_vanish_without_entangled_input() {
        assert_eq!(closed_form_tangle(2, 0.3, 1.0, 0.0), Some(0.0));
        assert_eq!(closed_form_tangle(3, 0.3, 0.0, 0.5), Some(0.0));
        assert!(closed_form_tangle(3, 0.2, 1.0, 0.5).unwrap() < 0.0);
        assert_eq!(closed_form_tangle(4, 0.2, 1.0, 0.5), None);
    }

    #[test]
    fn ensembles_are_reproducible_and_ordered() {
        let cfg = OptConfig::with_grid(5, 1);
        let a = biased_ensemble(2, 4, 9, 2, &cfg).unwrap();
        let b = biased_ensemble(2, 4, 9, 2, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, s)| s.sample_index == i));
        for s in &a {
            let total: f64 = s.probability.iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
            assert!((s.objective - s.ggm[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn unbiased_objective_is_probability_weighted() {
        let cfg = OptConfig::with_grid(5, 1);
        for s in unbiased_ensemble(2, 3, 4, 4, &cfg).unwrap() {
            let avg: f64 = (0..4).filter(|&k| s.probability[k] > 0.0).map(|k| s.probability[k] * s.ggm[k]).sum();
            assert!((avg - s.objective).abs() < 1e-10);
        }
    }

    #[test]
    fn w_scenario_starts_with_vanishing_tangle() {
        let s = scenario_input(Scenario::WPlusTwo, 3, 0).unwrap();
        assert!(tangle0(&s).unwrap().abs() < 1e-10);
        assert_eq!(scenario_input(Scenario::FourPlusOne, 3, 0).unwrap().n_qubits(), 4);
    }

    #[test]
    fn chains_reach_five_qubits() {
        let cfg = OptConfig { refinement: 20, ..OptConfig::with_grid(3, 1) };
        for sc in Scenario::ALL {
            for kind in [ChainKind::Biased, ChainKind::Unbiased] {
                let r = resource_ensemble(sc, kind, 2, 1, 5, &cfg).unwrap();
                assert_eq!(r.len(), 1);
                assert!(r[0].ggm >= 0.0 && r[0].ggm <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn expected_persistency_by_rank() {
        assert_eq!(expected_persistency(4, 2), 2);
        assert_eq!(expected_persistency(5, 3), 4);
    }
}
