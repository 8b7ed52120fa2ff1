//! Persistency of entanglement: how many single-qubit projective measurements
//! it takes to leave every outcome branch fully product.
//!
//! Only non-adaptive plans are considered: each measured qubit gets one fixed
//! basis, independent of the other outcomes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{polish_maximize, Dim, OptConfig};
use crate::scalar::{c, czero, Real, C};
use crate::statekit::PureState;

/// Branches less likely than this are ignored.
pub const BRANCH_FLOOR: f64 = 1e-14;

/// Basis `{cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>, sin(θ/2)|0> - e^{iφ} cos(θ/2)|1>}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochBasis<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: Real> BlochBasis<T> {
    pub fn new(theta: T, phi: T) -> Self {
        Self { theta, phi }
    }

    pub fn z() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn x() -> Self {
        Self::new(T::FRAC_PI_2(), T::zero())
    }

    pub fn y() -> Self {
        Self::new(T::FRAC_PI_2(), T::FRAC_PI_2())
    }

    /// The two basis vectors.
    pub fn vectors(&self) -> [[C<T>; 2]; 2] {
        let (s, co) = (self.theta * T::lit(0.5)).sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [[c(co, T::zero()), c(cp * s, sp * s)], [c(s, T::zero()), c(-cp * co, -sp * co)]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan<T> {
    entries: Vec<(usize, BlochBasis<T>)>,
}

impl<T: Real> MeasurementPlan<T> {
    pub fn new(mut entries: Vec<(usize, BlochBasis<T>)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateQubit(w[0].0));
            }
        }
        for (_, b) in &entries {
            if !(b.theta.is_finite() && b.phi.is_finite()) {
                return Err(Error::ParameterOutOfRange { name: "angle", value: f64::NAN, range: "finite".into() });
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[(usize, BlochBasis<T>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn qubits(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

/// Largest eigenvalue of each single-qubit marginal of an unnormalized state,
/// divided by its squared norm.
fn marginal_max_eigs<T: Real>(amps: &[C<T>], n: usize) -> Vec<T> {
    let norm: T = amps.iter().map(|a| a.norm_sqr()).sum();
    (0..n)
        .map(|q| {
            let bit = 1usize << (n - 1 - q);
            let (mut a, mut off) = (T::zero(), czero::<T>());
            for (i, x) in amps.iter().enumerate() {
                if i & bit == 0 {
                    a = a + x.norm_sqr();
                    off = off + x * amps[i | bit].conj();
                }
            }
            let d = norm - a;
            let gap = ((a - d) * (a - d) + T::lit(4.0) * off.norm_sqr()).sqrt();
            (T::lit(0.5) * (norm + gap) / norm).min(T::one())
        })
        .collect()
}

fn product_defect<T: Real>(amps: &[C<T>], n: usize) -> T {
    marginal_max_eigs(amps, n).into_iter().map(|l| T::one() - l).sum()
}

/// True iff every single-qubit marginal has largest eigenvalue ≥ 1 − tol.
pub fn is_fully_product<T: Real>(s: &PureState<T>, tol: T) -> bool {
    marginal_max_eigs(s.amplitudes(), s.n_qubits()).into_iter().all(|l| l >= T::one() - tol)
}

/// Projects qubit `q` of an `n`-qubit amplitude vector onto `<v|`.
fn contract<T: Real>(amps: &[C<T>], n: usize, q: usize, v: &[C<T>; 2]) -> Vec<C<T>> {
    let low = 1usize << (n - 1 - q);
    let (v0, v1) = (v[0].conj(), v[1].conj());
    let mut out = Vec::with_capacity(amps.len() / 2);
    for hi in 0..(amps.len() / (2 * low)) {
        let base = hi * 2 * low;
        for lo in 0..low {
            out.push(v0 * amps[base + lo] + v1 * amps[base + low + lo]);
        }
    }
    out
}

fn residual_rec<T: Real>(amps: &[C<T>], n: usize, plan: &[(usize, [[C<T>; 2]; 2])]) -> T {
    match plan.split_last() {
        None => {
            let w: T = amps.iter().map(|a| a.norm_sqr()).sum();
            if w < T::lit(BRANCH_FLOOR) {
                T::zero()
            } else {
                product_defect(amps, n)
            }
        }
        Some(((q, vs), rest)) => vs
            .iter()
            .map(|v| residual_rec(&contract(amps, n, *q, v), n - 1, rest))
            .fold(T::zero(), T::max),
    }
}

/// Worst branch of `plan`: the maximum over outcome branches of
/// `Σ_remaining (1 − λ_max)` of the normalized post-measurement state.
pub fn strategy_residual<T: Real>(s: &PureState<T>, plan: &MeasurementPlan<T>) -> Result<T> {
    let n = s.n_qubits();
    for &(q, _) in plan.entries() {
        s.check_qubit(q)?;
    }
    if plan.len() >= n {
        return Err(Error::InvalidSubset);
    }
    // Qubits are removed from the highest index down so lower indices stay valid.
    let bases: Vec<(usize, [[C<T>; 2]; 2])> = plan.entries().iter().map(|(q, b)| (*q, b.vectors())).collect();
    Ok(residual_rec(s.amplitudes(), n, &bases))
}

/// Disentangling plan for a state grown by one rank-2 step with outcome `k`
/// (0-based): computational basis on qubits `1..n-2`, and on qubit `n-2`
/// either σ_z (k = 0, 2) or σ_y (k = 1, 3).
pub fn proposition2_plan<T: Real>(n: usize, rank: usize, k: usize) -> Result<MeasurementPlan<T>> {
    if rank != 2 {
        return Err(Error::Unsupported(format!("no analytic plan for rank {rank}")));
    }
    if n < 4 {
        return Err(Error::UnsupportedQubitCount(n));
    }
    if k >= 4 {
        return Err(Error::ParameterOutOfRange { name: "outcome", value: k as f64, range: "0..4".into() });
    }
    let mut entries: Vec<(usize, BlochBasis<T>)> = (1..n - 2).map(|q| (q, BlochBasis::z())).collect();
    entries.push((n - 2, if k.is_multiple_of(2) { BlochBasis::z() } else { BlochBasis::y() }));
    MeasurementPlan::new(entries)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersistencyConfig {
    /// A plan disentangles when its residual is below this.
    pub tol: f64,
    /// Lower bounds need the best residual to exceed `margin * tol`.
    pub margin: f64,
    /// Polar angles of the per-qubit basis grid.
    pub thetas: Vec<f64>,
    /// Azimuths of the per-qubit basis grid.
    pub phis: Vec<f64>,
    /// Best grid plans polished per plan size.
    pub polish_starts: usize,
    pub polish_iterations: usize,
    /// Residual evaluations allowed before giving up.
    pub budget: usize,
    pub max_qubits: usize,
}

impl Default for PersistencyConfig {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            tol: 1e-7,
            margin: 100.0,
            thetas: vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0],
            phis: vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0],
            polish_starts: 4,
            polish_iterations: 400,
            budget: 5_000_000,
            max_qubits: 6,
        }
    }
}

impl PersistencyConfig {
    fn bases<T: Real>(&self) -> Vec<BlochBasis<T>> {
        let mut out = Vec::new();
        for &t in &self.thetas {
            let poles = t.abs() < 1e-12 || (t - std::f64::consts::PI).abs() < 1e-12;
            for &p in if poles { &self.phis[..1] } else { &self.phis[..] } {
                out.push(BlochBasis::new(T::lit(t), T::lit(p)));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSearch<T> {
    pub size: usize,
    pub best_residual: T,
    pub best_plan: MeasurementPlan<T>,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencyCertificate<T> {
    /// Smallest plan size with a witnessing plan.
    pub upper: Option<usize>,
    pub upper_plan: Option<MeasurementPlan<T>>,
    /// Largest plan size for which every tried plan left residual above `margin * tol`.
    pub lower: Option<usize>,
    pub searches: Vec<PlanSearch<T>>,
    pub evaluations: usize,
    pub resolved: bool,
}

impl<T: Real> PersistencyCertificate<T> {
    /// `P_e` when resolved.
    pub fn value(&self) -> Option<usize> {
        self.resolved.then_some(self.upper).flatten()
    }

    /// Best residual found for plans of the given size.
    pub fn best_residual(&self, size: usize) -> Option<T> {
        self.searches.iter().find(|s| s.size == size).map(|s| s.best_residual)
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn plan_from_angles<T: Real>(qubits: &[usize], x: &[T]) -> MeasurementPlan<T> {
    let entries = qubits.iter().enumerate().map(|(i, &q)| (q, BlochBasis::new(x[2 * i], x[2 * i + 1]))).collect();
    MeasurementPlan { entries }
}

fn search_size<T: Real>(
    s: &PureState<T>,
    size: usize,
    hints: &[MeasurementPlan<T>],
    cfg: &PersistencyConfig,
    remaining: usize,
) -> Option<PlanSearch<T>> {
    let n = s.n_qubits();
    let tol = T::lit(cfg.tol);
    let mut evaluations = 0usize;
    let mut best: Option<(T, MeasurementPlan<T>)> = None;
    let consider = |r: T, plan: MeasurementPlan<T>, best: &mut Option<(T, MeasurementPlan<T>)>| {
        if best.as_ref().is_none_or(|b| r < b.0) {
            *best = Some((r, plan));
        }
    };

    for h in hints.iter().filter(|h| h.len() == size) {
        evaluations += 1;
        if let Ok(r) = strategy_residual(s, h) {
            consider(r, h.clone(), &mut best);
        }
    }
    if best.as_ref().is_some_and(|b| b.0 < tol) {
        let (best_residual, best_plan) = best.unwrap();
        return Some(PlanSearch { size, best_residual, best_plan, evaluations });
    }

    let subsets = combinations(n, size);
    for q in &subsets {
        let z = MeasurementPlan { entries: q.iter().map(|&q| (q, BlochBasis::z())).collect() };
        evaluations += 1;
        if let Ok(r) = strategy_residual(s, &z) {
            consider(r, z, &mut best);
        }
    }
    if best.as_ref().is_some_and(|b| b.0 < tol) {
        let (best_residual, best_plan) = best.unwrap();
        return Some(PlanSearch { size, best_residual, best_plan, evaluations });
    }

    let bases = cfg.bases::<T>();
    let per_subset = bases.len().checked_pow(size as u32)?;
    let total = per_subset.checked_mul(subsets.len())?;
    if total + evaluations > remaining {
        return None;
    }
    let scored: Vec<(T, usize)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (sub, mut code) = (idx / per_subset, idx % per_subset);
            let entries = subsets[sub]
                .iter()
                .map(|&q| {
                    let b = bases[code % bases.len()];
                    code /= bases.len();
                    (q, b)
                })
                .collect();
            let r = strategy_residual(s, &MeasurementPlan { entries }).unwrap_or(T::infinity());
            (r, idx)
        })
        .collect();
    evaluations += total;
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| scored[a].0.partial_cmp(&scored[b].0).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));

    let decode = |idx: usize| -> (Vec<usize>, Vec<T>) {
        let (sub, mut code) = (idx / per_subset, idx % per_subset);
        let mut x = Vec::with_capacity(2 * size);
        for _ in 0..size {
            let b = bases[code % bases.len()];
            code /= bases.len();
            x.push(b.theta);
            x.push(b.phi);
        }
        (subsets[sub].clone(), x)
    };
    if let Some(&first) = order.first() {
        let (q, x) = decode(first);
        consider(scored[first].0, plan_from_angles(&q, &x), &mut best);
    }

    if best.as_ref().is_some_and(|b| b.0 >= tol) && size > 0 {
        let boxes: Vec<Dim<T>> =
            (0..size).flat_map(|_| [Dim::new(T::zero(), T::PI()), Dim::periodic(T::zero(), T::TAU())]).collect();
        let step = vec![T::lit(std::f64::consts::PI / 8.0); 2 * size];
        let opt = OptConfig { refinement: cfg.polish_iterations, tolerance: cfg.tol * 1e-3, ..OptConfig::default() };
        let polished: Vec<(T, MeasurementPlan<T>, usize)> = order
            .iter()
            .take(cfg.polish_starts)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&idx| {
                let (q, x0) = decode(idx);
                let f = |x: &[T]| strategy_residual(s, &plan_from_angles(&q, x)).ok().map(|r| -r);
                let r = polish_maximize(f, &boxes, &x0, &step, &opt);
                (-r.best_value, plan_from_angles(&q, &r.best_point), r.evaluations)
            })
            .collect();
        for (r, plan, e) in polished {
            evaluations += e;
            if r.is_finite() {
                consider(r, plan, &mut best);
            }
        }
    }
    let (best_residual, best_plan) = best?;
    Some(PlanSearch { size, best_residual, best_plan, evaluations })
}

/// Bounds `P_e` by searching plans of increasing size. Plans in `hints`, and
/// the rank-2 analytic plans, are tried before the grid search of each size.
pub fn persistency_estimate<T: Real>(
    s: &PureState<T>,
    cfg: &PersistencyConfig,
    hints: &[MeasurementPlan<T>],
) -> Result<PersistencyCertificate<T>> {
    let n = s.n_qubits();
    if n > cfg.max_qubits {
        return Err(Error::UnsupportedQubitCount(n));
    }
    let tol = T::lit(cfg.tol);
    let floor = T::lit(cfg.tol * cfg.margin);
    let mut all_hints = hints.to_vec();
    if n >= 4 {
        all_hints.extend((0..4).filter_map(|k| proposition2_plan(n, 2, k).ok()));
    }

    let mut cert = PersistencyCertificate {
        upper: None,
        upper_plan: None,
        lower: None,
        searches: Vec::new(),
        evaluations: 0,
        resolved: false,
    };
    let mut gap = false;
    for size in 0..n {
        let Some(found) = search_size(s, size, &all_hints, cfg, cfg.budget.saturating_sub(cert.evaluations)) else {
            return Ok(cert);
        };
        cert.evaluations += found.evaluations;
        let r = found.best_residual;
        let plan = found.best_plan.clone();
        cert.searches.push(found);
        if r < tol {
            cert.upper = Some(size);
            cert.upper_plan = Some(plan);
            cert.resolved = !gap && (size == 0 || cert.lower == Some(size - 1));
            return Ok(cert);
        }
        if r > floor && !gap {
            cert.lower = Some(size);
        } else {
            gap = true;
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statekit::{haar_random_pure, tensor_product, RngSpec};
    use proptest::prelude::*;

    type S = PureState<f64>;

    fn plan(entries: &[(usize, BlochBasis<f64>)]) -> MeasurementPlan<f64> {
        MeasurementPlan::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn bloch_bases_are_orthonormal() {
        for &(t, p) in &[(0.0, 0.0), (1.0, 2.0), (std::f64::consts::PI, 0.3)] {
            let [u, v] = BlochBasis::new(t, p).vectors();
            let ip = u[0].conj() * v[0] + u[1].conj() * v[1];
            assert!(ip.norm() < 1e-15);
            assert!((u[0].norm_sqr() + u[1].norm_sqr() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn full_product_examples() {
        assert!(is_fully_product(&S::basis(4, 0b0101).unwrap(), 1e-12));
        assert!(!is_fully_product(&S::ghz(3).unwrap(), 1e-7));
        let s = tensor_product(&S::phi_plus(), &S::basis(1, 0).unwrap()).unwrap();
        assert!(!is_fully_product(&s, 1e-7));
    }

    #[test]
    fn residual_examples() {
        let ghz = S::ghz(3).unwrap();
        assert!(strategy_residual(&ghz, &plan(&[(0, BlochBasis::z())])).unwrap() < 1e-15);
        assert!(strategy_residual(&ghz, &plan(&[(0, BlochBasis::x())])).unwrap() > 0.5);
        let cluster = S::cluster4();
        let r = strategy_residual(&cluster, &plan(&[(1, BlochBasis::z()), (2, BlochBasis::z())])).unwrap();
        assert!(r < 1e-15);
        assert!(strategy_residual(&cluster, &plan(&[(1, BlochBasis::z())])).unwrap() > 0.1);
    }

    #[test]
    fn plan_validation() {
        assert!(MeasurementPlan::new(vec![(1, BlochBasis::<f64>::z()), (1, BlochBasis::x())]).is_err());
        let ghz = S::ghz(3).unwrap();
        assert!(strategy_residual(&ghz, &plan(&[(3, BlochBasis::z())])).is_err());
        let all = plan(&[(0, BlochBasis::z()), (1, BlochBasis::z()), (2, BlochBasis::z())]);
        assert!(strategy_residual(&ghz, &all).is_err());
    }

    #[test]
    fn analytic_plans() {
        let p = proposition2_plan::<f64>(4, 2, 0).unwrap();
        assert_eq!(p.entries(), &[(1, BlochBasis::z()), (2, BlochBasis::z())]);
        let p = proposition2_plan::<f64>(5, 2, 1).unwrap();
        assert_eq!(p.entries(), &[(1, BlochBasis::z()), (2, BlochBasis::z()), (3, BlochBasis::y())]);
        assert!(proposition2_plan::<f64>(4, 3, 0).is_err());
        assert!(proposition2_plan::<f64>(3, 2, 0).is_err());
    }

    #[test]
    fn estimates_for_reference_states() {
        let cfg = PersistencyConfig::default();
        for n in 2..=5 {
            let c = persistency_estimate(&S::ghz(n).unwrap(), &cfg, &[]).unwrap();
            assert_eq!(c.value(), Some(1), "GHZ_{n}");
        }
        let c = persistency_estimate(&S::cluster4(), &cfg, &[]).unwrap();
        assert_eq!(c.value(), Some(2));
        assert_eq!(c.lower, Some(1));
        let c = persistency_estimate(&S::basis(3, 5).unwrap(), &cfg, &[]).unwrap();
        assert_eq!(c.value(), Some(0));
        assert!(persistency_estimate(&S::ghz(7).unwrap(), &cfg, &[]).is_err());
    }

    #[test]
    fn budget_exhaustion_leaves_bounds_unresolved() {
        let cfg = PersistencyConfig { budget: 10, ..PersistencyConfig::default() };
        let c = persistency_estimate(&S::cluster4(), &cfg, &[]).unwrap();
        assert!(!c.resolved);
        assert_eq!(c.value(), None);
    }

    #[test]
    fn zero_residual_plans_stay_zero_when_extended() {
        let cluster = S::cluster4();
        let base = [(1, BlochBasis::z()), (2, BlochBasis::z())];
        assert!(strategy_residual(&cluster, &plan(&base)).unwrap() < 1e-15);
        let mut wider = base.to_vec();
        wider.push((0, BlochBasis::z()));
        assert!(strategy_residual(&cluster, &plan(&wider)).unwrap() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn residual_ignores_global_phase_and_outcome_labels(seed in 0u64..100_000, t in 0.0f64..3.1, p in 0.0f64..6.2, phase in 0.0f64..6.2) {
            let s: S = haar_random_pure(4, RngSpec::new(seed, 0)).unwrap();
            let rotated = S::new(4, s.amplitudes().iter().map(|a| a * num_complex::Complex::from_polar(1.0, phase)).collect()).unwrap();
            let pl = plan(&[(1, BlochBasis::new(t, p)), (3, BlochBasis::z())]);
            // The antipodal direction is the same basis with outcomes swapped.
            let flipped = plan(&[(1, BlochBasis::new(std::f64::consts::PI - t, p + std::f64::consts::PI)), (3, BlochBasis::new(std::f64::consts::PI, 0.0))]);
            let r = strategy_residual(&s, &pl).unwrap();
            prop_assert!((strategy_residual(&rotated, &pl).unwrap() - r).abs() < 1e-12);
            prop_assert!((strategy_residual(&s, &flipped).unwrap() - r).abs() < 1e-9);
        }

        #[test]
        fn zero_residual_means_product_branches(seed in 0u64..100_000) {
            // Product of a Bell pair and a Haar pair: measuring one qubit of each pair in z disentangles.
            let a: S = haar_random_pure(2, RngSpec::new(seed, 1)).unwrap();
            let s = tensor_product(&S::phi_plus(), &a).unwrap();
            let pl = plan(&[(0, BlochBasis::z()), (2, BlochBasis::z())]);
            prop_assert!(strategy_residual(&s, &pl).unwrap() < 1e-12);
            let empty = persistency_estimate(&s, &PersistencyConfig::default(), &[]).unwrap();
            prop_assert_eq!(empty.upper == Some(0), is_fully_product(&s, 1e-7));
        }
    }
}
