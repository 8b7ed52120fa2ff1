//! Derivative-free box-constrained maximization (a coarse grid scan followed by
//! Nelder–Mead polishing from the best grid points) and the searches built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inflation::{inflate_step, protocol_box, AuxParams, ProtocolParams};
use crate::measures::{ggm_value, tangle_raw};
use crate::povm::{apply_povm_element, generalized_rank2_family};
use crate::scalar::Real;
use crate::statekit::PureState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Grid points per dimension (endpoints included on bounded dimensions).
    pub grid_points: usize,
    /// Nelder–Mead iteration budget per polish start.
    pub refinement: usize,
    /// Polishing stops once the simplex value spread falls below this.
    pub tolerance: f64,
    /// Number of best grid points polished independently.
    pub polish_starts: usize,
    pub record_trace: bool,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { grid_points: 21, refinement: 200, tolerance: 1e-8, polish_starts: 1, record_trace: false }
    }
}

impl OptConfig {
    pub fn with_grid(grid_points: usize, polish_starts: usize) -> Self {
        Self { grid_points, polish_starts, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 3 {
            return Err(Error::ParameterOutOfRange {
                name: "grid_points",
                value: self.grid_points as f64,
                range: ">= 3".into(),
            });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::ParameterOutOfRange { name: "tolerance", value: self.tolerance, range: "> 0".into() });
        }
        Ok(())
    }
}

/// One search dimension. Periodic dimensions wrap instead of clamping and
/// their grid omits the upper endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dim<T> {
    pub lo: T,
    pub hi: T,
    pub periodic: bool,
}

impl<T: Real> Dim<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi, periodic: false }
    }

    pub fn periodic(lo: T, hi: T) -> Self {
        Self { lo, hi, periodic: true }
    }

    /// A dimension pinned to a single value.
    pub fn fixed(x: T) -> Self {
        Self { lo: x, hi: x, periodic: false }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn grid(&self, n: usize) -> Vec<T> {
        if self.width() <= T::zero() {
            return vec![self.lo];
        }
        let steps = if self.periodic { n } else { n - 1 };
        let h = self.width() / T::lit(steps as f64);
        (0..n).map(|i| self.lo + h * T::lit(i as f64)).collect()
    }

    pub fn project(&self, x: T) -> T {
        let w = self.width();
        if w <= T::zero() {
            self.lo
        } else if self.periodic {
            let mut y = (x - self.lo) % w;
            if y < T::zero() {
                y = y + w;
            }
            self.lo + y
        } else {
            x.max(self.lo).min(self.hi)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult<T> {
    pub best_value: T,
    pub best_point: Vec<T>,
    pub evaluations: usize,
    /// Evaluations that returned no value (infeasible or failed).
    pub failures: usize,
    /// False when no evaluated point produced a value.
    pub feasible: bool,
    pub trace: Option<Vec<(Vec<T>, T)>>,
}

impl<T: Real> OptResult<T> {
    fn infeasible(dim: usize, evaluations: usize) -> Self {
        Self {
            best_value: T::neg_infinity(),
            best_point: vec![T::nan(); dim],
            evaluations,
            failures: evaluations,
            feasible: false,
            trace: None,
        }
    }
}

fn grid_point<T: Real>(grids: &[Vec<T>], mut index: usize) -> Vec<T> {
    let mut x = vec![T::zero(); grids.len()];
    for d in (0..grids.len()).rev() {
        let n = grids[d].len();
        x[d] = grids[d][index % n];
        index /= n;
    }
    x
}

struct Polish<T> {
    point: Vec<T>,
    value: Option<T>,
    evaluations: usize,
}

/// Nelder–Mead on `-f`, with vertices projected back into the box.
fn nelder_mead<T: Real, F>(f: &F, boxes: &[Dim<T>], start: Vec<T>, step: &[T], cfg: &OptConfig) -> Polish<T>
where
    F: Fn(&[T]) -> Option<T>,
{
    let dim = boxes.len();
    let project = |x: Vec<T>| -> Vec<T> { x.iter().zip(boxes).map(|(&v, b)| b.project(v)).collect() };
    let mut evaluations = 0usize;
    let mut cost = |x: &[T]| -> T {
        evaluations += 1;
        match f(x) {
            Some(v) if v.is_finite() => -v,
            _ => T::infinity(),
        }
    };

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    let c0 = cost(&start);
    simplex.push((start.clone(), c0));
    for d in 0..dim {
        if step[d] <= T::zero() {
            continue;
        }
        let mut x = start.clone();
        x[d] = if boxes[d].periodic || start[d] + step[d] <= boxes[d].hi { start[d] + step[d] } else { start[d] - step[d] };
        let x = project(x);
        let c = cost(&x);
        simplex.push((x, c));
    }
    let m = simplex.len() - 1;
    if m == 0 {
        let value = (c0.is_finite()).then(|| -c0);
        return Polish { point: start, value, evaluations };
    }

    let tol = T::lit(cfg.tolerance);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    for _ in 0..cfg.refinement {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best, worst) = (simplex[0].1, simplex[m].1);
        if best.is_finite() && worst.is_finite() && (worst - best).abs() <= tol {
            break;
        }
        let mut centroid = vec![T::zero(); dim];
        for (x, _) in &simplex[..m] {
            for (c, &v) in centroid.iter_mut().zip(x) {
                *c = *c + v;
            }
        }
        let inv = T::lit(m as f64).recip();
        centroid.iter_mut().for_each(|c| *c = *c * inv);
        let along = |t: T| -> Vec<T> {
            project(centroid.iter().zip(&simplex[m].0).map(|(&c, &w)| c + t * (c - w)).collect())
        };

        let xr = along(T::one());
        let fr = cost(&xr);
        if fr < simplex[0].1 {
            let xe = along(two);
            let fe = cost(&xe);
            simplex[m] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[m - 1].1 {
            simplex[m] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[m].1 {
                let x = along(half);
                let c = cost(&x);
                (x, c)
            } else {
                let x = along(-half);
                let c = cost(&x);
                (x, c)
            };
            if fc < simplex[m].1.min(fr) {
                simplex[m] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x = project(x0.iter().zip(&v.0).map(|(&a, &b)| a + half * (b - a)).collect());
                    let c = cost(&x);
                    *v = (x, c);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (point, c) = simplex.swap_remove(0);
    Polish { point, value: c.is_finite().then(|| -c), evaluations }
}

/// Nelder–Mead polish alone, started at `start` with initial edge lengths `step`.
pub fn polish_maximize<T: Real, F>(objective: F, boxes: &[Dim<T>], start: &[T], step: &[T], cfg: &OptConfig) -> OptResult<T>
where
    F: Fn(&[T]) -> Option<T>,
{
    let p = nelder_mead(&objective, boxes, start.to_vec(), step, cfg);
    match p.value {
        Some(v) => OptResult {
            best_value: v,
            best_point: p.point,
            evaluations: p.evaluations,
            failures: 0,
            feasible: true,
            trace: None,
        },
        None => OptResult::infeasible(boxes.len(), p.evaluations),
    }
}

/// Maximizes `objective` over the box: full grid scan, then Nelder–Mead from
/// the `polish_starts` best grid points. `None` marks an infeasible or failed
/// evaluation. Deterministic for a fixed config regardless of thread count.
pub fn grid_refine_maximize<T: Real, F>(objective: F, boxes: &[Dim<T>], cfg: &OptConfig) -> Result<OptResult<T>>
where
    F: Fn(&[T]) -> Option<T> + Sync,
{
    cfg.validate()?;
    if boxes.is_empty() {
        return Err(Error::Unsupported("empty search box".into()));
    }
    for b in boxes {
        if !(b.lo <= b.hi) {
            return Err(Error::ParameterOutOfRange { name: "box", value: b.lo.as_f64(), range: format!("<= {}", b.hi) });
        }
    }
    let grids: Vec<Vec<T>> = boxes.iter().map(|b| b.grid(cfg.grid_points)).collect();
    let total: usize = grids.iter().map(Vec::len).product();
    let scan: Vec<(Vec<T>, Option<T>)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let x = grid_point(&grids, i);
            let v = objective(&x).filter(|v| !v.is_nan());
            (x, v)
        })
        .collect();

    let mut evaluations = total;
    let mut failures = scan.iter().filter(|(_, v)| v.is_none()).count();
    let mut ranked: Vec<usize> = (0..total).filter(|&i| scan[i].1.is_some()).collect();
    if ranked.is_empty() {
        let mut r = OptResult::infeasible(boxes.len(), evaluations);
        if cfg.record_trace {
            r.trace = Some(Vec::new());
        }
        return Ok(r);
    }
    ranked.sort_by(|&a, &b| {
        scan[b].1.partial_cmp(&scan[a].1).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });

    let step: Vec<T> = boxes
        .iter()
        .zip(&grids)
        .map(|(_, g)| if g.len() > 1 { g[1] - g[0] } else { T::zero() })
        .collect();
    let starts = &ranked[..cfg.polish_starts.min(ranked.len())];
    let polished: Vec<Polish<T>> = starts
        .par_iter()
        .map(|&i| nelder_mead(&objective, boxes, scan[i].0.clone(), &step, cfg))
        .collect();

    let mut best_point = scan[ranked[0]].0.clone();
    let mut best_value = scan[ranked[0]].1.unwrap();
    for p in &polished {
        evaluations += p.evaluations;
        match p.value {
            Some(v) if v > best_value => {
                best_value = v;
                best_point = p.point.clone();
            }
            Some(_) => {}
            None => failures += 1,
        }
    }
    let trace = cfg.record_trace.then(|| {
        scan.iter()
            .filter_map(|(x, v)| v.map(|v| (x.clone(), v)))
            .chain(polished.iter().filter_map(|p| p.value.map(|v| (p.point.clone(), v))))
            .collect()
    });
    Ok(OptResult { best_value, best_point, evaluations, failures, feasible: true, trace })
}

/// Maximum and minimum tangle of an inflation outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct TangleExtrema<T> {
    pub t_max: OptResult<T>,
    /// `best_value` holds the minimum tangle (not its negation).
    pub t_min: OptResult<T>,
}

impl<T: Real> TangleExtrema<T> {
    pub fn feasible(&self) -> bool {
        self.t_max.feasible && self.t_min.feasible
    }
}

/// Extremes of the tangle of outcome `k` over `(p, θa, φa)`, restricted to
/// parameters whose output has GGM at least `ggm_floor`.
pub fn tangle_extrema<T: Real>(
    input: &PureState<T>,
    rank: usize,
    k: usize,
    ggm_floor: T,
    cfg: &OptConfig,
) -> Result<TangleExtrema<T>> {
    if !(ggm_floor > T::zero()) {
        return Err(Error::ParameterOutOfRange { name: "ggm_floor", value: ggm_floor.as_f64(), range: "> 0".into() });
    }
    let boxes = protocol_box::<T>(rank);
    let tangle_at = |x: &[T]| -> Option<T> {
        let out = inflate_step(input, &ProtocolParams::new(rank, x[0], AuxParams::new(x[1], x[2])), k).ok()?;
        if ggm_value(&out.state) < ggm_floor {
            return None;
        }
        tangle_raw(&out.state, 0).ok()
    };
    let t_max = grid_refine_maximize(tangle_at, &boxes, cfg)?;
    let mut t_min = grid_refine_maximize(|x: &[T]| tangle_at(x).map(|t| -t), &boxes, cfg)?;
    t_min.best_value = -t_min.best_value;
    if let Some(trace) = t_min.trace.as_mut() {
        trace.iter_mut().for_each(|(_, v)| *v = -*v);
    }
    Ok(TangleExtrema { t_max, t_min })
}

/// Outcome-`M_1` state of the generalized rank-2 family applied to
/// `gGHZ3(θs) ⊗ aux` on qubits (2, 3); `x = (p, ζ, ξ, θa, φa)`.
pub fn cluster_candidate<T: Real>(theta_s: T, x: &[T]) -> Result<PureState<T>> {
    let (s, c) = theta_s.sin_cos();
    let mut amps = vec![crate::scalar::czero::<T>(); 8];
    amps[0] = crate::scalar::c(c, T::zero());
    amps[7] = crate::scalar::c(s, T::zero());
    let input = PureState::new(3, amps)?;
    let family = generalized_rank2_family(x[1], x[2], x[0])?;
    let joint = input.tensor(&AuxParams::new(x[3], x[4]).state())?;
    Ok(apply_povm_element(&joint, &family, 0, (2, 3))?.state)
}

/// Search box over `(χ, ζ, ξ, θa, φa)` for [`cluster_fidelity_max`], where the
/// strength is `p = cos²χ`. In `χ` the square-root amplitudes of the family are
/// smooth up to `p = 1`, where the best fidelities sit.
pub fn cluster_box<T: Real>() -> [Dim<T>; 5] {
    [
        Dim::new(T::zero(), T::FRAC_PI_2()),
        Dim::new(T::zero(), T::PI()),
        Dim::periodic(T::zero(), T::TAU()),
        Dim::new(T::zero(), T::PI()),
        Dim::periodic(T::zero(), T::TAU()),
    ]
}

fn chi_to_p<T: Real>(x: &[T]) -> Vec<T> {
    let mut y = x.to_vec();
    y[0] = x[0].cos().powi(2);
    y
}

/// Largest fidelity with the four-qubit cluster state reachable from
/// `gGHZ3(θs)` with the generalized rank-2 family. Points in the result are
/// reported as `(p, ζ, ξ, θa, φa)`.
pub fn cluster_fidelity_max<T: Real>(theta_s: T, cfg: &OptConfig) -> Result<OptResult<T>> {
    let target = PureState::<T>::cluster4();
    let f = |x: &[T]| {
        let out = cluster_candidate(theta_s, &chi_to_p(x)).ok()?;
        Some(out.inner(&target).ok()?.norm_sqr())
    };
    let mut r = grid_refine_maximize(f, &cluster_box(), cfg)?;
    r.best_point = chi_to_p(&r.best_point);
    if let Some(trace) = r.trace.as_mut() {
        trace.iter_mut().for_each(|(x, _)| *x = chi_to_p(x));
    }
    Ok(r)
}

/// Runs [`cluster_fidelity_max`] for every `θs` and returns the best `(θs, result)`.
pub fn cluster_fidelity_sweep<T: Real>(thetas: &[T], cfg: &OptConfig) -> Result<(T, OptResult<T>)> {
    let mut best: Option<(T, OptResult<T>)> = None;
    for &t in thetas {
        let r = cluster_fidelity_max(t, cfg)?;
        if best.as_ref().is_none_or(|b| r.best_value > b.1.best_value) {
            best = Some((t, r));
        }
    }
    best.ok_or(Error::Unsupported("empty θs sweep".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_on_half_period() {
        let r = grid_refine_maximize(|x: &[f64]| Some(x[0].sin()), &[Dim::new(0.0, PI)], &OptConfig::default()).unwrap();
        assert!((r.best_point[0] - PI / 2.0).abs() < 1e-6);
        assert!((r.best_value - 1.0).abs() < 1e-6);
        assert!(r.feasible);
    }

    #[test]
    fn quadratic_bowl() {
        let cfg = OptConfig { tolerance: 1e-14, refinement: 400, ..OptConfig::default() };
        let f = |x: &[f64]| Some(-(x[0] - 0.3).powi(2) - (x[1] - 0.7).powi(2));
        let r = grid_refine_maximize(f, &[Dim::new(0.0, 1.0), Dim::new(0.0, 1.0)], &cfg).unwrap();
        assert!((r.best_point[0] - 0.3).abs() < 1e-6, "{:?}", r.best_point);
        assert!((r.best_point[1] - 0.7).abs() < 1e-6, "{:?}", r.best_point);
    }

    #[test]
    fn periodic_dimension_wraps() {
        let d = Dim::periodic(0.0, 2.0 * PI);
        assert!((d.project(2.0 * PI + 0.5) - 0.5).abs() < 1e-12);
        assert!((d.project(-0.5) - (2.0 * PI - 0.5)).abs() < 1e-12);
        assert_eq!(d.grid(4).len(), 4);
        assert!((d.grid(4)[3] - 1.5 * PI).abs() < 1e-12);
        // Maximum sits on the seam of the period.
        let r = grid_refine_maximize(|x: &[f64]| Some((x[0] - 0.01).cos()), &[d], &OptConfig::with_grid(8, 2)).unwrap();
        assert!((r.best_value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_dimension_stays_put() {
        let f = |x: &[f64]| Some(-(x[0] - 0.2).powi(2) + x[1]);
        let r = grid_refine_maximize(f, &[Dim::new(0.0, 1.0), Dim::fixed(3.0)], &OptConfig::default()).unwrap();
        assert_eq!(r.best_point[1], 3.0);
        assert!((r.best_point[0] - 0.2).abs() < 1e-4);
    }

    #[test]
    fn infeasible_everywhere() {
        let r = grid_refine_maximize(|_: &[f64]| None, &[Dim::new(0.0, 1.0)], &OptConfig::default()).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.failures, r.evaluations);
    }

    #[test]
    fn partial_feasibility_is_respected() {
        let f = |x: &[f64]| (x[0] >= 0.5).then(|| -x[0]);
        let r = grid_refine_maximize(f, &[Dim::new(0.0, 1.0)], &OptConfig::with_grid(11, 3)).unwrap();
        assert!((r.best_point[0] - 0.5).abs() < 1e-12);
        assert!(r.failures > 0);
    }

    #[test]
    fn config_validation() {
        assert!(OptConfig::with_grid(2, 1).validate().is_err());
        assert!(grid_refine_maximize(|_: &[f64]| Some(0.0), &[Dim::new(1.0, 0.0)], &OptConfig::default()).is_err());
        let cfg: OptConfig = serde_json::from_str(r#"{"grid_points": 9}"#).unwrap();
        assert_eq!(cfg.refinement, 200);
    }

    #[test]
    fn trace_and_reproducibility() {
        let cfg = OptConfig { record_trace: true, ..OptConfig::with_grid(5, 2) };
        let f = |x: &[f64]| Some((3.0 * x[0]).sin() * x[1].cos());
        let boxes = [Dim::new(0.0, 2.0), Dim::new(-1.0, 1.0)];
        let a = grid_refine_maximize(f, &boxes, &cfg).unwrap();
        let b = grid_refine_maximize(f, &boxes, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.as_ref().unwrap().len() >= 25);
        assert_eq!(f(&a.best_point).unwrap(), a.best_value);
    }

    #[test]
    fn f32_objective() {
        let r = grid_refine_maximize(|x: &[f32]| Some(-(x[0] - 0.25f32).powi(2)), &[Dim::new(0.0f32, 1.0)], &OptConfig::default())
            .unwrap();
        assert!((r.best_point[0] - 0.25).abs() < 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn refining_grid_does_not_lose_value(a in 0.0f64..6.0, b in 0.5f64..4.0, x0 in 0.2f64..2.8) {
            // Nested grids: the scan alone is monotone for any objective.
            let f = |x: &[f64]| Some((b * x[0]).sin() + (a * x[0] * x[0]).cos());
            let boxes = [Dim::new(0.0, 3.0)];
            let scan = |g| OptConfig { refinement: 0, ..OptConfig::with_grid(g, 1) };
            let coarse = grid_refine_maximize(f, &boxes, &scan(11)).unwrap();
            let fine = grid_refine_maximize(f, &boxes, &scan(21)).unwrap();
            prop_assert!(fine.best_value >= coarse.best_value - 1e-8);
            prop_assert_eq!(f(&fine.best_point).unwrap(), fine.best_value);

            // With polishing, on a unimodal objective.
            let g = |x: &[f64]| Some(-(x[0] - x0).powi(2) - 0.1 * (x[1] - x0).abs());
            let boxes = [Dim::new(0.0, 3.0), Dim::new(0.0, 3.0)];
            let coarse = grid_refine_maximize(g, &boxes, &OptConfig::with_grid(11, 1)).unwrap();
            let fine = grid_refine_maximize(g, &boxes, &OptConfig::with_grid(21, 1)).unwrap();
            prop_assert!(fine.best_value >= coarse.best_value - 1e-6);
        }
    }
}
