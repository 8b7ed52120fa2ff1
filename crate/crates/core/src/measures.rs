//! Entanglement quantifiers for pure qubit states: generalized geometric
//! measure, Wootters concurrence, monogamy tangle and fidelity.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{c, czero, Real, C};
use crate::statekit::{partial_trace_raw, DensityMatrix, PureState, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    Ggm,
    Concurrence,
    Tangle,
    Fidelity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureValue<T> {
    pub value: T,
    pub kind: MeasureKind,
}

impl<T> MeasureValue<T> {
    fn new(kind: MeasureKind, value: T) -> Self {
        Self { value, kind }
    }
}

/// Bipartition sides as bitmasks over qubits (bit `q` set means qubit `q` is on
/// the side). Sizes run over `1..=n/2`; for equal halves only the side holding
/// qubit 0 is kept so complementary cuts appear once.
pub fn bipartitions(n_qubits: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1u32 << n_qubits) {
        let size = mask.count_ones() as usize;
        if size > n_qubits / 2 || (2 * size == n_qubits && mask & 1 == 0) {
            continue;
        }
        out.push((0..n_qubits).filter(|q| mask & (1 << q) != 0).collect());
    }
    out.sort_by_key(|side| side.len());
    out
}

fn cached_bipartitions(n: usize) -> &'static [Vec<usize>] {
    static CACHE: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    &CACHE.get_or_init(|| (0..=MAX_QUBITS).map(bipartitions).collect())[n]
}

/// Largest squared Schmidt coefficient over every bipartition.
pub(crate) fn max_schmidt_weight<T: Real>(s: &PureState<T>) -> T {
    let n = s.n_qubits();
    let mut best = T::zero();
    for side in cached_bipartitions(n) {
        let rho = partial_trace_raw(s.amplitudes(), n, side);
        // λ_max ≤ sqrt(Tr ρ²) bounds what this cut can contribute.
        if side.len() > 1 {
            let purity: T = rho.as_slice().iter().map(|z| z.norm_sqr()).sum();
            if purity.sqrt() <= best {
                continue;
            }
        }
        best = best.max(rho.max_eigenvalue());
    }
    best
}

/// Generalized geometric measure, `1 - max λ_max` over all bipartitions.
pub fn ggm<T: Real>(s: &PureState<T>) -> Result<MeasureValue<T>> {
    if s.n_qubits() < 2 {
        return Err(Error::Unsupported("GGM needs at least two qubits".into()));
    }
    Ok(MeasureValue::new(MeasureKind::Ggm, ggm_value(s)))
}

/// GGM without the qubit-count check; a one-qubit state yields 0.
pub fn ggm_value<T: Real>(s: &PureState<T>) -> T {
    if s.n_qubits() < 2 {
        return T::zero();
    }
    (T::one() - max_schmidt_weight(s)).max(T::zero())
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence<T: Real>(rho: &DensityMatrix<T>) -> Result<MeasureValue<T>> {
    if rho.dim() != 4 {
        return Err(Error::InvalidDensityMatrix(format!("concurrence needs a 4x4 matrix, got {}", rho.dim())));
    }
    Ok(MeasureValue::new(MeasureKind::Concurrence, concurrence_raw(rho.matrix())?))
}

/// `max(0, λ1 - λ2 - λ3 - λ4)` with `λi` the square roots of the eigenvalues of
/// `ρ (σy⊗σy) ρ* (σy⊗σy)`, taken in the support of `ρ`: writing `ρ = X X†`,
/// the `λi` are the singular values of `X† (σy⊗σy) X*`. This avoids square
/// roots of round-off eigenvalues when `ρ` is rank deficient.
pub(crate) fn concurrence_raw<T: Real>(rho: &CMatrix<T>) -> Result<T> {
    let eig = rho.eigh();
    let floor = T::tol(1e-14);
    if let Some(&min) = eig.values.last() {
        if min < -T::tol(1e-8) {
            return Err(Error::NotPositive(min.as_f64()));
        }
    }
    let cols: Vec<Vec<C<T>>> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > floor)
        .map(|(k, &w)| eig.vector(k).into_iter().map(|z| z * w.sqrt()).collect())
        .collect();
    let r = cols.len();
    if r == 0 {
        return Ok(T::zero());
    }
    // (σy⊗σy)|ab> = -(-1)^(a+b) |ā b̄>, i.e. index i -> 3 - i with signs (-1, +1, +1, -1).
    let flip = |v: &[C<T>]| -> [C<T>; 4] {
        let s = [-T::one(), T::one(), T::one(), -T::one()];
        [v[3].conj() * s[0], v[2].conj() * s[1], v[1].conj() * s[2], v[0].conj() * s[3]]
    };
    let flipped: Vec<[C<T>; 4]> = cols.iter().map(|v| flip(v)).collect();
    let mut t = CMatrix::<T>::zeros(r);
    for i in 0..r {
        for j in 0..r {
            t[(i, j)] = (0..4).fold(czero(), |acc, a| acc + cols[i][a].conj() * flipped[j][a]);
        }
    }
    let sv = t.singular_values();
    let rest: T = sv.iter().skip(1).copied().sum();
    Ok((sv[0] - rest).max(T::zero()))
}

/// Monogamy tangle `C²(focus|rest) - Σ_j C²(focus, j)` of a pure state, with
/// `C²(focus|rest) = 4 det ρ_focus`. Round-off negatives are not clamped.
pub fn tangle<T: Real>(s: &PureState<T>, focus: usize) -> Result<MeasureValue<T>> {
    let n = s.n_qubits();
    if n < 3 {
        return Err(Error::Unsupported("tangle needs at least three qubits".into()));
    }
    s.check_qubit(focus)?;
    Ok(MeasureValue::new(MeasureKind::Tangle, tangle_raw(s, focus)?))
}

pub(crate) fn tangle_raw<T: Real>(s: &PureState<T>, focus: usize) -> Result<T> {
    let n = s.n_qubits();
    let amps = s.amplitudes();
    let rho_a = partial_trace_raw(amps, n, &[focus]);
    let det = rho_a[(0, 0)].re * rho_a[(1, 1)].re - rho_a[(0, 1)].norm_sqr();
    let mut t = T::lit(4.0) * det;
    for j in (0..n).filter(|&j| j != focus) {
        let cj = concurrence_raw(&partial_trace_raw(amps, n, &[focus, j]))?;
        t = t - cj * cj;
    }
    Ok(t)
}

/// `|<a|b>|²`
pub fn fidelity<T: Real>(a: &PureState<T>, b: &PureState<T>) -> Result<MeasureValue<T>> {
    let ov = a.inner(b)?;
    Ok(MeasureValue::new(MeasureKind::Fidelity, ov.norm_sqr().min(T::one())))
}

/// Random single-qubit unitary from Euler angles, used for invariance checks.
pub fn local_unitary<T: Real>(alpha: T, beta: T, gamma: T) -> CMatrix<T> {
    let (sb, cb) = (beta * T::lit(0.5)).sin_cos();
    let e = |x: T| c(x.cos(), x.sin());
    let half = T::lit(0.5);
    CMatrix::from_row_major(
        2,
        vec![
            e(-(alpha + gamma) * half) * cb,
            -e(-(alpha - gamma) * half) * sb,
            e((alpha - gamma) * half) * sb,
            e((alpha + gamma) * half) * cb,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cr;
    use crate::statekit::{haar_random_pure, tensor_product, RngSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    type S = PureState<f64>;

    fn haar(n: usize, seed: u64) -> S {
        haar_random_pure(n, RngSpec::new(seed, 0)).unwrap()
    }

    #[test]
    fn bipartition_counts() {
        // 3 qubits: 3 single cuts; 4 qubits: 4 single + 3 balanced; 5: 5 + 10.
        assert_eq!(bipartitions(3).len(), 3);
        assert_eq!(bipartitions(4).len(), 7);
        assert_eq!(bipartitions(5).len(), 15);
        assert_eq!(bipartitions(6).len(), 31);
    }

    #[test]
    fn ggm_examples() {
        assert_abs_diff_eq!(ggm(&S::ghz(3).unwrap()).unwrap().value, 0.5, epsilon = 1e-14);
        let prod = tensor_product(&S::bloch(0.3, 0.2), &S::bloch(1.1, 2.0)).unwrap();
        let prod = tensor_product(&prod, &S::bloch(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(ggm(&prod).unwrap().value, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ggm(&S::w3_equal()).unwrap().value, 1.0 / 3.0, epsilon = 1e-14);
        assert!(ggm(&S::bloch(0.1, 0.1)).is_err());
    }

    #[test]
    fn ggm_of_cluster_uses_balanced_cut() {
        // Single-qubit marginals of the cluster state are maximally mixed, but the
        // {0,1}|{2,3} cut has Schmidt rank 2.
        assert_abs_diff_eq!(ggm(&S::cluster4()).unwrap().value, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn concurrence_examples() {
        let bell = DensityMatrix::from_pure(&S::phi_plus());
        assert_abs_diff_eq!(concurrence(&bell).unwrap().value, 1.0, epsilon = 1e-12);
        let mixed = DensityMatrix::new(CMatrix::identity(4).scale(0.25)).unwrap();
        assert_abs_diff_eq!(concurrence(&mixed).unwrap().value, 0.0, epsilon = 1e-12);
        for theta in [0.0, 0.2, 0.7, 1.3, 2.9] {
            let rho = DensityMatrix::from_pure(&S::gghz(theta));
            let want = (2.0 * theta).sin().abs();
            assert_abs_diff_eq!(concurrence(&rho).unwrap().value, want, epsilon = 1e-12);
        }
        let one = DensityMatrix::from_pure(&S::bloch(0.4, 0.0));
        assert!(concurrence(&one).is_err());
    }

    /// Independent spectral route: eigenvalues of the non-Hermitian R = ρ ρ̃
    /// through √ρ ρ̃ √ρ, compared only where ρ is full rank.
    fn concurrence_spectral(rho: &CMatrix<f64>) -> f64 {
        let mut yy = CMatrix::zeros(4);
        yy[(0, 3)] = cr(-1.0);
        yy[(1, 2)] = cr(1.0);
        yy[(2, 1)] = cr(1.0);
        yy[(3, 0)] = cr(-1.0);
        let tilde = yy.matmul(&rho.conj()).matmul(&yy);
        let sq = CMatrix::spectral_map(&rho.eigh(), |x| x.max(0.0).sqrt());
        let h = sq.matmul(&tilde).matmul(&sq);
        let mut l: Vec<f64> = h.eigvalsh().into_iter().map(|x| x.max(0.0).sqrt()).collect();
        l.sort_by(|a, b| b.partial_cmp(a).unwrap());
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    #[test]
    fn concurrence_matches_spectral_route_on_mixed_states() {
        for seed in 0..50 {
            // Reduced two-qubit state of a 5-qubit Haar state is full rank.
            let s = haar(5, seed);
            let rho = partial_trace_raw(s.amplitudes(), 5, &[0, 3]);
            let a = concurrence_raw(&rho).unwrap();
            let b = concurrence_spectral(&rho);
            assert!((a - b).abs() < 1e-9, "seed {seed}: {a} vs {b}");
        }
        // Pure two-qubit: 2|a0 a3 - a1 a2|.
        for seed in 0..50 {
            let s = haar(2, seed);
            let a = s.amplitudes();
            let want = 2.0 * (a[0] * a[3] - a[1] * a[2]).norm();
            let got = concurrence(&DensityMatrix::from_pure(&s)).unwrap().value;
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn tangle_examples() {
        assert_abs_diff_eq!(tangle(&S::ghz(3).unwrap(), 0).unwrap().value, 1.0, epsilon = 1e-12);
        assert!(tangle(&S::w3_equal(), 0).unwrap().value.abs() < 1e-10);
        assert!(tangle(&S::phi_plus(), 0).is_err());
        assert!(tangle(&S::ghz(3).unwrap(), 3).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let s = haar(3, 11);
        assert_abs_diff_eq!(fidelity(&s, &s).unwrap().value, 1.0, epsilon = 1e-14);
        let zero = S::basis(1, 0).unwrap();
        let one = S::basis(1, 1).unwrap();
        let plus = S::bloch(std::f64::consts::FRAC_PI_2, 0.0);
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap().value, 0.0);
        assert_abs_diff_eq!(fidelity(&zero, &plus).unwrap().value, 0.5, epsilon = 1e-15);
        assert!(fidelity(&zero, &s).is_err());
    }

    #[test]
    fn monogamy_on_haar_states() {
        for seed in 0..1000 {
            for n in [3, 4] {
                let s = haar(n, seed);
                let t = tangle(&s, 0).unwrap().value;
                assert!(t >= -1e-8, "n={n} seed={seed} tangle={t}");
            }
        }
    }

    proptest! {
        #[test]
        fn ggm_local_unitary_invariance(seed in 0u64..10_000, angles in proptest::collection::vec(0.0f64..6.3, 12)) {
            let s = haar(4, seed);
            let mut t = s.clone();
            for q in 0..4 {
                let u = local_unitary(angles[3 * q], angles[3 * q + 1], angles[3 * q + 2]);
                t.apply_single_qubit(&u, q).unwrap();
            }
            let d = (ggm(&s).unwrap().value - ggm(&t).unwrap().value).abs();
            prop_assert!(d < 1e-9);
        }

        #[test]
        fn ggm_positive_iff_no_product_cut(seed in 0u64..10_000, product in proptest::bool::ANY) {
            let s = if product {
                tensor_product(&haar(2, seed), &haar(2, seed + 1)).unwrap()
            } else {
                haar(4, seed)
            };
            let g = ggm(&s).unwrap().value;
            let all_entangled = bipartitions(4).iter().all(|side| {
                crate::statekit::schmidt_spectrum(&s, side).unwrap()[0] < 1.0 - 1e-10
            });
            prop_assert_eq!(g > 1e-10, all_entangled);
            prop_assert!((0.0..1.0).contains(&g));
        }
    }
}
