//! Four-outcome unsharp two-qubit measurements built from an orthonormal basis.
//!
//! Every family here is diagonal in a fixed orthonormal basis `{|b_1>..|b_4>}`:
//! element `k` is `Σ_i w[k][i] |b_i><b_i|`, so its square root is obtained by
//! taking square roots of the weights. The Bell-basis rank-`r` family mixes
//! `r` cyclically consecutive Bell projectors; the generalized rank-2 family
//! uses a rotated `{|00>,|11>}` / `{|01>,|10>}` basis.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{c, czero, Real, C};
use crate::statekit::{apply_two_qubit_raw, PureState};

/// Outcomes with probability below this are reported as null.
pub const NULL_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyLabel<T> {
    BellRank(usize),
    /// `α = cos(ζ/2)`, `β = e^{-iξ} sin(ζ/2)`.
    GeneralizedRank2 { zeta: T, xi: T },
}

#[derive(Clone, Debug)]
pub struct MeasurementFamily<T> {
    rank: usize,
    p: T,
    label: FamilyLabel<T>,
    basis: [[C<T>; 4]; 4],
    weights: [[T; 4]; 4],
    ops: [CMatrix<T>; 4],
    sqrt_ops: [CMatrix<T>; 4],
    degenerate: bool,
}

impl<T: Real> MeasurementFamily<T> {
    fn from_basis(rank: usize, p: T, label: FamilyLabel<T>, basis: [[C<T>; 4]; 4], weights: [[T; 4]; 4]) -> Self {
        let build = |k: usize, f: &dyn Fn(T) -> T| {
            let mut m = CMatrix::zeros(4);
            for (i, b) in basis.iter().enumerate() {
                let w = f(weights[k][i]);
                if w == T::zero() {
                    continue;
                }
                for r in 0..4 {
                    for col in 0..4 {
                        m[(r, col)] = m[(r, col)] + b[r] * b[col].conj() * w;
                    }
                }
            }
            m
        };
        let ops = std::array::from_fn(|k| build(k, &|w| w));
        let sqrt_ops = std::array::from_fn(|k| build(k, &|w: T| w.max(T::zero()).sqrt()));
        let floor = T::tol(1e-10);
        let degenerate = weights.iter().any(|row| row.iter().filter(|&&w| w > floor).count() < rank);
        Self { rank, p, label, basis, weights, ops, sqrt_ops, degenerate }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn label(&self) -> FamilyLabel<T> {
        self.label
    }

    /// Element `k` (0-based: `k = 0` is `M_1`).
    pub fn op(&self, k: usize) -> &CMatrix<T> {
        &self.ops[k]
    }

    pub fn ops(&self) -> &[CMatrix<T>; 4] {
        &self.ops
    }

    /// Closed-form square root of element `k`.
    pub fn sqrt_op(&self, k: usize) -> &CMatrix<T> {
        &self.sqrt_ops[k]
    }

    /// Mixture weights of element `k` on the family's eigenbasis.
    pub fn weights(&self, k: usize) -> [T; 4] {
        self.weights[k]
    }

    pub fn basis_vector(&self, i: usize) -> [C<T>; 4] {
        self.basis[i]
    }

    /// True when some element has fewer than `rank` nonzero eigenvalues.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Numerical rank of element `k` (eigenvalues below 1e-10 count as zero).
    pub fn numerical_rank(&self, k: usize) -> usize {
        let floor = T::tol(1e-10);
        self.ops[k].eigvalsh().into_iter().filter(|&x| x > floor).count()
    }
}

fn bell_basis<T: Real>() -> [[C<T>; 4]; 4] {
    let h = T::FRAC_1_SQRT_2();
    let p = c(h, T::zero());
    let z = czero();
    [[p, z, z, p], [p, z, z, -p], [z, p, p, z], [z, p, -p, z]]
}

/// Bell projectors `|φ+><φ+|, |φ-><φ-|, |ψ+><ψ+|, |ψ-><ψ-|`.
pub fn bell_projectors<T: Real>() -> [CMatrix<T>; 4] {
    let b = bell_basis::<T>();
    std::array::from_fn(|i| CMatrix::outer(&b[i], &b[i]))
}

/// Cyclic mixing weights: element `k` puts `p` on projectors `k..k+r-2` and
/// `1-(r-1)p` on projector `k+r-1` (indices mod 4).
pub fn cyclic_weights<T: Real>(rank: usize, p: T) -> [[T; 4]; 4] {
    let mut w = [[T::zero(); 4]; 4];
    let last = T::one() - T::lit((rank - 1) as f64) * p;
    for (k, row) in w.iter_mut().enumerate() {
        for j in 0..rank {
            row[(k + j) % 4] = if j + 1 < rank { p } else { last };
        }
    }
    w
}

/// Admissible strength range `[0, 1/(r-1))` of the Bell rank-`r` family.
pub fn strength_upper_bound(rank: usize) -> f64 {
    1.0 / (rank as f64 - 1.0)
}

/// Bell-basis unsharp family of rank `r ∈ {2,3,4}` and strength `p ∈ [0, 1/(r-1))`.
pub fn unsharp_family<T: Real>(rank: usize, p: T) -> Result<MeasurementFamily<T>> {
    if !(2..=4).contains(&rank) {
        return Err(Error::ParameterOutOfRange { name: "rank", value: rank as f64, range: "{2, 3, 4}".into() });
    }
    let hi = strength_upper_bound(rank);
    let pf = p.as_f64();
    if !(pf >= 0.0 && pf < hi) {
        return Err(Error::ParameterOutOfRange { name: "p", value: pf, range: format!("[0, {hi})") });
    }
    Ok(MeasurementFamily::from_basis(rank, p, FamilyLabel::BellRank(rank), bell_basis(), cyclic_weights(rank, p)))
}

/// Rank-2 family on the rotated basis `α|00>+β|11>, -β*|00>+α|11>,
/// α|01>+β|10>, -β*|01>+α|10>` with `α = cos(ζ/2)`, `β = e^{-iξ} sin(ζ/2)`.
pub fn generalized_rank2_family<T: Real>(zeta: T, xi: T, p: T) -> Result<MeasurementFamily<T>> {
    let pf = p.as_f64();
    if !(0.0..=1.0).contains(&pf) {
        return Err(Error::ParameterOutOfRange { name: "p", value: pf, range: "[0, 1]".into() });
    }
    let half = zeta * T::lit(0.5);
    let alpha = c(half.cos(), T::zero());
    let (sx, cx) = xi.sin_cos();
    let beta = c(cx, -sx) * half.sin();
    let z = czero();
    let basis = [
        [alpha, z, z, beta],
        [-beta.conj(), z, z, alpha],
        [z, alpha, beta, z],
        [z, -beta.conj(), alpha, z],
    ];
    Ok(MeasurementFamily::from_basis(
        2,
        p,
        FamilyLabel::GeneralizedRank2 { zeta, xi },
        basis,
        cyclic_weights(2, p),
    ))
}

/// Coefficients `(C, D, E)` of the generalized family's `√M_1` restricted to
/// `{|00>, |11>}`: `√M_1 = C|00><00| + D*|00><11| + D|11><00| + E|11><11|`.
pub fn generalized_sqrt_coefficients<T: Real>(zeta: T, xi: T, p: T) -> (T, C<T>, T) {
    let sp = p.sqrt();
    let sq = (T::one() - p).sqrt();
    let half = T::lit(0.5);
    let cz = zeta.cos();
    let cc = half * (sq * (T::one() - cz) + sp * (T::one() + cz));
    let (sx, cx) = xi.sin_cos();
    let d = c(cx, -sx) * (half * zeta.sin() * (sp - sq));
    let e = half * (sp * (T::one() - cz) + sq * (T::one() + cz));
    (cc, d, e)
}

/// PSD square root through the Hermitian eigendecomposition.
pub fn op_sqrt<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let eig = m.eigh();
    if let Some(&min) = eig.values.last() {
        if min < -T::tol(1e-8) {
            return Err(Error::NotPositive(min.as_f64()));
        }
    }
    Ok(CMatrix::spectral_map(&eig, |x| x.max(T::zero()).sqrt()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InflationOutcome<T> {
    pub state: PureState<T>,
    pub probability: T,
    /// 0-based outcome index (`0` is `M_1`).
    pub outcome: usize,
}

/// Applies `√M_k` of `family` to the ordered qubit pair `targets` and renormalizes.
///
/// Returns [`Error::NullOutcome`] when `q_k = <s|M_k|s>` is below [`NULL_PROBABILITY`].
pub fn apply_povm_element<T: Real>(
    s: &PureState<T>,
    family: &MeasurementFamily<T>,
    k: usize,
    targets: (usize, usize),
) -> Result<InflationOutcome<T>> {
    if k >= 4 {
        return Err(Error::ParameterOutOfRange { name: "outcome", value: k as f64, range: "0..4".into() });
    }
    let (t1, t2) = targets;
    s.check_qubit(t1)?;
    s.check_qubit(t2)?;
    if t1 == t2 {
        return Err(Error::DuplicateQubit(t1));
    }
    let n = s.n_qubits();
    let mut amps = s.amplitudes().to_vec();
    apply_two_qubit_raw(&mut amps, n, family.sqrt_op(k), t1, t2);
    // √M†√M = M, so the squared norm of √M|s> is q_k.
    let q: T = amps.iter().map(|a| a.norm_sqr()).sum();
    if q < T::lit(NULL_PROBABILITY) {
        return Err(Error::NullOutcome { outcome: k, probability: q.as_f64() });
    }
    let inv = q.sqrt().recip();
    amps.iter_mut().for_each(|a| *a = *a * inv);
    Ok(InflationOutcome { state: PureState::from_raw(n, amps), probability: q, outcome: k })
}

/// `<s| M_k ⊗ I |s>` for each outcome, with `M_k` embedded on `targets`.
pub fn outcome_probabilities<T: Real>(
    s: &PureState<T>,
    family: &MeasurementFamily<T>,
    targets: (usize, usize),
) -> Result<[T; 4]> {
    s.check_qubit(targets.0)?;
    s.check_qubit(targets.1)?;
    let mut out = [T::zero(); 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut amps = s.amplitudes().to_vec();
        apply_two_qubit_raw(&mut amps, s.n_qubits(), family.op(k), targets.0, targets.1);
        *slot = s.amplitudes().iter().zip(&amps).fold(czero::<T>(), |acc, (a, b)| acc + a.conj() * b).re;
    }
    Ok(out)
}
