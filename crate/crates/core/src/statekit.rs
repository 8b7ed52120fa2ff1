//! Pure qubit states, reduced density matrices, Schmidt spectra, Haar sampling
//! and named reference states.
//!
//! Qubit `0` is the most significant bit of a basis index, so the amplitude of
//! `|q0 q1 ... q(n-1)>` sits at index `q0 * 2^(n-1) + ... + q(n-1)`.

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{c, cr, czero, Real, C};

pub const MAX_QUBITS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T> {
    n_qubits: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> PureState<T> {
    /// Wraps an already normalized amplitude vector (`|Σ|a|² - 1| ≤ 1e-12`).
    pub fn new(n_qubits: usize, amps: Vec<C<T>>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm_sqr = norm_sqr(&amps);
        if (norm_sqr - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::NotNormalized { norm_sqr: norm_sqr.as_f64() });
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes `amps`; fails only on a zero vector or a bad length.
    pub fn from_unnormalized(n_qubits: usize, mut amps: Vec<C<T>>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm_sqr = norm_sqr(&amps);
        if !(norm_sqr > T::zero()) || !norm_sqr.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: norm_sqr.as_f64() });
        }
        let inv = norm_sqr.sqrt().recip();
        amps.iter_mut().for_each(|a| *a = *a * inv);
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_n(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidQubit { index, n_qubits });
        }
        let mut amps = vec![czero(); dim];
        amps[index] = C::one();
        Ok(Self { n_qubits, amps })
    }

    /// Single-qubit state `cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>`.
    pub fn bloch(theta: T, phi: T) -> Self {
        let half = theta * T::lit(0.5);
        let (s, co) = half.sin_cos();
        let (ps, pc) = phi.sin_cos();
        Self { n_qubits: 1, amps: vec![c(co, T::zero()), c(pc * s, ps * s)] }
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C<T>> {
        self.amps
    }

    pub fn norm_sqr(&self) -> T {
        norm_sqr(&self.amps)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { n_qubits: self.n_qubits, len: other.amps.len() });
        }
        Ok(self.amps.iter().zip(&other.amps).fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        tensor_product(self, other)
    }

    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix<T>> {
        reduced_density(self, keep)
    }

    /// Applies a single-qubit operator (2×2) to `qubit` in place, without renormalizing.
    pub fn apply_single_qubit(&mut self, op: &CMatrix<T>, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        assert_eq!(op.dim(), 2, "single-qubit operator must be 2x2");
        let bit = 1usize << (self.n_qubits - 1 - qubit);
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = op[(0, 0)] * a0 + op[(0, 1)] * a1;
                self.amps[i | bit] = op[(1, 0)] * a0 + op[(1, 1)] * a1;
            }
        }
        Ok(())
    }

    /// Applies a two-qubit operator (4×4, basis `|b_first b_second>`) to the
    /// ordered pair `(first, second)` in place, without renormalizing.
    pub fn apply_two_qubit(&mut self, op: &CMatrix<T>, first: usize, second: usize) -> Result<()> {
        self.check_qubit(first)?;
        self.check_qubit(second)?;
        if first == second {
            return Err(Error::DuplicateQubit(first));
        }
        assert_eq!(op.dim(), 4, "two-qubit operator must be 4x4");
        apply_two_qubit_raw(&mut self.amps, self.n_qubits, op, first, second);
        Ok(())
    }

    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<C<T>>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        Self { n_qubits, amps }
    }

    pub(crate) fn check_qubit(&self, index: usize) -> Result<()> {
        if index >= self.n_qubits {
            return Err(Error::InvalidQubit { index, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    /// Converts precision, e.g. to cross-check `f32` against `f64`.
    pub fn cast<U: Real>(&self) -> PureState<U> {
        PureState {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| c(U::lit(a.re.as_f64()), U::lit(a.im.as_f64()))).collect(),
        }
    }
}

pub(crate) fn apply_two_qubit_raw<T: Real>(
    amps: &mut [C<T>],
    n_qubits: usize,
    op: &CMatrix<T>,
    first: usize,
    second: usize,
) {
    let b1 = 1usize << (n_qubits - 1 - first);
    let b2 = 1usize << (n_qubits - 1 - second);
    let m = op.as_slice();
    for i in 0..amps.len() {
        if i & (b1 | b2) != 0 {
            continue;
        }
        let idx = [i, i | b2, i | b1, i | b1 | b2];
        let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (r, &target) in idx.iter().enumerate() {
            let row = &m[4 * r..4 * r + 4];
            amps[target] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
    }
}

fn check_n(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::UnsupportedQubitCount(n_qubits));
    }
    Ok(())
}

fn check_len(n_qubits: usize, len: usize) -> Result<()> {
    check_n(n_qubits)?;
    if len != 1usize << n_qubits {
        return Err(Error::DimensionMismatch { n_qubits, len });
    }
    Ok(())
}

fn norm_sqr<T: Real>(amps: &[C<T>]) -> T {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    matrix: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity (1e-12), unit trace (1e-12) and eigenvalues ≥ -1e-10.
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        let herm = matrix.hermiticity_defect();
        if herm > T::tol(1e-12) {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (defect {herm})")));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > T::tol(1e-12) || tr.im.abs() > T::tol(1e-12) {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let min = *matrix.eigvalsh().last().expect("nonempty");
        if min < -T::tol(1e-10) {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min}")));
        }
        Ok(Self { matrix })
    }

    /// `|ψ><ψ|`
    pub fn from_pure(state: &PureState<T>) -> Self {
        Self { matrix: CMatrix::outer(state.amplitudes(), state.amplitudes()) }
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    /// Eigenvalues, descending.
    pub fn spectrum(&self) -> Vec<T> {
        self.matrix.eigvalsh()
    }

    pub fn purity(&self) -> T {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Determinant of a single-qubit density matrix.
    pub fn det2(&self) -> T {
        assert_eq!(self.dim(), 2);
        let m = &self.matrix;
        m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr()
    }
}

/// Seed contract for per-sample random streams: the stream is a pure function
/// of `(master_seed, sample_index)`, so parallel and serial ensembles agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub sample_index: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64, sample_index: u64) -> Self {
        Self { master_seed, sample_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.sample_index);
        rng
    }
}

/// `a ⊗ b`; the amplitude of `|xy>` is `a[x] * b[y]`.
pub fn tensor_product<T: Real>(a: &PureState<T>, b: &PureState<T>) -> Result<PureState<T>> {
    let n = a.n_qubits + b.n_qubits;
    if n > MAX_QUBITS {
        return Err(Error::UnsupportedQubitCount(n));
    }
    let mut amps = Vec::with_capacity(1 << n);
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    Ok(PureState { n_qubits: n, amps })
}

fn validate_subset(n_qubits: usize, qubits: &[usize]) -> Result<()> {
    let mut seen = 0usize;
    for &q in qubits {
        if q >= n_qubits {
            return Err(Error::InvalidQubit { index: q, n_qubits });
        }
        if seen & (1 << q) != 0 {
            return Err(Error::DuplicateQubit(q));
        }
        seen |= 1 << q;
    }
    Ok(())
}

/// Partial trace of `|s><s|` onto `keep` (in the given order).
pub fn reduced_density<T: Real>(s: &PureState<T>, keep: &[usize]) -> Result<DensityMatrix<T>> {
    if keep.is_empty() {
        return Err(Error::InvalidSubset);
    }
    validate_subset(s.n_qubits, keep)?;
    Ok(DensityMatrix::from_matrix_unchecked(partial_trace_raw(s.amplitudes(), s.n_qubits, keep)))
}

/// Regroups amplitudes into a (kept × traced) matrix Ψ and returns ΨΨ†.
pub(crate) fn partial_trace_raw<T: Real>(amps: &[C<T>], n_qubits: usize, keep: &[usize]) -> CMatrix<T> {
    let k = keep.len();
    let rows = 1usize << k;
    let cols = 1usize << (n_qubits - k);
    let keep_mask = keep.iter().fold(0usize, |m, &q| m | (1 << (n_qubits - 1 - q)));
    let traced: Vec<usize> = (0..n_qubits).rev().map(|q| 1usize << (n_qubits - 1 - q)).filter(|b| b & keep_mask == 0).collect();
    let keep_bits: Vec<usize> = keep.iter().map(|&q| 1usize << (n_qubits - 1 - q)).collect();

    let mut psi = vec![czero::<T>(); rows * cols];
    for (i, &a) in amps.iter().enumerate() {
        let mut r = 0usize;
        for &b in &keep_bits {
            r = (r << 1) | usize::from(i & b != 0);
        }
        // traced bits listed least significant first
        let mut col = 0usize;
        for (pos, &b) in traced.iter().enumerate() {
            col |= usize::from(i & b != 0) << pos;
        }
        psi[r * cols + col] = a;
    }

    let mut rho = CMatrix::zeros(rows);
    for r in 0..rows {
        let pr = &psi[r * cols..(r + 1) * cols];
        for r2 in r..rows {
            let pr2 = &psi[r2 * cols..(r2 + 1) * cols];
            let v = pr.iter().zip(pr2).fold(czero::<T>(), |acc, (x, y)| acc + x * y.conj());
            rho[(r, r2)] = v;
            rho[(r2, r)] = v.conj();
        }
    }
    rho
}

/// Squared Schmidt coefficients across `side | rest`, descending, one per
/// eigenvalue of the reduced state on `side`.
pub fn schmidt_spectrum<T: Real>(s: &PureState<T>, side: &[usize]) -> Result<Vec<T>> {
    if side.is_empty() || side.len() >= s.n_qubits {
        return Err(Error::InvalidSubset);
    }
    validate_subset(s.n_qubits, side)?;
    Ok(partial_trace_raw(s.amplitudes(), s.n_qubits, side).eigvalsh())
}

/// Haar-random pure state: independent standard-normal real and imaginary
/// parts per amplitude, then global normalization.
pub fn haar_random_pure<T: Real>(n_qubits: usize, rng: RngSpec) -> Result<PureState<T>> {
    haar_random_pure_from(n_qubits, &mut rng.rng())
}

pub fn haar_random_pure_from<T: Real, R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<PureState<T>> {
    check_n(n_qubits)?;
    let amps = (0..1usize << n_qubits)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(T::lit(re), T::lit(im))
        })
        .collect();
    PureState::from_unnormalized(n_qubits, amps)
}

/// Random W-class state: complex Gaussian `λ0..λ3` in the W form, normalized.
pub fn w_class_random<T: Real>(rng: RngSpec) -> Result<PureState<T>> {
    let mut r = rng.rng();
    let mut lambda = [czero::<T>(); 4];
    for l in lambda.iter_mut() {
        let re: f64 = r.sample(StandardNormal);
        let im: f64 = r.sample(StandardNormal);
        *l = c(T::lit(re), T::lit(im));
    }
    let norm = lambda.iter().map(|l| l.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
    lambda.iter_mut().for_each(|l| *l = *l / norm);
    named_state(&NamedState::W3(lambda))
}

/// Reference states with exact amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum NamedState<T> {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
    /// `cos θ |0…0> + sin θ |1…1>` on `n` qubits (`n = 2` is the usual two-qubit family).
    GeneralizedGhz { n: usize, theta: T },
    Ghz(usize),
    /// `λ0|000> + λ1|100> + λ2|001> + λ3|010>`; coefficients must be normalized.
    W3([C<T>; 4]),
    W3Equal,
    /// `(|0000> + |0011> + |1100> - |1111>)/2`
    Cluster4,
}

pub fn named_state<T: Real>(spec: &NamedState<T>) -> Result<PureState<T>> {
    let h = T::FRAC_1_SQRT_2();
    let hc = c(h, T::zero());
    let z = czero::<T>();
    Ok(match spec {
        NamedState::PhiPlus => PureState::from_raw(2, vec![hc, z, z, hc]),
        NamedState::PhiMinus => PureState::from_raw(2, vec![hc, z, z, -hc]),
        NamedState::PsiPlus => PureState::from_raw(2, vec![z, hc, hc, z]),
        NamedState::PsiMinus => PureState::from_raw(2, vec![z, hc, -hc, z]),
        NamedState::GeneralizedGhz { n, theta } => {
            check_n(*n)?;
            let mut amps = vec![z; 1 << n];
            amps[0] = c(theta.cos(), T::zero());
            amps[(1 << n) - 1] = c(theta.sin(), T::zero());
            PureState::from_raw(*n, amps)
        }
        NamedState::Ghz(n) => named_state(&NamedState::GeneralizedGhz { n: *n, theta: T::FRAC_PI_4() })?,
        NamedState::W3(l) => {
            let mut amps = vec![z; 8];
            amps[0b000] = l[0];
            amps[0b100] = l[1];
            amps[0b001] = l[2];
            amps[0b010] = l[3];
            PureState::new(3, amps)?
        }
        NamedState::W3Equal => {
            let w = cr::<T>(1.0 / 3f64.sqrt());
            named_state(&NamedState::W3([z, w, w, w]))?
        }
        NamedState::Cluster4 => {
            let q = cr::<T>(0.5);
            let mut amps = vec![z; 16];
            amps[0b0000] = q;
            amps[0b0011] = q;
            amps[0b1100] = q;
            amps[0b1111] = -q;
            PureState::from_raw(4, amps)
        }
    })
}

impl<T: Real> PureState<T> {
    pub fn phi_plus() -> Self {
        named_state(&NamedState::PhiPlus).expect("valid")
    }

    pub fn ghz(n: usize) -> Result<Self> {
        named_state(&NamedState::Ghz(n))
    }

    /// Two-qubit `cos θ|00> + sin θ|11>`.
    pub fn gghz(theta: T) -> Self {
        named_state(&NamedState::GeneralizedGhz { n: 2, theta }).expect("valid")
    }

    pub fn w3_equal() -> Self {
        named_state(&NamedState::W3Equal).expect("valid")
    }

    pub fn cluster4() -> Self {
        named_state(&NamedState::Cluster4).expect("valid")
    }
}
