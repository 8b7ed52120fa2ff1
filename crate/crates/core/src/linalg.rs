//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! Dimensions here never exceed 2^8, so everything is row-major `Vec` storage
//! and a cyclic Jacobi sweep is both accurate and fast enough.

use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::scalar::{c, czero, Real, C};

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![czero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C::one();
        }
        m
    }

    /// Builds a matrix from row-major data; panics if `data.len() != dim^2`.
    pub fn from_row_major(dim: usize, data: Vec<C<T>>) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data must be dim^2 long");
        Self { dim, data }
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = c(d, T::zero());
        }
        m
    }

    /// `|u><v|`
    pub fn outer(u: &[C<T>], v: &[C<T>]) -> Self {
        assert_eq!(u.len(), v.len());
        let dim = u.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = u[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] = m.data[i * n + j] + a * rhs.data[k * n + j];
                }
            }
        }
        m
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).fold(czero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        Self { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).fold(czero(), |acc, i| acc + self[(i, i)])
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        assert_eq!(self.dim, rhs.dim);
        self.data.iter().zip(&rhs.data).fold(T::zero(), |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Tensor (Kronecker) product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (a, b) = (self.dim, rhs.dim);
        let n = a * b;
        let mut m = Self::zeros(n);
        for i in 0..a {
            for j in 0..a {
                let s = self[(i, j)];
                for k in 0..b {
                    for l in 0..b {
                        m[(i * b + k, j * b + l)] = s * rhs[(k, l)];
                    }
                }
            }
        }
        m
    }

    /// Hermitian eigendecomposition by cyclic Jacobi rotations.
    ///
    /// Only the upper triangle's Hermitian part is meaningful; eigenvalues come
    /// back in descending order with matching eigenvector columns.
    pub fn eigh(&self) -> Eigh<T> {
        jacobi_eigh(self, true)
    }

    /// Eigenvalues only (descending).
    pub fn eigvalsh(&self) -> Vec<T> {
        match self.dim {
            1 => vec![self[(0, 0)].re],
            2 => {
                let (hi, lo) = eig2(self[(0, 0)].re, self[(1, 1)].re, self[(0, 1)]);
                vec![hi, lo]
            }
            _ => jacobi_eigh(self, false).values,
        }
    }

    /// Largest eigenvalue of a Hermitian matrix.
    pub fn max_eigenvalue(&self) -> T {
        match self.dim {
            1 => self[(0, 0)].re,
            2 => eig2(self[(0, 0)].re, self[(1, 1)].re, self[(0, 1)]).0,
            _ => jacobi_eigh(self, false).values[0],
        }
    }

    /// Singular values (descending) by one-sided Jacobi, which keeps small
    /// singular values accurate to round-off in absolute terms.
    pub fn singular_values(&self) -> Vec<T> {
        let n = self.dim;
        let mut cols: Vec<Vec<C<T>>> = (0..n).map(|j| (0..n).map(|i| self[(i, j)]).collect()).collect();
        let eps = T::epsilon();
        for _ in 0..60 {
            let mut rotated = false;
            for i in 0..n {
                for j in i + 1..n {
                    let a: T = cols[i].iter().map(|z| z.norm_sqr()).sum();
                    let b: T = cols[j].iter().map(|z| z.norm_sqr()).sum();
                    let g = cols[i].iter().zip(&cols[j]).fold(C::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y);
                    let gn = g.norm();
                    if gn <= eps * (a * b).sqrt() || gn == T::zero() {
                        continue;
                    }
                    rotated = true;
                    let phase = g.conj() / gn;
                    let zeta = (b - a) / (gn + gn);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let cs = (T::one() + t * t).sqrt().recip();
                    let sn = cs * t;
                    let (head, tail) = cols.split_at_mut(j);
                    for (u, v) in head[i].iter_mut().zip(tail[0].iter_mut()) {
                        let (x, y) = (*u, *v * phase);
                        *u = x * cs - y * sn;
                        *v = x * sn + y * cs;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<T> = cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()).collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        sv
    }

    /// Rebuilds `V diag(f(λ)) V†` from an eigendecomposition.
    pub fn spectral_map(eig: &Eigh<T>, f: impl Fn(T) -> T) -> Self {
        let n = eig.values.len();
        let mut m = Self::zeros(n);
        for (k, &lam) in eig.values.iter().enumerate() {
            let w = f(lam);
            if w.is_zero() {
                continue;
            }
            for i in 0..n {
                let vik = eig.vectors[(i, k)] * w;
                for j in 0..n {
                    m[(i, j)] = m[(i, j)] + vik * eig.vectors[(j, k)].conj();
                }
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigenvalues (descending) and eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct Eigh<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> Eigh<T> {
    pub fn vector(&self, k: usize) -> Vec<C<T>> {
        (0..self.values.len()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Closed-form eigenvalues of `[[a, b], [b*, d]]`, larger first.
#[inline]
fn eig2<T: Real>(a: T, d: T, b: C<T>) -> (T, T) {
    let half = T::lit(0.5);
    let mean = (a + d) * half;
    let r = ((a - d) * half).hypot(b.norm());
    (mean + r, mean - r)
}

fn jacobi_eigh<T: Real>(m: &CMatrix<T>, want_vectors: bool) -> Eigh<T> {
    let n = m.dim;
    let mut a = m.clone();
    let mut v = if want_vectors { CMatrix::identity(n) } else { CMatrix::zeros(0) };
    let scale = a.data.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt();
    let thresh = T::epsilon() * scale.max(T::min_positive_value());

    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + a[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= thresh {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= thresh * T::lit(1e-3) {
                    continue;
                }
                let phase = apq / g;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = T::lit(0.5) * (g + g).atan2(aqq - app);
                let (s, cs) = theta.sin_cos();
                // Column transform by U = diag(1, conj(phase)) * [[cs, s], [-s, cs]]
                // on the (p, q) plane, then row transform by U^†.
                let up = c(cs, T::zero());
                let uq_p = phase.conj() * (-s);
                let up_q = c(s, T::zero());
                let uq_q = phase.conj() * cs;
                // U = [[u_pp, u_pq], [u_qp, u_qq]] acting on basis (p, q)
                let (u_pp, u_pq, u_qp, u_qq) = (up, up_q, uq_p, uq_q);
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = czero();
                a[(q, p)] = czero();
                a[(p, p)] = c(a[(p, p)].re, T::zero());
                a[(q, q)] = c(a[(q, q)].re, T::zero());
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * u_pp + vkq * u_qp;
                        v[(k, q)] = vkp * u_pq + vkq * u_qq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = if want_vectors {
        let mut sorted = CMatrix::zeros(n);
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                sorted[(k, new)] = v[(k, old)];
            }
        }
        sorted
    } else {
        v
    };
    Eigh { values, vectors }
}
