//! Small dense complex linear algebra: log-determinants, singular values,
//! waterfilling and Gaussian mutual information / differential entropy.
//!
//! All rates are in bits (log base 2) per channel use.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::network::{NodeSet, RelayNetwork};
use crate::scalar::{Cplx, Real};

/// Dense row-major complex matrix.
///
/// Zero-sized matrices are allowed: a cut or stage with no crossing edges
/// yields an empty transfer matrix whose rates are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> GainMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GainMatrix { rows, cols, data: vec![Cplx::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cplx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        GainMatrix { rows, cols, data }
    }

    /// Builds a matrix from real row slices.
    pub fn from_real_rows(rows: &[&[T]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        GainMatrix::from_fn(rows.len(), cols, |i, j| Cplx::new(rows[i][j], T::zero()))
    }

    pub fn identity(n: usize) -> Self {
        GainMatrix::from_fn(n, n, |i, j| if i == j { Cplx::new(T::one(), T::zero()) } else { Cplx::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Cplx<T>) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn conj_transpose(&self) -> Self {
        GainMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: T) -> Self {
        GainMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// Multiplies row `i` by `f(i)`.
    pub fn scale_rows(&self, mut f: impl FnMut(usize) -> T) -> Self {
        GainMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * f(i))
    }

    pub fn matmul(&self, other: &GainMatrix<T>) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        GainMatrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(Cplx::zero(), |acc, k| acc + self.get(i, k) * other.get(k, j))
        })
    }

    pub fn add(&self, other: &GainMatrix<T>) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "dimension mismatch");
        GainMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// `I + s·H Hᴴ`
    pub fn identity_plus_gram(&self, s: T) -> Self {
        GainMatrix::identity(self.rows).add(&self.matmul(&self.conj_transpose()).scale(s))
    }
}

/// Hermitian positive-semidefinite matrix of received-signal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Real> {
    inner: GainMatrix<T>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Validates a covariance matrix and symmetrizes it to `(M + Mᴴ)/2`.
    pub fn new(m: GainMatrix<T>) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::validation("covariance", format!("{}x{} is not square", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::validation("covariance", "non-finite entry"));
        }
        let n = m.rows();
        let scale = m.data.iter().map(|z| z.norm()).fold(T::zero(), T::max).max(T::one());
        let half = T::lit(0.5);
        let mut sym = m.clone();
        for i in 0..n {
            for j in 0..n {
                let a = m.get(i, j);
                let b = m.get(j, i).conj();
                if (a - b).norm() > T::tol(1e-12) * scale {
                    return Err(Error::validation("covariance", format!("not Hermitian at ({i},{j})")));
                }
                sym.set(i, j, (a + b) * half);
            }
        }
        // PSD up to -1e-9 in the smallest eigenvalue
        let mut shifted = sym.clone();
        for i in 0..n {
            let d = shifted.get(i, i);
            shifted.set(i, i, d + Cplx::new(T::tol(1e-9) * scale, T::zero()));
        }
        if cholesky_log2_pivots(&shifted, T::zero()).is_err() {
            return Err(Error::validation("covariance", "matrix is not positive semidefinite"));
        }
        Ok(CovarianceMatrix { inner: sym })
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn matrix(&self) -> &GainMatrix<T> {
        &self.inner
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self.inner.get(i, i).re).sum()
    }
}

/// `log₂ det M` through a Cholesky factorization. Fails with
/// [`Error::SingularMatrix`] when a pivot drops to `1e-12·trace` or below.
pub fn logdet_psd<T: Real>(m: &CovarianceMatrix<T>) -> Result<T> {
    let threshold = T::tol(1e-12) * m.trace().max(T::min_positive_value());
    cholesky_log2_pivots(m.matrix(), threshold)
}

fn cholesky_log2_pivots<T: Real>(m: &GainMatrix<T>, threshold: T) -> Result<T> {
    let n = m.rows();
    let mut l = GainMatrix::<T>::zeros(n, n);
    let mut acc = T::zero();
    for j in 0..n {
        let mut d = m.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !(d > threshold) {
            return Err(Error::SingularMatrix { index: j, pivot: d.to_f64_lossy() });
        }
        let ljj = d.sqrt();
        l.set(j, j, Cplx::new(ljj, T::zero()));
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / ljj);
        }
        acc += d.log2();
    }
    Ok(acc)
}

/// Singular values in descending order (length `min(r, t)`), computed by
/// one-sided Jacobi rotations, which keeps small singular values accurate
/// relative to their own size.
pub fn singular_values<T: Real>(h: &GainMatrix<T>) -> Vec<T> {
    // Work on whichever orientation has fewer columns.
    let mut cols: Vec<Vec<Cplx<T>>> = if h.cols() <= h.rows() {
        (0..h.cols()).map(|j| (0..h.rows()).map(|i| h.get(i, j)).collect()).collect()
    } else {
        (0..h.rows()).map(|i| (0..h.cols()).map(|j| h.get(i, j).conj()).collect()).collect()
    };
    let n = cols.len();
    let tol = T::epsilon() * T::lit(n.max(1) as f64);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: T = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: T = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = cols[p].iter().zip(&cols[q]).fold(Cplx::zero(), |acc: Cplx<T>, (a, b)| acc + a.conj() * b);
                let g = gamma.norm();
                if alpha.is_zero() || beta.is_zero() || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (T::lit(2.0) * g);
                let sign = if zeta < T::zero() { -T::one() } else { T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..cols[p].len() {
                    let ap = cols[p][k];
                    let aq = cols[q][k] * phase;
                    cols[p][k] = ap * c - aq * s;
                    cols[q][k] = ap * s + aq * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

/// `u · log₂ det(I + HHᴴ/noise_var)`: mutual information of a Gaussian
/// channel with independent unit-power Gaussian inputs.
pub fn mi_gaussian_iid<T: Real>(h: &GainMatrix<T>, noise_var: T, u: T) -> T {
    u * singular_values(h).into_iter().map(|s| (s * s / noise_var).log2_1p()).sum::<T>()
}

/// Per-mode power allocation produced by [`waterfill`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation<T: Real> {
    pub q: Vec<T>,
    /// Common level ν with `qᵢ = max(0, ν − 1/λᵢ)` on active modes.
    pub water_level: T,
    /// Every eigenvalue was zero; `q` is then uniform and meaningless.
    pub all_zero_modes: bool,
}

impl<T: Real> PowerAllocation<T> {
    pub fn total(&self) -> T {
        self.q.iter().copied().sum()
    }
}

/// Waterfilling over channel eigenvalues `λᵢ = σᵢ²`, maximizing
/// `Σ log(1 + qᵢλᵢ)` subject to `Σ qᵢ = total_power`, `qᵢ ≥ 0`.
pub fn waterfill<T: Real>(lambdas: &[T], total_power: T) -> Result<PowerAllocation<T>> {
    if !(total_power > T::zero()) || !total_power.is_finite() {
        return Err(Error::Domain(format!("total power must be positive, got {total_power}")));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= T::zero()) || !l.is_finite()) {
        return Err(Error::Domain(format!("eigenvalues must be finite and nonnegative, got {bad}")));
    }
    let n = lambdas.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| lambdas[i] > T::zero()).collect();
    if order.is_empty() {
        let share = if n == 0 { T::zero() } else { total_power / T::lit(n as f64) };
        return Ok(PowerAllocation { q: vec![share; n], water_level: T::infinity(), all_zero_modes: true });
    }
    order.sort_by(|&a, &b| lambdas[b].partial_cmp(&lambdas[a]).expect("finite"));

    // Largest k whose level clears the k-th strongest mode.
    let mut inv_sum = T::zero();
    let mut level = T::zero();
    for (k, &i) in order.iter().enumerate() {
        let inv = lambdas[i].recip();
        let candidate = (total_power + inv_sum + inv) / T::lit((k + 1) as f64);
        if candidate > inv {
            inv_sum += inv;
            level = candidate;
        } else {
            break;
        }
    }
    let filled = |nu: T| -> T { order.iter().map(|&i| (nu - lambdas[i].recip()).max(T::zero())).sum() };
    // bisection polish on the level
    let mut lo = level * (T::one() - T::lit(1e-6));
    let mut hi = level * (T::one() + T::lit(1e-6));
    let settled = (filled(level) - total_power).abs() <= T::tol(1e-12) * total_power;
    if !settled && filled(lo) <= total_power && filled(hi) >= total_power {
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if filled(mid) < total_power {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::tol(1e-12) * level {
                break;
            }
        }
        level = (lo + hi) * T::lit(0.5);
    }
    let q = lambdas
        .iter()
        .map(|&l| if l > T::zero() { (level - l.recip()).max(T::zero()) } else { T::zero() })
        .collect();
    Ok(PowerAllocation { q, water_level: level, all_zero_modes: false })
}

/// Capacity with the transmit covariance waterfilled over the eigenmodes of
/// `H` under the sum constraint `total_power`.
pub fn capacity_waterfilled_with_power<T: Real>(h: &GainMatrix<T>, u: T, total_power: T) -> T {
    let lambdas: Vec<T> = singular_values(h).into_iter().map(|s| s * s).collect();
    if lambdas.is_empty() || lambdas.iter().all(|l| l.is_zero()) {
        return T::zero();
    }
    let alloc = waterfill(&lambdas, total_power).expect("valid waterfilling inputs");
    u * alloc.q.iter().zip(&lambdas).map(|(&q, &l)| (q * l).log2_1p()).sum::<T>()
}

/// Waterfilled capacity with total power `n = min(r, t)` (unit power per
/// mode on average).
pub fn capacity_waterfilled<T: Real>(h: &GainMatrix<T>, u: T) -> T {
    let n = h.rows().min(h.cols());
    if n == 0 {
        return T::zero();
    }
    capacity_waterfilled_with_power(h, u, T::lit(n as f64))
}

/// Equal unit power on every eigenmode; identical to
/// `mi_gaussian_iid(h, 1, u)`.
pub fn capacity_equal_power<T: Real>(h: &GainMatrix<T>, u: T) -> T {
    mi_gaussian_iid(h, T::one(), u)
}

/// Receiver-by-free-transmitter gain matrix: rows are `receivers`, columns
/// the transmitters outside `conditioned`.
fn free_gain_matrix<T: Real>(net: &RelayNetwork<T>, receivers: NodeSet, conditioned: NodeSet) -> GainMatrix<T> {
    let rows: Vec<_> = receivers.iter().collect();
    let cols: Vec<_> = net.all_nodes().difference(conditioned).iter().collect();
    GainMatrix::from_fn(rows.len(), cols.len(), |i, j| net.gain(cols[j], rows[i]).unwrap_or_else(Cplx::zero))
}

/// Covariance `I + GGᴴ` of `Y_receivers` given `X_conditioned`, all inputs
/// i.i.d. unit-power Gaussian.
pub fn received_covariance<T: Real>(
    net: &RelayNetwork<T>,
    receivers: NodeSet,
    conditioned: NodeSet,
) -> CovarianceMatrix<T> {
    let g = free_gain_matrix(net, receivers, conditioned);
    CovarianceMatrix::new(g.identity_plus_gram(T::one())).expect("I + GGᴴ is Hermitian positive definite")
}

/// Differential entropy `h(Y_receivers | X_conditioned)` in bits,
/// `u·log₂((2πe)^{|receivers|} det Σ)`.
pub fn gaussian_cond_entropy<T: Real>(net: &RelayNetwork<T>, receivers: NodeSet, conditioned: NodeSet) -> T {
    if receivers.is_empty() {
        return T::zero();
    }
    let u = net.field_factor();
    let two_pi_e = T::lit(2.0) * T::PI() * T::E();
    let g = free_gain_matrix(net, receivers, conditioned);
    let logdet: T = singular_values(&g).into_iter().map(|s| (s * s).log2_1p()).sum();
    u * (T::lit(receivers.len() as f64) * two_pi_e.log2() + logdet)
}
