//! Dense complex linear algebra with a single tolerance policy.
//!
//! Every rank decision goes through [`Tolerance::rank_cutoff`]: a singular
//! value counts iff it exceeds `epsilon * sigma_max * max(rows, cols)`.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{dim_err, Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Row count above which a tall null-space problem is solved through its
/// normal equations instead of a full SVD.
const NORMAL_EQUATION_ROWS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    epsilon: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { epsilon: DEFAULT_EPSILON }
    }
}

impl Tolerance {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(Tolerance { epsilon })
        } else {
            Err(Error::InvalidTolerance(epsilon))
        }
    }

    pub fn epsilon(self) -> f64 {
        self.epsilon
    }

    /// Singular values at or below this value are treated as zero.
    pub fn rank_cutoff(self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        self.epsilon * sigma_max * rows.max(cols).max(1) as f64
    }

    /// Threshold for ordinary residual checks (10·ε).
    pub fn check(self) -> f64 {
        10.0 * self.epsilon
    }

    /// Threshold for long composite products such as the pentagon (100·ε).
    pub fn loose(self) -> f64 {
        100.0 * self.epsilon
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Matrix unit `E_ij` of the given shape.
pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(rows, cols);
    m[(i, j)] = c(1.0, 0.0);
    m
}

pub fn diag(entries: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(entries))
}

pub fn real_diag(entries: &[f64]) -> ComplexMatrix {
    let e: Vec<C64> = entries.iter().map(|&x| c(x, 0.0)).collect();
    diag(&e)
}

pub fn basis_vector(n: usize, i: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(n);
    v[i] = c(1.0, 0.0);
    v
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.norm()
}

/// Frobenius norm of `a - b`; shapes must agree.
pub fn distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).norm()
}

/// Hilbert–Schmidt inner product `trace(a* b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.dotc(b)
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    a.kronecker(b)
}

/// A vector as a one-column matrix.
pub fn column(v: &ComplexVector) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Column-major vectorization, so that `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
pub fn vectorize(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &[C64], rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(rows, cols, v)
}

/// Stack vectors as the columns of a matrix.
pub fn hstack(cols: &[ComplexVector], rows: usize) -> ComplexMatrix {
    let mut m = zeros(rows, cols.len());
    for (j, v) in cols.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Largest deviation of `m` from being unitary.
pub fn unitarity_residual(m: &ComplexMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let id = identity(n);
    let a = (m.adjoint() * m - &id).norm();
    let b = (m * m.adjoint() - id).norm();
    a.max(b)
}

pub fn hermitian_residual(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Singular value decomposition with singular values sorted descending.
pub struct Svd {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

pub fn svd(m: &ComplexMatrix) -> Svd {
    let (r, k) = m.shape();
    let p = r.min(k);
    if p == 0 {
        return Svd { u: zeros(r, 0), sigma: Vec::new(), v: zeros(k, 0) };
    }
    // The library routine occasionally returns an inaccurate factorization of
    // complex matrices; every result is verified, retried on the adjoint, and
    // finally recomputed by one-sided Jacobi.
    if let Some(s) = library_svd(m).filter(|s| svd_is_accurate(m, s)) {
        return s;
    }
    let mt = m.adjoint();
    if let Some(s) = library_svd(&mt).filter(|s| svd_is_accurate(&mt, s)) {
        return Svd { u: s.v, sigma: s.sigma, v: s.u };
    }
    jacobi_svd(m)
}

fn library_svd(m: &ComplexMatrix) -> Option<Svd> {
    let (r, k) = m.shape();
    let p = r.min(k);
    let dec = m.clone().svd(true, true);
    let u = dec.u?;
    let v = dec.v_t?.adjoint();
    let sv = dec.singular_values.as_slice().to_vec();
    Some(sorted_svd(&u, &sv, &v, r, k, p))
}

fn sorted_svd(u: &ComplexMatrix, sv: &[f64], v: &ComplexMatrix, r: usize, k: usize, p: usize) -> Svd {
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(Ordering::Equal));
    let mut su = zeros(r, p);
    let mut sw = zeros(k, p);
    let mut sigma = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sw.set_column(dst, &v.column(src));
        sigma.push(sv[src]);
    }
    Svd { u: su, sigma, v: sw }
}

fn svd_is_accurate(m: &ComplexMatrix, s: &Svd) -> bool {
    let p = s.sigma.len();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let bound = 1e-12 * (m.nrows().max(m.ncols()) as f64).max(1.0);
    let sig = real_diag(&s.sigma);
    let recon = (m - &s.u * sig * s.v.adjoint()).norm() / scale;
    let ou = (s.u.adjoint() * &s.u - identity(p)).norm();
    let ov = (s.v.adjoint() * &s.v - identity(p)).norm();
    recon.is_finite() && recon <= bound && ou <= bound && ov <= bound
}

/// One-sided Jacobi on the columns of a tall copy of `m`.
fn jacobi_svd(m: &ComplexMatrix) -> Svd {
    let (r, k) = m.shape();
    if r < k {
        let s = jacobi_svd(&m.adjoint());
        return Svd { u: s.v, sigma: s.sigma, v: s.u };
    }
    let mut a = m.clone();
    let mut v = identity(k);
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * libm::sqrt(alpha * beta) || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let cs = 1.0 / libm::sqrt(1.0 + t * t);
                let sn = cs * t;
                for (mat, rows) in [(&mut a, r), (&mut v, k)] {
                    for i in 0..rows {
                        let x = mat[(i, p)];
                        let y = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = x * cs - y * sn;
                        mat[(i, q)] = x * sn + y * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let mut u = zeros(r, k);
    for j in 0..k {
        if sv[j] > f64::EPSILON * smax * k as f64 && sv[j] > 0.0 {
            u.set_column(j, &(a.column(j) / c(sv[j], 0.0)));
        }
    }
    let s = sorted_svd(&u, &sv, &v, r, k, k);
    Svd { u: complete_columns(s.u, &s.sigma, smax, k), sigma: s.sigma, v: s.v }
}

/// Replaces the columns belonging to negligible singular values by an
/// orthonormal completion of the others.
fn complete_columns(mut u: ComplexMatrix, sigma: &[f64], smax: f64, k: usize) -> ComplexMatrix {
    let r = u.nrows();
    let good = sigma.iter().take_while(|&&x| x > f64::EPSILON * smax * k as f64 && x > 0.0).count();
    for j in good..sigma.len() {
        let mut best = zeros(r, 1).column(0).into_owned();
        let mut best_norm = -1.0;
        for e in 0..r {
            let mut cand = basis_vector(r, e);
            for i in 0..j {
                let proj = u.column(i).dotc(&cand);
                cand -= u.column(i) * proj;
            }
            let n = cand.norm();
            if n > best_norm {
                best_norm = n;
                best = cand;
            }
        }
        u.set_column(j, &(best / c(best_norm, 0.0)));
    }
    u
}

/// Hermitian eigendecomposition, eigenvalues sorted descending.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let dec = sym.clone().symmetric_eigen();
    let vals: Vec<f64> = dec.eigenvalues.as_slice().to_vec();
    let (vals, vecs) =
        if eigen_is_accurate(&sym, &vals, &dec.eigenvectors) { (vals, dec.eigenvectors) } else { jacobi_eigen(&sym) };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(Ordering::Equal));
    let mut out = zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        out.set_column(dst, &vecs.column(src));
        sorted.push(vals[src]);
    }
    (sorted, out)
}

fn eigen_is_accurate(h: &ComplexMatrix, vals: &[f64], vecs: &ComplexMatrix) -> bool {
    let n = h.nrows();
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let bound = 1e-12 * (n as f64).max(1.0);
    let recon = (h * vecs - vecs * real_diag(vals)).norm() / scale;
    let orth = (vecs.adjoint() * vecs - identity(n)).norm();
    recon.is_finite() && recon <= bound && orth <= bound
}

/// Cyclic Jacobi for a Hermitian matrix.
fn jacobi_eigen(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = identity(n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        let floor = f64::EPSILON * a.norm();
        if off <= floor * floor {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g == 0.0 {
                    continue;
                }
                let phase = apq / g;
                let zeta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * g);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta)) };
                let cs = 1.0 / libm::sqrt(1.0 + t * t);
                let sn = cs * t;
                // G = diag(.., e^{-iφ} at q, ..) followed by the real rotation on (p, q).
                for i in 0..n {
                    let x = a[(i, p)];
                    let y = a[(i, q)] * phase.conj();
                    a[(i, p)] = x * cs - y * sn;
                    a[(i, q)] = x * sn + y * cs;
                    let x = v[(i, p)];
                    let y = v[(i, q)] * phase.conj();
                    v[(i, p)] = x * cs - y * sn;
                    v[(i, q)] = x * sn + y * cs;
                }
                for j in 0..n {
                    let x = a[(p, j)];
                    let y = a[(q, j)] * phase;
                    a[(p, j)] = x * cs - y * sn;
                    a[(q, j)] = x * sn + y * cs;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

pub fn rank(m: &ComplexMatrix, tol: Tolerance) -> usize {
    let s = svd(m);
    let smax = s.sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let cut = tol.rank_cutoff(smax, m.nrows(), m.ncols());
    s.sigma.iter().filter(|&&x| x > cut).count()
}

/// Orthonormal basis of the column space, as columns.
pub fn range_basis(m: &ComplexMatrix, tol: Tolerance) -> ComplexMatrix {
    range_basis_scaled(m, 0.0, tol)
}

/// [`range_basis`] with singular values compared against `max(σ_max, reference)`.
pub fn range_basis_scaled(m: &ComplexMatrix, reference: f64, tol: Tolerance) -> ComplexMatrix {
    let s = svd(m);
    let smax = s.sigma.first().copied().unwrap_or(0.0).max(reference);
    if smax == 0.0 {
        return zeros(m.nrows(), 0);
    }
    let cut = tol.rank_cutoff(smax, m.nrows(), m.ncols());
    let r = s.sigma.iter().filter(|&&x| x > cut).count();
    s.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the kernel, as columns.
///
/// `reference` is the natural size of the constraint data; singular values
/// are compared against `max(σ_max, reference)` so that a system made of pure
/// rounding noise is recognized as zero.
pub fn null_space(m: &ComplexMatrix, reference: f64, tol: Tolerance) -> ComplexMatrix {
    null_space_of_blocks(core::slice::from_ref(m), m.ncols(), reference, tol)
}

/// Kernel of the vertically stacked blocks, all with `cols` columns.
///
/// Very tall systems go through the normal equations; the rank cutoff scales
/// with the row count there, which keeps it above the squared-conditioning
/// noise floor.
pub fn null_space_of_blocks(blocks: &[ComplexMatrix], cols: usize, reference: f64, tol: Tolerance) -> ComplexMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    if cols == 0 {
        return zeros(0, 0);
    }
    if rows == 0 {
        return identity(cols);
    }
    if rows > NORMAL_EQUATION_ROWS && rows > 8 * cols {
        let mut gram = zeros(cols, cols);
        for b in blocks {
            gram += b.adjoint() * b;
        }
        let (vals, vecs) = hermitian_eigen(&gram);
        let smax = libm::sqrt(vals[0].max(0.0)).max(reference);
        let cut = tol.rank_cutoff(smax, rows, cols);
        let keep: Vec<usize> = (0..cols).filter(|&i| libm::sqrt(vals[i].max(0.0)) <= cut).collect();
        return select_columns(&vecs, &keep);
    }
    let padded = rows.max(cols);
    let mut stacked = zeros(padded, cols);
    let mut at = 0;
    for b in blocks {
        stacked.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        at += b.nrows();
    }
    // Tall systems are first reduced to their square R factor, which has the
    // same singular values and kernel.
    let reduced = if rows > cols { stacked.qr().r() } else { stacked };
    let s = svd(&reduced);
    let smax = s.sigma.first().copied().unwrap_or(0.0).max(reference);
    let cut = tol.rank_cutoff(smax, rows, cols);
    let keep: Vec<usize> = (0..cols).filter(|&i| smax == 0.0 || s.sigma[i] <= cut).collect();
    select_columns(&s.v, &keep)
}

pub(crate) fn select_columns(m: &ComplexMatrix, idx: &[usize]) -> ComplexMatrix {
    let mut out = zeros(m.nrows(), idx.len());
    for (dst, &src) in idx.iter().enumerate() {
        out.set_column(dst, &m.column(src));
    }
    out
}

/// Moore–Penrose pseudo-inverse under the rank rule.
pub fn pseudo_inverse(m: &ComplexMatrix, tol: Tolerance) -> ComplexMatrix {
    let s = svd(m);
    let smax = s.sigma.first().copied().unwrap_or(0.0);
    let mut out = zeros(m.ncols(), m.nrows());
    if smax == 0.0 {
        return out;
    }
    let cut = tol.rank_cutoff(smax, m.nrows(), m.ncols());
    for (i, &x) in s.sigma.iter().enumerate() {
        if x > cut {
            out += s.v.column(i) * s.u.column(i).adjoint() * c(1.0 / x, 0.0);
        }
    }
    out
}

/// Inverse of a square matrix that must be well conditioned under the rank rule.
pub fn inverse(m: &ComplexMatrix, tol: Tolerance) -> Result<ComplexMatrix> {
    if m.nrows() != m.ncols() {
        return Err(dim_err(format!("cannot invert a {}x{} matrix", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    if rank(m, tol) < n {
        return Err(Error::Numeric(format!("{n}x{n} matrix is singular")));
    }
    m.clone().try_inverse().ok_or_else(|| Error::Numeric(format!("{n}x{n} matrix is singular")))
}

/// Unitary part `U V*` of the polar decomposition of an invertible matrix.
pub fn polar_unitary(m: &ComplexMatrix) -> ComplexMatrix {
    let s = svd(m);
    &s.u * s.v.adjoint()
}

/// Apply `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d: Vec<C64> = vals.iter().map(|&x| c(f(x), 0.0)).collect();
    &vecs * diag(&d) * vecs.adjoint()
}

/// Matrix exponential of `i·t·h` for Hermitian `h`.
pub fn unitary_exp(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let (vals, vecs) = hermitian_eigen(h);
    let d: Vec<C64> = vals.iter().map(|&x| C64::from_polar(1.0, t * x)).collect();
    &vecs * diag(&d) * vecs.adjoint()
}

// ── subspaces ──

/// A subspace of `L(C^cols, C^rows)` with a Hilbert–Schmidt orthonormal basis.
#[derive(Clone, Debug)]
pub struct OperatorSubspace {
    rows: usize,
    cols: usize,
    basis: Vec<ComplexMatrix>,
    /// Vectorized basis as the columns of a `(rows·cols) × dim` matrix.
    stacked: ComplexMatrix,
}

impl OperatorSubspace {
    pub fn zero(rows: usize, cols: usize) -> Self {
        OperatorSubspace { rows, cols, basis: Vec::new(), stacked: zeros(rows * cols, 0) }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        let mut basis = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                basis.push(unit(rows, cols, i, j));
            }
        }
        Self::from_orthonormal(rows, cols, basis)
    }

    /// Span of `mats`, inferring the shape from the first element.
    pub fn span(mats: &[ComplexMatrix], tol: Tolerance) -> Result<Self> {
        match mats.first() {
            None => Ok(Self::zero(0, 0)),
            Some(m) => Self::span_in(m.nrows(), m.ncols(), mats, tol),
        }
    }

    pub fn span_in(rows: usize, cols: usize, mats: &[ComplexMatrix], tol: Tolerance) -> Result<Self> {
        let n = rows * cols;
        let mut v = zeros(n, mats.len());
        for (k, m) in mats.iter().enumerate() {
            if m.shape() != (rows, cols) {
                return Err(dim_err(format!("span expects {rows}x{cols} operators, got {}x{}", m.nrows(), m.ncols())));
            }
            v.column_mut(k).copy_from_slice(m.as_slice());
        }
        Ok(Self::from_stacked_columns(rows, cols, &range_basis(&v, tol)))
    }

    /// Span of the columns of `q`, each a vectorized operator; columns must be orthonormal.
    pub(crate) fn from_stacked_columns(rows: usize, cols: usize, q: &ComplexMatrix) -> Self {
        let basis = (0..q.ncols()).map(|j| unvectorize(q.column(j).as_slice(), rows, cols)).collect();
        OperatorSubspace { rows, cols, basis, stacked: q.clone() }
    }

    /// Wrap a basis that is already orthonormal.
    pub(crate) fn from_orthonormal(rows: usize, cols: usize, basis: Vec<ComplexMatrix>) -> Self {
        let mut stacked = zeros(rows * cols, basis.len());
        for (k, b) in basis.iter().enumerate() {
            stacked.column_mut(k).copy_from_slice(b.as_slice());
        }
        OperatorSubspace { rows, cols, basis, stacked }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn stacked(&self) -> &ComplexMatrix {
        &self.stacked
    }

    fn check_shape(&self, x: &ComplexMatrix) -> Result<()> {
        if x.shape() != (self.rows, self.cols) {
            return Err(dim_err(format!(
                "operator of shape {}x{} tested against a subspace of {}x{} operators",
                x.nrows(),
                x.ncols(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }

    /// Hilbert–Schmidt coordinates of the orthogonal projection of `x`.
    pub fn coordinates(&self, x: &ComplexMatrix) -> Result<ComplexVector> {
        self.check_shape(x)?;
        let v = ComplexVector::from_column_slice(x.as_slice());
        Ok(self.stacked.adjoint() * v)
    }

    pub fn element(&self, coords: &[C64]) -> ComplexMatrix {
        let mut out = zeros(self.rows, self.cols);
        for (b, &w) in self.basis.iter().zip(coords) {
            out += b * w;
        }
        out
    }

    pub fn project(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let coords = self.coordinates(x)?;
        Ok(self.element(coords.as_slice()))
    }

    /// `‖x - P x‖` for the orthogonal projection `P` onto this subspace.
    pub fn residual(&self, x: &ComplexMatrix) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    pub fn contains(&self, x: &ComplexMatrix, tol: Tolerance) -> Result<bool> {
        Ok(self.residual(x)? <= tol.check() * x.norm().max(1.0))
    }

    /// `‖Gram − I‖` of the stored basis.
    pub fn orthonormality_residual(&self) -> f64 {
        let g = self.stacked.adjoint() * &self.stacked;
        (g - identity(self.dim())).norm()
    }

    pub fn orthogonal_complement(&self, tol: Tolerance) -> Self {
        let n = self.rows * self.cols;
        let p = identity(n) - &self.stacked * self.stacked.adjoint();
        Self::from_stacked_columns(self.rows, self.cols, &range_basis_scaled(&p, 1.0, tol))
    }

    /// Largest projection residual of `other`'s basis against this subspace.
    pub fn excess_of(&self, other: &OperatorSubspace) -> Result<f64> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(dim_err(format!(
                "comparing subspaces of {}x{} and {}x{} operators",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut worst: f64 = 0.0;
        for b in &other.basis {
            worst = worst.max(self.residual(b)?);
        }
        Ok(worst)
    }
}

/// Symmetric projection distance: the largest residual of either basis against the other subspace.
pub fn subspace_distance(a: &OperatorSubspace, b: &OperatorSubspace) -> Result<f64> {
    Ok(a.excess_of(b)?.max(b.excess_of(a)?))
}

pub fn subspace_equal(a: &OperatorSubspace, b: &OperatorSubspace, tol: Tolerance) -> Result<bool> {
    Ok(subspace_distance(a, b)? <= tol.epsilon())
}

/// `{X : X·src_k = dst_k·X for all k}` for `X: C^cols → C^rows`.
pub fn intertwiner_space(
    src: &[ComplexMatrix],
    dst: &[ComplexMatrix],
    rows: usize,
    cols: usize,
    tol: Tolerance,
) -> Result<OperatorSubspace> {
    if src.len() != dst.len() {
        return Err(dim_err("intertwiner constraints need matching image lists"));
    }
    let id_out = identity(rows);
    let id_in = identity(cols);
    let mut blocks = Vec::with_capacity(src.len());
    let mut reference: f64 = 0.0;
    for (s, d) in src.iter().zip(dst) {
        reference = reference.max(s.norm() + d.norm());
        if s.shape() != (cols, cols) || d.shape() != (rows, rows) {
            return Err(dim_err("intertwiner constraint shapes do not match the carrier spaces"));
        }
        blocks.push(kron(&s.transpose(), &id_out) - kron(&id_in, d));
    }
    let ns = null_space_of_blocks(&blocks, rows * cols, reference, tol);
    Ok(OperatorSubspace::from_stacked_columns(rows, cols, &ns))
}

// ── quotients ──

/// Realization of the quotient of `C^n` by the null space of a PSD Gram matrix.
#[derive(Clone, Debug)]
pub struct Quotient {
    /// `q` with `q·G·q* = I`.
    pub co_isometry: ComplexMatrix,
    /// Class map `E = q·G`, sending a plain vector to its class coordinates.
    pub class_map: ComplexMatrix,
    /// Right inverse of the class map (`E·section = I`).
    pub section: ComplexMatrix,
}

impl Quotient {
    pub fn dim(&self) -> usize {
        self.co_isometry.nrows()
    }
}

pub fn null_space_quotient(gram: &ComplexMatrix, tol: Tolerance) -> Result<Quotient> {
    let n = gram.nrows();
    if gram.ncols() != n {
        return Err(dim_err("Gram matrix must be square"));
    }
    if !is_finite(gram) {
        return Err(Error::Numeric("Gram matrix has non-finite entries".into()));
    }
    let scale = gram.norm().max(1.0);
    let herm = hermitian_residual(gram);
    if herm > tol.check() * scale {
        return Err(Error::Numeric(format!("Gram matrix is not Hermitian (residual {herm:.3e})")));
    }
    let (vals, vecs) = hermitian_eigen(gram);
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let cut = tol.rank_cutoff(lmax, n, n);
    if let Some(&lmin) = vals.last() {
        if lmin < -(cut.max(tol.check() * scale)) {
            return Err(Error::Numeric(format!("Gram matrix is not positive semidefinite (eigenvalue {lmin:.3e})")));
        }
    }
    let r = vals.iter().filter(|&&x| x > cut).count();
    let mut q = zeros(r, n);
    let mut e = zeros(r, n);
    for i in 0..r {
        let s = libm::sqrt(vals[i]);
        let row = vecs.column(i).adjoint();
        q.row_mut(i).copy_from(&(&row * c(1.0 / s, 0.0)));
        e.row_mut(i).copy_from(&(&row * c(s, 0.0)));
    }
    let section = q.adjoint();
    Ok(Quotient { co_isometry: q, class_map: e, section })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, k: usize, seed: u64) -> ComplexMatrix {
        let mut rng = crate::rng::SeededRng::new(seed);
        rng.gaussian_matrix(r, k)
    }

    #[test]
    fn jacobi_fallbacks_are_accurate() {
        for (r, k) in [(7, 3), (3, 7), (5, 5)] {
            let mut m = sample(r, k, 11);
            m.set_column(0, &(m.column(1) * c(2.0, -1.0)));
            let s = jacobi_svd(&m);
            assert!(svd_is_accurate(&m, &s));
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            if r >= k {
                assert!(s.sigma[s.sigma.len() - 1] < 1e-12);
            }
        }
        let x = sample(6, 6, 5);
        let h = &x + x.adjoint();
        let (vals, vecs) = jacobi_eigen(&h);
        assert!(eigen_is_accurate(&h, &vals, &vecs));
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn collinear_span_is_one_dimensional() {
        let s = OperatorSubspace::span(&[identity(2), identity(2) * c(2.0, 0.0)], tol()).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn matrix_units_span_everything() {
        let mats: Vec<_> = (0..2).flat_map(|i| (0..2).map(move |j| unit(2, 2, i, j))).collect();
        let s = OperatorSubspace::span(&mats, tol()).unwrap();
        assert_eq!(s.dim(), 4);
        assert!(s.orthonormality_residual() < 1e-12);
    }

    #[test]
    fn empty_span() {
        assert_eq!(OperatorSubspace::span(&[], tol()).unwrap().dim(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let r = OperatorSubspace::span(&[identity(2), identity(3)], tol());
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn subspace_equality_examples() {
        let t = tol();
        let sp = |m: &[ComplexMatrix]| OperatorSubspace::span(m, t).unwrap();
        assert!(subspace_equal(&sp(&[identity(2)]), &sp(&[identity(2) * c(3.0, 0.0)]), t).unwrap());
        assert!(!subspace_equal(&sp(&[identity(2)]), &sp(&[unit(2, 2, 0, 0)]), t).unwrap());
        // Projecting the diagonal units onto span{I, Z} by hand: E11 = (I+Z)/2, E22 = (I-Z)/2.
        let z = real_diag(&[1.0, -1.0]);
        let a = sp(&[unit(2, 2, 0, 0), unit(2, 2, 1, 1)]);
        let b = sp(&[identity(2), z]);
        assert!(subspace_equal(&a, &b, t).unwrap());
    }

    #[test]
    fn quotient_of_identity_and_projection() {
        let q = null_space_quotient(&identity(4), tol()).unwrap();
        assert_eq!(q.dim(), 4);
        assert!(unitarity_residual(&q.co_isometry) < 1e-12);
        let g = real_diag(&[1.0, 1.0, 0.0, 0.0]);
        let q = null_space_quotient(&g, tol()).unwrap();
        assert_eq!(q.dim(), 2);
        let back = &q.co_isometry * &g * q.co_isometry.adjoint();
        assert!(distance(&back, &identity(2)) < 1e-12);
        assert!(distance(&(&q.class_map * &q.section), &identity(2)) < 1e-12);
    }

    #[test]
    fn quotient_rejects_indefinite_gram() {
        let g = real_diag(&[1.0, -0.5]);
        assert!(matches!(null_space_quotient(&g, tol()), Err(Error::Numeric(_))));
    }

    #[test]
    fn intertwiners_of_diagonal_action_are_diagonal() {
        let d = [real_diag(&[1.0, 2.0])];
        let s = intertwiner_space(&d, &d, 2, 2, tol()).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.contains(&unit(2, 2, 1, 1), tol()).unwrap());
        assert!(!s.contains(&unit(2, 2, 0, 1), tol()).unwrap());
    }

    #[test]
    fn tall_null_space_uses_normal_equations_consistently() {
        // 5000 copies of the constraint x1 = x2 in C^3: kernel is span{(1,1,0),(0,0,1)}.
        let mut row = zeros(1, 3);
        row[(0, 0)] = c(1.0, 0.0);
        row[(0, 1)] = c(-1.0, 0.0);
        let blocks: Vec<_> = (0..5000).map(|_| row.clone()).collect();
        let ns = null_space_of_blocks(&blocks, 3, 1.0, tol());
        assert_eq!(ns.ncols(), 2);
        assert!((row * ns).norm() < 1e-10);
    }

    #[test]
    fn pseudo_inverse_of_rank_one() {
        let v = ComplexVector::from_column_slice(&[c(1.0, 0.0), c(0.0, 1.0)]);
        let m = &v * v.adjoint();
        let p = pseudo_inverse(&m, tol());
        assert!(distance(&(&m * &p * &m), &m) < 1e-12);
    }
}
