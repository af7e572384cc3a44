//! Concrete finite-dimensional *-algebras of operators and maps between them.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{dim_err, pre_err, Error, Result};
use crate::linalg::{
    c, hermitian_eigen, identity, null_space_of_blocks, pseudo_inverse, rank, select_columns, zeros, ComplexMatrix,
    ComplexVector, OperatorSubspace, Tolerance,
};
use crate::rng::SeededRng;

const CENTRAL_DRAW_SEED: u64 = 0x5eed_cafe;
const COMMUTANT_DRAW_SEED: u64 = 0xc0_77a7;
const CENTRAL_DRAW_RETRIES: usize = 8;

/// A *-subalgebra of `L(C^n)` stored by an orthonormal basis.
#[derive(Clone, Debug)]
pub struct StarAlgebra {
    carrier_dim: usize,
    basis: OperatorSubspace,
}

/// Residuals of the algebra axioms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraResiduals {
    pub adjoint: f64,
    pub product: f64,
    /// Smallest eigenvalue of `Σ b b*` relative to the largest; zero means degenerate.
    pub support: f64,
}

impl StarAlgebra {
    pub fn full(n: usize) -> Self {
        StarAlgebra { carrier_dim: n, basis: OperatorSubspace::full(n, n) }
    }

    pub fn scalars(n: usize) -> Self {
        let b = identity(n) * c(1.0 / libm::sqrt(n as f64), 0.0);
        StarAlgebra { carrier_dim: n, basis: OperatorSubspace::from_orthonormal(n, n, alloc::vec![b]) }
    }

    /// Smallest *-algebra containing `generators` (and `I` when requested).
    pub fn closure(
        carrier_dim: usize,
        generators: &[ComplexMatrix],
        include_unit: bool,
        tol: Tolerance,
    ) -> Result<Self> {
        let n = carrier_dim;
        let mut gens: Vec<ComplexMatrix> = Vec::new();
        for g in generators {
            if g.shape() != (n, n) {
                return Err(dim_err(format!("generator of shape {}x{} on C^{n}", g.nrows(), g.ncols())));
            }
            gens.push(g.clone());
            gens.push(g.adjoint());
        }
        let mut seed = gens.clone();
        if include_unit {
            seed.push(identity(n));
        }
        // Keep a well-scaled generating set: the span's own basis.
        let g_basis = OperatorSubspace::span_in(n, n, &gens, tol)?.basis().to_vec();
        let mut s = OperatorSubspace::span_in(n, n, &seed, tol)?;
        loop {
            let mut next: Vec<ComplexMatrix> = s.basis().to_vec();
            for b in s.basis() {
                for g in &g_basis {
                    next.push(b * g);
                    next.push(g * b);
                }
            }
            let grown = OperatorSubspace::span_in(n, n, &next, tol)?;
            if grown.dim() == s.dim() {
                break;
            }
            s = grown;
        }
        Ok(StarAlgebra { carrier_dim: n, basis: s })
    }

    /// Algebra spanned by `mats`, which must already be closed under products and adjoints.
    pub fn from_spanning_set(carrier_dim: usize, mats: &[ComplexMatrix], tol: Tolerance) -> Result<Self> {
        let basis = OperatorSubspace::span_in(carrier_dim, carrier_dim, mats, tol)?;
        let alg = StarAlgebra { carrier_dim, basis };
        alg.require_closed(tol)?;
        Ok(alg)
    }

    /// Algebra with a prescribed orthonormal basis, whose order is preserved.
    pub fn with_basis(carrier_dim: usize, basis: Vec<ComplexMatrix>, tol: Tolerance) -> Result<Self> {
        for b in &basis {
            if b.shape() != (carrier_dim, carrier_dim) {
                return Err(dim_err("basis element does not act on the carrier space"));
            }
        }
        let sub = OperatorSubspace::from_orthonormal(carrier_dim, carrier_dim, basis);
        if sub.orthonormality_residual() > tol.check() {
            return Err(pre_err("prescribed algebra basis is not orthonormal"));
        }
        let alg = StarAlgebra { carrier_dim, basis: sub };
        alg.require_closed(tol)?;
        Ok(alg)
    }

    pub(crate) fn from_subspace(carrier_dim: usize, basis: OperatorSubspace) -> Self {
        StarAlgebra { carrier_dim, basis }
    }

    fn require_closed(&self, tol: Tolerance) -> Result<()> {
        let r = self.residuals();
        let scale = (self.carrier_dim as f64).max(1.0);
        if r.adjoint > tol.check() * scale || r.product > tol.check() * scale {
            return Err(pre_err(format!(
                "span is not a *-algebra (adjoint residual {:.3e}, product residual {:.3e})",
                r.adjoint, r.product
            )));
        }
        Ok(())
    }

    pub fn carrier_dim(&self) -> usize {
        self.carrier_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        self.basis.basis()
    }

    pub fn subspace(&self) -> &OperatorSubspace {
        &self.basis
    }

    pub fn coordinates(&self, x: &ComplexMatrix) -> Result<ComplexVector> {
        self.basis.coordinates(x)
    }

    pub fn residual(&self, x: &ComplexMatrix) -> Result<f64> {
        self.basis.residual(x)
    }

    pub fn contains(&self, x: &ComplexMatrix, tol: Tolerance) -> Result<bool> {
        self.basis.contains(x, tol)
    }

    /// Worst membership residual of a family of operators.
    pub fn excess(&self, xs: &[ComplexMatrix]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in xs {
            worst = worst.max(self.residual(x)?);
        }
        Ok(worst)
    }

    pub fn residuals(&self) -> AlgebraResiduals {
        let b = self.basis();
        let mut adjoint: f64 = 0.0;
        let mut product: f64 = 0.0;
        let full = self.dim() == self.carrier_dim * self.carrier_dim;
        for x in b {
            adjoint = adjoint.max(self.residual(&x.adjoint()).unwrap_or(f64::INFINITY));
            if !full {
                for y in b {
                    product = product.max(self.residual(&(x * y)).unwrap_or(f64::INFINITY));
                }
            }
        }
        AlgebraResiduals { adjoint, product, support: self.support_ratio() }
    }

    fn support_ratio(&self) -> f64 {
        let n = self.carrier_dim;
        if n == 0 {
            return 1.0;
        }
        let mut s = zeros(n, n);
        for b in self.basis() {
            s += b * b.adjoint();
        }
        let (vals, _) = hermitian_eigen(&s);
        let top = vals[0];
        if top <= 0.0 {
            0.0
        } else {
            vals[n - 1].max(0.0) / top
        }
    }

    /// Nondegenerate: `[A·H] = H`.
    pub fn is_nondegenerate(&self, tol: Tolerance) -> bool {
        let n = self.carrier_dim;
        let mut s = zeros(n, n);
        for b in self.basis() {
            s += b * b.adjoint();
        }
        rank(&s, tol) == n
    }

    pub fn contains_unit(&self, tol: Tolerance) -> bool {
        self.contains(&identity(self.carrier_dim), tol).unwrap_or(false)
    }

    /// `{T : T b = b T for all b in mats}` on `C^n`.
    pub fn commutant_of(carrier_dim: usize, mats: &[ComplexMatrix], tol: Tolerance) -> Result<Self> {
        if mats.iter().any(|m| m.shape() != (carrier_dim, carrier_dim)) {
            return Err(dim_err("commutant generators do not act on the carrier space"));
        }
        let span = OperatorSubspace::span_in(carrier_dim, carrier_dim, mats, tol)?;
        let closed = span
            .basis()
            .iter()
            .all(|b| span.residual(&b.adjoint()).is_ok_and(|r| r <= tol.check() * (carrier_dim as f64).max(1.0)));
        if closed && !mats.is_empty() {
            return Ok(Self::commutant_of_star_closed(carrier_dim, span.basis(), tol));
        }
        let basis = crate::linalg::intertwiner_space(mats, mats, carrier_dim, carrier_dim, tol)?;
        Ok(StarAlgebra { carrier_dim, basis })
    }

    /// Commutant of a *-closed set. Anything commuting with the set commutes
    /// with a generic self-adjoint `h` in the algebra it generates, so it is
    /// block diagonal over the eigenspaces of `h`; only those blocks are solved for.
    fn commutant_of_star_closed(n: usize, mats: &[ComplexMatrix], tol: Tolerance) -> Self {
        let mut rng = SeededRng::new(COMMUTANT_DRAW_SEED);
        let mut h = zeros(n, n);
        for m in mats {
            let herm = m + m.adjoint();
            let skew = (m - m.adjoint()) * c(0.0, 1.0);
            h += herm * c(rng.gaussian(), 0.0) + skew * c(rng.gaussian(), 0.0);
        }
        let (vals, v) = hermitian_eigen(&h);
        let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        // Merging two nearby eigenvalues only enlarges the search space.
        let gap = 1e-6 * scale;
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || vals[i - 1] - vals[i] > gap {
                groups.push((start, i));
                start = i;
            }
        }
        let params: Vec<(usize, usize)> =
            groups.iter().flat_map(|&(a, b)| (a..b).flat_map(move |i| (a..b).map(move |j| (i, j)))).collect();
        let p = params.len();
        // In the eigenbasis: [m̃, e_i e_j*] = m̃[:, i] e_j* − e_i m̃[j, :].
        let mut blocks = Vec::with_capacity(mats.len());
        let mut reference: f64 = 0.0;
        for m in mats {
            let mt = v.adjoint() * m * &v;
            reference = reference.max(2.0 * mt.norm());
            let mut block = zeros(n * n, p);
            for (k, &(i, j)) in params.iter().enumerate() {
                for r in 0..n {
                    // column-major vec index: row + col·n
                    block[(r + j * n, k)] += mt[(r, i)];
                    block[(i + r * n, k)] -= mt[(j, r)];
                }
            }
            blocks.push(block);
        }
        let ns = null_space_of_blocks(&blocks, p, reference, tol);
        let mut basis = Vec::with_capacity(ns.ncols());
        for col in 0..ns.ncols() {
            let mut y = zeros(n, n);
            for (k, &(i, j)) in params.iter().enumerate() {
                y[(i, j)] = ns[(k, col)];
            }
            basis.push(&v * y * v.adjoint());
        }
        StarAlgebra { carrier_dim: n, basis: OperatorSubspace::from_orthonormal(n, n, basis) }
    }

    pub fn commutant(&self, tol: Tolerance) -> Result<Self> {
        Self::commutant_of(self.carrier_dim, self.basis(), tol)
    }

    pub fn center(&self, tol: Tolerance) -> Result<Self> {
        let n = self.carrier_dim;
        let k = self.dim();
        let b = self.basis();
        let mut blocks = Vec::with_capacity(k);
        for bj in b {
            let mut blk = zeros(n * n, k);
            for (i, bi) in b.iter().enumerate() {
                let comm = bi * bj - bj * bi;
                blk.column_mut(i).copy_from_slice(comm.as_slice());
            }
            blocks.push(blk);
        }
        let ns = null_space_of_blocks(&blocks, k, 2.0, tol);
        let elems: Vec<ComplexMatrix> = (0..ns.ncols()).map(|j| self.basis.element(ns.column(j).as_slice())).collect();
        Ok(StarAlgebra { carrier_dim: n, basis: OperatorSubspace::span_in(n, n, &elems, tol)? })
    }

    /// Minimal central projections, from the spectral projections of a generic
    /// self-adjoint central element.
    pub fn central_projections(&self, tol: Tolerance) -> Result<Vec<ComplexMatrix>> {
        if !self.contains_unit(tol) {
            return Err(pre_err("central projections need a unital algebra"));
        }
        let z = self.center(tol)?;
        let mut herm = Vec::with_capacity(2 * z.dim());
        for x in z.basis() {
            herm.push((x + x.adjoint()) * c(0.5, 0.0));
            herm.push((x - x.adjoint()) * c(0.0, -0.5));
        }
        let n = self.carrier_dim;
        let mut rng = SeededRng::new(CENTRAL_DRAW_SEED);
        for _ in 0..CENTRAL_DRAW_RETRIES {
            let mut h = zeros(n, n);
            for x in &herm {
                h += x * c(rng.uniform_in(-1.0, 1.0), 0.0);
            }
            let (vals, vecs) = hermitian_eigen(&h);
            let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let gap = 1e-6 * scale;
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for i in 0..n {
                match groups.last_mut() {
                    Some(g) if vals[g[g.len() - 1]] - vals[i] <= gap => g.push(i),
                    _ => groups.push(alloc::vec![i]),
                }
            }
            if groups.len() != z.dim() {
                continue;
            }
            let mut projections = Vec::with_capacity(groups.len());
            let mut ok = true;
            for g in groups.iter().rev() {
                let v = select_columns(&vecs, g);
                let p = &v * v.adjoint();
                if self.residual(&p)? > tol.check() * libm::sqrt(n as f64).max(1.0) {
                    ok = false;
                    break;
                }
                projections.push(p);
            }
            if ok {
                return Ok(projections);
            }
        }
        Err(Error::Numeric("no generic central element found".into()))
    }

    /// The algebra `{bᵀ}` with basis order preserved.
    pub fn transpose(&self) -> Self {
        let basis = self.basis().iter().map(|b| b.transpose()).collect();
        StarAlgebra {
            carrier_dim: self.carrier_dim,
            basis: OperatorSubspace::from_orthonormal(self.carrier_dim, self.carrier_dim, basis),
        }
    }

    /// `W A W*` for a unitary `W`, basis order preserved.
    pub fn conjugate_by(&self, w: &ComplexMatrix) -> Result<Self> {
        if w.shape() != (self.carrier_dim, self.carrier_dim) {
            return Err(dim_err("conjugating unitary does not act on the carrier space"));
        }
        let basis = self.basis().iter().map(|b| w * b * w.adjoint()).collect();
        Ok(StarAlgebra {
            carrier_dim: self.carrier_dim,
            basis: OperatorSubspace::from_orthonormal(self.carrier_dim, self.carrier_dim, basis),
        })
    }
}

// ── linear maps out of an algebra ──

/// Whether a map should respect products in the same or the reversed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplicativity {
    Homomorphism,
    AntiHomomorphism,
}

/// A linear map out of a [`StarAlgebra`], stored by the images of its basis.
#[derive(Clone, Debug)]
pub struct AlgebraMap {
    rows: usize,
    cols: usize,
    images: Vec<ComplexMatrix>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapResiduals {
    pub multiplicative: f64,
    pub star: f64,
    pub unital: f64,
}

impl MapResiduals {
    pub fn worst(&self) -> f64 {
        self.multiplicative.max(self.star).max(self.unital)
    }
}

impl AlgebraMap {
    /// `images[k]` is the image of the `k`-th basis element of the domain.
    pub fn from_images(domain: &StarAlgebra, images: Vec<ComplexMatrix>) -> Result<Self> {
        if images.len() != domain.dim() {
            return Err(dim_err(format!("{} images for an algebra of dimension {}", images.len(), domain.dim())));
        }
        let (rows, cols) = images.first().map(|m| m.shape()).unwrap_or((0, 0));
        if images.iter().any(|m| m.shape() != (rows, cols)) {
            return Err(dim_err("images of differing shapes"));
        }
        Ok(AlgebraMap { rows, cols, images })
    }

    /// Linear extension of `x_m ↦ y_m`, where the `x_m` span the domain.
    pub fn from_pairs(
        domain: &StarAlgebra,
        xs: &[ComplexMatrix],
        ys: &[ComplexMatrix],
        tol: Tolerance,
    ) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(dim_err("map needs matching, nonempty domain and image lists"));
        }
        let k = domain.dim();
        let m = xs.len();
        let mut coords = zeros(k, m);
        for (j, x) in xs.iter().enumerate() {
            let r = domain.residual(x)?;
            if r > tol.check() * x.norm().max(1.0) {
                return Err(Error::Membership { what: "the domain algebra".into(), residual: r });
            }
            coords.set_column(j, &domain.coordinates(x)?);
        }
        if rank(&coords, tol) < k {
            return Err(pre_err("domain elements do not span the algebra"));
        }
        let a = pseudo_inverse(&coords, tol);
        let (rows, cols) = ys[0].shape();
        if ys.iter().any(|y| y.shape() != (rows, cols)) {
            return Err(dim_err("images of differing shapes"));
        }
        let mut images = Vec::with_capacity(k);
        for kk in 0..k {
            let mut img = zeros(rows, cols);
            for (j, y) in ys.iter().enumerate() {
                img += y * a[(j, kk)];
            }
            images.push(img);
        }
        let map = AlgebraMap { rows, cols, images };
        // The pairs must be consistent with a linear map.
        for (x, y) in xs.iter().zip(ys) {
            let r = (map.apply(domain, x)? - y).norm();
            if r > tol.check() * y.norm().max(1.0) {
                return Err(pre_err(format!("pairs do not define a linear map (residual {r:.3e})")));
            }
        }
        Ok(map)
    }

    pub fn images(&self) -> &[ComplexMatrix] {
        &self.images
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn apply(&self, domain: &StarAlgebra, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let coords = domain.coordinates(x)?;
        let mut out = zeros(self.rows, self.cols);
        for (img, &w) in self.images.iter().zip(coords.iter()) {
            out += img * w;
        }
        Ok(out)
    }

    pub fn residuals(&self, domain: &StarAlgebra, kind: Multiplicativity) -> Result<MapResiduals> {
        let b = domain.basis();
        let mut multiplicative: f64 = 0.0;
        let mut star: f64 = 0.0;
        for (i, bi) in b.iter().enumerate() {
            star = star.max((self.apply(domain, &bi.adjoint())? - self.images[i].adjoint()).norm());
            for (j, bj) in b.iter().enumerate() {
                let lhs = self.apply(domain, &(bi * bj))?;
                let rhs = match kind {
                    Multiplicativity::Homomorphism => &self.images[i] * &self.images[j],
                    Multiplicativity::AntiHomomorphism => &self.images[j] * &self.images[i],
                };
                multiplicative = multiplicative.max((lhs - rhs).norm());
            }
        }
        let unital = if domain.contains_unit(Tolerance::default()) && self.rows == self.cols {
            (self.apply(domain, &identity(domain.carrier_dim()))? - identity(self.rows)).norm()
        } else {
            0.0
        };
        Ok(MapResiduals { multiplicative, star, unital })
    }

    /// Images linearly independent, i.e. the map is injective.
    pub fn is_faithful(&self, tol: Tolerance) -> bool {
        if self.images.is_empty() {
            return true;
        }
        let mut m = zeros(self.rows * self.cols, self.images.len());
        for (k, img) in self.images.iter().enumerate() {
            m.column_mut(k).copy_from_slice(img.as_slice());
        }
        rank(&m, tol) == self.images.len()
    }

    /// `[π(A) K] = K`.
    pub fn is_nondegenerate(&self, tol: Tolerance) -> bool {
        let mut s = zeros(self.rows, self.rows);
        for img in &self.images {
            s += img * img.adjoint();
        }
        rank(&s, tol) == self.rows
    }

    pub fn compose_after(&self, other: &AlgebraMap, mid: &StarAlgebra) -> Result<Vec<ComplexMatrix>> {
        other.images.iter().map(|x| self.apply(mid, x)).collect()
    }
}
