//! Relative tensor products of Hilbert spaces, over a faithful state and over a
//! standard C*-base, together with the operators living on them.
//!
//! Every relative tensor space is stored as a quotient of a plain tensor
//! product. The *Hilbert class map* sends a vector of the plain product
//! `H ⊗ K` to its class, given in orthonormal coordinates of the quotient,
//! and the *Hilbert section* is a right inverse of it. Operators on relative
//! tensor spaces are always matrices in these orthonormal coordinates.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cbase::{cbase_from_gns, CStarBase};
use crate::cfact::{factorization_from_rep, CStarFactorization};
use crate::error::{dim_err, pre_err, Error, Result};
use crate::gns::{orbit, GnsTriple, StateContext};
use crate::linalg::{
    basis_vector, column, identity, inverse, kron, kron_vec, null_space_quotient, subspace_distance,
    unitarity_residual, zeros, ComplexMatrix, ComplexVector, OperatorSubspace, Quotient, Tolerance,
};
use crate::staralg::{AlgebraMap, Multiplicativity, StarAlgebra};

// ── legs ──

/// Whether a leg represents `N` itself or its opposite algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegKind {
    /// A representation of `N` (the `σ`-type legs).
    Algebra,
    /// A representation of `N^op`, stored as an anti-homomorphism of `N` (the `ρ`-type legs).
    Opposite,
}

/// A representation of `N` or `N^op` on `C^dim`, stored by the images of the basis of `N`.
#[derive(Clone, Debug)]
pub struct Leg {
    kind: LegKind,
    dim: usize,
    images: Vec<ComplexMatrix>,
}

impl Leg {
    /// Certify a faithful, nondegenerate, unital representation.
    pub fn new(algebra: &StarAlgebra, kind: LegKind, images: Vec<ComplexMatrix>, tol: Tolerance) -> Result<Self> {
        let map = AlgebraMap::from_images(algebra, images)?;
        let (rows, cols) = map.shape();
        if rows != cols {
            return Err(dim_err("leg images must be square"));
        }
        let mult = match kind {
            LegKind::Algebra => Multiplicativity::Homomorphism,
            LegKind::Opposite => Multiplicativity::AntiHomomorphism,
        };
        let r = map.residuals(algebra, mult)?;
        let thr = tol.check() * libm::sqrt(rows as f64).max(1.0);
        if r.worst() > thr {
            return Err(pre_err(format!("leg is not a unital *-representation (residual {:.3e})", r.worst())));
        }
        if !map.is_faithful(tol) || !map.is_nondegenerate(tol) {
            return Err(pre_err("leg must be faithful and nondegenerate"));
        }
        Ok(Leg { kind, dim: rows, images: map.images().to_vec() })
    }

    pub(crate) fn unchecked(kind: LegKind, dim: usize, images: Vec<ComplexMatrix>) -> Self {
        Leg { kind, dim, images }
    }

    pub fn kind(&self) -> LegKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn images(&self) -> &[ComplexMatrix] {
        &self.images
    }

    /// Largest commutator with another leg on the same space.
    pub fn commutator(&self, other: &Leg) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.images {
            for b in &other.images {
                worst = worst.max((a * b - b * a).norm());
            }
        }
        worst
    }
}

/// Which GNS space a state-based product is balanced over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `H ⊗ K` with an `N^op`-leg on `H` and an `N`-leg on `K`, over `μ`.
    Direct,
    /// `H ⊗ K` with an `N`-leg on `H` and an `N^op`-leg on `K`, over `μ` on `N^op`.
    Opposite,
}

impl Side {
    pub fn of(left: LegKind, right: LegKind) -> Result<Side> {
        match (left, right) {
            (LegKind::Opposite, LegKind::Algebra) => Ok(Side::Direct),
            (LegKind::Algebra, LegKind::Opposite) => Ok(Side::Opposite),
            _ => Err(pre_err("a relative tensor product needs legs of opposite kinds")),
        }
    }
}

fn side_gns(ctx: &StateContext, side: Side) -> &GnsTriple {
    match side {
        Side::Direct => ctx.gns(),
        Side::Opposite => ctx.transposed_gns(),
    }
}

/// `R(e_i)` for every basis vector, where `R(ξ)` sends `π(b_k)ζ` (for the
/// representation whose orbit matrix is `orbit`) to `leg(b_k)ξ`.
fn r_matrices(leg: &Leg, orbit: &ComplexMatrix, tol: Tolerance) -> Result<Vec<ComplexMatrix>> {
    let inv = inverse(orbit, tol)?;
    let d = leg.images.len();
    let mut out = Vec::with_capacity(leg.dim);
    for i in 0..leg.dim {
        let mut x = zeros(leg.dim, d);
        for (k, img) in leg.images.iter().enumerate() {
            x.set_column(k, &img.column(i));
        }
        out.push(x * &inv);
    }
    Ok(out)
}

// ── linkage between a state and a base ──

/// A standard base linked to the GNS data of a faithful state by a unitary
/// `U: ℌ → H_μ` with `Uζ = ζ_μ`, `Ad_U(𝔅) = π_μ(N)` and `Ad_U(𝔅†) = π_μ^op(N^op)`.
#[derive(Clone, Debug)]
pub struct Linkage {
    ctx: Arc<StateContext>,
    base: CStarBase,
    unitary: ComplexMatrix,
    unitary_op: ComplexMatrix,
    residual: f64,
}

impl Linkage {
    /// The base of `μ` itself with `U = I`.
    pub fn canonical(ctx: Arc<StateContext>, tol: Tolerance) -> Result<Self> {
        let base = cbase_from_gns(ctx.gns(), tol)?;
        let n = base.dim();
        Self::new(ctx, base, identity(n), tol)
    }

    /// The canonical base moved by a unitary `W` on `H_μ`, linked by `U = W*`.
    pub fn conjugated(ctx: Arc<StateContext>, w: &ComplexMatrix, tol: Tolerance) -> Result<Self> {
        let base = cbase_from_gns(ctx.gns(), tol)?.conjugate_by(w)?;
        Self::new(ctx, base, w.adjoint(), tol)
    }

    pub fn new(ctx: Arc<StateContext>, base: CStarBase, unitary: ComplexMatrix, tol: Tolerance) -> Result<Self> {
        let g = ctx.gns();
        let n = g.dim();
        if base.dim() != n || unitary.shape() != (n, n) {
            return Err(dim_err("linking unitary does not map the base onto the GNS space"));
        }
        let zeta = base.zeta()?;
        let mut residual = unitarity_residual(&unitary);
        residual = residual.max((&unitary * zeta - g.zeta()).norm());
        let moved = base.b().conjugate_by(&unitary)?;
        let pi = OperatorSubspace::span_in(n, n, g.pi_images(), tol)?;
        residual = residual.max(subspace_distance(moved.subspace(), &pi)?);
        let moved = base.b_dag().conjugate_by(&unitary)?;
        let pi_op = OperatorSubspace::span_in(n, n, g.pi_op_images(), tol)?;
        residual = residual.max(subspace_distance(moved.subspace(), &pi_op)?);
        if residual > tol.check() * (n as f64).max(1.0) {
            return Err(pre_err(format!("unitary does not link base and state (residual {residual:.3e})")));
        }
        // W: π_μ^op(b)ζ_μ ↦ π_{μᵀ}(bᵀ)ζ_{μᵀ} identifies the two GNS spaces.
        let w = ctx.transposed_gns().orbit() * inverse(&g.op_orbit(), tol)?;
        let wres = unitarity_residual(&w);
        if wres > tol.check() * (n as f64).max(1.0) {
            return Err(Error::Numeric(format!("transposed GNS spaces are not isometric (residual {wres:.3e})")));
        }
        let unitary_op = w * &unitary;
        Ok(Linkage { ctx, base, unitary, unitary_op, residual })
    }

    pub fn context(&self) -> &Arc<StateContext> {
        &self.ctx
    }

    pub fn base(&self) -> &CStarBase {
        &self.base
    }

    /// Worst residual of the linking conditions.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `U` for the direct side, `W U` into the transposed GNS space otherwise.
    pub fn unitary(&self, side: Side) -> &ComplexMatrix {
        match side {
            Side::Direct => &self.unitary,
            Side::Opposite => &self.unitary_op,
        }
    }

    /// The factorization `L^ρ` whose representation matches a leg through
    /// `ρ = ρ_α ∘ Ad_{U*} ∘ π_μ^op` (or `σ = ρ_β ∘ Ad_{U*} ∘ π_μ`).
    pub fn factorization(&self, leg: &Leg, tol: Tolerance) -> Result<CStarFactorization> {
        let g = self.ctx.gns();
        let u = &self.unitary;
        let (base, pis) = match leg.kind {
            LegKind::Opposite => (self.base.clone(), g.pi_op_images()),
            LegKind::Algebra => (self.base.opposite(), g.pi_images()),
        };
        let xs: Vec<ComplexMatrix> = pis.iter().map(|p| u.adjoint() * p * u).collect();
        let rho = AlgebraMap::from_pairs(base.b_dag(), &xs, &leg.images, tol)?;
        factorization_from_rep(&base, &rho, tol)
    }
}

// ── relative tensor spaces ──

/// Where a relative tensor space came from.
#[derive(Clone, Debug)]
pub enum Provenance {
    State { ctx: Arc<StateContext>, side: Side, left: Leg, right: Leg },
    CStar { left: CStarFactorization, right: CStarFactorization },
}

/// A realized relative tensor product `H ⊗ K`.
#[derive(Clone, Debug)]
pub struct RelativeTensorSpace {
    left_dim: usize,
    right_dim: usize,
    gram: ComplexMatrix,
    quotient: Quotient,
    hilbert_class: ComplexMatrix,
    hilbert_section: ComplexMatrix,
    provenance: Provenance,
}

impl RelativeTensorSpace {
    pub fn dim(&self) -> usize {
        self.quotient.dim()
    }

    pub fn left_dim(&self) -> usize {
        self.left_dim
    }

    pub fn right_dim(&self) -> usize {
        self.right_dim
    }

    /// Gram matrix of the defining form in construction coordinates
    /// (`H ⊗ K` for the state flavor, `α ⊗ β` for the C*-flavor).
    pub fn gram(&self) -> &ComplexMatrix {
        &self.gram
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }

    pub fn co_isometry(&self) -> &ComplexMatrix {
        &self.quotient.co_isometry
    }

    /// Class map from the plain product `H ⊗ K`.
    pub fn hilbert_class(&self) -> &ComplexMatrix {
        &self.hilbert_class
    }

    /// Right inverse of [`hilbert_class`](Self::hilbert_class).
    pub fn hilbert_section(&self) -> &ComplexMatrix {
        &self.hilbert_section
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_state_based(&self) -> bool {
        matches!(self.provenance, Provenance::State { .. })
    }

    pub fn flavor_name(&self) -> &'static str {
        match self.provenance {
            Provenance::State { .. } => "state",
            Provenance::CStar { .. } => "cstar",
        }
    }

    /// `‖q G q* − I‖`.
    pub fn quotient_residual(&self) -> f64 {
        let q = &self.quotient.co_isometry;
        (q * &self.gram * q.adjoint() - identity(self.dim())).norm()
    }

    /// The class of `ξ ⊗ η`.
    pub fn class_of(&self, xi: &ComplexVector, eta: &ComplexVector) -> Result<ComplexVector> {
        if xi.len() != self.left_dim || eta.len() != self.right_dim {
            return Err(dim_err("vectors do not live on the factors"));
        }
        Ok(&self.hilbert_class * kron_vec(xi, eta))
    }

    /// Factorizations of a C*-relative tensor product.
    pub fn factorizations(&self) -> Result<(&CStarFactorization, &CStarFactorization)> {
        match &self.provenance {
            Provenance::CStar { left, right } => Ok((left, right)),
            Provenance::State { .. } => Err(pre_err("space is not a C*-relative tensor product")),
        }
    }

    /// Legs of a state-based relative tensor product.
    pub fn legs(&self) -> Result<(&Leg, &Leg)> {
        match &self.provenance {
            Provenance::State { left, right, .. } => Ok((left, right)),
            Provenance::CStar { .. } => Err(pre_err("space is not a state-based relative tensor product")),
        }
    }
}

/// `G[(i,j),(i',j')] = ⟨a_{i,i'}, b_{j,j'}⟩` from vectors indexed `i·h + i'` and `j·k + j'`.
fn assemble_gram(a: &[ComplexVector], h: usize, b: &[ComplexVector], k: usize) -> ComplexMatrix {
    let d = a.first().map_or(0, |v| v.len());
    let mut am = zeros(h * h, d);
    for (r, v) in a.iter().enumerate() {
        am.row_mut(r).copy_from(&v.adjoint());
    }
    let mut bm = zeros(d, k * k);
    for (c, v) in b.iter().enumerate() {
        bm.set_column(c, v);
    }
    let p = am * bm;
    let mut g = zeros(h * k, h * k);
    for i in 0..h {
        for ip in 0..h {
            for j in 0..k {
                for jp in 0..k {
                    g[(i * k + j, ip * k + jp)] = p[(i * h + ip, j * k + jp)];
                }
            }
        }
    }
    g
}

fn hermitize(g: ComplexMatrix) -> ComplexMatrix {
    (&g + g.adjoint()) * crate::linalg::c(0.5, 0.0)
}

/// The relative tensor product `H ⊗_μ K` of a leg pair over a faithful state.
pub fn rtp_state(ctx: &Arc<StateContext>, left: &Leg, right: &Leg, tol: Tolerance) -> Result<RelativeTensorSpace> {
    let side = Side::of(left.kind, right.kind)?;
    let d = ctx.dim();
    if left.images.len() != d || right.images.len() != d {
        return Err(dim_err("legs are not indexed by the basis of N"));
    }
    let g = side_gns(ctx, side);
    let zeta = g.zeta();
    let rl = r_matrices(left, &g.op_orbit(), tol)?;
    let rr = r_matrices(right, &g.orbit(), tol)?;
    let (h, k) = (left.dim, right.dim);
    let mut a = Vec::with_capacity(h * h);
    for i in 0..h {
        let v = &rl[i] * zeta;
        for ip in 0..h {
            a.push(rl[ip].adjoint() * &v);
        }
    }
    let mut b = Vec::with_capacity(k * k);
    for j in 0..k {
        for jp in 0..k {
            b.push(rr[j].adjoint() * (&rr[jp] * zeta));
        }
    }
    let gram = hermitize(assemble_gram(&a, h, &b, k));
    let quotient = null_space_quotient(&gram, tol)?;
    let hilbert_class = quotient.class_map.clone();
    let hilbert_section = quotient.section.clone();
    Ok(RelativeTensorSpace {
        left_dim: h,
        right_dim: k,
        gram,
        quotient,
        hilbert_class,
        hilbert_section,
        provenance: Provenance::State { ctx: ctx.clone(), side, left: left.clone(), right: right.clone() },
    })
}

fn same_base(left: &CStarBase, right: &CStarBase, tol: Tolerance) -> Result<()> {
    if left.dim() != right.dim() {
        return Err(dim_err("factorizations live over bases of different dimensions"));
    }
    let d = left.opposite().distance(right)?;
    let zl = left.zeta()?;
    let zr = right.zeta()?;
    if d > tol.check() || (zl - zr).norm() > tol.check() {
        return Err(dim_err(format!(
            "right factorization is not over the opposite of the left base (distance {d:.3e})"
        )));
    }
    Ok(())
}

/// The C*-relative tensor product `α ⊳ ℌ ⊲ β`.
///
/// Realized on the vectors `ξ ⊳ ζ ⊲ η` for the bicyclic vector `ζ`; these span
/// the whole space because `𝔅ζ = ℌ`.
pub fn rtp_cstar(left: &CStarFactorization, right: &CStarFactorization, tol: Tolerance) -> Result<RelativeTensorSpace> {
    same_base(left.base(), right.base(), tol)?;
    let zeta = left.base().zeta()?;
    let xs = left.alpha().basis();
    let ys = right.alpha().basis();
    let (h, k) = (xs.len(), ys.len());
    let mut a = Vec::with_capacity(h * h);
    for x in xs {
        let v = x * zeta;
        for xp in xs {
            a.push(xp.adjoint() * &v);
        }
    }
    let mut b = Vec::with_capacity(k * k);
    for y in ys {
        for yp in ys {
            b.push(y.adjoint() * (yp * zeta));
        }
    }
    let gram = hermitize(assemble_gram(&a, h, &b, k));
    let quotient = null_space_quotient(&gram, tol)?;
    let hilbert_class = &quotient.class_map * kron(left.coordinate_map(), right.coordinate_map());
    let hilbert_section = kron(left.embedding(), right.embedding()) * &quotient.section;
    Ok(RelativeTensorSpace {
        left_dim: left.h_dim(),
        right_dim: right.h_dim(),
        gram,
        quotient,
        hilbert_class,
        hilbert_section,
        provenance: Provenance::CStar { left: left.clone(), right: right.clone() },
    })
}

// ── kets and bras ──

/// Which factor a ket inserts into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KetLeg {
    /// `|ξ⟩₁: K → H ⊗ K`, `ηζ ↦ ξ ⊳ ζ ⊲ η`.
    First,
    /// `|η⟩₂: H → H ⊗ K`, `ξζ ↦ ξ ⊳ ζ ⊲ η`.
    Second,
}

#[derive(Clone, Debug)]
pub struct KetOperator {
    pub leg: KetLeg,
    pub matrix: ComplexMatrix,
}

impl KetOperator {
    pub fn bra(&self) -> ComplexMatrix {
        self.matrix.adjoint()
    }
}

/// `|x⟩₁` for `x ∈ α` or `|x⟩₂` for `x ∈ β`.
pub fn ket(space: &RelativeTensorSpace, leg: KetLeg, x: &ComplexMatrix, tol: Tolerance) -> Result<KetOperator> {
    let (f, g) = space.factorizations()?;
    let e = &space.quotient.class_map;
    let matrix = match leg {
        KetLeg::First => {
            let c = f.coordinates(x, tol)?;
            e * kron(&column(&c), g.coordinate_map())
        }
        KetLeg::Second => {
            let c = g.coordinates(x, tol)?;
            e * kron(f.coordinate_map(), &column(&c))
        }
    };
    Ok(KetOperator { leg, matrix })
}

/// Kets of every basis element of the left (`First`) or right (`Second`) factorization.
pub fn kets(space: &RelativeTensorSpace, leg: KetLeg) -> Result<Vec<ComplexMatrix>> {
    let (f, g) = space.factorizations()?;
    let e = &space.quotient.class_map;
    let out = match leg {
        KetLeg::First => {
            (0..f.dim()).map(|i| e * kron(&column(&basis_vector(f.dim(), i)), g.coordinate_map())).collect()
        }
        KetLeg::Second => {
            (0..g.dim()).map(|j| e * kron(f.coordinate_map(), &column(&basis_vector(g.dim(), j)))).collect()
        }
    };
    Ok(out)
}

/// Worst deviation of `⟨ξ|₁|ξ'⟩₁ = ρ_β(ξ*ξ')` and `⟨η|₂|η'⟩₂ = ρ_α(η*η')` on basis pairs.
pub fn ket_relation_residual(space: &RelativeTensorSpace) -> Result<f64> {
    let (f, g) = space.factorizations()?;
    let k1 = kets(space, KetLeg::First)?;
    let k2 = kets(space, KetLeg::Second)?;
    let mut worst: f64 = 0.0;
    for (x, kx) in f.alpha().basis().iter().zip(&k1) {
        for (y, ky) in f.alpha().basis().iter().zip(&k1) {
            let lhs = kx.adjoint() * ky;
            let rhs = g.rho().apply(g.base().b_dag(), &(x.adjoint() * y))?;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    for (x, kx) in g.alpha().basis().iter().zip(&k2) {
        for (y, ky) in g.alpha().basis().iter().zip(&k2) {
            let lhs = kx.adjoint() * ky;
            let rhs = f.rho().apply(f.base().b_dag(), &(x.adjoint() * y))?;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

/// Residuals of the identifications `ξ ⊳ ηζ ≡ ξ ⊳ ζ ⊲ η ≡ ξζ ⊲ η` and of the
/// reduced realization against the full form on `α ⊗ ℌ ⊗ β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Identification {
    /// Worst disagreement of the three embeddings on basis pairs.
    pub embeddings: f64,
    /// `‖G_full − M* G M‖` with `M` absorbing the middle vector into `α`.
    pub through_left: f64,
    /// The same with the middle vector absorbed into `β`.
    pub through_right: f64,
}

impl Identification {
    pub fn worst(&self) -> f64 {
        self.embeddings.max(self.through_left).max(self.through_right)
    }
}

pub fn identification(space: &RelativeTensorSpace, tol: Tolerance) -> Result<Identification> {
    let (f, g) = space.factorizations()?;
    let base = f.base();
    let zeta = base.zeta()?;
    let e = &space.quotient.class_map;
    let (h, k) = (f.dim(), g.dim());
    let n = base.dim();
    let k1 = kets(space, KetLeg::First)?;
    let k2 = kets(space, KetLeg::Second)?;
    let mut embeddings: f64 = 0.0;
    for (i, x) in f.alpha().basis().iter().enumerate() {
        for (j, y) in g.alpha().basis().iter().enumerate() {
            let mid = e.column(i * k + j).clone_owned();
            let one = &k1[i] * (y * zeta);
            let two = &k2[j] * (x * zeta);
            embeddings = embeddings.max((&one - &mid).norm()).max((&two - &mid).norm());
        }
    }
    // Full form ⟨ξ⊳x⊲η | ξ'⊳x'⊲η'⟩ = ⟨x, ξ*ξ' η*η' x'⟩ on basis triples.
    let xs = f.alpha().basis();
    let ys = g.alpha().basis();
    let m = h * n * k;
    let idx = |i: usize, p: usize, j: usize| (i * n + p) * k + j;
    let mut full = zeros(m, m);
    for (i, x) in xs.iter().enumerate() {
        for (ip, xp) in xs.iter().enumerate() {
            let ax = x.adjoint() * xp;
            for (j, y) in ys.iter().enumerate() {
                for (jp, yp) in ys.iter().enumerate() {
                    let op = &ax * y.adjoint() * yp;
                    for p in 0..n {
                        for pp in 0..n {
                            full[(idx(i, p, j), idx(ip, pp, jp))] = op[(p, pp)];
                        }
                    }
                }
            }
        }
    }
    // x = bζ with b ∈ 𝔅 gives ξ ⊳ x ⊲ η = ξb ⊳ ζ ⊲ η; likewise x = b†ζ gives ξ ⊳ ζ ⊲ ηb†.
    let absorb = |alg: &StarAlgebra, fact: &CStarFactorization| -> Result<Vec<ComplexMatrix>> {
        let inv = inverse(&orbit(alg.basis(), zeta), tol)?;
        let mut out = Vec::with_capacity(n);
        for p in 0..n {
            let mut b = zeros(n, n);
            for (t, bt) in alg.basis().iter().enumerate() {
                b += bt * inv[(t, p)];
            }
            let moved: Vec<ComplexMatrix> = fact.alpha().basis().iter().map(|x| x * &b).collect();
            let mut coords = zeros(fact.dim(), fact.dim());
            for (i, mv) in moved.iter().enumerate() {
                coords.set_column(i, &fact.coordinates(mv, tol)?);
            }
            out.push(coords);
        }
        Ok(out)
    };
    let via_left = absorb(base.b(), f)?;
    let via_right = absorb(base.b_dag(), g)?;
    let mut ml = zeros(h * k, m);
    let mut mr = zeros(h * k, m);
    for p in 0..n {
        for i in 0..h {
            for j in 0..k {
                let col = idx(i, p, j);
                for a in 0..h {
                    ml[(a * k + j, col)] += via_left[p][(a, i)];
                }
                for b in 0..k {
                    mr[(i * k + b, col)] += via_right[p][(b, j)];
                }
            }
        }
    }
    let through_left = (&full - ml.adjoint() * &space.gram * &ml).norm();
    let through_right = (&full - mr.adjoint() * &space.gram * &mr).norm();
    Ok(Identification { embeddings, through_left, through_right })
}

// ── the unitary between the two products ──

#[derive(Clone, Debug)]
pub struct PhiReport {
    pub matrix: ComplexMatrix,
    /// Worst deviation of the legs from `ρ_α ∘ Ad_{U*} ∘ π` on the basis of `N`.
    pub linkage: f64,
    /// `‖E_c M − Φ E_s‖`: the formula respects the null spaces.
    pub well_defined: f64,
    pub unitarity: f64,
}

impl PhiReport {
    pub fn worst(&self) -> f64 {
        self.linkage.max(self.well_defined).max(self.unitarity)
    }
}

/// `Φ: ξ ⊗_μ η ↦ R(ξ)U ⊳ ζ ⊲ R(η)U`.
pub fn phi_unitary(
    rs: &RelativeTensorSpace,
    rc: &RelativeTensorSpace,
    linkage: &Linkage,
    tol: Tolerance,
) -> Result<PhiReport> {
    let (ctx, side, l, r) = match &rs.provenance {
        Provenance::State { ctx, side, left, right } => (ctx, *side, left, right),
        Provenance::CStar { .. } => return Err(pre_err("first space must be state-based")),
    };
    let (gamma, delta) = rc.factorizations()?;
    if !Arc::ptr_eq(ctx, linkage.context()) && ctx.dim() != linkage.context().dim() {
        return Err(pre_err("linkage belongs to a different state"));
    }
    if rs.left_dim != rc.left_dim || rs.right_dim != rc.right_dim {
        return Err(dim_err("the two products are built on different factors"));
    }
    let g = side_gns(ctx, side);
    let u = linkage.unitary(side);
    let mut linkage_res: f64 = 0.0;
    for (pi, img) in g.pi_op_images().iter().zip(&l.images) {
        let x = u.adjoint() * pi * u;
        let dom = gamma.base().b_dag();
        linkage_res = linkage_res.max(dom.residual(&x)?);
        linkage_res = linkage_res.max((gamma.rho().apply(dom, &x)? - img).norm());
    }
    for (pi, img) in g.pi_images().iter().zip(&r.images) {
        let x = u.adjoint() * pi * u;
        let dom = delta.base().b_dag();
        linkage_res = linkage_res.max(dom.residual(&x)?);
        linkage_res = linkage_res.max((delta.rho().apply(dom, &x)? - img).norm());
    }
    if linkage_res > tol.check() * libm::sqrt(rs.left_dim.max(rs.right_dim) as f64).max(1.0) {
        return Err(pre_err(format!("legs are not linked to the factorizations (residual {linkage_res:.3e})")));
    }
    let rl = r_matrices(l, &g.op_orbit(), tol)?;
    let rr = r_matrices(r, &g.orbit(), tol)?;
    let mut a = zeros(gamma.dim(), rs.left_dim);
    for (i, m) in rl.iter().enumerate() {
        a.set_column(i, &gamma.coordinates(&(m * u), tol)?);
    }
    let mut b = zeros(delta.dim(), rs.right_dim);
    for (j, m) in rr.iter().enumerate() {
        b.set_column(j, &delta.coordinates(&(m * u), tol)?);
    }
    let ec = &rc.quotient.class_map;
    let ecm = ec * kron(&a, &b);
    let matrix = &ecm * &rs.quotient.section;
    let well_defined = (&ecm - &matrix * &rs.quotient.class_map).norm();
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::Inconsistent(format!("products have different dimensions ({} and {})", rc.dim(), rs.dim())));
    }
    let unitarity = unitarity_residual(&matrix);
    Ok(PhiReport { matrix, linkage: linkage_res, well_defined, unitarity })
}

// ── operators on relative tensor spaces ──

fn relative(res: f64, scale: f64) -> f64 {
    res / scale.max(1.0)
}

/// An operator induced on a relative tensor space together with the residual
/// of its well-definedness check.
#[derive(Clone, Debug)]
pub struct Induced {
    pub matrix: ComplexMatrix,
    /// Relative residual; for C*-products it includes the membership of the
    /// transported factorization elements.
    pub residual: f64,
}

/// `S ⊗ T` induced between two relative tensor spaces, without failing.
///
/// For state-based spaces this is `E_out (S ⊗ T) E_in⁺`. For C*-relative
/// tensor products `S` and `T` must carry the factorizations of the input
/// into those of the output; the lift is formed in factorization coordinates.
pub fn induced(
    out: &RelativeTensorSpace,
    input: &RelativeTensorSpace,
    s: &ComplexMatrix,
    t: &ComplexMatrix,
) -> Result<Induced> {
    if s.shape() != (out.left_dim, input.left_dim) || t.shape() != (out.right_dim, input.right_dim) {
        return Err(dim_err("lifted operators do not match the factors"));
    }
    let (pushed, lifted, e_in, membership) = match (&out.provenance, &input.provenance) {
        (Provenance::CStar { left: lo, right: ro }, Provenance::CStar { left: li, right: ri }) => {
            let (ms, r1) = transport_coordinates(s, li, lo)?;
            let (mt, r2) = transport_coordinates(t, ri, ro)?;
            let pushed = &out.quotient.class_map * kron(&ms, &mt);
            let lifted = &pushed * &input.quotient.section;
            (pushed, lifted, &input.quotient.class_map, r1.max(r2))
        }
        _ => {
            let pushed = &out.hilbert_class * kron(s, t);
            let lifted = &pushed * &input.hilbert_section;
            (pushed, lifted, &input.hilbert_class, 0.0)
        }
    };
    let res = relative((&pushed - &lifted * e_in).norm(), pushed.norm());
    Ok(Induced { matrix: lifted, residual: res.max(membership) })
}

/// [`induced`], failing when the operator is not well defined.
pub fn lift_between(
    out: &RelativeTensorSpace,
    input: &RelativeTensorSpace,
    s: &ComplexMatrix,
    t: &ComplexMatrix,
    tol: Tolerance,
) -> Result<ComplexMatrix> {
    let ind = induced(out, input, s, t)?;
    if ind.residual > tol.check() {
        return Err(Error::NotWellDefined {
            what: String::from("the relative tensor product"),
            residual: ind.residual,
        });
    }
    Ok(ind.matrix)
}

/// Coordinates of the projections of `S ξ_i` onto the output factorization,
/// for the basis `ξ_i` of the input one, and the worst relative membership residual.
fn transport_coordinates(
    s: &ComplexMatrix,
    from: &CStarFactorization,
    to: &CStarFactorization,
) -> Result<(ComplexMatrix, f64)> {
    let mut m = zeros(to.dim(), from.dim());
    let mut worst: f64 = 0.0;
    for (i, x) in from.alpha().basis().iter().enumerate() {
        let y = s * x;
        worst = worst.max(relative(to.alpha().residual(&y)?, y.norm()));
        m.set_column(i, &to.alpha().coordinates(&y)?);
    }
    Ok((m, worst))
}

/// `S ⊗ T` on a single relative tensor space.
pub fn lift_operator(
    space: &RelativeTensorSpace,
    s: &ComplexMatrix,
    t: &ComplexMatrix,
    tol: Tolerance,
) -> Result<ComplexMatrix> {
    lift_between(space, space, s, t, tol)
}

/// The flipped space `K ⊗ H` and the unitary `ξ ⊗ η ↦ η ⊗ ξ` onto it.
pub fn flip(space: &RelativeTensorSpace, tol: Tolerance) -> Result<(RelativeTensorSpace, ComplexMatrix)> {
    let flipped = match &space.provenance {
        Provenance::State { ctx, left, right, .. } => rtp_state(ctx, right, left, tol)?,
        Provenance::CStar { left, right } => rtp_cstar(right, left, tol)?,
    };
    let sigma = &flipped.hilbert_class * swap_matrix(space.left_dim, space.right_dim) * &space.hilbert_section;
    Ok((flipped, sigma))
}

/// The permutation `e_i ⊗ f_j ↦ f_j ⊗ e_i` from `C^h ⊗ C^k` to `C^k ⊗ C^h`.
pub fn swap_matrix(h: usize, k: usize) -> ComplexMatrix {
    let mut p = zeros(h * k, h * k);
    for i in 0..h {
        for j in 0..k {
            p[(j * h + i, i * k + j)] = crate::linalg::c(1.0, 0.0);
        }
    }
    p
}

// ── flavors and derived legs ──

/// The two ways of forming relative tensor products, seen uniformly.
///
/// `on_left(X, ε)` is `ε` acting on the left factor of `X` and `on_right(X, ε)`
/// the same on the right factor; for the state flavor these are the lifted
/// legs `ε ⊗ 1` and `1 ⊗ ε`, for the C*-flavor the factorizations `ε ◁ δ`
/// and `γ ▷ ε` of the product `γ ⊳ ℌ ⊲ δ`.
pub trait Flavor {
    type Leg: Clone;

    fn name(&self) -> &'static str;
    fn two_fold(&self, left: &Self::Leg, right: &Self::Leg) -> Result<RelativeTensorSpace>;
    fn on_left(&self, space: &RelativeTensorSpace, leg: &Self::Leg) -> Result<Self::Leg>;
    fn on_right(&self, space: &RelativeTensorSpace, leg: &Self::Leg) -> Result<Self::Leg>;
    fn tolerance(&self) -> Tolerance;
}

#[derive(Clone, Debug)]
pub struct StateFlavor {
    pub ctx: Arc<StateContext>,
    pub tol: Tolerance,
}

impl Flavor for StateFlavor {
    type Leg = Leg;

    fn name(&self) -> &'static str {
        "state"
    }

    fn two_fold(&self, left: &Leg, right: &Leg) -> Result<RelativeTensorSpace> {
        rtp_state(&self.ctx, left, right, self.tol)
    }

    fn on_left(&self, space: &RelativeTensorSpace, leg: &Leg) -> Result<Leg> {
        let id = identity(space.right_dim);
        let images = leg.images.iter().map(|m| lift_operator(space, m, &id, self.tol)).collect::<Result<Vec<_>>>()?;
        Ok(Leg::unchecked(leg.kind, space.dim(), images))
    }

    fn on_right(&self, space: &RelativeTensorSpace, leg: &Leg) -> Result<Leg> {
        let id = identity(space.left_dim);
        let images = leg.images.iter().map(|m| lift_operator(space, &id, m, self.tol)).collect::<Result<Vec<_>>>()?;
        Ok(Leg::unchecked(leg.kind, space.dim(), images))
    }

    fn tolerance(&self) -> Tolerance {
        self.tol
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CStarFlavor {
    pub tol: Tolerance,
}

impl Flavor for CStarFlavor {
    type Leg = CStarFactorization;

    fn name(&self) -> &'static str {
        "cstar"
    }

    fn two_fold(&self, left: &CStarFactorization, right: &CStarFactorization) -> Result<RelativeTensorSpace> {
        rtp_cstar(left, right, self.tol)
    }

    /// `ε ◁ δ = [|δ⟩₂ ε]`.
    fn on_left(&self, space: &RelativeTensorSpace, eps: &CStarFactorization) -> Result<CStarFactorization> {
        if eps.h_dim() != space.left_dim {
            return Err(dim_err("factorization does not act on the left factor"));
        }
        let k2 = kets(space, KetLeg::Second)?;
        derived(space, &k2, eps, self.tol)
    }

    /// `γ ▷ ε = [|γ⟩₁ ε]`.
    fn on_right(&self, space: &RelativeTensorSpace, eps: &CStarFactorization) -> Result<CStarFactorization> {
        if eps.h_dim() != space.right_dim {
            return Err(dim_err("factorization does not act on the right factor"));
        }
        let k1 = kets(space, KetLeg::First)?;
        derived(space, &k1, eps, self.tol)
    }

    fn tolerance(&self) -> Tolerance {
        self.tol
    }
}

fn derived(
    space: &RelativeTensorSpace,
    kets: &[ComplexMatrix],
    eps: &CStarFactorization,
    tol: Tolerance,
) -> Result<CStarFactorization> {
    let mut mats = Vec::with_capacity(kets.len() * eps.dim());
    for k in kets {
        for e in eps.alpha().basis() {
            mats.push(k * e);
        }
    }
    CStarFactorization::new(eps.base(), space.dim(), &mats, tol)
}

// ── triple products ──

/// Bracketing of a triple product `H₁ ⊗ H₂ ⊗ H₃`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bracketing {
    /// `(H₁ ⊗ H₂) ⊗ H₃`.
    Left,
    /// `H₁ ⊗ (H₂ ⊗ H₃)`.
    Right,
}

/// A triple relative tensor product, viewed as a quotient of the plain triple product.
#[derive(Clone, Debug)]
pub struct TripleSpace {
    pub space: RelativeTensorSpace,
    pub bracketing: Bracketing,
    class: ComplexMatrix,
    section: ComplexMatrix,
}

impl TripleSpace {
    pub fn new(space: RelativeTensorSpace, inner: &RelativeTensorSpace, bracketing: Bracketing) -> Result<Self> {
        let (class, section) = match bracketing {
            Bracketing::Left => {
                if space.left_dim != inner.dim() {
                    return Err(dim_err("inner product is not the left factor"));
                }
                let id = identity(space.right_dim);
                (
                    &space.hilbert_class * kron(&inner.hilbert_class, &id),
                    kron(&inner.hilbert_section, &id) * &space.hilbert_section,
                )
            }
            Bracketing::Right => {
                if space.right_dim != inner.dim() {
                    return Err(dim_err("inner product is not the right factor"));
                }
                let id = identity(space.left_dim);
                (
                    &space.hilbert_class * kron(&id, &inner.hilbert_class),
                    kron(&id, &inner.hilbert_section) * &space.hilbert_section,
                )
            }
        };
        Ok(TripleSpace { space, bracketing, class, section })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Class map from the plain triple product.
    pub fn class(&self) -> &ComplexMatrix {
        &self.class
    }

    pub fn section(&self) -> &ComplexMatrix {
        &self.section
    }
}

/// The map between two triple products induced by a permutation of the plain
/// factors (`None` for the identity), with its well-definedness residual.
///
/// `perm[p]` names the input factor that lands in output position `p`.
pub fn triple_transfer(
    out: &TripleSpace,
    input: &TripleSpace,
    dims: [usize; 3],
    perm: Option<[usize; 3]>,
) -> Result<Induced> {
    let pushed = match perm {
        None => out.class.clone(),
        Some(p) => &out.class * permutation3(dims, p),
    };
    if pushed.ncols() != input.class.ncols() {
        return Err(dim_err("triple products have different plain factors"));
    }
    let m = &pushed * &input.section;
    let residual = relative((&pushed - &m * &input.class).norm(), pushed.norm());
    Ok(Induced { matrix: m, residual })
}

/// Permutation matrix from `C^{d0} ⊗ C^{d1} ⊗ C^{d2}` to the reordered product.
pub fn permutation3(dims: [usize; 3], perm: [usize; 3]) -> ComplexMatrix {
    let n = dims[0] * dims[1] * dims[2];
    let od = [dims[perm[0]], dims[perm[1]], dims[perm[2]]];
    let mut p = zeros(n, n);
    for a in 0..dims[0] {
        for b in 0..dims[1] {
            for cc in 0..dims[2] {
                let src = [a, b, cc];
                let dst = [src[perm[0]], src[perm[1]], src[perm[2]]];
                let row = (dst[0] * od[1] + dst[1]) * od[2] + dst[2];
                let col = (a * dims[1] + b) * dims[2] + cc;
                p[(row, col)] = crate::linalg::c(1.0, 0.0);
            }
        }
    }
    p
}
