//! Fiber products of von Neumann and C*-algebras on relative tensor spaces,
//! morphisms of algebras carrying factorizations, and fiber products of morphisms.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cfact::CStarFactorization;
use crate::error::{dim_err, pre_err, Error, Result};
use crate::gns::combine;
use crate::linalg::{
    identity, inverse, kron, null_space_of_blocks, rank, subspace_distance, unitarity_residual, zeros, ComplexMatrix,
    OperatorSubspace, Tolerance,
};
use crate::rtensor::{induced, kets, lift_operator, KetLeg, Provenance, RelativeTensorSpace};
use crate::staralg::{AlgebraMap, Multiplicativity, StarAlgebra};

/// Which of the two fiber products an algebra is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiberFlavor {
    /// `(A′ ⊗ B′)′` on a state-based relative tensor product.
    Classical,
    /// The operators `T` with `T|α⟩₁, T*|α⟩₁ ⊆ [|α⟩₁B]` and `T|β⟩₂, T*|β⟩₂ ⊆ [|β⟩₂A]`.
    Spatial,
}

#[derive(Clone, Debug)]
pub struct FiberProductAlgebra {
    pub ambient: RelativeTensorSpace,
    pub algebra: StarAlgebra,
    pub flavor: FiberFlavor,
    pub left: StarAlgebra,
    pub right: StarAlgebra,
}

fn require_inside(alg: &StarAlgebra, xs: &[ComplexMatrix], what: &str, tol: Tolerance) -> Result<()> {
    for x in xs {
        let r = alg.residual(x)?;
        if r > tol.check() * x.norm().max(1.0) {
            return Err(pre_err(format!("{what} is not contained in the algebra (residual {r:.3e})")));
        }
    }
    Ok(())
}

/// `A ∗_μ B = (A′ ⊗_μ B′)′`.
pub fn fiber_classical(
    a: &StarAlgebra,
    b: &StarAlgebra,
    rs: &RelativeTensorSpace,
    tol: Tolerance,
) -> Result<FiberProductAlgebra> {
    let (l, r) = rs.legs()?;
    if a.carrier_dim() != rs.left_dim() || b.carrier_dim() != rs.right_dim() {
        return Err(dim_err("algebras do not act on the factors"));
    }
    require_inside(a, l.images(), "left leg", tol)?;
    require_inside(b, r.images(), "right leg", tol)?;
    let ih = identity(rs.left_dim());
    let ik = identity(rs.right_dim());
    let mut lifts = Vec::new();
    for s in a.commutant(tol)?.basis() {
        lifts.push(lift_operator(rs, s, &ik, tol)?);
    }
    for t in b.commutant(tol)?.basis() {
        lifts.push(lift_operator(rs, &ih, t, tol)?);
    }
    let algebra = StarAlgebra::commutant_of(rs.dim(), &lifts, tol)?;
    Ok(FiberProductAlgebra {
        ambient: rs.clone(),
        algebra,
        flavor: FiberFlavor::Classical,
        left: a.clone(),
        right: b.clone(),
    })
}

/// Row `r` with `r · vec(X) = tr(X M)` for `X` of shape `rows × cols` and `M` of shape `cols × rows`.
fn trace_row(m: &ComplexMatrix, rows: usize, cols: usize) -> ComplexMatrix {
    let mut out = zeros(1, rows * cols);
    for bcol in 0..cols {
        for arow in 0..rows {
            out[(0, arow + bcol * rows)] = m[(bcol, arow)];
        }
    }
    out
}

/// Linear constraints on `X: C^cols → C^rows` expressing `X·x ∈ W` and
/// `X*·y ∈ W'` for every `x` in `xs`, `y` in `ys`, where `W ⊆ L(·, C^rows)`
/// and `W' ⊆ L(·, C^cols)`.
///
/// `X x ∈ W` iff `⟨w, X x⟩ = tr(X x w*) = 0` for `w ⊥ W`, and
/// `X* y ∈ W'` iff `⟨y, X w⟩ = tr(X w y*) = 0` for `w ⊥ W'`; both are linear in `X`.
fn inclusion_rows(
    rows: usize,
    cols: usize,
    xs: &[ComplexMatrix],
    w: &OperatorSubspace,
    ys: &[ComplexMatrix],
    w_adj: &OperatorSubspace,
    tol: Tolerance,
) -> Vec<ComplexMatrix> {
    let mut out = Vec::new();
    let perp = w.orthogonal_complement(tol);
    for x in xs {
        let mut block = zeros(perp.dim(), rows * cols);
        for (i, p) in perp.basis().iter().enumerate() {
            block.row_mut(i).copy_from(&trace_row(&(x * p.adjoint()), rows, cols));
        }
        out.push(block);
    }
    let perp = w_adj.orthogonal_complement(tol);
    for y in ys {
        let mut block = zeros(perp.dim(), rows * cols);
        for (i, p) in perp.basis().iter().enumerate() {
            block.row_mut(i).copy_from(&trace_row(&(p * y.adjoint()), rows, cols));
        }
        out.push(block);
    }
    out
}

/// `A ∗_ℌ B` on `α ⊳ ℌ ⊲ β`: all `T` with `T|α⟩₁, T*|α⟩₁ ⊆ [|α⟩₁B]` and
/// `T|β⟩₂, T*|β⟩₂ ⊆ [|β⟩₂A]`, found as one null space.
pub fn fiber_spatial(
    a: &StarAlgebra,
    b: &StarAlgebra,
    rc: &RelativeTensorSpace,
    tol: Tolerance,
) -> Result<FiberProductAlgebra> {
    let (fa, fb) = rc.factorizations()?;
    if a.carrier_dim() != rc.left_dim() || b.carrier_dim() != rc.right_dim() {
        return Err(dim_err("algebras do not act on the factors"));
    }
    require_inside(a, fa.rho().images(), "ρ_α", tol)?;
    require_inside(b, fb.rho().images(), "ρ_β", tol)?;
    let d = rc.dim();
    let k1 = kets(rc, KetLeg::First)?;
    let k2 = kets(rc, KetLeg::Second)?;
    let span = |ks: &[ComplexMatrix], alg: &StarAlgebra, cols: usize| -> Result<OperatorSubspace> {
        let mut mats = Vec::new();
        for k in ks {
            for x in alg.basis() {
                mats.push(k * x);
            }
        }
        OperatorSubspace::span_in(d, cols, &mats, tol)
    };
    let w1 = span(&k1, b, rc.right_dim())?;
    let w2 = span(&k2, a, rc.left_dim())?;
    // T is d × d; here "X x ∈ W" with x = ket and "X* y ∈ W" with y = ket.
    let mut blocks = inclusion_rows(d, d, &k1, &w1, &[], &w1, tol);
    blocks.extend(inclusion_rows(d, d, &k2, &w2, &[], &w2, tol));
    blocks.extend(adjoint_rows(d, &k1, &w1, tol));
    blocks.extend(adjoint_rows(d, &k2, &w2, tol));
    // T|ξ⟩₁ ∈ [|α⟩₁B] forces T(1⊗b') = (1⊗b')T for b' ∈ B′ since the kets span,
    // and likewise T(a'⊗1) = (a'⊗1)T; the constraints are solved inside that commutant.
    let ih = identity(rc.left_dim());
    let ik = identity(rc.right_dim());
    let mut lifts = Vec::new();
    for s in a.commutant(tol)?.basis() {
        lifts.push(lift_operator(rc, s, &ik, tol)?);
    }
    for t in b.commutant(tol)?.basis() {
        lifts.push(lift_operator(rc, &ih, t, tol)?);
    }
    let outer = StarAlgebra::commutant_of(d, &lifts, tol)?;
    let frame = outer.subspace().stacked();
    let reduced: Vec<ComplexMatrix> = blocks.iter().map(|b| b * frame).collect();
    let reference = k1.iter().chain(&k2).map(|k| k.norm()).fold(1.0, f64::max);
    let ns = null_space_of_blocks(&reduced, frame.ncols(), reference, tol);
    let sub = OperatorSubspace::from_stacked_columns(d, d, &(frame * ns));
    let algebra = StarAlgebra::from_spanning_set(d, sub.basis(), tol)?;
    Ok(FiberProductAlgebra {
        ambient: rc.clone(),
        algebra,
        flavor: FiberFlavor::Spatial,
        left: a.clone(),
        right: b.clone(),
    })
}

/// `T* k ∈ W` for square `T`: `⟨k, T w⟩ = tr(T w k*) = 0` for `w ⊥ W`.
fn adjoint_rows(d: usize, ks: &[ComplexMatrix], w: &OperatorSubspace, tol: Tolerance) -> Vec<ComplexMatrix> {
    let perp = w.orthogonal_complement(tol);
    ks.iter()
        .map(|k| {
            let mut block = zeros(perp.dim(), d * d);
            for (i, p) in perp.basis().iter().enumerate() {
                block.row_mut(i).copy_from(&trace_row(&(p * k.adjoint()), d, d));
            }
            block
        })
        .collect()
}

// ── the isomorphism between the two fiber products ──

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsoReport {
    /// Distance between `Ad_Φ(A ∗_μ B)` and `A ∗_ℌ B`.
    pub residual: f64,
    pub equal: bool,
}

pub fn phi_iso(
    classical: &FiberProductAlgebra,
    spatial: &FiberProductAlgebra,
    phi: &ComplexMatrix,
    tol: Tolerance,
) -> Result<IsoReport> {
    if classical.flavor != FiberFlavor::Classical || spatial.flavor != FiberFlavor::Spatial {
        return Err(pre_err("expected a classical and a spatial fiber product"));
    }
    let d = classical.ambient.dim();
    if phi.shape() != (d, d) || spatial.ambient.dim() != d {
        return Err(dim_err("Φ does not connect the two ambient spaces"));
    }
    let u = unitarity_residual(phi);
    if u > tol.check() * libm::sqrt(d as f64).max(1.0) {
        return Err(pre_err(format!("Φ is not unitary (residual {u:.3e})")));
    }
    let moved: Vec<ComplexMatrix> = classical.algebra.basis().iter().map(|x| phi * x * phi.adjoint()).collect();
    let moved = OperatorSubspace::span_in(d, d, &moved, tol)?;
    let residual = subspace_distance(&moved, spatial.algebra.subspace())?;
    Ok(IsoReport { residual, equal: residual <= tol.check() })
}

// ── morphisms ──

/// A linear map given on the basis of its domain algebra.
#[derive(Clone, Copy, Debug)]
pub struct Morphism<'a> {
    pub domain: &'a StarAlgebra,
    pub images: &'a [ComplexMatrix],
}

impl<'a> Morphism<'a> {
    pub fn new(domain: &'a StarAlgebra, images: &'a [ComplexMatrix]) -> Result<Self> {
        if images.len() != domain.dim() {
            return Err(dim_err("morphism needs one image per basis element"));
        }
        Ok(Morphism { domain, images })
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        combine(self.images, &self.domain.coordinates(x)?)
    }

    pub fn target_dim(&self) -> usize {
        self.images.first().map_or(0, |m| m.nrows())
    }

    /// Worst residual of the unital *-homomorphism axioms.
    pub fn homomorphism_residual(&self) -> Result<f64> {
        let map = AlgebraMap::from_images(self.domain, self.images.to_vec())?;
        Ok(map.residuals(self.domain, Multiplicativity::Homomorphism)?.worst())
    }

    fn require_homomorphism(&self, tol: Tolerance) -> Result<()> {
        let r = self.homomorphism_residual()?;
        if r > tol.check() * (self.target_dim() as f64).max(1.0) {
            return Err(pre_err(format!("map is not a unital *-homomorphism (residual {r:.3e})")));
        }
        Ok(())
    }
}

/// `L^π(H, K) = {X : X a = π(a) X}`, optionally cut down to the `X` with
/// `X α ⊆ β` and `X* β ⊆ α`.
pub fn morphism_intertwiners(
    pi: Morphism<'_>,
    factorizations: Option<(&CStarFactorization, &CStarFactorization)>,
    tol: Tolerance,
) -> Result<OperatorSubspace> {
    let cols = pi.domain.carrier_dim();
    let rows = pi.target_dim();
    let id_out = identity(rows);
    let id_in = identity(cols);
    let mut blocks = Vec::new();
    let mut reference: f64 = 1.0;
    for (s, d) in pi.domain.basis().iter().zip(pi.images) {
        reference = reference.max(s.norm() + d.norm());
        blocks.push(kron(&s.transpose(), &id_out) - kron(&id_in, d));
    }
    if let Some((alpha, beta)) = factorizations {
        if alpha.h_dim() != cols || beta.h_dim() != rows {
            return Err(dim_err("factorizations do not live on the two spaces"));
        }
        blocks.extend(inclusion_rows(
            rows,
            cols,
            alpha.alpha().basis(),
            beta.alpha(),
            beta.alpha().basis(),
            alpha.alpha(),
            tol,
        ));
    }
    let ns = null_space_of_blocks(&blocks, rows * cols, reference, tol);
    Ok(OperatorSubspace::from_stacked_columns(rows, cols, &ns))
}

/// Both criteria for a morphism `(H, A, α) → (K, B, β)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorphismReport {
    /// `max ‖π(ρ_α(b†)) − ρ_β(b†)‖` over a basis.
    pub equivariance: f64,
    /// Distance between `[I_π α]` and `β`.
    pub intertwiner: f64,
    pub is_morphism: bool,
}

pub fn is_morphism(
    pi: Morphism<'_>,
    alpha: &CStarFactorization,
    beta: &CStarFactorization,
    tol: Tolerance,
) -> Result<MorphismReport> {
    pi.require_homomorphism(tol)?;
    let base = alpha.base();
    if base.distance(beta.base())? > tol.check() {
        return Err(pre_err("factorizations live over different bases"));
    }
    require_inside(pi.domain, alpha.rho().images(), "ρ_α", tol)?;
    let mut equivariance: f64 = 0.0;
    for (ra, rb) in alpha.rho().images().iter().zip(beta.rho().images()) {
        equivariance = equivariance.max((pi.apply(ra)? - rb).norm());
    }
    let ip = morphism_intertwiners(pi, Some((alpha, beta)), tol)?;
    let mut moved = Vec::new();
    for v in ip.basis() {
        for x in alpha.alpha().basis() {
            moved.push(v * x);
        }
    }
    let intertwiner = if moved.is_empty() {
        if beta.dim() == 0 {
            0.0
        } else {
            1.0
        }
    } else {
        let span = OperatorSubspace::span_in(beta.h_dim(), base.dim(), &moved, tol)?;
        subspace_distance(&span, beta.alpha())?
    };
    let thr = tol.check() * libm::sqrt(beta.h_dim() as f64).max(1.0);
    let by_equivariance = equivariance <= thr;
    let by_intertwiner = intertwiner <= thr;
    if by_equivariance != by_intertwiner {
        return Err(Error::Inconsistent(format!(
            "morphism criteria disagree (equivariance {equivariance:.3e}, intertwiners {intertwiner:.3e})"
        )));
    }
    Ok(MorphismReport { equivariance, intertwiner, is_morphism: by_equivariance })
}

// ── fiber products of morphisms ──

/// The operators `X ⊗ Y` used to define `φ ∗ ψ` between two ambient spaces,
/// with the inverse of their frame operator.
#[derive(Clone, Debug)]
pub struct MorphismLift {
    lifts: Vec<ComplexMatrix>,
    frame_inverse: ComplexMatrix,
    /// Worst well-definedness residual of the lifted `X ⊗ Y`.
    pub lift_residual: f64,
}

impl MorphismLift {
    /// For C*-relative tensor products the intertwiners must in addition
    /// carry the factorizations of `source` into those of `target`.
    pub fn new(
        phi: Morphism<'_>,
        psi: Morphism<'_>,
        source: &RelativeTensorSpace,
        target: &RelativeTensorSpace,
        tol: Tolerance,
    ) -> Result<Self> {
        let lift = Self::unchecked(phi, psi, source, target, tol)?;
        if lift.lift_residual > tol.check() {
            return Err(Error::NotWellDefined {
                what: String::from("the fiber product of the intertwiners"),
                residual: lift.lift_residual,
            });
        }
        Ok(lift)
    }

    /// [`new`](Self::new) without failing on lifts that are not well defined;
    /// their residual is kept in `lift_residual`.
    pub fn unchecked(
        phi: Morphism<'_>,
        psi: Morphism<'_>,
        source: &RelativeTensorSpace,
        target: &RelativeTensorSpace,
        tol: Tolerance,
    ) -> Result<Self> {
        if phi.domain.carrier_dim() != source.left_dim()
            || psi.domain.carrier_dim() != source.right_dim()
            || phi.target_dim() != target.left_dim()
            || psi.target_dim() != target.right_dim()
        {
            return Err(dim_err("morphisms do not connect the factors of the two spaces"));
        }
        let (fl, fr) = match (source.provenance(), target.provenance()) {
            (Provenance::CStar { left: a, right: b }, Provenance::CStar { left: c, right: d }) => {
                (Some((a, c)), Some((b, d)))
            }
            (Provenance::State { .. }, Provenance::State { .. }) => (None, None),
            _ => return Err(pre_err("source and target must be of the same flavor")),
        };
        let xs = morphism_intertwiners(phi, fl, tol)?;
        let ys = morphism_intertwiners(psi, fr, tol)?;
        let mut lifts = Vec::with_capacity(xs.dim() * ys.dim());
        let mut lift_residual: f64 = 0.0;
        let dt = target.dim();
        let mut frame = zeros(dt, dt);
        for x in xs.basis() {
            for y in ys.basis() {
                let ind = induced(target, source, x, y)?;
                lift_residual = lift_residual.max(ind.residual);
                frame += &ind.matrix * ind.matrix.adjoint();
                lifts.push(ind.matrix);
            }
        }
        if rank(&frame, tol) < dt {
            return Err(Error::NotWellDefined {
                what: format!("the fiber product of morphisms ({} lifted intertwiners do not span)", lifts.len()),
                residual: f64::INFINITY,
            });
        }
        let frame_inverse = inverse(&frame, tol)?;
        Ok(MorphismLift { lifts, frame_inverse, lift_residual })
    }

    /// `(φ ∗ ψ)(S)`, solving `Z (X ⊗ Y) = (X ⊗ Y) S` in the least-squares
    /// sense, with the relative residual of the defining equations.
    pub fn apply(&self, s: &ComplexMatrix) -> (ComplexMatrix, f64) {
        let dt = self.frame_inverse.nrows();
        let mut acc = zeros(dt, dt);
        for l in &self.lifts {
            acc += l * s * l.adjoint();
        }
        let z = acc * &self.frame_inverse;
        let mut res: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for l in &self.lifts {
            let rhs = l * s;
            scale = scale.max(rhs.norm());
            res = res.max((&z * l - rhs).norm());
        }
        (z, res / scale)
    }
}

/// `φ ∗ ψ` on the basis of the source fiber product.
#[derive(Clone, Debug)]
pub struct FiberMorphism {
    pub domain: StarAlgebra,
    pub images: Vec<ComplexMatrix>,
    /// Worst residual of the defining equations.
    pub well_defined: f64,
    pub homomorphism: f64,
    /// Worst distance of an image from the target fiber product.
    pub membership: f64,
}

impl FiberMorphism {
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        combine(&self.images, &self.domain.coordinates(x)?)
    }

    pub fn worst(&self) -> f64 {
        self.well_defined.max(self.homomorphism).max(self.membership)
    }
}

fn equivariance_residual(phi: Morphism<'_>, from: &[ComplexMatrix], to: &[ComplexMatrix]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in from.iter().zip(to) {
        worst = worst.max((phi.apply(x)? - y).norm());
    }
    Ok(worst)
}

/// `φ ∗ ψ: A ∗ B → C ∗ D`, certified as a *-homomorphism into the target.
pub fn fiber_morphism(
    phi: Morphism<'_>,
    psi: Morphism<'_>,
    source: &FiberProductAlgebra,
    target: &FiberProductAlgebra,
    tol: Tolerance,
) -> Result<FiberMorphism> {
    if source.flavor != target.flavor {
        return Err(pre_err("fiber products of different flavors"));
    }
    phi.require_homomorphism(tol)?;
    psi.require_homomorphism(tol)?;
    let (left_in, right_in, left_out, right_out) = match (source.ambient.provenance(), target.ambient.provenance()) {
        (Provenance::State { left: a, right: b, .. }, Provenance::State { left: c, right: d, .. }) => {
            (a.images().to_vec(), b.images().to_vec(), c.images().to_vec(), d.images().to_vec())
        }
        (Provenance::CStar { left: a, right: b }, Provenance::CStar { left: c, right: d }) => {
            (a.rho().images().to_vec(), b.rho().images().to_vec(), c.rho().images().to_vec(), d.rho().images().to_vec())
        }
        _ => return Err(pre_err("source and target must be of the same flavor")),
    };
    let thr = tol.check() * libm::sqrt(target.ambient.dim() as f64).max(1.0);
    let eq = equivariance_residual(phi, &left_in, &left_out)?.max(equivariance_residual(psi, &right_in, &right_out)?);
    if eq > thr {
        return Err(pre_err(format!("morphisms do not respect the legs (residual {eq:.3e})")));
    }
    let lift = MorphismLift::new(phi, psi, &source.ambient, &target.ambient, tol)?;
    let mut images = Vec::with_capacity(source.algebra.dim());
    let mut well_defined: f64 = 0.0;
    let mut membership: f64 = 0.0;
    for s in source.algebra.basis() {
        let (z, r) = lift.apply(s);
        well_defined = well_defined.max(r);
        membership = membership.max(target.algebra.residual(&z)?);
        images.push(z);
    }
    if well_defined > tol.check() {
        return Err(Error::NotWellDefined {
            what: String::from("the fiber product of morphisms"),
            residual: well_defined,
        });
    }
    let homomorphism = Morphism::new(&source.algebra, &images)?.homomorphism_residual()?;
    Ok(FiberMorphism { domain: source.algebra.clone(), images, well_defined, homomorphism, membership })
}

/// `‖Φ_out (φ ∗_μ ψ)(S) Φ_out* − (φ ∗_ℌ ψ)(Φ_in S Φ_in*)‖` over a basis.
pub fn morphism_square(
    classical: &FiberMorphism,
    spatial: &FiberMorphism,
    phi_in: &ComplexMatrix,
    phi_out: &ComplexMatrix,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (s, z) in classical.domain.basis().iter().zip(&classical.images) {
        let lhs = phi_out * z * phi_out.adjoint();
        let rhs = spatial.apply(&(phi_in * s * phi_in.adjoint()))?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gns::{State, StateContext};
    use crate::linalg::{distance, real_diag, unit};
    use crate::rtensor::{phi_unitary, rtp_cstar, rtp_state, Leg, LegKind, Linkage};
    use alloc::sync::Arc;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn diag_alg(n: usize) -> StarAlgebra {
        StarAlgebra::with_basis(n, (0..n).map(|i| unit(n, n, i, i)).collect(), tol()).unwrap()
    }

    struct Linked {
        rs: RelativeTensorSpace,
        rc: RelativeTensorSpace,
        phi: ComplexMatrix,
    }

    /// Legs `l` (of `N^op`) and `r` (of `N`) over diagonal `N` with the given weights.
    fn linked(weights: &[f64], l: Vec<ComplexMatrix>, r: Vec<ComplexMatrix>) -> Linked {
        let n = weights.len();
        let ctx =
            Arc::new(StateContext::new(State::new(diag_alg(n), real_diag(weights), tol()).unwrap(), tol()).unwrap());
        let l = Leg::new(ctx.algebra(), LegKind::Opposite, l, tol()).unwrap();
        let r = Leg::new(ctx.algebra(), LegKind::Algebra, r, tol()).unwrap();
        let link = Linkage::canonical(ctx.clone(), tol()).unwrap();
        let rs = rtp_state(&ctx, &l, &r, tol()).unwrap();
        let rc =
            rtp_cstar(&link.factorization(&l, tol()).unwrap(), &link.factorization(&r, tol()).unwrap(), tol()).unwrap();
        let phi = phi_unitary(&rs, &rc, &link, tol()).unwrap().matrix;
        Linked { rs, rc, phi }
    }

    fn f2() -> Linked {
        let imgs = alloc::vec![unit(2, 2, 0, 0), unit(2, 2, 1, 1)];
        linked(&[0.5, 0.5], imgs.clone(), imgs)
    }

    fn f4() -> Linked {
        let by = |f: fn(usize) -> usize| -> Vec<ComplexMatrix> {
            (0..2).map(|u| real_diag(&(0..4).map(|g| if f(g) == u { 1.0 } else { 0.0 }).collect::<Vec<_>>())).collect()
        };
        linked(&[0.5, 0.5], by(|g| g / 2), by(|g| g % 2))
    }

    fn scalar_base(h: usize, k: usize) -> Linked {
        linked(&[1.0], alloc::vec![identity(h)], alloc::vec![identity(k)])
    }

    #[test]
    fn trivial_base_gives_tensor_products() {
        let t = scalar_base(2, 3);
        let full = fiber_classical(&StarAlgebra::full(2), &StarAlgebra::full(3), &t.rs, tol()).unwrap();
        assert_eq!(full.algebra.dim(), 36);
        let spatial = fiber_spatial(&StarAlgebra::full(2), &StarAlgebra::full(3), &t.rc, tol()).unwrap();
        assert_eq!(spatial.algebra.dim(), 36);
        let c = fiber_classical(&StarAlgebra::scalars(2), &StarAlgebra::scalars(3), &t.rs, tol()).unwrap();
        assert_eq!(c.algebra.dim(), 1);
        let s = fiber_spatial(&StarAlgebra::scalars(2), &StarAlgebra::scalars(3), &t.rc, tol()).unwrap();
        assert_eq!(s.algebra.dim(), 1);
        // A ⊗ B with A = D₂, B = M₃
        let s = fiber_spatial(&diag_alg(2), &StarAlgebra::full(3), &t.rc, tol()).unwrap();
        assert_eq!(s.algebra.dim(), 18);
        assert!(
            phi_iso(
                &c,
                &fiber_spatial(&StarAlgebra::scalars(2), &StarAlgebra::scalars(3), &t.rc, tol()).unwrap(),
                &t.phi,
                tol()
            )
            .unwrap()
            .equal
        );
    }

    #[test]
    fn diagonal_fixture_fiber_products_match() {
        let t = f2();
        let c = fiber_classical(&diag_alg(2), &diag_alg(2), &t.rs, tol()).unwrap();
        let s = fiber_spatial(&diag_alg(2), &diag_alg(2), &t.rc, tol()).unwrap();
        assert_eq!((c.algebra.dim(), s.algebra.dim()), (2, 2));
        let iso = phi_iso(&c, &s, &t.phi, tol()).unwrap();
        assert!(iso.equal && iso.residual < 1e-9, "{iso:?}");
    }

    #[test]
    fn pair_groupoid_fiber_products_match() {
        let t = f4();
        for (a, b) in [(diag_alg(4), diag_alg(4)), (diag_alg(4), StarAlgebra::full(4))] {
            let c = fiber_classical(&a, &b, &t.rs, tol()).unwrap();
            let s = fiber_spatial(&a, &b, &t.rc, tol()).unwrap();
            assert_eq!(c.algebra.dim(), s.algebra.dim());
            assert!(phi_iso(&c, &s, &t.phi, tol()).unwrap().equal);
        }
    }

    #[test]
    fn classical_fiber_product_contains_lifted_legs() {
        let t = f4();
        let c = fiber_classical(&diag_alg(4), &StarAlgebra::full(4), &t.rs, tol()).unwrap();
        let (l, r) = t.rs.legs().unwrap();
        for x in l.images() {
            let y = lift_operator(&t.rs, &identity(4), &r.images()[0], tol()).unwrap();
            assert!(c.algebra.residual(&y).unwrap() < 1e-9);
            let y = lift_operator(&t.rs, x, &identity(4), tol()).unwrap();
            assert!(c.algebra.residual(&y).unwrap() < 1e-9);
        }
    }

    #[test]
    fn leg_outside_algebra_is_rejected() {
        let t = f2();
        assert!(matches!(
            fiber_classical(&StarAlgebra::scalars(2), &diag_alg(2), &t.rs, tol()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn morphism_criteria() {
        let t = f2();
        let (fa, _) = t.rc.factorizations().unwrap();
        let d2 = diag_alg(2);
        let id = Morphism::new(&d2, d2.basis()).unwrap();
        let r = is_morphism(id, fa, fa, tol()).unwrap();
        assert!(r.is_morphism);
        // swap the two coordinates
        let flipped = [d2.basis()[1].clone(), d2.basis()[0].clone()];
        let sw = Morphism::new(&d2, &flipped).unwrap();
        let r = is_morphism(sw, fa, fa, tol()).unwrap();
        assert!(!r.is_morphism && r.equivariance > 0.5);
        // not a homomorphism
        let bad = [identity(2), identity(2)];
        assert!(matches!(is_morphism(Morphism::new(&d2, &bad).unwrap(), fa, fa, tol()), Err(Error::Precondition(_))));
    }

    #[test]
    fn identity_morphisms_lift_to_the_identity() {
        let t = f2();
        let d2 = diag_alg(2);
        let id = Morphism::new(&d2, d2.basis()).unwrap();
        let c = fiber_classical(&d2, &d2, &t.rs, tol()).unwrap();
        let s = fiber_spatial(&d2, &d2, &t.rc, tol()).unwrap();
        let mc = fiber_morphism(id, id, &c, &c, tol()).unwrap();
        let ms = fiber_morphism(id, id, &s, &s, tol()).unwrap();
        for (x, y) in c.algebra.basis().iter().zip(&mc.images) {
            assert!(distance(x, y) < 1e-9);
        }
        assert!(mc.worst() < 1e-9 && ms.worst() < 1e-9);
        assert!(morphism_square(&mc, &ms, &t.phi, &t.phi).unwrap() < 1e-9);
    }

    #[test]
    fn embeddings_into_full_matrices() {
        // D₂ ⊂ M₂ on both factors over the diagonal base; the factorizations stay the same.
        let t = f2();
        let d2 = diag_alg(2);
        let m2 = StarAlgebra::full(2);
        let emb = Morphism::new(&d2, d2.basis()).unwrap();
        let c = fiber_classical(&d2, &d2, &t.rs, tol()).unwrap();
        let c_out = fiber_classical(&m2, &m2, &t.rs, tol()).unwrap();
        let s = fiber_spatial(&d2, &d2, &t.rc, tol()).unwrap();
        let s_out = fiber_spatial(&m2, &m2, &t.rc, tol()).unwrap();
        let mc = fiber_morphism(emb, emb, &c, &c_out, tol()).unwrap();
        let ms = fiber_morphism(emb, emb, &s, &s_out, tol()).unwrap();
        assert!(mc.worst() < 1e-9 && ms.worst() < 1e-9);
        assert!(morphism_square(&mc, &ms, &t.phi, &t.phi).unwrap() < 1e-9);
    }

    #[test]
    fn scalar_base_morphisms_are_tensor_products() {
        let t = scalar_base(2, 2);
        let m2 = StarAlgebra::full(2);
        let u = crate::linalg::unitary_exp(&(unit(2, 2, 0, 1) + unit(2, 2, 1, 0)), 0.3);
        let imgs: Vec<ComplexMatrix> = m2.basis().iter().map(|x| &u * x * u.adjoint()).collect();
        let ad = Morphism::new(&m2, &imgs).unwrap();
        let id = Morphism::new(&m2, m2.basis()).unwrap();
        let c = fiber_classical(&m2, &m2, &t.rs, tol()).unwrap();
        let mc = fiber_morphism(ad, id, &c, &c, tol()).unwrap();
        let w = kron(&u, &identity(2));
        for (x, y) in c.algebra.basis().iter().zip(&mc.images) {
            let expect = t.rs.hilbert_class()
                * &w
                * t.rs.hilbert_section()
                * x
                * (t.rs.hilbert_class() * &w * t.rs.hilbert_section()).adjoint();
            assert!(distance(&expect, y) < 1e-9);
        }
    }
}
