//! Hopf bimodules over a faithful state and concrete Hopf C*-bimodules over a base.
//!
//! Both kinds are stored as an algebra `A` on `H`, a relative tensor square
//! `H ⊗ H` balanced by the two legs, and the comultiplication `Δ` given by
//! the images of a basis of `A` as operators on that square.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cfact::{compatibility, CStarFactorization};
use crate::error::{dim_err, pre_err, Error, Result};
use crate::fiber::{fiber_classical, fiber_spatial, is_morphism, FiberProductAlgebra, Morphism, MorphismLift};
use crate::gns::StateContext;
use crate::linalg::{identity, ComplexMatrix, Tolerance};
use crate::report::{Certificate, Check, Equivalence};
use crate::rtensor::{
    lift_operator, phi_unitary, rtp_cstar, rtp_state, triple_transfer, Bracketing, CStarFlavor, Flavor, Leg, LegKind,
    Linkage, PhiReport, RelativeTensorSpace, StateFlavor, TripleSpace,
};
use crate::staralg::StarAlgebra;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopfSide {
    VonNeumann,
    CStar,
}

#[derive(Clone, Debug)]
enum HopfLegs {
    State { ctx: Arc<StateContext>, rho: Leg, sigma: Leg },
    CStar { alpha: CStarFactorization, beta: CStarFactorization },
}

/// A comultiplication submitted for certification.
#[derive(Clone, Debug)]
pub struct HopfCandidate {
    algebra: StarAlgebra,
    legs: HopfLegs,
    space: RelativeTensorSpace,
    fiber: FiberProductAlgebra,
    delta: Vec<ComplexMatrix>,
    tol: Tolerance,
}

impl HopfCandidate {
    /// `(N, μ, A, ρ, σ, Δ)` with `Δ: A → A ∗_μ A` on `H ⊗_μ H` balanced by `ρ ⊗ σ`.
    pub fn von_neumann(
        ctx: Arc<StateContext>,
        algebra: StarAlgebra,
        rho: Leg,
        sigma: Leg,
        delta: Vec<ComplexMatrix>,
        tol: Tolerance,
    ) -> Result<Self> {
        if rho.kind() != LegKind::Opposite || sigma.kind() != LegKind::Algebra {
            return Err(pre_err("ρ must represent N^op and σ must represent N"));
        }
        let space = rtp_state(&ctx, &rho, &sigma, tol)?;
        let fiber = fiber_classical(&algebra, &algebra, &space, tol)?;
        Self::assemble(algebra, HopfLegs::State { ctx, rho, sigma }, space, fiber, delta, tol)
    }

    /// `(𝔅, H, A, α, β, Δ)` with `Δ: A → A ∗_ℌ A` on `α ⊳ ℌ ⊲ β`.
    pub fn cstar(
        algebra: StarAlgebra,
        alpha: CStarFactorization,
        beta: CStarFactorization,
        delta: Vec<ComplexMatrix>,
        tol: Tolerance,
    ) -> Result<Self> {
        let space = rtp_cstar(&alpha, &beta, tol)?;
        let fiber = fiber_spatial(&algebra, &algebra, &space, tol)?;
        Self::assemble(algebra, HopfLegs::CStar { alpha, beta }, space, fiber, delta, tol)
    }

    fn assemble(
        algebra: StarAlgebra,
        legs: HopfLegs,
        space: RelativeTensorSpace,
        fiber: FiberProductAlgebra,
        delta: Vec<ComplexMatrix>,
        tol: Tolerance,
    ) -> Result<Self> {
        if delta.len() != algebra.dim() {
            return Err(dim_err("Δ needs one image per basis element of A"));
        }
        let d = space.dim();
        if delta.iter().any(|m| m.shape() != (d, d)) {
            return Err(dim_err(format!("images of Δ must act on the {d}-dimensional product")));
        }
        Ok(HopfCandidate { algebra, legs, space, fiber, delta, tol })
    }

    pub fn side(&self) -> HopfSide {
        match self.legs {
            HopfLegs::State { .. } => HopfSide::VonNeumann,
            HopfLegs::CStar { .. } => HopfSide::CStar,
        }
    }

    pub fn algebra(&self) -> &StarAlgebra {
        &self.algebra
    }

    pub fn space(&self) -> &RelativeTensorSpace {
        &self.space
    }

    pub fn fiber(&self) -> &FiberProductAlgebra {
        &self.fiber
    }

    pub fn delta(&self) -> &[ComplexMatrix] {
        &self.delta
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// The same data with another comultiplication.
    pub fn with_delta(&self, delta: Vec<ComplexMatrix>) -> Result<Self> {
        if delta.len() != self.delta.len() || delta.iter().zip(&self.delta).any(|(a, b)| a.shape() != b.shape()) {
            return Err(dim_err("replacement comultiplication has the wrong shape"));
        }
        let mut c = self.clone();
        c.delta = delta;
        Ok(c)
    }

    pub fn morphism(&self) -> Morphism<'_> {
        Morphism { domain: &self.algebra, images: &self.delta }
    }

    /// The C*-counterpart `Δ_ℌ = Ad_Φ ∘ Δ_μ` over a linked base.
    pub fn to_cstar(&self, linkage: &Linkage) -> Result<(HopfCandidate, PhiReport)> {
        let (rho, sigma) = match &self.legs {
            HopfLegs::State { rho, sigma, .. } => (rho, sigma),
            HopfLegs::CStar { .. } => return Err(pre_err("candidate is already on the C*-side")),
        };
        let tol = self.tol;
        let alpha = linkage.factorization(rho, tol)?;
        let beta = linkage.factorization(sigma, tol)?;
        let rc = rtp_cstar(&alpha, &beta, tol)?;
        let phi = phi_unitary(&self.space, &rc, linkage, tol)?;
        let p = &phi.matrix;
        let delta = self.delta.iter().map(|x| p * x * p.adjoint()).collect();
        let c = Self::cstar(self.algebra.clone(), alpha, beta, delta, tol)?;
        Ok((c, phi))
    }
}

// ── certification ──

fn in_algebra(alg: &StarAlgebra, xs: &[ComplexMatrix]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in xs {
        worst = worst.max(alg.residual(x)?);
    }
    Ok(worst)
}

/// Coassociativity `(Δ ∗ id) ∘ Δ = (id ∗ Δ) ∘ Δ`, compared in the left-bracketed
/// triple product through the associator. The residual also carries the
/// well-definedness of both fiber products of morphisms.
fn coassociativity<F: Flavor>(c: &HopfCandidate, flavor: &F, left: &F::Leg, right: &F::Leg) -> Result<f64> {
    let tol = c.tol;
    let s = &c.space;
    let h = s.left_dim();
    let xl = TripleSpace::new(flavor.two_fold(&flavor.on_right(s, left)?, right)?, s, Bracketing::Left)?;
    let xr = TripleSpace::new(flavor.two_fold(left, &flavor.on_left(s, right)?)?, s, Bracketing::Right)?;
    let assoc = triple_transfer(&xl, &xr, [h, h, h], None)?;
    let id = Morphism { domain: &c.algebra, images: c.algebra.basis() };
    let delta = c.morphism();
    // Without leg-equivariant intertwiners the two sides are not even defined.
    let lifts = MorphismLift::unchecked(delta, id, s, &xl.space, tol)
        .and_then(|l| Ok((l, MorphismLift::unchecked(id, delta, s, &xr.space, tol)?)));
    let (lift_l, lift_r) = match lifts {
        Ok(pair) => pair,
        Err(Error::NotWellDefined { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let mut worst = assoc.residual.max(lift_l.lift_residual).max(lift_r.lift_residual);
    let a = &assoc.matrix;
    for d in &c.delta {
        let (l, r1) = lift_l.apply(d);
        let (r, r2) = lift_r.apply(d);
        let diff = (&l * a - a * &r).norm() / d.norm().max(1.0);
        worst = worst.max(diff).max(r1).max(r2);
    }
    Ok(worst)
}

/// Leg conditions, the homomorphism property of `Δ` into the fiber product,
/// and coassociativity, with the same axiom names on both sides.
pub fn check_hopf(c: &HopfCandidate) -> Result<Certificate> {
    let tol = c.tol;
    let h = c.space.left_dim();
    let thr = tol.check() * libm::sqrt(c.space.dim() as f64).max(1.0);
    let mut cert = Certificate::new();
    let delta = c.morphism();
    cert.push(Check::new(
        "homomorphism",
        "Δ(ab) = Δ(a)Δ(b), Δ(a*) = Δ(a)*, Δ(1) = 1",
        delta.homomorphism_residual()?,
        thr,
    ));
    cert.push(Check::new("fiber membership", "Δ(A) ⊆ A ∗ A", in_algebra(&c.fiber.algebra, &c.delta)?, thr));
    let id = identity(h);
    match &c.legs {
        HopfLegs::State { ctx, rho, sigma } => {
            cert.push(Check::new(
                "legs",
                "ρ(N^op), σ(N) ⊆ A commute",
                in_algebra(&c.algebra, rho.images())?
                    .max(in_algebra(&c.algebra, sigma.images())?)
                    .max(rho.commutator(sigma)),
                thr,
            ));
            let mut leg_rho: f64 = 0.0;
            for x in rho.images() {
                leg_rho = leg_rho.max((delta.apply(x)? - lift_operator(&c.space, &id, x, tol)?).norm());
            }
            let mut leg_sigma: f64 = 0.0;
            for x in sigma.images() {
                leg_sigma = leg_sigma.max((delta.apply(x)? - lift_operator(&c.space, x, &id, tol)?).norm());
            }
            cert.push(Check::new("leg ρ", "Δ∘ρ = ρ₂ = 1⊗ρ", leg_rho, thr));
            cert.push(Check::new("leg σ", "Δ∘σ = σ₁ = σ⊗1", leg_sigma, thr));
            let fl = StateFlavor { ctx: ctx.clone(), tol };
            cert.push(Check::new(
                "coassociativity",
                "(Δ∗id)∘Δ = (id∗Δ)∘Δ",
                coassociativity(c, &fl, rho, sigma)?,
                tol.check(),
            ));
        }
        HopfLegs::CStar { alpha, beta } => {
            let comp = compatibility(alpha, beta, tol)?;
            cert.push(Check::new(
                "legs",
                "ρ_α(𝔅†), ρ_β(𝔅) ⊆ A with α, β compatible",
                in_algebra(&c.algebra, alpha.rho().images())?
                    .max(in_algebra(&c.algebra, beta.rho().images())?)
                    .max(comp.commutator),
                thr,
            ));
            let fl = CStarFlavor { tol };
            let aa = fl.on_right(&c.space, alpha)?;
            let bb = fl.on_left(&c.space, beta)?;
            let ra = is_morphism(delta, alpha, &aa, tol)?;
            let rb = is_morphism(delta, beta, &bb, tol)?;
            cert.push(Check::new("leg ρ", "Δ ∈ Mor(A_α, (A∗A)_{α▷α})", ra.equivariance, thr));
            cert.push(Check::new("leg σ", "Δ ∈ Mor(A_β, (A∗A)_{β◁β})", rb.equivariance, thr));
            cert.push(Check::new(
                "coassociativity",
                "(Δ∗id)∘Δ = (id∗Δ)∘Δ",
                coassociativity(c, &fl, alpha, beta)?,
                tol.check(),
            ));
        }
    }
    Ok(cert)
}

/// Both certifications of a comultiplication and its transport `Δ_ℌ = Ad_Φ ∘ Δ_μ`.
pub fn hopf_equivalence(c_vn: &HopfCandidate, c_cs: &HopfCandidate, phi: &ComplexMatrix) -> Result<Equivalence> {
    if c_vn.side() != HopfSide::VonNeumann || c_cs.side() != HopfSide::CStar {
        return Err(pre_err("expected a von Neumann and a C*-candidate"));
    }
    let d = c_vn.space.dim();
    if phi.shape() != (d, d) || c_cs.space.dim() != d || c_vn.delta.len() != c_cs.delta.len() {
        return Err(dim_err("the two candidates do not match"));
    }
    let mut linkage: f64 = 0.0;
    for (x, y) in c_vn.delta.iter().zip(&c_cs.delta) {
        linkage = linkage.max((phi * x * phi.adjoint() - y).norm());
    }
    let thr = c_vn.tol.check() * libm::sqrt(d as f64).max(1.0);
    if linkage > thr {
        return Err(pre_err(format!("Δ_ℌ is not Ad_Φ ∘ Δ_μ (residual {linkage:.3e})")));
    }
    Ok(Equivalence { state_side: check_hopf(c_vn)?, cstar_side: check_hopf(c_cs)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{groupoid_hopf, groupoid_hopf_negative, FiniteGroupoid, HopfNegative};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn both_sides(g: &FiniteGroupoid, w: Option<&[f64]>) -> Equivalence {
        let h = groupoid_hopf(g, w, tol()).unwrap();
        let (cs, phi) = h.cstar().unwrap();
        hopf_equivalence(&h.candidate, &cs, &phi.matrix).unwrap()
    }

    #[test]
    fn groupoid_coproducts_pass_on_both_sides() {
        for (g, w) in [
            (FiniteGroupoid::cyclic(2).unwrap(), None),
            (FiniteGroupoid::pair(2).unwrap(), None),
            (FiniteGroupoid::pair(2).unwrap(), Some(&[0.3, 0.7][..])),
        ] {
            let eq = both_sides(&g, w);
            assert!(eq.state_side.passed(), "{:?}", eq.state_side.failing_axioms());
            assert!(eq.cstar_side.passed(), "{:?}", eq.cstar_side.failing_axioms());
        }
    }

    #[test]
    fn leg_perturbation_fails_a_leg_on_both_sides() {
        let g = FiniteGroupoid::pair(2).unwrap();
        let h = groupoid_hopf_negative(&g, None, HopfNegative::Leg(0), tol()).unwrap();
        let (cs, phi) = h.cstar().unwrap();
        let eq = hopf_equivalence(&h.candidate, &cs, &phi.matrix).unwrap();
        let a = eq.state_side.failing_axioms();
        let b = eq.cstar_side.failing_axioms();
        assert!(a.contains(&"leg ρ"), "{a:?}");
        assert!(b.contains(&"leg ρ"), "{b:?}");
        assert!(!eq.state_side.residual("coassociativity").unwrap().is_nan());
    }

    #[test]
    fn character_twist_fails_only_coassociativity() {
        let g = FiniteGroupoid::cyclic(3).unwrap();
        let h = groupoid_hopf_negative(&g, None, HopfNegative::Character, tol()).unwrap();
        let (cs, phi) = h.cstar().unwrap();
        let eq = hopf_equivalence(&h.candidate, &cs, &phi.matrix).unwrap();
        assert_eq!(eq.state_side.failing_axioms(), alloc::vec!["coassociativity"]);
        assert_eq!(eq.cstar_side.failing_axioms(), alloc::vec!["coassociativity"]);
        assert!(eq.state_side.residual("coassociativity").unwrap() > 1e-2);
    }

    #[test]
    fn transported_coproduct_must_match() {
        let g = FiniteGroupoid::pair(2).unwrap();
        let h = groupoid_hopf(&g, None, tol()).unwrap();
        let (cs, _) = h.cstar().unwrap();
        let wrong = crate::rng::SeededRng::new(3).unitary(h.candidate.space().dim());
        assert!(hopf_equivalence(&h.candidate, &cs, &wrong).is_err());
    }
}
