//! Pseudo-multiplicative unitaries over a faithful state and over a C*-base.
//!
//! A candidate carries three legs `ρ` (of `N^op`), `σ` and `σ̂` (of `N`) on one
//! space `H`, the factorizations `α`, `β`, `β̂` they correspond to under a
//! linkage, and a unitary `V: H ⊗ H → H ⊗ H` between the source product
//! `σ̂ ⊗ ρ` and the target product `ρ ⊗ σ`, stored in quotient coordinates of
//! the state-based spaces.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cfact::{compatibility, CStarFactorization};
use crate::error::{dim_err, pre_err, Result};
use crate::linalg::{identity, subspace_distance, unitarity_residual, ComplexMatrix, OperatorSubspace, Tolerance};
use crate::report::{Certificate, Check, Equivalence};
use crate::rtensor::{
    flip, induced, lift_operator, phi_unitary, rtp_cstar, rtp_state, triple_transfer, Bracketing, CStarFlavor, Flavor,
    Leg, LegKind, Linkage, PhiReport, RelativeTensorSpace, StateFlavor, TripleSpace,
};

/// Data submitted for certification as a pseudo-multiplicative unitary.
#[derive(Clone, Debug)]
pub struct PmuCandidate {
    linkage: Linkage,
    rho: Leg,
    sigma: Leg,
    sigma_hat: Leg,
    alpha: CStarFactorization,
    beta: CStarFactorization,
    beta_hat: CStarFactorization,
    source: RelativeTensorSpace,
    target: RelativeTensorSpace,
    v: ComplexMatrix,
    tol: Tolerance,
}

impl PmuCandidate {
    pub fn new(
        linkage: Linkage,
        rho: Leg,
        sigma: Leg,
        sigma_hat: Leg,
        v: ComplexMatrix,
        tol: Tolerance,
    ) -> Result<Self> {
        if rho.kind() != LegKind::Opposite || sigma.kind() != LegKind::Algebra || sigma_hat.kind() != LegKind::Algebra {
            return Err(pre_err("ρ must represent N^op and σ, σ̂ must represent N"));
        }
        if rho.dim() != sigma.dim() || rho.dim() != sigma_hat.dim() {
            return Err(dim_err("the three legs act on different spaces"));
        }
        let alpha = linkage.factorization(&rho, tol)?;
        let beta = linkage.factorization(&sigma, tol)?;
        let beta_hat = linkage.factorization(&sigma_hat, tol)?;
        let ctx = linkage.context().clone();
        let source = rtp_state(&ctx, &sigma_hat, &rho, tol)?;
        let target = rtp_state(&ctx, &rho, &sigma, tol)?;
        if v.shape() != (target.dim(), source.dim()) {
            return Err(dim_err(format!(
                "V must map the {}-dimensional source onto the {}-dimensional target",
                source.dim(),
                target.dim()
            )));
        }
        Ok(PmuCandidate { linkage, rho, sigma, sigma_hat, alpha, beta, beta_hat, source, target, v, tol })
    }

    /// The same data with another unitary.
    pub fn with_unitary(&self, v: ComplexMatrix) -> Result<Self> {
        if v.shape() != self.v.shape() {
            return Err(dim_err("replacement unitary has the wrong shape"));
        }
        let mut c = self.clone();
        c.v = v;
        Ok(c)
    }

    pub fn linkage(&self) -> &Linkage {
        &self.linkage
    }

    pub fn rho(&self) -> &Leg {
        &self.rho
    }

    pub fn sigma(&self) -> &Leg {
        &self.sigma
    }

    pub fn sigma_hat(&self) -> &Leg {
        &self.sigma_hat
    }

    pub fn alpha(&self) -> &CStarFactorization {
        &self.alpha
    }

    pub fn beta(&self) -> &CStarFactorization {
        &self.beta
    }

    pub fn beta_hat(&self) -> &CStarFactorization {
        &self.beta_hat
    }

    /// `H ⊗ H` balanced by `σ̂` and `ρ`.
    pub fn source(&self) -> &RelativeTensorSpace {
        &self.source
    }

    /// `H ⊗ H` balanced by `ρ` and `σ`.
    pub fn target(&self) -> &RelativeTensorSpace {
        &self.target
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.v
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// Pairwise commutation of the legs, pairwise compatibility of the
    /// factorizations and unitarity of `V`.
    pub fn invariants(&self) -> Result<Certificate> {
        let tol = self.tol;
        let thr = tol.check() * libm::sqrt(self.rho.dim() as f64).max(1.0);
        let mut cert = Certificate::new();
        let legs = [("ρ", &self.rho), ("σ", &self.sigma), ("σ̂", &self.sigma_hat)];
        for (i, (a, la)) in legs.iter().enumerate() {
            for (b, lb) in legs.iter().skip(i + 1) {
                cert.push(Check::new(
                    format!("legs commute {a},{b}"),
                    format!("[{a}(x), {b}(y)] = 0"),
                    la.commutator(lb),
                    thr,
                ));
            }
        }
        let facts = [("α", &self.alpha), ("β", &self.beta), ("β̂", &self.beta_hat)];
        for (i, (a, fa)) in facts.iter().enumerate() {
            for (b, fb) in facts.iter().skip(i + 1) {
                let c = compatibility(fa, fb, tol)?;
                cert.push(Check::new(
                    format!("compatible {a},{b}"),
                    format!("[ρ_{a}(x), ρ_{b}(y)] = 0"),
                    c.commutator.max(c.span_residual),
                    thr,
                ));
            }
        }
        cert.push(Check::new("unitary", "V*V = VV* = 1", unitarity_residual(&self.v), thr));
        Ok(cert)
    }

    /// The C*-relative tensor products `β̂ ⊳ ℌ ⊲ α` and `α ⊳ ℌ ⊲ β`, the
    /// identifications with the state-based spaces and `V` transported along them.
    pub fn cstar_side(&self) -> Result<CStarSide> {
        let tol = self.tol;
        let source = rtp_cstar(&self.beta_hat, &self.alpha, tol)?;
        let target = rtp_cstar(&self.alpha, &self.beta, tol)?;
        let phi_source = phi_unitary(&self.source, &source, &self.linkage, tol)?;
        let phi_target = phi_unitary(&self.target, &target, &self.linkage, tol)?;
        let v = &phi_target.matrix * &self.v * phi_source.matrix.adjoint();
        Ok(CStarSide { source, target, phi_source, phi_target, v })
    }
}

/// The C*-counterpart of a candidate.
#[derive(Clone, Debug)]
pub struct CStarSide {
    pub source: RelativeTensorSpace,
    pub target: RelativeTensorSpace,
    pub phi_source: PhiReport,
    pub phi_target: PhiReport,
    /// `Φ_T V Φ_S*`.
    pub v: ComplexMatrix,
}

// ── intertwining ──

fn relative(res: f64, scale: f64) -> f64 {
    res / scale.max(1.0)
}

/// `V (x ⊗ 1) = (1 ⊗ x) V` and its three companions, on the images of a basis of `N`.
fn intertwining_vn(c: &PmuCandidate) -> Result<Certificate> {
    let tol = c.tol;
    let (s, t, v) = (&c.source, &c.target, &c.v);
    let id = identity(c.rho.dim());
    let mut cert = Certificate::new();
    let mut family =
        |axiom: &str, anchor: &str, (from, before): (&Leg, Placement), (to, after): (&Leg, Placement)| -> Result<()> {
            let mut worst: f64 = 0.0;
            for (x, y) in from.images().iter().zip(to.images()) {
                let ls = match before {
                    Placement::Left => lift_operator(s, x, &id, tol)?,
                    Placement::Right => lift_operator(s, &id, x, tol)?,
                };
                let lt = match after {
                    Placement::Left => lift_operator(t, y, &id, tol)?,
                    Placement::Right => lift_operator(t, &id, y, tol)?,
                };
                worst = worst.max(relative((v * &ls - &lt * v).norm(), ls.norm()));
            }
            cert.push(Check::new(axiom, anchor, worst, tol.check()));
            Ok(())
        };
    family(AXIOMS[0], "V(ρ(y)⊗1) = (1⊗ρ(y))V", (&c.rho, Placement::Left), (&c.rho, Placement::Right))?;
    family(AXIOMS[1], "V(1⊗σ(x)) = (σ̂(x)⊗1)V", (&c.sigma, Placement::Right), (&c.sigma_hat, Placement::Left))?;
    family(AXIOMS[2], "V(1⊗σ̂(x)) = (1⊗σ̂(x))V", (&c.sigma_hat, Placement::Right), (&c.sigma_hat, Placement::Right))?;
    family(AXIOMS[3], "V(σ(x)⊗1) = (σ(x)⊗1)V", (&c.sigma, Placement::Left), (&c.sigma, Placement::Left))?;
    Ok(cert)
}

#[derive(Clone, Copy)]
enum Placement {
    Left,
    Right,
}

const AXIOMS: [&str; 4] = ["intertwining ρ⊗1", "intertwining 1⊗σ", "intertwining 1⊗σ̂", "intertwining σ⊗1"];

/// `V(α ◁ α) = α ▷ α` and its three companions, as equalities of spans.
fn intertwining_cstar(c: &PmuCandidate, side: &CStarSide) -> Result<Certificate> {
    let tol = c.tol;
    let fl = CStarFlavor { tol };
    let (s, t, v) = (&side.source, &side.target, &side.v);
    let mut cert = Certificate::new();
    let mut family = |axiom: &str, anchor: &str, from: CStarFactorization, to: CStarFactorization| -> Result<()> {
        let moved: Vec<ComplexMatrix> = from.alpha().basis().iter().map(|x| v * x).collect();
        let span = OperatorSubspace::span_in(to.h_dim(), to.base().dim(), &moved, tol)?;
        cert.push(Check::new(axiom, anchor, subspace_distance(&span, to.alpha())?, tol.check()));
        Ok(())
    };
    family(AXIOMS[0], "V(α◁α) = α▷α", fl.on_left(s, &c.alpha)?, fl.on_right(t, &c.alpha)?)?;
    family(AXIOMS[1], "V(β̂▷β) = β̂◁β", fl.on_right(s, &c.beta)?, fl.on_left(t, &c.beta_hat)?)?;
    family(AXIOMS[2], "V(β̂▷β̂) = α▷β̂", fl.on_right(s, &c.beta_hat)?, fl.on_right(t, &c.beta_hat)?)?;
    family(AXIOMS[3], "V(β◁α) = β◁β", fl.on_left(s, &c.beta)?, fl.on_left(t, &c.beta)?)?;
    Ok(cert)
}

// ── the pentagon ──

/// Checks the pentagon for `V: source → target` in either flavor.
///
/// The five vertices of the diagram are realized in both bracketings as
/// quotients of `H ⊗ H ⊗ H`; the associators are the maps induced by the
/// identity of the plain triple product. Each edge records its own
/// well-definedness residual so that a failing candidate yields a failed
/// check rather than an error.
pub fn pentagon<F: Flavor>(
    flavor: &F,
    legs: [&F::Leg; 3],
    source: &RelativeTensorSpace,
    target: &RelativeTensorSpace,
    v: &ComplexMatrix,
) -> Result<Certificate> {
    let [rho, sigma, sigma_hat] = legs;
    let tol = flavor.tolerance();
    let (s, t) = (source, target);
    let h = s.left_dim();
    if v.shape() != (t.dim(), s.dim()) {
        return Err(dim_err("V does not map source onto target"));
    }
    let (f, sig) = flip(t, tol)?;
    let ih = identity(h);
    let dims = [h, h, h];

    let x1 = TripleSpace::new(flavor.two_fold(&flavor.on_right(s, sigma_hat)?, rho)?, s, Bracketing::Left)?;
    let x1r = TripleSpace::new(flavor.two_fold(sigma_hat, &flavor.on_left(s, rho)?)?, s, Bracketing::Right)?;
    let x2 = TripleSpace::new(flavor.two_fold(&flavor.on_right(t, sigma_hat)?, rho)?, t, Bracketing::Left)?;
    let x2r = TripleSpace::new(flavor.two_fold(rho, &flavor.on_left(s, sigma)?)?, s, Bracketing::Right)?;
    let x3 = TripleSpace::new(flavor.two_fold(&flavor.on_right(t, rho)?, sigma)?, t, Bracketing::Left)?;
    let x3r = TripleSpace::new(flavor.two_fold(rho, &flavor.on_left(t, sigma)?)?, t, Bracketing::Right)?;
    let x4r = TripleSpace::new(flavor.two_fold(sigma_hat, &flavor.on_right(t, rho)?)?, t, Bracketing::Right)?;
    let x5r = TripleSpace::new(flavor.two_fold(sigma_hat, &flavor.on_left(&f, rho)?)?, &f, Bracketing::Right)?;
    let x5 = TripleSpace::new(flavor.two_fold(&flavor.on_right(s, sigma)?, rho)?, s, Bracketing::Left)?;
    let x6 = TripleSpace::new(flavor.two_fold(&flavor.on_left(t, sigma_hat)?, rho)?, t, Bracketing::Left)?;
    let x7 = TripleSpace::new(flavor.two_fold(&flavor.on_left(s, rho)?, sigma)?, s, Bracketing::Left)?;

    let mut cert = Certificate::new();
    let thr = tol.check();
    let mut edge = |axiom: &str, anchor: &str, ind: crate::rtensor::Induced| -> ComplexMatrix {
        cert.push(Check::new(format!("edge {axiom}"), anchor, ind.residual, thr));
        ind.matrix
    };

    // top path
    let e1 = edge("V⊗1 first", "V₁₂ well defined", induced(&x2.space, &x1.space, v, &ih)?);
    let e2 = edge("associator second", "(ξ⊗η)⊗θ ↦ ξ⊗(η⊗θ)", triple_transfer(&x2r, &x2, dims, None)?);
    let e3 = edge("1⊗V third", "V₂₃ well defined", induced(&x3r.space, &x2r.space, &ih, v)?);
    let e4 = edge("associator fourth", "ξ⊗(η⊗θ) ↦ (ξ⊗η)⊗θ", triple_transfer(&x3, &x3r, dims, None)?);
    let top = e4 * e3 * e2 * e1;

    // bottom path
    let b1 = edge("associator first", "(ξ⊗η)⊗θ ↦ ξ⊗(η⊗θ)", triple_transfer(&x1r, &x1, dims, None)?);
    let b2 = edge("1⊗V second", "V₂₃ well defined", induced(&x4r.space, &x1r.space, &ih, v)?);
    let b3 = edge("1⊗Σ", "Σ(ξ⊗η) = η⊗ξ well defined", induced(&x5r.space, &x4r.space, &ih, &sig)?);
    let b4 = edge("associator third", "ξ⊗(η⊗θ) ↦ (ξ⊗η)⊗θ", triple_transfer(&x5, &x5r, dims, None)?);
    let b5 = edge("V⊗1 fourth", "V₁₂ well defined", induced(&x6.space, &x5.space, v, &ih)?);
    let b6 = edge("Σ₂₃", "ξ⊗η⊗θ ↦ ξ⊗θ⊗η", triple_transfer(&x7, &x6, dims, Some([0, 2, 1]))?);
    let b7 = edge("V⊗1 fifth", "V₁₂ well defined", induced(&x3.space, &x7.space, v, &ih)?);
    let bottom = b7 * b6 * b5 * b4 * b3 * b2 * b1;

    let residual = (&top - &bottom).norm();
    cert.push(Check::new("pentagon", "V₁₂V₁₃V₂₃ = V₂₃V₁₂", residual, tol.loose()));
    Ok(cert)
}

// ── certification ──

fn state_flavor(c: &PmuCandidate) -> StateFlavor {
    StateFlavor { ctx: c.linkage.context().clone(), tol: c.tol }
}

/// Invariants, the four intertwining families and the pentagon over the state.
pub fn check_pmu_vn(c: &PmuCandidate) -> Result<Certificate> {
    let mut cert = c.invariants()?;
    cert.extend(intertwining_vn(c)?);
    let fl = state_flavor(c);
    cert.extend(pentagon(&fl, [&c.rho, &c.sigma, &c.sigma_hat], &c.source, &c.target, &c.v)?);
    Ok(cert)
}

/// Invariants, the four factorization transports and the pentagon over the base.
pub fn check_pmu_cstar(c: &PmuCandidate) -> Result<Certificate> {
    let side = c.cstar_side()?;
    check_pmu_cstar_with(c, &side)
}

fn check_pmu_cstar_with(c: &PmuCandidate, side: &CStarSide) -> Result<Certificate> {
    let mut cert = c.invariants()?;
    cert.extend(intertwining_cstar(c, side)?);
    let fl = CStarFlavor { tol: c.tol };
    cert.extend(pentagon(&fl, [&c.alpha, &c.beta, &c.beta_hat], &side.source, &side.target, &side.v)?);
    Ok(cert)
}

/// Both certifications of one candidate, compared through the unitaries
/// identifying the state-based products with the C*-relative ones.
#[derive(Clone, Debug)]
pub struct PmuEquivalence {
    pub report: Equivalence,
    /// Worst residual of the two identifications.
    pub identification: f64,
    pub intertwining_state: bool,
    pub intertwining_cstar: bool,
}

impl PmuEquivalence {
    pub fn agree(&self) -> bool {
        self.report.agree() && self.intertwining_state == self.intertwining_cstar
    }
}

fn intertwining_passed(cert: &Certificate) -> bool {
    cert.checks.iter().filter(|c| c.axiom.starts_with("intertwining")).all(Check::passed)
}

pub fn pmu_equivalence(c: &PmuCandidate) -> Result<PmuEquivalence> {
    let side = c.cstar_side()?;
    let identification = side.phi_source.worst().max(side.phi_target.worst());
    let thr = c.tol.check() * libm::sqrt(c.source.dim().max(1) as f64);
    if identification > thr {
        return Err(pre_err(format!("state and base are not linked (identification residual {identification:.3e})")));
    }
    let state_side = check_pmu_vn(c)?;
    let cstar_side = check_pmu_cstar_with(c, &side)?;
    Ok(PmuEquivalence {
        intertwining_state: intertwining_passed(&state_side),
        intertwining_cstar: intertwining_passed(&cstar_side),
        report: Equivalence { state_side, cstar_side },
        identification,
    })
}

/// Names of the intertwining axioms, shared by both flavors.
pub fn intertwining_axioms() -> Vec<String> {
    AXIOMS.iter().map(|a| String::from(*a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{groupoid_pmu, groupoid_pmu_negative, FiniteGroupoid, PmuNegative};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn show(cert: &Certificate) -> String {
        let mut s = String::new();
        for c in &cert.checks {
            s += &format!("{}: {:.3e} / {:.1e}\n", c.axiom, c.residual, c.threshold);
        }
        s
    }

    #[test]
    fn group_unitary_passes_both_checks() {
        let c = groupoid_pmu(&FiniteGroupoid::cyclic(2).unwrap(), None, tol()).unwrap();
        let vn = check_pmu_vn(&c).unwrap();
        assert!(vn.passed(), "{}", show(&vn));
        let cs = check_pmu_cstar(&c).unwrap();
        assert!(cs.passed(), "{}", show(&cs));
    }

    #[test]
    fn pair_groupoid_unitary_passes_both_checks() {
        let c = groupoid_pmu(&FiniteGroupoid::pair(2).unwrap(), None, tol()).unwrap();
        let eq = pmu_equivalence(&c).unwrap();
        assert!(eq.report.state_side.passed(), "{}", show(&eq.report.state_side));
        assert!(eq.report.cstar_side.passed(), "{}", show(&eq.report.cstar_side));
        assert!(eq.agree());
    }

    #[test]
    fn swap_fails_only_the_pentagon() {
        let c = groupoid_pmu_negative(&FiniteGroupoid::cyclic(2).unwrap(), None, PmuNegative::Swap, tol()).unwrap();
        let eq = pmu_equivalence(&c).unwrap();
        for cert in [&eq.report.state_side, &eq.report.cstar_side] {
            assert_eq!(cert.failing_axioms(), alloc::vec!["pentagon"], "{}", show(cert));
        }
        assert!(eq.agree());
    }

    #[test]
    fn phase_perturbation_is_detected() {
        let c = groupoid_pmu_negative(&FiniteGroupoid::pair(2).unwrap(), None, PmuNegative::Phase, tol()).unwrap();
        let eq = pmu_equivalence(&c).unwrap();
        for cert in [&eq.report.state_side, &eq.report.cstar_side] {
            assert!(!cert.passed());
            assert!(cert.residual("pentagon").unwrap() >= 1e-4, "{}", show(cert));
        }
        assert!(eq.agree());
    }

    #[test]
    fn weighted_and_larger_groupoids_pass() {
        let g = FiniteGroupoid::pair(2).unwrap();
        let c = groupoid_pmu(&g, Some(&[0.3, 0.7]), tol()).unwrap();
        let eq = pmu_equivalence(&c).unwrap();
        assert!(eq.report.state_side.passed(), "{}", show(&eq.report.state_side));
        assert!(eq.report.cstar_side.passed(), "{}", show(&eq.report.cstar_side));
        let g = FiniteGroupoid::pair(2).unwrap().product(&FiniteGroupoid::cyclic(2).unwrap()).unwrap();
        let c = groupoid_pmu(&g, None, tol()).unwrap();
        let eq = pmu_equivalence(&c).unwrap();
        assert!(eq.report.state_side.passed() && eq.report.cstar_side.passed());
    }

    #[test]
    fn mixing_classes_breaks_intertwining_on_both_sides() {
        let c = groupoid_pmu(&FiniteGroupoid::pair(2).unwrap(), None, tol()).unwrap();
        // exp(iθX) with X swapping the classes of two pairs with different targets
        let s = c.source();
        let e = |i: usize| crate::linalg::basis_vector(4, i);
        let a = s.class_of(&e(0), &e(0)).unwrap().normalize();
        let b = s.class_of(&e(2), &e(0)).unwrap().normalize();
        let x = &a * b.adjoint() + &b * a.adjoint();
        let u = crate::linalg::unitary_exp(&x, 1e-3);
        let bad = c.with_unitary(c.unitary() * u).unwrap();
        let eq = pmu_equivalence(&bad).unwrap();
        assert!(!eq.intertwining_state && !eq.intertwining_cstar);
        assert!(eq.agree());
    }
}
