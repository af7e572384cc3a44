//! C*-bases `(ℌ, 𝔅, 𝔅†)`, bicyclic vectors and the unitary identifying a
//! standard base with the GNS data of its vector state.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{dim_err, pre_err, Error, Result};
use crate::gns::{orbit, AntilinearMap, GnsTriple, State};
use crate::linalg::{
    inverse, polar_unitary, rank, subspace_distance, unitarity_residual, ComplexMatrix, ComplexVector,
    OperatorSubspace, Tolerance,
};
use crate::rng::SeededRng;
use crate::staralg::{AlgebraMap, Multiplicativity, StarAlgebra};

const BICYCLIC_SEED: u64 = 0xb1c7_c11c;
pub const DEFAULT_BICYCLIC_ATTEMPTS: usize = 5;

/// Two commuting nondegenerate *-algebras on a common Hilbert space.
#[derive(Clone, Debug)]
pub struct CStarBase {
    dim: usize,
    b: StarAlgebra,
    b_dag: StarAlgebra,
    bicyclic: Option<ComplexVector>,
}

impl CStarBase {
    pub fn new(b: StarAlgebra, b_dag: StarAlgebra, bicyclic: Option<ComplexVector>, tol: Tolerance) -> Result<Self> {
        let dim = b.carrier_dim();
        if b_dag.carrier_dim() != dim {
            return Err(dim_err("the two algebras of a base act on different spaces"));
        }
        let mut comm: f64 = 0.0;
        for x in b.basis() {
            for y in b_dag.basis() {
                comm = comm.max((x * y - y * x).norm());
            }
        }
        if comm > tol.check() {
            return Err(pre_err(format!("base algebras do not commute (residual {comm:.3e})")));
        }
        if !b.is_nondegenerate(tol) || !b_dag.is_nondegenerate(tol) {
            return Err(pre_err("base algebras must be nondegenerate"));
        }
        let bicyclic = match bicyclic {
            None => None,
            Some(v) => {
                if v.len() != dim {
                    return Err(dim_err("bicyclic vector has the wrong length"));
                }
                if !is_cyclic(&b, &v, tol) || !is_cyclic(&b_dag, &v, tol) {
                    return Err(pre_err("supplied vector is not bicyclic"));
                }
                Some(v)
            }
        };
        Ok(CStarBase { dim, b, b_dag, bicyclic })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b(&self) -> &StarAlgebra {
        &self.b
    }

    pub fn b_dag(&self) -> &StarAlgebra {
        &self.b_dag
    }

    pub fn bicyclic(&self) -> Option<&ComplexVector> {
        self.bicyclic.as_ref()
    }

    /// `ζ`, required by every construction that needs a standard base.
    pub fn zeta(&self) -> Result<&ComplexVector> {
        self.bicyclic.as_ref().ok_or_else(|| pre_err("construction needs a base with a bicyclic vector"))
    }

    /// The base `(ℌ, 𝔅†, 𝔅)`.
    pub fn opposite(&self) -> CStarBase {
        CStarBase { dim: self.dim, b: self.b_dag.clone(), b_dag: self.b.clone(), bicyclic: self.bicyclic.clone() }
    }

    /// Same base with a (bicyclic) vector recorded.
    pub fn with_bicyclic(&self, v: ComplexVector, tol: Tolerance) -> Result<CStarBase> {
        CStarBase::new(self.b.clone(), self.b_dag.clone(), Some(v), tol)
    }

    /// `Ad_W` applied to both algebras and to the vector.
    pub fn conjugate_by(&self, w: &ComplexMatrix) -> Result<CStarBase> {
        Ok(CStarBase {
            dim: self.dim,
            b: self.b.conjugate_by(w)?,
            b_dag: self.b_dag.conjugate_by(w)?,
            bicyclic: self.bicyclic.as_ref().map(|v| w * v),
        })
    }

    /// Largest distance between the algebras of two bases on the same space.
    pub fn distance(&self, other: &CStarBase) -> Result<f64> {
        let a = subspace_distance(self.b.subspace(), other.b.subspace())?;
        let b = subspace_distance(self.b_dag.subspace(), other.b_dag.subspace())?;
        Ok(a.max(b))
    }

    /// Random search for a vector cyclic for both algebras.
    pub fn find_bicyclic(&self, attempts: usize, tol: Tolerance) -> Option<ComplexVector> {
        if let Some(v) = &self.bicyclic {
            return Some(v.clone());
        }
        let mut rng = SeededRng::new(BICYCLIC_SEED);
        for _ in 0..attempts {
            let v = rng.unit_vector(self.dim);
            if is_cyclic(&self.b, &v, tol) && is_cyclic(&self.b_dag, &v, tol) {
                return Some(v);
            }
        }
        None
    }

    fn standard_vector(&self, tol: Tolerance) -> Result<ComplexVector> {
        self.find_bicyclic(DEFAULT_BICYCLIC_ATTEMPTS, tol)
            .ok_or_else(|| pre_err("base is not standard: no bicyclic vector found"))
    }

    /// Certify `𝔅† = 𝔅′` and `𝔅 = (𝔅†)′` on a standard base.
    pub fn check_standard_commutant(&self, tol: Tolerance) -> Result<CommutantReport> {
        self.standard_vector(tol)?;
        let bc = self.b.commutant(tol)?;
        let bdc = self.b_dag.commutant(tol)?;
        Ok(CommutantReport {
            dagger_vs_commutant: subspace_distance(self.b_dag.subspace(), bc.subspace())?,
            base_vs_bicommutant: subspace_distance(self.b.subspace(), bdc.subspace())?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutantReport {
    pub dagger_vs_commutant: f64,
    pub base_vs_bicommutant: f64,
}

impl CommutantReport {
    pub fn worst(&self) -> f64 {
        self.dagger_vs_commutant.max(self.base_vs_bicommutant)
    }
}

pub fn is_cyclic(alg: &StarAlgebra, v: &ComplexVector, tol: Tolerance) -> bool {
    v.len() == alg.carrier_dim() && rank(&orbit(alg.basis(), v), tol) == alg.carrier_dim()
}

/// The base `(H_μ, π_μ(N), π_μ^op(N^op))` with `ζ_μ` recorded.
pub fn cbase_from_state(state: &State, tol: Tolerance) -> Result<CStarBase> {
    let g = GnsTriple::new(state, tol)?;
    cbase_from_gns(&g, tol)
}

pub fn cbase_from_gns(g: &GnsTriple, tol: Tolerance) -> Result<CStarBase> {
    let n = g.dim();
    let b = StarAlgebra::from_subspace(n, OperatorSubspace::span_in(n, n, g.pi_images(), tol)?);
    let b_dag = StarAlgebra::from_subspace(n, OperatorSubspace::span_in(n, n, g.pi_op_images(), tol)?);
    CStarBase::new(b, b_dag, Some(g.zeta().clone()), tol)
}

/// The unitary `U: ℌ → H_μ` of a standard base with respect to a bicyclic vector.
#[derive(Clone, Debug)]
pub struct BaseEquivalence {
    /// The vector state `⟨ζ, · ζ⟩` on `𝔅`.
    pub state: State,
    pub gns: GnsTriple,
    pub unitary: ComplexMatrix,
    pub unitarity: f64,
    /// `‖Uζ − ζ_μ‖`.
    pub vector: f64,
    /// Distance of `Ad_U(𝔅)` from `π_μ(𝔅)`, elementwise on the basis.
    pub base: f64,
    /// Distance of `Ad_U(𝔅†)` from `π_μ^op(𝔅^op)` as subspaces.
    pub dagger: f64,
}

impl BaseEquivalence {
    pub fn worst(&self) -> f64 {
        self.unitarity.max(self.vector).max(self.base).max(self.dagger)
    }
}

pub fn base_equivalence(base: &CStarBase, zeta: &ComplexVector, tol: Tolerance) -> Result<BaseEquivalence> {
    if zeta.len() != base.dim {
        return Err(dim_err("vector does not live on the base space"));
    }
    if !is_cyclic(&base.b, zeta, tol) || !is_cyclic(&base.b_dag, zeta, tol) {
        return Err(pre_err("vector is not bicyclic"));
    }
    let state = State::vector_state(base.b.clone(), zeta, tol)?;
    if !state.is_faithful(tol) {
        return Err(Error::Numeric("vector state of a bicyclic vector failed to be faithful".into()));
    }
    let gns = GnsTriple::new(&state, tol)?;
    let x = orbit(base.b.basis(), zeta);
    let u = gns.orbit() * inverse(&x, tol)?;
    let mut elem: f64 = 0.0;
    for (bk, pk) in base.b.basis().iter().zip(gns.pi_images()) {
        elem = elem.max((&u * bk * u.adjoint() - pk).norm());
    }
    let n = base.dim;
    let moved: Vec<ComplexMatrix> = base.b_dag.basis().iter().map(|y| &u * y * u.adjoint()).collect();
    let moved = OperatorSubspace::span_in(n, n, &moved, tol)?;
    let op = OperatorSubspace::span_in(n, n, gns.pi_op_images(), tol)?;
    let dagger = subspace_distance(&moved, &op)?;
    Ok(BaseEquivalence {
        unitarity: unitarity_residual(&u),
        vector: (&u * zeta - gns.zeta()).norm(),
        base: elem,
        dagger,
        state,
        gns,
        unitary: u,
    })
}

/// `U: ℌ → H_μ` with `U(iso(n) ζ) = π_μ(n) ζ_μ` for a given isomorphism
/// `iso: N → 𝔅`, stored by the images of the basis of `N`.
pub fn link_unitary(
    base: &CStarBase,
    zeta: &ComplexVector,
    gns: &GnsTriple,
    iso_images: &[ComplexMatrix],
    tol: Tolerance,
) -> Result<ComplexMatrix> {
    if iso_images.len() != gns.pi_images().len() {
        return Err(dim_err("isomorphism images do not match the algebra dimension"));
    }
    let x = orbit(iso_images, zeta);
    let u = gns.orbit() * inverse(&x, tol)?;
    let r = unitarity_residual(&u);
    if r > tol.check() * (base.dim as f64).max(1.0) {
        return Err(pre_err(format!("linking map is not unitary (residual {r:.3e})")));
    }
    Ok(u)
}

/// Modular conjugation of a standard base: the antiunitary polar part of `bζ ↦ b*ζ`.
#[derive(Clone, Debug)]
pub struct BaseConjugation {
    pub j: AntilinearMap,
    /// Worst membership residual of `J b* J` in `𝔅†`.
    pub membership: f64,
    /// Worst residual of `J(ab)*J = (J b* J)(J a* J)`.
    pub anti_multiplicative: f64,
    /// Whether `b^op ↦ J b* J` is injective and onto `𝔅†`.
    pub bijective: bool,
}

pub fn modular_conjugation_of_base(base: &CStarBase, zeta: &ComplexVector, tol: Tolerance) -> Result<BaseConjugation> {
    if !is_cyclic(&base.b, zeta, tol) || !is_cyclic(&base.b_dag, zeta, tol) {
        return Err(pre_err("vector is not bicyclic"));
    }
    let b = base.b.basis();
    let x = orbit(b, zeta);
    let adj: Vec<ComplexMatrix> = b.iter().map(|m| m.adjoint()).collect();
    let xs = orbit(&adj, zeta);
    let s = xs * inverse(&x.conjugate(), tol)?;
    let j = AntilinearMap::new(polar_unitary(&s));
    let images: Vec<ComplexMatrix> = b.iter().map(|m| j.sandwich(&m.adjoint())).collect();
    let membership = base.b_dag.excess(&images)?;
    let map = AlgebraMap::from_images(&base.b, images.clone())?;
    let anti = map.residuals(&base.b, Multiplicativity::AntiHomomorphism)?;
    let n = base.dim;
    let span = OperatorSubspace::span_in(n, n, &images, tol)?;
    let bijective = map.is_faithful(tol) && subspace_distance(&span, base.b_dag.subspace())? <= tol.check();
    Ok(BaseConjugation { j, membership, anti_multiplicative: anti.multiplicative, bijective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, distance, identity, real_diag, unit};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    /// ℌ = M₂ with the HS inner product, vectorized column-major:
    /// left multiplication is I⊗a, right multiplication by a is aᵀ⊗I.
    fn standard_m2() -> CStarBase {
        let full = StarAlgebra::full(2);
        let left: Vec<_> = full.basis().iter().map(|a| crate::linalg::kron(&identity(2), a)).collect();
        let right: Vec<_> = full.basis().iter().map(|a| crate::linalg::kron(&a.transpose(), &identity(2))).collect();
        let b = StarAlgebra::from_spanning_set(4, &left, tol()).unwrap();
        let bd = StarAlgebra::from_spanning_set(4, &right, tol()).unwrap();
        CStarBase::new(b, bd, None, tol()).unwrap()
    }

    fn identity_vector() -> ComplexVector {
        crate::linalg::vectorize(&identity(2)) * c(core::f64::consts::FRAC_1_SQRT_2, 0.0)
    }

    #[test]
    fn standard_form_is_standard() {
        let base = standard_m2();
        let z = identity_vector();
        assert!(is_cyclic(base.b(), &z, tol()) && is_cyclic(base.b_dag(), &z, tol()));
        assert!(base.find_bicyclic(DEFAULT_BICYCLIC_ATTEMPTS, tol()).is_some());
        assert!(base.check_standard_commutant(tol()).unwrap().worst() < 1e-10);
    }

    #[test]
    fn scalars_on_c2_have_no_bicyclic_vector() {
        let s = StarAlgebra::scalars(2);
        let base = CStarBase::new(s.clone(), s, None, tol()).unwrap();
        assert!(base.find_bicyclic(DEFAULT_BICYCLIC_ATTEMPTS, tol()).is_none());
    }

    #[test]
    fn diagonal_base_accepts_flat_vector() {
        let d = StarAlgebra::with_basis(2, alloc::vec![unit(2, 2, 0, 0), unit(2, 2, 1, 1)], tol()).unwrap();
        let base = CStarBase::new(d.clone(), d, None, tol()).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let v = ComplexVector::from_column_slice(&[c(h, 0.0), c(h, 0.0)]);
        assert!(base.with_bicyclic(v, tol()).is_ok());
    }

    #[test]
    fn multiplicity_base_is_rejected() {
        let d = StarAlgebra::closure(3, &[real_diag(&[1.0, 1.0, 2.0])], true, tol()).unwrap();
        let base = CStarBase::new(d.clone(), d, None, tol()).unwrap();
        assert!(matches!(base.check_standard_commutant(tol()), Err(Error::Precondition(_))));
    }

    #[test]
    fn trace_state_base_passes_commutant_check() {
        let st = State::new(StarAlgebra::full(2), identity(2) * c(0.5, 0.0), tol()).unwrap();
        let base = cbase_from_state(&st, tol()).unwrap();
        assert_eq!(base.dim(), 4);
        assert_eq!(base.b().dim(), 4);
        assert_eq!(base.b_dag().dim(), 4);
        assert!(base.check_standard_commutant(tol()).unwrap().worst() < 1e-10);
    }

    #[test]
    fn equivalence_of_standard_m2() {
        let base = standard_m2();
        let z = identity_vector();
        let eq = base_equivalence(&base, &z, tol()).unwrap();
        assert!(eq.worst() < 1e-10, "{:?}", eq.worst());
        // The vector state of I/√2 is the normalized trace.
        for b in base.b().basis() {
            let tr = b.trace() * c(0.5, 0.0);
            // b = I⊗a has trace 2·tr(a), so tr(a)/2 = trace(b)/4.
            let expected = tr * c(0.5, 0.0);
            assert!((eq.state.value(b) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_of_vector_moves_into_unitary() {
        let base = standard_m2();
        let z = identity_vector();
        let ph = C64::from_polar(1.0, 0.7);
        let a = base_equivalence(&base, &z, tol()).unwrap();
        let b = base_equivalence(&base, &(&z * ph), tol()).unwrap();
        // Same state, so same GNS space; U picks up the conjugate phase.
        assert!(distance(&(&b.unitary * ph), &a.unitary) < 1e-10);
        for y in base.b().basis() {
            let l = &a.unitary * y * a.unitary.adjoint();
            let r = &b.unitary * y * b.unitary.adjoint();
            assert!(distance(&l, &r) < 1e-10);
        }
    }

    use crate::linalg::C64;

    #[test]
    fn gns_base_links_to_identity() {
        let rho = real_diag(&[0.3, 0.7]) + (unit(2, 2, 0, 1) + unit(2, 2, 1, 0)) * c(0.2, 0.0);
        let st = State::new(StarAlgebra::full(2), rho, tol()).unwrap();
        let g = GnsTriple::new(&st, tol()).unwrap();
        let base = cbase_from_gns(&g, tol()).unwrap();
        let u = link_unitary(&base, g.zeta(), &g, g.pi_images(), tol()).unwrap();
        assert!(distance(&u, &identity(4)) < 1e-10);
        let eq = base_equivalence(&base, g.zeta(), tol()).unwrap();
        assert!(eq.worst() < 1e-9);
        // Pulling the GNS base of the recovered state back along U gives the original base.
        let back = cbase_from_gns(&eq.gns, tol()).unwrap().conjugate_by(&eq.unitary.adjoint()).unwrap();
        assert!(back.distance(&base).unwrap() < 1e-9);
    }

    #[test]
    fn conjugation_of_standard_m2_is_adjoint_map() {
        let base = standard_m2();
        let z = identity_vector();
        let bc = modular_conjugation_of_base(&base, &z, tol()).unwrap();
        assert!(bc.membership < 1e-10 && bc.anti_multiplicative < 1e-10 && bc.bijective);
        // J(vec a) = vec(a*): check on a generic matrix.
        let a = unit(2, 2, 0, 1) * c(1.0, 2.0) + unit(2, 2, 1, 1) * c(0.5, -1.0);
        let ja = bc.j.apply(&crate::linalg::vectorize(&a));
        assert!((ja - crate::linalg::vectorize(&a.adjoint())).norm() < 1e-10);
    }

    #[test]
    fn conjugation_of_diagonal_base_is_complex_conjugation() {
        let d = StarAlgebra::with_basis(2, alloc::vec![unit(2, 2, 0, 0), unit(2, 2, 1, 1)], tol()).unwrap();
        let base = CStarBase::new(d.clone(), d, None, tol()).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let z = ComplexVector::from_column_slice(&[c(h, 0.0), c(h, 0.0)]);
        let bc = modular_conjugation_of_base(&base, &z, tol()).unwrap();
        assert!(distance(bc.j.matrix(), &identity(2)) < 1e-12);
    }
}
