//! Faithful states and their GNS data.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{dim_err, pre_err, Error, Result};
use crate::linalg::{
    c, hermitian_eigen, identity, inverse, polar_unitary, rank, zeros, ComplexMatrix, ComplexVector, Tolerance, C64,
};
use crate::staralg::StarAlgebra;

/// A state `x ↦ tr(ρ x)` on a concrete algebra.
#[derive(Clone, Debug)]
pub struct State {
    algebra: StarAlgebra,
    density: ComplexMatrix,
    gram: ComplexMatrix,
}

impl State {
    pub fn new(algebra: StarAlgebra, density: ComplexMatrix, tol: Tolerance) -> Result<Self> {
        let n = algebra.carrier_dim();
        if density.shape() != (n, n) {
            return Err(dim_err(format!(
                "density of shape {}x{} for an algebra on C^{n}",
                density.nrows(),
                density.ncols()
            )));
        }
        let b = algebra.basis();
        let k = b.len();
        let mut gram = zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                gram[(i, j)] = (&density * b[i].adjoint() * &b[j]).trace();
            }
        }
        let st = State { algebra, density, gram };
        let (vals, _) = hermitian_eigen(&st.gram);
        let top = vals.first().copied().unwrap_or(0.0).max(1.0);
        if let Some(&low) = vals.last() {
            if low < -tol.check() * top {
                return Err(pre_err(format!("functional is not positive (Gram eigenvalue {low:.3e})")));
            }
        }
        if (st.gram.clone() - st.gram.adjoint()).norm() > tol.check() * top {
            return Err(pre_err("functional is not self-adjoint"));
        }
        if st.algebra.contains_unit(tol) {
            let one = st.value(&identity(n));
            if (one - c(1.0, 0.0)).norm() > tol.check() {
                return Err(pre_err(format!("state is not normalized (μ(1) = {:.6})", one.re)));
            }
        }
        Ok(st)
    }

    /// The vector state `x ↦ ⟨v, x v⟩`.
    pub fn vector_state(algebra: StarAlgebra, v: &ComplexVector, tol: Tolerance) -> Result<Self> {
        let rho = v * v.adjoint();
        Self::new(algebra, rho, tol)
    }

    pub fn algebra(&self) -> &StarAlgebra {
        &self.algebra
    }

    pub fn density(&self) -> &ComplexMatrix {
        &self.density
    }

    /// `G_ij = μ(b_i* b_j)`.
    pub fn gram(&self) -> &ComplexMatrix {
        &self.gram
    }

    pub fn value(&self, x: &ComplexMatrix) -> C64 {
        (&self.density * x).trace()
    }

    pub fn is_faithful(&self, tol: Tolerance) -> bool {
        rank(&self.gram, tol) == self.algebra.dim()
    }

    /// `xᵀ ↦ μ(x)` on the transposed algebra.
    pub fn transpose(&self) -> State {
        let algebra = self.algebra.transpose();
        let density = self.density.transpose();
        // μᵀ(b_iᵀ* b_jᵀ) = μ(b_j b_i*): the Gram matrix must be recomputed.
        let b = algebra.basis();
        let k = b.len();
        let mut gram = zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                gram[(i, j)] = (&density * b[i].adjoint() * &b[j]).trace();
            }
        }
        State { algebra, density, gram }
    }
}

/// An antilinear map `v ↦ M·conj(v)`.
#[derive(Clone, Debug)]
pub struct AntilinearMap {
    matrix: ComplexMatrix,
}

impl AntilinearMap {
    pub fn new(matrix: ComplexMatrix) -> Self {
        AntilinearMap { matrix }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, v: &ComplexVector) -> ComplexVector {
        &self.matrix * v.conjugate()
    }

    /// The linear operator `J T J`.
    pub fn sandwich(&self, t: &ComplexMatrix) -> ComplexMatrix {
        &self.matrix * t.conjugate() * self.matrix.conjugate()
    }

    /// The linear operator `J ∘ J`.
    pub fn square(&self) -> ComplexMatrix {
        &self.matrix * self.matrix.conjugate()
    }
}

/// GNS representation `(H_μ, π_μ, ζ_μ)` with modular conjugation and opposite representation.
///
/// Coordinates on `H_μ` are `w = L* c`, where `c` are basis coordinates of an
/// algebra element and `G = L L*` factors the Gram matrix.
#[derive(Clone, Debug)]
pub struct GnsTriple {
    to_hilbert: ComplexMatrix,
    pi: Vec<ComplexMatrix>,
    pi_op: Vec<ComplexMatrix>,
    zeta: ComplexVector,
    j: AntilinearMap,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnsResiduals {
    pub state: f64,
    pub multiplicative: f64,
    pub involution: f64,
    pub commutation: f64,
    pub cyclic: bool,
    pub cocyclic: bool,
}

impl GnsTriple {
    pub fn new(state: &State, tol: Tolerance) -> Result<Self> {
        let alg = state.algebra();
        let k = alg.dim();
        let g = state.gram();
        let r = rank(g, tol);
        if r < k {
            return Err(Error::NotFaithful { rank: r, dim: k });
        }
        let l = match g.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let (vals, vecs) = hermitian_eigen(g);
                let d: Vec<C64> = vals.iter().map(|&x| c(libm::sqrt(x.max(0.0)), 0.0)).collect();
                vecs * crate::linalg::diag(&d)
            }
        };
        let to_hilbert = l.adjoint();
        let from_hilbert = inverse(&to_hilbert, tol)?;
        let b = alg.basis();
        let coords = |x: &ComplexMatrix| -> Result<ComplexVector> { alg.coordinates(x) };

        let mut pi = Vec::with_capacity(k);
        for bj in b {
            let mut m = zeros(k, k);
            for (i, bi) in b.iter().enumerate() {
                m.set_column(i, &coords(&(bj * bi))?);
            }
            pi.push(&to_hilbert * m * &from_hilbert);
        }
        let zeta = &to_hilbert * coords(&identity(alg.carrier_dim()))?;

        let mut star = zeros(k, k);
        for (i, bi) in b.iter().enumerate() {
            star.set_column(i, &coords(&bi.adjoint())?);
        }
        let s = &to_hilbert * star * from_hilbert.conjugate();
        let j = AntilinearMap::new(polar_unitary(&s));
        let pi_op = pi.iter().map(|p| j.sandwich(&p.adjoint())).collect();
        Ok(GnsTriple { to_hilbert, pi, pi_op, zeta, j })
    }

    pub fn dim(&self) -> usize {
        self.zeta.len()
    }

    /// The class of an algebra element in `H_μ`.
    pub fn vector(&self, algebra: &StarAlgebra, a: &ComplexMatrix) -> Result<ComplexVector> {
        Ok(&self.to_hilbert * algebra.coordinates(a)?)
    }

    pub fn pi(&self, algebra: &StarAlgebra, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        combine(&self.pi, &algebra.coordinates(a)?)
    }

    pub fn pi_op(&self, algebra: &StarAlgebra, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        combine(&self.pi_op, &algebra.coordinates(a)?)
    }

    /// `π_μ(b_k)` for the algebra basis.
    pub fn pi_images(&self) -> &[ComplexMatrix] {
        &self.pi
    }

    /// `π_μ^op(b_k^op) = J π_μ(b_k)* J`.
    pub fn pi_op_images(&self) -> &[ComplexMatrix] {
        &self.pi_op
    }

    pub fn zeta(&self) -> &ComplexVector {
        &self.zeta
    }

    pub fn modular_conjugation(&self) -> &AntilinearMap {
        &self.j
    }

    /// `[π(b_k) ζ]_k`, the change of coordinates from the algebra basis.
    pub fn orbit(&self) -> ComplexMatrix {
        orbit(&self.pi, &self.zeta)
    }

    /// `[π^op(b_k) ζ]_k`.
    pub fn op_orbit(&self) -> ComplexMatrix {
        orbit(&self.pi_op, &self.zeta)
    }

    pub fn residuals(&self, state: &State, tol: Tolerance) -> Result<GnsResiduals> {
        let alg = state.algebra();
        let b = alg.basis();
        let mut st: f64 = 0.0;
        let mut mult: f64 = 0.0;
        let mut comm: f64 = 0.0;
        for (i, bi) in b.iter().enumerate() {
            let v = self.zeta.dotc(&(&self.pi[i] * &self.zeta));
            st = st.max((v - state.value(bi)).norm());
            for (j, bj) in b.iter().enumerate() {
                let lhs = self.pi(alg, &(bi * bj))?;
                mult = mult.max((lhs - &self.pi[i] * &self.pi[j]).norm());
                comm = comm.max((&self.pi[i] * &self.pi_op[j] - &self.pi_op[j] * &self.pi[i]).norm());
            }
        }
        let inv = (self.j.square() - identity(self.dim())).norm();
        let n = self.dim();
        Ok(GnsResiduals {
            state: st,
            multiplicative: mult,
            involution: inv,
            commutation: comm,
            cyclic: rank(&self.orbit(), tol) == n,
            cocyclic: rank(&self.op_orbit(), tol) == n,
        })
    }
}

pub(crate) fn combine(images: &[ComplexMatrix], coords: &ComplexVector) -> Result<ComplexMatrix> {
    let first = images.first().ok_or_else(|| dim_err("empty image list"))?;
    let mut out = zeros(first.nrows(), first.ncols());
    for (m, &w) in images.iter().zip(coords.iter()) {
        out += m * w;
    }
    Ok(out)
}

pub(crate) fn orbit(ops: &[ComplexMatrix], v: &ComplexVector) -> ComplexMatrix {
    let rows = ops.first().map_or(v.len(), |o| o.nrows());
    let mut m = zeros(rows, ops.len());
    for (k, op) in ops.iter().enumerate() {
        m.set_column(k, &(op * v));
    }
    m
}

/// A faithful state together with the GNS data of both it and its transpose.
///
/// Representations of `N` and of `N^op` are stored as images of the basis of
/// `N`; the transposed algebra `Nᵀ ≅ N^op` uses the basis `b_kᵀ` in the same
/// order, so the same image lists serve both sides.
#[derive(Clone, Debug)]
pub struct StateContext {
    state: State,
    gns: GnsTriple,
    state_t: State,
    gns_t: GnsTriple,
}

impl StateContext {
    pub fn new(state: State, tol: Tolerance) -> Result<Self> {
        let gns = GnsTriple::new(&state, tol)?;
        let state_t = state.transpose();
        let gns_t = GnsTriple::new(&state_t, tol)?;
        Ok(StateContext { state, gns, state_t, gns_t })
    }

    pub fn algebra(&self) -> &StarAlgebra {
        self.state.algebra()
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn gns(&self) -> &GnsTriple {
        &self.gns
    }

    pub fn transposed_state(&self) -> &State {
        &self.state_t
    }

    pub fn transposed_gns(&self) -> &GnsTriple {
        &self.gns_t
    }

    pub fn dim(&self) -> usize {
        self.state.algebra().dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_diag, unit};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn d2() -> StarAlgebra {
        StarAlgebra::with_basis(2, alloc::vec![unit(2, 2, 0, 0), unit(2, 2, 1, 1)], tol()).unwrap()
    }

    #[test]
    fn trace_state_on_m2() {
        let st = State::new(StarAlgebra::full(2), identity(2) * c(0.5, 0.0), tol()).unwrap();
        let g = GnsTriple::new(&st, tol()).unwrap();
        assert_eq!(g.dim(), 4);
        let r = g.residuals(&st, tol()).unwrap();
        assert!(r.state < 1e-12 && r.multiplicative < 1e-12 && r.involution < 1e-12 && r.commutation < 1e-12);
        assert!(r.cyclic && r.cocyclic);
    }

    #[test]
    fn half_half_on_diagonal() {
        let st = State::new(d2(), real_diag(&[0.5, 0.5]), tol()).unwrap();
        let g = GnsTriple::new(&st, tol()).unwrap();
        // Gram diag(1/2, 1/2) has Cholesky factor diag(1/√2, 1/√2).
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((g.zeta()[0] - c(h, 0.0)).norm() < 1e-12);
        assert!((g.zeta()[1] - c(h, 0.0)).norm() < 1e-12);
        assert!((&g.pi_images()[0] - real_diag(&[1.0, 0.0])).norm() < 1e-12);
        assert!((&g.pi_op_images()[1] - real_diag(&[0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn vector_state_on_m2_is_not_faithful() {
        let e1 = crate::linalg::basis_vector(2, 0);
        let st = State::vector_state(StarAlgebra::full(2), &e1, tol()).unwrap();
        assert!(matches!(GnsTriple::new(&st, tol()), Err(Error::NotFaithful { .. })));
    }

    #[test]
    fn non_tracial_state_has_involutive_conjugation() {
        let rho = real_diag(&[0.2, 0.8]) + (unit(2, 2, 0, 1) + unit(2, 2, 1, 0)) * c(0.1, 0.0);
        let st = State::new(StarAlgebra::full(2), rho, tol()).unwrap();
        let g = GnsTriple::new(&st, tol()).unwrap();
        let r = g.residuals(&st, tol()).unwrap();
        assert!(r.involution < 1e-10 && r.commutation < 1e-10, "{r:?}");
        assert!(r.cyclic && r.cocyclic);
    }
}
