//! C*-factorizations `α ⊆ L(ℌ, H)` and their representations `ρ_α` of `𝔅†`.

use alloc::format;
use alloc::vec::Vec;

use crate::cbase::CStarBase;
use crate::error::{dim_err, pre_err, Error, Result};
use crate::gns::orbit;
use crate::linalg::{
    intertwiner_space, inverse, rank, subspace_distance, zeros, ComplexMatrix, ComplexVector, OperatorSubspace,
    Tolerance,
};
use crate::staralg::{AlgebraMap, Multiplicativity};

/// A factorization over a standard base, certified at construction.
#[derive(Clone, Debug)]
pub struct CStarFactorization {
    base: CStarBase,
    h_dim: usize,
    alpha: OperatorSubspace,
    rho: AlgebraMap,
    /// `Y = [ξ_k ζ]_k`, an isomorphism from `α`-coordinates onto `H`.
    embed: ComplexMatrix,
    embed_inv: ComplexMatrix,
    residuals: FactorizationResiduals,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorizationResiduals {
    /// Distance of `[α*α]` from `𝔅`.
    pub inner: f64,
    /// Distance of `[α𝔅]` from `α`.
    pub module: f64,
    /// Worst `‖ρ_α(b†)ξ − ξb†‖` over basis pairs.
    pub defining: f64,
    /// Homomorphism residual of `ρ_α`.
    pub homomorphism: f64,
}

impl CStarFactorization {
    /// Certify the span of `mats ⊆ L(ℌ, H)` as a factorization over `base`.
    pub fn new(base: &CStarBase, h_dim: usize, mats: &[ComplexMatrix], tol: Tolerance) -> Result<Self> {
        let zeta = base.zeta()?.clone();
        let d = base.dim();
        let alpha = OperatorSubspace::span_in(h_dim, d, mats, tol)?;
        let xs = alpha.basis();
        let invalid = |m: alloc::string::String| Error::InvalidFactorization(m);

        let mut prods = Vec::with_capacity(xs.len() * xs.len());
        for x in xs {
            for y in xs {
                prods.push(x.adjoint() * y);
            }
        }
        let inner = subspace_distance(&OperatorSubspace::span_in(d, d, &prods, tol)?, base.b().subspace())?;
        if inner > tol.check() {
            return Err(invalid(format!("[α*α] differs from 𝔅 (distance {inner:.3e})")));
        }
        let mut moved = Vec::with_capacity(xs.len() * base.b().dim());
        for x in xs {
            for b in base.b().basis() {
                moved.push(x * b);
            }
        }
        let module = subspace_distance(&OperatorSubspace::span_in(h_dim, d, &moved, tol)?, &alpha)?;
        if module > tol.check() {
            return Err(invalid(format!("[α𝔅] differs from α (distance {module:.3e})")));
        }
        let mut wide = zeros(h_dim, xs.len() * d);
        for (k, x) in xs.iter().enumerate() {
            wide.view_mut((0, k * d), (h_dim, d)).copy_from(x);
        }
        if rank(&wide, tol) != h_dim {
            return Err(invalid("[αℌ] is a proper subspace of H".into()));
        }
        if alpha.dim() != h_dim {
            return Err(invalid(format!("dim α = {} but dim H = {h_dim}", alpha.dim())));
        }
        let embed = orbit(xs, &zeta);
        let embed_inv = inverse(&embed, tol)?;

        let bd = base.b_dag();
        let mut images = Vec::with_capacity(bd.dim());
        for y in bd.basis() {
            let moved: Vec<ComplexMatrix> = xs.iter().map(|x| x * y).collect();
            images.push(orbit(&moved, &zeta) * &embed_inv);
        }
        let rho = AlgebraMap::from_images(bd, images)?;
        let mut defining: f64 = 0.0;
        for (m, y) in rho.images().iter().zip(bd.basis()) {
            for x in xs {
                defining = defining.max((m * x - x * y).norm());
            }
        }
        let hom = rho.residuals(bd, Multiplicativity::Homomorphism)?.worst();
        let scale = libm::sqrt(h_dim as f64).max(1.0);
        if defining > tol.check() * scale || hom > tol.check() * scale {
            return Err(invalid(format!(
                "ρ_α fails its defining relation (residual {defining:.3e}, homomorphism {hom:.3e})"
            )));
        }
        if !rho.is_faithful(tol) || !rho.is_nondegenerate(tol) {
            return Err(invalid("ρ_α is not faithful and nondegenerate".into()));
        }
        Ok(CStarFactorization {
            base: base.clone(),
            h_dim,
            alpha,
            rho,
            embed,
            embed_inv,
            residuals: FactorizationResiduals { inner, module, defining, homomorphism: hom },
        })
    }

    pub fn base(&self) -> &CStarBase {
        &self.base
    }

    pub fn h_dim(&self) -> usize {
        self.h_dim
    }

    pub fn alpha(&self) -> &OperatorSubspace {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    /// `ρ_α`, as images of the basis of `𝔅†`.
    pub fn rho(&self) -> &AlgebraMap {
        &self.rho
    }

    pub fn residuals(&self) -> FactorizationResiduals {
        self.residuals
    }

    /// `Y = [ξ_k ζ]`, sending `α`-coordinates to vectors of `H`.
    pub fn embedding(&self) -> &ComplexMatrix {
        &self.embed
    }

    /// `Y⁻¹`, sending vectors of `H` to `α`-coordinates of `R(ξ)`.
    pub fn coordinate_map(&self) -> &ComplexMatrix {
        &self.embed_inv
    }

    /// Coordinates of `x ∈ α`, failing if `x` lies outside `α`.
    pub fn coordinates(&self, x: &ComplexMatrix, tol: Tolerance) -> Result<ComplexVector> {
        let r = self.alpha.residual(x)?;
        if r > tol.check() * x.norm().max(1.0) {
            return Err(Error::Membership { what: "the factorization".into(), residual: r });
        }
        self.alpha.coordinates(x)
    }

    /// The unique `T ∈ α` with `Tζ = ξ`.
    pub fn r_operator(&self, xi: &ComplexVector) -> Result<ComplexMatrix> {
        if xi.len() != self.h_dim {
            return Err(dim_err(format!("vector of length {} in a space of dimension {}", xi.len(), self.h_dim)));
        }
        let coords = &self.embed_inv * xi;
        Ok(self.alpha.element(coords.as_slice()))
    }

    /// Span of `{X ξ : ξ ∈ α}` for an operator `X: H → K`.
    pub fn transported(&self, x: &ComplexMatrix, tol: Tolerance) -> Result<OperatorSubspace> {
        if x.ncols() != self.h_dim {
            return Err(dim_err("transporting operator does not act on H"));
        }
        let moved: Vec<ComplexMatrix> = self.alpha.basis().iter().map(|a| x * a).collect();
        OperatorSubspace::span_in(x.nrows(), self.base.dim(), &moved, tol)
    }
}

/// `ρ_α`.
pub fn rho_of_factorization(f: &CStarFactorization) -> &AlgebraMap {
    f.rho()
}

/// `L^ρ(ℌ, H)` for a faithful nondegenerate representation of `𝔅†` on `H`.
pub fn factorization_from_rep(base: &CStarBase, rho: &AlgebraMap, tol: Tolerance) -> Result<CStarFactorization> {
    let bd = base.b_dag();
    let (h, hc) = rho.shape();
    if h != hc {
        return Err(dim_err("representation images must be square"));
    }
    let hom = rho.residuals(bd, Multiplicativity::Homomorphism)?.worst();
    if hom > tol.check() * libm::sqrt(h as f64).max(1.0) {
        return Err(pre_err(format!("not a *-representation (residual {hom:.3e})")));
    }
    if !rho.is_faithful(tol) || !rho.is_nondegenerate(tol) {
        return Err(pre_err("representation must be faithful and nondegenerate"));
    }
    let space = intertwiner_space(bd.basis(), rho.images(), h, base.dim(), tol)?;
    let f = CStarFactorization::new(base, h, space.basis(), tol)?;
    let mut diff: f64 = 0.0;
    for (a, b) in f.rho().images().iter().zip(rho.images()) {
        diff = diff.max((a - b).norm());
    }
    if diff > tol.check() * libm::sqrt(h as f64).max(1.0) {
        return Err(Error::Inconsistent(format!("ρ_α does not reproduce ρ (residual {diff:.3e})")));
    }
    Ok(f)
}

/// Both compatibility criteria with their residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Compatibility {
    pub compatible: bool,
    /// Larger of the distances `[ρ_α(𝔅†)β]` vs `β` and `[ρ_β(ℭ†)α]` vs `α`.
    pub span_residual: f64,
    /// Largest commutator of `ρ_α(𝔅†)` with `ρ_β(ℭ†)`.
    pub commutator: f64,
}

pub fn compatibility(f: &CStarFactorization, g: &CStarFactorization, tol: Tolerance) -> Result<Compatibility> {
    if f.h_dim != g.h_dim {
        return Err(dim_err("compatibility needs factorizations of the same space"));
    }
    let act = |src: &CStarFactorization, on: &CStarFactorization| -> Result<f64> {
        let mut moved = Vec::new();
        for r in src.rho.images() {
            for x in on.alpha.basis() {
                moved.push(r * x);
            }
        }
        let s = OperatorSubspace::span_in(on.h_dim, on.base.dim(), &moved, tol)?;
        subspace_distance(&s, &on.alpha)
    };
    let span_residual = act(f, g)?.max(act(g, f)?);
    let mut commutator: f64 = 0.0;
    for a in f.rho.images() {
        for b in g.rho.images() {
            commutator = commutator.max((a * b - b * a).norm());
        }
    }
    let thr = tol.check() * libm::sqrt(f.h_dim as f64).max(1.0);
    let by_span = span_residual <= thr;
    let by_comm = commutator <= thr;
    if by_span != by_comm {
        return Err(Error::Inconsistent(format!(
            "compatibility criteria disagree (span residual {span_residual:.3e}, commutator {commutator:.3e})"
        )));
    }
    Ok(Compatibility { compatible: by_span, span_residual, commutator })
}

pub fn compatible(f: &CStarFactorization, g: &CStarFactorization, tol: Tolerance) -> Result<bool> {
    Ok(compatibility(f, g, tol)?.compatible)
}
