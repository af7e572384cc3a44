//! Deterministic test objects: finite groupoids, their unitaries and
//! coproducts, and random standard bases.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cbase::{cbase_from_state, CStarBase};
use crate::error::{pre_err, Result};
use crate::gns::{State, StateContext};
use crate::hopf::HopfCandidate;
use crate::linalg::{c, identity, real_diag, unit, unitary_exp, zeros, ComplexMatrix, ComplexVector, Tolerance};
use crate::pmu::PmuCandidate;
use crate::rng::SeededRng;
use crate::rtensor::{
    lift_operator, phi_unitary, rtp_cstar, rtp_state, swap_matrix, Leg, LegKind, Linkage, PhiReport,
    RelativeTensorSpace,
};
use crate::staralg::StarAlgebra;

// ── groupoids ──

/// An arrow `src → tgt` between units given by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arrow {
    pub src: usize,
    pub tgt: usize,
}

/// A finite groupoid with arrows and units given by index.
///
/// `gh` is defined exactly when `src(g) = tgt(h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroupoid {
    units: usize,
    arrows: Vec<Arrow>,
    compose: BTreeMap<(usize, usize), usize>,
    identities: Vec<usize>,
    inverses: Vec<usize>,
}

impl FiniteGroupoid {
    /// Validates the composition table `(g, h, gh)`.
    pub fn new(units: usize, arrows: Vec<Arrow>, table: &[(usize, usize, usize)]) -> Result<Self> {
        if units == 0 {
            return Err(pre_err("a groupoid needs at least one unit"));
        }
        let n = arrows.len();
        if arrows.iter().any(|a| a.src >= units || a.tgt >= units) {
            return Err(pre_err("arrow endpoint is not a unit"));
        }
        let mut compose = BTreeMap::new();
        for &(g, h, gh) in table {
            if g >= n || h >= n || gh >= n {
                return Err(pre_err(format!("composition ({g}, {h}) ↦ {gh} names an unknown arrow")));
            }
            if arrows[g].src != arrows[h].tgt {
                return Err(pre_err(format!("arrows {g} and {h} are not composable")));
            }
            if arrows[gh].src != arrows[h].src || arrows[gh].tgt != arrows[g].tgt {
                return Err(pre_err(format!("composite of {g} and {h} has wrong endpoints")));
            }
            if compose.insert((g, h), gh).is_some() {
                return Err(pre_err(format!("composition of {g} and {h} given twice")));
            }
        }
        for g in 0..n {
            for h in 0..n {
                if arrows[g].src == arrows[h].tgt && !compose.contains_key(&(g, h)) {
                    return Err(pre_err(format!("composable arrows {g} and {h} have no composite")));
                }
            }
        }
        let mut identities = Vec::with_capacity(units);
        for u in 0..units {
            let e = (0..n).find(|&e| {
                arrows[e].src == u
                    && arrows[e].tgt == u
                    && (0..n).all(|g| arrows[g].tgt != u || compose[&(e, g)] == g)
                    && (0..n).all(|g| arrows[g].src != u || compose[&(g, e)] == g)
            });
            identities.push(e.ok_or_else(|| pre_err(format!("unit {u} has no identity arrow")))?);
        }
        for (&(g, h), &gh) in &compose {
            for k in 0..n {
                if arrows[h].src == arrows[k].tgt && compose[&(gh, k)] != compose[&(g, compose[&(h, k)])] {
                    return Err(pre_err(format!("composition is not associative on ({g}, {h}, {k})")));
                }
            }
        }
        let mut inverses = Vec::with_capacity(n);
        for g in 0..n {
            let a = arrows[g];
            let inv = (0..n).find(|&k| {
                arrows[k].src == a.tgt
                    && arrows[k].tgt == a.src
                    && compose[&(g, k)] == identities[a.tgt]
                    && compose[&(k, g)] == identities[a.src]
            });
            inverses.push(inv.ok_or_else(|| pre_err(format!("arrow {g} has no inverse")))?);
        }
        Ok(FiniteGroupoid { units, arrows, compose, identities, inverses })
    }

    /// The cyclic group `ℤ/n` as a groupoid with one unit.
    pub fn cyclic(n: usize) -> Result<Self> {
        let arrows = alloc::vec![Arrow { src: 0, tgt: 0 }; n];
        let mut table = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                table.push((a, b, (a + b) % n));
            }
        }
        Self::new(1, arrows, &table)
    }

    /// The pair groupoid on `n` units; arrow `t·n + s` goes from `s` to `t`.
    pub fn pair(n: usize) -> Result<Self> {
        let mut arrows = Vec::with_capacity(n * n);
        for t in 0..n {
            for s in 0..n {
                arrows.push(Arrow { src: s, tgt: t });
            }
        }
        let mut table = Vec::new();
        for t in 0..n {
            for m in 0..n {
                for s in 0..n {
                    table.push((t * n + m, m * n + s, t * n + s));
                }
            }
        }
        Self::new(n, arrows, &table)
    }

    /// The product groupoid; arrow `(g, h)` has index `g·|other| + h`.
    pub fn product(&self, other: &FiniteGroupoid) -> Result<Self> {
        let (m, u2) = (other.arrows.len(), other.units);
        let mut arrows = Vec::with_capacity(self.arrows.len() * m);
        for a in &self.arrows {
            for b in &other.arrows {
                arrows.push(Arrow { src: a.src * u2 + b.src, tgt: a.tgt * u2 + b.tgt });
            }
        }
        let mut table = Vec::new();
        for (&(g1, h1), &k1) in &self.compose {
            for (&(g2, h2), &k2) in &other.compose {
                table.push((g1 * m + g2, h1 * m + h2, k1 * m + k2));
            }
        }
        Self::new(self.units * u2, arrows, &table)
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn len(&self) -> usize {
        self.arrows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrows.is_empty()
    }

    pub fn compose(&self, g: usize, h: usize) -> Option<usize> {
        self.compose.get(&(g, h)).copied()
    }

    /// All composable pairs `(g, h)` with their composites, in lexicographic order.
    pub fn table(&self) -> Vec<(usize, usize, usize)> {
        self.compose.iter().map(|(&(g, h), &gh)| (g, h, gh)).collect()
    }

    pub fn identity(&self, unit: usize) -> usize {
        self.identities[unit]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverses[g]
    }

    pub fn is_identity(&self, g: usize) -> bool {
        self.identities.contains(&g)
    }

    /// Diagonal projections `P_u = Σ_{f(g) = u} e_g e_g*` on `ℂ^{arrows}`.
    fn projections(&self, f: impl Fn(&Arrow) -> usize) -> Vec<ComplexMatrix> {
        (0..self.units)
            .map(|u| {
                let d: Vec<f64> = self.arrows.iter().map(|a| if f(a) == u { 1.0 } else { 0.0 }).collect();
                real_diag(&d)
            })
            .collect()
    }

    /// The left regular operators `λ_g δ_h = δ_{gh}` (zero when not composable).
    pub fn left_regular(&self) -> Vec<ComplexMatrix> {
        let n = self.len();
        (0..n)
            .map(|g| {
                let mut m = zeros(n, n);
                for h in 0..n {
                    if let Some(gh) = self.compose(g, h) {
                        m[(gh, h)] = c(1.0, 0.0);
                    }
                }
                m
            })
            .collect()
    }
}

// ── the classical data over the unit space ──

/// `N = ℓ^∞(units)` as diagonal matrices, the state with the given unit
/// weights (uniform when `None`), and the legs on `ℂ^{arrows}`.
#[derive(Clone, Debug)]
pub struct GroupoidData {
    pub groupoid: FiniteGroupoid,
    pub ctx: Arc<StateContext>,
    /// `ρ`: multiplication by functions of the target, as a representation of `N^op`.
    pub rho: Leg,
    /// `σ`: multiplication by functions of the target.
    pub sigma: Leg,
    /// `σ̂`: multiplication by functions of the source.
    pub sigma_hat: Leg,
}

pub fn groupoid_data(g: &FiniteGroupoid, weights: Option<&[f64]>, tol: Tolerance) -> Result<GroupoidData> {
    let u = g.units();
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != u || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(pre_err("unit weights must be positive, one per unit"));
            }
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        }
        None => alloc::vec![1.0 / u as f64; u],
    };
    let n_alg = StarAlgebra::with_basis(u, (0..u).map(|i| unit(u, u, i, i)).collect(), tol)?;
    let state = State::new(n_alg, real_diag(&w), tol)?;
    let ctx = Arc::new(StateContext::new(state, tol)?);
    let rho = Leg::new(ctx.algebra(), LegKind::Opposite, g.projections(|a| a.tgt), tol)?;
    let sigma = Leg::new(ctx.algebra(), LegKind::Algebra, g.projections(|a| a.tgt), tol)?;
    let sigma_hat = Leg::new(ctx.algebra(), LegKind::Algebra, g.projections(|a| a.src), tol)?;
    Ok(GroupoidData { groupoid: g.clone(), ctx, rho, sigma, sigma_hat })
}

fn normalized_class(space: &RelativeTensorSpace, g: usize, h: usize, n: usize) -> Result<ComplexVector> {
    let e = |i: usize| crate::linalg::basis_vector(n, i);
    let v = space.class_of(&e(g), &e(h))?;
    let norm = v.norm();
    if norm == 0.0 {
        return Err(pre_err(format!("pair ({g}, {h}) has a null class")));
    }
    Ok(v / c(norm, 0.0))
}

/// `V(δ_g ⊗ δ_h) = δ_g ⊗ δ_{gh}` on normalized classes of composable pairs.
pub fn groupoid_pmu(g: &FiniteGroupoid, weights: Option<&[f64]>, tol: Tolerance) -> Result<PmuCandidate> {
    let data = groupoid_data(g, weights, tol)?;
    let linkage = Linkage::canonical(data.ctx.clone(), tol)?;
    // Build once with a placeholder to obtain the realized spaces.
    let probe = {
        let ctx = data.ctx.clone();
        let s = crate::rtensor::rtp_state(&ctx, &data.sigma_hat, &data.rho, tol)?;
        let t = crate::rtensor::rtp_state(&ctx, &data.rho, &data.sigma, tol)?;
        (s, t)
    };
    let (s, t) = probe;
    let n = g.len();
    let mut v = zeros(t.dim(), s.dim());
    for (a, b, ab) in g.table() {
        let cs = normalized_class(&s, a, b, n)?;
        let ct = normalized_class(&t, a, ab, n)?;
        v += ct * cs.adjoint();
    }
    PmuCandidate::new(linkage, data.rho, data.sigma, data.sigma_hat, v, tol)
}

/// Deliberately broken unitaries for negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmuNegative {
    /// The flip `ξ ⊗ η ↦ η ⊗ ξ`; only meaningful for groups, where `N = ℂ`.
    Swap,
    /// `V` with the phase of one entry multiplied by `e^{i·10⁻³}`.
    Phase,
}

pub const PHASE_PERTURBATION: f64 = 1e-3;

/// A broken variant of the groupoid unitary.
pub fn groupoid_pmu_negative(
    g: &FiniteGroupoid,
    weights: Option<&[f64]>,
    kind: PmuNegative,
    tol: Tolerance,
) -> Result<PmuCandidate> {
    let good = groupoid_pmu(g, weights, tol)?;
    let (s, t) = (good.source(), good.target());
    let n = g.len();
    let v = match kind {
        PmuNegative::Swap => {
            if g.units() != 1 {
                return Err(pre_err("the swap negative needs a group (one unit)"));
            }
            t.hilbert_class() * swap_matrix(n, n) * s.hilbert_section()
        }
        PmuNegative::Phase => {
            let table = g.table();
            let (a, b, _) = table
                .iter()
                .copied()
                .find(|&(a, b, _)| !g.is_identity(a) && !g.is_identity(b))
                .unwrap_or(table[table.len() - 1]);
            let cs = normalized_class(s, a, b, n)?;
            let phase = c(libm::cos(PHASE_PERTURBATION), libm::sin(PHASE_PERTURBATION)) - c(1.0, 0.0);
            // V (1 + (e^{iθ} − 1) |c⟩⟨c|) stays unitary.
            good.unitary() * (crate::linalg::identity(s.dim()) + &cs * cs.adjoint() * phase)
        }
    };
    good.with_unitary(v)
}

// ── groupoid Hopf bimodules ──

/// The Hopf bimodule of a groupoid algebra together with the data it was built from.
#[derive(Clone, Debug)]
pub struct GroupoidHopf {
    pub data: GroupoidData,
    pub linkage: Linkage,
    pub candidate: HopfCandidate,
}

impl GroupoidHopf {
    /// The C*-counterpart over the canonical base and the unitary `Φ`.
    pub fn cstar(&self) -> Result<(HopfCandidate, PhiReport)> {
        self.candidate.to_cstar(&self.linkage)
    }
}

/// `A = span{λ_g}` on `ℂ^{arrows}` with `Δ(λ_g) = λ_g ⊗ λ_g` on normalized classes,
/// legs `ρ = σ` given by functions of the target.
pub fn groupoid_hopf(g: &FiniteGroupoid, weights: Option<&[f64]>, tol: Tolerance) -> Result<GroupoidHopf> {
    let data = groupoid_data(g, weights, tol)?;
    let linkage = Linkage::canonical(data.ctx.clone(), tol)?;
    let n = g.len();
    let lambdas = g.left_regular();
    let norms: Vec<f64> = lambdas.iter().map(|l| l.norm()).collect();
    let basis: Vec<ComplexMatrix> = lambdas.iter().zip(&norms).map(|(l, &s)| l / c(s, 0.0)).collect();
    let algebra = StarAlgebra::with_basis(n, basis, tol)?;
    let space = rtp_state(&data.ctx, &data.rho, &data.sigma, tol)?;
    let arrows = g.arrows();
    let mut delta = Vec::with_capacity(n);
    for (k, arrow) in arrows.iter().enumerate() {
        let mut m = zeros(space.dim(), space.dim());
        for a in 0..n {
            for b in 0..n {
                if arrows[a].tgt != arrow.src || arrows[b].tgt != arrow.src {
                    continue;
                }
                let (ka, kb) = match (g.compose(k, a), g.compose(k, b)) {
                    (Some(x), Some(y)) => (x, y),
                    _ => continue,
                };
                m += normalized_class(&space, ka, kb, n)? * normalized_class(&space, a, b, n)?.adjoint();
            }
        }
        delta.push(m / c(norms[k], 0.0));
    }
    let candidate =
        HopfCandidate::von_neumann(data.ctx.clone(), algebra, data.rho.clone(), data.sigma.clone(), delta, tol)?;
    Ok(GroupoidHopf { data, linkage, candidate })
}

/// Deliberately broken comultiplications for negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopfNegative {
    /// `Δ ∘ Ad_u` with `u = exp(i·10⁻³(λ_g + λ_g*))` for the `k`-th non-identity
    /// arrow `g`, which moves the legs.
    Leg(usize),
    /// `λ_g ↦ χ(g) λ_g ⊗ 1` for the character `χ(k) = e^{2πik/n}` of `ℤ/n`; a
    /// homomorphism into the fiber product that is not coassociative.
    Character,
}

pub fn groupoid_hopf_negative(
    g: &FiniteGroupoid,
    weights: Option<&[f64]>,
    kind: HopfNegative,
    tol: Tolerance,
) -> Result<GroupoidHopf> {
    let mut good = groupoid_hopf(g, weights, tol)?;
    let cand = &good.candidate;
    let alg = cand.algebra();
    let delta = match kind {
        HopfNegative::Leg(which) => {
            let k = (0..g.len())
                .filter(|&k| !g.is_identity(k))
                .nth(which)
                .ok_or_else(|| pre_err("not enough non-identity arrows for the leg negative"))?;
            let l = &g.left_regular()[k];
            let u = unitary_exp(&(l + l.adjoint()), PHASE_PERTURBATION);
            let d = cand.morphism();
            alg.basis().iter().map(|x| d.apply(&(&u * x * u.adjoint()))).collect::<Result<Vec<_>>>()?
        }
        HopfNegative::Character => {
            let n = g.len();
            if g.units() != 1 || !is_cyclic_table(g) {
                return Err(pre_err("the character negative needs a cyclic group from `cyclic`"));
            }
            let id = identity(n);
            let mut out = Vec::with_capacity(n);
            for (k, b) in alg.basis().iter().enumerate() {
                let theta = 2.0 * core::f64::consts::PI * k as f64 / n as f64;
                let chi = c(libm::cos(theta), libm::sin(theta));
                out.push(lift_operator(cand.space(), b, &id, tol)? * chi);
            }
            out
        }
    };
    good.candidate = cand.with_delta(delta)?;
    Ok(good)
}

/// Whether arrow `k` composes as `k + l mod n`, so `k ↦ e^{2πik/n}` is a character.
fn is_cyclic_table(g: &FiniteGroupoid) -> bool {
    let n = g.len();
    (0..n).all(|a| (0..n).all(|b| g.compose(a, b) == Some((a + b) % n)))
}

// ── linked pairs of relative tensor products ──

/// Two legs over `(N, μ)`, a base linked to `μ`, both relative tensor
/// products and the unitary `Φ` between them.
#[derive(Clone, Debug)]
pub struct LinkedPair {
    pub ctx: Arc<StateContext>,
    pub linkage: Linkage,
    pub left: Leg,
    pub right: Leg,
    pub state_side: RelativeTensorSpace,
    pub cstar_side: RelativeTensorSpace,
    pub phi: PhiReport,
}

pub fn linked_pair(linkage: Linkage, left: Leg, right: Leg, tol: Tolerance) -> Result<LinkedPair> {
    let ctx = linkage.context().clone();
    let state_side = rtp_state(&ctx, &left, &right, tol)?;
    let alpha = linkage.factorization(&left, tol)?;
    let beta = linkage.factorization(&right, tol)?;
    let cstar_side = rtp_cstar(&alpha, &beta, tol)?;
    let phi = phi_unitary(&state_side, &cstar_side, &linkage, tol)?;
    Ok(LinkedPair { ctx, linkage, left, right, state_side, cstar_side, phi })
}

fn diagonal_context(weights: &[f64], tol: Tolerance) -> Result<Arc<StateContext>> {
    let n = weights.len();
    let alg = StarAlgebra::with_basis(n, (0..n).map(|i| unit(n, n, i, i)).collect(), tol)?;
    Ok(Arc::new(StateContext::new(State::new(alg, real_diag(weights), tol)?, tol)?))
}

fn diagonal_projections(h: usize, label: impl Fn(usize) -> usize, units: usize) -> Vec<ComplexMatrix> {
    (0..units).map(|u| real_diag(&(0..h).map(|i| if label(i) == u { 1.0 } else { 0.0 }).collect::<Vec<_>>())).collect()
}

/// `F1`: `N = ℂ`, `H = K = ℂ²`; the relative tensor product is the plain one.
pub fn fixture_f1(tol: Tolerance) -> Result<LinkedPair> {
    let ctx = diagonal_context(&[1.0], tol)?;
    let l = Leg::new(ctx.algebra(), LegKind::Opposite, alloc::vec![identity(2)], tol)?;
    let r = Leg::new(ctx.algebra(), LegKind::Algebra, alloc::vec![identity(2)], tol)?;
    linked_pair(Linkage::canonical(ctx, tol)?, l, r, tol)
}

/// `F2`: `N = ℂ²`, `μ = (½, ½)`, `H = K = ℂ²` with the diagonal actions.
pub fn fixture_f2(tol: Tolerance) -> Result<LinkedPair> {
    let ctx = diagonal_context(&[0.5, 0.5], tol)?;
    let imgs = diagonal_projections(2, |i| i, 2);
    let l = Leg::new(ctx.algebra(), LegKind::Opposite, imgs.clone(), tol)?;
    let r = Leg::new(ctx.algebra(), LegKind::Algebra, imgs, tol)?;
    linked_pair(Linkage::canonical(ctx, tol)?, l, r, tol)
}

/// `F4`: the pair groupoid on two units, `H = K = ℂ⁴`, `ρ` the range action
/// and `σ` the source action.
pub fn fixture_f4(tol: Tolerance) -> Result<LinkedPair> {
    let g = FiniteGroupoid::pair(2)?;
    let ctx = diagonal_context(&[0.5, 0.5], tol)?;
    let l = Leg::new(ctx.algebra(), LegKind::Opposite, g.projections(|a| a.tgt), tol)?;
    let r = Leg::new(ctx.algebra(), LegKind::Algebra, g.projections(|a| a.src), tol)?;
    linked_pair(Linkage::canonical(ctx, tol)?, l, r, tol)
}

/// The GNS representation (or its opposite) with multiplicity `m`, moved by a random unitary.
pub fn random_leg(
    ctx: &Arc<StateContext>,
    kind: LegKind,
    m: usize,
    rng: &mut SeededRng,
    tol: Tolerance,
) -> Result<Leg> {
    let base = match kind {
        LegKind::Algebra => ctx.gns().pi_images(),
        LegKind::Opposite => ctx.gns().pi_op_images(),
    };
    let w = rng.unitary(ctx.dim() * m);
    let images = base.iter().map(|p| &w * crate::linalg::kron(p, &identity(m)) * w.adjoint()).collect();
    Leg::new(ctx.algebra(), kind, images, tol)
}

/// A random faithful state on `⊕ M_{n_i}`, random legs of multiplicity one or
/// two, and a randomly moved base.
pub fn random_linked_pair(blocks: &[usize], seed: u64, tol: Tolerance) -> Result<LinkedPair> {
    let state = random_faithful_state(blocks, seed, tol)?;
    let ctx = Arc::new(StateContext::new(state, tol)?);
    let mut rng = SeededRng::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    let ml = 1 + rng.below(2);
    let mr = 1 + rng.below(2);
    let l = random_leg(&ctx, LegKind::Opposite, ml, &mut rng, tol)?;
    let r = random_leg(&ctx, LegKind::Algebra, mr, &mut rng, tol)?;
    let w = rng.unitary(ctx.dim());
    let linkage = Linkage::conjugated(ctx, &w, tol)?;
    linked_pair(linkage, l, r, tol)
}

// ── random standard bases ──

/// Block-diagonal `⊕ M_{n_i}` with its matrix units as orthonormal basis.
pub fn block_algebra(blocks: &[usize], tol: Tolerance) -> Result<StarAlgebra> {
    if blocks.is_empty() || blocks.contains(&0) {
        return Err(pre_err("block sizes must be positive and nonempty"));
    }
    let n: usize = blocks.iter().sum();
    let mut basis = Vec::new();
    let mut off = 0;
    for &b in blocks {
        for i in 0..b {
            for j in 0..b {
                basis.push(unit(n, n, off + i, off + j));
            }
        }
        off += b;
    }
    StarAlgebra::with_basis(n, basis, tol)
}

/// A random faithful state on `⊕ M_{n_i}`.
pub fn random_faithful_state(blocks: &[usize], seed: u64, tol: Tolerance) -> Result<State> {
    let alg = block_algebra(blocks, tol)?;
    let mut rng = SeededRng::new(seed);
    let w = rng.simplex(blocks.len());
    let n: usize = blocks.iter().sum();
    let mut rho = zeros(n, n);
    let mut off = 0;
    for (&b, wi) in blocks.iter().zip(&w) {
        let d = rng.density(b) * c(*wi, 0.0);
        rho.view_mut((off, off), (b, b)).copy_from(&d);
        off += b;
    }
    State::new(alg, rho, tol)
}

/// The base of a random faithful state on `⊕ M_{n_i}`.
pub fn random_standard_base(blocks: &[usize], seed: u64, tol: Tolerance) -> Result<CStarBase> {
    cbase_from_state(&random_faithful_state(blocks, seed, tol)?, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_residual;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn groupoid_validation() {
        assert_eq!(FiniteGroupoid::pair(2).unwrap().len(), 4);
        assert_eq!(FiniteGroupoid::cyclic(3).unwrap().table().len(), 9);
        let g = FiniteGroupoid::pair(2).unwrap().product(&FiniteGroupoid::cyclic(2).unwrap()).unwrap();
        assert_eq!((g.units(), g.len()), (2, 8));
        for a in 0..g.len() {
            let inv = g.inverse(a);
            assert_eq!(g.compose(a, inv), Some(g.identity(g.arrows()[a].tgt)));
        }
        // ℤ/2 with a broken table
        let bad = FiniteGroupoid::new(
            1,
            alloc::vec![Arrow { src: 0, tgt: 0 }; 2],
            &[(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1)],
        );
        assert!(bad.is_err());
        let missing = FiniteGroupoid::new(1, alloc::vec![Arrow { src: 0, tgt: 0 }; 2], &[(0, 0, 0)]);
        assert!(missing.is_err());
    }

    #[test]
    fn groupoid_unitaries_have_expected_sizes() {
        let trivial = groupoid_pmu(&FiniteGroupoid::cyclic(1).unwrap(), None, tol()).unwrap();
        assert_eq!(trivial.unitary().shape(), (1, 1));
        assert!((trivial.unitary()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        let z2 = groupoid_pmu(&FiniteGroupoid::cyclic(2).unwrap(), None, tol()).unwrap();
        assert_eq!(z2.source().dim(), 4);
        let f4 = groupoid_pmu(&FiniteGroupoid::pair(2).unwrap(), None, tol()).unwrap();
        assert_eq!((f4.source().dim(), f4.target().dim()), (8, 8));
        assert!(unitarity_residual(f4.unitary()) < 1e-12);
        assert!(f4.invariants().unwrap().passed());
    }

    #[test]
    fn random_bases_have_expected_dimensions() {
        for (spec, dim) in [(&[1usize][..], 1), (&[2][..], 4), (&[2, 1][..], 5)] {
            let b = random_standard_base(spec, 7, tol()).unwrap();
            assert_eq!(b.dim(), dim);
        }
        let a = random_faithful_state(&[2, 1], 3, tol()).unwrap();
        let b = random_faithful_state(&[2, 1], 3, tol()).unwrap();
        assert_eq!(a.density(), b.density());
    }
}
