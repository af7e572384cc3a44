//! Serialized forms of matrices, algebras, states, bases, groupoids and bundles.
//!
//! Matrices are row-major `{"rows", "cols", "data": [[re, im], ...]}`. Doubles
//! are written in shortest round-trip form, so parsing and re-serializing is
//! bit-exact.

use std::sync::Arc;

use qgw_core::cbase::CStarBase;
use qgw_core::cfact::{factorization_from_rep, CStarFactorization};
use qgw_core::fixtures::{Arrow, FiniteGroupoid};
use qgw_core::gns::{State, StateContext};
use qgw_core::linalg::{c, zeros, ComplexMatrix, ComplexVector, Tolerance};
use qgw_core::rtensor::{Leg, LegKind, Linkage, RelativeTensorSpace, Side};
use qgw_core::staralg::{AlgebraMap, StarAlgebra};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix, CliError> {
        if self.data.len() != self.rows * self.cols {
            return Err(CliError::schema(format!(
                "matrix declares {}×{} but carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        let mut m = zeros(self.rows, self.cols);
        for (k, [re, im]) in self.data.iter().enumerate() {
            m[(k / self.cols.max(1), k % self.cols.max(1))] = c(*re, *im);
        }
        Ok(m)
    }
}

pub fn matrices(ms: &[ComplexMatrix]) -> Vec<MatrixJson> {
    ms.iter().map(MatrixJson::from_matrix).collect()
}

pub fn to_matrices(ms: &[MatrixJson]) -> Result<Vec<ComplexMatrix>, CliError> {
    ms.iter().map(MatrixJson::to_matrix).collect()
}

pub fn vector(v: &ComplexVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn to_vector(v: &[[f64; 2]]) -> ComplexVector {
    ComplexVector::from_iterator(v.len(), v.iter().map(|[re, im]| c(*re, *im)))
}

// ── algebras and states ──

/// A *-algebra on `C^dim_H`. Writers list an orthonormal basis; readers also
/// accept arbitrary generators and take the generated *-algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraJson {
    #[serde(rename = "dim_H")]
    pub dim_h: usize,
    pub generators: Vec<MatrixJson>,
    pub unital: bool,
}

impl AlgebraJson {
    pub fn from_algebra(a: &StarAlgebra, tol: Tolerance) -> Self {
        AlgebraJson { dim_h: a.carrier_dim(), generators: matrices(a.basis()), unital: a.contains_unit(tol) }
    }

    /// The algebra with the listed basis when it is one, else the generated algebra.
    pub fn to_algebra(&self, tol: Tolerance) -> Result<StarAlgebra, CliError> {
        let gens = to_matrices(&self.generators)?;
        if let Ok(a) = StarAlgebra::with_basis(self.dim_h, gens.clone(), tol) {
            if !self.unital || a.contains_unit(tol) {
                return Ok(a);
            }
        }
        Ok(StarAlgebra::closure(self.dim_h, &gens, self.unital, tol)?)
    }

    /// The algebra, required to keep the listed basis so that image lists line up.
    pub fn to_basis_algebra(&self, tol: Tolerance) -> Result<StarAlgebra, CliError> {
        let gens = to_matrices(&self.generators)?;
        StarAlgebra::with_basis(self.dim_h, gens, tol)
            .map_err(|e| CliError::schema(format!("bundle algebras must list an orthonormal basis: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub algebra: AlgebraJson,
    pub rho: MatrixJson,
}

impl StateJson {
    pub fn from_state(s: &State, tol: Tolerance) -> Self {
        StateJson { algebra: AlgebraJson::from_algebra(s.algebra(), tol), rho: MatrixJson::from_matrix(s.density()) }
    }

    pub fn to_state(&self, tol: Tolerance) -> Result<State, CliError> {
        Ok(State::new(self.algebra.to_algebra(tol)?, self.rho.to_matrix()?, tol)?)
    }

    fn to_basis_state(&self, tol: Tolerance) -> Result<State, CliError> {
        Ok(State::new(self.algebra.to_basis_algebra(tol)?, self.rho.to_matrix()?, tol)?)
    }
}

// ── bases and factorizations ──

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseJson {
    #[serde(rename = "frak_H_dim")]
    pub frak_h_dim: usize,
    #[serde(rename = "B")]
    pub b: AlgebraJson,
    #[serde(rename = "B_dag")]
    pub b_dag: AlgebraJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Vec<[f64; 2]>>,
}

impl BaseJson {
    pub fn from_base(b: &CStarBase, tol: Tolerance) -> Self {
        BaseJson {
            frak_h_dim: b.dim(),
            b: AlgebraJson::from_algebra(b.b(), tol),
            b_dag: AlgebraJson::from_algebra(b.b_dag(), tol),
            zeta: b.bicyclic().map(vector),
        }
    }

    pub fn to_base(&self, tol: Tolerance) -> Result<CStarBase, CliError> {
        let b = self.b.to_basis_algebra(tol).or_else(|_| self.b.to_algebra(tol))?;
        let bd = self.b_dag.to_basis_algebra(tol).or_else(|_| self.b_dag.to_algebra(tol))?;
        if b.carrier_dim() != self.frak_h_dim || bd.carrier_dim() != self.frak_h_dim {
            return Err(CliError::schema("B and B_dag must act on C^frak_H_dim"));
        }
        Ok(CStarBase::new(b, bd, self.zeta.as_deref().map(to_vector), tol)?)
    }
}

/// Either `{"base", "H_dim", "alpha_basis"}` or `{"base", "rho"}` with one
/// image per basis element of `B_dag`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationJson {
    pub base: BaseJson,
    #[serde(rename = "H_dim", default, skip_serializing_if = "Option::is_none")]
    pub h_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_basis: Option<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<MatrixJson>>,
}

/// How a factorization was specified.
pub enum FactorizationInput {
    Alpha(CStarBase, usize, Vec<ComplexMatrix>),
    Rep(CStarBase, AlgebraMap),
}

impl FactorizationJson {
    pub fn from_factorization(f: &CStarFactorization, tol: Tolerance) -> Self {
        FactorizationJson {
            base: BaseJson::from_base(f.base(), tol),
            h_dim: Some(f.h_dim()),
            alpha_basis: Some(matrices(f.alpha().basis())),
            rho: None,
        }
    }

    pub fn input(&self, tol: Tolerance) -> Result<FactorizationInput, CliError> {
        let base = self.base.to_base(tol)?;
        match (&self.alpha_basis, &self.rho) {
            (Some(a), None) => {
                let mats = to_matrices(a)?;
                let h = match (self.h_dim, mats.first()) {
                    (Some(h), _) => h,
                    (None, Some(m)) => m.nrows(),
                    (None, None) => return Err(CliError::schema("empty alpha_basis needs H_dim")),
                };
                Ok(FactorizationInput::Alpha(base, h, mats))
            }
            (None, Some(r)) => {
                let map = AlgebraMap::from_images(base.b_dag(), to_matrices(r)?)?;
                Ok(FactorizationInput::Rep(base, map))
            }
            _ => Err(CliError::schema("a factorization needs exactly one of alpha_basis and rho")),
        }
    }

    pub fn to_factorization(&self, tol: Tolerance) -> Result<CStarFactorization, CliError> {
        Ok(match self.input(tol)? {
            FactorizationInput::Alpha(base, h, mats) => CStarFactorization::new(&base, h, &mats, tol)?,
            FactorizationInput::Rep(base, map) => factorization_from_rep(&base, &map, tol)?,
        })
    }
}

// ── groupoids ──

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrowJson {
    pub id: usize,
    pub src: usize,
    pub tgt: usize,
}

/// `{"units", "arrows", "compose"}`; optional unit weights select the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupoidJson {
    pub units: Vec<usize>,
    pub arrows: Vec<ArrowJson>,
    pub compose: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl GroupoidJson {
    pub fn from_groupoid(g: &FiniteGroupoid, weights: Option<Vec<f64>>) -> Self {
        GroupoidJson {
            units: (0..g.units()).collect(),
            arrows: g.arrows().iter().enumerate().map(|(id, a)| ArrowJson { id, src: a.src, tgt: a.tgt }).collect(),
            compose: g.table().into_iter().map(|(a, b, ab)| [a, b, ab]).collect(),
            weights,
        }
    }

    /// Units and arrows may carry arbitrary ids; they are renumbered by position.
    pub fn to_groupoid(&self) -> Result<FiniteGroupoid, CliError> {
        let unit_index = |u: usize| {
            self.units
                .iter()
                .position(|&x| x == u)
                .ok_or_else(|| CliError::schema(format!("arrow endpoint {u} is not a listed unit")))
        };
        let arrow_index = |a: usize| {
            self.arrows
                .iter()
                .position(|x| x.id == a)
                .ok_or_else(|| CliError::schema(format!("composition names unknown arrow {a}")))
        };
        let mut arrows = Vec::with_capacity(self.arrows.len());
        for a in &self.arrows {
            arrows.push(Arrow { src: unit_index(a.src)?, tgt: unit_index(a.tgt)? });
        }
        let mut table = Vec::with_capacity(self.compose.len());
        for &[g, h, gh] in &self.compose {
            table.push((arrow_index(g)?, arrow_index(h)?, arrow_index(gh)?));
        }
        Ok(FiniteGroupoid::new(self.units.len(), arrows, &table)?)
    }
}

// ── linked data ──

/// A faithful state on `N`, a standard base and the unitary `U: ℌ → H_μ` linking them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkageJson {
    pub state: StateJson,
    pub base: BaseJson,
    pub base_unitary: MatrixJson,
}

impl LinkageJson {
    pub fn from_linkage(l: &Linkage, tol: Tolerance) -> Self {
        LinkageJson {
            state: StateJson::from_state(l.context().state(), tol),
            base: BaseJson::from_base(l.base(), tol),
            base_unitary: MatrixJson::from_matrix(l.unitary(Side::Direct)),
        }
    }

    pub fn to_linkage(&self, tol: Tolerance) -> Result<Linkage, CliError> {
        let ctx = Arc::new(StateContext::new(self.state.to_basis_state(tol)?, tol)?);
        Ok(Linkage::new(ctx, self.base.to_base(tol)?, self.base_unitary.to_matrix()?, tol)?)
    }
}

fn leg(linkage: &Linkage, kind: LegKind, images: &[MatrixJson], tol: Tolerance) -> Result<Leg, CliError> {
    Ok(Leg::new(linkage.context().algebra(), kind, to_matrices(images)?, tol)?)
}

/// Two legs over linked data: `left` represents `N^op`, `right` represents `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegsJson {
    pub left: Vec<MatrixJson>,
    pub right: Vec<MatrixJson>,
}

/// Input of `rtp`, `phi` and `fiber`. The algebras are only needed by `fiber`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkedPairJson {
    #[serde(flatten)]
    pub linkage: LinkageJson,
    pub legs: LegsJson,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<AlgebraJson>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<AlgebraJson>,
}

pub struct LinkedPairInput {
    pub linkage: Linkage,
    pub left: Leg,
    pub right: Leg,
}

impl LinkedPairJson {
    pub fn input(&self, tol: Tolerance) -> Result<LinkedPairInput, CliError> {
        let linkage = self.linkage.to_linkage(tol)?;
        let left = leg(&linkage, LegKind::Opposite, &self.legs.left, tol)?;
        let right = leg(&linkage, LegKind::Algebra, &self.legs.right, tol)?;
        Ok(LinkedPairInput { linkage, left, right })
    }
}

/// The class maps `E` of the realized source and target quotients; `V` is
/// written in these coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMaps {
    pub source: MatrixJson,
    pub target: MatrixJson,
}

impl CoordinateMaps {
    pub fn of(source: &RelativeTensorSpace, target: &RelativeTensorSpace) -> Self {
        CoordinateMaps {
            source: MatrixJson::from_matrix(source.hilbert_class()),
            target: MatrixJson::from_matrix(target.hilbert_class()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmuReps {
    pub rho: Vec<MatrixJson>,
    pub sigma: Vec<MatrixJson>,
    pub sigma_hat: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmuBundle {
    #[serde(flatten)]
    pub linkage: LinkageJson,
    pub reps: PmuReps,
    #[serde(rename = "V")]
    pub v: MatrixJson,
    pub coordinate_maps: CoordinateMaps,
}

/// Images of the basis of `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationJson {
    pub images: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfLegsJson {
    pub rho: Vec<MatrixJson>,
    pub sigma: Vec<MatrixJson>,
}

/// A comultiplication on the von Neumann side, with `Δ` in the coordinates
/// of `coordinate_map`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfBundle {
    pub side: String,
    #[serde(flatten)]
    pub linkage: LinkageJson,
    #[serde(rename = "A")]
    pub a: AlgebraJson,
    #[serde(rename = "Delta")]
    pub delta: RepresentationJson,
    pub legs: HopfLegsJson,
    pub coordinate_map: MatrixJson,
}

/// Input of `morphism-check`: `π` on the basis of its domain and the two factorizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphismJson {
    pub domain: AlgebraJson,
    pub images: Vec<MatrixJson>,
    pub alpha: FactorizationJson,
    pub beta: FactorizationJson,
}

pub(crate) fn leg_of(linkage: &Linkage, kind: LegKind, images: &[MatrixJson], tol: Tolerance) -> Result<Leg, CliError> {
    leg(linkage, kind, images, tol)
}

/// Whether a stored coordinate map agrees with the realized one.
pub(crate) fn same_coordinates(
    stored: &MatrixJson,
    realized: &ComplexMatrix,
    tol: Tolerance,
) -> Result<bool, CliError> {
    let m = stored.to_matrix()?;
    Ok(m.shape() == realized.shape() && (m - realized).norm() <= tol.check() * realized.norm().max(1.0))
}
