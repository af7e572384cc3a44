use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qgw_core::cbase::{base_equivalence, is_cyclic, DEFAULT_BICYCLIC_ATTEMPTS};
use qgw_core::cfact::{factorization_from_rep, CStarFactorization};
use qgw_core::error::Error as CoreError;
use qgw_core::fiber::{fiber_classical, fiber_spatial, is_morphism, phi_iso, Morphism};
use qgw_core::fixtures::{
    groupoid_hopf, groupoid_hopf_negative, groupoid_pmu, groupoid_pmu_negative, random_linked_pair,
    random_standard_base, FiniteGroupoid, GroupoidHopf, HopfNegative, PmuNegative,
};
use qgw_core::gns::GnsTriple;
use qgw_core::hopf::{check_hopf, HopfCandidate};
use qgw_core::linalg::{rank, subspace_distance, Tolerance, DEFAULT_EPSILON};
use qgw_core::pmu::{pmu_equivalence, PmuCandidate};
use qgw_core::report::{Certificate, Check};
use qgw_core::rtensor::{ket_relation_residual, phi_unitary, rtp_cstar, rtp_state, LegKind, PhiReport};
use qgw_core::staralg::StarAlgebra;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::json::{
    leg_of, matrices, same_coordinates, AlgebraJson, BaseJson, CoordinateMaps, FactorizationInput, FactorizationJson,
    GroupoidJson, HopfBundle, HopfLegsJson, LegsJson, LinkageJson, LinkedPairJson, MatrixJson, MorphismJson, PmuBundle,
    PmuReps, RepresentationJson, StateJson,
};
use crate::report::Report;

/// Certify finite-dimensional quantum groupoid structures from JSON inputs.
#[derive(Debug, Parser)]
#[command(name = "qgw", version)]
pub struct Cli {
    /// Base tolerance ε for every residual check.
    #[arg(long, global = true, env = "QGW_TOLERANCE", default_value_t = DEFAULT_EPSILON)]
    pub tolerance: f64,

    /// Record the wall-clock time in the report.
    #[arg(long, global = true)]
    pub timing: bool,

    /// Write the JSON report (or the generated object) to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Input {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckInput {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,

    /// Replace the groupoid structure by a deliberately broken one.
    #[arg(long, value_enum)]
    pub negative: Option<Negative>,
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    /// Emit a ready-to-check bundle instead of the groupoid.
    #[arg(long, value_enum)]
    pub bundle: Option<BundleKind>,

    #[arg(long, value_enum, requires = "bundle")]
    pub negative: Option<Negative>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Negative {
    /// Flip of the two tensor factors (groups only).
    Swap,
    /// Phase of one matrix entry of V moved by 10⁻³.
    Phase,
    /// Comultiplication precomposed with a small rotation that moves the legs.
    Leg,
    /// Group-like coproduct twisted by a character (cyclic groups only).
    Character,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BundleKind {
    Pmu,
    Hopf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// GNS data of a state: {"algebra", "rho"}.
    Gns(Input),
    /// Standardness of a base and its equivalence with the GNS base.
    BaseCheck(Input),
    /// Certify a factorization given by `alpha_basis` or by `rho`.
    Factorize(Input),
    /// Both relative tensor products of a linked pair.
    Rtp(Input),
    /// The unitary between the two relative tensor products.
    Phi(Input),
    /// Classical and spatial fiber products of `A` and `B` on a linked pair.
    Fiber(Input),
    /// Whether a homomorphism is a morphism between two factorized representations.
    MorphismCheck(Input),
    /// Hopf bimodule axioms on both sides, from a groupoid or a Hopf bundle.
    HopfCheck(CheckInput),
    /// Pseudo-multiplicative unitary axioms on both sides, from a groupoid or a PMU bundle.
    PmuCheck(CheckInput),
    /// Agreement of the two formulations for a groupoid.
    EquivCheck(CheckInput),
    /// The cyclic group ℤ/n.
    GenGroup {
        #[arg(long)]
        cyclic: usize,
        #[command(flatten)]
        bundle: BundleArgs,
    },
    /// The pair groupoid on n units.
    GenGroupoid {
        #[arg(long)]
        pair: usize,
        /// Unit weights of the state, comma separated.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[command(flatten)]
        bundle: BundleArgs,
    },
    /// A standard base of a random faithful state on a sum of matrix blocks.
    GenRandomBase {
        /// Block sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit a linked pair with random legs instead of the bare base.
        #[arg(long)]
        linked: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gns(_) => "gns",
            Command::BaseCheck(_) => "base-check",
            Command::Factorize(_) => "factorize",
            Command::Rtp(_) => "rtp",
            Command::Phi(_) => "phi",
            Command::Fiber(_) => "fiber",
            Command::MorphismCheck(_) => "morphism-check",
            Command::HopfCheck(_) => "hopf-check",
            Command::PmuCheck(_) => "pmu-check",
            Command::EquivCheck(_) => "equiv-check",
            Command::GenGroup { .. } => "gen-group",
            Command::GenGroupoid { .. } => "gen-groupoid",
            Command::GenRandomBase { .. } => "gen-random-base",
        }
    }
}

/// Parse `argv`, run the command and return the exit code: 0 pass, 1 fail, 2 input error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let tol = match Tolerance::new(cli.tolerance) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("qgw: {e}");
            return 2;
        }
    };
    match generated(&cli.command, tol) {
        Some(Ok(text)) => return emit_text(cli.out.as_deref(), &text),
        Some(Err(e)) => {
            eprintln!("qgw {}: {e}", cli.command.name());
            return 2;
        }
        None => {}
    }
    let start = Instant::now();
    let mut report = Report::new(cli.command.name(), tol.epsilon());
    if let Err(e) = certify(&cli.command, tol, &mut report) {
        eprintln!("qgw {}: {e}", cli.command.name());
        report.error = Some(e.to_string());
    }
    report.settle();
    if cli.timing {
        report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    print!("{}", report.to_text());
    if let Some(path) = &cli.out {
        if let Err(e) = write_file(path, &report.to_json()) {
            eprintln!("qgw: {e}");
            return 2;
        }
    }
    report.verdict.exit_code()
}

fn emit_text(out: Option<&Path>, text: &str) -> i32 {
    match out {
        Some(path) => match write_file(path, text) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("qgw: {e}");
                2
            }
        },
        None => {
            print!("{text}");
            0
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.to_owned(), source })
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

// ── input ──

fn read_value(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
    serde_json::from_str(&text).map_err(|e| {
        let mut message = e.to_string();
        if let Some(at) = message.rfind(" at line ") {
            message.truncate(at);
        }
        CliError::Syntax { path: path.to_owned(), line: e.line(), column: e.column(), message }
    })
}

fn parse<T: DeserializeOwned>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::schema(e.to_string()))
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    parse(read_value(path)?)
}

enum Structure {
    Groupoid(GroupoidJson),
    Pmu(Box<PmuBundle>),
    Hopf(Box<HopfBundle>),
}

fn read_structure(path: &Path) -> Result<Structure, CliError> {
    let v = read_value(path)?;
    if v.get("arrows").is_some() {
        Ok(Structure::Groupoid(parse(v)?))
    } else if v.get("V").is_some() {
        Ok(Structure::Pmu(parse(v)?))
    } else if v.get("Delta").is_some() {
        Ok(Structure::Hopf(parse(v)?))
    } else {
        Err(CliError::schema("expected a groupoid, a PMU bundle or a Hopf bundle"))
    }
}

fn groupoid_input(g: &GroupoidJson) -> Result<(FiniteGroupoid, Option<Vec<f64>>), CliError> {
    Ok((g.to_groupoid()?, g.weights.clone()))
}

fn pmu_negative(n: Negative) -> Result<PmuNegative, CliError> {
    match n {
        Negative::Swap => Ok(PmuNegative::Swap),
        Negative::Phase => Ok(PmuNegative::Phase),
        _ => Err(CliError::usage("pseudo-multiplicative unitaries take the swap or phase negative")),
    }
}

fn hopf_negative(n: Negative) -> Result<HopfNegative, CliError> {
    match n {
        Negative::Leg => Ok(HopfNegative::Leg(0)),
        Negative::Character => Ok(HopfNegative::Character),
        _ => Err(CliError::usage("Hopf bimodules take the leg or character negative")),
    }
}

fn build_pmu(
    g: &FiniteGroupoid,
    w: Option<&[f64]>,
    negative: Option<Negative>,
    tol: Tolerance,
) -> Result<PmuCandidate, CliError> {
    Ok(match negative {
        None => groupoid_pmu(g, w, tol)?,
        Some(n) => groupoid_pmu_negative(g, w, pmu_negative(n)?, tol)?,
    })
}

fn build_hopf(
    g: &FiniteGroupoid,
    w: Option<&[f64]>,
    negative: Option<Negative>,
    tol: Tolerance,
) -> Result<GroupoidHopf, CliError> {
    Ok(match negative {
        None => groupoid_hopf(g, w, tol)?,
        Some(n) => groupoid_hopf_negative(g, w, hopf_negative(n)?, tol)?,
    })
}

fn pmu_from_bundle(b: &PmuBundle, tol: Tolerance) -> Result<PmuCandidate, CliError> {
    let linkage = b.linkage.to_linkage(tol)?;
    let rho = leg_of(&linkage, LegKind::Opposite, &b.reps.rho, tol)?;
    let sigma = leg_of(&linkage, LegKind::Algebra, &b.reps.sigma, tol)?;
    let sigma_hat = leg_of(&linkage, LegKind::Algebra, &b.reps.sigma_hat, tol)?;
    let c = PmuCandidate::new(linkage, rho, sigma, sigma_hat, b.v.to_matrix()?, tol)?;
    if !same_coordinates(&b.coordinate_maps.source, c.source().hilbert_class(), tol)?
        || !same_coordinates(&b.coordinate_maps.target, c.target().hilbert_class(), tol)?
    {
        return Err(CliError::schema("coordinate maps differ from the realized relative tensor products"));
    }
    Ok(c)
}

fn hopf_from_bundle(b: &HopfBundle, tol: Tolerance) -> Result<(HopfCandidate, HopfCandidate, PhiReport), CliError> {
    if b.side != "von_neumann" {
        return Err(CliError::schema(format!("unsupported Hopf bundle side {:?}", b.side)));
    }
    let linkage = b.linkage.to_linkage(tol)?;
    let rho = leg_of(&linkage, LegKind::Opposite, &b.legs.rho, tol)?;
    let sigma = leg_of(&linkage, LegKind::Algebra, &b.legs.sigma, tol)?;
    let a = b.a.to_basis_algebra(tol)?;
    let delta = crate::json::to_matrices(&b.delta.images)?;
    let vn = HopfCandidate::von_neumann(linkage.context().clone(), a, rho, sigma, delta, tol)?;
    if !same_coordinates(&b.coordinate_map, vn.space().hilbert_class(), tol)? {
        return Err(CliError::schema("coordinate map differs from the realized relative tensor product"));
    }
    let (cs, phi) = vn.to_cstar(&linkage)?;
    Ok((vn, cs, phi))
}

// ── generators ──

fn generated(cmd: &Command, tol: Tolerance) -> Option<Result<String, CliError>> {
    match cmd {
        Command::GenGroup { cyclic, bundle } => Some(
            FiniteGroupoid::cyclic(*cyclic)
                .map_err(CliError::from)
                .and_then(|g| generate_structure(&g, None, bundle, tol)),
        ),
        Command::GenGroupoid { pair, weights, bundle } => Some(
            FiniteGroupoid::pair(*pair)
                .map_err(CliError::from)
                .and_then(|g| generate_structure(&g, weights.clone(), bundle, tol)),
        ),
        Command::GenRandomBase { blocks, seed, linked } => Some(generate_base(blocks, *seed, *linked, tol)),
        _ => None,
    }
}

fn generate_structure(
    g: &FiniteGroupoid,
    weights: Option<Vec<f64>>,
    args: &BundleArgs,
    tol: Tolerance,
) -> Result<String, CliError> {
    let w = weights.as_deref();
    match args.bundle {
        None => {
            if let Some(w) = w {
                if w.len() != g.units() {
                    return Err(CliError::usage("give one weight per unit"));
                }
            }
            Ok(to_pretty(&GroupoidJson::from_groupoid(g, weights)))
        }
        Some(BundleKind::Pmu) => {
            let c = build_pmu(g, w, args.negative, tol)?;
            Ok(to_pretty(&PmuBundle {
                linkage: LinkageJson::from_linkage(c.linkage(), tol),
                reps: PmuReps {
                    rho: matrices(c.rho().images()),
                    sigma: matrices(c.sigma().images()),
                    sigma_hat: matrices(c.sigma_hat().images()),
                },
                v: MatrixJson::from_matrix(c.unitary()),
                coordinate_maps: CoordinateMaps::of(c.source(), c.target()),
            }))
        }
        Some(BundleKind::Hopf) => {
            let h = build_hopf(g, w, args.negative, tol)?;
            let c = &h.candidate;
            Ok(to_pretty(&HopfBundle {
                side: "von_neumann".into(),
                linkage: LinkageJson::from_linkage(&h.linkage, tol),
                a: AlgebraJson::from_algebra(c.algebra(), tol),
                delta: RepresentationJson { images: matrices(c.delta()) },
                legs: HopfLegsJson { rho: matrices(h.data.rho.images()), sigma: matrices(h.data.sigma.images()) },
                coordinate_map: MatrixJson::from_matrix(c.space().hilbert_class()),
            }))
        }
    }
}

fn generate_base(blocks: &[usize], seed: u64, linked: bool, tol: Tolerance) -> Result<String, CliError> {
    if !linked {
        return Ok(to_pretty(&BaseJson::from_base(&random_standard_base(blocks, seed, tol)?, tol)));
    }
    let p = random_linked_pair(blocks, seed, tol)?;
    // A and B are the algebras generated by the legs.
    let generated = |leg: &qgw_core::rtensor::Leg| -> Result<AlgebraJson, CliError> {
        let a = StarAlgebra::closure(leg.dim(), leg.images(), true, tol)?;
        Ok(AlgebraJson::from_algebra(&a, tol))
    };
    Ok(to_pretty(&LinkedPairJson {
        linkage: LinkageJson::from_linkage(&p.linkage, tol),
        legs: LegsJson { left: matrices(p.left.images()), right: matrices(p.right.images()) },
        a: Some(generated(&p.left)?),
        b: Some(generated(&p.right)?),
    }))
}

// ── certification ──

fn sqrt_dim(n: usize) -> f64 {
    (n.max(1) as f64).sqrt()
}

fn flag(agree: bool) -> f64 {
    if agree {
        0.0
    } else {
        1.0
    }
}

fn verdict_word(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}

fn certify(cmd: &Command, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    match cmd {
        Command::Gns(i) => gns(&read(&i.input)?, tol, r),
        Command::BaseCheck(i) => base_check(&read(&i.input)?, tol, r),
        Command::Factorize(i) => factorize(&read(&i.input)?, tol, r),
        Command::Rtp(i) => rtp(&read(&i.input)?, tol, r),
        Command::Phi(i) => phi(&read(&i.input)?, tol, r),
        Command::Fiber(i) => fiber(&read(&i.input)?, tol, r),
        Command::MorphismCheck(i) => morphism_check(&read(&i.input)?, tol, r),
        Command::HopfCheck(i) => hopf_check(&read_structure(&i.input)?, i.negative, tol, r),
        Command::PmuCheck(i) => pmu_check(&read_structure(&i.input)?, i.negative, tol, r),
        Command::EquivCheck(i) => equiv_check(&read_structure(&i.input)?, i.negative, tol, r),
        Command::GenGroup { .. } | Command::GenGroupoid { .. } | Command::GenRandomBase { .. } => Ok(()),
    }
}

fn gns(s: &StateJson, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let state = s.to_state(tol)?;
    let g = GnsTriple::new(&state, tol)?;
    let res = g.residuals(&state, tol)?;
    let n = g.dim();
    let thr = tol.check() * sqrt_dim(n);
    r.push(None, &Check::new("state", "⟨ζ_μ, π_μ(a)ζ_μ⟩ = μ(a)", res.state, thr));
    r.push(None, &Check::new("multiplicative", "π_μ(ab) = π_μ(a)π_μ(b)", res.multiplicative, thr));
    r.push(None, &Check::new("commutation", "[π_μ(a), π_μ^op(b)] = 0", res.commutation, thr));
    r.push(None, &Check::new("modular conjugation", "J_μ² = 1", res.involution, thr));
    let deficit = |m| (n - rank(&m, tol).min(n)) as f64;
    r.push(None, &Check::new("cyclic", "[π_μ(N)ζ_μ] = H_μ", deficit(g.orbit()), 0.0));
    r.push(None, &Check::new("cocyclic", "[π_μ^op(N^op)ζ_μ] = H_μ", deficit(g.op_orbit()), 0.0));
    r.note(format!("dim H_μ = {n}"));
    Ok(())
}

fn base_check(b: &BaseJson, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let base = b.to_base(tol)?;
    let n = base.dim();
    let zeta = match base.bicyclic() {
        Some(z) => Some(z.clone()).filter(|z| is_cyclic(base.b(), z, tol) && is_cyclic(base.b_dag(), z, tol)),
        None => base.find_bicyclic(DEFAULT_BICYCLIC_ATTEMPTS, tol),
    };
    let found = if zeta.is_some() { 0.0 } else { f64::INFINITY };
    r.push(None, &Check::new("bicyclic vector", "[𝔅ζ] = [𝔅†ζ] = ℌ", found, 0.0));
    let Some(zeta) = zeta else {
        r.note("no bicyclic vector: the base is not standard");
        return Ok(());
    };
    let base = base.with_bicyclic(zeta.clone(), tol)?;
    let cr = base.check_standard_commutant(tol)?;
    r.push(None, &Check::new("dagger is commutant", "𝔅† = 𝔅′", cr.dagger_vs_commutant, tol.check()));
    r.push(None, &Check::new("bicommutant", "𝔅 = (𝔅†)′", cr.base_vs_bicommutant, tol.check()));
    let eq = base_equivalence(&base, &zeta, tol)?;
    let thr = tol.check() * sqrt_dim(n);
    r.push(None, &Check::new("unitary", "U*U = UU* = 1", eq.unitarity, thr));
    r.push(None, &Check::new("vector", "Uζ = ζ_μ", eq.vector, thr));
    r.push(None, &Check::new("base", "Ad_U(𝔅) = π_μ(𝔅)", eq.base, thr));
    r.push(None, &Check::new("dagger", "Ad_U(𝔅†) = π_μ^op(𝔅^op)", eq.dagger, thr));
    r.note(format!("dim ℌ = {n}, dim 𝔅 = {}, dim 𝔅† = {}", base.b().dim(), base.b_dag().dim()));
    Ok(())
}

fn factorization_checks(f: &CStarFactorization, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let res = f.residuals();
    let thr = tol.check() * sqrt_dim(f.h_dim());
    r.push(None, &Check::new("inner products", "[α*α] = 𝔅", res.inner, tol.check()));
    r.push(None, &Check::new("module", "[α𝔅] = α", res.module, tol.check()));
    r.push(None, &Check::new("defining relation", "ρ_α(b†)x = x b†", res.defining, thr));
    r.push(None, &Check::new("homomorphism", "ρ_α(ab) = ρ_α(a)ρ_α(b)", res.homomorphism, thr));
    let gap = (f.dim() as f64 - f.h_dim() as f64).abs();
    r.push(None, &Check::new("dimension", "dim α = dim H", gap, 0.0));
    let back = factorization_from_rep(f.base(), f.rho(), tol)?;
    let dist = subspace_distance(back.alpha(), f.alpha())?;
    r.push(None, &Check::new("round trip", "L^{ρ_α}(ℌ, H) = α", dist, tol.check()));
    r.note(format!("dim α = {}, dim H = {}, dim ℌ = {}", f.dim(), f.h_dim(), f.base().dim()));
    Ok(())
}

fn factorize(fj: &FactorizationJson, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let built = match fj.input(tol)? {
        FactorizationInput::Alpha(base, h, mats) => CStarFactorization::new(&base, h, &mats, tol),
        FactorizationInput::Rep(base, map) => factorization_from_rep(&base, &map, tol),
    };
    match built {
        Ok(f) => factorization_checks(&f, tol, r),
        Err(CoreError::InvalidFactorization(m)) => {
            r.push(None, &Check::new("factorization", "[α*α] = 𝔅, [α𝔅] = α, [αℌ] = H", f64::INFINITY, tol.check()));
            r.note(m);
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

struct Products {
    linkage: qgw_core::rtensor::Linkage,
    state_side: qgw_core::rtensor::RelativeTensorSpace,
    cstar_side: qgw_core::rtensor::RelativeTensorSpace,
}

fn products(p: &LinkedPairJson, tol: Tolerance) -> Result<Products, CliError> {
    let input = p.input(tol)?;
    let ctx = input.linkage.context().clone();
    let state_side = rtp_state(&ctx, &input.left, &input.right, tol)?;
    let alpha = input.linkage.factorization(&input.left, tol)?;
    let beta = input.linkage.factorization(&input.right, tol)?;
    let cstar_side = rtp_cstar(&alpha, &beta, tol)?;
    Ok(Products { linkage: input.linkage, state_side, cstar_side })
}

fn dimension_check(r: &mut Report, ds: usize, dc: usize) {
    r.push(None, &Check::new("dimension", "dim H ⊗_μ K = dim H ⊗_ℌ K", (ds as f64 - dc as f64).abs(), 0.0));
    r.note(format!("dim H ⊗_μ K = {ds}, dim H ⊗_ℌ K = {dc}"));
}

fn rtp(p: &LinkedPairJson, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let pr = products(p, tol)?;
    let (rs, rc) = (&pr.state_side, &pr.cstar_side);
    let thr = tol.check() * sqrt_dim(rs.dim().max(rc.dim()));
    r.push(Some("state"), &Check::new("quotient", "q G q* = 1", rs.quotient_residual(), thr));
    r.push(Some("C*"), &Check::new("quotient", "q G q* = 1", rc.quotient_residual(), thr));
    r.push(
        Some("C*"),
        &Check::new("ket relations", "⟨ξ|₁|ξ'⟩₁ = ρ_β(ξ*ξ'), ⟨η|₂|η'⟩₂ = ρ_α(η*η')", ket_relation_residual(rc)?, thr),
    );
    dimension_check(r, rs.dim(), rc.dim());
    Ok(())
}

fn phi_checks(r: &mut Report, phi: &PhiReport, d: usize, tol: Tolerance) {
    let thr = tol.check() * sqrt_dim(d);
    r.push(None, &Check::new("unitary", "Φ*Φ = ΦΦ* = 1", phi.unitarity, thr));
    r.push(None, &Check::new("linkage", "ρ = ρ_α ∘ Ad_{U*} ∘ π_μ^op", phi.linkage, thr));
    r.push(None, &Check::new("well defined", "E_ℌ M = Φ E_μ", phi.well_defined, thr));
}

fn phi(p: &LinkedPairJson, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let pr = products(p, tol)?;
    let report = phi_unitary(&pr.state_side, &pr.cstar_side, &pr.linkage, tol)?;
    phi_checks(r, &report, pr.state_side.dim(), tol);
    dimension_check(r, pr.state_side.dim(), pr.cstar_side.dim());
    Ok(())
}

fn fiber(p: &LinkedPairJson, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let (Some(aj), Some(bj)) = (&p.a, &p.b) else {
        return Err(CliError::schema("fiber needs the algebras \"A\" and \"B\""));
    };
    let (a, b) = (aj.to_algebra(tol)?, bj.to_algebra(tol)?);
    let pr = products(p, tol)?;
    let report = phi_unitary(&pr.state_side, &pr.cstar_side, &pr.linkage, tol)?;
    let cl = fiber_classical(&a, &b, &pr.state_side, tol)?;
    let sp = fiber_spatial(&a, &b, &pr.cstar_side, tol)?;
    let iso = phi_iso(&cl, &sp, &report.matrix, tol)?;
    let (dc, ds) = (cl.algebra.dim(), sp.algebra.dim());
    r.push(None, &Check::new("dimension", "dim A ∗_μ B = dim A ∗_ℌ B", (dc as f64 - ds as f64).abs(), 0.0));
    r.push(None, &Check::new("isomorphism", "Ad_Φ(A ∗_μ B) = A ∗_ℌ B", iso.residual, tol.check()));
    r.note(format!("dim A ∗_μ B = {dc}, dim A ∗_ℌ B = {ds}"));
    Ok(())
}

fn morphism_check(m: &MorphismJson, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let domain = m.domain.to_basis_algebra(tol)?;
    let images = crate::json::to_matrices(&m.images)?;
    let alpha = m.alpha.to_factorization(tol)?;
    let beta = m.beta.to_factorization(tol)?;
    let pi = Morphism::new(&domain, &images)?;
    let rep = is_morphism(pi, &alpha, &beta, tol)?;
    let thr = tol.check() * sqrt_dim(beta.h_dim());
    r.push(None, &Check::new("equivariance", "π(ρ_α(b†)) = ρ_β(b†)", rep.equivariance, thr));
    r.push(None, &Check::new("intertwiners", "[L^π(H, K) α] = β", rep.intertwiner, thr));
    Ok(())
}

/// Both sides of a Hopf candidate, checked concurrently.
fn hopf_sides(vn: &HopfCandidate, cs: &HopfCandidate) -> Result<(Certificate, Certificate), CliError> {
    let (a, b) = std::thread::scope(|s| {
        let h = s.spawn(|| check_hopf(cs));
        let a = check_hopf(vn);
        (a, h.join().expect("checker thread panicked"))
    });
    Ok((a?, b?))
}

fn hopf_candidates(
    st: &Structure,
    negative: Option<Negative>,
    tol: Tolerance,
) -> Result<(HopfCandidate, HopfCandidate, PhiReport), CliError> {
    match st {
        Structure::Groupoid(gj) => {
            let (g, w) = groupoid_input(gj)?;
            let h = build_hopf(&g, w.as_deref(), negative, tol)?;
            let (cs, phi) = h.cstar()?;
            Ok((h.candidate, cs, phi))
        }
        Structure::Hopf(b) => {
            if negative.is_some() {
                return Err(CliError::usage("negatives apply to groupoid inputs only"));
            }
            hopf_from_bundle(b, tol)
        }
        Structure::Pmu(_) => Err(CliError::schema("hopf-check expects a groupoid or a Hopf bundle")),
    }
}

fn pmu_candidate(st: &Structure, negative: Option<Negative>, tol: Tolerance) -> Result<PmuCandidate, CliError> {
    match st {
        Structure::Groupoid(gj) => {
            let (g, w) = groupoid_input(gj)?;
            build_pmu(&g, w.as_deref(), negative, tol)
        }
        Structure::Pmu(b) => {
            if negative.is_some() {
                return Err(CliError::usage("negatives apply to groupoid inputs only"));
            }
            pmu_from_bundle(b, tol)
        }
        Structure::Hopf(_) => Err(CliError::schema("pmu-check expects a groupoid or a PMU bundle")),
    }
}

fn hopf_check(st: &Structure, negative: Option<Negative>, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let (vn, cs, phi) = hopf_candidates(st, negative, tol)?;
    let d = vn.space().dim();
    r.push(None, &Check::new("identification", "Φ: H ⊗_μ H → H ⊗_ℌ H unitary", phi.worst(), tol.check() * sqrt_dim(d)));
    let (a, b) = hopf_sides(&vn, &cs)?;
    r.extend(Some("state"), &a);
    r.extend(Some("C*"), &b);
    r.note(format!("dim A = {}, dim H ⊗_μ H = {d}", vn.algebra().dim()));
    Ok(())
}

fn pmu_check(st: &Structure, negative: Option<Negative>, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let c = pmu_candidate(st, negative, tol)?;
    let eq = pmu_equivalence(&c)?;
    let thr = tol.check() * sqrt_dim(c.source().dim());
    r.push(None, &Check::new("identification", "Φ: H ⊗_μ H → H ⊗_ℌ H unitary", eq.identification, thr));
    r.extend(Some("state"), &eq.report.state_side);
    r.extend(Some("C*"), &eq.report.cstar_side);
    r.note(format!("dim source = {}, dim target = {}", c.source().dim(), c.target().dim()));
    Ok(())
}

fn equiv_check(st: &Structure, negative: Option<Negative>, tol: Tolerance, r: &mut Report) -> Result<(), CliError> {
    let Structure::Groupoid(gj) = st else {
        return Err(CliError::schema("equiv-check expects a groupoid"));
    };
    let (g, w) = groupoid_input(gj)?;
    let (pmu_neg, hopf_neg) = match negative {
        Some(n @ (Negative::Swap | Negative::Phase)) => (Some(n), None),
        Some(n) => (None, Some(n)),
        None => (None, None),
    };
    let (pmu, hopf) = std::thread::scope(|s| {
        let h = s.spawn(|| -> Result<_, CliError> {
            let (vn, cs, phi) = hopf_candidates(st, hopf_neg, tol)?;
            let sides = hopf_sides(&vn, &cs)?;
            Ok((phi, vn.space().dim(), sides))
        });
        let p = build_pmu(&g, w.as_deref(), pmu_neg, tol).and_then(|c| {
            let d = c.source().dim();
            Ok((pmu_equivalence(&c)?, d))
        });
        (p, h.join().expect("checker thread panicked"))
    });
    let (eq, d) = pmu?;
    let (phi, dh, (hs, hc)) = hopf?;

    r.push(
        None,
        &Check::new("PMU identification", "Φ: H ⊗_μ H → H ⊗_ℌ H unitary", eq.identification, tol.check() * sqrt_dim(d)),
    );
    let (ps, pc) = (eq.report.state_side.passed(), eq.report.cstar_side.passed());
    r.push(None, &Check::new("PMU verdicts agree", "V certified over μ ⇔ V certified over ℌ", flag(ps == pc), 0.0));
    r.push(
        None,
        &Check::new(
            "intertwining verdicts agree",
            "V intertwines the legs over μ ⇔ over ℌ",
            flag(eq.intertwining_state == eq.intertwining_cstar),
            0.0,
        ),
    );
    r.push(
        None,
        &Check::new("Hopf identification", "Φ: H ⊗_μ H → H ⊗_ℌ H unitary", phi.worst(), tol.check() * sqrt_dim(dh)),
    );
    let (hsp, hcp) = (hs.passed(), hc.passed());
    r.push(
        None,
        &Check::new("Hopf verdicts agree", "Δ certified over μ ⇔ Ad_Φ∘Δ certified over ℌ", flag(hsp == hcp), 0.0),
    );
    r.note(format!(
        "pseudo-multiplicative unitary: state side {}, C* side {}; pentagon residuals {:.3e} / {:.3e}",
        verdict_word(ps),
        verdict_word(pc),
        eq.report.state_side.worst_with_prefix("pentagon"),
        eq.report.cstar_side.worst_with_prefix("pentagon"),
    ));
    r.note(format!("Hopf bimodule: state side {}, C* side {}", verdict_word(hsp), verdict_word(hcp)));
    Ok(())
}
