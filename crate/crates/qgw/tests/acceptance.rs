//! Acceptance suite. Runs every criterion on its own thread and prints one
//! line per criterion in order; exits nonzero when any of them fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use qgw_core::cbase::CStarBase;
use qgw_core::cfact::{compatibility, factorization_from_rep, rho_of_factorization, CStarFactorization};
use qgw_core::fiber::{fiber_classical, fiber_spatial, is_morphism, phi_iso, Morphism};
use qgw_core::fixtures::{
    block_algebra, fixture_f1, fixture_f2, fixture_f4, groupoid_hopf, groupoid_hopf_negative, groupoid_pmu,
    groupoid_pmu_negative, random_linked_pair, random_standard_base, FiniteGroupoid, HopfNegative, LinkedPair,
    PmuNegative,
};
use qgw_core::hopf::hopf_equivalence;
use qgw_core::linalg::{
    c, subspace_distance, subspace_equal, unit, unitarity_residual, unitary_exp, ComplexMatrix, Tolerance,
};
use qgw_core::pmu::pmu_equivalence;
use qgw_core::report::{Certificate, Equivalence};
use qgw_core::rng::SeededRng;
use qgw_core::staralg::{AlgebraMap, StarAlgebra};

type Outcome = Result<String, String>;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> String + '_ {
    move |err| format!("{what}: {err}")
}

const SPECS: [&[usize]; 8] = [&[1, 1], &[2], &[2, 1], &[1, 1, 1], &[3], &[2, 2], &[3, 1], &[3, 2, 1]];
const SMALL_SPECS: [&[usize]; 5] = [&[1], &[1, 1], &[2], &[2, 1], &[1, 1, 1]];

fn random_pair(i: usize) -> Result<LinkedPair, String> {
    let spec = SMALL_SPECS[i % SMALL_SPECS.len()];
    random_linked_pair(spec, 1000 + i as u64, tol()).map_err(e("random linked pair"))
}

// ── 1. A'' = A ──

fn commutant_duality() -> Outcome {
    let mut worst: f64 = 0.0;
    let n = 24;
    for i in 0..n {
        let spec = SPECS[i % SPECS.len()];
        let a = block_algebra(spec, tol()).map_err(e("block algebra"))?;
        let w = SeededRng::new(i as u64).unitary(a.carrier_dim());
        let a = a.conjugate_by(&w).map_err(e("conjugate"))?;
        let acc = a.commutant(tol()).and_then(|x| x.commutant(tol())).map_err(e("commutant"))?;
        let eq = subspace_equal(a.subspace(), acc.subspace(), tol()).map_err(e("compare"))?;
        worst = worst.max(subspace_distance(a.subspace(), acc.subspace()).map_err(e("distance"))?);
        ensure(eq, || format!("A'' != A for blocks {spec:?}, seed {i}"))?;
    }
    Ok(format!("{n} twisted block algebras, worst distance {worst:.2e}"))
}

// ── 2. 𝔅† = 𝔅′, 𝔅 = (𝔅†)′ ──

fn standard_commutant() -> Outcome {
    let mut worst: f64 = 0.0;
    let n = 24;
    for i in 0..n {
        let spec = SPECS[i % SPECS.len()];
        let base = random_standard_base(spec, 50 + i as u64, tol()).map_err(e("standard base"))?;
        let r = base.check_standard_commutant(tol()).map_err(e("commutant check"))?.worst();
        worst = worst.max(r);
        ensure(r <= 1e-8, || format!("blocks {spec:?}, seed {}: residual {r:.3e}", 50 + i))?;
    }
    Ok(format!("{n} standard bases, worst residual {worst:.2e}"))
}

// ── 3. α ↦ ρ_α ↦ α ──

fn factorization_round_trip() -> Outcome {
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for i in 0..12 {
        let pair = random_pair(i)?;
        for leg in [&pair.left, &pair.right] {
            let f = pair.linkage.factorization(leg, tol()).map_err(e("factorization"))?;
            ensure(f.dim() == f.h_dim(), || format!("pair {i}: dim α = {} but dim H = {}", f.dim(), f.h_dim()))?;
            let g = factorization_from_rep(f.base(), rho_of_factorization(&f), tol()).map_err(e("from rep"))?;
            let same = subspace_equal(f.alpha(), g.alpha(), tol()).map_err(e("compare"))?;
            worst = worst.max(subspace_distance(f.alpha(), g.alpha()).map_err(e("distance"))?);
            ensure(same, || format!("pair {i}: round trip changed α"))?;
            count += 1;
        }
    }
    Ok(format!("{count} factorizations, dim α = dim H, worst distance {worst:.2e}"))
}

// ── 4. compatibility ⇔ [ρ_α(𝔅†), ρ_β(ℭ†)] = 0 ──

fn compat_case(f: &CStarFactorization, g: &CStarFactorization, expect: bool, label: &str) -> Result<(), String> {
    // An Ok result already means the span and commutator criteria agree.
    let r = compatibility(f, g, tol()).map_err(e(label))?;
    ensure(r.compatible == expect, || {
        format!(
            "{label}: expected {expect}, got {} (span {:.2e}, commutator {:.2e})",
            r.compatible, r.span_residual, r.commutator
        )
    })
}

fn compatibility_suite() -> Outcome {
    let t = tol();
    let (mut yes, mut no) = (0, 0);

    let one = StarAlgebra::full(1);
    let trivial = CStarBase::new(one.clone(), one, Some(qgw_core::linalg::basis_vector(1, 0)), t).map_err(e("base"))?;
    let f = CStarFactorization::new(&trivial, 2, &[unit(2, 1, 0, 0), unit(2, 1, 1, 0)], t).map_err(e("trivial"))?;
    compat_case(&f, &f, true, "trivial base")?;
    yes += 1;

    let diag = random_standard_base(&[1, 1], 3, t).map_err(e("diagonal base"))?;
    let rho = AlgebraMap::from_images(diag.b_dag(), diag.b_dag().basis().to_vec()).map_err(e("map"))?;
    let f = factorization_from_rep(&diag, &rho, t).map_err(e("diagonal α"))?;
    let g = factorization_from_rep(&diag.opposite(), &rho, t).map_err(e("diagonal β"))?;
    compat_case(&f, &g, true, "diagonal base")?;
    yes += 1;

    for (i, spec) in [&[1, 1][..], &[2], &[2, 1], &[3], &[2, 2]].iter().enumerate() {
        let base = random_standard_base(spec, 70 + i as u64, t).map_err(e("standard base"))?;
        let h = base.dim();
        let opp = base.opposite();
        let alpha = CStarFactorization::new(&base, h, base.b().basis(), t).map_err(e("α = 𝔅"))?;
        let beta = CStarFactorization::new(&opp, h, opp.b().basis(), t).map_err(e("β = 𝔅†"))?;
        compat_case(&alpha, &beta, true, &format!("𝔅 against 𝔅†, blocks {spec:?}"))?;
        yes += 1;
        let w = SeededRng::new(90 + i as u64).unitary(h);
        let moved: Vec<ComplexMatrix> = beta.rho().images().iter().map(|x| &w * x * w.adjoint()).collect();
        let rho = AlgebraMap::from_images(opp.b_dag(), moved).map_err(e("map"))?;
        let gamma = factorization_from_rep(&opp, &rho, t).map_err(e("twisted β"))?;
        compat_case(&alpha, &gamma, false, &format!("𝔅 against W𝔅†W*, blocks {spec:?}"))?;
        no += 1;
    }
    Ok(format!("{yes} compatible and {no} incompatible pairs classified identically by both criteria"))
}

// ── 5. Φ unitary, dim H ⊗_μ K = dim H ⊗_ℌ K ──

fn phi_unitarity() -> Outcome {
    let mut pairs = vec![
        ("F1".to_owned(), fixture_f1(tol()).map_err(e("F1"))?),
        ("F2".to_owned(), fixture_f2(tol()).map_err(e("F2"))?),
        ("F4".to_owned(), fixture_f4(tol()).map_err(e("F4"))?),
    ];
    for i in 0..12 {
        pairs.push((format!("random pair {i}"), random_pair(i)?));
    }
    let mut worst: f64 = 0.0;
    for (name, p) in &pairs {
        let r = unitarity_residual(&p.phi.matrix);
        worst = worst.max(r);
        ensure(r <= 1e-8, || format!("{name}: unitarity residual {r:.3e}"))?;
        ensure(p.state_side.dim() == p.cstar_side.dim(), || {
            format!("{name}: dims {} and {}", p.state_side.dim(), p.cstar_side.dim())
        })?;
    }
    Ok(format!("{} linked pairs, worst ‖Φ*Φ − 1‖ {worst:.2e}", pairs.len()))
}

// ── 6. Ad_Φ(A ∗_μ B) = A ∗_ℌ B ──

fn leg_closure(p: &LinkedPair, left: bool) -> Result<StarAlgebra, String> {
    let (leg, dim) = if left { (&p.left, p.state_side.left_dim()) } else { (&p.right, p.state_side.right_dim()) };
    StarAlgebra::closure(dim, leg.images(), true, tol()).map_err(e("leg closure"))
}

fn fiber_iso(name: &str, p: &LinkedPair, a: &StarAlgebra, b: &StarAlgebra) -> Result<f64, String> {
    let cl = fiber_classical(a, b, &p.state_side, tol()).map_err(e(name))?;
    let sp = fiber_spatial(a, b, &p.cstar_side, tol()).map_err(e(name))?;
    let r = phi_iso(&cl, &sp, &p.phi.matrix, tol()).map_err(e(name))?;
    ensure(r.residual <= 1e-8, || format!("{name}: residual {:.3e}", r.residual))?;
    Ok(r.residual)
}

fn fiber_products() -> Outcome {
    let d2 = block_algebra(&[1, 1], tol()).map_err(e("D2"))?;
    let d4 = block_algebra(&[1, 1, 1, 1], tol()).map_err(e("D4"))?;
    let f2 = fixture_f2(tol()).map_err(e("F2"))?;
    let f4 = fixture_f4(tol()).map_err(e("F4"))?;
    let mut worst = fiber_iso("F2 with D2, D2", &f2, &d2, &d2)?;
    worst = worst.max(fiber_iso("F4 with D4, D4", &f4, &d4, &d4)?);
    worst = worst.max(fiber_iso("F4 with D4, M4", &f4, &d4, &StarAlgebra::full(4))?);
    let mut count = 3;
    for i in 0..10 {
        let p = random_pair(i)?;
        let a = leg_closure(&p, true)?;
        let b = if i % 2 == 0 { leg_closure(&p, false)? } else { StarAlgebra::full(p.state_side.right_dim()) };
        worst = worst.max(fiber_iso(&format!("random pair {i}"), &p, &a, &b)?);
        count += 1;
    }
    Ok(format!("{count} fiber products, worst subspace residual {worst:.2e}"))
}

// ── 7. π ∘ ρ_α = ρ_β ⇔ [L^π α] = β ──

fn morphism_case(
    name: &str,
    domain: &StarAlgebra,
    images: &[ComplexMatrix],
    alpha: &CStarFactorization,
    expect: bool,
) -> Result<(), String> {
    let pi = Morphism::new(domain, images).map_err(e(name))?;
    // Ok means the equivariance and intertwiner criteria gave the same answer.
    let r = is_morphism(pi, alpha, alpha, tol()).map_err(e(name))?;
    ensure(r.is_morphism == expect, || {
        format!(
            "{name}: expected {expect}, got {} (equivariance {:.2e}, intertwiners {:.2e})",
            r.is_morphism, r.equivariance, r.intertwiner
        )
    })
}

fn conjugated(domain: &StarAlgebra, u: &ComplexMatrix) -> Vec<ComplexMatrix> {
    domain.basis().iter().map(|x| u * x * u.adjoint()).collect()
}

fn permutation(n: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let to = if k == i {
            j
        } else if k == j {
            i
        } else {
            k
        };
        p[(to, k)] = c(1.0, 0.0);
    }
    p
}

fn morphism_suite() -> Outcome {
    let t = tol();
    let f2 = fixture_f2(t).map_err(e("F2"))?;
    let f4 = fixture_f4(t).map_err(e("F4"))?;
    let rp = random_pair(3)?;
    let a2 = f2.linkage.factorization(&f2.left, t).map_err(e("F2 α"))?;
    let a4 = f4.linkage.factorization(&f4.left, t).map_err(e("F4 α"))?;
    let ar = rp.linkage.factorization(&rp.left, t).map_err(e("random α"))?;
    let (m2, m4, mr) = (StarAlgebra::full(2), StarAlgebra::full(4), StarAlgebra::full(ar.h_dim()));

    morphism_case("identity on F2", &m2, m2.basis(), &a2, true)?;
    morphism_case("identity on F4", &m4, m4.basis(), &a4, true)?;
    let comm = StarAlgebra::commutant_of(ar.h_dim(), ar.rho().images(), t).map_err(e("commutant"))?;
    let mut rng = SeededRng::new(17);
    let x = comm
        .basis()
        .iter()
        .fold(ComplexMatrix::zeros(ar.h_dim(), ar.h_dim()), |acc, b| acc + b * rng.complex_gaussian());
    let v = unitary_exp(&(&x + x.adjoint()), 1.0);
    morphism_case("Ad_v, v ∈ ρ_α(𝔅†)′", &mr, &conjugated(&mr, &v), &ar, true)?;

    morphism_case("coordinate swap on F2", &m2, &conjugated(&m2, &permutation(2, 0, 1)), &a2, false)?;
    let g = FiniteGroupoid::pair(2).map_err(e("pair groupoid"))?;
    let arrows = g.arrows();
    let j = (1..arrows.len()).find(|&j| arrows[j].tgt != arrows[0].tgt).ok_or("no target-changing swap")?;
    morphism_case("target-changing permutation on F4", &m4, &conjugated(&m4, &permutation(4, 0, j)), &a4, false)?;
    let u = SeededRng::new(29).unitary(ar.h_dim());
    morphism_case("Ad_u, u random", &mr, &conjugated(&mr, &u), &ar, false)?;
    Ok("3 morphisms and 3 non-morphisms classified identically by both criteria".to_owned())
}

// ── 8. Hopf bimodules ──

fn groupoid_suite() -> Result<Vec<(&'static str, FiniteGroupoid)>, String> {
    Ok(vec![
        ("ℤ/2", FiniteGroupoid::cyclic(2).map_err(e("ℤ/2"))?),
        ("ℤ/3", FiniteGroupoid::cyclic(3).map_err(e("ℤ/3"))?),
        ("pair(2)", FiniteGroupoid::pair(2).map_err(e("pair(2)"))?),
        ("pair(3)", FiniteGroupoid::pair(3).map_err(e("pair(3)"))?),
    ])
}

fn hopf_sides(g: &FiniteGroupoid, w: Option<&[f64]>, neg: Option<HopfNegative>) -> Result<Equivalence, String> {
    let h = match neg {
        None => groupoid_hopf(g, w, tol()),
        Some(n) => groupoid_hopf_negative(g, w, n, tol()),
    }
    .map_err(e("Hopf bimodule"))?;
    let (cs, phi) = h.cstar().map_err(e("transport"))?;
    hopf_equivalence(&h.candidate, &cs, &phi.matrix).map_err(e("equivalence"))
}

fn fails_leg(c: &Certificate) -> bool {
    c.failing_axioms().iter().any(|a| a.starts_with("leg"))
}

fn hopf_suite() -> Outcome {
    let groupoids = groupoid_suite()?;
    for (name, g) in &groupoids {
        let eq = hopf_sides(g, None, None)?;
        ensure(eq.agree() && eq.state_side.passed(), || {
            format!(
                "{name}: state side {:?}, C* side {:?}",
                eq.state_side.failing_axioms(),
                eq.cstar_side.failing_axioms()
            )
        })?;
    }
    let pair2 = &groupoids[2].1;
    let weighted = [0.3, 0.7];
    let legs: [(&str, Option<&[f64]>, usize); 3] =
        [("pair(2) Leg(0)", None, 0), ("pair(2) weighted Leg(0)", Some(&weighted), 0), ("pair(2) Leg(1)", None, 1)];
    for (name, w, k) in legs {
        let eq = hopf_sides(pair2, w, Some(HopfNegative::Leg(k)))?;
        ensure(fails_leg(&eq.state_side) && fails_leg(&eq.cstar_side), || {
            format!(
                "{name}: state side {:?}, C* side {:?}",
                eq.state_side.failing_axioms(),
                eq.cstar_side.failing_axioms()
            )
        })?;
    }
    let eq = hopf_sides(&groupoids[1].1, None, Some(HopfNegative::Character))?;
    ensure(eq.agree() && !eq.state_side.passed(), || "ℤ/3 character: not rejected by both sides".to_owned())?;
    Ok(format!(
        "{} groupoids pass on both sides; 3 leg negatives fail a leg axiom on both sides; character negative rejected",
        groupoids.len()
    ))
}

// ── 9. pseudo-multiplicative unitaries ──

fn pentagons(c: &qgw_core::pmu::PmuEquivalence) -> (f64, f64) {
    let get = |cert: &Certificate| cert.residual("pentagon").unwrap_or(f64::NAN);
    (get(&c.report.state_side), get(&c.report.cstar_side))
}

fn pmu_suite() -> Outcome {
    let mut worst_pos: f64 = 0.0;
    let mut least_neg = f64::INFINITY;
    let groupoids = groupoid_suite()?;
    for (name, g) in &groupoids {
        let c = groupoid_pmu(g, None, tol()).map_err(e(name))?;
        let eq = pmu_equivalence(&c).map_err(e(name))?;
        let (a, b) = pentagons(&eq);
        ensure(eq.agree() && eq.report.state_side.passed(), || {
            format!(
                "{name}: state side {:?}, C* side {:?}",
                eq.report.state_side.failing_axioms(),
                eq.report.cstar_side.failing_axioms()
            )
        })?;
        ensure(a <= 1e-7 && b <= 1e-7, || format!("{name}: pentagon residuals {a:.3e}, {b:.3e}"))?;
        worst_pos = worst_pos.max(a).max(b);
    }
    let negatives = [
        ("ℤ/2 swap", &groupoids[0].1, PmuNegative::Swap),
        ("ℤ/3 swap", &groupoids[1].1, PmuNegative::Swap),
        ("pair(2) phase", &groupoids[2].1, PmuNegative::Phase),
        ("ℤ/3 phase", &groupoids[1].1, PmuNegative::Phase),
    ];
    for (name, g, kind) in negatives {
        let c = groupoid_pmu_negative(g, None, kind, tol()).map_err(e(name))?;
        let eq = pmu_equivalence(&c).map_err(e(name))?;
        let (a, b) = pentagons(&eq);
        ensure(eq.agree() && !eq.report.state_side.passed(), || format!("{name}: verdicts differ or pass"))?;
        ensure(a >= 1e-4 && b >= 1e-4, || format!("{name}: pentagon residuals {a:.3e}, {b:.3e}"))?;
        least_neg = least_neg.min(a).min(b);
    }
    Ok(format!(
        "{} positives (pentagon ≤ {worst_pos:.2e}) and {} negatives (pentagon ≥ {least_neg:.2e}) with equal verdicts",
        groupoids.len(),
        negatives.len()
    ))
}

// ── 10. determinism ──

fn qgw(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qgw"))
        .args(args)
        .env_remove("QGW_TOLERANCE")
        .output()
        .map_err(|err| format!("spawn qgw: {err}"))?;
    match out.status.code() {
        Some(0) | Some(1) => Ok(()),
        code => Err(format!("qgw {args:?} exited with {code:?}: {}", String::from_utf8_lossy(&out.stderr))),
    }
}

fn run_once(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    fs::create_dir_all(dir).map_err(|err| err.to_string())?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    qgw(&["gen-random-base", "--blocks", "2,1", "--seed", "11", "--out", &p("base.json")])?;
    qgw(&["gen-random-base", "--blocks", "1,1", "--seed", "5", "--linked", "--out", &p("linked.json")])?;
    qgw(&["gen-groupoid", "--pair", "2", "--weights", "0.3,0.7", "--out", &p("pair.json")])?;
    qgw(&["base-check", "--in", &p("base.json"), "--out", &p("base-report.json")])?;
    qgw(&["phi", "--in", &p("linked.json"), "--out", &p("phi-report.json")])?;
    qgw(&["pmu-check", "--in", &p("pair.json"), "--out", &p("pmu-report.json")])?;
    qgw(&["hopf-check", "--in", &p("pair.json"), "--negative", "leg", "--out", &p("hopf-report.json")])?;
    let mut files = Vec::new();
    for name in
        ["base.json", "linked.json", "base-report.json", "phi-report.json", "pmu-report.json", "hopf-report.json"]
    {
        files.push((name.to_owned(), fs::read(dir.join(name)).map_err(|err| err.to_string())?));
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = fs::remove_dir_all(&root);
    let a = run_once(&root.join("first"))?;
    let b = run_once(&root.join("second"))?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} JSON files byte-identical across two runs", a.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("A'' = A", commutant_duality),
        ("𝔅† = 𝔅′, 𝔅 = (𝔅†)′", standard_commutant),
        ("α ↦ ρ_α ↦ α, dim α = dim H", factorization_round_trip),
        ("compatible ⇔ [ρ_α(𝔅†), ρ_β(ℭ†)] = 0", compatibility_suite),
        ("Φ*Φ = ΦΦ* = 1", phi_unitarity),
        ("Ad_Φ(A ∗_μ B) = A ∗_ℌ B", fiber_products),
        ("π ∘ ρ_α = ρ_β ⇔ [L^π α] = β", morphism_suite),
        ("Hopf verdict (state) = Hopf verdict (C*)", hopf_suite),
        ("V₁₂V₁₃V₂₃ = V₂₃V₁₂ verdicts agree", pmu_suite),
        ("same seed ⇒ same bytes", determinism),
    ];
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(_, f)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let r = f();
                    (r, start.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| (Err("panicked".to_owned()), 0.0))).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), (r, secs))) in criteria.iter().zip(results).enumerate() {
        let (mark, detail) = match r {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {mark} [{secs:5.1}s] {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
