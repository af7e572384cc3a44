use proptest::prelude::*;

use qgw_core::cbase::{base_equivalence, cbase_from_state};
use qgw_core::cfact::{factorization_from_rep, rho_of_factorization};
use qgw_core::fiber::{fiber_classical, fiber_spatial, phi_iso};
use qgw_core::fixtures::{
    block_algebra, groupoid_hopf, groupoid_pmu, random_faithful_state, random_linked_pair, random_standard_base,
    FiniteGroupoid,
};
use qgw_core::gns::GnsTriple;
use qgw_core::hopf::check_hopf;
use qgw_core::linalg::{
    c, identity, null_space_quotient, rank, subspace_equal, unitarity_residual, ComplexMatrix, OperatorSubspace,
    Tolerance,
};
use qgw_core::pmu::{check_pmu_cstar, check_pmu_vn};
use qgw_core::rng::SeededRng;
use qgw_core::rtensor::{ket_relation_residual, lift_operator};
use qgw_core::staralg::StarAlgebra;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn block_spec() -> impl Strategy<Value = Vec<usize>> {
    prop::sample::select(vec![vec![1], vec![2], vec![1, 1], vec![2, 1], vec![1, 1, 1], vec![3], vec![2, 2], vec![3, 1]])
}

fn twisted_block_algebra(blocks: &[usize], seed: u64) -> StarAlgebra {
    let a = block_algebra(blocks, tol()).unwrap();
    let w = SeededRng::new(seed).unitary(a.carrier_dim());
    a.conjugate_by(&w).unwrap()
}

fn gram_residual(s: &OperatorSubspace) -> f64 {
    let b = s.basis();
    let mut worst: f64 = 0.0;
    for (i, x) in b.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let ip = (x.adjoint() * y).trace();
            let target = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            worst = worst.max((ip - target).norm());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spans_are_orthonormal_and_idempotent(seed in any::<u64>(), count in 1usize..6, rank_cap in 1usize..4) {
        let mut rng = SeededRng::new(seed);
        // `count` operators in a span of dimension at most `rank_cap`
        let gens: Vec<ComplexMatrix> = (0..rank_cap).map(|_| rng.gaussian_matrix(3, 2)).collect();
        let mats: Vec<ComplexMatrix> = (0..count)
            .map(|_| gens.iter().fold(ComplexMatrix::zeros(3, 2), |acc, g| acc + g * rng.complex_gaussian()))
            .collect();
        let s = OperatorSubspace::span(&mats, tol()).unwrap();
        prop_assert!(s.dim() <= count.min(rank_cap));
        prop_assert!(gram_residual(&s) <= tol().check());
        let again = OperatorSubspace::span(s.basis(), tol()).unwrap();
        prop_assert!(subspace_equal(&s, &again, tol()).unwrap());
    }

    #[test]
    fn quotient_normalizes_the_gram_matrix(seed in any::<u64>(), n in 1usize..7, r in 1usize..7) {
        let r = r.min(n);
        let mut rng = SeededRng::new(seed);
        let x = rng.gaussian_matrix(n, r);
        let gram = &x * x.adjoint();
        let q = null_space_quotient(&gram, tol()).unwrap();
        let co = &q.co_isometry;
        prop_assert!((co * &gram * co.adjoint() - identity(q.dim())).norm() <= tol().check());
        prop_assert_eq!(q.dim() + (n - rank(&gram, tol())), n);
        prop_assert_eq!(q.dim(), r);
    }

    #[test]
    fn double_commutant_is_the_algebra(spec in block_spec(), seed in any::<u64>()) {
        let a = twisted_block_algebra(&spec, seed);
        let ac = a.commutant(tol()).unwrap();
        let acc = ac.commutant(tol()).unwrap();
        prop_assert!(subspace_equal(a.subspace(), acc.subspace(), tol()).unwrap());
        let r = ac.residuals();
        prop_assert!(r.adjoint <= tol().check() && r.product <= tol().check());
    }

    #[test]
    fn central_projections_partition_unity(spec in block_spec(), seed in any::<u64>()) {
        let a = twisted_block_algebra(&spec, seed);
        let ps = a.central_projections(tol()).unwrap();
        prop_assert_eq!(ps.len(), spec.len());
        let n = a.carrier_dim();
        let sum = ps.iter().fold(ComplexMatrix::zeros(n, n), |acc, p| acc + p);
        prop_assert!((sum - identity(n)).norm() <= tol().check());
        for (i, p) in ps.iter().enumerate() {
            for (j, q) in ps.iter().enumerate() {
                let expect = if i == j { p.clone() } else { ComplexMatrix::zeros(n, n) };
                prop_assert!((p * q - expect).norm() <= tol().check());
            }
        }
    }

    #[test]
    fn gns_triples_satisfy_their_axioms(spec in block_spec(), seed in any::<u64>()) {
        let state = random_faithful_state(&spec, seed, tol()).unwrap();
        let g = GnsTriple::new(&state, tol()).unwrap();
        let r = g.residuals(&state, tol()).unwrap();
        prop_assert!(r.state <= tol().check());
        prop_assert!(r.multiplicative <= tol().check());
        prop_assert!(r.involution <= tol().check());
        prop_assert!(r.commutation <= tol().check());
        prop_assert!(r.cyclic && r.cocyclic);
        let j2 = g.modular_conjugation().square();
        prop_assert!((j2 - identity(g.dim())).norm() <= tol().check());
    }

    #[test]
    fn standard_bases_are_their_own_commutant_duals(spec in block_spec(), seed in any::<u64>()) {
        let state = random_faithful_state(&spec, seed, tol()).unwrap();
        let base = cbase_from_state(&state, tol()).unwrap();
        prop_assert!(base.check_standard_commutant(tol()).unwrap().worst() <= tol().check());
        let zeta = base.find_bicyclic(5, tol());
        prop_assert!(zeta.is_some());
        let eq = base_equivalence(&base, &zeta.unwrap(), tol()).unwrap();
        prop_assert!(eq.worst() <= tol().check() * 10.0);
    }

    #[test]
    fn factorizations_round_trip(spec in block_spec(), seed in any::<u64>()) {
        let pair = random_linked_pair(&spec, seed, tol()).unwrap();
        for leg in [&pair.left, &pair.right] {
            let f = pair.linkage.factorization(leg, tol()).unwrap();
            prop_assert_eq!(f.dim(), f.h_dim());
            let g = factorization_from_rep(f.base(), rho_of_factorization(&f), tol()).unwrap();
            prop_assert!(subspace_equal(f.alpha(), g.alpha(), tol()).unwrap());
            let zeta = f.base().zeta().unwrap().clone();
            let mut rng = SeededRng::new(seed.wrapping_add(1));
            let xi = rng.unit_vector(f.h_dim());
            let r = f.r_operator(&xi).unwrap();
            prop_assert!((r * &zeta - &xi).norm() <= tol().check());
        }
    }

    #[test]
    fn linked_products_are_unitarily_identified(spec in block_spec(), seed in any::<u64>()) {
        let pair = random_linked_pair(&spec, seed, tol()).unwrap();
        prop_assert_eq!(pair.state_side.dim(), pair.cstar_side.dim());
        prop_assert!(unitarity_residual(&pair.phi.matrix) <= tol().check());
        prop_assert!(ket_relation_residual(&pair.cstar_side).unwrap() <= tol().check());
    }

    #[test]
    fn lifts_are_multiplicative(spec in block_spec(), seed in any::<u64>()) {
        let pair = random_linked_pair(&spec, seed, tol()).unwrap();
        let h = pair.state_side.left_dim();
        let k = pair.state_side.right_dim();
        let a = StarAlgebra::commutant_of(h, pair.left.images(), tol()).unwrap();
        let b = StarAlgebra::commutant_of(k, pair.right.images(), tol()).unwrap();
        let mut rng = SeededRng::new(seed);
        let pick = |alg: &StarAlgebra, rng: &mut SeededRng| {
            alg.basis().iter().fold(ComplexMatrix::zeros(alg.carrier_dim(), alg.carrier_dim()), |acc, x| acc + x * rng.complex_gaussian())
        };
        let (s1, s2) = (pick(&a, &mut rng), pick(&a, &mut rng));
        let (t1, t2) = (pick(&b, &mut rng), pick(&b, &mut rng));
        let sp = &pair.state_side;
        let lhs = lift_operator(sp, &s1, &t1, tol()).unwrap() * lift_operator(sp, &s2, &t2, tol()).unwrap();
        let rhs = lift_operator(sp, &(&s1 * &s2), &(&t1 * &t2), tol()).unwrap();
        prop_assert!((&lhs - rhs).norm() <= tol().check() * lhs.norm().max(1.0));
    }

    #[test]
    fn phi_carries_fiber_products(seed in any::<u64>()) {
        let pair = random_linked_pair(&[1, 1], seed, tol()).unwrap();
        let h = pair.state_side.left_dim();
        let k = pair.state_side.right_dim();
        let a = StarAlgebra::commutant_of(h, pair.left.images(), tol()).unwrap().commutant(tol()).unwrap();
        let b = StarAlgebra::full(k);
        let cl = fiber_classical(&a, &b, &pair.state_side, tol()).unwrap();
        let sp = fiber_spatial(&a, &b, &pair.cstar_side, tol()).unwrap();
        prop_assert!(phi_iso(&cl, &sp, &pair.phi.matrix, tol()).unwrap().equal);
    }

    #[test]
    fn generators_are_deterministic(spec in block_spec(), seed in any::<u64>()) {
        let a = random_standard_base(&spec, seed, tol()).unwrap();
        let b = random_standard_base(&spec, seed, tol()).unwrap();
        prop_assert_eq!(a.b().basis(), b.b().basis());
        prop_assert_eq!(a.b_dag().basis(), b.b_dag().basis());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn weighted_groupoid_structures_pass(w in 0.05f64..0.95, pair in any::<bool>()) {
        let (g, weights) = if pair {
            (FiniteGroupoid::pair(2).unwrap(), vec![w, 1.0 - w])
        } else {
            (FiniteGroupoid::cyclic(3).unwrap(), vec![1.0])
        };
        let pmu = groupoid_pmu(&g, Some(&weights), tol()).unwrap();
        let vn = check_pmu_vn(&pmu).unwrap();
        let cs = check_pmu_cstar(&pmu).unwrap();
        prop_assert!(vn.passed() && cs.passed());
        prop_assert!(vn.residual("pentagon").unwrap() <= tol().loose());
        let h = groupoid_hopf(&g, Some(&weights), tol()).unwrap();
        let cert = check_hopf(&h.candidate).unwrap();
        prop_assert!(cert.passed(), "{:?}", cert.failing_axioms());
        prop_assert!(cert.residual("coassociativity").unwrap() <= tol().check());
    }
}
