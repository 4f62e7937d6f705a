//! Cross-module invariants that complement the acceptance criteria.

use num_traits::Signed;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sa_lab_core::formula::{build_clique_formula, poly_from, Monomial};
use sa_lab_core::graph::{BlockGraph, Rectangle};
use sa_lab_core::lp;
use sa_lab_core::proof;
use sa_lab_core::rational::{rat, rat_int, Rat};
use sa_lab_core::simplex::LpStatus;
use sa_lab_core::validate;

#[test]
fn verifier_agreement_500_certificates() {
    let report = validate::validate_proofs(500, 4711).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn soundness_exhaustive_small_shapes() {
    // Certificates exist exactly for the cliqueless graphs, over every graph
    // of each shape.
    for (n, k) in [(1usize, 2usize), (1, 3), (2, 2), (1, 4)] {
        let report = validate::validate_soundness(n, k).unwrap();
        assert!(report.pass, "shape n={n} k={k}");
    }
}

#[test]
fn soundness_sampled_five_and_six_variables() {
    // Shapes with 5-6 variables are spot-checked on random samples.
    for (n, k, seeds) in [(1usize, 5usize, 12u64), (2, 3, 2), (1, 6, 2)] {
        for seed in 0..seeds {
            let p = rat(1, 3);
            let g = BlockGraph::sample(n, k, &p, 90_000 + seed).unwrap();
            let sys = build_clique_formula(&g);
            let idx = lp::MonomialIndex::new(n * k, None).unwrap();
            let primal = lp::build_primal(&sys, &idx).unwrap();
            let sol = lp::solve(&primal).unwrap();
            let feasible = sol.status == LpStatus::Optimal;
            assert_eq!(
                feasible,
                !g.has_transversal_clique(),
                "n={n} k={k} seed={seed}"
            );
        }
    }
}

#[test]
fn gate_equivalence_certificates_dominate_inverse_delta() {
    // Whenever a measure passes at level delta, every accepted certificate
    // weighs at least 1/delta: randomized certificates built from the optimal
    // one by null moves never drop below the optimum.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let g = BlockGraph::sample(1, 4, &rat(1, 3), 5).unwrap();
    if g.has_transversal_clique() {
        panic!("seed chosen to be cliqueless");
    }
    let sys = build_clique_formula(&g);
    let idx = lp::MonomialIndex::new(4, None).unwrap();
    let primal = lp::build_primal(&sys, &idx).unwrap();
    let sol = lp::solve(&primal).unwrap();
    let optimum = sol.objective.clone().unwrap();
    let (base, mu) = lp::extract_solutions(&sys, &idx, &primal, &sol).unwrap();
    assert!(lp::check_pseudo_measure(&mu, &sys, &mu.delta, &idx).pass);
    assert_eq!(mu.delta.clone().recip(), optimum);
    for _ in 0..30 {
        let mut pi = base.clone();
        for _ in 0..rng.gen_range(1..4usize) {
            let j = rng.gen_range(0..sys.axioms.len());
            let l = rng.gen_range(0..sys.axioms.len());
            if j == l {
                continue;
            }
            let s = Monomial::var(rng.gen_range(0..4));
            let c = rat_int(rng.gen_range(1..=2));
            let mut add = |idx_: usize, src: usize, sign: Rat| {
                let mut terms: Vec<(Monomial, Rat)> =
                    pi.multipliers[idx_].clone().into_iter().collect();
                for (m, gamma) in &sys.axioms[src].poly {
                    if let Some(prod) = m.mul(&s) {
                        terms.push((prod, gamma * &sign));
                    }
                }
                pi.multipliers[idx_] = poly_from(terms);
            };
            add(j, l, c.clone());
            add(l, j, -c);
        }
        if !proof::verify_canonical(&sys, &pi).unwrap() {
            continue;
        }
        let sizes = proof::size_report(&pi, &sys).unwrap();
        assert!(
            sizes.lp_objective >= optimum,
            "an accepted certificate beat the optimum"
        );
    }
}

#[test]
fn coefficient_size_bounded_by_axiom_norm_times_objective() {
    // The expanded mass never exceeds the multiplier mass scaled by the
    // largest axiom one-norm; with unit-coefficient axioms it dominates it.
    let g = BlockGraph::sample(2, 2, &rat(1, 4), 3).unwrap();
    let sys = build_clique_formula(&g);
    let idx = lp::MonomialIndex::new(4, None).unwrap();
    let primal = lp::build_primal(&sys, &idx).unwrap();
    let sol = lp::solve(&primal).unwrap();
    if sol.status != LpStatus::Optimal {
        return; // clique sample; nothing to check
    }
    let (pi, _) = lp::extract_solutions(&sys, &idx, &primal, &sol).unwrap();
    let sizes = proof::size_report(&pi, &sys).unwrap();
    let norm = sys.max_axiom_one_norm();
    assert!(sizes.coefficient_size <= &sizes.lp_objective * &norm);
    assert!(sizes.coefficient_size >= sizes.lp_objective.clone() - rat_int(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampling_is_shape_and_seed_deterministic(
        n in 1usize..6, k in 1usize..4, num in 0i64..4, seed in 0u64..1000
    ) {
        let p = rat(num, 4);
        let a = BlockGraph::sample(n, k, &p, seed).unwrap();
        let b = BlockGraph::sample(n, k, &p, seed).unwrap();
        prop_assert_eq!(a.edges(), b.edges());
        for (u, v) in a.edges() {
            prop_assert_ne!(a.block_of(u), a.block_of(v));
        }
    }

    #[test]
    fn rectangle_projection_cardinality_is_side_product(
        n in 1usize..5, k in 2usize..5, seed in 0u64..500
    ) {
        let g = BlockGraph::empty(n, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sides = Vec::new();
        for b in 0..k {
            let side: Vec<u32> = g.block_vertices(b).filter(|_| rng.gen_bool(0.6)).collect();
            sides.push(side);
        }
        let q = Rectangle::new(&g, (0..k).collect(), sides.clone()).unwrap();
        let keep: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.5)).collect();
        let proj = q.project(&keep).unwrap();
        let expected: num_bigint::BigUint = keep
            .iter()
            .map(|&b| num_bigint::BigUint::from(sides[b].len()))
            .product();
        prop_assert_eq!(proj.cardinality(), expected);
    }

    #[test]
    fn monomial_rectangle_roundtrip(seed in 0u64..500) {
        let g = BlockGraph::empty(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sides = Vec::new();
        for b in 0..3usize {
            let mut side: Vec<u32> = g.block_vertices(b).filter(|_| rng.gen_bool(0.7)).collect();
            if side.is_empty() {
                side.push(g.block_vertices(b).next().unwrap());
            }
            sides.push(side);
        }
        let q = Rectangle::new(&g, vec![0, 1, 2], sides).unwrap();
        let m = sa_lab_core::formula::monomial_of_rectangle(&q, &g).unwrap();
        let q2 = sa_lab_core::formula::ruled_out_rectangle(&m, &g).unwrap();
        prop_assert_eq!(q, q2);
    }

    #[test]
    fn unary_normalization_divides_mass_by_target(m in 1i64..6) {
        let sys = sa_lab_core::formula::PolynomialSystem::free(
            m as usize,
            vec![("one".into(), poly_from(vec![(Monomial::one(), rat_int(1))]))],
        );
        let mut terms = Vec::new();
        for b in 0..m as u32 {
            terms.push((Monomial::var(b), rat_int(1)));
            terms.push((Monomial::nvar(b), rat_int(1)));
        }
        let pi = proof::Refutation::new(vec![poly_from(terms)], Default::default(), m).unwrap();
        prop_assert!(proof::verify_canonical(&sys, &pi).unwrap());
        let out = proof::normalize_unary(&pi).unwrap();
        prop_assert!(proof::verify_canonical(&sys, &out).unwrap());
        let before = proof::size_report(&pi, &sys).unwrap().coefficient_size;
        let after = proof::size_report(&out, &sys).unwrap().coefficient_size;
        prop_assert_eq!(after * rat_int(m), before);
    }

    #[test]
    fn measure_value_is_bounded_by_small_bound(seed in 0u64..40) {
        let p = rat(1, 2);
        let g = BlockGraph::sample(3, 3, &p, seed).unwrap();
        let q = Rectangle::full(&g);
        let v = sa_lab_core::measure::mu_d_exact(
            &g, &q, 1, &p, sa_lab_core::measure::Strategy::Grouped,
        ).unwrap();
        let bound = sa_lab_core::measure::rect_small_bound(&q, 3, 3, 1, &p);
        prop_assert!(v.abs() <= bound);
    }
}
