//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test -p sa-lab-core --test acceptance -- --nocapture`.

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sa_lab_core::formula::{build_clique_formula, ruled_out_rectangle, Monomial};
use sa_lab_core::graph::{BlockGraph, Rectangle};
use sa_lab_core::lp;
use sa_lab_core::measure::{self, Strategy};
use sa_lab_core::patterns::{self, PatternGraph};
use sa_lab_core::proof;
use sa_lab_core::rational::{rat, rat_int, rat_to_f64, Rat};
use sa_lab_core::validate;
use sa_lab_core::wellbehaved::{self, DecomposeSpec, GoodRectSpec, PartLabel, TailProbe, XiSpec};
use std::time::{Duration, Instant};

struct Criterion {
    number: u32,
    title: &'static str,
    start: Instant,
}

impl Criterion {
    fn begin(number: u32, title: &'static str) -> Self {
        Criterion {
            number,
            title,
            start: Instant::now(),
        }
    }

    fn finish(self, pass: bool) {
        println!(
            "criterion {:>2} ({}): {} [{:.1?}]",
            self.number,
            self.title,
            if pass { "PASS" } else { "FAIL" },
            self.start.elapsed()
        );
        assert!(pass, "criterion {} ({}) failed", self.number, self.title);
    }
}

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn criterion_01_verifier_duality_loop() {
    let c = Criterion::begin(1, "verifier duality loop on 50+ cliqueless instances");
    let mut outcomes = validate::duality_sweep(48, 20_000).expect("sweep runs");
    // A few six-variable instances on top of the small-shape rotation.
    let extra = validate::duality_sweep_over(
        &[(2, 3, rat(1, 3)), (1, 6, rat(1, 4))],
        4,
        77_000,
    )
    .expect("six-variable sweep runs");
    outcomes.extend(extra);
    assert!(outcomes.len() >= 50);
    let mut pass = true;
    for o in &outcomes {
        if !o.pass {
            eprintln!("instance n={} k={} seed={}: {}", o.n, o.k, o.seed, o.detail);
            pass = false;
        }
        if o.elapsed_ms > 60_000 {
            eprintln!(
                "instance n={} k={} seed={} took {} ms",
                o.n, o.k, o.seed, o.elapsed_ms
            );
            pass = false;
        }
    }
    c.finish(pass);
}

#[test]
fn criterion_02_k2n1_instance() {
    let c = Criterion::begin(2, "single-non-edge instance: optimum 3, bundled certificate");
    let g = BlockGraph::from_file(&fixture("k2n1_graph.json")).expect("bundled graph");
    let sys = build_clique_formula(&g);
    let sys_file =
        sa_lab_core::formula::PolynomialSystem::from_file(&fixture("k2n1_formula.json"))
            .expect("bundled formula");
    assert_eq!(sys.to_json(), sys_file.to_json(), "bundled formula matches");

    let idx = lp::MonomialIndex::new(2, None).unwrap();
    let primal = lp::build_primal(&sys, &idx).unwrap();
    let psol = lp::solve(&primal).unwrap();
    let mut pass = psol.objective.clone() == Some(rat_int(3));

    // Independent oracle: vertex enumeration over the dual polytope.
    let dual = lp::build_dual(&sys, &idx).unwrap();
    let oracle = validate::vertex_enumeration_optimum(&dual.lp);
    pass &= oracle == Some(rat_int(3));

    // Bundled hand certificate: sizes and acceptance.
    let pi = proof::Refutation::from_file(&fixture("k2n1_certificate.json"), sys.axioms.len())
        .expect("bundled certificate");
    assert_eq!(pi, proof::hand_certificate_k2n1());
    let sizes = proof::size_report(&pi, &sys).unwrap();
    pass &= sizes.coefficient_size == rat_int(5);
    pass &= sizes.lp_objective == rat_int(3);
    pass &= proof::verify_truth_table(&sys, &pi).unwrap();
    pass &= proof::verify_canonical(&sys, &pi).unwrap();

    // Twenty single-coefficient perturbations, all rejected by both
    // verifiers. Each direction changes the derived function: the existing
    // multiplier monomials never annihilate their axioms, and the two fresh
    // insertions are chosen off the Boolean ideal.
    let deltas = [
        rat_int(1),
        rat_int(-1),
        rat_int(2),
        rat(1, 2),
        rat(-1, 2),
        rat_int(3),
    ];
    let mut perturbations: Vec<proof::Refutation> = Vec::new();
    for slot in 0..3usize {
        for delta in &deltas {
            let mut tweaked = pi.clone();
            let poly = &mut tweaked.multipliers[slot];
            let (m, _) = poly.clone().into_iter().next().expect("one term each");
            *poly.get_mut(&m).unwrap() += delta;
            poly.retain(|_, c| !c.is_zero());
            perturbations.push(tweaked);
        }
    }
    let mut insert_a = pi.clone();
    insert_a.multipliers[0].insert(Monomial::var(1), rat_int(1));
    perturbations.push(insert_a);
    let mut insert_b = pi.clone();
    insert_b.multipliers[1].insert(Monomial::nvar(1), rat_int(-1));
    perturbations.push(insert_b);
    assert_eq!(perturbations.len(), 20);
    for (i, tweaked) in perturbations.iter().enumerate() {
        let tt = proof::verify_truth_table(&sys, tweaked).unwrap();
        let cn = proof::verify_canonical(&sys, tweaked).unwrap();
        if tt || cn {
            eprintln!("perturbation {i} was not rejected (tt={tt}, canonical={cn})");
            pass = false;
        }
    }
    c.finish(pass);
}

#[test]
fn criterion_03_core_machinery_exhaustive() {
    let c = Criterion::begin(3, "core machinery exhaustive through five labels");
    let start = Instant::now();
    let mut pass = true;
    for k in 1..=5 {
        let report = patterns_suite(k);
        if !report.pass {
            report.print();
            pass = false;
        }
    }
    pass &= start.elapsed() <= Duration::from_secs(300);
    c.finish(pass);
}

fn patterns_suite(k: usize) -> sa_lab_core::validate::SuiteReport {
    validate::validate_cores(k).expect("core suite runs")
}

#[test]
fn criterion_04_counting_audits() {
    let c = Criterion::begin(4, "counting audits, matchings, star removal");
    let mut pass = true;
    for k in 1..=5 {
        let report = validate::validate_counting(k).expect("counting suite runs");
        if !report.pass {
            report.print();
            pass = false;
        }
    }
    // frozen: the vc<=1 family on three labels has exactly 7 members
    let fam = patterns::patterns_vc_at_most(3, 1).unwrap();
    pass &= fam.len() == 7;
    c.finish(pass);
}

#[test]
fn criterion_05_evaluator_equivalence() {
    let c = Criterion::begin(5, "naive = factorized = grouped on 200 instances");
    let report = validate::validate_measure(200, 51_000).expect("measure suite runs");
    if !report.pass {
        report.print();
    }
    c.finish(report.pass);
}

/// Builds a rectangle whose first `ell` blocks are adjacent singletons whose
/// joint neighborhood fills the other sides.
fn good_prefix_instance(
    n: usize,
    k: usize,
    ell: usize,
    p: &Rat,
    seed: u64,
) -> Option<(BlockGraph, Rectangle)> {
    let g = BlockGraph::sample(n, k, p, seed).ok()?;
    let mut prefix: Vec<u32> = Vec::new();
    'outer: for i in 0..ell {
        for v in g.block_vertices(i) {
            if prefix.iter().all(|&u| g.adjacent(u, v)) {
                prefix.push(v);
                continue 'outer;
            }
        }
        return None;
    }
    let mut sides = Vec::new();
    for b in 0..k {
        if b < ell {
            sides.push(vec![prefix[b]]);
        } else {
            let side: Vec<u32> = g
                .block_vertices(b)
                .filter(|&u| prefix.iter().all(|&v| g.adjacent(u, v)))
                .collect();
            if side.is_empty() {
                return None;
            }
            sides.push(side);
        }
    }
    Rectangle::new(&g, (0..k).collect(), sides).ok().map(|q| (g, q))
}

#[test]
fn criterion_06_split_identity() {
    let c = Criterion::begin(6, "main/boundary split identity on 50 good instances");
    let mut pass = true;
    let mut found = 0;
    let mut seed = 0u64;
    while found < 50 && seed < 2_000 {
        seed += 1;
        let p = if seed % 3 == 0 { rat(1, 3) } else { rat(1, 2) };
        let (k, ell, d) = match seed % 4 {
            0 => (3, 1, 1),
            1 => (4, 1, 2),
            2 => (4, 2, 2),
            _ => (5, 2, 2),
        };
        let Some((g, q)) = good_prefix_instance(4, k, ell, &p, seed) else {
            continue;
        };
        found += 1;
        let report = measure::split_main_boundary(&g, &q, ell, d, &p).unwrap();
        // Exact identity against the plain truncated sum.
        let full = measure::mu_d_exact(&g, &q, d, &p, Strategy::Factorized).unwrap();
        let nk = rat_int((g.n() as i64).pow(g.k() as u32));
        if &report.total / nk != full {
            eprintln!("split identity failed at seed {seed}");
            pass = false;
        }
        // Boundary families vanish once the peeled star outgrows the cover
        // budget (0-based target >= d + 2).
        for t in &report.boundary {
            if t.target >= d + 2 && !(t.empty && t.value.is_zero()) {
                eprintln!("nonempty late boundary term at seed {seed}");
                pass = false;
            }
        }
    }
    pass &= found >= 50;
    c.finish(pass);
}

#[test]
fn criterion_07_statistical_smoke() {
    let c = Criterion::begin(7, "binary64 smoke: mean measure near 1, small axioms");
    let start = Instant::now();
    let (n, k, d, p) = (64usize, 4usize, 2usize, 0.5f64);
    let p_rat = rat(1, 2);
    let mut mu_ones = Vec::new();
    let mut graphs = Vec::new();
    for seed in 0..20u64 {
        let g = BlockGraph::sample(n, k, &p_rat, seed).unwrap();
        let q = Rectangle::full(&g);
        mu_ones.push(measure::mu_d_float(&g, &q, d, p, Strategy::Grouped).unwrap());
        graphs.push(g);
    }
    let mean = mu_ones.iter().sum::<f64>() / mu_ones.len() as f64;
    let mut pass = (0.9..=1.1).contains(&mean);
    if !pass {
        eprintln!("mean measure of the full space: {mean}");
    }

    // 100 sampled non-edge axiom rectangles across the seeds.
    let mut rng = ChaCha8Rng::seed_from_u64(7777);
    let mut small = 0u32;
    let mut total = 0u32;
    'outer: for (gi, g) in graphs.iter().enumerate() {
        let mu_one = mu_ones[gi];
        let mut tries = 0;
        while tries < 200 && total < (gi as u32 + 1) * 5 {
            tries += 1;
            let u = rng.gen_range(0..(n * k) as u32);
            let v = rng.gen_range(0..(n * k) as u32);
            if u == v || g.block_of(u) == g.block_of(v) || g.adjacent(u, v) {
                continue;
            }
            let m = Monomial::var(u).mul(&Monomial::var(v)).unwrap();
            let q = ruled_out_rectangle(&m, g).unwrap();
            let val = measure::mu_d_float(g, &q, d, p, Strategy::Grouped).unwrap();
            total += 1;
            if val.abs() <= 0.1 * mu_one {
                small += 1;
            }
            if total == 100 {
                break 'outer;
            }
        }
    }
    pass &= total == 100;
    if small < 90 {
        eprintln!("only {small}/{total} axiom rectangles had small measure");
        pass = false;
    }
    pass &= start.elapsed() <= Duration::from_secs(600);
    c.finish(pass);
}

#[test]
fn criterion_08_decomposition() {
    let c = Criterion::begin(8, "decomposition partitions with verified labels");
    let p = rat(1, 2);
    let (n, k, d, s) = (40usize, 3usize, 1usize, 8u64);
    let spec = DecomposeSpec {
        s,
        d,
        p: p.clone(),
        c_const: 324.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut pass = true;
    for trial in 0..50u64 {
        let g = BlockGraph::sample(n, k, &p, 10_000 + trial).unwrap();
        // Random rectangle with sides comfortably above the 2s threshold or
        // occasionally the full block.
        let mut sides = Vec::new();
        for b in 0..k {
            let all: Vec<u32> = g.block_vertices(b).collect();
            let side: Vec<u32> = if rng.gen_bool(0.4) {
                all
            } else {
                all.into_iter().filter(|_| rng.gen_bool(0.8)).collect()
            };
            sides.push(side);
        }
        let q = Rectangle::new(&g, (0..k).collect(), sides).unwrap();
        if q.is_empty() {
            continue;
        }
        let dec = match wellbehaved::decompose_rectangle(&g, &q, &spec) {
            Ok(dec) => dec,
            Err(e) => {
                eprintln!("trial {trial}: {e}");
                pass = false;
                continue;
            }
        };
        // Exact cardinality accounting.
        let total: num_bigint::BigUint = dec.parts.iter().map(|(r, _)| r.cardinality()).sum();
        pass &= total == q.cardinality();
        // Membership sampling: every sampled tuple is covered exactly once.
        for _ in 0..25 {
            let t: Vec<u32> = (0..k)
                .map(|b| {
                    let side = q.side(b).unwrap();
                    side[rng.gen_range(0..side.len())]
                })
                .collect();
            let covering = dec.parts.iter().filter(|(r, _)| r.contains(&t, &g)).count();
            pass &= covering == 1;
        }
        // Part count bound.
        let bound = 2 * k as u64 * n as u64 * (2 * s).pow(d as u32);
        pass &= (dec.parts.len() as u64) <= bound;
        // Labels re-verified.
        for (part, label) in &dec.parts {
            match label {
                PartLabel::Small => {
                    let card = Rat::from_integer(part.cardinality().into());
                    pass &= card <= wellbehaved::small_threshold(n, k, d, &p);
                }
                PartLabel::AxiomSub { u, v } => {
                    pass &= !g.adjacent(*u, *v) && g.block_of(*u) != g.block_of(*v);
                    pass &= part.side(g.block_of(*u)) == Some(&[*u][..]);
                    pass &= part.side(g.block_of(*v)) == Some(&[*v][..]);
                }
                PartLabel::Good { r_blocks } => {
                    let gspec = GoodRectSpec {
                        r_blocks: r_blocks.clone(),
                        s,
                        beta: rat(1, k as i64),
                        p: p.clone(),
                        d,
                    };
                    pass &= wellbehaved::is_good_rectangle(&g, part, &gspec).unwrap().good;
                }
            }
        }
        // Measure additivity over the parts, exactly.
        let whole = measure::mu_d_exact(&g, &q, d, &p, Strategy::Factorized).unwrap();
        let mut sum = Rat::zero();
        for (part, _) in &dec.parts {
            sum += measure::mu_d_exact(&g, part, d, &p, Strategy::Factorized).unwrap();
        }
        if sum != whole {
            eprintln!("trial {trial}: measure additivity failed");
            pass = false;
        }
    }
    c.finish(pass);
}

#[test]
fn criterion_09_small_bound_sweep() {
    let c = Criterion::begin(9, "coarse magnitude bound on every evaluated rectangle");
    // The exact evaluators also assert this bound internally (debug builds);
    // here is an explicit sweep over random rectangles, probabilities and
    // depths.
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut pass = true;
    for trial in 0..120u64 {
        let k = rng.gen_range(2..=4usize);
        let n = rng.gen_range(2..=5usize);
        let p = rat(rng.gen_range(1..=2), rng.gen_range(2..=4));
        let d = rng.gen_range(0..=2usize);
        let g = BlockGraph::sample(n, k, &p, 31_000 + trial).unwrap();
        let mut sides = Vec::new();
        for b in 0..k {
            let mut side: Vec<u32> = g.block_vertices(b).filter(|_| rng.gen_bool(0.7)).collect();
            if side.is_empty() {
                side.push(g.block_vertices(b).next().unwrap());
            }
            sides.push(side);
        }
        let q = Rectangle::new(&g, (0..k).collect(), sides).unwrap();
        let v = measure::mu_d_exact(&g, &q, d, &p, Strategy::Factorized).unwrap();
        let bound = measure::rect_small_bound(&q, n, k, d, &p);
        if v.abs() > bound {
            eprintln!("trial {trial}: |mu| exceeds the bound");
            pass = false;
        }
    }
    c.finish(pass);
}

#[test]
fn criterion_10_tail_probe_monte_carlo() {
    let c = Criterion::begin(10, "moment tail bound, 10^4 trials, 8-point grid");
    let p = rat(1, 2);
    let g = BlockGraph::empty(20, 2);
    let q = Rectangle::full(&g);
    let f = PatternGraph::from_edges(2, &[(0, 1)]).unwrap();
    let probe = TailProbe {
        f,
        matching: vec![(0, 1)],
        kappa: 400,
        m: 2,
        r: 1.0,
        xi: XiSpec::Const(1.0),
    };
    let grid = [40.0, 60.0, 80.0, 100.0, 130.0, 170.0, 240.0, 400.0];
    let report = wellbehaved::tail_probe(20, 2, &q, &probe, &p, &grid, 10_000, 99).unwrap();
    for row in &report.rows {
        if !row.pass {
            eprintln!(
                "s = {}: empirical {} > bound {} + 3se {}",
                row.s, row.empirical, row.bound, row.stderr
            );
        }
    }
    c.finish(report.pass);
}

#[test]
fn criterion_11_grouped_performance() {
    let c = Criterion::begin(11, "grouped evaluation at production scale");
    let p = rat(1, 2);
    // Scaled-down agreement first: grouped equals naive exactly at n = 6.
    let g_small = BlockGraph::sample(6, 6, &p, 7).unwrap();
    let q_small = Rectangle::full(&g_small);
    let grouped_small =
        measure::mu_d_exact(&g_small, &q_small, 2, &p, Strategy::Grouped).unwrap();
    let naive_small = measure::mu_d_exact(&g_small, &q_small, 2, &p, Strategy::Naive).unwrap();
    let mut pass = grouped_small == naive_small;

    // Production scale under the one-minute budget.
    let g = BlockGraph::sample(300, 6, &p, 7).unwrap();
    let q = Rectangle::full(&g);
    let start = Instant::now();
    let value = measure::mu_d_exact(&g, &q, 2, &p, Strategy::Grouped).unwrap();
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(60);
    // sanity: the value is near 1 on a typical sample
    let v = rat_to_f64(&value);
    pass &= (0.5..=1.5).contains(&v);
    if !pass {
        eprintln!("grouped value {v} in {elapsed:?}");
    }
    c.finish(pass);
}
