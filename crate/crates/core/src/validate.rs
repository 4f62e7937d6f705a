//! Batch invariant suites and independent oracles.
//!
//! Everything here is deliberately brute force: exhaustive enumerations and
//! vertex enumeration that the fast paths are checked against, runnable from
//! the command line as well as from the test suite.

use crate::rational::Rat;
use crate::simplex::{LpProblem, Relation, Sense, VarBound};
use num_traits::{One, Signed, Zero};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn new(name: &str) -> Self {
        SuiteReport {
            name: name.to_string(),
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, label: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.pass &= pass;
        self.checks.push(CheckResult {
            label: label.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn print(&self) {
        for c in &self.checks {
            println!(
                "{}: {} [{}]{}",
                self.name,
                c.label,
                if c.pass { "pass" } else { "FAIL" },
                if c.detail.is_empty() {
                    String::new()
                } else {
                    format!(" {}", c.detail)
                }
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Exact linear algebra helpers and the vertex-enumeration LP oracle
// ---------------------------------------------------------------------------

/// Solves `a x = b` exactly by Gauss-Jordan. Returns `None` when singular.
pub fn solve_linear_system(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = b.len();
    for row in &a {
        debug_assert_eq!(row.len(), n);
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pv = a[col][col].clone();
        for x in &mut a[col] {
            *x = &*x / &pv;
        }
        b[col] = &b[col] / &pv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c2 in 0..n {
                let d = &f * &a[col][c2];
                a[r][c2] -= d;
            }
            let d = &f * &b[col];
            b[r] -= d;
        }
    }
    Some(b)
}

/// Brute-force optimum of a general-form LP by enumerating basic points:
/// every n-subset of constraint hyperplanes (rows as equalities plus, for
/// nonnegative variables, the planes `x_j = 0`) is solved exactly and checked
/// for feasibility. Valid for pointed bounded feasible regions — i.e. the
/// tiny instances used as oracles. Returns `None` when no feasible basic
/// point exists.
pub fn vertex_enumeration_optimum(lp: &LpProblem) -> Option<Rat> {
    let n = lp.num_vars;
    let mut planes: Vec<(Vec<Rat>, Rat)> = Vec::new();
    for row in &lp.rows {
        let mut dense = vec![Rat::zero(); n];
        for (v, c) in &row.coeffs {
            dense[*v] += c;
        }
        planes.push((dense, row.rhs.clone()));
    }
    for (j, bound) in lp.bounds.iter().enumerate() {
        if *bound == VarBound::NonNeg {
            let mut dense = vec![Rat::zero(); n];
            dense[j] = Rat::one();
            planes.push((dense, Rat::zero()));
        }
    }
    // Duplicate and antiparallel duplicate planes define the same hyperplane;
    // keep one representative to cut the subset enumeration down.
    planes.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    planes.dedup_by(|a, b| {
        a == b || (a.0.iter().zip(&b.0).all(|(x, y)| *x == -y.clone()) && a.1 == -b.1.clone())
    });
    let feasible = |x: &[Rat]| -> bool {
        for (row, b) in lp
            .rows
            .iter()
            .map(|r| (r, &r.rhs))
        {
            let lhs: Rat = row.coeffs.iter().map(|(v, c)| c * &x[*v]).sum();
            let ok = match row.rel {
                Relation::Eq => lhs == *b,
                Relation::Le => lhs <= *b,
                Relation::Ge => lhs >= *b,
            };
            if !ok {
                return false;
            }
        }
        lp.bounds
            .iter()
            .zip(x)
            .all(|(b, v)| *b == VarBound::Free || !v.is_negative())
    };
    let mut best: Option<Rat> = None;
    let mut consider = |x: &[Rat]| {
        if !feasible(x) {
            return;
        }
        let obj: Rat = lp.objective.iter().zip(x).map(|(c, v)| c * v).sum();
        best = Some(match best.take() {
            None => obj,
            Some(cur) => match lp.sense {
                Sense::Min => cur.min(obj),
                Sense::Max => cur.max(obj),
            },
        });
    };
    // All n-subsets of planes.
    let idx: Vec<usize> = (0..planes.len()).collect();
    let mut comb: Vec<usize> = (0..n).collect();
    if n == 0 {
        consider(&[]);
        return best;
    }
    if planes.len() < n {
        return None;
    }
    loop {
        let a: Vec<Vec<Rat>> = comb.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<Rat> = comb.iter().map(|&i| planes[i].1.clone()).collect();
        if let Some(x) = solve_linear_system(a, b) {
            consider(&x);
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if comb[i] + (n - i) < idx.len() + 0 {
                comb[i] += 1;
                for j2 in (i + 1)..n {
                    comb[j2] = comb[j2 - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Convenience: the dual-side LP rows `y . rhs` value of a solution.
pub fn dual_objective(lp: &LpProblem, dual: &[Rat]) -> Rat {
    dual.iter().zip(&lp.rows).map(|(y, r)| y * &r.rhs).sum()
}

// ---------------------------------------------------------------------------
// Core-map suite
// ---------------------------------------------------------------------------

use crate::formula::{build_clique_formula, Monomial};
use crate::graph::{BlockGraph, Rectangle};
use crate::lp;
use crate::measure::{self, Strategy};
use crate::patterns::{self, EnumMode, PatternGraph};
use crate::proof;
use crate::rational::{format_rat, rat, rat_int};

fn all_min_covers(h: &PatternGraph) -> Vec<u16> {
    let t = patterns::vc_number(h);
    let mut out = Vec::new();
    'outer: for mask in 0u16..(1 << h.k()) {
        if mask.count_ones() as usize != t {
            continue;
        }
        for (i, j) in h.edges_vec() {
            if mask >> i & 1 == 0 && mask >> j & 1 == 0 {
                continue 'outer;
            }
        }
        out.push(mask);
    }
    out
}

fn covers_graph(cover: u16, h: &PatternGraph) -> bool {
    h.edges_vec()
        .iter()
        .all(|&(i, j)| cover >> i & 1 == 1 || cover >> j & 1 == 1)
}

/// Exhaustive validation of the core machinery over all graphs on `k` labels:
/// the core property, support compression, cover preservation, agreement of
/// the two optional-edge constructions, the fiber law, boundary equivalence,
/// and the partition of the truncated families.
pub fn validate_cores(k: usize) -> Result<SuiteReport, patterns::PatternError> {
    let mut report = SuiteReport::new(&format!("cores k={k}"));
    let pairs = k * (k.max(1) - 1) / 2;
    let all: Vec<PatternGraph> = (0..(1u128 << pairs))
        .map(|mask| PatternGraph::from_mask(k, mask))
        .collect();

    let mut core_property = true;
    let mut support_bound = true;
    let mut vc_preserved = true;
    let mut idempotent = true;
    for h in &all {
        let info = patterns::core_of(h);
        let vch = patterns::vc_number(h);
        vc_preserved &= patterns::vc_number(&info.f) == vch;
        support_bound &= info.f.support_size() <= 3 * patterns::vc_number(&info.f);
        idempotent &= patterns::core_of(&info.f).f == info.f;
        for cover in all_min_covers(&info.f) {
            core_property &= covers_graph(cover, h);
        }
    }
    report.push("every minimum cover of the core covers the input", core_property, "");
    report.push("core support has at most 3 vc vertices", support_bound, "");
    report.push("core preserves the cover number", vc_preserved, "");
    report.push("core map is idempotent", idempotent, "");

    // Optional-edge constructions agree on every distinct core.
    let mut cores: Vec<PatternGraph> = all
        .iter()
        .map(|h| patterns::core_of(h).f)
        .collect();
    cores.sort_unstable();
    cores.dedup();
    let mut estar_agree = true;
    let mut fiber_law = true;
    for f in &cores {
        let explicit = patterns::estar_explicit(f)?;
        let implicit = patterns::estar_implicit(f, k)?;
        estar_agree &= explicit == implicit;
        // fiber law: core(H) = F  <=>  E(H) = E(F) + subset of E*.
        let estar_graph = PatternGraph::from_edges(k, &explicit)?;
        for h in &all {
            let in_fiber = patterns::core_of(h).f == *f;
            let decomposes = f.is_edge_subset_of(h) && h.minus(f).is_edge_subset_of(&estar_graph);
            fiber_law &= in_fiber == decomposes;
        }
    }
    report.push("explicit optional edges equal the fiber union", estar_agree, "");
    report.push("fiber law: core fibers are exactly optional-edge extensions", fiber_law, "");

    // Boundary equivalence for every (H, e, i).
    let mut boundary_equiv = true;
    for h in &all {
        let f = patterns::core_of(h).f;
        for a in 0..k as u8 {
            for b in (a + 1)..k as u8 {
                for i in 0..=k {
                    boundary_equiv &= patterns::in_boundary(h, (a, b), i)
                        == patterns::in_boundary(&f, (a, b), i);
                }
            }
        }
    }
    report.push("boundary membership passes to the core and back", boundary_equiv, "");

    // The optional-edge families partition each truncated family.
    let mut partition = true;
    for d in 0..=k {
        let fam = patterns::enumerate_patterns(k, d, EnumMode::AllWithVcAtMost)?;
        let cores_d = patterns::enumerate_patterns(k, d, EnumMode::CoresOnly)?;
        let mut covered = std::collections::HashSet::new();
        for f in &cores_d {
            let estar = patterns::estar_explicit(f)?;
            for sel in 0u64..(1 << estar.len()) {
                let mut h = *f;
                for (bit, &(x, y)) in estar.iter().enumerate() {
                    if sel >> bit & 1 == 1 {
                        h.add_edge(x as usize, y as usize);
                    }
                }
                partition &= covered.insert(h.edge_mask()); // disjointness
            }
        }
        partition &= fam.iter().all(|h| covered.contains(&h.edge_mask())); // completeness
        partition &= covered.len() == fam.len();
    }
    report.push("optional-edge families partition the truncated family", partition, "");
    Ok(report)
}

/// Counting audits: family sizes, the counting bound, maximal matchings
/// against half the cover number, and star-removal cover arithmetic.
pub fn validate_counting(k: usize) -> Result<SuiteReport, patterns::PatternError> {
    let mut report = SuiteReport::new(&format!("counting k={k}"));
    if k == 3 {
        let fam = patterns::enumerate_patterns(3, 1, EnumMode::AllWithVcAtMost)?;
        report.push("family with cover <= 1 on 3 labels has 7 members", fam.len() == 7, format!("got {}", fam.len()));
    }
    let rows = patterns::counting_audit(k)?;
    let all_pass = rows.iter().all(|r| r.pass);
    report.push("counting bound holds for every (b, c)", all_pass, "");

    let pairs = k * (k.max(1) - 1) / 2;
    let mut matching_ok = true;
    let mut star_ok = true;
    for mask in 0u128..(1 << pairs) {
        let h = PatternGraph::from_mask(k, mask);
        let m = patterns::maximal_matching(&h);
        matching_ok &= 2 * m.len() >= patterns::vc_number(&h);
        // star-removal: if all pairs touching the prefix are present, removing
        // them drops the cover number by exactly the prefix size.
        for i in 1..k {
            let stars = measure::leading_stars(k, i);
            if stars.is_edge_subset_of(&h) {
                star_ok &= patterns::vc_number(&h.minus(&stars))
                    == patterns::vc_number(&h) - i;
            }
        }
    }
    report.push("maximal matchings reach half the cover number", matching_ok, "");
    report.push("star removal drops the cover number exactly", star_ok, "");
    Ok(report)
}

// ---------------------------------------------------------------------------
// LP duality loop
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DualityOutcome {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub optimum: String,
    pub elapsed_ms: u128,
    pub pass: bool,
    pub detail: String,
}

/// Full verifier/duality loop on one sampled cliqueless instance: equal exact
/// optima on both sides, extracted certificate accepted by both verifiers,
/// extracted measure passing at the certified level. Returns `None` when the
/// sample contains a transversal clique.
pub fn duality_loop_instance(
    n: usize,
    k: usize,
    p: &Rat,
    seed: u64,
) -> Result<Option<DualityOutcome>, String> {
    let start = std::time::Instant::now();
    let g = BlockGraph::sample(n, k, p, seed).map_err(|e| e.to_string())?;
    if g.has_transversal_clique() {
        return Ok(None);
    }
    let sys = build_clique_formula(&g);
    let idx = lp::MonomialIndex::new(sys.num_vars, None).map_err(|e| e.to_string())?;
    let primal = lp::build_primal(&sys, &idx).map_err(|e| e.to_string())?;
    let psol = lp::solve(&primal).map_err(|e| e.to_string())?;
    let dual = lp::build_dual(&sys, &idx).map_err(|e| e.to_string())?;
    let dsol = lp::solve(&dual).map_err(|e| e.to_string())?;

    let mut failures: Vec<&str> = Vec::new();
    if psol.status != crate::simplex::LpStatus::Optimal {
        failures.push("primal not optimal");
    }
    if dsol.status != crate::simplex::LpStatus::Optimal {
        failures.push("dual not optimal");
    }
    let optimum = match (&psol.objective, &dsol.objective) {
        (Some(a), Some(b)) => {
            if a != b {
                failures.push("primal and dual optima differ");
            }
            a.clone()
        }
        _ => Rat::zero(),
    };
    if failures.is_empty() {
        let (refutation, mu) =
            lp::extract_solutions(&sys, &idx, &primal, &psol).map_err(|e| e.to_string())?;
        if !proof::verify_truth_table(&sys, &refutation).map_err(|e| e.to_string())? {
            failures.push("truth-table verifier rejected");
        }
        if !proof::verify_canonical(&sys, &refutation).map_err(|e| e.to_string())? {
            failures.push("canonical verifier rejected");
        }
        let sizes = proof::size_report(&refutation, &sys).map_err(|e| e.to_string())?;
        if sizes.lp_objective != optimum {
            failures.push("extracted certificate mass differs from the optimum");
        }
        let pm = lp::check_pseudo_measure(&mu, &sys, &mu.delta, &idx);
        if !pm.pass {
            failures.push("pseudo-measure check failed");
        }
        if mu.delta != optimum.recip() {
            failures.push("delta is not 1/optimum");
        }
    }
    Ok(Some(DualityOutcome {
        n,
        k,
        seed,
        optimum: format_rat(&optimum),
        elapsed_ms: start.elapsed().as_millis(),
        pass: failures.is_empty(),
        detail: failures.join("; "),
    }))
}

/// Small-shape rotation used by the duality sweeps. Shapes with two blocks
/// use small p: with k = 2 a transversal clique is any single cross edge, so
/// only sparse samples survive the cliqueless filter.
pub fn sweep_shapes() -> Vec<(usize, usize, Rat)> {
    vec![
        (1, 2, rat(1, 2)),
        (1, 3, rat(1, 2)),
        (2, 2, rat(1, 4)),
        (1, 4, rat(1, 3)),
        (1, 5, rat(1, 4)),
        (2, 2, rat(1, 3)),
        (1, 5, rat(1, 3)),
        (1, 4, rat(1, 2)),
    ]
}

/// Mixed-shape duality sweep producing at least `want` cliqueless instances.
pub fn duality_sweep(want: usize, base_seed: u64) -> Result<Vec<DualityOutcome>, String> {
    duality_sweep_over(&sweep_shapes(), want, base_seed)
}

pub fn duality_sweep_over(
    shapes: &[(usize, usize, Rat)],
    want: usize,
    base_seed: u64,
) -> Result<Vec<DualityOutcome>, String> {
    let mut out = Vec::new();
    let mut seed = base_seed;
    let mut shape_idx = 0usize;
    let mut attempts = 0u64;
    while out.len() < want {
        attempts += 1;
        if attempts > 200 * want as u64 {
            return Err("cliqueless samples are too rare for these shapes".into());
        }
        let (n, k, ref p) = shapes[shape_idx % shapes.len()];
        shape_idx += 1;
        seed = seed.wrapping_add(1);
        if let Some(outcome) = duality_loop_instance(n, k, p, seed)? {
            out.push(outcome);
        }
    }
    Ok(out)
}

/// Verifier agreement over randomized valid and corrupted certificates.
pub fn validate_proofs(trials: usize, seed: u64) -> Result<SuiteReport, String> {
    use rand::{Rng, SeedableRng};
    let mut report = SuiteReport::new("proofs");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut agree = true;
    let mut valid_accepted = true;
    // Base certificates from two small instances.
    let bases: Vec<(crate::formula::PolynomialSystem, proof::Refutation)> = vec![
        {
            let g = BlockGraph::empty(1, 2);
            let sys = build_clique_formula(&g);
            (sys, proof::hand_certificate_k2n1())
        },
        {
            let g = BlockGraph::sample(1, 3, &rat(1, 2), seed).map_err(|e| e.to_string())?;
            let sys = build_clique_formula(&g);
            let idx = lp::MonomialIndex::new(3, None).map_err(|e| e.to_string())?;
            match lp::build_primal(&sys, &idx)
                .ok()
                .map(|pr| lp::solve(&pr).map(|s| (pr, s)))
            {
                Some(Ok((pr, sol))) if sol.status == crate::simplex::LpStatus::Optimal => {
                    let (r, _) = lp::extract_solutions(&sys, &idx, &pr, &sol)
                        .map_err(|e| e.to_string())?;
                    (sys, r)
                }
                _ => {
                    let g = BlockGraph::empty(1, 2);
                    let sys = build_clique_formula(&g);
                    (sys, proof::hand_certificate_k2n1())
                }
            }
        },
    ];
    for trial in 0..trials {
        let (sys, base) = &bases[trial % bases.len()];
        let mut pi = base.clone();
        // Null moves preserve validity.
        for _ in 0..rng.gen_range(0..4usize) {
            let j = rng.gen_range(0..sys.axioms.len());
            let l = rng.gen_range(0..sys.axioms.len());
            if j == l {
                continue;
            }
            let v = rng.gen_range(0..sys.num_vars as u32);
            let s = if rng.gen_bool(0.5) {
                Monomial::var(v)
            } else {
                Monomial::one()
            };
            let c = rat(rng.gen_range(1..=2), 1);
            let mut add = |idx: usize, src: usize, sign: Rat| {
                let mut terms: Vec<(Monomial, Rat)> =
                    pi.multipliers[idx].clone().into_iter().collect();
                for (m, gamma) in &sys.axioms[src].poly {
                    if let Some(prod) = m.mul(&s) {
                        terms.push((prod, gamma * &sign));
                    }
                }
                pi.multipliers[idx] = crate::formula::poly_from(terms);
            };
            add(j, l, c.clone());
            add(l, j, -c);
        }
        let corrupt = trial % 2 == 1;
        if corrupt {
            let j = rng.gen_range(0..pi.multipliers.len());
            let mut terms: Vec<(Monomial, Rat)> = pi.multipliers[j].clone().into_iter().collect();
            terms.push((
                Monomial::var(rng.gen_range(0..sys.num_vars as u32)),
                rat_int(rng.gen_range(1..=2)),
            ));
            pi.multipliers[j] = crate::formula::poly_from(terms);
        }
        let a = proof::verify_truth_table(sys, &pi).map_err(|e| e.to_string())?;
        let b = proof::verify_canonical(sys, &pi).map_err(|e| e.to_string())?;
        agree &= a == b;
        if !corrupt {
            valid_accepted &= a;
        }
    }
    report.push("verifiers agree on every certificate", agree, format!("{trials} trials"));
    report.push("null moves preserve acceptance", valid_accepted, "");
    Ok(report)
}

/// Soundness over every graph of a small shape: the certificate LP is
/// feasible exactly when the graph has no transversal clique.
pub fn validate_soundness(n: usize, k: usize) -> Result<SuiteReport, String> {
    let mut report = SuiteReport::new(&format!("soundness n={n} k={k}"));
    let kn = n * k;
    let cross: Vec<(u32, u32)> = (0..kn as u32)
        .flat_map(|u| ((u + 1)..kn as u32).map(move |v| (u, v)))
        .filter(|&(u, v)| (u as usize / n) != (v as usize / n))
        .collect();
    let mut ok = true;
    for mask in 0u64..(1 << cross.len()) {
        // Build the graph through its json form to reuse validation.
        let edges: Vec<(u32, u32)> = cross
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let file = serde_json::json!({ "k": k, "n": n, "edges": edges });
        let g = BlockGraph::from_json(&file.to_string()).map_err(|e| e.to_string())?;
        let sys = build_clique_formula(&g);
        let idx = lp::MonomialIndex::new(kn, None).map_err(|e| e.to_string())?;
        let primal = lp::build_primal(&sys, &idx).map_err(|e| e.to_string())?;
        let sol = lp::solve(&primal).map_err(|e| e.to_string())?;
        let feasible = sol.status == crate::simplex::LpStatus::Optimal;
        ok &= feasible != g.has_transversal_clique();
    }
    report.push(
        "certificates exist exactly for cliqueless graphs",
        ok,
        format!("{} graphs", 1u64 << cross.len()),
    );
    Ok(report)
}

/// Strategy agreement for character sums and the measure on random instances.
pub fn validate_measure(instances: usize, seed: u64) -> Result<SuiteReport, String> {
    use rand::{Rng, SeedableRng};
    let mut report = SuiteReport::new("measure");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut char_agree = true;
    let mut grouped_agree = true;
    let mut mu_agree = true;
    let mut bound_holds = true;
    for trial in 0..instances {
        let k = rng.gen_range(2..=5usize);
        let n = rng.gen_range(2..=6usize);
        let p = rat(rng.gen_range(1..=2), rng.gen_range(2..=4));
        let g = BlockGraph::sample(n, k, &p, seed.wrapping_add(trial as u64))
            .map_err(|e| e.to_string())?;
        let q = if trial % 2 == 0 {
            Rectangle::full(&g)
        } else {
            let mut sides = Vec::new();
            for b in 0..k {
                let mut side: Vec<u32> =
                    g.block_vertices(b).filter(|_| rng.gen_bool(0.6)).collect();
                if side.is_empty() {
                    side.push(g.block_vertices(b).next().unwrap());
                }
                sides.push(side);
            }
            Rectangle::new(&g, (0..k).collect(), sides).map_err(|e| e.to_string())?
        };
        let pairs = (k * (k - 1) / 2) as u32;
        let h = PatternGraph::from_mask(k, rng.gen_range(0..(1u128 << pairs)));
        let naive =
            measure::char_sum(&g, &q, &h, &measure::RatMode::new(p.clone()).unwrap(), Strategy::Naive)
                .map_err(|e| e.to_string())?;
        let fact = measure::char_sum(
            &g,
            &q,
            &h,
            &measure::RatMode::new(p.clone()).unwrap(),
            Strategy::Factorized,
        )
        .map_err(|e| e.to_string())?;
        char_agree &= naive == fact;
        let info = patterns::core_of(&h);
        if info.f == h {
            let grouped = measure::family_char_sum(
                &g,
                &q,
                &info.f,
                &info.estar,
                &measure::RatMode::new(p.clone()).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            let mut fiber = Rat::zero();
            for sel in 0u64..(1 << info.estar.len()) {
                let mut hh = info.f;
                for (bit, &(x, y)) in info.estar.iter().enumerate() {
                    if sel >> bit & 1 == 1 {
                        hh.add_edge(x as usize, y as usize);
                    }
                }
                fiber += measure::char_sum(
                    &g,
                    &q,
                    &hh,
                    &measure::RatMode::new(p.clone()).unwrap(),
                    Strategy::Naive,
                )
                .map_err(|e| e.to_string())?;
            }
            grouped_agree &= grouped == fiber;
        }
        let d = rng.gen_range(0..=2usize);
        let a = measure::mu_d_exact(&g, &q, d, &p, Strategy::Naive).map_err(|e| e.to_string())?;
        let b =
            measure::mu_d_exact(&g, &q, d, &p, Strategy::Factorized).map_err(|e| e.to_string())?;
        let c = measure::mu_d_exact(&g, &q, d, &p, Strategy::Grouped).map_err(|e| e.to_string())?;
        mu_agree &= a == b && a == c;
        bound_holds &= a.abs() <= measure::rect_small_bound(&q, n, k, d, &p);
    }
    report.push("naive and factorized character sums agree", char_agree, format!("{instances} instances"));
    report.push("grouped sums equal their fiber totals", grouped_agree, "");
    report.push("measure strategies agree exactly", mu_agree, "");
    report.push("coarse magnitude bound holds", bound_holds, "");
    Ok(report)
}

/// Micro duality sweep used by the command-line validation.
pub fn validate_lp(instances: usize, seed: u64) -> Result<SuiteReport, String> {
    let mut report = SuiteReport::new("lp");
    let outcomes = duality_sweep(instances, seed)?;
    let all = outcomes.iter().all(|o| o.pass);
    report.push(
        "primal/dual optima agree and witnesses verify",
        all,
        format!("{} instances", outcomes.len()),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};
    use crate::simplex::LpRow;

    #[test]
    fn linear_system_solver_works() {
        // 2x + y = 5, x - y = 1 -> x = 2, y = 1
        let a = vec![
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(1), rat_int(-1)],
        ];
        let b = vec![rat_int(5), rat_int(1)];
        assert_eq!(solve_linear_system(a, b).unwrap(), vec![rat_int(2), rat_int(1)]);
        // singular
        let a = vec![vec![rat_int(1), rat_int(1)], vec![rat_int(2), rat_int(2)]];
        assert!(solve_linear_system(a, vec![rat_int(1), rat_int(2)]).is_none());
    }

    #[test]
    fn vertex_oracle_on_a_known_lp() {
        // min x + y s.t. x + 2y >= 2, x,y >= 0 -> optimum 1 at (0,1)
        let lp = LpProblem {
            sense: Sense::Min,
            num_vars: 2,
            objective: vec![rat_int(1), rat_int(1)],
            bounds: vec![VarBound::NonNeg; 2],
            rows: vec![LpRow {
                coeffs: vec![(0, rat_int(1)), (1, rat_int(2))],
                rel: Relation::Ge,
                rhs: rat_int(2),
            }],
        };
        assert_eq!(vertex_enumeration_optimum(&lp), Some(rat(1, 1)));
    }
}
