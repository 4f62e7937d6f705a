//! Pseudorandomness checkers and constructions: bounded common neighborhoods,
//! greedy error sets, bounded character sums, good rectangles, the recursive
//! rectangle decomposition, randomized balanced partitions, and a Monte Carlo
//! tail probe for weighted character sums.

use crate::bitset::Bits;
use crate::graph::{BlockGraph, Rectangle};
use crate::guards;
use crate::measure::{self, family_char_sum, FloatMode, MeasureError, RatMode};
use crate::patterns::{self, PatternGraph};
use crate::rational::{rat_to_f64, Rat};
use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WbError {
    #[error("enumeration budget exceeded ({0} tuples; raise SA_LAB_GUARD to override)")]
    Guard(u128),
    #[error("vertex set must lie inside one block, found blocks {0} and {1}")]
    NotOneBlock(usize, usize),
    #[error("rectangle side for block {0} has size {1}, need 0 or >= {2}")]
    SideBelowThreshold(usize, usize, u64),
    #[error("decomposition recursion exceeded depth {0}")]
    RecursionGuard(usize),
    #[error("balanced partition hypotheses violated: {0}")]
    Hypothesis(String),
    #[error("balanced partition failed after {0} retries")]
    RetryLimit(u32),
    #[error("tail probe shape: {0}")]
    ProbeShape(String),
    #[error("graph: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("measure: {0}")]
    Measure(#[from] MeasureError),
    #[error("pattern: {0}")]
    Pattern(#[from] patterns::PatternError),
}

/// Parameter bundle for the four pseudorandomness properties.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellBehavedSpec {
    /// Neighborhood slack.
    #[serde(with = "crate::rational::serde_rat")]
    pub beta: Rat,
    /// Error-set size budget (and 2s block threshold).
    pub s: u64,
    /// Expected single-set error bound.
    pub w: u64,
    /// Character-sum exponent for the large-rectangle bound.
    pub lambda: f64,
    /// Block-size scale for the tight character bound.
    #[serde(rename = "Lambda")]
    pub big_lambda: u64,
    /// Error-set slack.
    #[serde(with = "crate::rational::serde_rat")]
    pub gamma: Rat,
    /// Error-set constant (default 324 = 3^3 * 12).
    #[serde(rename = "C", default = "default_c")]
    pub c_const: f64,
    /// Good-rectangle slack.
    pub epsilon: f64,
    /// Tight character-sum constant (default 60).
    #[serde(default = "default_tight")]
    pub tight_const: f64,
}

fn default_c() -> f64 {
    324.0
}

fn default_tight() -> f64 {
    60.0
}

/// `count / total ∈ (1 ± slack) * b`, exactly.
pub fn within_ratio(count: u64, total: u64, b: &Rat, slack: &Rat) -> bool {
    if total == 0 {
        return count == 0;
    }
    let ratio = Rat::new(count.into(), total.into());
    let lo = (Rat::one() - slack) * b;
    let hi = (Rat::one() + slack) * b;
    ratio >= lo && ratio <= hi
}

/// Relative deviation `|count - b * total| / (b * total)`, exactly.
fn relative_deviation(count: u64, total: u64, b: &Rat) -> Rat {
    let expect = b * Rat::from_integer(total.into());
    if expect.is_zero() {
        return if count == 0 { Rat::zero() } else { Rat::from_integer(count.into()) };
    }
    ((Rat::from_integer(count.into()) - &expect) / expect).abs()
}

/// Enumerates tuples over the given sides (one vertex per side, odometer
/// order). Sides must be nonempty.
fn for_each_tuple_over(sides: &[&[u32]], f: &mut dyn FnMut(&[u32])) {
    if sides.iter().any(|s| s.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; sides.len()];
    let mut cur: Vec<u32> = sides.iter().map(|s| s[0]).collect();
    loop {
        f(&cur);
        let mut pos = sides.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sides[pos].len() {
                cur[pos] = sides[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            cur[pos] = sides[pos][0];
        }
    }
}

/// Block subsets of `[k]` of size 1..=d, ascending.
fn block_subsets(k: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn go(k: usize, d: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == d {
            return;
        }
        for b in start..k {
            cur.push(b);
            go(k, d, b + 1, cur, out);
            cur.pop();
        }
    }
    go(k, d, 0, &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------------------
// Property 1: bounded common neighborhoods in every block
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct NeighborhoodReport {
    pub pass: bool,
    /// Worst relative deviation across all tuples and target blocks.
    #[serde(with = "crate::rational::serde_rat")]
    pub worst: Rat,
    pub worst_tuple: Vec<u32>,
    pub worst_target_block: usize,
    pub tuples_checked: u64,
}

/// Checks that every tuple over at most `d_cap` blocks has a common
/// neighborhood of size `(1 ± beta) p^{|t|} n` in every other block.
pub fn check_common_neighborhoods(
    g: &BlockGraph,
    beta: &Rat,
    p: &Rat,
    d_cap: usize,
) -> Result<NeighborhoodReport, WbError> {
    let k = g.k();
    let n = g.n() as u64;
    let mut work: u128 = 0;
    for bs in block_subsets(k, d_cap) {
        work = work.saturating_add((g.n() as u128).pow(bs.len() as u32) * (k as u128));
    }
    let budget = guards::limit(guards::NEIGHBORHOOD_TUPLES) as u128;
    if work > budget {
        return Err(WbError::Guard(work));
    }
    let mut worst = Rat::zero();
    let mut worst_tuple = Vec::new();
    let mut worst_target = 0usize;
    let mut checked = 0u64;
    let block_bits: Vec<Bits> = (0..k).map(|i| g.block_bits(i)).collect();
    for bs in block_subsets(k, d_cap) {
        let sides: Vec<Vec<u32>> = bs.iter().map(|&b| g.block_vertices(b).collect()).collect();
        let side_refs: Vec<&[u32]> = sides.iter().map(|s| s.as_slice()).collect();
        let expect = p.pow(bs.len() as i32);
        for_each_tuple_over(&side_refs, &mut |t| {
            for i in 0..k {
                if bs.contains(&i) {
                    continue;
                }
                let nb = g.common_neighborhood_of(t, &block_bits[i]);
                let dev = relative_deviation(nb.count_ones() as u64, n, &expect);
                checked += 1;
                if dev > worst {
                    worst = dev.clone();
                    worst_tuple = t.to_vec();
                    worst_target = i;
                }
            }
        });
    }
    Ok(NeighborhoodReport {
        pass: worst <= *beta,
        worst,
        worst_tuple,
        worst_target_block: worst_target,
        tuples_checked: checked,
    })
}

// ---------------------------------------------------------------------------
// Property 2: error sets
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ErrorSetReport {
    pub w_set: Vec<u32>,
    /// Packed violating tuples per tuple size.
    pub packed_per_size: Vec<u64>,
    /// The analytic size target `12 l ln n / (p^l gamma^2)`.
    pub w_bound: f64,
    /// Post-scan verification of the guarantee (part of the contract).
    pub post_scan_ok: bool,
}

/// Greedy error set of a one-block vertex set `S`: packs pairwise disjoint
/// violating tuples of each size up to `ell` in ascending order; every tuple
/// avoiding the result has a common neighborhood of expected size in `S`.
pub fn build_error_set(
    g: &BlockGraph,
    s_set: &[u32],
    ell: usize,
    gamma: &Rat,
    p: &Rat,
) -> Result<ErrorSetReport, WbError> {
    if s_set.is_empty() {
        return Ok(ErrorSetReport {
            w_set: vec![],
            packed_per_size: vec![0; ell],
            w_bound: 0.0,
            post_scan_ok: true,
        });
    }
    let home = g.block_of(s_set[0]);
    for &v in s_set {
        if g.block_of(v) != home {
            return Err(WbError::NotOneBlock(home, g.block_of(v)));
        }
    }
    let s_bits = Bits::from_indices(g.num_vertices(), s_set.iter().copied());
    let total = s_set.len() as u64;
    let candidates: Vec<u32> = (0..g.num_vertices() as u32)
        .filter(|&v| g.block_of(v) != home)
        .collect();
    let violates = |t: &[u32], expect: &Rat| -> bool {
        let nb = g.common_neighborhood_of(t, &s_bits);
        !within_ratio(nb.count_ones() as u64, total, expect, gamma)
    };
    let mut w_all: Vec<u32> = Vec::new();
    let mut packed_per_size = Vec::new();
    for a in 1..=ell {
        let expect = p.pow(a as i32);
        let mut w_a: Vec<u32> = Vec::new();
        let mut packed = 0u64;
        // ascending enumeration of a-subsets with distinct blocks
        let mut stack: Vec<u32> = Vec::new();
        fn rec(
            g: &BlockGraph,
            candidates: &[u32],
            start: usize,
            a: usize,
            stack: &mut Vec<u32>,
            w_a: &mut Vec<u32>,
            packed: &mut u64,
            violates: &dyn Fn(&[u32]) -> bool,
        ) {
            if stack.len() == a {
                if violates(stack) {
                    w_a.extend_from_slice(stack);
                    *packed += 1;
                }
                return;
            }
            for (i, &v) in candidates.iter().enumerate().skip(start) {
                if w_a.contains(&v) || stack.iter().any(|&u| g.block_of(u) == g.block_of(v)) {
                    continue;
                }
                stack.push(v);
                rec(g, candidates, i + 1, a, stack, w_a, packed, violates);
                stack.pop();
                // Once packed, skip tuples that now intersect w_a; handled by
                // the `w_a.contains` filter above on the next descent.
            }
        }
        rec(
            g,
            &candidates,
            0,
            a,
            &mut stack,
            &mut w_a,
            &mut packed,
            &|t| violates(t, &expect),
        );
        packed_per_size.push(packed);
        w_all.extend_from_slice(&w_a);
    }
    w_all.sort_unstable();
    w_all.dedup();
    // Post-scan: the guarantee is part of the contract, re-verified on every
    // call over tuples disjoint from the full union.
    let survivors: Vec<u32> = candidates
        .iter()
        .copied()
        .filter(|v| !w_all.contains(v))
        .collect();
    let mut post_ok = true;
    for a in 1..=ell {
        let expect = p.pow(a as i32);
        let mut stack = Vec::new();
        fn scan(
            g: &BlockGraph,
            survivors: &[u32],
            start: usize,
            a: usize,
            stack: &mut Vec<u32>,
            ok: &mut bool,
            violates: &dyn Fn(&[u32]) -> bool,
        ) {
            if !*ok {
                return;
            }
            if stack.len() == a {
                if violates(stack) {
                    *ok = false;
                }
                return;
            }
            for (i, &v) in survivors.iter().enumerate().skip(start) {
                if stack.iter().any(|&u| g.block_of(u) == g.block_of(v)) {
                    continue;
                }
                stack.push(v);
                scan(g, survivors, i + 1, a, stack, ok, violates);
                stack.pop();
            }
        }
        scan(g, &survivors, 0, a, &mut stack, &mut post_ok, &|t| {
            violates(t, &expect)
        });
    }
    let nf = g.n() as f64;
    let w_bound = 12.0 * ell as f64 * nf.ln() / (rat_to_f64(p).powi(ell as i32) * rat_to_f64(gamma).powi(2));
    Ok(ErrorSetReport {
        w_set: w_all,
        packed_per_size,
        w_bound,
        post_scan_ok: post_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub enum ErrorSetOutcome {
    Rejected { reason: String },
    Checked(ErrorSetCheck),
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorSetCheck {
    pub w_size: u64,
    pub s_budget: u64,
    pub within_budget: bool,
    /// Worst relative deviation of surviving tuples into surviving sides.
    #[serde(with = "crate::rational::serde_rat")]
    pub worst: Rat,
    pub pass: bool,
}

/// Error-set property over sampled rectangles: sides of size >= 2s (or 0)
/// get a union of per-block error sets, and surviving tuples must have
/// expected common neighborhoods into surviving sides at slack `beta`.
pub fn check_error_sets(
    g: &BlockGraph,
    s: u64,
    ell: usize,
    beta: &Rat,
    gamma: &Rat,
    p: &Rat,
    rects: &[Rectangle],
) -> Result<Vec<ErrorSetOutcome>, WbError> {
    let mut out = Vec::new();
    'rect: for q in rects {
        for (pos, &b) in q.blocks.iter().enumerate() {
            let len = q.sides[pos].len() as u64;
            if len != 0 && len < 2 * s {
                out.push(ErrorSetOutcome::Rejected {
                    reason: format!("block {b} has side size {len}, need 0 or >= {}", 2 * s),
                });
                continue 'rect;
            }
        }
        let mut w_all: Vec<u32> = Vec::new();
        for side in &q.sides {
            if side.is_empty() {
                continue;
            }
            let rep = build_error_set(g, side, ell, gamma, p)?;
            w_all.extend(rep.w_set);
        }
        w_all.sort_unstable();
        w_all.dedup();
        let survivor_sides: Vec<Vec<u32>> = q
            .sides
            .iter()
            .map(|s| s.iter().copied().filter(|v| w_all.binary_search(v).is_err()).collect())
            .collect();
        let survivor_bits: Vec<Bits> = survivor_sides
            .iter()
            .map(|s| Bits::from_indices(g.num_vertices(), s.iter().copied()))
            .collect();
        let mut worst = Rat::zero();
        let nonempty: Vec<usize> = (0..q.blocks.len())
            .filter(|&i| !survivor_sides[i].is_empty())
            .collect();
        for subset in block_subsets(nonempty.len(), ell) {
            let positions: Vec<usize> = subset.iter().map(|&i| nonempty[i]).collect();
            let sides: Vec<&[u32]> = positions.iter().map(|&i| survivor_sides[i].as_slice()).collect();
            let expect = p.pow(positions.len() as i32);
            for_each_tuple_over(&sides, &mut |t| {
                for &j in &nonempty {
                    if positions.contains(&j) {
                        continue;
                    }
                    let nb = g.common_neighborhood_of(t, &survivor_bits[j]);
                    let dev = relative_deviation(
                        nb.count_ones() as u64,
                        survivor_sides[j].len() as u64,
                        &expect,
                    );
                    if dev > worst {
                        worst = dev;
                    }
                }
            });
        }
        out.push(ErrorSetOutcome::Checked(ErrorSetCheck {
            w_size: w_all.len() as u64,
            s_budget: s,
            within_budget: (w_all.len() as u64) <= s,
            pass: worst <= *beta && (w_all.len() as u64) <= s,
            worst,
        }));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Properties 3 and 4: bounded character sums
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum CharBoundMode {
    /// Large-rectangle bound with exponent `lambda`.
    General { lambda: f64 },
    /// Localized bound over a block subset with size scale `Lambda`.
    Tight {
        big_lambda: u64,
        blocks: Vec<usize>,
        constant: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct CharBoundReport {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Vertex cover of the (restricted) pattern.
    pub vc: usize,
    pub edge_count: usize,
    /// True when the pattern is edgeless and the bound is vacuous.
    pub degenerate: bool,
}

/// Character-sum bound check for one core against one rectangle.
pub fn check_char_bounds(
    g: &BlockGraph,
    f: &PatternGraph,
    q: &Rectangle,
    p: &Rat,
    mode: &CharBoundMode,
) -> Result<CharBoundReport, WbError> {
    let info = patterns::core_of(f);
    if info.f != *f {
        return Err(patterns::PatternError::NotACore.into());
    }
    let n = g.n();
    let k = g.k();
    let pf = rat_to_f64(p);
    match mode {
        CharBoundMode::General { lambda } => {
            for v in 0..f.k() {
                if f.support() >> v & 1 == 1 {
                    let len = q.side(v).map_or(0, |s| s.len());
                    if 2 * len <= n {
                        return Err(WbError::SideBelowThreshold(v, len, (n as u64) / 2 + 1));
                    }
                }
            }
            let mode_r = RatMode::new(p.clone()).map_err(WbError::Measure)?;
            let value = rat_to_f64(&family_char_sum(g, q, f, &info.estar, &mode_r)?).abs();
            let vc = patterns::vc_number(f);
            let threshold = 6.0
                * pf.powi(-(f.edge_count() as i32))
                * (n as f64).powf(k as f64 - lambda * vc as f64 / 4.0);
            Ok(CharBoundReport {
                value,
                threshold,
                pass: value <= threshold,
                vc,
                edge_count: f.edge_count(),
                degenerate: f.is_empty(),
            })
        }
        CharBoundMode::Tight {
            big_lambda,
            blocks,
            constant,
        } => {
            let lam = *big_lambda;
            // (4 Lambda)-small everywhere, (Lambda, B)-large on B.
            for (pos, &b) in q.blocks.iter().enumerate() {
                let len = q.sides[pos].len() as u64;
                if len > 4 * lam {
                    return Err(WbError::ProbeShape(format!(
                        "block {b} has side size {len} > 4*Lambda"
                    )));
                }
            }
            for &b in blocks {
                let len = q.side(b).map_or(0, |s| s.len()) as u64;
                if len <= lam {
                    return Err(WbError::SideBelowThreshold(b, len as usize, lam + 1));
                }
            }
            let bmask: u16 = blocks.iter().fold(0, |m, &b| m | 1 << b);
            let fb = f.induced(bmask);
            let a_blocks: Vec<usize> = (0..f.k())
                .filter(|&v| f.support() >> v & 1 == 1 && bmask >> v & 1 == 1)
                .collect();
            // Neighborhood precondition from Q_A into every other B block.
            let three_over_k = Rat::new(3.into(), (k as i64).into());
            let a_sides: Vec<&[u32]> = a_blocks
                .iter()
                .map(|&b| q.side(b).expect("support checked"))
                .collect();
            for sel in block_subsets(a_blocks.len(), a_blocks.len().min(q.blocks.len())) {
                let sides: Vec<&[u32]> = sel.iter().map(|&i| a_sides[i]).collect();
                let expect = p.pow(sel.len() as i32);
                let mut ok = true;
                for &j in blocks {
                    if a_blocks.contains(&j) {
                        continue;
                    }
                    let side_j = q.side(j).expect("B block side");
                    let bits_j = Bits::from_indices(g.num_vertices(), side_j.iter().copied());
                    for_each_tuple_over(&sides, &mut |t| {
                        let nb = g.common_neighborhood_of(t, &bits_j);
                        if !within_ratio(
                            nb.count_ones() as u64,
                            side_j.len() as u64,
                            &expect,
                            &three_over_k,
                        ) {
                            ok = false;
                        }
                    });
                }
                if !ok {
                    return Err(WbError::ProbeShape(
                        "common neighborhoods from Q_A are not (3/k, p)-bounded".into(),
                    ));
                }
            }
            let estar_b: Vec<(u8, u8)> = info
                .estar
                .iter()
                .copied()
                .filter(|&(x, y)| bmask >> x & 1 == 1 && bmask >> y & 1 == 1)
                .collect();
            let qb = q.project(blocks)?;
            let mode_r = RatMode::new(p.clone()).map_err(WbError::Measure)?;
            let value = rat_to_f64(&family_char_sum(g, &qb, &fb, &estar_b, &mode_r)?).abs();
            let vcb = patterns::vc_number(&fb);
            let card: f64 = qb
                .sides
                .iter()
                .map(|s| s.len() as f64)
                .product();
            let m_over_kappa =
                10.0 * (lam as f64) * (k as f64) * (n as f64).log2() / ((lam as f64) * (lam as f64));
            let threshold = constant
                * pf.powi(-(fb.edge_count() as i32))
                * m_over_kappa.powf(vcb as f64 / 4.0)
                * card;
            Ok(CharBoundReport {
                value,
                threshold,
                pass: value <= threshold,
                vc: vcb,
                edge_count: fb.edge_count(),
                degenerate: fb.is_empty(),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Good rectangles
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoodRectSpec {
    /// Singleton blocks.
    pub r_blocks: Vec<usize>,
    pub s: u64,
    #[serde(with = "crate::rational::serde_rat")]
    pub beta: Rat,
    #[serde(with = "crate::rational::serde_rat")]
    pub p: Rat,
    pub d: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodRectReport {
    pub good: bool,
    pub violated_item: Option<u8>,
    pub detail: Option<String>,
}

/// Checks the three good-rectangle conditions, naming the first violation:
/// 1. singleton on `R`, size >= s elsewhere; 2. the singletons are adjacent
/// to everything; 3. small tuples outside `R` have expected neighborhoods.
pub fn is_good_rectangle(
    g: &BlockGraph,
    q: &Rectangle,
    spec: &GoodRectSpec,
) -> Result<GoodRectReport, WbError> {
    let fail = |item: u8, detail: String| GoodRectReport {
        good: false,
        violated_item: Some(item),
        detail: Some(detail),
    };
    // item 1
    for (pos, &b) in q.blocks.iter().enumerate() {
        let len = q.sides[pos].len() as u64;
        if spec.r_blocks.contains(&b) {
            if len != 1 {
                return Ok(fail(1, format!("block {b} has {len} vertices, want 1")));
            }
        } else if len < spec.s {
            return Ok(fail(1, format!("block {b} has {len} vertices, want >= {}", spec.s)));
        }
    }
    // item 2
    for &b in &spec.r_blocks {
        let v = q.side(b).and_then(|s| s.first().copied());
        let Some(v) = v else {
            return Ok(fail(1, format!("block {b} missing from the support")));
        };
        for (pos, &j) in q.blocks.iter().enumerate() {
            if j == b {
                continue;
            }
            for &u in &q.sides[pos] {
                if !g.adjacent(v, u) {
                    return Ok(fail(2, format!("singleton {v} misses {u} in block {j}")));
                }
            }
        }
    }
    // item 3
    let others: Vec<usize> = q
        .blocks
        .iter()
        .copied()
        .filter(|b| !spec.r_blocks.contains(b))
        .collect();
    let side_of = |b: usize| q.side(b).expect("declared support");
    for subset in block_subsets(others.len(), spec.d) {
        let bs: Vec<usize> = subset.iter().map(|&i| others[i]).collect();
        let sides: Vec<&[u32]> = bs.iter().map(|&b| side_of(b)).collect();
        let expect = spec.p.pow(bs.len() as i32);
        for &i in &others {
            if bs.contains(&i) {
                continue;
            }
            let side_i = side_of(i);
            let bits_i = Bits::from_indices(g.num_vertices(), side_i.iter().copied());
            let mut bad: Option<String> = None;
            for_each_tuple_over(&sides, &mut |t| {
                if bad.is_some() {
                    return;
                }
                let nb = g.common_neighborhood_of(t, &bits_i);
                if !within_ratio(nb.count_ones() as u64, side_i.len() as u64, &expect, &spec.beta) {
                    bad = Some(format!(
                        "tuple {t:?} has {} neighbors in block {i}, outside (1±beta) p^{} {}",
                        nb.count_ones(),
                        bs.len(),
                        side_i.len()
                    ));
                }
            });
            if let Some(detail) = bad {
                return Ok(fail(3, detail));
            }
        }
    }
    Ok(GoodRectReport {
        good: true,
        violated_item: None,
        detail: None,
    })
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecomposeSpec {
    pub s: u64,
    pub d: usize,
    #[serde(with = "crate::rational::serde_rat")]
    pub p: Rat,
    /// Regime constant for the warn-only parameter check.
    #[serde(default = "default_c")]
    pub c_const: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PartLabel {
    /// Cardinality at most `(n p^d)^(k-d)`.
    Small,
    /// Every tuple contains the named non-adjacent pair.
    AxiomSub { u: u32, v: u32 },
    /// Verified good rectangle with the given singleton block set.
    Good { r_blocks: Vec<usize> },
}

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub parts: Vec<(Rectangle, PartLabel)>,
    /// Warn-only regime check outcome.
    pub regime_ok: bool,
    pub regime_detail: String,
    /// Ratio of the largest small part to the threshold (reported, not
    /// asserted, since the small bound hides a constant).
    pub worst_small_ratio: f64,
    /// Case-3 remainders that failed verification and were split further.
    pub good_label_fallbacks: u64,
    pub max_depth: usize,
}

/// Small-part threshold `(n p^d)^(k-d)` with constant 1.
pub fn small_threshold(n: usize, k: usize, d: usize, p: &Rat) -> Rat {
    let np = Rat::from_integer((n as i64).into()) * p.pow(d as i32);
    np.pow((k - d.min(k)) as i32)
}

/// Partitions a rectangle into labeled parts: small, axiom subrectangle or
/// verified good. Every split that pins a new singleton descends one level;
/// the recursion is guarded at depth d+1.
pub fn decompose_rectangle(
    g: &BlockGraph,
    q: &Rectangle,
    spec: &DecomposeSpec,
) -> Result<Decomposition, WbError> {
    let k = g.k();
    let n = g.n();
    let p = &spec.p;
    let threshold = small_threshold(n, k, spec.d, p);
    let pf = rat_to_f64(p);
    let regime_need = spec.c_const
        * (k as f64).powi(4)
        * spec.d as f64
        * (n as f64).ln()
        / pf.powi(2 * spec.d as i32);
    let regime_ok = spec.s as f64 >= regime_need;
    let beta = Rat::new(1.into(), (k as i64).into());
    let gamma = Rat::new(1.into(), (3 * k as i64).into());

    let mut parts: Vec<(Rectangle, PartLabel)> = Vec::new();
    let mut worst_small_ratio = 0.0f64;
    let mut fallbacks = 0u64;
    let mut max_depth = 0usize;
    // Work stack: (rectangle, depth, force_split)
    let mut stack: Vec<(Rectangle, usize, bool)> = vec![(q.clone(), 0, false)];
    while let Some((mut cur, depth, force_split)) = stack.pop() {
        max_depth = max_depth.max(depth);
        if depth > spec.d + 1 {
            return Err(WbError::RecursionGuard(depth));
        }
        if cur.is_empty() {
            continue;
        }
        if !force_split {
            // Small?
            let card = Rat::from_integer(num_bigint::BigInt::from(cur.cardinality()));
            if card <= threshold {
                worst_small_ratio =
                    worst_small_ratio.max(rat_to_f64(&(card / &threshold)));
                parts.push((cur, PartLabel::Small));
                continue;
            }
            // Axiom subrectangle? Two non-adjacent singletons.
            let singles: Vec<(usize, u32)> = cur
                .blocks
                .iter()
                .zip(&cur.sides)
                .filter(|(_, s)| s.len() == 1)
                .map(|(&b, s)| (b, s[0]))
                .collect();
            let mut axiom = None;
            'pairs: for (ai, &(_, u)) in singles.iter().enumerate() {
                for &(_, v) in singles.iter().skip(ai + 1) {
                    if g.block_of(u) != g.block_of(v) && !g.adjacent(u, v) {
                        axiom = Some((u, v));
                        break 'pairs;
                    }
                }
            }
            if let Some((u, v)) = axiom {
                parts.push((cur, PartLabel::AxiomSub { u, v }));
                continue;
            }
            // Good? Only meaningful below d singletons.
            let r_blocks: Vec<usize> = singles.iter().map(|&(b, _)| b).collect();
            if r_blocks.len() < spec.d {
                let gspec = GoodRectSpec {
                    r_blocks: r_blocks.clone(),
                    s: spec.s,
                    beta: beta.clone(),
                    p: p.clone(),
                    d: spec.d,
                };
                if is_good_rectangle(g, &cur, &gspec)?.good {
                    parts.push((cur, PartLabel::Good { r_blocks }));
                    continue;
                }
            }
        }
        // Case 1: peel non-neighbors of a deficient singleton.
        let mut peeled = false;
        loop {
            let mut offender: Option<(usize, u32, u32)> = None; // (block pos of victim, singleton v, victim u)
            'scan: for (pos_i, side_i) in cur.sides.iter().enumerate() {
                if side_i.len() != 1 {
                    continue;
                }
                let v = side_i[0];
                for (pos_j, side_j) in cur.sides.iter().enumerate() {
                    if pos_i == pos_j {
                        continue;
                    }
                    for &u in side_j {
                        if !g.adjacent(v, u) {
                            offender = Some((pos_j, v, u));
                            break 'scan;
                        }
                    }
                }
            }
            let Some((pos_j, v, u)) = offender else {
                break;
            };
            peeled = true;
            // Split off {u} x rest: every tuple there contains the
            // non-adjacent pair (v, u).
            let mut piece = cur.clone();
            piece.sides[pos_j] = vec![u];
            parts.push((piece, PartLabel::AxiomSub { u: v.min(u), v: v.max(u) }));
            cur.sides[pos_j].retain(|&x| x != u);
            if cur.sides[pos_j].is_empty() {
                break;
            }
        }
        if cur.is_empty() {
            continue;
        }
        if peeled {
            stack.push((cur, depth, false));
            continue;
        }
        // Case 2: split a mid-sized block into singletons.
        if let Some(pos) = cur
            .sides
            .iter()
            .position(|s| s.len() > 1 && s.len() as u64 <= 2 * spec.s)
        {
            for &v in &cur.sides[pos] {
                let mut piece = cur.clone();
                piece.sides[pos] = vec![v];
                stack.push((piece, depth + 1, false));
            }
            continue;
        }
        // Case 3: remove error sets of the large blocks.
        let mut u_set: Vec<u32> = Vec::new();
        for side in cur.sides.iter().filter(|s| s.len() > 1) {
            let rep = build_error_set(g, side, spec.d, &gamma, p)?;
            u_set.extend(rep.w_set.into_iter().filter(|v| side.binary_search(v).is_ok()));
        }
        u_set.sort_unstable();
        u_set.dedup();
        let mut remainder = cur.clone();
        let mut emptied = false;
        for u in u_set {
            let Some(pos) = remainder
                .blocks
                .iter()
                .position(|&b| b == g.block_of(u))
            else {
                continue;
            };
            if remainder.sides[pos].binary_search(&u).is_err() {
                continue;
            }
            let mut piece = remainder.clone();
            piece.sides[pos] = vec![u];
            stack.push((piece, depth + 1, false));
            remainder.sides[pos].retain(|&x| x != u);
            if remainder.sides[pos].is_empty() {
                emptied = true;
                break;
            }
        }
        if emptied || remainder.is_empty() {
            continue;
        }
        let r_blocks: Vec<usize> = remainder
            .blocks
            .iter()
            .zip(&remainder.sides)
            .filter(|(_, s)| s.len() == 1)
            .map(|(&b, _)| b)
            .collect();
        let gspec = GoodRectSpec {
            r_blocks: r_blocks.clone(),
            s: spec.s,
            beta: beta.clone(),
            p: p.clone(),
            d: spec.d,
        };
        if r_blocks.len() < spec.d && is_good_rectangle(g, &remainder, &gspec)?.good {
            parts.push((remainder, PartLabel::Good { r_blocks }));
        } else {
            // Off-regime remainder: force a split of the smallest big block.
            fallbacks += 1;
            let pos = remainder
                .sides
                .iter()
                .enumerate()
                .filter(|(_, s)| s.len() > 1)
                .min_by_key(|(_, s)| s.len())
                .map(|(i, _)| i);
            match pos {
                Some(pos) => {
                    for &v in &remainder.sides[pos] {
                        let mut piece = remainder.clone();
                        piece.sides[pos] = vec![v];
                        stack.push((piece, depth + 1, false));
                    }
                }
                None => {
                    // All singletons yet neither small nor good: keep it as a
                    // small part and let the ratio report tell the story.
                    let card = Rat::from_integer(num_bigint::BigInt::from(cur.cardinality()));
                    worst_small_ratio =
                        worst_small_ratio.max(rat_to_f64(&(card / &threshold)));
                    parts.push((remainder, PartLabel::Small));
                }
            }
        }
    }
    // Exact partition accounting.
    let total: BigUint = parts.iter().map(|(r, _)| r.cardinality()).sum();
    debug_assert_eq!(total, q.cardinality(), "parts must partition the input");
    Ok(Decomposition {
        parts,
        regime_ok,
        regime_detail: format!("s = {} vs C k^4 d ln(n)/p^(2d) = {:.1}", spec.s, regime_need),
        worst_small_ratio,
        good_label_fallbacks: fallbacks,
        max_depth,
    })
}

// ---------------------------------------------------------------------------
// Balanced partition
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BalancedPartition {
    pub parts: Vec<Vec<u32>>,
    pub retries: u32,
}

/// Randomized balanced coloring: part sizes within [b/2, 3b/2] and every
/// family set split within `(1 ± gamma)/a`, retried until both hold.
pub fn balanced_partition(
    universe: &[u32],
    family: &[Vec<u32>],
    a: usize,
    gamma: &Rat,
    seed: u64,
) -> Result<BalancedPartition, WbError> {
    if a == 0 || universe.is_empty() {
        return Err(WbError::Hypothesis("need a >= 1 and a nonempty set".into()));
    }
    let b = universe.len() as f64 / a as f64;
    if b <= 12.0 * (4.0 * a as f64).ln() {
        return Err(WbError::Hypothesis(format!(
            "b = {b:.1} must exceed 12 ln(4a) = {:.1}",
            12.0 * (4.0 * a as f64).ln()
        )));
    }
    let gf = rat_to_f64(gamma);
    if !(0.0 < gf && gf < 1.0) {
        return Err(WbError::Hypothesis("gamma must lie in (0, 1)".into()));
    }
    if !family.is_empty() {
        let c = family.iter().map(|f| f.len()).min().unwrap_or(0) as f64;
        let fcount = family.len() as f64;
        let lower = (3.0 * a as f64 * (4.0 * a as f64 * fcount).ln() / c.max(1.0)).sqrt();
        if gf <= lower {
            return Err(WbError::Hypothesis(format!(
                "gamma = {gf:.3} must exceed sqrt(3a ln(4af)/c) = {lower:.3}"
            )));
        }
    }
    let b_num = universe.len() as u64; // b = b_num / a
    for retry in 0..64u32 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (retry as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let mut parts: Vec<Vec<u32>> = vec![Vec::new(); a];
        for &u in universe {
            parts[rng.gen_range(0..a)].push(u);
        }
        // sizes: b/2 <= |U_i| <= 3b/2  <=>  b_num <= 2 a |U_i| <= 3 b_num
        let sizes_ok = parts.iter().all(|part| {
            let x = 2 * a as u64 * part.len() as u64;
            b_num <= x && x <= 3 * b_num
        });
        if !sizes_ok {
            continue;
        }
        let fam_ok = family.iter().all(|fset| {
            parts.iter().all(|part| {
                let inter = fset.iter().filter(|v| part.contains(v)).count() as u64;
                // |F ∩ U_i| ∈ (1 ± gamma) |F| / a
                within_ratio(
                    inter * a as u64,
                    fset.len() as u64,
                    &Rat::one(),
                    gamma,
                )
            })
        });
        if fam_ok {
            return Ok(BalancedPartition {
                parts,
                retries: retry,
            });
        }
    }
    Err(WbError::RetryLimit(64))
}

// ---------------------------------------------------------------------------
// Tail probe
// ---------------------------------------------------------------------------

/// Weight function used by the tail probe.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiSpec {
    Zero,
    Const(f64),
    /// Deterministic per-tuple values uniform in [-r, r].
    Uniform { r: f64, seed: u64 },
}

impl XiSpec {
    fn bound(&self) -> f64 {
        match self {
            XiSpec::Zero => 0.0,
            XiSpec::Const(c) => c.abs(),
            XiSpec::Uniform { r, .. } => r.abs(),
        }
    }

    fn value(&self, tuple_index: u64) -> f64 {
        match self {
            XiSpec::Zero => 0.0,
            XiSpec::Const(c) => *c,
            XiSpec::Uniform { r, seed } => {
                // splitmix-style hash to a deterministic value in [-r, r]
                let mut z = tuple_index.wrapping_add(*seed).wrapping_add(0x9E3779B97F4A7C15);
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
                z ^= z >> 31;
                let unit = (z >> 11) as f64 / (1u64 << 53) as f64;
                (2.0 * unit - 1.0) * r
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailProbe {
    pub f: PatternGraph,
    /// A matching inside `f`.
    pub matching: Vec<(u8, u8)>,
    /// Minimum matched-pair product size.
    pub kappa: u64,
    /// Even moment order.
    pub m: u32,
    /// Weight bound.
    pub r: f64,
    pub xi: XiSpec,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailRow {
    pub s: f64,
    pub empirical: f64,
    pub bound: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub trials: u64,
    pub pass: bool,
}

/// Monte Carlo validation of the moment tail bound
/// `Pr[|sum chi_F xi| > s] <= (r p^{-|E(F)|} (m/kappa)^{|M|/2} |Q|/s)^m`
/// over freshly sampled graphs.
pub fn tail_probe(
    n: usize,
    k: usize,
    q: &Rectangle,
    probe: &TailProbe,
    p: &Rat,
    s_grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<TailReport, WbError> {
    if probe.m == 0 || probe.m % 2 != 0 {
        return Err(WbError::ProbeShape("moment m must be even and positive".into()));
    }
    if (probe.m as u64) > probe.kappa {
        return Err(WbError::ProbeShape("need m <= kappa".into()));
    }
    let f_edges = probe.f.edges_vec();
    for &(a, b) in &probe.matching {
        if !f_edges.contains(&(a.min(b), a.max(b))) {
            return Err(WbError::ProbeShape(format!(
                "matching edge ({a},{b}) is not in the pattern"
            )));
        }
    }
    let mut used = 0u16;
    for &(a, b) in &probe.matching {
        if used >> a & 1 == 1 || used >> b & 1 == 1 {
            return Err(WbError::ProbeShape("matching edges share a vertex".into()));
        }
        used |= (1 << a) | (1 << b);
    }
    for &(a, b) in &probe.matching {
        let pa = q.side(a as usize).map_or(0, |s| s.len()) as u64;
        let pb = q.side(b as usize).map_or(0, |s| s.len()) as u64;
        if pa * pb < probe.kappa {
            return Err(WbError::ProbeShape(format!(
                "matched pair ({a},{b}) has product size {} < kappa",
                pa * pb
            )));
        }
    }
    if probe.xi.bound() > probe.r {
        return Err(WbError::ProbeShape("xi exceeds the declared bound r".into()));
    }
    let card = q
        .cardinality_u128()
        .ok_or_else(|| WbError::ProbeShape("rectangle too large".into()))?;
    if card > guards::limit(guards::NAIVE_TUPLES) as u128 {
        return Err(WbError::Guard(card));
    }
    let pf = rat_to_f64(p);
    let edges: Vec<(usize, usize)> = f_edges
        .iter()
        .map(|&(a, b)| {
            let pa = q.blocks.iter().position(|&x| x == a as usize);
            let pb = q.blocks.iter().position(|&x| x == b as usize);
            match (pa, pb) {
                (Some(pa), Some(pb)) => Ok((pa, pb)),
                _ => Err(WbError::ProbeShape(format!(
                    "pattern edge ({a},{b}) outside the rectangle support"
                ))),
            }
        })
        .collect::<Result<_, _>>()?;

    // Parallel trials with per-trial seeds, merged in seed order.
    use rayon::prelude::*;
    let sums: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed ^ t.wrapping_mul(0x9E3779B97F4A7C15);
            let gt = BlockGraph::sample(n, k, p, trial_seed).expect("valid p");
            let fm = FloatMode { p: pf };
            let mut parts: Vec<f64> = Vec::new();
            let mut tuple_index = 0u64;
            let side_refs: Vec<&[u32]> = q.sides.iter().map(|s| s.as_slice()).collect();
            for_each_tuple_over(&side_refs, &mut |tv| {
                let xi = probe.xi.value(tuple_index);
                tuple_index += 1;
                if xi == 0.0 {
                    return;
                }
                let mut chi = 1.0f64;
                for &(pa, pb) in &edges {
                    chi *= measure::EvalMode::chi(&fm, gt.adjacent(tv[pa], tv[pb]));
                }
                parts.push(chi * xi);
            });
            measure::EvalMode::sum(&fm, parts)
        })
        .collect();

    let mut rows = Vec::new();
    let mut pass = true;
    for &s in s_grid {
        let exceed = sums.iter().filter(|x| x.abs() > s).count() as f64;
        let empirical = exceed / trials as f64;
        let stderr = (empirical * (1.0 - empirical) / trials as f64).sqrt();
        let base = probe.r
            * pf.powi(-(probe.f.edge_count() as i32))
            * (probe.m as f64 / probe.kappa as f64).powf(probe.matching.len() as f64 / 2.0)
            * card as f64
            / s;
        let bound = base.powi(probe.m as i32);
        let ok = empirical <= bound + 3.0 * stderr;
        pass &= ok;
        rows.push(TailRow {
            s,
            empirical,
            bound,
            stderr,
            pass: ok,
        });
    }
    Ok(TailReport {
        rows,
        trials,
        pass,
    })
}
