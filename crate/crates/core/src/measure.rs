//! The truncated character measure: mean-zero edge characters, character sums
//! over pattern graphs with three evaluation strategies, the measure itself,
//! the main/boundary split identity, and the coarse magnitude bound.
//!
//! Arithmetic modes: exact rationals for identity checks, a fast exact
//! integer path when p = 1/2 (characters are then ±1), and binary64 with
//! compensated summation for statistical experiments where p is irrational.

use crate::bitset::Bits;
use crate::graph::{BlockGraph, Rectangle};
use crate::guards;
use crate::patterns::{self, CoreInfo, PatternGraph};
use crate::rational::{binomial, rat, rat_to_f64, Rat};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("edge probability must satisfy 0 < p <= 1")]
    BadProbability,
    #[error("pair ({0}, {1}) lies inside one block")]
    IntraBlockPair(u32, u32),
    #[error("pattern block {0} is outside the rectangle support")]
    BlockOutsideSupport(usize),
    #[error("rectangle must have full support over all {0} blocks")]
    NotFullSupport(usize),
    #[error("naive enumeration over {0} tuples exceeds the guard {1}")]
    NaiveGuard(u128, u64),
    #[error("exact integer mode would overflow; instance too large for the fast path")]
    FastPathOverflow,
    #[error(
        "rectangle prefix is not good for the split: {0}"
    )]
    PrefixNotGood(String),
    #[error("patterns: {0}")]
    Pattern(#[from] patterns::PatternError),
}

/// A measured value, tagged by arithmetic mode.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureValue {
    Exact(Rat),
    Approx(f64),
}

impl MeasureValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            MeasureValue::Exact(r) => rat_to_f64(r),
            MeasureValue::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Rat> {
        match self {
            MeasureValue::Exact(r) => Some(r),
            MeasureValue::Approx(_) => None,
        }
    }
}

impl serde::Serialize for MeasureValue {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        match self {
            MeasureValue::Exact(r) => {
                let mut st = ser.serialize_struct("MeasureValue", 2)?;
                st.serialize_field("mode", "exact")?;
                st.serialize_field("value", &crate::rational::format_rat(r))?;
                st.end()
            }
            MeasureValue::Approx(x) => {
                let mut st = ser.serialize_struct("MeasureValue", 2)?;
                st.serialize_field("mode", "float")?;
                st.serialize_field("value", x)?;
                st.end()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation modes
// ---------------------------------------------------------------------------

pub trait EvalMode: Sync {
    type V: Clone + Send + std::fmt::Debug;
    fn zero(&self) -> Self::V;
    fn one(&self) -> Self::V;
    fn add(&self, a: Self::V, b: &Self::V) -> Self::V;
    fn mul(&self, a: Self::V, b: &Self::V) -> Self::V;
    fn neg(&self, a: Self::V) -> Self::V;
    fn count(&self, c: u64) -> Self::V;
    /// Character of a single potential edge.
    fn chi(&self, present: bool) -> Self::V;
    /// p^{-e}.
    fn inv_p_pow(&self, e: u32) -> Self::V;
    /// Deterministic (in-order) summation.
    fn sum(&self, items: Vec<Self::V>) -> Self::V {
        let mut acc = self.zero();
        for it in items {
            acc = self.add(acc, &it);
        }
        acc
    }
    fn is_zero(&self, v: &Self::V) -> bool;
}

/// Exact rationals for arbitrary rational p in (0, 1].
pub struct RatMode {
    pub p: Rat,
}

impl RatMode {
    pub fn new(p: Rat) -> Result<Self, MeasureError> {
        if !p.is_positive() || p > Rat::one() {
            return Err(MeasureError::BadProbability);
        }
        Ok(RatMode { p })
    }
}

impl EvalMode for RatMode {
    type V = Rat;
    fn zero(&self) -> Rat {
        Rat::zero()
    }
    fn one(&self) -> Rat {
        Rat::one()
    }
    fn add(&self, a: Rat, b: &Rat) -> Rat {
        a + b
    }
    fn mul(&self, a: Rat, b: &Rat) -> Rat {
        a * b
    }
    fn neg(&self, a: Rat) -> Rat {
        -a
    }
    fn count(&self, c: u64) -> Rat {
        Rat::from_integer(BigInt::from(c))
    }
    fn chi(&self, present: bool) -> Rat {
        if present {
            (Rat::one() - &self.p) / &self.p
        } else {
            -Rat::one()
        }
    }
    fn inv_p_pow(&self, e: u32) -> Rat {
        self.p.pow(-(e as i32))
    }
    fn is_zero(&self, v: &Rat) -> bool {
        v.is_zero()
    }
}

/// Exact integers for p = 1/2: characters are ±1 and 1/p powers are powers of
/// two, so sums stay in i128 for desk-scale instances.
pub struct HalfMode;

impl EvalMode for HalfMode {
    type V = i128;
    fn zero(&self) -> i128 {
        0
    }
    fn one(&self) -> i128 {
        1
    }
    fn add(&self, a: i128, b: &i128) -> i128 {
        a.checked_add(*b).expect("half-mode overflow")
    }
    fn mul(&self, a: i128, b: &i128) -> i128 {
        a.checked_mul(*b).expect("half-mode overflow")
    }
    fn neg(&self, a: i128) -> i128 {
        -a
    }
    fn count(&self, c: u64) -> i128 {
        c as i128
    }
    fn chi(&self, present: bool) -> i128 {
        if present {
            1
        } else {
            -1
        }
    }
    fn inv_p_pow(&self, e: u32) -> i128 {
        1i128.checked_shl(e).expect("half-mode overflow")
    }
    fn is_zero(&self, v: &i128) -> bool {
        *v == 0
    }
}

/// Binary64 with Kahan-compensated outer sums.
pub struct FloatMode {
    pub p: f64,
}

impl EvalMode for FloatMode {
    type V = f64;
    fn zero(&self) -> f64 {
        0.0
    }
    fn one(&self) -> f64 {
        1.0
    }
    fn add(&self, a: f64, b: &f64) -> f64 {
        a + b
    }
    fn mul(&self, a: f64, b: &f64) -> f64 {
        a * b
    }
    fn neg(&self, a: f64) -> f64 {
        -a
    }
    fn count(&self, c: u64) -> f64 {
        c as f64
    }
    fn chi(&self, present: bool) -> f64 {
        if present {
            (1.0 - self.p) / self.p
        } else {
            -1.0
        }
    }
    fn inv_p_pow(&self, e: u32) -> f64 {
        self.p.powi(-(e as i32))
    }
    fn sum(&self, items: Vec<f64>) -> f64 {
        // Kahan compensation; the items arrive in deterministic order.
        let mut s = 0.0f64;
        let mut c = 0.0f64;
        for x in items {
            let y = x - c;
            let t = s + y;
            c = (t - s) - y;
            s = t;
        }
        s
    }
    fn is_zero(&self, v: &f64) -> bool {
        *v == 0.0
    }
}

// ---------------------------------------------------------------------------
// Stars
// ---------------------------------------------------------------------------

/// Star with center `center` and leaves `0..cutoff` minus the center.
#[derive(Clone, Copy, Debug)]
pub struct StarSpec {
    pub k: usize,
    pub center: usize,
    pub cutoff: usize,
}

impl StarSpec {
    pub fn graph(&self) -> PatternGraph {
        let mut g = PatternGraph::empty(self.k);
        for leaf in 0..self.cutoff.min(self.k) {
            if leaf != self.center {
                g.add_edge(self.center, leaf);
            }
        }
        g
    }
}

/// Full star at `center`.
pub fn star(k: usize, center: usize) -> PatternGraph {
    StarSpec {
        k,
        center,
        cutoff: k,
    }
    .graph()
}

/// Union of full stars with centers `0..ell`: all pairs touching the prefix.
pub fn leading_stars(k: usize, ell: usize) -> PatternGraph {
    let mut g = PatternGraph::empty(k);
    for c in 0..ell.min(k) {
        for v in 0..k {
            if v != c {
                g.add_edge(c, v);
            }
        }
    }
    g
}

// ---------------------------------------------------------------------------
// Characters
// ---------------------------------------------------------------------------

/// Product character over an explicit cross-block edge set.
pub fn chi_edges<M: EvalMode>(
    g: &BlockGraph,
    edges: &[(u32, u32)],
    mode: &M,
) -> Result<M::V, MeasureError> {
    let mut acc = mode.one();
    for &(u, v) in edges {
        if g.block_of(u) == g.block_of(v) {
            return Err(MeasureError::IntraBlockPair(u, v));
        }
        let c = mode.chi(g.adjacent(u, v));
        acc = mode.mul(acc, &c);
    }
    Ok(acc)
}

/// Maps a pattern graph onto a tuple: `{i, j}` becomes `{t_i, t_j}`.
/// The tuple must cover every non-isolated pattern block.
pub fn map_pattern(
    h: &PatternGraph,
    blocks: &[usize],
    vertices: &[u32],
) -> Result<Vec<(u32, u32)>, MeasureError> {
    let lookup = |b: usize| -> Result<u32, MeasureError> {
        blocks
            .iter()
            .position(|&x| x == b)
            .map(|i| vertices[i])
            .ok_or(MeasureError::BlockOutsideSupport(b))
    };
    let mut out = Vec::with_capacity(h.edge_count());
    for (i, j) in h.edges_vec() {
        out.push((lookup(i as usize)?, lookup(j as usize)?));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Structured character sums
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Naive,
    Factorized,
    Grouped,
}

/// Joint common-neighborhood counts `|side_t ∩ N(u) ∩ N(u')|` for every
/// vertex pair across two support positions, shared by every pattern in one
/// evaluation sweep. Layout: `[target_pos * |a||b| + ia * |b| + ib]`.
struct PairTable {
    len_b: usize,
    counts: Vec<u32>,
    stride: usize,
}

struct RectCtx<'a> {
    g: &'a BlockGraph,
    kn: usize,
    blocks: &'a [usize],
    sides: &'a [Vec<u32>],
    side_bits: Vec<Bits>,
    /// Indexed by support position pair `(a, b)`, `a < b`.
    pair_tables: Option<Vec<Vec<PairTable>>>,
}

impl<'a> RectCtx<'a> {
    fn new(g: &'a BlockGraph, q: &'a Rectangle) -> Self {
        let kn = g.num_vertices();
        let side_bits = q
            .sides
            .iter()
            .map(|s| Bits::from_indices(kn, s.iter().copied()))
            .collect();
        RectCtx {
            g,
            kn,
            blocks: &q.blocks,
            sides: &q.sides,
            side_bits,
            pair_tables: None,
        }
    }

    /// Builds the pairwise tables when the memory footprint is reasonable.
    fn with_pair_tables(mut self) -> Self {
        let s = self.blocks.len();
        let budget: u128 = self
            .sides
            .iter()
            .flat_map(|a| self.sides.iter().map(move |b| (a, b)))
            .map(|(a, b)| a.len() as u128 * b.len() as u128)
            .sum::<u128>()
            .saturating_mul(s as u128 / 2);
        if budget > 80_000_000 {
            return self;
        }
        let mut scratch = Bits::new(self.kn);
        let mut tables: Vec<Vec<PairTable>> = Vec::with_capacity(s);
        for a in 0..s {
            let mut row = Vec::with_capacity(s);
            for b in (a + 1)..s {
                let stride = self.sides[a].len() * self.sides[b].len();
                let mut counts = vec![0u32; stride * s];
                for (ia, &u) in self.sides[a].iter().enumerate() {
                    for (ib, &v) in self.sides[b].iter().enumerate() {
                        scratch.clone_from(self.g.neighbors(u));
                        scratch.and_assign(self.g.neighbors(v));
                        for (t, bits) in self.side_bits.iter().enumerate() {
                            if t == a || t == b {
                                continue;
                            }
                            counts[t * stride + ia * self.sides[b].len() + ib] =
                                bits.intersection_count(&scratch) as u32;
                        }
                    }
                }
                row.push(PairTable {
                    len_b: self.sides[b].len(),
                    counts,
                    stride,
                });
            }
            tables.push(row);
        }
        self.pair_tables = Some(tables);
        self
    }

    /// `|side_target ∩ N(u_a) ∩ N(u_b)|` by table lookup when available.
    #[inline]
    fn pair_count(&self, pa: usize, ia: usize, pb: usize, ib: usize, target: usize) -> Option<u64> {
        let tables = self.pair_tables.as_ref()?;
        let (pa, ia, pb, ib) = if pa < pb {
            (pa, ia, pb, ib)
        } else {
            (pb, ib, pa, ia)
        };
        let t = &tables[pa][pb - pa - 1];
        Some(t.counts[target * t.stride + ia * t.len_b + ib] as u64)
    }

    fn pos(&self, block: usize) -> Result<usize, MeasureError> {
        self.blocks
            .iter()
            .position(|&b| b == block)
            .ok_or(MeasureError::BlockOutsideSupport(block))
    }
}

/// Direct tuple enumeration.
fn char_sum_naive<M: EvalMode>(
    ctx: &RectCtx,
    h: &PatternGraph,
    mode: &M,
) -> Result<M::V, MeasureError> {
    let card = ctx
        .sides
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    let guard = guards::limit(guards::NAIVE_TUPLES);
    if card > guard as u128 {
        return Err(MeasureError::NaiveGuard(card, guard));
    }
    let edges: Vec<(usize, usize)> = h
        .edges_vec()
        .iter()
        .map(|&(i, j)| Ok((ctx.pos(i as usize)?, ctx.pos(j as usize)?)))
        .collect::<Result<_, MeasureError>>()?;
    if ctx.sides.iter().any(|s| s.is_empty()) {
        return Ok(mode.zero());
    }
    let mut acc = mode.zero();
    let mut idx = vec![0usize; ctx.sides.len()];
    loop {
        let mut term = mode.one();
        for &(a, b) in &edges {
            let u = ctx.sides[a][idx[a]];
            let v = ctx.sides[b][idx[b]];
            let c = mode.chi(ctx.g.adjacent(u, v));
            term = mode.mul(term, &c);
        }
        acc = mode.add(acc, &term);
        let mut pos = ctx.sides.len();
        loop {
            if pos == 0 {
                return Ok(acc);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < ctx.sides[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// A leaf whose character factor depends only on its enumerated neighbors:
/// `sum_u prod_w chi(u, t_w)`.
struct ChiLeaf {
    side_pos: usize,
    nbr_enum_pos: Vec<usize>,
}

/// A leaf counted under forced presence: `|side ∩ ∩_w N(t_w)|`.
struct CountLeaf {
    side_pos: usize,
    end_enum_pos: Vec<usize>,
}

/// Per-iteration evaluation plan for a chi leaf.
enum ChiPlan<V> {
    /// Depends on one enumerated vertex; fully cached.
    One { e: usize, cache: Vec<V> },
    /// Two enumerated neighbors with a pairwise table: the factor is
    /// `p^{-2} cnt12 - p^{-1}(cnt1 + cnt2) + |side|`.
    TwoTable {
        e1: usize,
        p1: usize,
        e2: usize,
        p2: usize,
        side_pos: usize,
        cnt1: Vec<u64>,
        cnt2: Vec<u64>,
        total: u64,
    },
    /// General inclusion-exclusion over neighbor subsets.
    Subset { side_pos: usize, nbrs: Vec<usize> },
}

/// Per-iteration evaluation plan for a count leaf.
enum CountPlan<V> {
    One { e: usize, cache: Vec<V> },
    TwoTable {
        e1: usize,
        p1: usize,
        e2: usize,
        p2: usize,
        side_pos: usize,
    },
    Subset { side_pos: usize, ends: Vec<usize> },
}

/// Common engine: enumerate assignments of `enum_pos` blocks; per assignment
/// multiply explicit chi edges inside the enumerated set, chi-leaf factors and
/// count-leaf factors. Constant side counts are hoisted by the caller.
fn structured_sum<M: EvalMode>(
    ctx: &RectCtx,
    mode: &M,
    enum_pos: &[usize],
    chi_edges_in_enum: &[(usize, usize)], // positions into enum_pos
    chi_leaves: &[ChiLeaf],
    count_leaves: &[CountLeaf],
) -> M::V {
    if enum_pos.iter().any(|&p| ctx.sides[p].is_empty()) {
        return mode.zero();
    }
    let count_into = |side_pos: usize, e: usize| -> Vec<u64> {
        let side_v = &ctx.side_bits[side_pos];
        ctx.sides[enum_pos[e]]
            .iter()
            .map(|&u| side_v.intersection_count(ctx.g.neighbors(u)) as u64)
            .collect()
    };
    let chi_plans: Vec<ChiPlan<M::V>> = chi_leaves
        .iter()
        .map(|leaf| match leaf.nbr_enum_pos.as_slice() {
            &[e] => {
                let total = ctx.sides[leaf.side_pos].len() as u64;
                let cache = count_into(leaf.side_pos, e)
                    .into_iter()
                    .map(|cnt| {
                        let present = mode.mul(mode.inv_p_pow(1), &mode.count(cnt));
                        mode.add(present, &mode.neg(mode.count(total)))
                    })
                    .collect();
                ChiPlan::One { e, cache }
            }
            &[e1, e2]
                if ctx
                    .pair_count(enum_pos[e1], 0, enum_pos[e2], 0, leaf.side_pos)
                    .is_some() =>
            {
                ChiPlan::TwoTable {
                    e1,
                    p1: enum_pos[e1],
                    e2,
                    p2: enum_pos[e2],
                    side_pos: leaf.side_pos,
                    cnt1: count_into(leaf.side_pos, e1),
                    cnt2: count_into(leaf.side_pos, e2),
                    total: ctx.sides[leaf.side_pos].len() as u64,
                }
            }
            nbrs => ChiPlan::Subset {
                side_pos: leaf.side_pos,
                nbrs: nbrs.to_vec(),
            },
        })
        .collect();
    let count_plans: Vec<CountPlan<M::V>> = count_leaves
        .iter()
        .map(|leaf| match leaf.end_enum_pos.as_slice() {
            &[e] => CountPlan::One {
                e,
                cache: count_into(leaf.side_pos, e)
                    .into_iter()
                    .map(|c| mode.count(c))
                    .collect(),
            },
            &[e1, e2]
                if ctx
                    .pair_count(enum_pos[e1], 0, enum_pos[e2], 0, leaf.side_pos)
                    .is_some() =>
            {
                CountPlan::TwoTable {
                    e1,
                    p1: enum_pos[e1],
                    e2,
                    p2: enum_pos[e2],
                    side_pos: leaf.side_pos,
                }
            }
            ends => CountPlan::Subset {
                side_pos: leaf.side_pos,
                ends: ends.to_vec(),
            },
        })
        .collect();

    let inv1 = mode.inv_p_pow(1);
    let inv2 = mode.inv_p_pow(2);
    let mut acc = mode.zero();
    let mut idx = vec![0usize; enum_pos.len()];
    let mut scratch = Bits::new(ctx.kn);
    loop {
        let current = |e: usize| ctx.sides[enum_pos[e]][idx[e]];
        let mut term = mode.one();
        for &(a, b) in chi_edges_in_enum {
            let c = mode.chi(ctx.g.adjacent(current(a), current(b)));
            term = mode.mul(term, &c);
        }
        for plan in &chi_plans {
            let factor = match plan {
                ChiPlan::One { e, cache } => cache[idx[*e]].clone(),
                ChiPlan::TwoTable {
                    e1,
                    p1,
                    e2,
                    p2,
                    side_pos,
                    cnt1,
                    cnt2,
                    total,
                } => {
                    let c12 = ctx
                        .pair_count(*p1, idx[*e1], *p2, idx[*e2], *side_pos)
                        .expect("table present by plan construction");
                    let joint = mode.mul(inv2.clone(), &mode.count(c12));
                    let singles = mode.mul(
                        inv1.clone(),
                        &mode.count(cnt1[idx[*e1]] + cnt2[idx[*e2]]),
                    );
                    mode.add(
                        mode.add(joint, &mode.neg(singles)),
                        &mode.count(*total),
                    )
                }
                ChiPlan::Subset { side_pos, nbrs } => {
                    let deg = nbrs.len();
                    let mut inner = mode.zero();
                    for sel in 0u32..(1 << deg) {
                        scratch.clone_from(&ctx.side_bits[*side_pos]);
                        let bits_t = sel.count_ones();
                        for (b, &e) in nbrs.iter().enumerate() {
                            if sel >> b & 1 == 1 {
                                scratch.and_assign(ctx.g.neighbors(current(e)));
                            }
                        }
                        let mut part = mode.mul(
                            mode.inv_p_pow(bits_t),
                            &mode.count(scratch.count_ones() as u64),
                        );
                        if (deg as u32 - bits_t) % 2 == 1 {
                            part = mode.neg(part);
                        }
                        inner = mode.add(inner, &part);
                    }
                    inner
                }
            };
            term = mode.mul(term, &factor);
            if mode.is_zero(&term) {
                break;
            }
        }
        if !mode.is_zero(&term) {
            for plan in &count_plans {
                let factor = match plan {
                    CountPlan::One { e, cache } => cache[idx[*e]].clone(),
                    CountPlan::TwoTable {
                        e1,
                        p1,
                        e2,
                        p2,
                        side_pos,
                    } => mode.count(
                        ctx.pair_count(*p1, idx[*e1], *p2, idx[*e2], *side_pos)
                            .expect("table present by plan construction"),
                    ),
                    CountPlan::Subset { side_pos, ends } => {
                        scratch.clone_from(&ctx.side_bits[*side_pos]);
                        for &e in ends {
                            scratch.and_assign(ctx.g.neighbors(current(e)));
                        }
                        mode.count(scratch.count_ones() as u64)
                    }
                };
                term = mode.mul(term, &factor);
                if mode.is_zero(&term) {
                    break;
                }
            }
        }
        acc = mode.add(acc, &term);
        let mut pos = enum_pos.len();
        loop {
            if pos == 0 {
                return acc;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < ctx.sides[enum_pos[pos]].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Character sum factorized over connected components; each component is
/// summed over its minimum vertex cover side with independent leaf factors,
/// falling back to full component enumeration above cover size 3.
fn char_sum_factorized<M: EvalMode>(
    ctx: &RectCtx,
    h: &PatternGraph,
    mode: &M,
) -> Result<M::V, MeasureError> {
    if ctx.sides.iter().any(|s| s.is_empty()) {
        return Ok(mode.zero());
    }
    let support = h.support();
    let mut acc = mode.one();
    // isolated blocks contribute their side sizes
    for (pos, &b) in ctx.blocks.iter().enumerate() {
        if b >= h.k() || support >> b & 1 == 0 {
            let c = mode.count(ctx.sides[pos].len() as u64);
            acc = mode.mul(acc, &c);
        }
    }
    // connected components of non-isolated vertices
    let mut seen = 0u16;
    for v in 0..h.k() {
        if support >> v & 1 == 0 || seen >> v & 1 == 1 {
            continue;
        }
        // BFS in h
        let mut comp = 1u16 << v;
        let mut frontier = vec![v];
        while let Some(x) = frontier.pop() {
            let nb = h.neighbors(x);
            for u in 0..h.k() {
                if nb >> u & 1 == 1 && comp >> u & 1 == 0 {
                    comp |= 1 << u;
                    frontier.push(u);
                }
            }
        }
        seen |= comp;
        let sub = h.induced(comp);
        let vc = patterns::vc_number(&sub);
        let cover = if vc <= 3 {
            patterns::lex_first_min_vc(&sub)
        } else {
            comp // full enumeration of the component
        };
        let enum_blocks: Vec<usize> = (0..h.k()).filter(|&b| cover >> b & 1 == 1).collect();
        let enum_pos: Vec<usize> = enum_blocks
            .iter()
            .map(|&b| ctx.pos(b))
            .collect::<Result<_, _>>()?;
        let mut chi_in_enum = Vec::new();
        for (i, j) in sub.edges_vec() {
            let (i, j) = (i as usize, j as usize);
            if cover >> i & 1 == 1 && cover >> j & 1 == 1 {
                let a = enum_blocks.iter().position(|&b| b == i).unwrap();
                let b = enum_blocks.iter().position(|&b| b == j).unwrap();
                chi_in_enum.push((a, b));
            }
        }
        let mut chi_leaves = Vec::new();
        for vtx in 0..h.k() {
            if comp >> vtx & 1 == 0 || cover >> vtx & 1 == 1 {
                continue;
            }
            let nbrs = sub.neighbors(vtx);
            let nbr_enum_pos: Vec<usize> = enum_blocks
                .iter()
                .enumerate()
                .filter(|(_, &b)| nbrs >> b & 1 == 1)
                .map(|(e, _)| e)
                .collect();
            debug_assert_eq!(nbr_enum_pos.len() as u32, nbrs.count_ones());
            chi_leaves.push(ChiLeaf {
                side_pos: ctx.pos(vtx)?,
                nbr_enum_pos,
            });
        }
        let comp_sum = structured_sum(ctx, mode, &enum_pos, &chi_in_enum, &chi_leaves, &[]);
        acc = mode.mul(acc, &comp_sum);
    }
    Ok(acc)
}

/// Grouped character sum for the whole optional-edge family of a core:
/// `sum_t chi_{F(t)} p^{-|E*|} [E*(t) present]` as the structured engine with
/// count leaves for the optional-edge targets.
fn family_char_sum_impl<M: EvalMode>(
    ctx: &RectCtx,
    f: &PatternGraph,
    estar: &[(u8, u8)],
    mode: &M,
) -> Result<M::V, MeasureError> {
    if ctx.sides.iter().any(|s| s.is_empty()) {
        return Ok(mode.zero());
    }
    let support = f.support();
    // Enumerated set: lex-first minimum cover of f plus the supported ends of
    // the optional edges (those belong to the cover of the originating core,
    // which may differ from the cover of a restricted subgraph).
    let mut wmask = patterns::lex_first_min_vc(f);
    let mut ends_of: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &(a, b) in estar {
        let (a, b) = (a as usize, b as usize);
        let (inner, leaf) = if support >> a & 1 == 1 { (a, b) } else { (b, a) };
        debug_assert!(support >> leaf & 1 == 0, "optional edges end outside the core support");
        wmask |= 1 << inner;
        ends_of.entry(leaf).or_default().push(inner);
    }
    let enum_blocks: Vec<usize> = (0..f.k()).filter(|&b| wmask >> b & 1 == 1).collect();
    let enum_pos: Vec<usize> = enum_blocks
        .iter()
        .map(|&b| ctx.pos(b))
        .collect::<Result<_, _>>()?;
    let mut chi_in_enum = Vec::new();
    let mut chi_leaves = Vec::new();
    for (i, j) in f.edges_vec() {
        let (i, j) = (i as usize, j as usize);
        if wmask >> i & 1 == 1 && wmask >> j & 1 == 1 {
            let a = enum_blocks.iter().position(|&b| b == i).unwrap();
            let b = enum_blocks.iter().position(|&b| b == j).unwrap();
            chi_in_enum.push((a, b));
        }
    }
    for v in 0..f.k() {
        if support >> v & 1 == 0 || wmask >> v & 1 == 1 {
            continue;
        }
        let nbrs = f.neighbors(v);
        debug_assert_eq!(nbrs & !wmask, 0, "cover leaves see only covered neighbors");
        let nbr_enum_pos: Vec<usize> = enum_blocks
            .iter()
            .enumerate()
            .filter(|(_, &b)| nbrs >> b & 1 == 1)
            .map(|(e, _)| e)
            .collect();
        chi_leaves.push(ChiLeaf {
            side_pos: ctx.pos(v)?,
            nbr_enum_pos,
        });
    }
    let mut count_leaves = Vec::new();
    let mut const_factor = mode.one();
    for (pos, &b) in ctx.blocks.iter().enumerate() {
        if b < f.k() && (wmask >> b & 1 == 1 || support >> b & 1 == 1) {
            continue;
        }
        match ends_of.get(&b) {
            Some(ends) => {
                let end_enum_pos: Vec<usize> = ends
                    .iter()
                    .map(|&w| enum_blocks.iter().position(|&x| x == w).unwrap())
                    .collect();
                count_leaves.push(CountLeaf {
                    side_pos: pos,
                    end_enum_pos,
                });
            }
            None => {
                let c = mode.count(ctx.sides[pos].len() as u64);
                const_factor = mode.mul(const_factor, &c);
            }
        }
    }
    let core_sum = structured_sum(ctx, mode, &enum_pos, &chi_in_enum, &chi_leaves, &count_leaves);
    let scaled = mode.mul(core_sum, &mode.inv_p_pow(estar.len() as u32));
    Ok(mode.mul(scaled, &const_factor))
}

// ---------------------------------------------------------------------------
// Public evaluation entry points
// ---------------------------------------------------------------------------

/// Character sum over a single pattern graph with the chosen strategy.
pub fn char_sum<M: EvalMode>(
    g: &BlockGraph,
    q: &Rectangle,
    h: &PatternGraph,
    mode: &M,
    strategy: Strategy,
) -> Result<M::V, MeasureError> {
    let ctx = RectCtx::new(g, q);
    match strategy {
        Strategy::Naive => char_sum_naive(&ctx, h, mode),
        Strategy::Factorized | Strategy::Grouped => char_sum_factorized(&ctx, h, mode),
    }
}

/// Grouped character sum over the fiber family of a core.
pub fn family_char_sum<M: EvalMode>(
    g: &BlockGraph,
    q: &Rectangle,
    f: &PatternGraph,
    estar: &[(u8, u8)],
    mode: &M,
) -> Result<M::V, MeasureError> {
    let ctx = RectCtx::new(g, q);
    family_char_sum_impl(&ctx, f, estar, mode)
}

fn mu_sum<M: EvalMode>(
    g: &BlockGraph,
    q: &Rectangle,
    d: usize,
    mode: &M,
    strategy: Strategy,
) -> Result<M::V, MeasureError> {
    if !q.is_full_support(g.k()) {
        return Err(MeasureError::NotFullSupport(g.k()));
    }
    match strategy {
        Strategy::Naive => {
            let ctx = RectCtx::new(g, q);
            let fam = patterns::patterns_vc_at_most(g.k(), d)?;
            let parts: Vec<M::V> = fam
                .iter()
                .map(|h| char_sum_naive(&ctx, h, mode))
                .collect::<Result<_, _>>()?;
            Ok(mode.sum(parts))
        }
        Strategy::Factorized => {
            let ctx = RectCtx::new(g, q).with_pair_tables();
            let fam = patterns::patterns_vc_at_most(g.k(), d)?;
            let parts: Vec<M::V> = fam
                .par_iter()
                .map(|h| char_sum_factorized(&ctx, h, mode))
                .collect::<Result<_, _>>()?;
            Ok(mode.sum(parts))
        }
        Strategy::Grouped => {
            let ctx = RectCtx::new(g, q).with_pair_tables();
            let cores = patterns::cores_vc_at_most(g.k(), d)?;
            let parts: Vec<M::V> = cores
                .par_iter()
                .map(|info: &CoreInfo| family_char_sum_impl(&ctx, &info.f, &info.estar, mode))
                .collect::<Result<_, _>>()?;
            Ok(mode.sum(parts))
        }
    }
}

fn n_pow_k(n: usize, k: usize) -> Rat {
    Rat::from_integer(BigInt::from(n).pow(k as u32))
}

/// Whether the exact integer fast path is safe for this instance shape.
fn half_mode_fits(g: &BlockGraph, d: usize) -> bool {
    let k = g.k() as u32;
    let pairs = k * (k.saturating_sub(1)) / 2;
    let logn = (usize::BITS - g.n().leading_zeros()) + 1;
    // patterns * |Q| * optional-edge scaling, with headroom
    pairs + k * logn + (d as u32 * k) + 10 <= 120
}

/// The truncated measure in exact arithmetic. Dispatches to the integer fast
/// path at p = 1/2 when it provably fits.
pub fn mu_d_exact(
    g: &BlockGraph,
    q: &Rectangle,
    d: usize,
    p: &Rat,
    strategy: Strategy,
) -> Result<Rat, MeasureError> {
    let value = if *p == rat(1, 2) && half_mode_fits(g, d) {
        let raw = mu_sum(g, q, d, &HalfMode, strategy)?;
        Rat::from_integer(BigInt::from(raw))
    } else {
        let mode = RatMode::new(p.clone())?;
        mu_sum(g, q, d, &mode, strategy)?
    };
    let normalized = value / n_pow_k(g.n(), g.k());
    debug_assert!(
        normalized.abs() <= rect_small_bound(q, g.n(), g.k(), d, p),
        "measure magnitude exceeds the coarse bound"
    );
    Ok(normalized)
}

/// The truncated measure in binary64.
pub fn mu_d_float(
    g: &BlockGraph,
    q: &Rectangle,
    d: usize,
    p: f64,
    strategy: Strategy,
) -> Result<f64, MeasureError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(MeasureError::BadProbability);
    }
    let mode = FloatMode { p };
    let raw = mu_sum(g, q, d, &mode, strategy)?;
    Ok(raw / (g.n() as f64).powi(g.k() as i32))
}

/// Coarse magnitude bound `|Q| n^{-k} sum_{i<=d} C(k,i) p^{-ik}`.
pub fn rect_small_bound(q: &Rectangle, n: usize, k: usize, d: usize, p: &Rat) -> Rat {
    let card = Rat::from_integer(BigInt::from(q.cardinality()));
    let mut sum = Rat::zero();
    for i in 0..=d.min(k) {
        let c = Rat::from_integer(BigInt::from(binomial(k as u64, i as u64)));
        sum += c * p.pow(-((i * k) as i32));
    }
    card / n_pow_k(n, k) * sum
}

// ---------------------------------------------------------------------------
// Main / boundary split
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct BoundaryTerm {
    /// Star center (block index, 0-based).
    pub center: usize,
    /// Peeled edge target block (0-based).
    pub target: usize,
    pub scale_exp: u32,
    pub value: Rat,
    /// Whether the contributing pattern family is empty.
    pub empty: bool,
}

#[derive(Clone, Debug)]
pub struct SplitReport {
    pub ell: usize,
    pub d: usize,
    pub prefix_star_edges: u32,
    pub main: Rat,
    pub boundary: Vec<BoundaryTerm>,
    /// main + sum of boundary terms (unnormalized character sum).
    pub total: Rat,
}

/// Splits the full truncated character sum over a rectangle whose first `ell`
/// blocks are adjacent singletons into the main term and boundary terms. The
/// identity `main + sum(boundary) = sum_{t,H} chi_{H(t)}` is exact.
pub fn split_main_boundary(
    g: &BlockGraph,
    q: &Rectangle,
    ell: usize,
    d: usize,
    p: &Rat,
) -> Result<SplitReport, MeasureError> {
    let k = g.k();
    if !q.is_full_support(k) {
        return Err(MeasureError::NotFullSupport(k));
    }
    // Precondition: blocks 0..ell are singletons {v_i}, pairwise adjacent,
    // and adjacent to every vertex of every other side.
    let mut prefix = Vec::new();
    for i in 0..ell {
        match q.sides[i].as_slice() {
            [v] => prefix.push(*v),
            other => {
                return Err(MeasureError::PrefixNotGood(format!(
                    "block {i} has {} vertices, want a singleton",
                    other.len()
                )))
            }
        }
    }
    for a in 0..ell {
        for b in (a + 1)..ell {
            if !g.adjacent(prefix[a], prefix[b]) {
                return Err(MeasureError::PrefixNotGood(format!(
                    "prefix vertices {} and {} are not adjacent",
                    prefix[a], prefix[b]
                )));
            }
        }
    }
    for (i, &v) in prefix.iter().enumerate() {
        for (j, side) in q.sides.iter().enumerate() {
            if i == j {
                continue;
            }
            for &u in side {
                if !g.adjacent(v, u) {
                    return Err(MeasureError::PrefixNotGood(format!(
                        "prefix vertex {v} misses {u} in block {j}"
                    )));
                }
            }
        }
    }

    let mode = RatMode::new(p.clone())?;
    let ctx = RectCtx::new(g, q);
    let fam = patterns::patterns_vc_at_most(k, d)?;
    let s_prefix = leading_stars(k, ell);
    let prefix_star_edges = s_prefix.edge_count() as u32;

    // Main term.
    let mut main_parts = Vec::new();
    for h in fam.iter() {
        if s_prefix.is_edge_subset_of(h) {
            main_parts.push(char_sum_factorized(&ctx, &h.minus(&s_prefix), &mode)?);
        }
    }
    let main = mode.inv_p_pow(prefix_star_edges) * mode.sum(main_parts);

    // Boundary terms: peel centers in order; for center i and target j the
    // peeled set is all pairs touching blocks below i plus the edges from i
    // to blocks below j.
    let mut boundary = Vec::new();
    let mut total = main.clone();
    for i in 0..ell {
        for j in (i + 1)..k {
            let mut e0 = leading_stars(k, i);
            for jp in 0..j {
                if jp != i {
                    e0.add_edge(i, jp);
                }
            }
            let mut parts = Vec::new();
            let mut empty = true;
            for h in fam.iter() {
                if !e0.is_edge_subset_of(h) {
                    continue;
                }
                if !patterns::in_boundary(h, (i as u8, j as u8), d) {
                    continue;
                }
                empty = false;
                parts.push(char_sum_factorized(&ctx, &h.minus(&e0), &mode)?);
            }
            let scale_exp = e0.edge_count() as u32;
            let value = mode.inv_p_pow(scale_exp) * mode.sum(parts);
            total += &value;
            boundary.push(BoundaryTerm {
                center: i,
                target: j,
                scale_exp,
                value,
                empty,
            });
        }
    }
    Ok(SplitReport {
        ell,
        d,
        prefix_star_edges,
        main,
        boundary,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BlockGraph;
    use crate::rational::rat_int;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full(g: &BlockGraph) -> Rectangle {
        Rectangle::full(g)
    }

    fn random_subrect(g: &BlockGraph, rng: &mut ChaCha8Rng) -> Rectangle {
        let mut sides = Vec::new();
        for b in 0..g.k() {
            let mut side: Vec<u32> = g.block_vertices(b).filter(|_| rng.gen_bool(0.6)).collect();
            if side.is_empty() {
                side.push(g.block_vertices(b).nth(rng.gen_range(0..g.n())).unwrap());
            }
            sides.push(side);
        }
        Rectangle::new(g, (0..g.k()).collect(), sides).unwrap()
    }

    #[test]
    fn chi_basics() {
        let g = BlockGraph::sample(2, 2, &rat(1, 4), 3).unwrap();
        let mode = RatMode::new(rat(1, 4)).unwrap();
        // empty product
        assert_eq!(chi_edges(&g, &[], &mode).unwrap(), Rat::one());
        // single present edge at p = 1/4 -> 3
        let g1 = BlockGraph::complete(1, 2);
        assert_eq!(chi_edges(&g1, &[(0, 1)], &mode).unwrap(), rat_int(3));
        // intra-block pair rejected
        let g2 = BlockGraph::empty(2, 2);
        assert!(chi_edges(&g2, &[(0, 1)], &mode).is_err());
    }

    #[test]
    fn chi_partition_identity_small_tuples() {
        // sum over edge subsets of a clique indicator: p^{-C(|t|,2)} iff clique
        for seed in 0..5u64 {
            let p = rat(1, 2);
            let g = BlockGraph::sample(3, 4, &p, seed).unwrap();
            let mode = RatMode::new(p.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            for size in 2..=4usize {
                let blocks: Vec<usize> = (0..size).collect();
                let verts: Vec<u32> = blocks
                    .iter()
                    .map(|&b| g.block_vertices(b).nth(rng.gen_range(0..3)).unwrap())
                    .collect();
                let pairs: Vec<(u32, u32)> = (0..size)
                    .flat_map(|i| ((i + 1)..size).map(move |j| (i, j)))
                    .map(|(i, j)| (verts[i], verts[j]))
                    .collect();
                let mut total = Rat::zero();
                for sel in 0u32..(1 << pairs.len()) {
                    let chosen: Vec<(u32, u32)> = pairs
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| sel >> b & 1 == 1)
                        .map(|(_, e)| *e)
                        .collect();
                    total += chi_edges(&g, &chosen, &mode).unwrap();
                }
                let clique = pairs.iter().all(|&(u, v)| g.adjacent(u, v));
                let expect = if clique {
                    p.pow(-((pairs.len()) as i32))
                } else {
                    Rat::zero()
                };
                assert_eq!(total, expect, "seed {seed} size {size}");
            }
        }
    }

    #[test]
    fn map_pattern_basics() {
        let _g = BlockGraph::empty(2, 3);
        let h = PatternGraph::from_edges(3, &[(0, 1)]).unwrap();
        let edges = map_pattern(&h, &[0, 1, 2], &[0, 2, 4]).unwrap();
        assert_eq!(edges, vec![(0, 2)]);
        assert!(map_pattern(&h, &[0, 2], &[0, 4]).is_err());
        let empty = PatternGraph::empty(3);
        assert!(map_pattern(&empty, &[0], &[0]).unwrap().is_empty());
    }

    #[test]
    fn char_sum_trivial_cases() {
        let p = rat(1, 2);
        let g = BlockGraph::complete(2, 2);
        let q = full(&g);
        let mode = RatMode::new(p).unwrap();
        // H edgeless -> |Q|
        let h = PatternGraph::empty(2);
        for strat in [Strategy::Naive, Strategy::Factorized] {
            assert_eq!(char_sum(&g, &q, &h, &mode, strat).unwrap(), rat_int(4));
        }
        // single edge, all 4 pairs present at p=1/2 -> +4; none present -> -4
        let h1 = PatternGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(
            char_sum(&g, &q, &h1, &mode, Strategy::Naive).unwrap(),
            rat_int(4)
        );
        let g0 = BlockGraph::empty(2, 2);
        let q0 = full(&g0);
        assert_eq!(
            char_sum(&g0, &q0, &h1, &mode, Strategy::Naive).unwrap(),
            rat_int(-4)
        );
    }

    #[test]
    fn strategies_agree_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(424242);
        for trial in 0..60 {
            let k = rng.gen_range(2..=5usize);
            let n = rng.gen_range(2..=5usize);
            let p = rat(rng.gen_range(1..=3), rng.gen_range(3..=4));
            let g = BlockGraph::sample(n, k, &p, trial).unwrap();
            let q = if trial % 2 == 0 {
                full(&g)
            } else {
                random_subrect(&g, &mut rng)
            };
            let mode = RatMode::new(p.clone()).unwrap();
            let pairs = (k * (k - 1) / 2) as u32;
            let mask =
                (rng.gen_range(0..(1u128 << pairs))) & ((1u128 << pairs) - 1);
            let h = PatternGraph::from_mask(k, mask);
            let naive = char_sum(&g, &q, &h, &mode, Strategy::Naive).unwrap();
            let fact = char_sum(&g, &q, &h, &mode, Strategy::Factorized).unwrap();
            assert_eq!(naive, fact, "trial {trial} h {h:?}");
            // grouped over the fiber of the core of h equals summed naive
            let info = patterns::core_of(&h);
            if info.f == h {
                let grouped = family_char_sum(&g, &q, &info.f, &info.estar, &mode).unwrap();
                let mut fiber_total = Rat::zero();
                for sel in 0u32..(1 << info.estar.len()) {
                    let mut hh = info.f;
                    for (b, &(x, y)) in info.estar.iter().enumerate() {
                        if sel >> b & 1 == 1 {
                            hh.add_edge(x as usize, y as usize);
                        }
                    }
                    fiber_total += char_sum(&g, &q, &hh, &mode, Strategy::Naive).unwrap();
                }
                assert_eq!(grouped, fiber_total, "trial {trial} fiber of {h:?}");
            }
        }
    }

    #[test]
    fn mu_d_trivial_values() {
        let p = rat(1, 2);
        // d = 0: only the edgeless pattern
        let g = BlockGraph::sample(3, 3, &p, 9).unwrap();
        let q = full(&g);
        assert_eq!(
            mu_d_exact(&g, &q, 0, &p, Strategy::Naive).unwrap(),
            Rat::one()
        );
        // k=2, n=1, d=1: 2 when the edge is present, 0 when absent
        let g1 = BlockGraph::complete(1, 2);
        assert_eq!(
            mu_d_exact(&g1, &Rectangle::full(&g1), 1, &p, Strategy::Naive).unwrap(),
            rat_int(2)
        );
        let g0 = BlockGraph::empty(1, 2);
        assert_eq!(
            mu_d_exact(&g0, &Rectangle::full(&g0), 1, &p, Strategy::Naive).unwrap(),
            rat_int(0)
        );
        // complete 3-partite at p=1/2, d=1: every character is 1, 7 patterns
        let gc = BlockGraph::complete(2, 3);
        assert_eq!(
            mu_d_exact(&gc, &Rectangle::full(&gc), 1, &p, Strategy::Grouped).unwrap(),
            rat_int(7)
        );
    }

    #[test]
    fn mu_strategies_agree_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let k = rng.gen_range(2..=4usize);
            let n = rng.gen_range(2..=4usize);
            let p = if trial % 2 == 0 { rat(1, 2) } else { rat(1, 3) };
            let d = rng.gen_range(0..=2usize);
            let g = BlockGraph::sample(n, k, &p, 1000 + trial).unwrap();
            let q = if trial % 3 == 0 {
                full(&g)
            } else {
                random_subrect(&g, &mut rng)
            };
            let a = mu_d_exact(&g, &q, d, &p, Strategy::Naive).unwrap();
            let b = mu_d_exact(&g, &q, d, &p, Strategy::Factorized).unwrap();
            let c = mu_d_exact(&g, &q, d, &p, Strategy::Grouped).unwrap();
            assert_eq!(a, b, "trial {trial}");
            assert_eq!(a, c, "trial {trial}");
        }
    }

    #[test]
    fn half_mode_matches_rational_mode() {
        let p = rat(1, 2);
        let g = BlockGraph::sample(4, 3, &p, 5).unwrap();
        let q = Rectangle::full(&g);
        assert!(half_mode_fits(&g, 2));
        let fast = mu_d_exact(&g, &q, 2, &p, Strategy::Grouped).unwrap();
        // Force the rational path through a non-dyadic-equal probability by
        // computing the raw sums manually.
        let mode = RatMode::new(p.clone()).unwrap();
        let raw = mu_sum(&g, &q, 2, &mode, Strategy::Grouped).unwrap();
        assert_eq!(fast, raw / n_pow_k(g.n(), g.k()));
    }

    #[test]
    fn mu_linearity_over_block_partition() {
        let p = rat(1, 2);
        let g = BlockGraph::sample(4, 3, &p, 21).unwrap();
        let q = Rectangle::full(&g);
        // split block 0 into two halves
        let side: Vec<u32> = g.block_vertices(0).collect();
        let (lo, hi) = side.split_at(2);
        let mut q1 = q.clone();
        q1.sides[0] = lo.to_vec();
        let mut q2 = q.clone();
        q2.sides[0] = hi.to_vec();
        for d in 0..=2 {
            let total = mu_d_exact(&g, &q, d, &p, Strategy::Factorized).unwrap();
            let a = mu_d_exact(&g, &q1, d, &p, Strategy::Factorized).unwrap();
            let b = mu_d_exact(&g, &q2, d, &p, Strategy::Factorized).unwrap();
            assert_eq!(total, a + b, "d={d}");
        }
    }

    #[test]
    fn mu_block_axiom_annihilation() {
        // sum_v mu_d(Q(m x_v)) over a block equals mu_d(Q(m)).
        use crate::formula::{ruled_out_rectangle, Monomial};
        let p = rat(1, 2);
        let g = BlockGraph::sample(3, 3, &p, 33).unwrap();
        let m = Monomial::new(vec![1], vec![6]).unwrap();
        let q = ruled_out_rectangle(&m, &g).unwrap();
        let total = mu_d_exact(&g, &q, 2, &p, Strategy::Factorized).unwrap();
        for block in [1usize, 2] {
            let mut sum = Rat::zero();
            for v in g.block_vertices(block) {
                let mv = match m.mul(&Monomial::var(v)) {
                    Some(mv) => mv,
                    None => continue,
                };
                if let Some(qv) = ruled_out_rectangle(&mv, &g) {
                    sum += mu_d_exact(&g, &qv, 2, &p, Strategy::Factorized).unwrap();
                }
            }
            assert_eq!(sum, total, "block {block}");
        }
    }

    #[test]
    fn expectation_over_seeds_matches_cardinality_ratio() {
        // Monte Carlo mean of mu_d(Q) within 5 standard errors of |Q| n^{-k}.
        let p = rat(1, 2);
        let n = 8;
        let k = 3;
        let seeds = 200u64;
        let mut vals = Vec::new();
        for seed in 0..seeds {
            let g = BlockGraph::sample(n, k, &p, seed).unwrap();
            let q = Rectangle::full(&g);
            let v = mu_d_exact(&g, &q, 2, &p, Strategy::Grouped).unwrap();
            vals.push(rat_to_f64(&v));
        }
        let mean: f64 = vals.iter().sum::<f64>() / seeds as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (seeds as f64 - 1.0);
        let se = (var / seeds as f64).sqrt();
        assert!(
            (mean - 1.0).abs() <= 5.0 * se.max(1e-9),
            "mean {mean} se {se}"
        );
    }

    #[test]
    fn rect_small_bound_values_and_inequality() {
        let p = rat(1, 2);
        let g = BlockGraph::sample(3, 3, &p, 2).unwrap();
        let q = Rectangle::full(&g);
        // d=0 -> |Q| n^{-k}
        assert_eq!(rect_small_bound(&q, 3, 3, 0, &p), Rat::one());
        // k=3, d=1, p=1/2 -> 25 |Q| n^{-3}
        assert_eq!(rect_small_bound(&q, 3, 3, 1, &p), rat_int(25));
        // the inequality holds on random rectangles (also checked by a
        // debug assertion inside mu_d_exact)
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for trial in 0..20 {
            let g = BlockGraph::sample(4, 3, &p, trial).unwrap();
            let q = random_subrect(&g, &mut rng);
            let v = mu_d_exact(&g, &q, 1, &p, Strategy::Factorized).unwrap();
            assert!(v.abs() <= rect_small_bound(&q, 4, 3, 1, &p));
        }
    }

    #[test]
    fn star_edge_counts() {
        // |S_[ell]| = ell(k - (ell+1)/2)
        for k in 2..=6usize {
            for ell in 0..=k {
                let e = leading_stars(k, ell).edge_count();
                assert_eq!(2 * e, ell * (2 * k - ell - 1), "k={k} ell={ell}");
            }
        }
        assert_eq!(star(4, 0).edge_count(), 3);
        assert_eq!(
            StarSpec {
                k: 5,
                center: 1,
                cutoff: 3
            }
            .graph()
            .edges_vec(),
            vec![(0, 1), (1, 2)]
        );
    }

    /// Builds a rectangle whose first `ell` blocks are adjacent singletons
    /// compatible with the split precondition.
    fn good_prefix_instance(
        n: usize,
        k: usize,
        ell: usize,
        p: &Rat,
        seed: u64,
    ) -> Option<(BlockGraph, Rectangle)> {
        let g = BlockGraph::sample(n, k, p, seed).ok()?;
        let mut prefix = Vec::new();
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
        let q = Rectangle::new(&g, (0..k).collect(), sides).ok()?;
        Some((g, q))
    }

    #[test]
    fn split_identity_is_exact() {
        let mut found = 0;
        for seed in 0..40u64 {
            let p = if seed % 2 == 0 { rat(1, 2) } else { rat(2, 3) };
            let (k, ell, d) = match seed % 3 {
                0 => (3, 1, 1),
                1 => (4, 2, 2),
                _ => (4, 1, 2),
            };
            let Some((g, q)) = good_prefix_instance(4, k, ell, &p, seed) else {
                continue;
            };
            found += 1;
            let report = split_main_boundary(&g, &q, ell, d, &p).unwrap();
            let mode = RatMode::new(p.clone()).unwrap();
            let full_sum = mu_sum(&g, &q, d, &mode, Strategy::Factorized).unwrap();
            assert_eq!(report.total, full_sum, "seed {seed}");
            // peeled-star count matches the closed form
            assert_eq!(
                2 * report.prefix_star_edges as usize,
                ell * (2 * k - ell - 1)
            );
            // boundary terms with target index >= d+2 (0-based) are empty
            for t in &report.boundary {
                if t.target >= d + 2 {
                    assert!(t.empty, "seed {seed} term ({}, {})", t.center, t.target);
                    assert!(t.value.is_zero());
                }
            }
        }
        assert!(found >= 10, "only {found} instances materialized");
    }

    #[test]
    fn split_ell_zero_is_plain_sum() {
        let p = rat(1, 2);
        let g = BlockGraph::sample(3, 3, &p, 4).unwrap();
        let q = Rectangle::full(&g);
        let report = split_main_boundary(&g, &q, 0, 1, &p).unwrap();
        assert!(report.boundary.is_empty());
        let mode = RatMode::new(p.clone()).unwrap();
        assert_eq!(
            report.main,
            mu_sum(&g, &q, 1, &mode, Strategy::Factorized).unwrap()
        );
    }

    #[test]
    fn split_rejects_bad_prefix() {
        let p = rat(1, 2);
        let g = BlockGraph::empty(2, 3);
        let q = Rectangle::full(&g);
        assert!(matches!(
            split_main_boundary(&g, &q, 1, 1, &p),
            Err(MeasureError::PrefixNotGood(_))
        ));
    }

    #[test]
    fn float_mode_tracks_exact_mode() {
        let p = rat(1, 2);
        let g = BlockGraph::sample(5, 3, &p, 77).unwrap();
        let q = Rectangle::full(&g);
        for strat in [Strategy::Naive, Strategy::Factorized, Strategy::Grouped] {
            let exact = rat_to_f64(&mu_d_exact(&g, &q, 2, &p, strat).unwrap());
            let float = mu_d_float(&g, &q, 2, 0.5, strat).unwrap();
            assert!(
                (exact - float).abs() < 1e-9,
                "strategy {strat:?}: {exact} vs {float}"
            );
        }
    }
}
