//! Pattern graphs on block labels: exact vertex cover, the canonical core map,
//! optional-edge sets, boundaries, enumeration and counting audits.
//!
//! Labels run `0..k` with `k <= 16`; edge sets live in a triangular `u128`
//! bitset, vertex sets in `u16` masks.

use crate::guards;
use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

pub const MAX_LABELS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("pattern graphs support at most {MAX_LABELS} labels, got {0}")]
    TooManyLabels(usize),
    #[error("enumeration over k={0} labels exceeds the guard; raise SA_LAB_GUARD to override")]
    EnumerationGuard(usize),
    #[error("graph is not a fixed point of the core map")]
    NotACore,
    #[error("edge ({0}, {1}) out of range or degenerate")]
    BadEdge(u8, u8),
}

/// Index of pair `{i, j}` (`i < j`) in the triangular edge bitset.
#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

/// Simple undirected graph on labeled vertices `0..k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternGraph {
    k: usize,
    edges: u128,
}

impl std::fmt::Debug for PatternGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PatternGraph(k={}, edges={:?})", self.k, self.edges_vec())
    }
}

impl PatternGraph {
    pub fn empty(k: usize) -> Self {
        assert!(k <= MAX_LABELS);
        PatternGraph { k, edges: 0 }
    }

    pub fn from_edges(k: usize, edges: &[(u8, u8)]) -> Result<Self, PatternError> {
        if k > MAX_LABELS {
            return Err(PatternError::TooManyLabels(k));
        }
        let mut g = PatternGraph::empty(k);
        for &(a, b) in edges {
            if a == b || a as usize >= k || b as usize >= k {
                return Err(PatternError::BadEdge(a, b));
            }
            g.add_edge(a as usize, b as usize);
        }
        Ok(g)
    }

    pub fn from_mask(k: usize, edges: u128) -> Self {
        assert!(k <= MAX_LABELS);
        debug_assert_eq!(edges >> (k * (k.max(1) - 1) / 2), 0);
        PatternGraph { k, edges }
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn edge_mask(&self) -> u128 {
        self.edges
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        (self.edges >> pair_index(i, j)) & 1 == 1
    }

    #[inline]
    pub fn add_edge(&mut self, i: usize, j: usize) {
        debug_assert!(i != j && i < self.k && j < self.k);
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.edges |= 1u128 << pair_index(i, j);
    }

    pub fn with_edge(mut self, i: usize, j: usize) -> Self {
        self.add_edge(i, j);
        self
    }

    pub fn union(&self, other: &PatternGraph) -> PatternGraph {
        debug_assert_eq!(self.k, other.k);
        PatternGraph {
            k: self.k,
            edges: self.edges | other.edges,
        }
    }

    /// Edge-set difference (edges of `self` not in `other`).
    pub fn minus(&self, other: &PatternGraph) -> PatternGraph {
        debug_assert_eq!(self.k, other.k);
        PatternGraph {
            k: self.k,
            edges: self.edges & !other.edges,
        }
    }

    pub fn is_edge_subset_of(&self, other: &PatternGraph) -> bool {
        self.edges & !other.edges == 0
    }

    pub fn edge_count(&self) -> usize {
        self.edges.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.edges == 0
    }

    pub fn edges_vec(&self) -> Vec<(u8, u8)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for j in 1..self.k {
            for i in 0..j {
                if (self.edges >> pair_index(i, j)) & 1 == 1 {
                    out.push((i as u8, j as u8));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Neighbor mask of a vertex.
    pub fn neighbors(&self, v: usize) -> u16 {
        let mut m = 0u16;
        for u in 0..self.k {
            if u != v && self.has_edge(u, v) {
                m |= 1 << u;
            }
        }
        m
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count_ones() as usize
    }

    /// Mask of non-isolated vertices.
    pub fn support(&self) -> u16 {
        let mut m = 0u16;
        for j in 1..self.k {
            for i in 0..j {
                if (self.edges >> pair_index(i, j)) & 1 == 1 {
                    m |= 1 << i;
                    m |= 1 << j;
                }
            }
        }
        m
    }

    pub fn support_size(&self) -> usize {
        self.support().count_ones() as usize
    }

    /// Induced subgraph on a vertex mask (same label space).
    pub fn induced(&self, mask: u16) -> PatternGraph {
        let mut g = PatternGraph::empty(self.k);
        for (i, j) in self.edges_vec() {
            if mask >> i & 1 == 1 && mask >> j & 1 == 1 {
                g.add_edge(i as usize, j as usize);
            }
        }
        g
    }

    /// Edges with at least one endpoint in `mask` removed.
    pub fn without_vertices(&self, mask: u16) -> PatternGraph {
        self.induced(!mask)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    k: usize,
    edges: Vec<(u8, u8)>,
}

impl Serialize for PatternGraph {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        PatternFile {
            k: self.k,
            edges: self.edges_vec(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PatternGraph {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let f = PatternFile::deserialize(de)?;
        PatternGraph::from_edges(f.k, &f.edges).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Vertex cover
// ---------------------------------------------------------------------------

/// Exact minimum vertex cover size, by branch and bound on a max-degree vertex.
pub fn vc_number(h: &PatternGraph) -> usize {
    fn go(h: &PatternGraph, best: usize) -> usize {
        if h.is_empty() {
            return 0;
        }
        if best == 0 {
            // Cannot cover a non-empty graph with 0 vertices; sentinel.
            return usize::MAX;
        }
        let v = (0..h.k)
            .max_by_key(|&v| h.degree(v))
            .expect("non-empty graph");
        let deg = h.degree(v);
        debug_assert!(deg >= 1);
        // Branch 1: v in the cover.
        let with_v = go(&h.without_vertices(1 << v), best - 1).saturating_add(1);
        // Branch 2: all neighbors of v in the cover.
        let nb = h.neighbors(v);
        let without_v = go(&h.without_vertices(nb), best.saturating_sub(deg)).saturating_add(deg);
        with_v.min(without_v)
    }
    go(h, h.k)
}

/// Minimum vertex cover size subject to `forced_in` being inside the cover and
/// `forced_out` staying outside. Returns `None` if no such cover exists.
pub fn vc_constrained(h: &PatternGraph, forced_in: u16, forced_out: u16) -> Option<usize> {
    if forced_in & forced_out != 0 {
        return None;
    }
    // Edges covered by forced_in vanish; any edge within forced_out is fatal;
    // an edge from forced_out to an undecided vertex forces that vertex in.
    let mut inside = forced_in;
    let mut residual = h.without_vertices(inside);
    loop {
        let mut grew = false;
        for (i, j) in residual.edges_vec() {
            let (i, j) = (i as usize, j as usize);
            let i_out = forced_out >> i & 1 == 1;
            let j_out = forced_out >> j & 1 == 1;
            if i_out && j_out {
                return None;
            }
            if i_out && inside >> j & 1 == 0 {
                inside |= 1 << j;
                grew = true;
            }
            if j_out && inside >> i & 1 == 0 {
                inside |= 1 << i;
                grew = true;
            }
        }
        if !grew {
            break;
        }
        residual = h.without_vertices(inside);
    }
    Some((inside.count_ones() as usize) + vc_number(&residual))
}

/// The lexicographically first minimum vertex cover, under the ascending
/// sequence order (equivalently: the smaller set owns the smallest element of
/// the symmetric difference). Computed by ascending greedy inclusion backed by
/// constrained branch and bound.
pub fn lex_first_min_vc(h: &PatternGraph) -> u16 {
    let target = vc_number(h);
    let mut chosen = 0u16;
    let mut rejected = 0u16;
    for v in 0..h.k {
        match vc_constrained(h, chosen | (1 << v), rejected) {
            Some(size) if size == target => chosen |= 1 << v,
            _ => rejected |= 1 << v,
        }
    }
    debug_assert_eq!(chosen.count_ones() as usize, target);
    chosen
}

/// Any minimum vertex cover contains every vertex of degree >= vc + 1.
pub fn high_degree_forced(h: &PatternGraph) -> u16 {
    let t = vc_number(h);
    let mut m = 0u16;
    for v in 0..h.k {
        if h.degree(v) >= t + 1 {
            m |= 1 << v;
        }
    }
    m
}

// ---------------------------------------------------------------------------
// Matchings
// ---------------------------------------------------------------------------

/// Greedy maximal matching in fixed ascending edge order.
pub fn maximal_matching(h: &PatternGraph) -> Vec<(u8, u8)> {
    let mut used = 0u16;
    let mut out = Vec::new();
    for (i, j) in h.edges_vec() {
        if used >> i & 1 == 0 && used >> j & 1 == 0 {
            used |= (1 << i) | (1 << j);
            out.push((i, j));
        }
    }
    out
}

/// Maximum bipartite matching between `left` (list of vertices) and the
/// vertex set `right_mask`, along edges of `h`. Returns matched pairs
/// `(left_vertex, right_vertex)` covering a maximum set of `left`.
pub fn matching_into(h: &PatternGraph, left: &[u8], right_mask: u16) -> Vec<(u8, u8)> {
    let mut match_right: [i8; MAX_LABELS] = [-1; MAX_LABELS]; // right vertex -> left slot
    fn try_augment(
        h: &PatternGraph,
        left: &[u8],
        slot: usize,
        right_mask: u16,
        seen: &mut u16,
        match_right: &mut [i8; MAX_LABELS],
    ) -> bool {
        let v = left[slot] as usize;
        for r in 0..MAX_LABELS {
            if right_mask >> r & 1 == 0 || *seen >> r & 1 == 1 || !h.has_edge(v, r) {
                continue;
            }
            *seen |= 1 << r;
            if match_right[r] < 0
                || try_augment(h, left, match_right[r] as usize, right_mask, seen, match_right)
            {
                match_right[r] = slot as i8;
                return true;
            }
        }
        false
    }
    for slot in 0..left.len() {
        let mut seen = 0u16;
        try_augment(h, left, slot, right_mask, &mut seen, &mut match_right);
    }
    let mut out = Vec::new();
    for r in 0..MAX_LABELS {
        if match_right[r] >= 0 {
            out.push((left[match_right[r] as usize], r as u8));
        }
    }
    out.sort_unstable();
    out
}

/// Whether every vertex of `left_mask` can be matched into `right_mask`.
pub fn matchable(h: &PatternGraph, left_mask: u16, right_mask: u16) -> bool {
    let left: Vec<u8> = (0..MAX_LABELS as u8)
        .filter(|&v| left_mask >> v & 1 == 1)
        .collect();
    matching_into(h, &left, right_mask).len() == left.len()
}

// ---------------------------------------------------------------------------
// The core map
// ---------------------------------------------------------------------------

/// Output of the core map: the core graph together with the witness structure
/// that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreInfo {
    /// The core itself (a vertex-induced subgraph of the input).
    pub f: PatternGraph,
    /// Lex-first minimum vertex cover of the input.
    pub w: u16,
    /// First matched set outside `w`.
    pub u1: u16,
    /// Second matched set outside `w` and `u1`.
    pub u2: u16,
    /// Matching covering `u1` into `w`.
    pub m1: Vec<(u8, u8)>,
    /// Matching covering `u2` into `w`.
    pub m2: Vec<(u8, u8)>,
    /// Optional edges: the fiber of `f` is exactly `f` plus any subset.
    pub estar: Vec<(u8, u8)>,
}

/// Lex-first maximal subset of `candidates` (as a mask) that can be fully
/// matched into `w` along edges of `h`, by ascending greedy inclusion.
fn lex_first_matched_set(h: &PatternGraph, candidates: u16, w: u16) -> u16 {
    let mut picked = 0u16;
    for v in 0..h.k {
        if candidates >> v & 1 == 0 {
            continue;
        }
        if matchable(h, picked | (1 << v), w) {
            picked |= 1 << v;
        }
    }
    picked
}

/// The canonical core of `h`: the subgraph induced on `W ∪ U1 ∪ U2` where `W`
/// is the lex-first minimum vertex cover and `U1`, `U2` are the lex-first
/// maximal sets matchable into `W`.
pub fn core_of(h: &PatternGraph) -> CoreInfo {
    let w = lex_first_min_vc(h);
    let all = ((1u32 << h.k) - 1) as u16;
    let u1 = lex_first_matched_set(h, all & !w, w);
    let u2 = lex_first_matched_set(h, all & !w & !u1, w);
    let f = h.induced(w | u1 | u2);
    let m1_left: Vec<u8> = (0..h.k as u8).filter(|&v| u1 >> v & 1 == 1).collect();
    let m2_left: Vec<u8> = (0..h.k as u8).filter(|&v| u2 >> v & 1 == 1).collect();
    let m1 = matching_into(h, &m1_left, w);
    let m2 = matching_into(h, &m2_left, w);
    debug_assert_eq!(m1.len(), m1_left.len());
    debug_assert_eq!(m2.len(), m2_left.len());
    debug_assert!(f.support_size() <= 3 * vc_number(&f));
    let estar = estar_from_parts(&f, w, u1, u2);
    CoreInfo {
        f,
        w,
        u1,
        u2,
        m1,
        m2,
        estar,
    }
}

/// `A_U`: vertices `w` of `W` such that `U` still matches into `W \ {w}`.
fn a_set(f: &PatternGraph, u_mask: u16, w: u16) -> u16 {
    let mut out = 0u16;
    for cand in 0..MAX_LABELS {
        if w >> cand & 1 == 0 {
            continue;
        }
        if matchable(f, u_mask, w & !(1 << cand)) {
            out |= 1 << cand;
        }
    }
    out
}

fn estar_from_parts(f: &PatternGraph, w: u16, u1: u16, u2: u16) -> Vec<(u8, u8)> {
    let support = f.support();
    let mut out = Vec::new();
    for v in 0..f.k {
        if support >> v & 1 == 1 {
            continue;
        }
        let below = ((1u32 << v) - 1) as u16;
        let a1 = a_set(f, u1 & below, w);
        let a2 = a_set(f, u2 & below, w);
        let allowed = w & !(a1 | a2);
        for t in 0..f.k {
            if allowed >> t & 1 == 1 {
                let (a, b) = if v < t { (v as u8, t as u8) } else { (t as u8, v as u8) };
                out.push((a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Optional-edge set via the direct construction: per outside vertex in
/// ascending order, the cover vertices whose removal does not break the
/// matchings seen so far.
pub fn estar_explicit(f: &PatternGraph) -> Result<Vec<(u8, u8)>, PatternError> {
    let info = core_of(f);
    if info.f != *f {
        return Err(PatternError::NotACore);
    }
    Ok(info.estar)
}

/// Optional-edge set by brute force over the fiber: the union of `H \ F` over
/// every supergraph `H` of `F` on `k` labels whose core is `F`.
pub fn estar_implicit(f: &PatternGraph, k: usize) -> Result<Vec<(u8, u8)>, PatternError> {
    if f.k() != k {
        return Err(PatternError::BadEdge(0, 0));
    }
    let info = core_of(f);
    if info.f != *f {
        return Err(PatternError::NotACore);
    }
    let total_pairs = k * (k.max(1) - 1) / 2;
    let free: Vec<usize> = (0..total_pairs)
        .filter(|&p| (f.edge_mask() >> p) & 1 == 0)
        .collect();
    if free.len() as u64 > 2 * guards::limit(guards::ENUM_LABELS * (guards::ENUM_LABELS - 1) / 2) {
        return Err(PatternError::EnumerationGuard(k));
    }
    let mut union = 0u128;
    for sub in 0u64..(1u64 << free.len()) {
        let mut extra = 0u128;
        for (b, &p) in free.iter().enumerate() {
            if sub >> b & 1 == 1 {
                extra |= 1u128 << p;
            }
        }
        let h = PatternGraph::from_mask(k, f.edge_mask() | extra);
        if core_of(&h).f == *f {
            union |= extra;
        }
    }
    Ok(PatternGraph::from_mask(k, union).edges_vec())
}

/// Whether `h` sits at the threshold where adding `e` raises the cover number
/// from `i` to `i + 1`.
pub fn in_boundary(h: &PatternGraph, e: (u8, u8), i: usize) -> bool {
    if e.0 == e.1 {
        return false;
    }
    if vc_number(h) != i {
        return false;
    }
    let with_e = h.with_edge(e.0 as usize, e.1 as usize);
    vc_number(&with_e) == i + 1
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnumMode {
    /// All graphs on `k` labels with vertex cover at most `d`.
    AllWithVcAtMost,
    /// Fixed points of the core map with vertex cover at most `d`.
    CoresOnly,
}

/// Enumerates pattern graphs in deterministic (edge-mask ascending) order.
pub fn enumerate_patterns(k: usize, d: usize, mode: EnumMode) -> Result<Vec<PatternGraph>, PatternError> {
    if k > MAX_LABELS {
        return Err(PatternError::TooManyLabels(k));
    }
    let pairs = k * (k.max(1) - 1) / 2;
    let guard_pairs = {
        let g = guards::limit(guards::ENUM_LABELS);
        (g * (g.max(1) - 1) / 2) as usize
    };
    match mode {
        EnumMode::AllWithVcAtMost => {
            if pairs > guard_pairs {
                return Err(PatternError::EnumerationGuard(k));
            }
            let mut out = Vec::new();
            for mask in 0u128..(1u128 << pairs) {
                let g = PatternGraph::from_mask(k, mask);
                if vc_number(&g) <= d {
                    out.push(g);
                }
            }
            Ok(out)
        }
        EnumMode::CoresOnly => {
            // Supports are capped at 3d non-isolated vertices; enumerate
            // support sets when that is cheaper than the full mask space.
            let cap = (3 * d).min(k);
            let full_cost = if pairs < 127 { 1u128 << pairs } else { u128::MAX };
            let mut out: Vec<PatternGraph>;
            if full_cost <= 1u128 << guard_pairs.min(127) {
                out = Vec::new();
                for mask in 0u128..full_cost {
                    let g = PatternGraph::from_mask(k, mask);
                    if vc_number(&g) <= d && core_of(&g).f == g {
                        out.push(g);
                    }
                }
            } else {
                let sup_pairs = cap * (cap.max(1) - 1) / 2;
                if sup_pairs > guard_pairs || cap > 12 {
                    return Err(PatternError::EnumerationGuard(k));
                }
                let mut seen = std::collections::HashSet::new();
                out = Vec::new();
                // All support sets of size <= cap, graphs with no isolated
                // support vertex.
                let mut supports: Vec<Vec<usize>> = Vec::new();
                fn pick(k: usize, cap: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                    out.push(cur.clone());
                    if cur.len() == cap {
                        return;
                    }
                    for v in start..k {
                        cur.push(v);
                        pick(k, cap, v + 1, cur, out);
                        cur.pop();
                    }
                }
                pick(k, cap, 0, &mut Vec::new(), &mut supports);
                for sup in supports {
                    let s = sup.len();
                    let spairs = s * (s.max(1) - 1) / 2;
                    for mask in 0u64..(1u64 << spairs) {
                        // Lift a graph on `s` labels onto the chosen support.
                        let mut g = PatternGraph::empty(k);
                        let mut bit = 0;
                        for j in 1..s {
                            for i in 0..j {
                                if mask >> bit & 1 == 1 {
                                    g.add_edge(sup[i], sup[j]);
                                }
                                bit += 1;
                            }
                        }
                        // Exact support requirement avoids duplicates.
                        if g.support() != sup.iter().fold(0u16, |m, &v| m | 1 << v) {
                            continue;
                        }
                        if vc_number(&g) <= d && core_of(&g).f == g && seen.insert(g.edge_mask()) {
                            out.push(g);
                        }
                    }
                }
                out.sort_unstable_by_key(|g| g.edge_mask());
            }
            Ok(out)
        }
    }
}

type PatternCache = Mutex<HashMap<(usize, usize, EnumMode), Arc<Vec<PatternGraph>>>>;
static PATTERN_CACHE: OnceLock<PatternCache> = OnceLock::new();
type CoreCache = Mutex<HashMap<(usize, usize), Arc<Vec<CoreInfo>>>>;
static CORE_CACHE: OnceLock<CoreCache> = OnceLock::new();

/// Memoized family of graphs with vertex cover at most `d` on `k` labels.
pub fn patterns_vc_at_most(k: usize, d: usize) -> Result<Arc<Vec<PatternGraph>>, PatternError> {
    let cache = PATTERN_CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&(k, d, EnumMode::AllWithVcAtMost)) {
        return Ok(hit.clone());
    }
    let v = Arc::new(enumerate_patterns(k, d, EnumMode::AllWithVcAtMost)?);
    cache
        .lock()
        .unwrap()
        .insert((k, d, EnumMode::AllWithVcAtMost), v.clone());
    Ok(v)
}

/// Memoized cores (with their witness structure) of vertex cover at most `d`.
pub fn cores_vc_at_most(k: usize, d: usize) -> Result<Arc<Vec<CoreInfo>>, PatternError> {
    let cache = CORE_CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&(k, d)) {
        return Ok(hit.clone());
    }
    let graphs = enumerate_patterns(k, d, EnumMode::CoresOnly)?;
    let infos: Vec<CoreInfo> = graphs.iter().map(core_of).collect();
    let v = Arc::new(infos);
    cache.lock().unwrap().insert((k, d), v.clone());
    Ok(v)
}

// ---------------------------------------------------------------------------
// Counting audit
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub k: usize,
    pub b: usize,
    pub c: usize,
    pub count: u64,
    /// Bound `2^(c log2 k + b(c - (b+1)/2))`, reported as a string since the
    /// exponent may be half-integral.
    pub bound: String,
    pub pass: bool,
}

/// Counts `{H : vc(H) = b, |V(E(H))| <= c}` for all `(b, c)` and compares
/// against the counting bound. The comparison `count <= 2^(c log2 k + b(c-(b+1)/2))`
/// is performed exactly by squaring: `count^2 <= k^(2c) * 2^(b(2c-b-1))`.
pub fn counting_audit(k: usize) -> Result<Vec<AuditRow>, PatternError> {
    let all = enumerate_patterns(k, k, EnumMode::AllWithVcAtMost)?; // every graph
    let mut rows = Vec::new();
    for b in 0..=k {
        for c in 0..=k {
            let count = all
                .iter()
                .filter(|h| vc_number(h) == b && h.support_size() <= c)
                .count() as u64;
            let exp = b as i64 * (2 * c as i64 - b as i64 - 1);
            let pass = if count == 0 {
                true
            } else {
                let lhs = BigUint::from(count) * BigUint::from(count);
                let rhs = BigUint::from(k as u64).pow(2 * c as u32);
                if exp >= 0 {
                    lhs <= rhs * (BigUint::one() << exp as u64)
                } else {
                    lhs * (BigUint::one() << (-exp) as u64) <= rhs
                }
            };
            let exp_term = b as f64 * (c as f64 - (b as f64 + 1.0) / 2.0);
            let exp_term = if exp_term == 0.0 { 0.0 } else { exp_term };
            let bound = format!("2^({c} log2({k}) + {exp_term})");
            rows.push(AuditRow {
                k,
                b,
                c,
                count,
                bound,
                pass,
            });
        }
    }
    Ok(rows)
}
