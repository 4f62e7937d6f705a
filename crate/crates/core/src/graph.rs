//! k-partite block graphs, the seeded random block model, tuples and rectangles.
//!
//! Vertices are global integers `0..k*n`; the block of vertex `v` is `v / n`.
//! Graphs are immutable after construction and all queries are re-entrant.

use crate::bitset::Bits;
use crate::rational::{format_rat, parse_rat, Rat};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(String),
    #[error("n and k must be at least 1")]
    EmptyShape,
    #[error("vertex {0} out of range for k={1}, n={2}")]
    VertexOutOfRange(u32, usize, usize),
    #[error("edge ({0}, {1}) lies inside a block")]
    IntraBlockEdge(u32, u32),
    #[error("edge list not sorted with u < v, or contains duplicates at ({0}, {1})")]
    BadEdgeOrder(u32, u32),
    #[error("tuple uses block {0} more than once")]
    RepeatedBlock(usize),
    #[error("tuple is empty")]
    EmptyTuple,
    #[error("rectangle side for block {0} contains vertex {1} from another block")]
    SideOutsideBlock(usize, u32),
    #[error("block set {0:?} is not a subset of the rectangle support")]
    NotASubsetOfSupport(Vec<usize>),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad rational: {0}")]
    Rational(#[from] crate::rational::RatParseError),
}

/// A k-partite graph with `k` blocks of `n` vertices and a symmetric adjacency
/// bitset matrix. Never contains intra-block edges or self-loops.
#[derive(Clone, Debug)]
pub struct BlockGraph {
    k: usize,
    n: usize,
    adj: Vec<Bits>,
    p_meta: Option<Rat>,
}

impl BlockGraph {
    pub fn empty(n: usize, k: usize) -> Self {
        let kn = n * k;
        BlockGraph {
            k,
            n,
            adj: vec![Bits::new(kn); kn],
            p_meta: None,
        }
    }

    /// Complete k-partite graph: every cross-block pair is an edge.
    pub fn complete(n: usize, k: usize) -> Self {
        let mut g = BlockGraph::empty(n, k);
        for u in 0..(n * k) as u32 {
            for v in (u + 1)..(n * k) as u32 {
                if g.block_of(u) != g.block_of(v) {
                    g.insert_edge(u, v);
                }
            }
        }
        g.p_meta = Some(Rat::one());
        g
    }

    /// Samples the block model: each cross-block pair is present independently
    /// with probability `p`, deterministically in `(n, k, p, seed)`.
    ///
    /// A uniform 64-bit draw is taken per cross-block pair in ascending `(u, v)`
    /// order and compared against `ceil(p * 2^64)`, so identical inputs yield
    /// identical graphs on every platform.
    pub fn sample(n: usize, k: usize, p: &Rat, seed: u64) -> Result<Self, GraphError> {
        if n == 0 || k == 0 {
            return Err(GraphError::EmptyShape);
        }
        if p.is_negative() || *p > Rat::one() {
            return Err(GraphError::ProbabilityOutOfRange(format_rat(p)));
        }
        // threshold = ceil(p * 2^64), clamped to 2^64 (as u128) so p = 1 always hits.
        let two64 = BigInt::from(1u128 << 64);
        let threshold_big = (p.numer() * &two64 + p.denom() - BigInt::one()) / p.denom();
        let threshold: u128 = u128::try_from(threshold_big.magnitude().clone())
            .unwrap_or(1u128 << 64)
            .min(1u128 << 64);

        let mut g = BlockGraph::empty(n, k);
        g.p_meta = Some(p.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kn = (n * k) as u32;
        for u in 0..kn {
            for v in (u + 1)..kn {
                if g.block_of(u) == g.block_of(v) {
                    continue;
                }
                let draw = rng.next_u64() as u128;
                if draw < threshold {
                    g.insert_edge(u, v);
                }
            }
        }
        Ok(g)
    }

    fn insert_edge(&mut self, u: u32, v: u32) {
        debug_assert_ne!(self.block_of(u), self.block_of(v));
        self.adj[u as usize].set(v as usize);
        self.adj[v as usize].set(u as usize);
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.k * self.n
    }

    pub fn p_meta(&self) -> Option<&Rat> {
        self.p_meta.as_ref()
    }

    #[inline]
    pub fn block_of(&self, v: u32) -> usize {
        v as usize / self.n
    }

    #[inline]
    pub fn adjacent(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].get(v as usize)
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &Bits {
        &self.adj[v as usize]
    }

    pub fn block_vertices(&self, i: usize) -> std::ops::Range<u32> {
        (i * self.n) as u32..((i + 1) * self.n) as u32
    }

    pub fn block_bits(&self, i: usize) -> Bits {
        Bits::from_indices(self.num_vertices(), self.block_vertices(i))
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for u in 0..self.num_vertices() as u32 {
            for v in self.adj[u as usize].iter_ones() {
                if (v as u32) > u {
                    out.push((u, v as u32));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|b| b.count_ones()).sum::<usize>() / 2
    }

    /// Vertices of `target` adjacent to every vertex of `t`.
    pub fn common_neighborhood(&self, t: &Tuple, target: &Bits) -> Result<Bits, GraphError> {
        if t.vertices().is_empty() {
            return Err(GraphError::EmptyTuple);
        }
        let mut acc = target.clone();
        for &v in t.vertices() {
            acc.and_assign(&self.adj[v as usize]);
        }
        Ok(acc)
    }

    /// Common neighborhood of a raw vertex list within `target`; the empty
    /// list yields `target` itself.
    pub fn common_neighborhood_of(&self, vs: &[u32], target: &Bits) -> Bits {
        let mut acc = target.clone();
        for &v in vs {
            acc.and_assign(&self.adj[v as usize]);
        }
        acc
    }

    pub fn is_clique(&self, t: &Tuple) -> bool {
        let vs = t.vertices();
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                if !self.adjacent(vs[i], vs[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// Whether some full k-tuple induces a clique. Exhaustive; intended for
    /// the small instances the lab works with.
    pub fn has_transversal_clique(&self) -> bool {
        let full = Rectangle::full(self);
        let mut found = false;
        full.for_each_tuple(&mut |t| {
            if !found {
                let tup = Tuple::new(self, t.to_vec()).expect("full rectangle tuple");
                if self.is_clique(&tup) {
                    found = true;
                }
            }
        });
        found
    }

    pub fn to_file(&self, path: &Path) -> Result<(), GraphError> {
        let file = GraphFile {
            k: self.k,
            n: self.n,
            p: self.p_meta.as_ref().map(format_rat),
            edges: self.edges(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        let mut g = BlockGraph::empty(file.n, file.k);
        g.p_meta = match file.p {
            Some(s) => Some(parse_rat(&s)?),
            None => None,
        };
        let kn = (file.n * file.k) as u32;
        let mut last: Option<(u32, u32)> = None;
        for &(u, v) in &file.edges {
            if u >= kn || v >= kn {
                return Err(GraphError::VertexOutOfRange(u.max(v), file.k, file.n));
            }
            if u >= v {
                return Err(GraphError::BadEdgeOrder(u, v));
            }
            if let Some(prev) = last {
                if prev >= (u, v) {
                    return Err(GraphError::BadEdgeOrder(u, v));
                }
            }
            if g.block_of(u) == g.block_of(v) {
                return Err(GraphError::IntraBlockEdge(u, v));
            }
            g.insert_edge(u, v);
            last = Some((u, v));
        }
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    k: usize,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<String>,
    edges: Vec<(u32, u32)>,
}

/// An ordered vertex list with one vertex per block of a declared block set,
/// stored sorted by block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tuple {
    vertices: Vec<u32>,
    blocks: Vec<usize>,
}

impl Tuple {
    pub fn new(g: &BlockGraph, mut vertices: Vec<u32>) -> Result<Self, GraphError> {
        for &v in &vertices {
            if v as usize >= g.num_vertices() {
                return Err(GraphError::VertexOutOfRange(v, g.k(), g.n()));
            }
        }
        vertices.sort_unstable_by_key(|&v| g.block_of(v));
        let blocks: Vec<usize> = vertices.iter().map(|&v| g.block_of(v)).collect();
        for w in blocks.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::RepeatedBlock(w[0]));
            }
        }
        Ok(Tuple { vertices, blocks })
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Projection onto a block set.
    pub fn project(&self, blocks: &[usize]) -> Tuple {
        let mut vs = Vec::new();
        let mut bs = Vec::new();
        for (v, b) in self.vertices.iter().zip(&self.blocks) {
            if blocks.contains(b) {
                vs.push(*v);
                bs.push(*b);
            }
        }
        Tuple {
            vertices: vs,
            blocks: bs,
        }
    }
}

/// A product set of per-block vertex subsets over a declared block set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rectangle {
    /// Ascending block indices with a declared side.
    pub blocks: Vec<usize>,
    /// Sorted vertex lists, parallel to `blocks`.
    pub sides: Vec<Vec<u32>>,
}

impl Rectangle {
    /// The full rectangle `V_1 x ... x V_k` of a graph.
    pub fn full(g: &BlockGraph) -> Self {
        Rectangle {
            blocks: (0..g.k()).collect(),
            sides: (0..g.k()).map(|i| g.block_vertices(i).collect()).collect(),
        }
    }

    pub fn new(g: &BlockGraph, blocks: Vec<usize>, mut sides: Vec<Vec<u32>>) -> Result<Self, GraphError> {
        assert_eq!(blocks.len(), sides.len());
        for (b, side) in blocks.iter().zip(sides.iter_mut()) {
            side.sort_unstable();
            side.dedup();
            for &v in side.iter() {
                if v as usize >= g.num_vertices() {
                    return Err(GraphError::VertexOutOfRange(v, g.k(), g.n()));
                }
                if g.block_of(v) != *b {
                    return Err(GraphError::SideOutsideBlock(*b, v));
                }
            }
        }
        Ok(Rectangle { blocks, sides })
    }

    pub fn support(&self) -> &[usize] {
        &self.blocks
    }

    pub fn is_full_support(&self, k: usize) -> bool {
        self.blocks.len() == k && self.blocks.iter().copied().eq(0..k)
    }

    pub fn side(&self, block: usize) -> Option<&[u32]> {
        self.blocks
            .iter()
            .position(|&b| b == block)
            .map(|i| self.sides[i].as_slice())
    }

    /// Projection onto a subset of the declared block set. Projecting onto the
    /// empty set yields the empty-support rectangle of cardinality 1.
    pub fn project(&self, blocks: &[usize]) -> Result<Rectangle, GraphError> {
        let mut out_blocks = Vec::new();
        let mut out_sides = Vec::new();
        for &b in blocks {
            match self.blocks.iter().position(|&x| x == b) {
                Some(i) => {
                    out_blocks.push(b);
                    out_sides.push(self.sides[i].clone());
                }
                None => return Err(GraphError::NotASubsetOfSupport(blocks.to_vec())),
            }
        }
        Ok(Rectangle {
            blocks: out_blocks,
            sides: out_sides,
        })
    }

    /// Exact cardinality: the product of side sizes (1 for empty support).
    pub fn cardinality(&self) -> BigUint {
        let mut acc = BigUint::one();
        for s in &self.sides {
            acc *= BigUint::from(s.len());
        }
        acc
    }

    pub fn cardinality_u128(&self) -> Option<u128> {
        let mut acc: u128 = 1;
        for s in &self.sides {
            acc = acc.checked_mul(s.len() as u128)?;
        }
        Some(acc)
    }

    pub fn is_empty(&self) -> bool {
        self.sides.iter().any(|s| s.is_empty())
    }

    pub fn contains(&self, vertices: &[u32], g: &BlockGraph) -> bool {
        if vertices.len() != self.blocks.len() {
            return false;
        }
        let mut sorted = vertices.to_vec();
        sorted.sort_unstable_by_key(|&v| g.block_of(v));
        for (i, &v) in sorted.iter().enumerate() {
            if g.block_of(v) != self.blocks[i] || self.sides[i].binary_search(&v).is_err() {
                return false;
            }
        }
        true
    }

    /// Odometer enumeration of all tuples, ascending per side. The callback
    /// receives vertices ordered like `blocks`.
    pub fn for_each_tuple(&self, f: &mut dyn FnMut(&[u32])) {
        if self.is_empty() {
            return;
        }
        let mut idx = vec![0usize; self.sides.len()];
        let mut current: Vec<u32> = self.sides.iter().map(|s| s[0]).collect();
        loop {
            f(&current);
            let mut pos = self.sides.len();
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.sides[pos].len() {
                    current[pos] = self.sides[pos][idx[pos]];
                    break;
                }
                idx[pos] = 0;
                current[pos] = self.sides[pos][0];
            }
        }
    }

    pub fn side_bits(&self, kn: usize, block: usize) -> Option<Bits> {
        self.side(block)
            .map(|s| Bits::from_indices(kn, s.iter().copied()))
    }
}
