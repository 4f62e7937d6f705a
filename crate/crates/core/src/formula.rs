//! The k-clique polynomial system and the monomial/rectangle correspondence.
//!
//! Variables come in twin pairs `x_v`, `x̄_v` for every vertex `v`; Boolean and
//! negation axioms are never materialized, all algebra is done modulo that
//! ideal. A monomial is a product of positive and negated variables over
//! disjoint vertex sets; products that mention both signs of one variable are
//! the zero function and are normalized away.

use crate::graph::{BlockGraph, Rectangle};
use crate::rational::{format_rat, parse_rat, Rat};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("monomial mentions vertex {0} both positively and negated")]
    ClashingLiteral(u32),
    #[error("vertex {0} out of range for {1} variables")]
    VertexOutOfRange(u32, usize),
    #[error("rectangle must have full support over all {0} blocks")]
    NotFullSupport(usize),
    #[error("rectangle side for block {0} is empty")]
    EmptySide(usize),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad rational: {0}")]
    Rational(#[from] crate::rational::RatParseError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Canonical nonzero monomial: `pos` and `neg` are disjoint sorted vertex
/// sets. The all-empty monomial is the constant 1.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial {
    pos: Vec<u32>,
    neg: Vec<u32>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn new(mut pos: Vec<u32>, mut neg: Vec<u32>) -> Result<Self, FormulaError> {
        pos.sort_unstable();
        pos.dedup();
        neg.sort_unstable();
        neg.dedup();
        for v in &pos {
            if neg.binary_search(v).is_ok() {
                return Err(FormulaError::ClashingLiteral(*v));
            }
        }
        Ok(Monomial { pos, neg })
    }

    pub fn var(v: u32) -> Self {
        Monomial {
            pos: vec![v],
            neg: vec![],
        }
    }

    pub fn nvar(v: u32) -> Self {
        Monomial {
            pos: vec![],
            neg: vec![v],
        }
    }

    pub fn pos(&self) -> &[u32] {
        &self.pos
    }

    pub fn neg(&self) -> &[u32] {
        &self.neg
    }

    pub fn degree(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn is_one(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty()
    }

    /// Product modulo the Boolean ideal: `None` when a variable appears with
    /// both signs (the zero function).
    pub fn mul(&self, other: &Monomial) -> Option<Monomial> {
        let mut pos = self.pos.clone();
        pos.extend_from_slice(&other.pos);
        pos.sort_unstable();
        pos.dedup();
        let mut neg = self.neg.clone();
        neg.extend_from_slice(&other.neg);
        neg.sort_unstable();
        neg.dedup();
        for v in &pos {
            if neg.binary_search(v).is_ok() {
                return None;
            }
        }
        Some(Monomial { pos, neg })
    }

    /// Truth value under an assignment given as a bitmask over the variables.
    #[inline]
    pub fn eval_mask(&self, mask: u64) -> bool {
        self.pos.iter().all(|&v| mask >> v & 1 == 1)
            && self.neg.iter().all(|&v| mask >> v & 1 == 0)
    }
}

/// Sparse polynomial with exact rational coefficients and a deterministic
/// (sorted) monomial order.
pub type Polynomial = BTreeMap<Monomial, Rat>;

pub fn poly_from(terms: Vec<(Monomial, Rat)>) -> Polynomial {
    let mut p = Polynomial::new();
    for (m, c) in terms {
        let entry = p.entry(m).or_insert_with(Rat::zero);
        *entry += c;
    }
    p.retain(|_, c| !c.is_zero());
    p
}

pub fn poly_eval_mask(p: &Polynomial, mask: u64) -> Rat {
    let mut acc = Rat::zero();
    for (m, c) in p {
        if m.eval_mask(mask) {
            acc += c;
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomTag {
    /// Exactly one vertex of block `i` is chosen.
    Block(usize),
    /// Non-adjacent cross-block vertices `u`, `v` are not both chosen.
    Edge(u32, u32),
    /// Free-form axiom used by standalone systems.
    Other(String),
}

#[derive(Clone, Debug)]
pub struct Axiom {
    pub tag: AxiomTag,
    pub poly: Polynomial,
}

/// A polynomial system of equations `p_j = 0` over `num_vars` Boolean
/// variables and their twins.
#[derive(Clone, Debug)]
pub struct PolynomialSystem {
    pub k: usize,
    pub n: usize,
    pub num_vars: usize,
    pub axioms: Vec<Axiom>,
}

impl PolynomialSystem {
    /// Standalone system over `num_vars` variables (no block structure).
    pub fn free(num_vars: usize, axioms: Vec<(String, Polynomial)>) -> Self {
        PolynomialSystem {
            k: 0,
            n: 0,
            num_vars,
            axioms: axioms
                .into_iter()
                .map(|(name, poly)| Axiom {
                    tag: AxiomTag::Other(name),
                    poly,
                })
                .collect(),
        }
    }

    /// One-norm of the largest axiom (sum of coefficient magnitudes).
    pub fn max_axiom_one_norm(&self) -> Rat {
        let mut best = Rat::zero();
        for a in &self.axioms {
            let norm: Rat = a.poly.values().map(|c| c.abs()).sum();
            if norm > best {
                best = norm;
            }
        }
        best
    }
}

/// Builds the clique system over `G`: one block axiom per block (`sum x_v - 1`)
/// and one edge axiom `x_u x_v` per cross-block non-edge.
pub fn build_clique_formula(g: &BlockGraph) -> PolynomialSystem {
    let mut axioms = Vec::new();
    for i in 0..g.k() {
        let mut terms: Vec<(Monomial, Rat)> = g
            .block_vertices(i)
            .map(|v| (Monomial::var(v), Rat::one()))
            .collect();
        terms.push((Monomial::one(), -Rat::one()));
        axioms.push(Axiom {
            tag: AxiomTag::Block(i),
            poly: poly_from(terms),
        });
    }
    for u in 0..g.num_vertices() as u32 {
        for v in (u + 1)..g.num_vertices() as u32 {
            if g.block_of(u) != g.block_of(v) && !g.adjacent(u, v) {
                axioms.push(Axiom {
                    tag: AxiomTag::Edge(u, v),
                    poly: poly_from(vec![(
                        Monomial::var(u).mul(&Monomial::var(v)).expect("distinct vars"),
                        Rat::one(),
                    )]),
                });
            }
        }
    }
    PolynomialSystem {
        k: g.k(),
        n: g.n(),
        num_vars: g.num_vertices(),
        axioms,
    }
}

/// The assignment induced by a full tuple: `x_v = 1` exactly for `v` in the
/// tuple. Represented as a bitmask over the `kn` variables.
pub fn tuple_assignment(vertices: &[u32]) -> u64 {
    let mut mask = 0u64;
    for &v in vertices {
        mask |= 1u64 << v;
    }
    mask
}

/// The set of tuples ruled out by a monomial, as a rectangle over all `k`
/// blocks, or `None` when no tuple satisfies it (two positives in one block,
/// or an emptied side).
pub fn ruled_out_rectangle(m: &Monomial, g: &BlockGraph) -> Option<Rectangle> {
    let k = g.k();
    let mut sides: Vec<Vec<u32>> = Vec::with_capacity(k);
    for block in 0..k {
        let pos_here: Vec<u32> = m
            .pos
            .iter()
            .copied()
            .filter(|&v| g.block_of(v) == block)
            .collect();
        let side = match pos_here.len() {
            0 => g
                .block_vertices(block)
                .filter(|v| m.neg.binary_search(v).is_err())
                .collect(),
            1 => vec![pos_here[0]],
            _ => return None,
        };
        if side.is_empty() {
            return None;
        }
        sides.push(side);
    }
    Some(Rectangle {
        blocks: (0..k).collect(),
        sides,
    })
}

/// A monomial `m` with `Q(m) = Q`: positives for singleton sides, negations
/// for removed vertices elsewhere.
pub fn monomial_of_rectangle(q: &Rectangle, g: &BlockGraph) -> Result<Monomial, FormulaError> {
    if !q.is_full_support(g.k()) {
        return Err(FormulaError::NotFullSupport(g.k()));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, side) in q.sides.iter().enumerate() {
        if side.is_empty() {
            return Err(FormulaError::EmptySide(i));
        }
        if side.len() == 1 {
            pos.push(side[0]);
        } else {
            for v in g.block_vertices(i) {
                if side.binary_search(&v).is_err() {
                    neg.push(v);
                }
            }
        }
    }
    Monomial::new(pos, neg)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub pos: Vec<u32>,
    pub neg: Vec<u32>,
    pub coef: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxiomFile {
    tag: AxiomTag,
    poly: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    k: usize,
    n: usize,
    num_vars: usize,
    axioms: Vec<AxiomFile>,
}

pub fn poly_to_terms(p: &Polynomial) -> Vec<TermFile> {
    p.iter()
        .map(|(m, c)| TermFile {
            pos: m.pos.clone(),
            neg: m.neg.clone(),
            coef: format_rat(c),
        })
        .collect()
}

pub fn poly_from_terms(terms: &[TermFile]) -> Result<Polynomial, FormulaError> {
    let mut out = Vec::new();
    for t in terms {
        out.push((
            Monomial::new(t.pos.clone(), t.neg.clone())?,
            parse_rat(&t.coef)?,
        ));
    }
    Ok(poly_from(out))
}

impl PolynomialSystem {
    pub fn to_json(&self) -> String {
        let file = SystemFile {
            k: self.k,
            n: self.n,
            num_vars: self.num_vars,
            axioms: self
                .axioms
                .iter()
                .map(|a| AxiomFile {
                    tag: a.tag.clone(),
                    poly: poly_to_terms(&a.poly),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("system serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FormulaError> {
        let file: SystemFile = serde_json::from_str(text)?;
        let mut axioms = Vec::new();
        for a in file.axioms {
            axioms.push(Axiom {
                tag: a.tag,
                poly: poly_from_terms(&a.poly)?,
            });
        }
        Ok(PolynomialSystem {
            k: file.k,
            n: file.n,
            num_vars: file.num_vars,
            axioms,
        })
    }

    pub fn to_file(&self, path: &std::path::Path) -> Result<(), FormulaError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, FormulaError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Tuple;
    use crate::rational::{rat, rat_int};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn formula_counts() {
        // Complete k-partite: only block axioms.
        let g = BlockGraph::complete(3, 3);
        let p = build_clique_formula(&g);
        assert_eq!(p.axioms.len(), 3);
        for a in &p.axioms {
            assert!(matches!(a.tag, AxiomTag::Block(_)));
            assert_eq!(a.poly.len(), 3 + 1);
        }
        // Empty k=2, n=1: 2 block axioms + 1 edge axiom.
        let g = BlockGraph::empty(1, 2);
        let p = build_clique_formula(&g);
        assert_eq!(p.axioms.len(), 3);
        assert_eq!(
            p.axioms
                .iter()
                .filter(|a| matches!(a.tag, AxiomTag::Edge(_, _)))
                .count(),
            1
        );
    }

    #[test]
    fn edge_axiom_count_is_complement() {
        let g = BlockGraph::sample(3, 3, &rat(1, 2), 5).unwrap();
        let p = build_clique_formula(&g);
        let cross_pairs = 3 * 3 * 3;
        let edge_axioms = p
            .axioms
            .iter()
            .filter(|a| matches!(a.tag, AxiomTag::Edge(_, _)))
            .count();
        assert_eq!(edge_axioms, cross_pairs - g.edge_count());
    }

    #[test]
    fn q_of_one_is_full_rectangle() {
        let g = BlockGraph::empty(2, 3);
        let q = ruled_out_rectangle(&Monomial::one(), &g).unwrap();
        assert_eq!(q, Rectangle::full(&g));
    }

    #[test]
    fn q_of_two_positives_in_a_block_is_empty() {
        let g = BlockGraph::empty(2, 2);
        let m = Monomial::new(vec![0, 1], vec![]).unwrap();
        assert!(ruled_out_rectangle(&m, &g).is_none());
    }

    #[test]
    fn q_matches_exhaustive_tuple_oracle() {
        // kn <= 9: n=3, k=3; random monomials with <= 3 literals.
        let g = BlockGraph::empty(3, 3);
        let full = Rectangle::full(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for _ in 0..rng.gen_range(0..=3) {
                let v = rng.gen_range(0..9u32);
                if rng.gen_bool(0.5) {
                    pos.push(v);
                } else {
                    neg.push(v);
                }
            }
            let m = match Monomial::new(pos, neg) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let q = ruled_out_rectangle(&m, &g);
            let mut expected = Vec::new();
            full.for_each_tuple(&mut |t| {
                if m.eval_mask(tuple_assignment(t)) {
                    expected.push(t.to_vec());
                }
            });
            match q {
                None => assert!(expected.is_empty(), "monomial {m:?}"),
                Some(q) => {
                    let mut got = Vec::new();
                    q.for_each_tuple(&mut |t| got.push(t.to_vec()));
                    assert_eq!(got, expected, "monomial {m:?}");
                }
            }
        }
    }

    #[test]
    fn monomial_of_rectangle_roundtrip() {
        let g = BlockGraph::empty(4, 3); // kn = 12
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let mut sides = Vec::new();
            for b in 0..3usize {
                let mut side: Vec<u32> =
                    g.block_vertices(b).filter(|_| rng.gen_bool(0.7)).collect();
                if side.is_empty() {
                    side.push(g.block_vertices(b).next().unwrap());
                }
                sides.push(side);
            }
            let q = Rectangle::new(&g, vec![0, 1, 2], sides).unwrap();
            let m = monomial_of_rectangle(&q, &g).unwrap();
            let q2 = ruled_out_rectangle(&m, &g).unwrap();
            assert_eq!(q, q2);
        }
        // Spot checks: full space -> constant 1; singleton block -> positive.
        let full = Rectangle::full(&g);
        assert!(monomial_of_rectangle(&full, &g).unwrap().is_one());
        let mut sides: Vec<Vec<u32>> = (0..3).map(|b| g.block_vertices(b).collect()).collect();
        sides[0] = vec![2];
        let q = Rectangle::new(&g, vec![0, 1, 2], sides).unwrap();
        assert_eq!(monomial_of_rectangle(&q, &g).unwrap().pos(), &[2]);
    }

    #[test]
    fn eval_block_and_edge_axioms_on_tuples() {
        let g = BlockGraph::empty(2, 2);
        let p = build_clique_formula(&g);
        let full = Rectangle::full(&g);
        full.for_each_tuple(&mut |t| {
            let mask = tuple_assignment(t);
            for a in &p.axioms {
                match a.tag {
                    AxiomTag::Block(_) => assert!(poly_eval_mask(&a.poly, mask).is_zero()),
                    AxiomTag::Edge(u, v) => {
                        let expect = (mask >> u & 1 == 1 && mask >> v & 1 == 1) as i64;
                        assert_eq!(poly_eval_mask(&a.poly, mask), rat_int(expect));
                    }
                    AxiomTag::Other(_) => unreachable!(),
                }
            }
        });
    }

    #[test]
    fn random_poly_eval_matches_term_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nvars = 6u32;
        for _ in 0..100 {
            let mut terms = Vec::new();
            for _ in 0..rng.gen_range(1..6) {
                let pos: Vec<u32> = (0..nvars).filter(|_| rng.gen_bool(0.3)).collect();
                let neg: Vec<u32> = (0..nvars)
                    .filter(|v| !pos.contains(v) && rng.gen_bool(0.3))
                    .collect();
                terms.push((
                    Monomial::new(pos, neg).unwrap(),
                    rat(rng.gen_range(-5..=5), rng.gen_range(1..=3)),
                ));
            }
            let p = poly_from(terms.clone());
            let mask = rng.gen_range(0..(1u64 << nvars));
            let mut expect = Rat::zero();
            for (m, c) in &terms {
                if m.eval_mask(mask) {
                    expect += c;
                }
            }
            assert_eq!(poly_eval_mask(&p, mask), expect);
        }
    }

    #[test]
    fn satisfiable_iff_clique_small() {
        // kn <= 9: the system has a common zero modulo the Boolean ideal iff
        // G has a transversal clique.
        for seed in 0..20 {
            let g = BlockGraph::sample(3, 3, &rat(1, 2), seed).unwrap();
            let p = build_clique_formula(&g);
            let mut satisfiable = false;
            for mask in 0u64..(1 << 9) {
                if p.axioms.iter().all(|a| poly_eval_mask(&a.poly, mask).is_zero()) {
                    satisfiable = true;
                    break;
                }
            }
            assert_eq!(satisfiable, g.has_transversal_clique(), "seed {seed}");
        }
    }

    #[test]
    fn clique_tuples_satisfy_formula() {
        let g = BlockGraph::complete(2, 3);
        let p = build_clique_formula(&g);
        let t = Tuple::new(&g, vec![0, 2, 4]).unwrap();
        assert!(g.is_clique(&t));
        let mask = tuple_assignment(t.vertices());
        for a in &p.axioms {
            assert!(poly_eval_mask(&a.poly, mask).is_zero());
        }
    }

    #[test]
    fn system_json_roundtrip() {
        let g = BlockGraph::sample(2, 2, &rat(1, 2), 3).unwrap();
        let p = build_clique_formula(&g);
        let text = p.to_json();
        let q = PolynomialSystem::from_json(&text).unwrap();
        assert_eq!(p.num_vars, q.num_vars);
        assert_eq!(p.axioms.len(), q.axioms.len());
        for (a, b) in p.axioms.iter().zip(&q.axioms) {
            assert_eq!(a.tag, b.tag);
            assert_eq!(a.poly, b.poly);
        }
    }
}
