//! Certificates that rule out every assignment: per-axiom multiplier
//! polynomials plus a nonnegative part, with exact size accounting and two
//! independent verifiers.
//!
//! Internally a certificate asserts `sum_j g_j p_j - f0 - M = 0` over every
//! 0/1 assignment (with `f0` a nonnegative combination of monomials and
//! `M >= 1`). The on-disk format stores the classical orientation
//! `sum_j g_j p_j + f0 = -M`; multipliers are negated on import and export.

use crate::formula::{
    poly_from, poly_from_terms, poly_to_terms, Monomial, Polynomial, PolynomialSystem, TermFile,
};
use crate::guards;
use crate::rational::{rat_bit_size, rat_int, Rat};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("certificate has {got} multipliers but the system has {want} axioms")]
    MultiplierCount { got: usize, want: usize },
    #[error("f0 has a negative coefficient on {0:?}")]
    NegativeF0(Monomial),
    #[error("target must satisfy M >= 1, got {0}")]
    BadTarget(i64),
    #[error("{0} variables exceed the truth-table verification guard ({1})")]
    TooManyVariables(usize, u64),
    #[error("certificate is not unary: coefficient {0} has magnitude != 1")]
    NotUnary(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("formula: {0}")]
    Formula(#[from] crate::formula::FormulaError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A semantic refutation in the internal orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct Refutation {
    /// One multiplier polynomial per axiom of the target system.
    pub multipliers: Vec<Polynomial>,
    /// Nonnegative combination of monomials.
    pub f0: Polynomial,
    /// The certificate derives the constant `M` (classically: `-M`), `M >= 1`.
    pub target_m: i64,
}

impl Refutation {
    pub fn new(
        multipliers: Vec<Polynomial>,
        f0: Polynomial,
        target_m: i64,
    ) -> Result<Self, ProofError> {
        if target_m < 1 {
            return Err(ProofError::BadTarget(target_m));
        }
        for (m, c) in &f0 {
            if c.is_negative() {
                return Err(ProofError::NegativeF0(m.clone()));
            }
        }
        Ok(Refutation {
            multipliers,
            f0,
            target_m,
        })
    }

    fn check_shape(&self, system: &PolynomialSystem) -> Result<(), ProofError> {
        if self.multipliers.len() != system.axioms.len() {
            return Err(ProofError::MultiplierCount {
                got: self.multipliers.len(),
                want: system.axioms.len(),
            });
        }
        Ok(())
    }
}

/// Consolidated vector form `sum_m c_m * indicator(m)` of the certificate's
/// defect `sum_j g_j p_j - f0 - M`. Products whose truth table is identically
/// zero contribute nothing and are dropped.
fn defect_terms(system: &PolynomialSystem, pi: &Refutation) -> HashMap<Monomial, Rat> {
    let mut acc: HashMap<Monomial, Rat> = HashMap::new();
    let mut add = |m: Monomial, c: Rat| {
        let e = acc.entry(m).or_insert_with(Rat::zero);
        *e += c;
    };
    for (g, axiom) in pi.multipliers.iter().zip(&system.axioms) {
        for (m1, beta) in g {
            for (m2, gamma) in &axiom.poly {
                if let Some(prod) = m1.mul(m2) {
                    add(prod, beta * gamma);
                }
            }
        }
    }
    for (m, alpha) in &pi.f0 {
        add(m.clone(), -alpha.clone());
    }
    add(Monomial::one(), -rat_int(pi.target_m));
    acc.retain(|_, c| !c.is_zero());
    acc
}

/// Truth-table verification through the inner-product expansion: the defect
/// vector is zero iff its inner product with itself is zero, and inner
/// products of monomial indicator vectors are subcube counts.
pub fn verify_truth_table(system: &PolynomialSystem, pi: &Refutation) -> Result<bool, ProofError> {
    pi.check_shape(system)?;
    let nv = system.num_vars;
    let guard = guards::limit(guards::TRUTH_TABLE_VARS);
    if nv as u64 > guard {
        return Err(ProofError::TooManyVariables(nv, guard));
    }
    let terms: Vec<(Monomial, Rat)> = defect_terms(system, pi).into_iter().collect();
    let mut inner = Rat::zero();
    for (i, (m1, c1)) in terms.iter().enumerate() {
        for (m2, c2) in terms.iter().skip(i) {
            if let Some(prod) = m1.mul(m2) {
                let count = BigInt::one() << (nv - prod.degree());
                let contribution = c1 * c2 * Rat::from_integer(count);
                if std::ptr::eq(m1, m2) {
                    inner += contribution;
                } else {
                    inner += contribution.clone() + contribution;
                }
            }
        }
    }
    debug_assert!(!inner.is_negative());
    Ok(inner.is_zero())
}

/// Normal-form verification: substitute `x̄ = 1 - x`, multilinearize, and
/// compare against the constant `M`. No variable-count guard.
pub fn verify_canonical(system: &PolynomialSystem, pi: &Refutation) -> Result<bool, ProofError> {
    pi.check_shape(system)?;
    let mut nf: HashMap<u64, Rat> = HashMap::new();
    let mut add_term = |m: &Monomial, c: &Rat| {
        // expand prod_{v in neg} (1 - x_v)
        let neg = m.neg();
        let base: u64 = m.pos().iter().fold(0, |acc, &v| acc | 1 << v);
        for t in 0u64..(1 << neg.len()) {
            let mut mask = base;
            let mut sign_neg = false;
            for (b, &v) in neg.iter().enumerate() {
                if t >> b & 1 == 1 {
                    mask |= 1 << v;
                    sign_neg = !sign_neg;
                }
            }
            let e = nf.entry(mask).or_insert_with(Rat::zero);
            if sign_neg {
                *e -= c;
            } else {
                *e += c;
            }
        }
    };
    for (g, axiom) in pi.multipliers.iter().zip(&system.axioms) {
        for (m1, beta) in g {
            for (m2, gamma) in &axiom.poly {
                if let Some(prod) = m1.mul(m2) {
                    add_term(&prod, &(beta * gamma));
                }
            }
        }
    }
    for (m, alpha) in &pi.f0 {
        add_term(m, &-alpha.clone());
    }
    add_term(&Monomial::one(), &-rat_int(pi.target_m));
    Ok(nf.values().all(Rat::is_zero))
}

/// Size measures of a certificate against its system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeReport {
    /// Expanded terms with nonzero coefficient, no cancellation.
    pub monomial_count: u64,
    /// Total bits of the binary encodings of the expanded coefficients.
    pub bit_size: u64,
    /// Sum of magnitudes over the expanded products, no cancellation.
    #[serde(with = "crate::rational::serde_rat")]
    pub coefficient_size: Rat,
    /// Sum of multiplier coefficient magnitudes plus the f0 coefficients.
    #[serde(with = "crate::rational::serde_rat")]
    pub lp_objective: Rat,
    #[serde(with = "crate::rational::serde_rat")]
    pub max_abs_coefficient: Rat,
}

pub fn size_report(pi: &Refutation, system: &PolynomialSystem) -> Result<SizeReport, ProofError> {
    pi.check_shape(system)?;
    let mut monomial_count = 0u64;
    let mut bit_size = 0u64;
    let mut coefficient_size = Rat::zero();
    let mut lp_objective = Rat::zero();
    let mut max_abs = Rat::zero();
    let mut record = |c: &Rat| {
        if c.is_zero() {
            return;
        }
        monomial_count += 1;
        bit_size += rat_bit_size(c);
        let a = c.abs();
        coefficient_size += &a;
        if a > max_abs {
            max_abs = a;
        }
    };
    for (g, axiom) in pi.multipliers.iter().zip(&system.axioms) {
        for (_, beta) in g {
            lp_objective += beta.abs();
            for (_, gamma) in &axiom.poly {
                // Expanded formal product; no cancellation, clashes included.
                record(&(beta * gamma));
            }
        }
    }
    for (_, alpha) in &pi.f0 {
        lp_objective += alpha.abs();
        record(alpha);
    }
    Ok(SizeReport {
        monomial_count,
        bit_size,
        coefficient_size,
        lp_objective,
        max_abs_coefficient: max_abs,
    })
}

/// Scales a unary certificate (all coefficients of magnitude 1, target `-M`)
/// down to target `-1`, dividing every coefficient by `M`.
pub fn normalize_unary(pi: &Refutation) -> Result<Refutation, ProofError> {
    let one = Rat::one();
    for g in &pi.multipliers {
        for (_, c) in g {
            if c.abs() != one {
                return Err(ProofError::NotUnary(crate::rational::format_rat(c)));
            }
        }
    }
    for (_, c) in &pi.f0 {
        if c.abs() != one {
            return Err(ProofError::NotUnary(crate::rational::format_rat(c)));
        }
    }
    if pi.target_m == 1 {
        return Ok(pi.clone());
    }
    let m = rat_int(pi.target_m);
    let scale = |p: &Polynomial| -> Polynomial {
        p.iter().map(|(mm, c)| (mm.clone(), c / &m)).collect()
    };
    Ok(Refutation {
        multipliers: pi.multipliers.iter().map(scale).collect(),
        f0: scale(&pi.f0),
        target_m: 1,
    })
}

/// Whether every expanded coefficient has magnitude at most `bound`.
pub fn is_f_bounded(
    pi: &Refutation,
    system: &PolynomialSystem,
    bound: &Rat,
) -> Result<bool, ProofError> {
    Ok(size_report(pi, system)?.max_abs_coefficient <= *bound)
}

// ---------------------------------------------------------------------------
// Serialization (classical orientation on disk)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiplierFile {
    axiom: usize,
    poly: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateFile {
    axiom_multipliers: Vec<MultiplierFile>,
    f0: Vec<TermFile>,
    #[serde(rename = "target_M")]
    target_m: i64,
}

fn negate_poly(p: &Polynomial) -> Polynomial {
    p.iter().map(|(m, c)| (m.clone(), -c.clone())).collect()
}

impl Refutation {
    pub fn to_json(&self, num_axioms: usize) -> String {
        debug_assert_eq!(self.multipliers.len(), num_axioms);
        let file = CertificateFile {
            axiom_multipliers: self
                .multipliers
                .iter()
                .enumerate()
                .filter(|(_, g)| !g.is_empty())
                .map(|(i, g)| MultiplierFile {
                    axiom: i,
                    poly: poly_to_terms(&negate_poly(g)),
                })
                .collect(),
            f0: poly_to_terms(&self.f0),
            target_m: self.target_m,
        };
        serde_json::to_string_pretty(&file).expect("certificate serializes")
    }

    pub fn from_json(text: &str, num_axioms: usize) -> Result<Self, ProofError> {
        let file: CertificateFile = serde_json::from_str(text)?;
        let mut multipliers = vec![Polynomial::new(); num_axioms];
        for m in &file.axiom_multipliers {
            if m.axiom >= num_axioms {
                return Err(ProofError::MultiplierCount {
                    got: m.axiom + 1,
                    want: num_axioms,
                });
            }
            multipliers[m.axiom] = negate_poly(&poly_from_terms(&m.poly)?);
        }
        Refutation::new(multipliers, poly_from_terms(&file.f0)?, file.target_m)
    }

    pub fn to_file(&self, path: &std::path::Path, num_axioms: usize) -> Result<(), ProofError> {
        std::fs::write(path, self.to_json(num_axioms))?;
        Ok(())
    }

    pub fn from_file(path: &std::path::Path, num_axioms: usize) -> Result<Self, ProofError> {
        Self::from_json(&std::fs::read_to_string(path)?, num_axioms)
    }
}

/// The classical hand certificate for the single-non-edge instance with
/// k = 2, n = 1 (vertices `u = 0`, `v = 1`): multipliers `1`, `x_u`, `-1`
/// against block axioms `x_u - 1`, `x_v - 1` and the edge axiom `x_u x_v`.
pub fn hand_certificate_k2n1() -> Refutation {
    let x0 = Monomial::var(0);
    // Internal orientation negates the classical multipliers.
    Refutation::new(
        vec![
            poly_from(vec![(Monomial::one(), -Rat::one())]),
            poly_from(vec![(x0, -Rat::one())]),
            poly_from(vec![(Monomial::one(), Rat::one())]),
        ],
        Polynomial::new(),
        1,
    )
    .expect("valid hand certificate")
}
