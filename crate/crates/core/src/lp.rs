//! Exact LPs for minimum-coefficient certificates and their dual
//! pseudo-measures.
//!
//! The primal searches for multipliers `β⁺/β⁻` per (axiom, monomial) pair and
//! a nonnegative part `α` per monomial such that the combination equals 1 on
//! every 0/1 assignment, minimizing the total coefficient mass. Its dual
//! optimizes a signed measure over assignments subject to `μ(m) >= -1` and
//! `|μ(m·p)| <= 1`; the normalized optimal measure certifies that every
//! accepted certificate has at least the optimal coefficient mass.

use crate::formula::{Monomial, Polynomial, PolynomialSystem};
use crate::guards;
use crate::proof::Refutation;
use crate::rational::{format_rat, parse_rat, rat_int, Rat};
use crate::simplex::{
    solve_exact as simplex_solve, LpProblem, LpRow, LpSolution, LpStatus, Relation, Sense,
    SimplexError, VarBound,
};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("{0} variables exceed the LP guard of {1}; raise SA_LAB_GUARD to override")]
    TooManyVariables(usize, u64),
    #[error("system has no axioms; nothing to refute")]
    EmptySystem,
    #[error("monomial index does not contain the constant 1 at position 0")]
    BadIndex,
    #[error("solution status {0:?} does not carry witnesses")]
    NotOptimal(LpStatus),
    #[error("optimum is zero; no certificate scale to normalize by")]
    ZeroOptimum,
    #[error("instance was built as {built:?} but {wanted:?} is required")]
    WrongKind { built: LpKind, wanted: LpKind },
    #[error("simplex: {0}")]
    Simplex(#[from] SimplexError),
    #[error("lp parse error at line {0}: {1}")]
    Parse(usize, String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered list of canonical nonzero monomials over `num_vars` variables, in
/// base-3 counting order (absent / positive / negated per variable), so index
/// 0 is the constant 1. Optionally degree-capped.
#[derive(Clone, Debug)]
pub struct MonomialIndex {
    pub num_vars: usize,
    pub degree_cap: Option<usize>,
    monomials: Vec<Monomial>,
}

impl MonomialIndex {
    pub fn new(num_vars: usize, degree_cap: Option<usize>) -> Result<Self, LpError> {
        let guard = guards::limit(guards::LP_VARS);
        if num_vars as u64 > guard {
            return Err(LpError::TooManyVariables(num_vars, guard));
        }
        let mut monomials = Vec::new();
        let total = 3usize.pow(num_vars as u32);
        for code in 0..total {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            let mut c = code;
            for v in 0..num_vars as u32 {
                match c % 3 {
                    1 => pos.push(v),
                    2 => neg.push(v),
                    _ => {}
                }
                c /= 3;
            }
            if let Some(cap) = degree_cap {
                if pos.len() + neg.len() > cap {
                    continue;
                }
            }
            monomials.push(Monomial::new(pos, neg).expect("disjoint by construction"));
        }
        Ok(MonomialIndex {
            num_vars,
            degree_cap,
            monomials,
        })
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpKind {
    Primal,
    Dual,
}

/// What an LP column (primal) stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColMeta {
    MultiplierPlus { axiom: usize, monomial: usize },
    MultiplierMinus { axiom: usize, monomial: usize },
    F0 { monomial: usize },
}

/// A built instance: the raw LP plus the mapping back to certificate space.
#[derive(Clone, Debug)]
pub struct ClqLp {
    pub lp: LpProblem,
    pub kind: LpKind,
    pub num_vars: usize,
    /// Column meanings (primal) — empty for dual instances.
    pub cols: Vec<ColMeta>,
    /// Whether the monomial index was degree-capped: optima are then
    /// restricted-system values, an upper bound on refutation strength, not a
    /// certified duality with the unrestricted system.
    pub restricted: bool,
}

/// Truth table of every axiom over all `2^num_vars` assignments.
fn axiom_tables(system: &PolynomialSystem) -> Vec<Vec<Rat>> {
    let masks = 1usize << system.num_vars;
    system
        .axioms
        .iter()
        .map(|a| {
            (0..masks as u64)
                .map(|mask| crate::formula::poly_eval_mask(&a.poly, mask))
                .collect()
        })
        .collect()
}

/// Masks of the subcube where a monomial evaluates to 1.
fn subcube_masks(m: &Monomial, num_vars: usize) -> Vec<u64> {
    let fixed: Vec<u32> = m.pos().iter().chain(m.neg()).copied().collect();
    let free: Vec<u32> = (0..num_vars as u32).filter(|v| !fixed.contains(v)).collect();
    let base: u64 = m.pos().iter().fold(0, |acc, &v| acc | 1 << v);
    let mut out = Vec::with_capacity(1 << free.len());
    for sel in 0u64..(1 << free.len()) {
        let mut mask = base;
        for (b, &v) in free.iter().enumerate() {
            if sel >> b & 1 == 1 {
                mask |= 1 << v;
            }
        }
        out.push(mask);
    }
    out.sort_unstable();
    out
}

/// The minimum-coefficient certificate LP: equality row per assignment with
/// right-hand side 1; columns are multiplier splits and nonnegative-part
/// coefficients, all with unit cost. Zero-function columns are omitted.
pub fn build_primal(system: &PolynomialSystem, idx: &MonomialIndex) -> Result<ClqLp, LpError> {
    if system.axioms.is_empty() {
        return Err(LpError::EmptySystem);
    }
    if idx.monomials.first().map(Monomial::is_one) != Some(true) {
        return Err(LpError::BadIndex);
    }
    let nv = system.num_vars;
    let masks = 1usize << nv;
    let tables = axiom_tables(system);
    let mut cols_meta = Vec::new();
    let mut columns: Vec<Vec<(usize, Rat)>> = Vec::new();
    for (j, table) in tables.iter().enumerate() {
        for (mi, m) in idx.monomials.iter().enumerate() {
            let col: Vec<(usize, Rat)> = subcube_masks(m, nv)
                .into_iter()
                .filter_map(|mask| {
                    let v = &table[mask as usize];
                    (!v.is_zero()).then(|| (mask as usize, v.clone()))
                })
                .collect();
            if col.is_empty() {
                continue;
            }
            cols_meta.push(ColMeta::MultiplierPlus {
                axiom: j,
                monomial: mi,
            });
            columns.push(col.clone());
            cols_meta.push(ColMeta::MultiplierMinus {
                axiom: j,
                monomial: mi,
            });
            columns.push(col.iter().map(|(r, v)| (*r, -v.clone())).collect());
        }
    }
    for (mi, m) in idx.monomials.iter().enumerate() {
        let col: Vec<(usize, Rat)> = subcube_masks(m, nv)
            .into_iter()
            .map(|mask| (mask as usize, -Rat::one()))
            .collect();
        cols_meta.push(ColMeta::F0 { monomial: mi });
        columns.push(col);
    }
    let num_cols = columns.len();
    let mut rows: Vec<LpRow> = (0..masks)
        .map(|_| LpRow {
            coeffs: Vec::new(),
            rel: Relation::Eq,
            rhs: Rat::one(),
        })
        .collect();
    for (ci, col) in columns.into_iter().enumerate() {
        for (r, v) in col {
            rows[r].coeffs.push((ci, v));
        }
    }
    Ok(ClqLp {
        lp: LpProblem {
            sense: Sense::Min,
            num_vars: num_cols,
            objective: vec![Rat::one(); num_cols],
            bounds: vec![VarBound::NonNeg; num_cols],
            rows,
        },
        kind: LpKind::Primal,
        num_vars: nv,
        cols: cols_meta,
        restricted: idx.degree_cap.is_some(),
    })
}

/// The pseudo-measure LP: free variable per assignment, objective `μ(1)`,
/// constraints `μ(m) >= -1` and `|μ(m·p)| <= 1`. Rows for identically zero
/// functions are omitted (they are trivially satisfied).
pub fn build_dual(system: &PolynomialSystem, idx: &MonomialIndex) -> Result<ClqLp, LpError> {
    if system.axioms.is_empty() {
        return Err(LpError::EmptySystem);
    }
    if idx.monomials.first().map(Monomial::is_one) != Some(true) {
        return Err(LpError::BadIndex);
    }
    let nv = system.num_vars;
    let masks = 1usize << nv;
    let tables = axiom_tables(system);
    let mut rows = Vec::new();
    for m in &idx.monomials {
        // mu(m) >= -1
        let coeffs: Vec<(usize, Rat)> = subcube_masks(m, nv)
            .into_iter()
            .map(|mask| (mask as usize, Rat::one()))
            .collect();
        rows.push(LpRow {
            coeffs,
            rel: Relation::Ge,
            rhs: -Rat::one(),
        });
    }
    for table in &tables {
        for m in &idx.monomials {
            let coeffs: Vec<(usize, Rat)> = subcube_masks(m, nv)
                .into_iter()
                .filter_map(|mask| {
                    let v = &table[mask as usize];
                    (!v.is_zero()).then(|| (mask as usize, v.clone()))
                })
                .collect();
            if coeffs.is_empty() {
                continue;
            }
            rows.push(LpRow {
                coeffs: coeffs.clone(),
                rel: Relation::Le,
                rhs: Rat::one(),
            });
            rows.push(LpRow {
                coeffs,
                rel: Relation::Ge,
                rhs: -Rat::one(),
            });
        }
    }
    Ok(ClqLp {
        lp: LpProblem {
            sense: Sense::Max,
            num_vars: masks,
            objective: vec![Rat::one(); masks],
            bounds: vec![VarBound::Free; masks],
            rows,
        },
        kind: LpKind::Dual,
        num_vars: nv,
        cols: Vec::new(),
        restricted: idx.degree_cap.is_some(),
    })
}

pub fn solve(clq: &ClqLp) -> Result<LpSolution, LpError> {
    Ok(simplex_solve(&clq.lp)?)
}

/// A rational vector over all assignments inducing a linear functional on
/// polynomials, normalized so `μ(1) = 1`, with its certified slack level.
#[derive(Clone, Debug)]
pub struct PseudoMeasure {
    pub num_vars: usize,
    /// One value per assignment mask.
    pub values: Vec<Rat>,
    pub delta: Rat,
}

impl PseudoMeasure {
    pub fn mu_monomial(&self, m: &Monomial) -> Rat {
        subcube_masks(m, self.num_vars)
            .into_iter()
            .map(|mask| self.values[mask as usize].clone())
            .sum()
    }

    pub fn mu_poly(&self, p: &Polynomial) -> Rat {
        p.iter().map(|(m, c)| c * self.mu_monomial(m)).sum()
    }

    /// μ(m · p) computed pointwise over the subcube of m.
    pub fn mu_monomial_times_poly(&self, m: &Monomial, p: &Polynomial) -> Rat {
        let mut acc = Rat::zero();
        for mask in subcube_masks(m, self.num_vars) {
            let pv = crate::formula::poly_eval_mask(p, mask);
            if !pv.is_zero() {
                acc += &self.values[mask as usize] * pv;
            }
        }
        acc
    }
}

/// Extracts the certificate from the primal point and the pseudo-measure from
/// the dual point of a solved primal instance.
pub fn extract_solutions(
    system: &PolynomialSystem,
    idx: &MonomialIndex,
    clq: &ClqLp,
    sol: &LpSolution,
) -> Result<(Refutation, PseudoMeasure), LpError> {
    if clq.kind != LpKind::Primal {
        return Err(LpError::WrongKind {
            built: clq.kind,
            wanted: LpKind::Primal,
        });
    }
    if sol.status != LpStatus::Optimal {
        return Err(LpError::NotOptimal(sol.status));
    }
    let optimum = sol.objective.clone().expect("optimal carries objective");
    if !optimum.is_positive() {
        return Err(LpError::ZeroOptimum);
    }
    let mut multipliers = vec![Polynomial::new(); system.axioms.len()];
    let mut f0 = Polynomial::new();
    for (meta, value) in clq.cols.iter().zip(&sol.primal) {
        if value.is_zero() {
            continue;
        }
        match meta {
            ColMeta::MultiplierPlus { axiom, monomial } => {
                let e = multipliers[*axiom]
                    .entry(idx.monomials[*monomial].clone())
                    .or_insert_with(Rat::zero);
                *e += value;
            }
            ColMeta::MultiplierMinus { axiom, monomial } => {
                let e = multipliers[*axiom]
                    .entry(idx.monomials[*monomial].clone())
                    .or_insert_with(Rat::zero);
                *e -= value;
            }
            ColMeta::F0 { monomial } => {
                let e = f0
                    .entry(idx.monomials[*monomial].clone())
                    .or_insert_with(Rat::zero);
                *e += value;
            }
        }
    }
    for g in &mut multipliers {
        g.retain(|_, c| !c.is_zero());
    }
    f0.retain(|_, c| !c.is_zero());
    let refutation = Refutation::new(multipliers, f0, 1).expect("lp yields nonnegative f0");

    let values: Vec<Rat> = sol.dual.iter().map(|y| y / &optimum).collect();
    let measure = PseudoMeasure {
        num_vars: system.num_vars,
        values,
        delta: optimum.recip(),
    };
    debug_assert_eq!(measure.mu_monomial(&Monomial::one()), Rat::one());
    Ok((refutation, measure))
}

/// Per-item slack report for the pseudo-measure conditions over an index.
#[derive(Clone, Debug, Serialize)]
pub struct PseudoMeasureReport {
    #[serde(with = "crate::rational::serde_rat")]
    pub mu_one: Rat,
    /// Largest |μ(m·p)| over axioms and indexed monomials.
    #[serde(with = "crate::rational::serde_rat")]
    pub worst_axiom_value: Rat,
    pub worst_axiom_witness: Option<(usize, usize)>,
    /// Smallest μ(m) over indexed monomials.
    #[serde(with = "crate::rational::serde_rat")]
    pub worst_monomial_value: Rat,
    pub worst_monomial_witness: Option<usize>,
    pub pass: bool,
    pub first_violation: Option<String>,
}

pub fn check_pseudo_measure(
    mu: &PseudoMeasure,
    system: &PolynomialSystem,
    delta: &Rat,
    idx: &MonomialIndex,
) -> PseudoMeasureReport {
    let mu_one = mu.mu_monomial(&Monomial::one());
    let mut first_violation = None;
    if mu_one != Rat::one() {
        first_violation = Some(format!("mu(1) = {} != 1", format_rat(&mu_one)));
    }
    let mut worst_axiom_value = Rat::zero();
    let mut worst_axiom_witness = None;
    for (j, axiom) in system.axioms.iter().enumerate() {
        for (mi, m) in idx.monomials.iter().enumerate() {
            let v = mu.mu_monomial_times_poly(m, &axiom.poly).abs();
            if v > worst_axiom_value {
                worst_axiom_value = v.clone();
                worst_axiom_witness = Some((j, mi));
            }
            if v > *delta && first_violation.is_none() {
                first_violation = Some(format!(
                    "|mu(m_{mi} * p_{j})| = {} > delta",
                    format_rat(&v)
                ));
            }
        }
    }
    let mut worst_monomial_value = Rat::one(); // mu(1) = 1 to start
    let mut worst_monomial_witness = None;
    for (mi, m) in idx.monomials.iter().enumerate() {
        let v = mu.mu_monomial(m);
        if v < worst_monomial_value {
            worst_monomial_value = v.clone();
            worst_monomial_witness = Some(mi);
        }
        if v < -delta.clone() && first_violation.is_none() {
            first_violation = Some(format!("mu(m_{mi}) = {} < -delta", format_rat(&v)));
        }
    }
    PseudoMeasureReport {
        pass: first_violation.is_none(),
        mu_one,
        worst_axiom_value,
        worst_axiom_witness,
        worst_monomial_value,
        worst_monomial_witness,
        first_violation,
    }
}

// ---------------------------------------------------------------------------
// LP-format text export / import
// ---------------------------------------------------------------------------

/// Decimal rendering for LP files: exact when the denominator is 2^a 5^b,
/// otherwise a 30-digit approximation (well inside the 1e-6 round-trip
/// tolerance).
fn rat_to_lp_decimal(r: &Rat) -> String {
    use num_bigint::BigInt;
    use num_integer::Integer;
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while den.is_multiple_of(&two) {
        den /= &two;
        twos += 1;
    }
    let mut fives = 0u32;
    while den.is_multiple_of(&five) {
        den /= &five;
        fives += 1;
    }
    let pow10 = twos.max(fives);
    if !den.is_one() || pow10 > 30 {
        return format!("{:.30}", crate::rational::rat_to_f64(r));
    }
    let scaled = r * Rat::from_integer(BigInt::from(10u8).pow(pow10));
    debug_assert!(scaled.is_integer());
    let digits = scaled.to_integer().to_string();
    if pow10 == 0 {
        return digits;
    }
    let (sign, digits) = match digits.strip_prefix('-') {
        Some(rest) => ("-", rest.to_string()),
        None => ("", digits),
    };
    let digits = format!("{:0>width$}", digits, width = pow10 as usize + 1);
    let split = digits.len() - pow10 as usize;
    format!("{sign}{}.{}", &digits[..split], &digits[split..])
}

/// Writes a CPLEX-style LP file.
pub fn write_lp<W: std::io::Write>(lp: &LpProblem, w: &mut W) -> Result<(), LpError> {
    writeln!(w, "\\ exact certificate lp export")?;
    writeln!(
        w,
        "{}",
        match lp.sense {
            Sense::Min => "Minimize",
            Sense::Max => "Maximize",
        }
    )?;
    let term = |c: &Rat, j: usize| -> String {
        let mag = rat_to_lp_decimal(&c.abs());
        format!("{} {} x{}", if c.is_negative() { "-" } else { "+" }, mag, j)
    };
    let mut obj = String::from(" obj:");
    let mut any = false;
    for (j, c) in lp.objective.iter().enumerate() {
        if !c.is_zero() {
            obj.push(' ');
            obj.push_str(&term(c, j));
            any = true;
        }
    }
    if !any {
        obj.push_str(" 0 x0");
    }
    writeln!(w, "{obj}")?;
    writeln!(w, "Subject To")?;
    for (i, row) in lp.rows.iter().enumerate() {
        let mut line = format!(" c{}:", i);
        if row.coeffs.is_empty() {
            line.push_str(" 0 x0");
        }
        for (v, c) in &row.coeffs {
            line.push(' ');
            line.push_str(&term(c, *v));
        }
        let rel = match row.rel {
            Relation::Eq => "=",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        };
        line.push_str(&format!(" {rel} {}", rat_to_lp_decimal(&row.rhs)));
        writeln!(w, "{line}")?;
    }
    writeln!(w, "Bounds")?;
    for (j, b) in lp.bounds.iter().enumerate() {
        if *b == VarBound::Free {
            writeln!(w, " x{j} free")?;
        }
    }
    writeln!(w, "End")?;
    Ok(())
}

pub fn export_lp(lp: &LpProblem, path: &std::path::Path) -> Result<(), LpError> {
    let mut buf = Vec::new();
    write_lp(lp, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Parses LP files as produced by [`write_lp`] (a pragmatic subset of the
/// format: one constraint per line, variables named `x<idx>`).
pub fn parse_lp(text: &str) -> Result<LpProblem, LpError> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Rows,
        Bounds,
        Done,
    }
    let mut sense = Sense::Min;
    let mut section = Section::Preamble;
    let mut objective: Vec<(usize, Rat)> = Vec::new();
    let mut rows: Vec<LpRow> = Vec::new();
    let mut free_vars: Vec<usize> = Vec::new();
    let mut max_var = 0usize;

    let parse_terms = |line: &str, lineno: usize| -> Result<(Vec<(usize, Rat)>, String), LpError> {
        let mut terms = Vec::new();
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut i = 0;
        let mut rest = String::new();
        let mut sign = Rat::one();
        let mut coef: Option<Rat> = None;
        while i < toks.len() {
            let t = toks[i];
            if t == "+" {
                sign = Rat::one();
            } else if t == "-" {
                sign = -Rat::one();
            } else if let Some(vs) = t.strip_prefix('x') {
                let v: usize = vs
                    .parse()
                    .map_err(|_| LpError::Parse(lineno, format!("bad variable {t}")))?;
                let c = coef.take().unwrap_or_else(Rat::one) * sign.clone();
                terms.push((v, c));
                sign = Rat::one();
            } else if t == "<=" || t == ">=" || t == "=" {
                rest = toks[i..].join(" ");
                break;
            } else {
                let c = parse_decimal(t)
                    .ok_or_else(|| LpError::Parse(lineno, format!("bad number {t}")))?;
                coef = Some(c);
            }
            i += 1;
        }
        Ok((terms, rest))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower == "minimize" || lower == "minimise" {
            sense = Sense::Min;
            section = Section::Objective;
            continue;
        }
        if lower == "maximize" || lower == "maximise" {
            sense = Sense::Max;
            section = Section::Objective;
            continue;
        }
        if lower == "subject to" || lower == "st" || lower == "s.t." {
            section = Section::Rows;
            continue;
        }
        if lower == "bounds" {
            section = Section::Bounds;
            continue;
        }
        if lower == "end" {
            section = Section::Done;
            continue;
        }
        let body = match line.split_once(':') {
            Some((_, b)) => b.trim(),
            None => line,
        };
        match section {
            Section::Objective => {
                let (terms, _) = parse_terms(body, lineno)?;
                for (v, c) in terms {
                    max_var = max_var.max(v + 1);
                    objective.push((v, c));
                }
            }
            Section::Rows => {
                let (terms, rest) = parse_terms(body, lineno)?;
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(LpError::Parse(lineno, format!("bad relation in `{line}`")));
                }
                let rel = match toks[0] {
                    "<=" => Relation::Le,
                    ">=" => Relation::Ge,
                    "=" => Relation::Eq,
                    other => return Err(LpError::Parse(lineno, format!("bad relation {other}"))),
                };
                let rhs = parse_decimal(toks[1])
                    .ok_or_else(|| LpError::Parse(lineno, format!("bad rhs {}", toks[1])))?;
                for (v, _) in &terms {
                    max_var = max_var.max(v + 1);
                }
                rows.push(LpRow {
                    coeffs: terms,
                    rel,
                    rhs,
                });
            }
            Section::Bounds => {
                let toks: Vec<&str> = body.split_whitespace().collect();
                if toks.len() == 2 && toks[1].eq_ignore_ascii_case("free") {
                    if let Some(vs) = toks[0].strip_prefix('x') {
                        let v: usize = vs
                            .parse()
                            .map_err(|_| LpError::Parse(lineno, "bad bound var".into()))?;
                        max_var = max_var.max(v + 1);
                        free_vars.push(v);
                    }
                }
            }
            _ => {}
        }
    }
    let mut obj = vec![Rat::zero(); max_var];
    for (v, c) in objective {
        obj[v] += c;
    }
    let mut bounds = vec![VarBound::NonNeg; max_var];
    for v in free_vars {
        bounds[v] = VarBound::Free;
    }
    Ok(LpProblem {
        sense,
        num_vars: max_var,
        objective: obj,
        bounds,
        rows,
    })
}

fn parse_decimal(s: &str) -> Option<Rat> {
    if !s.contains('.') {
        return parse_rat(s).ok();
    }
    let (int_part, frac_part) = s.split_once('.')?;
    let negative = int_part.starts_with('-');
    let int_digits = int_part.trim_start_matches(['-', '+']);
    let int_val = if int_digits.is_empty() {
        Rat::zero()
    } else {
        parse_rat(int_digits).ok()?
    };
    let frac_val = if frac_part.is_empty() {
        Rat::zero()
    } else {
        let num = parse_rat(frac_part).ok()?;
        let den = rat_int(10).pow(frac_part.len() as i32);
        num / den
    };
    let v = int_val + frac_val;
    Some(if negative { -v } else { v })
}

// ---------------------------------------------------------------------------
// Result bundle
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct ResultBundle {
    pub status: LpStatus,
    pub optimum: Option<String>,
    pub iterations: u64,
    pub restricted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refutation: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_measure: Option<PseudoMeasureBundle>,
}

#[derive(Serialize)]
pub struct PseudoMeasureBundle {
    pub values: Vec<String>,
    pub delta: String,
}

pub fn result_bundle(
    system: &PolynomialSystem,
    sol: &LpSolution,
    extracted: Option<&(Refutation, PseudoMeasure)>,
    restricted: bool,
) -> ResultBundle {
    ResultBundle {
        status: sol.status,
        optimum: sol.objective.as_ref().map(format_rat),
        iterations: sol.iterations,
        restricted,
        note: restricted.then(|| {
            "restricted-system optimum (upper bound on refutation strength, not certified duality \
             with the unrestricted system)"
                .to_string()
        }),
        refutation: extracted.map(|(r, _)| {
            serde_json::from_str(&r.to_json(system.axioms.len())).expect("valid json")
        }),
        pseudo_measure: extracted.map(|(_, mu)| PseudoMeasureBundle {
            values: mu.values.iter().map(format_rat).collect(),
            delta: format_rat(&mu.delta),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{build_clique_formula, poly_from};
    use crate::graph::BlockGraph;
    use crate::proof::{size_report, verify_canonical, verify_truth_table};
    use crate::rational::rat;

    fn one_system() -> PolynomialSystem {
        PolynomialSystem::free(
            0,
            vec![(
                "one".to_string(),
                poly_from(vec![(Monomial::one(), Rat::one())]),
            )],
        )
    }

    #[test]
    fn monomial_index_shape() {
        let idx = MonomialIndex::new(2, None).unwrap();
        assert_eq!(idx.len(), 9);
        assert!(idx.monomials()[0].is_one());
        let capped = MonomialIndex::new(2, Some(1)).unwrap();
        assert_eq!(capped.len(), 5); // 1, x0, x̄0, x1, x̄1
        assert!(MonomialIndex::new(20, None).is_err());
    }

    #[test]
    fn trivial_system_has_optimum_one_both_sides() {
        let sys = one_system();
        let idx = MonomialIndex::new(0, None).unwrap();
        let primal = build_primal(&sys, &idx).unwrap();
        assert_eq!(primal.lp.rows.len(), 1);
        let psol = solve(&primal).unwrap();
        assert_eq!(psol.objective.clone().unwrap(), Rat::one());
        let dual = build_dual(&sys, &idx).unwrap();
        let dsol = solve(&dual).unwrap();
        assert_eq!(dsol.objective.unwrap(), Rat::one());
        // extraction yields g = 1
        let (refutation, mu) = extract_solutions(&sys, &idx, &primal, &psol).unwrap();
        assert!(verify_canonical(&sys, &refutation).unwrap());
        assert_eq!(mu.delta, Rat::one());
        assert!(check_pseudo_measure(&mu, &sys, &mu.delta, &idx).pass);
    }

    #[test]
    fn k2n1_primal_and_dual_optimum_is_three() {
        let g = BlockGraph::empty(1, 2);
        let sys = build_clique_formula(&g);
        let idx = MonomialIndex::new(2, None).unwrap();
        let primal = build_primal(&sys, &idx).unwrap();
        assert_eq!(primal.lp.rows.len(), 4);
        let psol = solve(&primal).unwrap();
        assert_eq!(psol.objective.clone().unwrap(), rat_int(3));
        let dual = build_dual(&sys, &idx).unwrap();
        let dsol = solve(&dual).unwrap();
        assert_eq!(dsol.objective.clone().unwrap(), rat_int(3));
        // dual witness: mu vanishes on the all-zero assignment, 1 elsewhere
        assert_eq!(dsol.primal[0], Rat::zero());
        assert_eq!(dsol.primal[1], Rat::one());
        assert_eq!(dsol.primal[2], Rat::one());
        assert_eq!(dsol.primal[3], Rat::one());

        let (refutation, mu) = extract_solutions(&sys, &idx, &primal, &psol).unwrap();
        assert!(verify_truth_table(&sys, &refutation).unwrap());
        assert!(verify_canonical(&sys, &refutation).unwrap());
        let report = size_report(&refutation, &sys).unwrap();
        assert_eq!(report.lp_objective, rat_int(3));
        assert_eq!(mu.delta, rat(1, 3));
        let pm = check_pseudo_measure(&mu, &sys, &mu.delta, &idx);
        assert!(pm.pass, "{:?}", pm.first_violation);
    }

    #[test]
    fn complete_graph_is_infeasible_primal_unbounded_dual() {
        let g = BlockGraph::complete(1, 2); // single edge, has a clique
        let sys = build_clique_formula(&g);
        let idx = MonomialIndex::new(2, None).unwrap();
        let primal = build_primal(&sys, &idx).unwrap();
        assert_eq!(solve(&primal).unwrap().status, LpStatus::Infeasible);
        let dual = build_dual(&sys, &idx).unwrap();
        assert_eq!(solve(&dual).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn degree_cap_monotonicity() {
        let g = BlockGraph::empty(1, 2);
        let sys = build_clique_formula(&g);
        let mut prev: Option<Rat> = None;
        for cap in [0usize, 1, 2] {
            let idx = MonomialIndex::new(2, Some(cap)).unwrap();
            let primal = build_primal(&sys, &idx).unwrap();
            assert!(primal.restricted);
            let sol = solve(&primal).unwrap();
            if sol.status != LpStatus::Optimal {
                continue;
            }
            let obj = sol.objective.unwrap();
            if let Some(p) = prev {
                assert!(obj <= p, "optimum must not increase as the index grows");
            }
            prev = Some(obj);
        }
        // Full index matches the cap-2 value here (degree 2 suffices at kn=2).
        let full = solve(&build_primal(&sys, &MonomialIndex::new(2, None).unwrap()).unwrap())
            .unwrap()
            .objective
            .unwrap();
        assert_eq!(full, prev.unwrap());
    }

    #[test]
    fn perturbed_measure_fails_with_named_constraint() {
        let g = BlockGraph::empty(1, 2);
        let sys = build_clique_formula(&g);
        let idx = MonomialIndex::new(2, None).unwrap();
        let primal = build_primal(&sys, &idx).unwrap();
        let psol = solve(&primal).unwrap();
        let (_, mut mu) = extract_solutions(&sys, &idx, &primal, &psol).unwrap();
        mu.values[3] += Rat::one();
        let report = check_pseudo_measure(&mu, &sys, &mu.delta.clone(), &idx);
        assert!(!report.pass);
        assert!(report.first_violation.is_some());
    }

    #[test]
    fn point_mass_on_clique_assignment_is_exact_measure() {
        // Complete graph: the clique tuple's assignment satisfies all axioms,
        // so a point mass passes at delta = 0.
        let g = BlockGraph::complete(1, 2);
        let sys = build_clique_formula(&g);
        let idx = MonomialIndex::new(2, None).unwrap();
        let mut values = vec![Rat::zero(); 4];
        values[0b11] = Rat::one(); // both vertices chosen
        let mu = PseudoMeasure {
            num_vars: 2,
            values,
            delta: Rat::zero(),
        };
        let report = check_pseudo_measure(&mu, &sys, &Rat::zero(), &idx);
        assert!(report.pass, "{:?}", report.first_violation);
    }

    #[test]
    fn empty_system_rejected() {
        let sys = PolynomialSystem::free(0, vec![]);
        let idx = MonomialIndex::new(0, None).unwrap();
        assert!(matches!(
            build_primal(&sys, &idx),
            Err(LpError::EmptySystem)
        ));
        assert!(matches!(build_dual(&sys, &idx), Err(LpError::EmptySystem)));
    }

    #[test]
    fn lp_export_reimport_same_optimum() {
        let g = BlockGraph::empty(1, 2);
        let sys = build_clique_formula(&g);
        let idx = MonomialIndex::new(2, None).unwrap();
        let primal = build_primal(&sys, &idx).unwrap();
        let mut buf = Vec::new();
        write_lp(&primal.lp, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed = parse_lp(&text).unwrap();
        assert_eq!(parsed.num_vars, primal.lp.num_vars);
        assert_eq!(parsed.rows.len(), primal.lp.rows.len());
        let sol = simplex_solve(&parsed).unwrap();
        assert_eq!(sol.objective.unwrap(), rat_int(3));

        // single-axiom export has one constraint row
        let one = one_system();
        let idx0 = MonomialIndex::new(0, None).unwrap();
        let p0 = build_primal(&one, &idx0).unwrap();
        let mut buf = Vec::new();
        write_lp(&p0.lp, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("\n c").count(), 1);
    }

    #[test]
    fn lp_decimal_rendering() {
        assert_eq!(rat_to_lp_decimal(&rat_int(5)), "5");
        assert_eq!(rat_to_lp_decimal(&rat(1, 2)), "0.5");
        assert_eq!(rat_to_lp_decimal(&rat(-3, 4)), "-0.75");
        assert_eq!(rat_to_lp_decimal(&rat(1, 5)), "0.2");
        assert_eq!(parse_decimal("0.5").unwrap(), rat(1, 2));
        assert_eq!(parse_decimal("-0.75").unwrap(), rat(-3, 4));
        assert_eq!(parse_decimal("3").unwrap(), rat_int(3));
    }
}
