//! Exact rational linear programming.
//!
//! The core is a two-phase primal simplex in standard form (min c'x, Ax = b,
//! x >= 0) over `BigRational` with Bland's anti-cycling rule and a
//! deterministic column order, so optima are exact and extracted witnesses are
//! reproducible. A general-form wrapper handles senses, inequality rows and
//! free variables, and solves many-row/few-column instances through their
//! generic dual so the basis stays small.

use crate::rational::Rat;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("row {row} references variable {var} outside 0..{nvars}")]
    BadIndex { row: usize, var: usize, nvars: usize },
    #[error("iteration guard of {0} pivots exceeded")]
    IterationGuard(u64),
    #[error("dual of the instance is infeasible and the origin is not feasible; status indeterminate")]
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarBound {
    NonNeg,
    Free,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    pub coeffs: Vec<(usize, Rat)>,
    pub rel: Relation,
    pub rhs: Rat,
}

/// A general-form linear program.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub sense: Sense,
    pub num_vars: usize,
    pub objective: Vec<Rat>,
    pub bounds: Vec<VarBound>,
    pub rows: Vec<LpRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution bundle: at `Optimal`, `primal` has one value per variable and
/// `dual` one value per row (oriented so that `dual . rhs == objective`).
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: Option<Rat>,
    pub primal: Vec<Rat>,
    pub dual: Vec<Rat>,
    pub iterations: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Pivot budget before giving up.
    pub max_iterations: u64,
    /// Solve through the generic dual when rows outnumber columns by this
    /// factor (the basis then stays at the column count).
    pub dualize_row_factor: usize,
    /// Test hook: always take the dual route when the shape allows it.
    pub force_dualize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 4_000_000,
            dualize_row_factor: 4,
            force_dualize: false,
        }
    }
}

pub fn solve_exact(lp: &LpProblem) -> Result<LpSolution, SimplexError> {
    solve_exact_with(lp, &SolveOptions::default())
}

pub fn solve_exact_with(lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, SimplexError> {
    for (ri, row) in lp.rows.iter().enumerate() {
        for (v, _) in &row.coeffs {
            if *v >= lp.num_vars {
                return Err(SimplexError::BadIndex {
                    row: ri,
                    var: *v,
                    nvars: lp.num_vars,
                });
            }
        }
    }
    let dualizable = lp.sense == Sense::Max
        && lp.bounds.iter().all(|b| *b == VarBound::Free)
        && lp.rows.iter().all(|r| r.rel != Relation::Eq);
    if dualizable
        && (opts.force_dualize
            || lp.rows.len() > opts.dualize_row_factor.saturating_mul(lp.num_vars.max(1)))
    {
        solve_via_dual(lp, opts)
    } else {
        solve_general(lp, opts)
    }
}

// ---------------------------------------------------------------------------
// Generic dual route for max / free-variable / inequality instances
// ---------------------------------------------------------------------------

/// For `max c'x, A x <= b` (after orienting every inequality as `<=`) over
/// free `x`, the dual `min b'y, A'y = c, y >= 0` has one row per original
/// variable. Its optimal primal point is the original dual vector and its
/// dual point is the original primal point.
fn solve_via_dual(lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, SimplexError> {
    let mut row_sign: Vec<Rat> = Vec::with_capacity(lp.rows.len());
    // Transposed columns: dual variable i has column = oriented row i.
    let mut dual_rows: Vec<LpRow> = (0..lp.num_vars)
        .map(|j| LpRow {
            coeffs: Vec::new(),
            rel: Relation::Eq,
            rhs: lp.objective[j].clone(),
        })
        .collect();
    let mut dual_obj = Vec::with_capacity(lp.rows.len());
    for (i, row) in lp.rows.iter().enumerate() {
        let sign = match row.rel {
            Relation::Le => Rat::one(),
            Relation::Ge => -Rat::one(),
            Relation::Eq => unreachable!("checked by caller"),
        };
        for (v, c) in &row.coeffs {
            dual_rows[*v].coeffs.push((i, c * &sign));
        }
        dual_obj.push(&row.rhs * &sign);
        row_sign.push(sign);
    }
    let dual = LpProblem {
        sense: Sense::Min,
        num_vars: lp.rows.len(),
        objective: dual_obj,
        bounds: vec![VarBound::NonNeg; lp.rows.len()],
        rows: dual_rows,
    };
    let sol = solve_general(&dual, opts)?;
    match sol.status {
        LpStatus::Optimal => {
            let primal: Vec<Rat> = sol.dual.clone();
            let dual_vals: Vec<Rat> = sol
                .primal
                .iter()
                .zip(&row_sign)
                .map(|(y, s)| y * s)
                .collect();
            // The recovered point must satisfy the original rows exactly.
            debug_assert!(lp.rows.iter().all(|row| {
                let lhs: Rat = row.coeffs.iter().map(|(v, c)| c * &primal[*v]).sum();
                match row.rel {
                    Relation::Le => lhs <= row.rhs,
                    Relation::Ge => lhs >= row.rhs,
                    Relation::Eq => lhs == row.rhs,
                }
            }));
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: sol.objective,
                primal,
                dual: dual_vals,
                iterations: sol.iterations,
            })
        }
        LpStatus::Infeasible => {
            // Dual infeasible: original is unbounded or infeasible. The origin
            // decides whenever it is feasible.
            let origin_ok = lp.rows.iter().all(|row| match row.rel {
                Relation::Le => !row.rhs.is_negative(),
                Relation::Ge => !row.rhs.is_positive(),
                Relation::Eq => row.rhs.is_zero(),
            });
            if origin_ok {
                Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    objective: None,
                    primal: vec![],
                    dual: vec![],
                    iterations: sol.iterations,
                })
            } else {
                Err(SimplexError::Indeterminate)
            }
        }
        LpStatus::Unbounded => Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: None,
            primal: vec![],
            dual: vec![],
            iterations: sol.iterations,
        }),
    }
}

// ---------------------------------------------------------------------------
// General form -> standard form
// ---------------------------------------------------------------------------

fn solve_general(lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, SimplexError> {
    let minimize = lp.sense == Sense::Min;
    // Variable mapping: NonNeg -> one std column, Free -> plus/minus pair.
    let mut var_cols: Vec<(usize, Option<usize>)> = Vec::with_capacity(lp.num_vars);
    let mut num_std = 0usize;
    for b in &lp.bounds {
        match b {
            VarBound::NonNeg => {
                var_cols.push((num_std, None));
                num_std += 1;
            }
            VarBound::Free => {
                var_cols.push((num_std, Some(num_std + 1)));
                num_std += 2;
            }
        }
    }
    let mut costs = vec![Rat::zero(); num_std];
    for (j, c) in lp.objective.iter().enumerate() {
        let signed = if minimize { c.clone() } else { -c.clone() };
        let (p, m) = &var_cols[j];
        costs[*p] = signed.clone();
        if let Some(m) = m {
            costs[*m] = -signed;
        }
    }
    // Slack columns for inequalities.
    let mut next_col = num_std;
    let slack_of_row: Vec<Option<usize>> = lp
        .rows
        .iter()
        .map(|r| match r.rel {
            Relation::Eq => None,
            _ => {
                let idx = next_col;
                next_col += 1;
                Some(idx)
            }
        })
        .collect();
    num_std = next_col;
    costs.resize(num_std, Rat::zero());
    let m = lp.rows.len();
    let mut cols: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); num_std];
    let mut b: Vec<Rat> = Vec::with_capacity(m);
    let mut row_flip: Vec<bool> = Vec::with_capacity(m);
    for (i, row) in lp.rows.iter().enumerate() {
        let flip = row.rhs.is_negative();
        row_flip.push(flip);
        let sgn = if flip { -Rat::one() } else { Rat::one() };
        b.push(&row.rhs * &sgn);
        for (v, c) in &row.coeffs {
            if c.is_zero() {
                continue;
            }
            let val = c * &sgn;
            let (p, mneg) = &var_cols[*v];
            cols[*p].push((i, val.clone()));
            if let Some(mneg) = mneg {
                cols[*mneg].push((i, -val));
            }
        }
        if let Some(s) = slack_of_row[i] {
            let coef = match row.rel {
                Relation::Le => Rat::one(),
                Relation::Ge => -Rat::one(),
                Relation::Eq => unreachable!(),
            } * &sgn;
            cols[s].push((i, coef));
        }
    }
    for col in &mut cols {
        col.sort_unstable_by_key(|(r, _)| *r);
        // Merge duplicate row entries from repeated variable mentions.
        let mut merged: Vec<(usize, Rat)> = Vec::with_capacity(col.len());
        for (r, v) in col.drain(..) {
            match merged.last_mut() {
                Some((lr, lv)) if *lr == r => *lv += v,
                _ => merged.push((r, v)),
            }
        }
        merged.retain(|(_, v)| !v.is_zero());
        *col = merged;
    }

    let std = StdProblem { m, cols, costs, b };
    let res = solve_std(&std, opts)?;
    match res.status {
        LpStatus::Optimal => {
            let mut primal = Vec::with_capacity(lp.num_vars);
            for (p, mneg) in &var_cols {
                let v = match mneg {
                    None => res.x[*p].clone(),
                    Some(mneg) => &res.x[*p] - &res.x[*mneg],
                };
                primal.push(v);
            }
            let obj = if minimize {
                res.obj.clone()
            } else {
                -res.obj.clone()
            };
            let dual: Vec<Rat> = res
                .y
                .iter()
                .zip(&row_flip)
                .map(|(y, flip)| {
                    let v = if *flip { -y.clone() } else { y.clone() };
                    if minimize {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            // Internal consistency: objective equals dual value of the rhs.
            debug_assert_eq!(
                obj,
                dual.iter()
                    .zip(&lp.rows)
                    .map(|(y, r)| y * &r.rhs)
                    .sum::<Rat>()
            );
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: Some(obj),
                primal,
                dual,
                iterations: res.iterations,
            })
        }
        status => Ok(LpSolution {
            status,
            objective: None,
            primal: vec![],
            dual: vec![],
            iterations: res.iterations,
        }),
    }
}

// ---------------------------------------------------------------------------
// Standard-form two-phase simplex
// ---------------------------------------------------------------------------

struct StdProblem {
    m: usize,
    cols: Vec<Vec<(usize, Rat)>>,
    costs: Vec<Rat>,
    b: Vec<Rat>,
}

struct StdResult {
    status: LpStatus,
    x: Vec<Rat>,
    y: Vec<Rat>,
    obj: Rat,
    iterations: u64,
}

struct Tableau<'a> {
    p: &'a StdProblem,
    /// basis[i] = column index occupying row i; >= n means artificial i - n.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<Vec<Rat>>,
    xb: Vec<Rat>,
    iterations: u64,
}

impl<'a> Tableau<'a> {
    fn new(p: &'a StdProblem) -> Self {
        let m = p.m;
        let n = p.cols.len();
        let mut binv = vec![vec![Rat::zero(); m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = Rat::one();
        }
        let mut in_basis = vec![false; n + m];
        for j in n..n + m {
            in_basis[j] = true;
        }
        Tableau {
            p,
            basis: (n..n + m).collect(),
            in_basis,
            binv,
            xb: p.b.clone(),
            iterations: 0,
        }
    }

    /// y' = cB' * B^-1 for the given cost assignment.
    fn dual_prices(&self, cost_of: &dyn Fn(usize) -> Rat) -> Vec<Rat> {
        let m = self.p.m;
        let mut y = vec![Rat::zero(); m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let c = cost_of(bj);
            if c.is_zero() {
                continue;
            }
            for r in 0..m {
                if !self.binv[i][r].is_zero() {
                    y[r] += &c * &self.binv[i][r];
                }
            }
        }
        y
    }

    fn direction(&self, j: usize) -> Vec<Rat> {
        let m = self.p.m;
        let n = self.p.cols.len();
        let mut d = vec![Rat::zero(); m];
        if j < n {
            for (r, v) in &self.p.cols[j] {
                if v.is_zero() {
                    continue;
                }
                for i in 0..m {
                    if !self.binv[i][*r].is_zero() {
                        d[i] += &self.binv[i][*r] * v;
                    }
                }
            }
        } else {
            let r = j - n;
            for i in 0..m {
                d[i] = self.binv[i][r].clone();
            }
        }
        d
    }

    fn pivot(&mut self, row: usize, col: usize, d: &[Rat]) {
        let m = self.p.m;
        let pivot_val = d[row].clone();
        debug_assert!(!pivot_val.is_zero());
        for r in 0..m {
            if !self.binv[row][r].is_zero() {
                self.binv[row][r] = &self.binv[row][r] / &pivot_val;
            }
        }
        let theta = &self.xb[row] / &pivot_val;
        for i in 0..m {
            if i == row || d[i].is_zero() {
                continue;
            }
            for r in 0..m {
                if !self.binv[row][r].is_zero() {
                    let delta = &d[i] * &self.binv[row][r];
                    self.binv[i][r] -= delta;
                }
            }
            let delta = &d[i] * &theta;
            self.xb[i] -= delta;
        }
        self.xb[row] = theta;
        self.in_basis[self.basis[row]] = false;
        self.in_basis[col] = true;
        self.basis[row] = col;
    }

    /// One simplex phase with Bland's rule. `enterable` limits the candidate
    /// entering columns; basic artificials may leave at zero so they never
    /// regrow. Returns false on an unbounded direction.
    fn run_phase(
        &mut self,
        cost_of: &dyn Fn(usize) -> Rat,
        enterable: &dyn Fn(usize) -> bool,
        opts: &SolveOptions,
    ) -> Result<bool, SimplexError> {
        let n = self.p.cols.len();
        loop {
            self.iterations += 1;
            if self.iterations > opts.max_iterations {
                return Err(SimplexError::IterationGuard(opts.max_iterations));
            }
            let y = self.dual_prices(cost_of);
            // Bland: smallest-index column with negative reduced cost.
            let mut entering = None;
            'scan: for j in 0..n {
                if !enterable(j) || self.in_basis[j] {
                    continue;
                }
                let mut rc = cost_of(j);
                for (r, v) in &self.p.cols[j] {
                    if !y[*r].is_zero() {
                        rc -= &y[*r] * v;
                    }
                }
                if rc.is_negative() {
                    entering = Some(j);
                    break 'scan;
                }
            }
            let Some(j) = entering else {
                return Ok(true); // optimal for this phase
            };
            let d = self.direction(j);
            // Ratio test; basic artificials at zero may leave on any nonzero
            // direction entry so they never turn positive.
            let mut leave: Option<(usize, Rat)> = None;
            for i in 0..self.p.m {
                let candidate = if d[i].is_positive() {
                    Some(&self.xb[i] / &d[i])
                } else if self.basis[i] >= n && !d[i].is_zero() && self.xb[i].is_zero() {
                    Some(Rat::zero())
                } else {
                    None
                };
                if let Some(ratio) = candidate {
                    let better = match &leave {
                        None => true,
                        Some((cur, best)) => {
                            ratio < *best || (ratio == *best && self.basis[i] < self.basis[*cur])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                None => return Ok(false), // unbounded direction
                Some((row, _)) => self.pivot(row, j, &d),
            }
        }
    }
}

fn solve_std(p: &StdProblem, opts: &SolveOptions) -> Result<StdResult, SimplexError> {
    let n = p.cols.len();
    let m = p.m;
    debug_assert!(p.b.iter().all(|v| !v.is_negative()));
    let mut t = Tableau::new(p);

    // Phase 1: minimize the sum of artificials.
    let phase1_cost = |j: usize| {
        if j >= n {
            Rat::one()
        } else {
            Rat::zero()
        }
    };
    let finished = t.run_phase(&phase1_cost, &|_| true, opts)?;
    debug_assert!(finished, "phase 1 is bounded below by zero");
    let infeas: Rat = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(&bj, _)| bj >= n)
        .map(|(_, v)| v.clone())
        .sum();
    if !infeas.is_zero() {
        return Ok(StdResult {
            status: LpStatus::Infeasible,
            x: vec![],
            y: vec![],
            obj: Rat::zero(),
            iterations: t.iterations,
        });
    }
    // Drive out basic artificials where a structural pivot exists; rows that
    // admit none are redundant and keep their artificial pinned at zero.
    for row in 0..m {
        if t.basis[row] < n {
            continue;
        }
        for j in 0..n {
            if t.in_basis[j] {
                continue;
            }
            let d = t.direction(j);
            if !d[row].is_zero() {
                t.pivot(row, j, &d);
                break;
            }
        }
    }

    // Phase 2 over the true costs; artificials may not re-enter.
    let phase2_cost = |j: usize| {
        if j < n {
            p.costs[j].clone()
        } else {
            Rat::zero()
        }
    };
    let optimal = t.run_phase(&phase2_cost, &|j| j < n, opts)?;
    if !optimal {
        return Ok(StdResult {
            status: LpStatus::Unbounded,
            x: vec![],
            y: vec![],
            obj: Rat::zero(),
            iterations: t.iterations,
        });
    }
    let mut x = vec![Rat::zero(); n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            x[bj] = t.xb[i].clone();
        } else {
            debug_assert!(t.xb[i].is_zero());
        }
    }
    let y = t.dual_prices(&phase2_cost);
    let obj: Rat = (0..n).map(|j| &p.costs[j] * &x[j]).sum();
    // Strong duality and feasibility, exactly.
    debug_assert_eq!(obj, y.iter().zip(&p.b).map(|(a, b)| a * b).sum::<Rat>());
    #[cfg(debug_assertions)]
    {
        let mut ax = vec![Rat::zero(); m];
        for (j, col) in p.cols.iter().enumerate() {
            if x[j].is_zero() {
                continue;
            }
            for (r, v) in col {
                ax[*r] += v * &x[j];
            }
        }
        debug_assert_eq!(ax, p.b);
    }
    Ok(StdResult {
        status: LpStatus::Optimal,
        x,
        y,
        obj,
        iterations: t.iterations,
    })
}
