//! Bounded-variable LP interface used by the branch-and-bound engine.
//!
//! Relaxations are plain LPs: boxed variables, sparse linear rows, a linear
//! objective. The contract is deliberately narrow — `solve` returns an
//! optimal point, infeasibility, unboundedness or a numerical failure — so
//! the backend can be swapped without touching the engine. The current
//! backend is the Clarabel interior-point solver; every returned point is
//! re-verified against the rows and boxes before the engine sees it.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use std::collections::BTreeMap;

/// Relation of a linear row to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Ge,
    Eq,
}

/// A sparse linear row `Σ coeffs · x  (op)  rhs`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LinRow {
    pub coeffs: Vec<(usize, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

impl serde::Serialize for RowOp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            RowOp::Le => "<=",
            RowOp::Ge => ">=",
            RowOp::Eq => "=",
        })
    }
}

impl LinRow {
    pub fn new(coeffs: Vec<(usize, f64)>, op: RowOp, rhs: f64) -> Self {
        LinRow { coeffs, op, rhs }
    }

    /// Signed activity `Σ a·x` at a point.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    /// Amount by which the row is violated at `x` (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.op {
            RowOp::Le => (act - self.rhs).max(0.0),
            RowOp::Ge => (self.rhs - act).max(0.0),
            RowOp::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A complete LP: variable boxes, rows, objective.
#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Per-variable (lower, upper) bounds.
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<LinRow>,
    /// Dense objective coefficients (len = number of variables).
    pub objective: Vec<f64>,
    pub maximize: bool,
}

/// Result of an LP solve.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
    NumericalFailure(String),
}

/// Primal feasibility tolerance enforced on returned solutions (scaled).
pub const LP_FEAS_TOL: f64 = 2e-7;

/// Solve the LP. Deterministic: identical inputs produce identical outputs.
pub fn solve(problem: &LpProblem) -> LpOutcome {
    match solve_once(problem) {
        // Infeasibility is double-checked through an elastic reformulation,
        // which is feasible by construction: a positive minimum violation
        // certifies infeasibility, otherwise the big-M solve recovers a
        // usable optimum.
        LpOutcome::Infeasible => solve_elastic(problem),
        other => other,
    }
}

fn solve_once(problem: &LpProblem) -> LpOutcome {
    let n = problem.bounds.len();
    // Fold fixed variables into constants: fewer columns and a better
    // conditioned KKT system.
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut col_of: Vec<usize> = vec![usize::MAX; n];
    let mut cols = 0usize;
    for (i, &(lo, hi)) in problem.bounds.iter().enumerate() {
        if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            fixed[i] = Some(0.5 * (lo + hi));
        } else {
            col_of[i] = cols;
            cols += 1;
        }
    }

    // Constraint rows in conic form A x + s = b, s ∈ {0} × R₊.
    // Equalities first, then inequalities (including variable bounds).
    let mut triplets_eq: Vec<(usize, usize, f64)> = Vec::new();
    let mut b_eq: Vec<f64> = Vec::new();
    let mut triplets_ge: Vec<(usize, usize, f64)> = Vec::new();
    let mut b_ge: Vec<f64> = Vec::new();

    for row in &problem.rows {
        let mut agg: BTreeMap<usize, f64> = BTreeMap::new();
        let mut rhs = row.rhs;
        for &(i, a) in &row.coeffs {
            match fixed[i] {
                Some(v) => rhs -= a * v,
                None => *agg.entry(col_of[i]).or_insert(0.0) += a,
            }
        }
        agg.retain(|_, a| *a != 0.0);
        if agg.is_empty() {
            let tol = 1e-9 * (1.0 + row.rhs.abs());
            let ok = match row.op {
                RowOp::Le => 0.0 <= rhs + tol,
                RowOp::Ge => 0.0 >= rhs - tol,
                RowOp::Eq => rhs.abs() <= tol,
            };
            if !ok {
                return LpOutcome::Infeasible;
            }
            continue;
        }
        // Normalize by the largest magnitude.
        let scale = 1.0 / agg.values().fold(0.0_f64, |m, a| m.max(a.abs()));
        match row.op {
            RowOp::Eq => {
                let r = b_eq.len();
                for (c, a) in agg {
                    triplets_eq.push((r, c, a * scale));
                }
                b_eq.push(rhs * scale);
            }
            RowOp::Le => {
                let r = b_ge.len();
                for (c, a) in agg {
                    triplets_ge.push((r, c, a * scale));
                }
                b_ge.push(rhs * scale);
            }
            RowOp::Ge => {
                let r = b_ge.len();
                for (c, a) in agg {
                    triplets_ge.push((r, c, -a * scale));
                }
                b_ge.push(-rhs * scale);
            }
        }
    }
    // Infinite boxes get an artificial cap; an optimum pressing against the
    // cap is reported as unbounded.
    const ARTIFICIAL_CAP: f64 = 1e12;
    let mut capped = Vec::new();
    for (i, &(lo, hi)) in problem.bounds.iter().enumerate() {
        if fixed[i].is_some() {
            continue;
        }
        let r = b_ge.len();
        triplets_ge.push((r, col_of[i], 1.0));
        if hi.is_finite() {
            b_ge.push(hi);
        } else {
            b_ge.push(ARTIFICIAL_CAP);
            capped.push(i);
        }
        let r = b_ge.len();
        triplets_ge.push((r, col_of[i], -1.0));
        if lo.is_finite() {
            b_ge.push(-lo);
        } else {
            b_ge.push(ARTIFICIAL_CAP);
            capped.push(i);
        }
    }

    let m_eq = b_eq.len();
    let m_ge = b_ge.len();
    let mut triplets = triplets_eq;
    triplets.extend(triplets_ge.into_iter().map(|(r, c, a)| (r + m_eq, c, a)));
    let mut b = b_eq;
    b.extend(b_ge);

    // Objective: Clarabel minimizes.
    let sense = if problem.maximize { -1.0 } else { 1.0 };
    let mut q = vec![0.0; cols];
    let mut objective_offset = 0.0;
    for i in 0..n {
        match fixed[i] {
            Some(v) => objective_offset += problem.objective[i] * v,
            None => q[col_of[i]] = sense * problem.objective[i],
        }
    }

    // No constraints at all: optimize each variable against its own box.
    if b.is_empty() {
        let mut x = vec![0.0; n];
        let mut value = 0.0;
        for i in 0..n {
            let (lo, hi) = problem.bounds[i];
            let c = problem.objective[i];
            let want_high = (c > 0.0) == problem.maximize;
            x[i] = match fixed[i] {
                Some(v) => v,
                None if c == 0.0 => lo.max(hi.min(0.0)),
                None => {
                    let target = if want_high { hi } else { lo };
                    if !target.is_finite() {
                        return LpOutcome::Unbounded;
                    }
                    target
                }
            };
            value += c * x[i];
        }
        return LpOutcome::Optimal { x, value };
    }

    let a_mat = csc_from_triplets(m_eq + m_ge, cols, &mut triplets);
    let p_mat = CscMatrix::<f64>::zeros((cols, cols));
    let cones = [
        SupportedConeT::ZeroConeT(m_eq),
        SupportedConeT::NonnegativeConeT(m_ge),
    ];
    let settings = DefaultSettings {
        verbose: false,
        ..DefaultSettings::default()
    };
    let mut solver = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings)
    })) {
        Ok(Ok(solver)) => solver,
        Ok(Err(e)) => return LpOutcome::NumericalFailure(format!("solver setup: {e:?}")),
        Err(_) => return LpOutcome::NumericalFailure("solver setup panicked".into()),
    };
    if std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| solver.solve())).is_err() {
        return LpOutcome::NumericalFailure("solver panicked".into());
    }

    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let xs = &solver.solution.x;
            let x: Vec<f64> = (0..n)
                .map(|i| match fixed[i] {
                    Some(v) => v,
                    None => xs[col_of[i]],
                })
                .collect();
            for &i in &capped {
                if x[i].abs() >= 0.99 * ARTIFICIAL_CAP {
                    return LpOutcome::Unbounded;
                }
            }
            // The backend is trusted but verified: reject points violating
            // rows or boxes beyond tolerance.
            for (i, &(lo, hi)) in problem.bounds.iter().enumerate() {
                let scale = 1.0 + lo.abs().max(hi.abs());
                if x[i] < lo - LP_FEAS_TOL * scale || x[i] > hi + LP_FEAS_TOL * scale {
                    return LpOutcome::NumericalFailure(format!(
                        "variable {i} = {} outside [{lo}, {hi}]",
                        x[i]
                    ));
                }
            }
            for (r, row) in problem.rows.iter().enumerate() {
                let scale = 1.0 + row.rhs.abs();
                if row.violation(&x) > LP_FEAS_TOL * scale {
                    return LpOutcome::NumericalFailure(format!(
                        "row {r} violated by {}",
                        row.violation(&x)
                    ));
                }
            }
            let value = sense * solver.solution.obj_val + objective_offset;
            LpOutcome::Optimal { x, value }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            LpOutcome::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => LpOutcome::Unbounded,
        other => LpOutcome::NumericalFailure(format!("solver status {other:?}")),
    }
}

fn csc_from_triplets(m: usize, n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    colptr.push(0);
    let mut col = 0usize;
    for &(r, c, v) in triplets.iter() {
        while col < c {
            colptr.push(rowval.len());
            col += 1;
        }
        rowval.push(r);
        nzval.push(v);
    }
    while col < n {
        colptr.push(rowval.len());
        col += 1;
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

/// Elastic feasibility tolerance: total row violation below this counts as
/// feasible.
const ELASTIC_TOL: f64 = 1e-7;

fn solve_elastic(problem: &LpProblem) -> LpOutcome {
    // Phase 1: minimize the total row violation.
    match solve_once(&elastic_problem(problem, None)) {
        LpOutcome::Optimal { value, .. } => {
            let scale = 1.0 + problem.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
            let total_violation = if problem.maximize { -value } else { value };
            if total_violation > ELASTIC_TOL * scale {
                return LpOutcome::Infeasible;
            }
        }
        LpOutcome::Infeasible => return LpOutcome::Infeasible,
        other => return other,
    }
    // Phase 2: original objective with violations priced out.
    let obj_scale = problem.objective.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let big_m = 1e7 * (1.0 + obj_scale);
    match solve_once(&elastic_problem(problem, Some(big_m))) {
        LpOutcome::Optimal { x, .. } => {
            let x: Vec<f64> = x[..problem.bounds.len()].to_vec();
            for (r, row) in problem.rows.iter().enumerate() {
                let scale = 1.0 + row.rhs.abs();
                if row.violation(&x) > LP_FEAS_TOL * scale {
                    return LpOutcome::NumericalFailure(format!(
                        "elastic solution leaves row {r} violated by {}",
                        row.violation(&x)
                    ));
                }
            }
            let value = problem
                .objective
                .iter()
                .enumerate()
                .map(|(i, c)| c * x[i])
                .sum();
            LpOutcome::Optimal { x, value }
        }
        LpOutcome::Infeasible => {
            LpOutcome::NumericalFailure("elastic reformulation reported infeasible".into())
        }
        other => other,
    }
}

/// The elastic companion of an LP: every row gets nonnegative violation
/// slacks. With `objective = None` the slack sum alone is minimized; with a
/// big-M, the original objective is kept and violations are penalized.
fn elastic_problem(problem: &LpProblem, objective: Option<f64>) -> LpProblem {
    let n = problem.bounds.len();
    let penalty = |m: f64| if problem.maximize { -m } else { m };
    let mut bounds = problem.bounds.clone();
    let mut obj = match objective {
        Some(_) => problem.objective.clone(),
        None => vec![0.0; n],
    };
    let m = objective.unwrap_or(1.0);
    let mut rows = Vec::with_capacity(problem.rows.len());
    for row in &problem.rows {
        let mut coeffs = row.coeffs.clone();
        match row.op {
            RowOp::Le => {
                bounds.push((0.0, f64::INFINITY));
                obj.push(penalty(m));
                coeffs.push((bounds.len() - 1, -1.0));
            }
            RowOp::Ge => {
                bounds.push((0.0, f64::INFINITY));
                obj.push(penalty(m));
                coeffs.push((bounds.len() - 1, 1.0));
            }
            RowOp::Eq => {
                bounds.push((0.0, f64::INFINITY));
                obj.push(penalty(m));
                coeffs.push((bounds.len() - 1, 1.0));
                bounds.push((0.0, f64::INFINITY));
                obj.push(penalty(m));
                coeffs.push((bounds.len() - 1, -1.0));
            }
        }
        rows.push(LinRow::new(coeffs, row.op, row.rhs));
    }
    LpProblem { bounds, rows, objective: obj, maximize: problem.maximize }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_maximum() {
        let p = LpProblem {
            bounds: vec![(0.0, 10.0)],
            rows: vec![LinRow::new(vec![(0, 1.0)], RowOp::Le, 3.0)],
            objective: vec![1.0],
            maximize: true,
        };
        match solve(&p) {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 3.0).abs() < 1e-7);
                assert!((x[0] - 3.0).abs() < 1e-7);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn contradictory_rows_infeasible() {
        let p = LpProblem {
            bounds: vec![(0.0, 10.0)],
            rows: vec![
                LinRow::new(vec![(0, 1.0)], RowOp::Le, 1.0),
                LinRow::new(vec![(0, 1.0)], RowOp::Ge, 2.0),
            ],
            objective: vec![1.0],
            maximize: true,
        };
        assert!(matches!(solve(&p), LpOutcome::Infeasible));
    }

    #[test]
    fn free_maximum_unbounded() {
        let p = LpProblem {
            bounds: vec![(0.0, f64::INFINITY)],
            rows: vec![],
            objective: vec![1.0],
            maximize: true,
        };
        assert!(matches!(solve(&p), LpOutcome::Unbounded));
    }

    #[test]
    fn fixed_variables_and_equalities() {
        // x fixed to 2, y = 3 - x.
        let p = LpProblem {
            bounds: vec![(2.0, 2.0), (0.0, 10.0)],
            rows: vec![LinRow::new(vec![(0, 1.0), (1, 1.0)], RowOp::Eq, 3.0)],
            objective: vec![0.0, 1.0],
            maximize: true,
        };
        match solve(&p) {
            LpOutcome::Optimal { x, .. } => assert!((x[1] - 1.0).abs() < 1e-7),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn minimization_sense() {
        let p = LpProblem {
            bounds: vec![(-5.0, 5.0)],
            rows: vec![LinRow::new(vec![(0, 1.0)], RowOp::Ge, -2.0)],
            objective: vec![1.0],
            maximize: false,
        };
        match solve(&p) {
            LpOutcome::Optimal { x, value } => {
                assert!((value - -2.0).abs() < 1e-7);
                assert!((x[0] - -2.0).abs() < 1e-7);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }
}
