//! Node LP relaxations: envelope rows from the node's boxes, a shared pool of
//! globally valid cuts, and the outer-approximation loop for the convex rows.

use crate::lp::{self, LinRow, LpOutcome, LpProblem, RowOp};
use crate::model::{
    mccormick_envelope, square_envelope, square_tangent, ModelInstance, QuadRow, RotatedConeRow,
    Variant,
};
use std::collections::BTreeSet;

/// Convex-row violation tolerance for outer approximation.
pub const OA_TOL: f64 = 1e-8;
/// Cut rounds per node while binaries are fractional; the pool carries cuts
/// across nodes, so shallow nodes need only seed it.
const OA_FRACTIONAL_ROUNDS: usize = 3;
/// Cut rounds once the binaries are integral (leaf values need converged
/// convex rows).
const OA_MAX_ROUNDS: usize = 60;
/// Violated entities cut per round at fractional nodes.
const OA_TOP_K: usize = 12;

type CutKey = (u8, usize, i64, i64);

/// One globally valid cut together with its dedup key.
#[derive(Debug, Clone)]
pub struct CutRecord {
    key: CutKey,
    pub row: LinRow,
}

fn cut_key(kind: u8, entity: usize, a: f64, b: f64) -> CutKey {
    (kind, entity, (a * 1e4).round() as i64, (b * 1e4).round() as i64)
}

/// Globally valid linear cuts accumulated over the whole solve.
#[derive(Debug, Default)]
pub struct CutPool {
    pub rows: Vec<LinRow>,
    seen: BTreeSet<CutKey>,
}

impl CutPool {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn snapshot(&self) -> Vec<LinRow> {
        self.rows.clone()
    }

    /// Merge worker-discovered cuts, dropping duplicates.
    pub fn merge(&mut self, records: Vec<CutRecord>) -> usize {
        let mut added = 0;
        for rec in records {
            if self.seen.insert(rec.key) {
                self.rows.push(rec.row);
                added += 1;
            }
        }
        added
    }
}

/// Outcome of relaxing one node.
#[derive(Debug)]
pub enum RelaxOutcome {
    /// LP optimum with every convex row satisfied to `OA_TOL`.
    Bounded { x: Vec<f64>, value: f64 },
    Infeasible,
    /// Backend failure that survived a retry.
    Failure(String),
}

/// The rotated cones the engine enforces: the explicit rows of the conic
/// variant, or the cones implied by the bilinear equalities of the exact one
/// (valid since equality implies the ≥ direction).
pub fn effective_cones(model: &ModelInstance) -> Vec<RotatedConeRow> {
    match model.variant {
        Variant::Conic => model.cones.clone(),
        Variant::Exact => model
            .bilinear_groups
            .iter()
            .map(|g| RotatedConeRow { bus: g.bus, w: g.w, ell: g.ell, p: g.p, q: g.q })
            .collect(),
        Variant::LinDistFlow => Vec::new(),
    }
}

/// Assemble and solve the LP for one node, adding outer-approximation cuts
/// until the convex rows hold. Returns the outcome, the new globally valid
/// cuts discovered, and the number of LP solves spent.
pub fn solve_node_relaxation(
    model: &ModelInstance,
    boxes: &[(f64, f64)],
    cones: &[RotatedConeRow],
    pool_rows: &[LinRow],
    maximize_obj: &[f64],
) -> (RelaxOutcome, Vec<CutRecord>, u64) {
    let mut rows = base_rows(model, boxes);
    rows.extend(pool_rows.iter().cloned());

    let mut problem = LpProblem {
        bounds: boxes.to_vec(),
        rows,
        objective: maximize_obj.to_vec(),
        maximize: true,
    };

    let mut new_cuts: Vec<CutRecord> = Vec::new();
    let mut local_seen: BTreeSet<CutKey> = BTreeSet::new();
    let mut lp_solves = 0u64;
    let mut retried = false;
    let mut prev_value = f64::INFINITY;
    let mut last: Option<(Vec<f64>, f64)> = None;
    for round in 0..OA_MAX_ROUNDS {
        lp_solves += 1;
        let outcome = lp::solve(&problem);
        let (x, value) = match outcome {
            LpOutcome::Optimal { x, value } => (x, value),
            LpOutcome::Infeasible => return (RelaxOutcome::Infeasible, new_cuts, lp_solves),
            LpOutcome::Unbounded => {
                return (
                    RelaxOutcome::Failure("node LP unbounded despite finite boxes".into()),
                    new_cuts,
                    lp_solves,
                )
            }
            LpOutcome::NumericalFailure(msg) => {
                if retried {
                    return (RelaxOutcome::Failure(msg), new_cuts, lp_solves);
                }
                retried = true;
                // One retry with marginally widened boxes; still a valid
                // relaxation since the feasible set only grows.
                for (lo, hi) in problem.bounds.iter_mut() {
                    let pad = 1e-10 * (1.0 + lo.abs().max(hi.abs()));
                    *lo -= pad;
                    *hi += pad;
                }
                continue;
            }
        };

        // While binaries are fractional the node bound is loose regardless;
        // seed a few cuts into the pool and move on. Integral nodes get the
        // full convergence loop so leaf values are trustworthy.
        let integral = model
            .index
            .pi
            .iter()
            .all(|&v| (x[v] - x[v].round()).abs() <= 1e-6);
        let stalled = (prev_value - value).abs() <= 1e-9 * value.abs().max(1.0);
        prev_value = value;
        if !integral && (round + 1 >= OA_FRACTIONAL_ROUNDS || (round > 0 && stalled)) {
            // Harvest one last batch of cuts for the pool before returning.
            collect_cuts(model, cones, &x, usize::MAX, &mut local_seen, &mut new_cuts, None);
            return (RelaxOutcome::Bounded { x, value }, new_cuts, lp_solves);
        }

        let budget = if integral { usize::MAX } else { OA_TOP_K };
        let added = collect_cuts(
            model,
            cones,
            &x,
            budget,
            &mut local_seen,
            &mut new_cuts,
            Some(&mut problem),
        );
        if added == 0 {
            return (RelaxOutcome::Bounded { x, value }, new_cuts, lp_solves);
        }
        last = Some((x, value));
    }
    // Cut budget exhausted: the last LP value is still a valid bound.
    match last {
        Some((x, value)) => (RelaxOutcome::Bounded { x, value }, new_cuts, lp_solves),
        None => (RelaxOutcome::Failure("no LP solution retained".into()), new_cuts, lp_solves),
    }
}

/// Gather tangent cuts for violated convex rows at `x`, keeping the `budget`
/// most violated. Cuts are recorded for the pool and, when `problem` is
/// given, appended to the working LP. Returns how many were appended.
#[allow(clippy::too_many_arguments)]
fn collect_cuts(
    model: &ModelInstance,
    cones: &[RotatedConeRow],
    x: &[f64],
    budget: usize,
    local_seen: &mut BTreeSet<CutKey>,
    new_cuts: &mut Vec<CutRecord>,
    mut problem: Option<&mut LpProblem>,
) -> usize {
    // (violation, key, row)
    let mut candidates: Vec<(f64, CutKey, LinRow)> = Vec::new();
    for cone in cones {
        let (w, ell, p, q) = (x[cone.w], x[cone.ell], x[cone.p], x[cone.q]);
        let violation = p * p + q * q - w * ell;
        if let Some(row) = cone_cut(cone, x) {
            candidates.push((violation, cut_key(0, cone.bus, p, q), row));
        }
    }
    for (k, quad) in model.quads.iter().enumerate() {
        let lin: f64 = quad.lin.iter().map(|&(v, a)| a * x[v]).sum();
        let violation = x[quad.p].powi(2) + x[quad.q].powi(2) - lin - quad.c;
        if let Some(row) = quad_cut(quad, x) {
            candidates.push((violation, cut_key(1, k, x[quad.p], x[quad.q]), row));
        }
    }
    for (k, group) in model.bilinear_groups.iter().enumerate() {
        for (term, var, kind) in [(group.sp, group.p, 2u8), (group.sq, group.q, 3u8)] {
            let gap = x[var] * x[var] - x[term];
            if gap > OA_TOL * (1.0 + x[var].abs()) {
                candidates.push((
                    gap,
                    cut_key(kind, k, x[var], 0.0),
                    square_tangent(term, var, x[var]),
                ));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut added = 0;
    for (_, key, row) in candidates.into_iter().take(budget) {
        if local_seen.insert(key) {
            if let Some(problem) = problem.as_deref_mut() {
                problem.rows.push(row.clone());
                added += 1;
            }
            new_cuts.push(CutRecord { key, row });
        }
    }
    added
}

/// Model rows plus the envelope rows induced by the node's boxes.
pub fn base_rows(model: &ModelInstance, boxes: &[(f64, f64)]) -> Vec<LinRow> {
    let mut rows = model.rows.clone();
    // Binary-continuous products: McCormick over the current boxes, which at
    // root boxes is exactly the four-row switch linearization. Fixed binaries
    // collapse the four rows to one (or none: z's box is pinched to zero by
    // bound tightening when π is fixed open).
    for product in &model.products {
        let (pi_lo, pi_hi) = boxes[product.pi];
        if pi_hi <= 1e-9 {
            continue;
        }
        if pi_lo >= 1.0 - 1e-9 {
            rows.push(LinRow::new(
                vec![(product.z, 1.0), (product.x, -1.0)],
                RowOp::Eq,
                0.0,
            ));
            continue;
        }
        let x_box = boxes[product.x];
        if let Ok(mc) =
            mccormick_envelope(product.z, product.pi, product.x, (pi_lo, pi_hi), x_box)
        {
            rows.extend(mc);
        }
    }
    // Continuous bilinear terms of the exact variant.
    for group in &model.bilinear_groups {
        let w_box = boxes[group.w];
        let ell_box = boxes[group.ell];
        if let Ok(mc) = mccormick_envelope(group.s, group.w, group.ell, w_box, ell_box) {
            rows.extend(mc);
        }
        let (pl, ph) = boxes[group.p];
        rows.extend(square_envelope(group.sp, group.p, pl, ph));
        let (ql, qh) = boxes[group.q];
        rows.extend(square_envelope(group.sq, group.q, ql, qh));
    }
    rows
}

/// Tangent cut for a violated rotated cone at the LP point, or `None` when
/// satisfied.
fn cone_cut(cone: &RotatedConeRow, x: &[f64]) -> Option<LinRow> {
    let (w, ell, p, q) = (x[cone.w], x[cone.ell], x[cone.p], x[cone.q]);
    let radius = (4.0 * p * p + 4.0 * q * q + (w - ell) * (w - ell)).sqrt();
    let g = radius - (w + ell);
    if g <= OA_TOL * (1.0 + radius) {
        return None;
    }
    if radius < 1e-12 {
        return Some(LinRow::new(vec![(cone.w, 1.0), (cone.ell, 1.0)], RowOp::Ge, 0.0));
    }
    let dp = 4.0 * p / radius;
    let dq = 4.0 * q / radius;
    let dw = (w - ell) / radius - 1.0;
    let dell = -(w - ell) / radius - 1.0;
    // g(x0) + ∇g·(x − x0) ≤ 0
    let rhs = dp * p + dq * q + dw * w + dell * ell - g;
    Some(LinRow::new(
        vec![(cone.p, dp), (cone.q, dq), (cone.w, dw), (cone.ell, dell)],
        RowOp::Le,
        rhs,
    ))
}

/// Tangent cut for a violated `p² + q² ≤ lin + c` row.
fn quad_cut(quad: &QuadRow, x: &[f64]) -> Option<LinRow> {
    let (p, q) = (x[quad.p], x[quad.q]);
    let lin: f64 = quad.lin.iter().map(|&(v, a)| a * x[v]).sum();
    let violation = p * p + q * q - lin - quad.c;
    if violation <= OA_TOL * (1.0 + p.abs() + q.abs()) {
        return None;
    }
    let mut coeffs = vec![(quad.p, 2.0 * p), (quad.q, 2.0 * q)];
    for &(v, a) in &quad.lin {
        coeffs.push((v, -a));
    }
    Some(LinRow::new(coeffs, RowOp::Le, quad.c + p * p + q * q))
}

/// Worst convex-row violation of a point (cones and quads): used for leaf
/// acceptance.
pub fn convex_violation(model: &ModelInstance, cones: &[RotatedConeRow], x: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for cone in cones {
        let (w, ell, p, q) = (x[cone.w], x[cone.ell], x[cone.p], x[cone.q]);
        worst = worst.max(p * p + q * q - w * ell);
    }
    for quad in &model.quads {
        let lin: f64 = quad.lin.iter().map(|&(v, a)| a * x[v]).sum();
        worst = worst.max(x[quad.p].powi(2) + x[quad.q].powi(2) - lin - quad.c);
    }
    worst
}
