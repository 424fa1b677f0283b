//! Feasibility-based bound tightening on node boxes.
//!
//! Interval propagation over the linear rows, the binary-continuous products
//! and the bilinear/square relations. Tightenings carry an outward nudge so
//! rounding can never cut a feasible point.

use crate::lp::{LinRow, RowOp};
use crate::model::ModelInstance;

const NUDGE: f64 = 1e-12;
const MIN_IMPROVE: f64 = 1e-9;
const ROUNDS: usize = 3;

/// Tighten `boxes` in place. Returns `false` when a box empties (node
/// infeasible).
pub fn tighten(model: &ModelInstance, boxes: &mut [(f64, f64)]) -> bool {
    for _ in 0..ROUNDS {
        let mut changed = false;
        if !snap_binaries(model, boxes, &mut changed) {
            return false;
        }
        for row in &model.rows {
            if !propagate_row(row, boxes, &mut changed) {
                return false;
            }
        }
        if !propagate_products(model, boxes, &mut changed) {
            return false;
        }
        if !propagate_bilinear(model, boxes, &mut changed) {
            return false;
        }
        if !changed {
            break;
        }
    }
    true
}

fn shrink(boxes: &mut [(f64, f64)], var: usize, lo: f64, hi: f64, changed: &mut bool) -> bool {
    let (cur_lo, cur_hi) = boxes[var];
    let scale = 1.0 + cur_lo.abs().max(cur_hi.abs());
    let new_lo = (lo - NUDGE * scale).max(cur_lo);
    let new_hi = (hi + NUDGE * scale).min(cur_hi);
    if new_lo > new_hi + 1e-9 * scale {
        return false;
    }
    if new_lo - cur_lo > MIN_IMPROVE * scale || cur_hi - new_hi > MIN_IMPROVE * scale {
        *changed = true;
        boxes[var] = (new_lo, new_hi.max(new_lo));
    }
    true
}

fn snap_binaries(model: &ModelInstance, boxes: &mut [(f64, f64)], changed: &mut bool) -> bool {
    for (v, def) in model.vars.iter().enumerate() {
        if !def.binary {
            continue;
        }
        let (lo, hi) = boxes[v];
        if lo > 1.0 + 1e-9 || hi < -1e-9 {
            return false;
        }
        if lo > 1e-9 && lo < 1.0 {
            boxes[v].0 = 1.0;
            *changed = true;
        }
        if hi < 1.0 - 1e-9 && hi > 0.0 {
            boxes[v].1 = 0.0;
            *changed = true;
        }
        if boxes[v].0 > boxes[v].1 {
            return false;
        }
    }
    true
}

fn propagate_row(row: &LinRow, boxes: &mut [(f64, f64)], changed: &mut bool) -> bool {
    // Minimum and maximum activity of the row.
    let mut act_lo = 0.0;
    let mut act_hi = 0.0;
    for &(v, a) in &row.coeffs {
        let (lo, hi) = boxes[v];
        if a >= 0.0 {
            act_lo += a * lo;
            act_hi += a * hi;
        } else {
            act_lo += a * hi;
            act_hi += a * lo;
        }
    }
    let (upper, lower) = match row.op {
        RowOp::Le => (Some(row.rhs), None),
        RowOp::Ge => (None, Some(row.rhs)),
        RowOp::Eq => (Some(row.rhs), Some(row.rhs)),
    };
    let tol = 1e-9 * (1.0 + row.rhs.abs());
    if let Some(ub) = upper {
        if act_lo > ub + tol {
            return false;
        }
    }
    if let Some(lb) = lower {
        if act_hi < lb - tol {
            return false;
        }
    }
    for &(v, a) in &row.coeffs {
        if a == 0.0 {
            continue;
        }
        let (lo, hi) = boxes[v];
        let (term_lo, term_hi) = if a >= 0.0 { (a * lo, a * hi) } else { (a * hi, a * lo) };
        // Activity of the other terms.
        let rest_lo = act_lo - term_lo;
        let rest_hi = act_hi - term_hi;
        let mut new_lo = lo;
        let mut new_hi = hi;
        if let Some(ub) = upper {
            // a·x ≤ ub − rest_lo
            let cap = ub - rest_lo;
            if a > 0.0 {
                new_hi = new_hi.min(cap / a);
            } else {
                new_lo = new_lo.max(cap / a);
            }
        }
        if let Some(lb) = lower {
            let need = lb - rest_hi;
            if a > 0.0 {
                new_lo = new_lo.max(need / a);
            } else {
                new_hi = new_hi.min(need / a);
            }
        }
        if !shrink(boxes, v, new_lo, new_hi, changed) {
            return false;
        }
    }
    true
}

fn interval_product((al, ah): (f64, f64), (bl, bh): (f64, f64)) -> (f64, f64) {
    let candidates = [al * bl, al * bh, ah * bl, ah * bh];
    (
        candidates.iter().cloned().fold(f64::INFINITY, f64::min),
        candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn propagate_products(model: &ModelInstance, boxes: &mut [(f64, f64)], changed: &mut bool) -> bool {
    for t in &model.products {
        let pi = boxes[t.pi];
        let x = boxes[t.x];
        let (zl, zh) = interval_product(pi, x);
        if !shrink(boxes, t.z, zl, zh, changed) {
            return false;
        }
        if pi.0 >= 1.0 - 1e-9 {
            // Closed for sure: z ≡ x.
            let z = boxes[t.z];
            if !shrink(boxes, t.x, z.0, z.1, changed) {
                return false;
            }
            if !shrink(boxes, t.z, boxes[t.x].0, boxes[t.x].1, changed) {
                return false;
            }
        } else if pi.1 <= 1e-9 {
            if !shrink(boxes, t.z, 0.0, 0.0, changed) {
                return false;
            }
        }
    }
    true
}

fn propagate_bilinear(model: &ModelInstance, boxes: &mut [(f64, f64)], changed: &mut bool) -> bool {
    for g in &model.bilinear_groups {
        // s = w·ℓ
        let (sl, sh) = interval_product(boxes[g.w], boxes[g.ell]);
        if !shrink(boxes, g.s, sl, sh, changed) {
            return false;
        }
        let (w_lo, w_hi) = boxes[g.w];
        let s = boxes[g.s];
        if w_lo > 1e-9 {
            // ℓ ∈ [s_lo/w_hi, s_hi/w_lo]
            if !shrink(boxes, g.ell, (s.0 / w_hi).max(0.0), s.1 / w_lo, changed) {
                return false;
            }
        }
        // sp = P², sq = Q²
        for (sq_var, base) in [(g.sp, g.p), (g.sq, g.q)] {
            let (bl, bh) = boxes[base];
            let lo = if bl <= 0.0 && bh >= 0.0 { 0.0 } else { (bl * bl).min(bh * bh) };
            let hi = (bl * bl).max(bh * bh);
            if !shrink(boxes, sq_var, lo, hi, changed) {
                return false;
            }
            let cap = boxes[sq_var].1.max(0.0).sqrt();
            if !shrink(boxes, base, -cap, cap, changed) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, Objective, Variant};
    use crate::netcase::{parse_case, CaseFormat};

    #[test]
    fn root_tightening_keeps_known_feasible_point() {
        let case =
            parse_case(include_str!("../../data/three_bus.json"), CaseFormat::Native).unwrap();
        let model = build_model(&case, 0, Variant::Exact, Objective::DgMax).unwrap();
        let mut boxes: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();
        assert!(tighten(&model, &mut boxes));

        // The published exact optimum must survive every tightening.
        let idx = &model.index;
        let mut x = vec![0.0; model.num_vars()];
        let assigned: Vec<(usize, f64)> = vec![
            (idx.nu[0], 1.0),
            (idx.nu[1], 1.1025),
            (idx.nu[2], 1.0964),
            (idx.ell[1].unwrap(), 25.0),
            (idx.ell[2].unwrap(), 0.2645),
            (idx.p_line[1].unwrap(), -4.9991),
            (idx.p_line[2].unwrap(), 0.50264),
            (idx.q_line[1].unwrap(), 0.092606),
            (idx.q_line[2].unwrap(), -0.19736),
            (idx.p_gen[1].unwrap(), 7.7518),
            (idx.q_gen[1].unwrap(), 0.39754),
        ];
        for (v, val) in assigned {
            x[v] = val;
        }
        for (v, val) in x.iter().enumerate() {
            let (lo, hi) = boxes[v];
            if *val != 0.0 {
                assert!(
                    *val >= lo - 1e-6 && *val <= hi + 1e-6,
                    "var {} = {val} escaped box [{lo}, {hi}]",
                    model.vars[v].kind
                );
            }
        }
    }

    #[test]
    fn contradictory_budget_detected() {
        let case =
            parse_case(include_str!("../../data/three_bus.json"), CaseFormat::Native).unwrap();
        let model = build_model(&case, 0, Variant::Exact, Objective::DgMax).unwrap();
        let mut boxes: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();
        // Force a π to conflict with the always-closed line rows.
        let arc_into_1 = model
            .index
            .arcs
            .iter()
            .position(|&(a, b)| a == 0 && b == 1)
            .unwrap();
        boxes[model.index.pi[arc_into_1]] = (0.0, 0.0);
        assert!(!tighten(&model, &mut boxes));
    }
}
