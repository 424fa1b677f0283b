//! Branching rule: binaries by fractionality first, then the widest factor of
//! the most violated bilinear term, split at the clamped LP value.

use crate::model::ModelInstance;

pub const INT_TOL: f64 = 1e-6;
pub const BILINEAR_TOL: f64 = 1e-6;
/// Spatial splits keep 20% of the box on each side.
const SPLIT_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchDecision {
    /// Binary dichotomy on a π variable.
    Binary { var: usize },
    /// Split a continuous factor's box at `at`.
    Spatial { var: usize, at: f64 },
    /// All binaries integral and all bilinear terms satisfied: leaf.
    None,
}

pub fn select_branch(
    model: &ModelInstance,
    boxes: &[(f64, f64)],
    x: &[f64],
) -> BranchDecision {
    // Most fractional binary, ties to the lowest variable id.
    let mut best_frac = INT_TOL;
    let mut best_var = None;
    for (v, def) in model.vars.iter().enumerate() {
        if !def.binary || boxes[v].0 == boxes[v].1 {
            continue;
        }
        let frac = (x[v] - x[v].round()).abs();
        if frac > best_frac {
            best_frac = frac;
            best_var = Some(v);
        }
    }
    if let Some(var) = best_var {
        return BranchDecision::Binary { var };
    }

    // Most violated bilinear relation, by relative violation.
    let mut terms: Vec<(f64, usize, usize)> = Vec::new(); // (violation, u, v)
    for term in model.bilinear_terms() {
        let violation = (x[term.w] - x[term.u] * x[term.v]).abs();
        if violation > BILINEAR_TOL * x[term.w].abs().max(1.0) {
            terms.push((violation, term.u, term.v));
        }
    }
    terms.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, u, v) in terms {
        // Factor with the widest box.
        let width = |var: usize| boxes[var].1 - boxes[var].0;
        let var = if width(u) >= width(v) { u } else { v };
        let (lo, hi) = boxes[var];
        let span = hi - lo;
        if span < 1e-9 {
            let other = if var == u { v } else { u };
            if width(other) < 1e-9 {
                continue;
            }
            let (lo, hi) = boxes[other];
            let at = clamp_split(x[other], lo, hi);
            return BranchDecision::Spatial { var: other, at };
        }
        let at = clamp_split(x[var], lo, hi);
        return BranchDecision::Spatial { var, at };
    }
    BranchDecision::None
}

fn clamp_split(value: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    value.clamp(lo + SPLIT_MARGIN * span, hi - SPLIT_MARGIN * span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, Objective, Variant};
    use crate::netcase::{parse_case, CaseFormat};

    fn model() -> ModelInstance {
        let case =
            parse_case(include_str!("../../data/three_bus.json"), CaseFormat::Native).unwrap();
        build_model(&case, 0, Variant::Exact, Objective::DgMax).unwrap()
    }

    #[test]
    fn fractional_binary_wins() {
        let model = model();
        let boxes: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();
        let mut x = vec![0.0; model.num_vars()];
        let free_pi = model
            .index
            .pi
            .iter()
            .copied()
            .find(|&v| boxes[v] == (0.0, 1.0))
            .unwrap();
        x[free_pi] = 0.5;
        assert_eq!(select_branch(&model, &boxes, &x), BranchDecision::Binary { var: free_pi });
    }

    #[test]
    fn spatial_branch_picks_widest_factor_of_worst_term() {
        let model = model();
        let mut boxes: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();
        // Make binaries integral.
        for &pi in &model.index.pi {
            boxes[pi] = (boxes[pi].0, boxes[pi].0);
        }
        let mut x = vec![0.0; model.num_vars()];
        let g = model.bilinear_groups[1]; // bus 2
        // w = 1.1025, ℓ = 0.2645 but s = 10: badly violated product.
        x[g.w] = 1.1025;
        x[g.ell] = 0.2645;
        x[g.s] = 10.0;
        match select_branch(&model, &boxes, &x) {
            BranchDecision::Spatial { var, at } => {
                // ℓ's box [0, 25] is wider than w's [0.9025, 1.1025].
                assert_eq!(var, g.ell);
                let (lo, hi) = boxes[var];
                assert!(at >= lo + 0.2 * (hi - lo) - 1e-12);
                assert!(at <= hi - 0.2 * (hi - lo) + 1e-12);
            }
            other => panic!("expected spatial branch, got {other:?}"),
        }
    }

    #[test]
    fn satisfied_point_is_leaf() {
        let model = model();
        let boxes: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();
        let mut x = vec![0.0; model.num_vars()];
        for &pi in &model.index.pi {
            x[pi] = 0.0;
        }
        // All products and squares consistent at zero.
        assert_eq!(select_branch(&model, &boxes, &x), BranchDecision::None);
    }
}
