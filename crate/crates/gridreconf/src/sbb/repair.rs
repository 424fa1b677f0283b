//! Incumbent repair: once the binaries are integral, fixing topology and DG
//! set points determines the whole network state, so a load-flow sweep turns
//! near-feasible LP points into certified feasible incumbents.

use crate::loadflow::sweep_load_flow;
use crate::model::{residuals, ModelInstance, OperatingPoint, Variant};
use crate::radiality::{is_radial, SwitchTopology};

/// Residual/violation tolerance for accepted incumbents.
pub const INCUMBENT_TOL: f64 = 1e-6;

/// Scale factors tried on the DG set points, best first.
const LADDER: [f64; 11] = [1.0, 0.99, 0.98, 0.97, 0.96, 0.95, 0.94, 0.93, 0.92, 0.91, 0.90];

/// Try to turn an integral-binary LP point into a feasible operating point by
/// sweeping the load flow at the LP's DG set points, scaling them down
/// uniformly if limits are violated. Not applicable to the LinDistFlow
/// variant, whose feasible set is not the true physics.
pub fn repair_incumbent(
    model: &ModelInstance,
    x: &[f64],
) -> Option<(SwitchTopology, OperatingPoint)> {
    if model.variant == Variant::LinDistFlow {
        return None;
    }
    let topology = model.extract_topology(x, crate::sbb::branch::INT_TOL)?;
    if !is_radial(&model.case, &topology) {
        return None;
    }
    let n_buses = model.case.n_buses();
    let mut p_gen = vec![0.0; n_buses];
    let mut q_gen = vec![0.0; n_buses];
    for bus in 1..n_buses {
        p_gen[bus] = model.index.p_gen[bus].map_or(0.0, |v| x[v]);
        q_gen[bus] = model.index.q_gen[bus].map_or(0.0, |v| x[v]);
    }

    for factor in LADDER {
        let pg: Vec<f64> = p_gen.iter().map(|v| v * factor).collect();
        let qg: Vec<f64> = q_gen.iter().map(|v| v * factor).collect();
        let point = match sweep_load_flow(&model.case, &topology, &pg, &qg) {
            Ok(point) => point,
            Err(_) => continue,
        };
        let report = residuals(&model.case, &topology, &point);
        if report.exact_feasible(INCUMBENT_TOL) {
            return Some((topology, point));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, Objective, Variant};
    use crate::netcase::{parse_case, CaseFormat};

    fn exact_model() -> ModelInstance {
        let case =
            parse_case(include_str!("../../data/three_bus.json"), CaseFormat::Native).unwrap();
        build_model(&case, 0, Variant::Exact, Objective::DgMax).unwrap()
    }

    fn integral_x(model: &ModelInstance, pg: f64, qg: f64) -> Vec<f64> {
        let mut x = vec![0.0; model.num_vars()];
        let idx = &model.index;
        for (a, &(from, to)) in idx.arcs.iter().enumerate() {
            // Chain orientation 0→1→2.
            if (from, to) == (0, 1) || (from, to) == (1, 2) {
                x[idx.pi[a]] = 1.0;
            }
        }
        x[idx.p_gen[1].unwrap()] = pg;
        x[idx.q_gen[1].unwrap()] = qg;
        x
    }

    #[test]
    fn feasible_dispatch_is_kept_verbatim() {
        let model = exact_model();
        let x = integral_x(&model, 1.0, 0.1);
        let (topology, point) = repair_incumbent(&model, &x).expect("repairable");
        assert!(is_radial(&model.case, &topology));
        assert!((point.total_dg() - 1.0).abs() < 1e-12);
    }

    /// A dispatch just over the voltage limit is scaled down to feasibility
    /// by some factor at most 0.99.
    #[test]
    fn overvoltage_dispatch_is_scaled_down() {
        let model = exact_model();
        // At pg ≈ 7.78+ the bus-1 voltage exceeds 1.05 on this system.
        let x = integral_x(&model, 7.83, 0.39);
        let (_, point) = repair_incumbent(&model, &x).expect("scalable");
        let scaled = point.p_gen[1] / 7.83;
        assert!(scaled <= 0.99 + 1e-12, "factor {scaled}");
        assert!(point.nu[1] <= 1.1025 + 1e-9);
    }

    #[test]
    fn fractional_binaries_are_rejected() {
        let model = exact_model();
        let mut x = integral_x(&model, 1.0, 0.0);
        x[model.index.pi[0]] = 0.5;
        assert!(repair_incumbent(&model, &x).is_none());
    }
}
