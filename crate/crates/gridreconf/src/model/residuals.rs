//! Per-constraint residuals of an operating point under a fixed topology.

use crate::model::OperatingPoint;
use crate::netcase::NetworkCase;
use crate::radiality::{is_radial, SwitchTopology};
use serde::Serialize;

/// Signed and absolute residuals of the DistFlow rows and operating limits.
///
/// Entries are indexed by bus id (slack entries zero). `svi_slack` is the
/// signed slack of the voltage-current-flow coupling,
/// `ν_parent·ℓ − (P² + Q²)`: zero at DistFlow-consistent points, positive
/// where the conic inequality is loose.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub power_p: Vec<f64>,
    pub power_q: Vec<f64>,
    pub voltage_drop: Vec<f64>,
    pub svi_slack: Vec<f64>,
    /// Inverter bound/capacity/power-factor violation per bus (0 if none).
    pub inverter: Vec<f64>,
    /// Voltage-limit violation per bus (0 if none).
    pub voltage_limit: Vec<f64>,
    /// Current-limit violation per bus (0 if none).
    pub current_limit: Vec<f64>,
}

impl ResidualReport {
    /// Largest absolute residual among the balance and voltage-drop
    /// equalities.
    pub fn max_balance_residual(&self) -> f64 {
        self.power_p
            .iter()
            .chain(self.power_q.iter())
            .chain(self.voltage_drop.iter())
            .fold(0.0_f64, |m, &r| m.max(r.abs()))
    }

    /// Largest absolute coupling residual (exact-model feasibility).
    pub fn max_svi_residual(&self) -> f64 {
        self.svi_slack.iter().fold(0.0_f64, |m, &r| m.max(r.abs()))
    }

    /// Largest limit violation across inverter, voltage and current rows.
    pub fn max_limit_violation(&self) -> f64 {
        self.inverter
            .iter()
            .chain(self.voltage_limit.iter())
            .chain(self.current_limit.iter())
            .fold(0.0_f64, |m, &r| m.max(r))
    }

    /// Feasibility of the exact model at the point: every equality within
    /// `tol`, no limit violation beyond `tol`.
    pub fn exact_feasible(&self, tol: f64) -> bool {
        self.max_balance_residual() <= tol
            && self.max_svi_residual() <= tol
            && self.max_limit_violation() <= tol
    }
}

/// Evaluate residuals of the DistFlow rows and limits at `point` under
/// `topology`. The topology must be radial.
pub fn residuals(
    case: &NetworkCase,
    topology: &SwitchTopology,
    point: &OperatingPoint,
) -> ResidualReport {
    debug_assert!(is_radial(case, topology));
    let n_buses = case.n_buses();
    let mut report = ResidualReport {
        power_p: vec![0.0; n_buses],
        power_q: vec![0.0; n_buses],
        voltage_drop: vec![0.0; n_buses],
        svi_slack: vec![0.0; n_buses],
        inverter: vec![0.0; n_buses],
        voltage_limit: vec![0.0; n_buses],
        current_limit: vec![0.0; n_buses],
    };

    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_buses];
    for bus in 1..n_buses {
        if let Some(p) = topology.parent[bus] {
            children[p].push(bus);
        }
    }

    for bus in 1..n_buses {
        let parent = match topology.parent[bus] {
            Some(p) => p,
            None => continue,
        };
        let line = &case.lines[case.line_between(parent, bus).expect("line exists")];
        let (r, x) = (line.r, line.x);
        let p_children: f64 = children[bus].iter().map(|&k| point.p_line[k]).sum();
        let q_children: f64 = children[bus].iter().map(|&k| point.q_line[k]).sum();
        let pg = point.p_gen[bus];
        let qg = point.q_gen[bus];
        let bus_data = &case.buses[bus];

        report.power_p[bus] = pg - bus_data.p_load
            - (-point.p_line[bus] + p_children + r * point.ell[bus]);
        report.power_q[bus] = qg - bus_data.q_load
            - (-point.q_line[bus] + q_children + x * point.ell[bus]);
        report.voltage_drop[bus] = point.nu[parent] - point.nu[bus]
            - (2.0 * r * point.p_line[bus] + 2.0 * x * point.q_line[bus]
                - (r * r + x * x) * point.ell[bus]);
        report.svi_slack[bus] = point.nu[parent] * point.ell[bus]
            - (point.p_line[bus].powi(2) + point.q_line[bus].powi(2));

        if let Some(dg) = &bus_data.dg {
            let mut violation: f64 = 0.0;
            violation = violation.max(dg.p_min - pg).max(pg - dg.p_max);
            violation = violation.max(dg.q_min - qg).max(qg - dg.q_max);
            let cap_sq = dg.capacity * dg.capacity;
            violation = violation.max(pg * pg + qg * qg - cap_sq);
            let tan = dg.pf_min.acos().tan();
            violation = violation.max(qg.abs() - tan * pg);
            report.inverter[bus] = violation.max(0.0);
        } else if pg != 0.0 || qg != 0.0 {
            report.inverter[bus] = pg.abs().max(qg.abs());
        }

        report.current_limit[bus] = (point.ell[bus] - line.i_max_sq).max(0.0);
    }
    for bus in 0..n_buses {
        let b = &case.buses[bus];
        let (lo, hi) = if bus == 0 { (b.v_min_sq.min(1.0), b.v_max_sq.max(1.0)) } else { (b.v_min_sq, b.v_max_sq) };
        report.voltage_limit[bus] =
            (lo - point.nu[bus]).max(point.nu[bus] - hi).max(0.0);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::{parse_case, CaseFormat};

    fn three_bus() -> NetworkCase {
        parse_case(include_str!("../../data/three_bus.json"), CaseFormat::Native).unwrap()
    }

    fn chain_topology(case: &NetworkCase) -> SwitchTopology {
        SwitchTopology::orient(case, &vec![true; case.lines.len()]).unwrap()
    }

    /// Values printed for the bilinear program's optimum: the coupling holds
    /// with equality at every bus (table rounding allows ~1e-4).
    #[test]
    fn exact_solution_couples_tightly() {
        let case = three_bus();
        let topo = chain_topology(&case);
        let point = OperatingPoint {
            nu: vec![1.0, 1.1025, 1.0964],
            ell: vec![0.0, 25.0, 0.2645],
            p_line: vec![0.0, -4.9991, 0.50264],
            q_line: vec![0.0, 0.092606, -0.19736],
            p_gen: vec![0.0, 7.7518, 0.0],
            q_gen: vec![0.0, 0.39754, 0.0],
            parent: topo.parent.clone(),
        };
        let report = residuals(&case, &topo, &point);
        // ν₁ℓ₂ = 1.1025 · 0.2645 = 0.2916 = P₂² + Q₂².
        assert!(report.svi_slack[2].abs() < 1e-4, "slack {}", report.svi_slack[2]);
        assert!(report.power_p[1].abs() < 1e-3);
        assert!(report.power_q[1].abs() < 1e-3);
        assert!(report.max_limit_violation() < 1e-6);
    }

    /// The conic optimum leaves the coupling loose at bus 2:
    /// 1.1025·25 − 0.565 = 26.9975.
    #[test]
    fn conic_solution_has_loose_coupling() {
        let case = three_bus();
        let topo = chain_topology(&case);
        let point = OperatingPoint {
            nu: vec![1.0, 1.1025, 1.0915],
            ell: vec![0.0, 25.0, 25.0],
            p_line: vec![0.0, -4.9991, 0.75],
            q_line: vec![0.0, 0.092606, 0.049999],
            p_gen: vec![0.0, 7.9991, 0.0],
            q_gen: vec![0.0, 0.64489, 0.0],
            parent: topo.parent.clone(),
        };
        let report = residuals(&case, &topo, &point);
        assert!((report.svi_slack[2] - 26.9975).abs() < 1e-3, "slack {}", report.svi_slack[2]);
        // Power balances still hold at the conic point.
        assert!(report.power_p[1].abs() < 1e-3);
        assert!(report.power_q[1].abs() < 1e-3);
        assert!(report.power_q[2].abs() < 1e-3);
    }

    #[test]
    fn flat_zero_point_has_zero_residuals() {
        let mut case = three_bus();
        for bus in &mut case.buses {
            bus.p_load = 0.0;
            bus.q_load = 0.0;
        }
        let topo = chain_topology(&case);
        let point = OperatingPoint {
            nu: vec![1.0; 3],
            ell: vec![0.0; 3],
            p_line: vec![0.0; 3],
            q_line: vec![0.0; 3],
            p_gen: vec![0.0; 3],
            q_gen: vec![0.0; 3],
            parent: topo.parent.clone(),
        };
        let report = residuals(&case, &topo, &point);
        assert_eq!(report.max_balance_residual(), 0.0);
        assert_eq!(report.max_svi_residual(), 0.0);
        assert_eq!(report.max_limit_violation(), 0.0);
    }
}
