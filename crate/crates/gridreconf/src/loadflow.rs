//! Posterior verification: radial load flow by backward/forward sweep and
//! grid-limit violation reporting.
//!
//! The sweep solves the fixed-configuration DistFlow equations for given DG
//! injections: powers are aggregated from the leaves toward the slack using
//! the previous current iterate, voltages propagate from the slack outward,
//! and currents are refreshed from `ℓ = (P² + Q²)/ν_parent`. Iteration stops
//! when the voltage update falls below `1e-10` pu.

use crate::model::OperatingPoint;
use crate::netcase::NetworkCase;
use crate::radiality::{is_radial, SwitchTopology};
use serde::Serialize;
use thiserror::Error;

pub const SWEEP_TOL: f64 = 1e-10;
pub const SWEEP_MAX_ITER: usize = 200;
/// Limit comparisons treat anything within this of the bound as satisfied.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LoadFlowError {
    #[error("topology is not radial")]
    NotRadial,
    #[error("sweep diverged after {iterations} iterations (physically infeasible injections)")]
    Diverged { iterations: usize },
    #[error("sweep did not converge within {SWEEP_MAX_ITER} iterations")]
    NotConverged,
}

/// Solve the DistFlow equations for a fixed radial topology and fixed DG
/// injections. The slack holds 1∠0° pu.
pub fn sweep_load_flow(
    case: &NetworkCase,
    topology: &SwitchTopology,
    p_gen: &[f64],
    q_gen: &[f64],
) -> Result<OperatingPoint, LoadFlowError> {
    if !is_radial(case, topology) {
        return Err(LoadFlowError::NotRadial);
    }
    let n_buses = case.n_buses();
    assert_eq!(p_gen.len(), n_buses);
    assert_eq!(q_gen.len(), n_buses);

    // Bus order by BFS depth; children lists; per-bus line constants.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_buses];
    for bus in 1..n_buses {
        let parent = topology.parent[bus].ok_or(LoadFlowError::NotRadial)?;
        children[parent].push(bus);
    }
    let mut order = Vec::with_capacity(n_buses);
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(bus) = queue.pop_front() {
        order.push(bus);
        for &k in &children[bus] {
            queue.push_back(k);
        }
    }
    let mut r = vec![0.0; n_buses];
    let mut x = vec![0.0; n_buses];
    for bus in 1..n_buses {
        let parent = topology.parent[bus].unwrap();
        let line = &case.lines[case.line_between(parent, bus).ok_or(LoadFlowError::NotRadial)?];
        r[bus] = line.r;
        x[bus] = line.x;
    }

    // Flat start.
    let mut nu = vec![1.0; n_buses];
    let mut ell = vec![0.0; n_buses];
    let mut p = vec![0.0; n_buses];
    let mut q = vec![0.0; n_buses];

    let mut prev_delta = f64::INFINITY;
    let mut growth_streak = 0usize;
    for iteration in 0..SWEEP_MAX_ITER {
        // Backward: aggregate power toward the slack with the current ℓ.
        for &bus in order.iter().rev() {
            if bus == 0 {
                continue;
            }
            let sum_p: f64 = children[bus].iter().map(|&k| p[k]).sum();
            let sum_q: f64 = children[bus].iter().map(|&k| q[k]).sum();
            p[bus] = case.buses[bus].p_load - p_gen[bus] + sum_p + r[bus] * ell[bus];
            q[bus] = case.buses[bus].q_load - q_gen[bus] + sum_q + x[bus] * ell[bus];
        }
        // Forward: propagate voltages from the slack, refresh currents.
        let mut delta = 0.0_f64;
        for &bus in &order {
            if bus == 0 {
                continue;
            }
            let parent = topology.parent[bus].unwrap();
            let nu_new = nu[parent] - 2.0 * r[bus] * p[bus] - 2.0 * x[bus] * q[bus]
                + (r[bus] * r[bus] + x[bus] * x[bus]) * ell[bus];
            if !nu_new.is_finite() || nu_new <= 1e-6 || nu[parent] <= 1e-6 {
                return Err(LoadFlowError::Diverged { iterations: iteration + 1 });
            }
            delta = delta.max((nu_new - nu[bus]).abs());
            nu[bus] = nu_new;
            ell[bus] = (p[bus] * p[bus] + q[bus] * q[bus]) / nu[parent];
        }
        if delta < SWEEP_TOL {
            let point = OperatingPoint {
                nu,
                ell,
                p_line: p,
                q_line: q,
                p_gen: p_gen.to_vec(),
                q_gen: q_gen.to_vec(),
                parent: topology.parent.clone(),
            };
            return Ok(point);
        }
        if delta > prev_delta {
            growth_streak += 1;
            if growth_streak >= 3 {
                return Err(LoadFlowError::Diverged { iterations: iteration + 1 });
            }
        } else {
            growth_streak = 0;
        }
        prev_delta = delta;
    }
    Err(LoadFlowError::NotConverged)
}

/// One bus-level voltage violation.
#[derive(Debug, Clone, Serialize)]
pub struct VoltageViolation {
    pub bus: usize,
    /// Voltage magnitude (pu).
    pub value: f64,
    /// Violated limit (pu).
    pub limit: f64,
}

/// One line-level current violation, reported for the realized line feeding
/// `bus`.
#[derive(Debug, Clone, Serialize)]
pub struct CurrentViolation {
    pub bus: usize,
    pub line: usize,
    /// Current magnitude (pu).
    pub value_pu: f64,
    pub value_amps: f64,
    /// Rating (pu).
    pub limit_pu: f64,
    pub limit_amps: f64,
}

/// Violations of the voltage and current limits at an operating point.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ViolationReport {
    pub overvoltage: Vec<VoltageViolation>,
    pub undervoltage: Vec<VoltageViolation>,
    pub overcurrent: Vec<CurrentViolation>,
    /// Worst voltage as a percentage of its violated limit (100 = at limit).
    pub worst_voltage_pct: f64,
    /// Worst current as a percentage of its rating.
    pub worst_current_pct: f64,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.overvoltage.is_empty() && self.undervoltage.is_empty() && self.overcurrent.is_empty()
    }
}

/// Compare an operating point against the voltage limits and the realized
/// line ratings. Currents are also reported in amperes via the case base.
pub fn violation_report(case: &NetworkCase, point: &OperatingPoint) -> ViolationReport {
    let mut report = ViolationReport { worst_voltage_pct: 100.0, worst_current_pct: 0.0, ..Default::default() };
    let i_base = case.i_base_amps();
    for bus in 1..case.n_buses() {
        let b = &case.buses[bus];
        let v = point.nu[bus].max(0.0).sqrt();
        let v_max = b.v_max_sq.sqrt();
        let v_min = b.v_min_sq.sqrt();
        if point.nu[bus] > b.v_max_sq + VIOLATION_TOL {
            report.overvoltage.push(VoltageViolation { bus, value: v, limit: v_max });
            report.worst_voltage_pct = report.worst_voltage_pct.max(100.0 * v / v_max);
        } else if point.nu[bus] < b.v_min_sq - VIOLATION_TOL {
            report.undervoltage.push(VoltageViolation { bus, value: v, limit: v_min });
            report.worst_voltage_pct = report.worst_voltage_pct.max(100.0 * v_min / v.max(1e-12));
        }
        if let Some(parent) = point.parent[bus] {
            if let Some(l) = case.line_between(parent, bus) {
                let limit_sq = case.lines[l].i_max_sq;
                let i_pu = point.ell[bus].max(0.0).sqrt();
                let limit_pu = limit_sq.sqrt();
                if point.ell[bus] > limit_sq + VIOLATION_TOL {
                    report.overcurrent.push(CurrentViolation {
                        bus,
                        line: l,
                        value_pu: i_pu,
                        value_amps: i_pu * i_base,
                        limit_pu,
                        limit_amps: limit_pu * i_base,
                    });
                }
                if limit_pu > 0.0 {
                    report.worst_current_pct =
                        report.worst_current_pct.max(100.0 * i_pu / limit_pu);
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::{parse_case, BusData, CaseFormat, LineData, PhaseMode, Units};

    fn two_bus(r: f64, x: f64, p_load: f64, q_load: f64) -> NetworkCase {
        NetworkCase {
            buses: vec![
                BusData { id: 0, p_load: 0.0, q_load: 0.0, v_min_sq: 0.81, v_max_sq: 1.21, dg: None },
                BusData { id: 1, p_load, q_load, v_min_sq: 0.81, v_max_sq: 1.21, dg: None },
            ],
            lines: vec![LineData {
                from: 0,
                to: 1,
                r,
                x,
                i_max_sq: 25.0,
                switchable: false,
                alpha_lb: 1,
                alpha_ub: 1,
                alpha0: 1,
            }],
            s_base_mva: 1.0,
            v_base_kv: 10.0,
            phase_mode: PhaseMode::ThreePhaseAggregate,
            units: Units::PerUnit,
        }
    }

    #[test]
    fn flat_case_gives_flat_point() {
        let case = two_bus(0.01, 0.005, 0.0, 0.0);
        let topo = SwitchTopology::orient(&case, &[true]).unwrap();
        let point = sweep_load_flow(&case, &topo, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(point.nu, vec![1.0, 1.0]);
        assert_eq!(point.ell[1], 0.0);
        assert_eq!(point.p_line[1], 0.0);
        assert!(violation_report(&case, &point).is_empty());
    }

    /// r = 0.01, x = 0, load 0.1: the DistFlow reduction gives
    /// 0.01·P² − P + 0.1 = 0 with P the flow at the sending end.
    #[test]
    fn two_bus_matches_closed_form() {
        let case = two_bus(0.01, 0.0, 0.1, 0.0);
        let topo = SwitchTopology::orient(&case, &[true]).unwrap();
        let point = sweep_load_flow(&case, &topo, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let p_closed = (1.0 - (1.0_f64 - 4.0 * 0.01 * 0.1).sqrt()) / (2.0 * 0.01);
        let ell_closed = p_closed * p_closed; // ν₀ = 1
        let nu_closed = 1.0 - 2.0 * 0.01 * p_closed + 0.0001 * ell_closed;
        assert!((point.p_line[1] - p_closed).abs() < 1e-9);
        assert!((point.ell[1] - ell_closed).abs() < 1e-9);
        assert!((point.nu[1] - nu_closed).abs() < 1e-9);
    }

    #[test]
    fn divergence_is_detected() {
        // A load far beyond the deliverable power has no DistFlow solution.
        let case = two_bus(0.1, 0.05, 30.0, 10.0);
        let topo = SwitchTopology::orient(&case, &[true]).unwrap();
        match sweep_load_flow(&case, &topo, &[0.0, 0.0], &[0.0, 0.0]) {
            Err(LoadFlowError::Diverged { .. }) | Err(LoadFlowError::NotConverged) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn energy_balance_at_convergence() {
        let case = two_bus(0.02, 0.01, 0.3, 0.1);
        let topo = SwitchTopology::orient(&case, &[true]).unwrap();
        let point = sweep_load_flow(&case, &topo, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        // Slack injection equals total load plus losses.
        let losses = 0.02 * point.ell[1];
        assert!((point.p_line[1] - (0.3 + losses)).abs() < 1e-8);
    }

    /// Posterior load flow for the conic dispatch of the three-bus example:
    /// voltages 1, 1.0539, 1.0511 pu and currents 522.53 A, 51.235 A, both
    /// limits violated.
    #[test]
    fn three_bus_conic_dispatch_violates_limits() {
        let case =
            parse_case(include_str!("../data/three_bus.json"), CaseFormat::Native).unwrap();
        let topo = SwitchTopology::orient(&case, &[true, true]).unwrap();
        let point = sweep_load_flow(
            &case,
            &topo,
            &[0.0, 7.9991, 0.0],
            &[0.0, 0.64489, 0.0],
        )
        .unwrap();
        assert!((point.nu[1].sqrt() - 1.0539).abs() < 2e-4, "v1 = {}", point.nu[1].sqrt());
        assert!((point.nu[2].sqrt() - 1.0511).abs() < 2e-4, "v2 = {}", point.nu[2].sqrt());
        let i_base = case.i_base_amps();
        assert!((i_base - 100.0).abs() < 1e-9);
        let i1 = point.ell[1].sqrt() * i_base;
        let i2 = point.ell[2].sqrt() * i_base;
        assert!((i1 - 522.53).abs() < 0.5, "i1 = {i1}");
        assert!((i2 - 51.235).abs() < 0.5, "i2 = {i2}");

        let report = violation_report(&case, &point);
        assert_eq!(report.overvoltage.len(), 2);
        assert_eq!(report.overcurrent.len(), 1);
        assert!(report.worst_current_pct > 104.0);
    }

    /// Monotone sanity: raising one bus load cannot raise that bus's voltage.
    #[test]
    fn load_increase_depresses_voltage() {
        for load in [0.1, 0.2, 0.4, 0.8] {
            let case_lo = two_bus(0.02, 0.01, load, 0.0);
            let case_hi = two_bus(0.02, 0.01, load + 0.05, 0.0);
            let topo = SwitchTopology::orient(&case_lo, &[true]).unwrap();
            let lo = sweep_load_flow(&case_lo, &topo, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
            let hi = sweep_load_flow(&case_hi, &topo, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
            assert!(hi.nu[1] <= lo.nu[1]);
        }
    }
}
