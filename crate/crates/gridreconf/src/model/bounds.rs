//! Derived variable bounds for line power flows.
//!
//! `|P_k + jQ_k| = |v_parent||I_k|`, so each non-slack bus gets the symmetric
//! flow bound `B_k = sqrt(ν^U_k · ℓ^U_k)` where the maxima run over candidate
//! (alpha_ub = 1) lines incident to `k`.

use crate::netcase::{NetworkCase, SLACK};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct FlowBounds {
    /// Per-bus max candidate parent squared-voltage limit (index by bus id).
    pub nu_u: Vec<f64>,
    /// Per-bus min candidate parent squared-voltage limit.
    pub nu_l: Vec<f64>,
    /// Per-bus max candidate line squared-current limit.
    pub ell_u: Vec<f64>,
    /// Symmetric bound on P_k and Q_k.
    pub b: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("bus {0} has no candidate line (alpha_ub = 1)")]
    NoCandidateLine(usize),
}

pub fn derive_flow_bounds(case: &NetworkCase) -> Result<FlowBounds, BoundsError> {
    let n_buses = case.n_buses();
    let mut nu_u = vec![0.0_f64; n_buses];
    let mut nu_l = vec![f64::INFINITY; n_buses];
    let mut ell_u = vec![0.0_f64; n_buses];
    for bus in 1..n_buses {
        let mut any = false;
        for l in case.candidate_lines(bus) {
            let line = &case.lines[l];
            let parent = line.other(bus).unwrap();
            nu_u[bus] = nu_u[bus].max(case.buses[parent].v_max_sq);
            nu_l[bus] = nu_l[bus].min(case.buses[parent].v_min_sq);
            ell_u[bus] = ell_u[bus].max(line.i_max_sq);
            any = true;
        }
        if !any {
            return Err(BoundsError::NoCandidateLine(bus));
        }
    }
    nu_u[SLACK] = case.buses[SLACK].v_max_sq;
    nu_l[SLACK] = case.buses[SLACK].v_min_sq;
    let b = nu_u
        .iter()
        .zip(ell_u.iter())
        .map(|(&nu, &ell)| (nu * ell).sqrt())
        .collect();
    Ok(FlowBounds { nu_u, nu_l, ell_u, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::{BusData, LineData, PhaseMode, Units};

    fn case_with_limits(lines: Vec<(usize, usize, f64)>, v_max_sq: f64) -> NetworkCase {
        let n_buses = lines.iter().map(|&(a, b, _)| a.max(b)).max().unwrap() + 1;
        NetworkCase {
            buses: (0..n_buses)
                .map(|id| BusData {
                    id,
                    p_load: 0.0,
                    q_load: 0.0,
                    v_min_sq: 0.9025,
                    v_max_sq,
                    dg: None,
                })
                .collect(),
            lines: lines
                .into_iter()
                .map(|(from, to, i_max_sq)| LineData {
                    from,
                    to,
                    r: 0.01,
                    x: 0.01,
                    i_max_sq,
                    switchable: true,
                    alpha_lb: 0,
                    alpha_ub: 1,
                    alpha0: 1,
                })
                .collect(),
            s_base_mva: 1.0,
            v_base_kv: 10.0,
            phase_mode: PhaseMode::ThreePhaseAggregate,
            units: Units::PerUnit,
        }
    }

    #[test]
    fn single_line_bound() {
        let case = case_with_limits(vec![(0, 1, 25.0)], 1.1025);
        let fb = derive_flow_bounds(&case).unwrap();
        assert!((fb.b[1] - 5.25).abs() < 1e-12);
    }

    #[test]
    fn max_over_candidates_then_sqrt() {
        let case = case_with_limits(vec![(0, 1, 1.0), (0, 2, 4.0), (1, 2, 4.0)], 1.1025);
        let fb = derive_flow_bounds(&case).unwrap();
        assert!((fb.b[2] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn unit_limits_give_unit_bound() {
        let case = case_with_limits(vec![(0, 1, 1.0)], 1.0);
        let fb = derive_flow_bounds(&case).unwrap();
        assert!((fb.b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_bus_is_an_error() {
        let mut case = case_with_limits(vec![(0, 1, 1.0)], 1.1025);
        case.buses.push(BusData {
            id: 2,
            p_load: 0.0,
            q_load: 0.0,
            v_min_sq: 0.9025,
            v_max_sq: 1.1025,
            dg: None,
        });
        assert!(matches!(derive_flow_bounds(&case), Err(BoundsError::NoCandidateLine(2))));
    }
}
