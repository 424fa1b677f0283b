//! Comparative studies: relaxation tightness, Pareto trade-offs between DG
//! and losses, and hosting-capacity site scans.

use crate::loadflow::{sweep_load_flow, violation_report};
use crate::model::{build_model, ModelInstance, Objective, OperatingPoint, Variant};
use crate::netcase::{DgRating, NetworkCase};
use crate::radiality::SwitchTopology;
use crate::sbb::{self, SolveParams, Termination};
use rayon::prelude::*;
use serde::Serialize;

/// Slack threshold below which the coupling is considered tight.
pub const TIGHT_TOL: f64 = 1e-5;

/// Per-bus signed slack of the voltage-current-flow coupling at a solution.
#[derive(Debug, Clone, Serialize)]
pub struct TightnessReport {
    /// `ν_parent·ℓ − (P² + Q²)` per bus (slack entry zero).
    pub slack: Vec<f64>,
    pub max_slack: f64,
    pub tight: bool,
}

pub fn tightness_report(
    model: &ModelInstance,
    topology: &SwitchTopology,
    point: &OperatingPoint,
) -> TightnessReport {
    let report = crate::model::residuals(&model.case, topology, point);
    let max_slack = report.svi_slack.iter().fold(0.0_f64, |m, &s| m.max(s.abs()));
    TightnessReport { slack: report.svi_slack, max_slack, tight: max_slack <= TIGHT_TOL }
}

/// One point of a Pareto curve. `rho_or_cap` is the weighting ρ for weighted
/// solves and the loss cap for capped DG maximization (`is_cap` marks which).
#[derive(Debug, Clone, Serialize)]
pub struct ParetoPoint {
    pub rho_or_cap: f64,
    pub is_cap: bool,
    pub dg_mw: f64,
    pub loss_mw: f64,
    /// Whether the dispatch passes a posterior load-flow violation check.
    pub verified: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ParetoCurves {
    pub exact: Vec<ParetoPoint>,
    pub conic: Vec<ParetoPoint>,
    /// Human-readable notes for grid points whose solve failed.
    pub failures: Vec<String>,
}

/// Verify a dispatch by posterior load flow; returns (dg, loss, verified) in
/// MW on the case base.
fn verify_dispatch(
    case: &NetworkCase,
    topology: &SwitchTopology,
    point: &OperatingPoint,
) -> (f64, f64, bool) {
    let s = case.s_base_mva;
    match sweep_load_flow(case, topology, &point.p_gen, &point.q_gen) {
        Ok(actual) => {
            let ok = violation_report(case, &actual).is_empty();
            (actual.total_dg() * s, actual.total_loss(case) * s, ok)
        }
        // No load-flow solution at the dispatch: decidedly not verified.
        Err(_) => (point.total_dg() * s, point.total_loss(case) * s, false),
    }
}

/// Sweep the DG/loss trade-off for both the exact and the conic model.
///
/// Weighted solves cover ρ > 0.5 for the exact model and the whole grid for
/// the conic one. For ρ ≤ 0.5 the exact curve is produced by DG maximization
/// under a total-loss cap, with caps stepped down from the loss of the
/// smallest weighted solve above 0.5.
pub fn pareto_sweep(
    case: &NetworkCase,
    k_max: u32,
    rho_grid: &[f64],
    params: &SolveParams,
) -> ParetoCurves {
    let mut curves = ParetoCurves::default();
    assert!(!rho_grid.is_empty(), "pareto grid must be nonempty");

    let mut pivot_loss: Option<f64> = None; // pu, from the exact solve nearest above 0.5
    let mut pivot_rho = f64::INFINITY;
    let mut jobs: Vec<(Variant, f64)> = Vec::new();
    for &rho in rho_grid {
        jobs.push((Variant::Conic, rho));
        if rho > 0.5 {
            jobs.push((Variant::Exact, rho));
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(variant, rho)| {
            let point = solve_weighted(case, k_max, variant, rho, params);
            (variant, rho, point)
        })
        .collect();
    for (variant, rho, outcome) in results {
        match outcome {
            Ok((topology, point)) => {
                let (dg_mw, loss_mw, verified) = verify_point(case, variant, &topology, &point);
                let entry = ParetoPoint { rho_or_cap: rho, is_cap: false, dg_mw, loss_mw, verified };
                match variant {
                    Variant::Exact => {
                        if rho < pivot_rho {
                            pivot_rho = rho;
                            pivot_loss = Some(point.total_loss(case));
                        }
                        curves.exact.push(entry);
                    }
                    _ => curves.conic.push(entry),
                }
            }
            Err(msg) => curves.failures.push(format!("{variant:?} rho={rho}: {msg}")),
        }
    }

    // Loss-capped DG maximization for the ρ ≤ 0.5 part of the exact curve.
    if let Some(pivot) = pivot_loss {
        let caps: Vec<f64> = (0..10).map(|i| pivot * (1.0 + i as f64)).collect();
        let capped: Vec<_> = caps
            .par_iter()
            .map(|&cap| (cap, solve_capped(case, k_max, cap, params)))
            .collect();
        for (cap, outcome) in capped {
            match outcome {
                Ok((topology, point)) => {
                    let (dg_mw, loss_mw, verified) =
                        verify_point(case, Variant::Exact, &topology, &point);
                    curves.exact.push(ParetoPoint {
                        rho_or_cap: cap,
                        is_cap: true,
                        dg_mw,
                        loss_mw,
                        verified,
                    });
                }
                Err(msg) => curves.failures.push(format!("losscap={cap}: {msg}")),
            }
        }
    }
    curves.exact.sort_by(|a, b| a.loss_mw.total_cmp(&b.loss_mw));
    curves.conic.sort_by(|a, b| a.loss_mw.total_cmp(&b.loss_mw));
    curves
}

fn verify_point(
    case: &NetworkCase,
    variant: Variant,
    topology: &SwitchTopology,
    point: &OperatingPoint,
) -> (f64, f64, bool) {
    match variant {
        // The conic dispatch is judged by what the network would actually do.
        Variant::Conic | Variant::LinDistFlow => verify_dispatch(case, topology, point),
        Variant::Exact => {
            let (dg, loss, ok) = verify_dispatch(case, topology, point);
            debug_assert!(ok, "exact dispatch failed posterior verification");
            (dg, loss, ok)
        }
    }
}

fn solve_weighted(
    case: &NetworkCase,
    k_max: u32,
    variant: Variant,
    rho: f64,
    params: &SolveParams,
) -> Result<(SwitchTopology, OperatingPoint), String> {
    let model = build_model(case, k_max, variant, Objective::Weighted(rho))
        .map_err(|e| e.to_string())?;
    run_to_incumbent(&model, params)
}

fn solve_capped(
    case: &NetworkCase,
    k_max: u32,
    cap: f64,
    params: &SolveParams,
) -> Result<(SwitchTopology, OperatingPoint), String> {
    let model = build_model(case, k_max, Variant::Exact, Objective::DgMaxLossCap(cap))
        .map_err(|e| e.to_string())?;
    run_to_incumbent(&model, params)
}

fn run_to_incumbent(
    model: &ModelInstance,
    params: &SolveParams,
) -> Result<(SwitchTopology, OperatingPoint), String> {
    let result = sbb::solve(model, params).map_err(|e| e.to_string())?;
    match result.incumbent {
        Some(inc) => Ok((inc.topology, inc.point)),
        None => Err(format!("no incumbent ({:?})", result.termination)),
    }
}

/// One row of a hosting-capacity scan.
#[derive(Debug, Clone, Serialize)]
pub struct HcRecord {
    pub node: usize,
    pub k: u32,
    pub hc_mw: f64,
    pub gap: Option<f64>,
    pub status: String,
}

/// Hosting capacity per site: add one large DG unit at a node, maximize its
/// output under the exact model for each switch budget, record the result.
/// Nodes are solved independently in parallel.
pub fn hc_site_scan(
    case: &NetworkCase,
    k_list: &[u32],
    node_filter: Option<&[usize]>,
    added_rating_pu: f64,
    params: &SolveParams,
) -> Vec<HcRecord> {
    let nodes: Vec<usize> = match node_filter {
        Some(filter) => filter.to_vec(),
        None => (1..case.n_buses()).collect(),
    };
    let mut jobs: Vec<(usize, u32)> = Vec::new();
    for &node in &nodes {
        for &k in k_list {
            jobs.push((node, k));
        }
    }
    let mut records: Vec<HcRecord> = jobs
        .par_iter()
        .map(|&(node, k)| {
            let mut scan_case = case.clone();
            scan_case.buses[node].dg = Some(DgRating {
                p_min: 0.0,
                p_max: added_rating_pu,
                q_min: -added_rating_pu,
                q_max: added_rating_pu,
                capacity: added_rating_pu,
                pf_min: 0.9,
            });
            let model = match build_model(&scan_case, k, Variant::Exact, Objective::DgMax) {
                Ok(m) => m,
                Err(e) => {
                    return HcRecord {
                        node,
                        k,
                        hc_mw: 0.0,
                        gap: None,
                        status: format!("model error: {e}"),
                    }
                }
            };
            match sbb::solve(&model, params) {
                Ok(result) => match &result.incumbent {
                    Some(inc) => HcRecord {
                        node,
                        k,
                        // The added unit's own output, not the system total.
                        hc_mw: inc.point.p_gen[node] * case.s_base_mva,
                        gap: result.gap,
                        status: format!("{:?}", result.termination),
                    },
                    None => HcRecord {
                        node,
                        k,
                        hc_mw: 0.0,
                        gap: None,
                        status: if result.termination == Termination::Infeasible {
                            "infeasible".into()
                        } else {
                            format!("no incumbent ({:?})", result.termination)
                        },
                    },
                },
                Err(e) => HcRecord { node, k, hc_mw: 0.0, gap: None, status: format!("{e}") },
            }
        })
        .collect();
    records.sort_by_key(|r| (r.node, r.k));
    records
}

/// Share of nodes whose hosting capacity rises by at least y% when moving
/// from K = 0 to `k`: returns `(y_pct, share_pct)` sampled at each node's
/// increase, descending. The distribution behind the cumulative HC-increase
/// plot.
pub fn hc_increase_distribution(records: &[HcRecord], k: u32) -> Vec<(f64, f64)> {
    let mut increases = Vec::new();
    let mut base: std::collections::BTreeMap<usize, f64> = Default::default();
    for r in records {
        if r.k == 0 {
            base.insert(r.node, r.hc_mw);
        }
    }
    for r in records {
        if r.k == k {
            if let Some(&b) = base.get(&r.node) {
                if b > 1e-9 {
                    increases.push(100.0 * (r.hc_mw - b) / b);
                } else if r.hc_mw > 1e-9 {
                    increases.push(f64::INFINITY);
                }
            }
        }
    }
    increases.sort_by(|a, b| b.total_cmp(a));
    let n = increases.len().max(1) as f64;
    increases
        .into_iter()
        .enumerate()
        .map(|(i, y)| (y, 100.0 * (i + 1) as f64 / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::{parse_case, CaseFormat};

    #[test]
    fn tightness_of_published_solutions() {
        let case =
            parse_case(include_str!("../data/three_bus.json"), CaseFormat::Native).unwrap();
        let model = build_model(&case, 0, Variant::Exact, Objective::DgMax).unwrap();
        let topo = SwitchTopology::orient(&case, &[true, true]).unwrap();
        let exact_point = OperatingPoint {
            nu: vec![1.0, 1.1025, 1.0964],
            ell: vec![0.0, 25.0, 0.2645],
            p_line: vec![0.0, -4.9991, 0.50264],
            q_line: vec![0.0, 0.092606, -0.19736],
            p_gen: vec![0.0, 7.7518, 0.0],
            q_gen: vec![0.0, 0.39754, 0.0],
            parent: topo.parent.clone(),
        };
        // Table rounding keeps the exact optimum within ~1e-4 of tight.
        let report = tightness_report(&model, &topo, &exact_point);
        assert!(report.max_slack < 1e-3);

        let conic_point = OperatingPoint {
            ell: vec![0.0, 25.0, 25.0],
            nu: vec![1.0, 1.1025, 1.0915],
            p_line: vec![0.0, -4.9991, 0.75],
            q_line: vec![0.0, 0.092606, 0.049999],
            p_gen: vec![0.0, 7.9991, 0.0],
            q_gen: vec![0.0, 0.64489, 0.0],
            parent: topo.parent.clone(),
        };
        let report = tightness_report(&model, &topo, &conic_point);
        assert!(!report.tight);
        assert!((report.max_slack - 26.9975).abs() < 1e-3);
    }

    #[test]
    fn hc_distribution_counts_shares() {
        let records = vec![
            HcRecord { node: 1, k: 0, hc_mw: 1.0, gap: None, status: "ok".into() },
            HcRecord { node: 1, k: 2, hc_mw: 1.5, gap: None, status: "ok".into() },
            HcRecord { node: 2, k: 0, hc_mw: 2.0, gap: None, status: "ok".into() },
            HcRecord { node: 2, k: 2, hc_mw: 2.0, gap: None, status: "ok".into() },
        ];
        let dist = hc_increase_distribution(&records, 2);
        assert_eq!(dist.len(), 2);
        assert!((dist[0].0 - 50.0).abs() < 1e-12);
        assert!((dist[0].1 - 50.0).abs() < 1e-12);
        assert!((dist[1].0 - 0.0).abs() < 1e-12);
        assert!((dist[1].1 - 100.0).abs() < 1e-12);
    }
}
