//! Cross-checks of the sweep load flow against an independently written
//! Newton-Raphson oracle, plus the classic 33-bus fingerprints.

mod common;

use common::{initial_topology, load_case33, newton_loadflow};
use gridreconf::loadflow::sweep_load_flow;
use gridreconf::model::residuals;

#[test]
fn case33_base_load_flow_matches_newton_oracle() {
    let case = load_case33();
    assert_eq!(case.n_buses(), 33);
    assert_eq!(case.lines.len(), 37);
    assert_eq!(case.lines.iter().filter(|l| l.alpha0 == 0).count(), 5);

    let topo = initial_topology(&case);
    let zeros = vec![0.0; case.n_buses()];
    let swept = sweep_load_flow(&case, &topo, &zeros, &zeros).unwrap();
    let newton_vm = newton_loadflow(&case, &topo, &zeros, &zeros).expect("newton converges");

    let mut worst = 0.0_f64;
    for bus in 0..case.n_buses() {
        worst = worst.max((swept.nu[bus].sqrt() - newton_vm[bus]).abs());
    }
    assert!(worst <= 1e-5, "per-bus voltage mismatch {worst}");

    // DistFlow residuals at the swept point.
    let report = residuals(&case, &topo, &swept);
    assert!(report.max_balance_residual() <= 1e-8);
    assert!(report.max_svi_residual() <= 1e-8);
}

/// The well-known figures for the unmodified benchmark: minimum voltage
/// ≈ 0.9131 pu at the end of the main feeder, total loss ≈ 0.0203 pu
/// (202.7 kW on the 10 MVA base).
#[test]
fn case33_base_fingerprints() {
    let case = load_case33();
    let topo = initial_topology(&case);
    let zeros = vec![0.0; case.n_buses()];
    let point = sweep_load_flow(&case, &topo, &zeros, &zeros).unwrap();

    let (argmin, min_nu) = point
        .nu
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let vmin = min_nu.sqrt();
    assert!((vmin - 0.9131).abs() < 5e-4, "vmin = {vmin}");
    assert_eq!(argmin, 17); // original bus 18

    let loss = point.total_loss(&case);
    assert!((loss - 0.020271).abs() < 3e-4, "loss = {loss}");

    // Slack feed balances load plus losses.
    let feed: f64 = point
        .parent
        .iter()
        .enumerate()
        .filter(|&(_, p)| *p == Some(0))
        .map(|(bus, _)| point.p_line[bus])
        .sum();
    let total_load: f64 = case.buses.iter().map(|b| b.p_load).sum();
    assert!((feed - (total_load + loss)).abs() < 1e-8);
}
