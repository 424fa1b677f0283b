//! Feasibility probe: paper's K=2 topology, grid over DG dispatches.

use gridreconf::loadflow::{sweep_load_flow, violation_report};
use gridreconf::netcase::{parse_case, CaseFormat, DgRating};
use gridreconf::radiality::SwitchTopology;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dg: Vec<usize> = args[1].split(',').map(|s| s.parse().unwrap()).collect();
    let other: f64 = args[2].parse().unwrap();
    let seg: f64 = args[3].parse().unwrap();

    let mut case = parse_case(include_str!("../data/case33bw.m"), CaseFormat::MCase).unwrap();
    let ib = case.i_base_amps();
    let sq = |amps: f64| (amps / ib) * (amps / ib);
    for line in &mut case.lines {
        line.i_max_sq = sq(other);
    }
    for (a, b) in [(6, 26), (26, 27), (27, 28), (28, 29)] {
        let i = case.line_between(a - 1, b - 1).unwrap();
        case.lines[i].i_max_sq = sq(seg);
    }
    for &mp in &dg {
        case.buses[mp - 1].dg = Some(DgRating {
            p_min: 0.0, p_max: 1.0, q_min: -1.0, q_max: 1.0, capacity: 1.0, pf_min: 0.9,
        });
    }
    // Paper K=2: open MP 3-23, close tie MP 25-29.
    let mut closed: Vec<bool> = case.lines.iter().map(|l| l.alpha0 == 1).collect();
    closed[case.line_between(2, 22).unwrap()] = false;
    closed[case.line_between(24, 28).unwrap()] = true;
    let topo = SwitchTopology::orient(&case, &closed).expect("radial");

    let tan = 0.9f64.acos().tan();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let n = case.n_buses();
    let steps = 51usize;
    for i in 0..steps {
        for j in 0..steps {
            let p1 = i as f64 / (steps - 1) as f64;
            let p2 = j as f64 / (steps - 1) as f64;
            for (f1, f2) in [(-1.0, -1.0), (-0.5, -0.5), (0.0, 0.0), (0.5, 0.5), (-1.0, 0.0), (0.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let mut pg = vec![0.0; n];
                let mut qg = vec![0.0; n];
                pg[dg[0] - 1] = p1;
                pg[dg[1] - 1] = p2;
                qg[dg[0] - 1] = f1 * tan * p1;
                qg[dg[1] - 1] = f2 * tan * p2;
                if let Ok(point) = sweep_load_flow(&case, &topo, &pg, &qg) {
                    if violation_report(&case, &point).is_empty() {
                        let total = p1 + p2;
                        if best.as_ref().is_none_or(|b| total > b.0) {
                            best = Some((total, pg.clone(), qg.clone()));
                        }
                    }
                }
            }
        }
    }
    match best {
        Some((total, pg, qg)) => {
            println!("feasible; best grid dispatch = {:.3} MW", total * case.s_base_mva);
            let point = sweep_load_flow(&case, &topo, &pg, &qg).unwrap();
            let vmin = point.nu.iter().skip(1).fold(f64::INFINITY, |m, &v| m.min(v)).sqrt();
            let vmax = point.nu.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt();
            println!("vmin={vmin:.4} vmax={vmax:.4}");
        }
        None => println!("no feasible dispatch on the grid"),
    }
}
