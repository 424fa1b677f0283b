//! Dive toward a known-feasible point, checking cuts and LP outcomes.

use gridreconf::loadflow::{sweep_load_flow, violation_report};
use gridreconf::lp::{LinRow, RowOp};
use gridreconf::model::{build_model, Objective, Variant};
use gridreconf::netcase::{parse_case, CaseFormat, DgRating};
use gridreconf::radiality::SwitchTopology;
use gridreconf::sbb::{fbbt, relax};

fn check_rows(tag: &str, rows: &[LinRow], x: &[f64]) -> bool {
    let mut ok = true;
    for (i, row) in rows.iter().enumerate() {
        let viol = row.violation(x);
        if viol > 1e-6 * (1.0 + row.rhs.abs()) {
            println!("  {tag} row {i} violated by {viol:.3e} (op {:?} rhs {})", row.op, row.rhs);
            ok = false;
        }
    }
    ok
}

fn main() {
    let mut case = parse_case(include_str!("../data/case33bw.m"), CaseFormat::MCase).unwrap();
    let ib = case.i_base_amps();
    let sq = |amps: f64| (amps / ib) * (amps / ib);
    let other = sq(400.0);
    for line in &mut case.lines {
        line.i_max_sq = other;
        line.switchable = true;
        line.alpha_lb = 0;
        line.alpha_ub = 1;
    }
    for (a, b) in [(6, 26), (26, 27), (27, 28), (28, 29)] {
        let i = case.line_between(a - 1, b - 1).unwrap();
        case.lines[i].i_max_sq = sq(200.0);
    }
    for &mp in &[25usize, 30] {
        case.buses[mp - 1].dg = Some(DgRating {
            p_min: 0.0, p_max: 1.0, q_min: -1.0, q_max: 1.0, capacity: 1.0, pf_min: 0.9,
        });
    }
    let mut closed: Vec<bool> = case.lines.iter().map(|l| l.alpha0 == 1).collect();
    closed[case.line_between(2, 22).unwrap()] = false;
    closed[case.line_between(24, 28).unwrap()] = true;
    let topo = SwitchTopology::orient(&case, &closed).expect("radial");

    let n = case.n_buses();
    let tan = 0.9f64.acos().tan();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for i in 0..26 {
        for j in 0..26 {
            let p1 = i as f64 / 25.0;
            let p2 = j as f64 / 25.0;
            for (f1, f2) in [(-1.0, -1.0), (-0.5, -0.5), (0.0, 0.0), (-1.0, 0.0), (0.0, -1.0)] {
                let mut pg = vec![0.0; n];
                let mut qg = vec![0.0; n];
                pg[24] = p1; pg[29] = p2;
                qg[24] = f1 * tan * p1; qg[29] = f2 * tan * p2;
                if let Ok(pt) = sweep_load_flow(&case, &topo, &pg, &qg) {
                    if violation_report(&case, &pt).is_empty()
                        && best.as_ref().is_none_or(|b| p1 + p2 > b.0) {
                        best = Some((p1 + p2, pg, qg));
                    }
                }
            }
        }
    }
    let (_, pg, qg) = best.expect("grid found something feasible");
    let point = sweep_load_flow(&case, &topo, &pg, &qg).unwrap();
    println!("reference dispatch {} MW", point.total_dg() * case.s_base_mva);

    let model = build_model(&case, 2, Variant::Exact, Objective::DgMax).unwrap();
    let xref = model.embed_point(&topo, &point);
    let cones = relax::effective_cones(&model);
    let mut objective = vec![0.0; model.num_vars()];
    for &(v, a) in &model.objective.coeffs {
        objective[v] += a;
    }

    // Dive: fix π variables one at a time to the reference values.
    let mut boxes: Vec<(f64, f64)> = model.vars.iter().map(|d| (d.lo, d.hi)).collect();
    let mut pool: Vec<LinRow> = Vec::new();
    for depth in 0..=model.index.pi.len() {
        let mut b = boxes.clone();
        if !fbbt::tighten(&model, &mut b) {
            println!("depth {depth}: FBBT infeasible <-- WRONG");
            return;
        }
        // Reference must be inside tightened boxes.
        for (v, &(lo, hi)) in b.iter().enumerate() {
            let scale = 1.0 + lo.abs().max(hi.abs());
            if xref[v] < lo - 1e-6 * scale || xref[v] > hi + 1e-6 * scale {
                println!(
                    "depth {depth}: FBBT cut ref: {} = {} notin [{lo}, {hi}]",
                    model.vars[v].kind, xref[v]
                );
                return;
            }
        }
        let (outcome, cuts, _lps) =
            relax::solve_node_relaxation(&model, &b, &cones, &pool, &objective);
        for rec in &cuts {
            if rec.row.violation(&xref) > 1e-6 * (1.0 + rec.row.rhs.abs()) {
                println!("depth {depth}: INVALID CUT generated (violates reference)");
                check_rows("cut", std::slice::from_ref(&rec.row), &xref);
                return;
            }
            pool.push(rec.row.clone());
        }
        match outcome {
            relax::RelaxOutcome::Bounded { value, .. } => {
                if depth % 10 == 0 || depth + 1 == model.index.pi.len() {
                    println!("depth {depth}: bound {value:.4} (pool {})", pool.len());
                }
            }
            relax::RelaxOutcome::Infeasible => {
                println!("depth {depth}: node LP INFEASIBLE while reference inside <-- WRONG");
                let mut all = relax::base_rows(&model, &b);
                all.extend(pool.iter().cloned());
                let ok = check_rows("node", &all, &xref);
                println!("reference satisfies all {} node rows: {ok}", all.len());
                // Dump the LP for standalone analysis.
                let dump = serde_json::json!({
                    "bounds": b,
                    "rows": all.iter().map(|r| serde_json::json!({
                        "coeffs": r.coeffs, "op": format!("{:?}", r.op), "rhs": r.rhs,
                    })).collect::<Vec<_>>(),
                    "xref": xref, "objective": objective,
                });
                std::fs::write("/tmp/failing_lp.json", dump.to_string()).unwrap();
                println!("dumped to /tmp/failing_lp.json");
                return;
            }
            relax::RelaxOutcome::Failure(msg) => {
                println!("depth {depth}: failure {msg}");
                return;
            }
        }
        if depth == model.index.pi.len() {
            break;
        }
        // Fix the next π to its reference value.
        let v = model.index.pi[depth];
        boxes[v] = (xref[v], xref[v]);
    }
    println!("dive completed; all nodes on the reference path feasible");
}
