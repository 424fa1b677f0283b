//! Validate a known-feasible embedded point against every model row, box,
//! node-LP row and FBBT-tightened box.

use gridreconf::loadflow::sweep_load_flow;
use gridreconf::model::{build_model, Objective, Variant};
use gridreconf::netcase::{parse_case, CaseFormat, DgRating};
use gridreconf::radiality::SwitchTopology;
use gridreconf::sbb::fbbt;

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
                    if gridreconf::loadflow::violation_report(&case, &pt).is_empty()
                        && best.as_ref().is_none_or(|b| p1 + p2 > b.0) {
                        best = Some((p1 + p2, pg, qg));
                    }
                }
            }
        }
    }
    let (total, pg, qg) = best.expect("some feasible dispatch");
    let point = sweep_load_flow(&case, &topo, &pg, &qg).unwrap();
    println!("verified dispatch: {} MW", total * case.s_base_mva);

    let model = build_model(&case, 2, Variant::Exact, Objective::DgMax).unwrap();
    let x = model.embed_point(&topo, &point);

    // Boxes.
    for (v, def) in model.vars.iter().enumerate() {
        let scale = 1.0 + def.lo.abs().max(def.hi.abs());
        if x[v] < def.lo - 1e-7 * scale || x[v] > def.hi + 1e-7 * scale {
            println!("BOX violated: {} = {} outside [{}, {}]", def.kind, x[v], def.lo, def.hi);
        }
    }
    // Rows.
    for (r, row) in model.rows.iter().enumerate() {
        let viol = row.violation(&x);
        if viol > 1e-7 * (1.0 + row.rhs.abs()) {
            println!("ROW {r} violated by {viol}: {:?} rhs {}", row.op, row.rhs);
            for &(v, a) in &row.coeffs {
                println!("   {} * {a} = {}", model.vars[v].kind, a * x[v]);
            }
        }
    }
    // FBBT from root boxes must keep the point.
    let mut boxes: Vec<(f64, f64)> = model.vars.iter().map(|d| (d.lo, d.hi)).collect();
    let ok = fbbt::tighten(&model, &mut boxes);
    println!("fbbt feasible: {ok}");
    if ok {
        for (v, &(lo, hi)) in boxes.iter().enumerate() {
            let scale = 1.0 + lo.abs().max(hi.abs());
            if x[v] < lo - 1e-7 * scale || x[v] > hi + 1e-7 * scale {
                println!(
                    "FBBT cut the point: {} = {} outside [{lo}, {hi}] (root [{}, {}])",
                    model.vars[v].kind, x[v], model.vars[v].lo, model.vars[v].hi
                );
            }
        }
    }
    println!("check done");
}
