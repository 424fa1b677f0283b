//! Root-relaxation profiling.

use gridreconf::model::{build_model, Objective, Variant};
use gridreconf::netcase::{parse_case, CaseFormat, DgRating};
use gridreconf::sbb::relax;
use gridreconf::lp::{self, LpProblem};

fn main() {
    let mut case = parse_case(include_str!("../data/case33bw.m"), CaseFormat::MCase).unwrap();
    let sq400 = (400.0f64 / case.i_base_amps()).powi(2);
    for line in &mut case.lines {
        line.i_max_sq = sq400;
        line.switchable = true;
        line.alpha_lb = 0;
        line.alpha_ub = 1;
    }
    for &mp in &[25usize, 30] {
        case.buses[mp - 1].dg = Some(DgRating {
            p_min: 0.0, p_max: 1.0, q_min: -1.0, q_max: 1.0, capacity: 1.0, pf_min: 0.9,
        });
    }
    let model = build_model(&case, 2, Variant::Exact, Objective::DgMax).unwrap();
    println!("vars={} rows={} products={} groups={}", model.num_vars(), model.rows.len(), model.products.len(), model.bilinear_groups.len());

    let boxes: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();
    let mut objective = vec![0.0; model.num_vars()];
    for &(v, a) in &model.objective.coeffs { objective[v] += a; }

    // Time a single bare LP (no OA loop).
    let mut rows = model.rows.clone();
    for p in &model.products {
        rows.extend(gridreconf::model::mccormick_envelope(p.z, p.pi, p.x, boxes[p.pi], boxes[p.x]).unwrap());
    }
    for g in &model.bilinear_groups {
        rows.extend(gridreconf::model::mccormick_envelope(g.s, g.w, g.ell, boxes[g.w], boxes[g.ell]).unwrap());
        rows.extend(gridreconf::model::square_envelope(g.sp, g.p, boxes[g.p].0, boxes[g.p].1));
        rows.extend(gridreconf::model::square_envelope(g.sq, g.q, boxes[g.q].0, boxes[g.q].1));
    }
    println!("total LP rows: {}", rows.len());
    let problem = LpProblem { bounds: boxes.clone(), rows, objective: objective.clone(), maximize: true };
    let t = std::time::Instant::now();
    let out = lp::solve(&problem);
    println!("single LP: {:?} in {:?}", match out { lp::LpOutcome::Optimal{value,..} => format!("opt {value:.4}"), o => format!("{o:?}") }, t.elapsed());

    // Full root relaxation with OA loop.
    let cones = relax::effective_cones(&model);
    let t = std::time::Instant::now();
    let (outcome, cuts, lps) = relax::solve_node_relaxation(&model, &boxes, &cones, &[], &objective);
    match outcome {
        relax::RelaxOutcome::Bounded { value, .. } => println!("root relax: {value:.4} ({} lps, {} cuts) in {:?}", lps, cuts.len(), t.elapsed()),
        o => println!("root relax: {o:?} after {lps} lps in {:?}", t.elapsed()),
    }
}
