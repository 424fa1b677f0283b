//! Standalone analysis of a dumped node LP.

use gridreconf::lp::{self, LinRow, LpProblem, RowOp};

fn main() {
    let text = std::fs::read_to_string("/tmp/failing_lp.json").unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let bounds: Vec<(f64, f64)> = v["bounds"]
        .as_array().unwrap().iter()
        .map(|b| (b[0].as_f64().unwrap(), b[1].as_f64().unwrap()))
        .collect();
    let xref: Vec<f64> = v["xref"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let rows: Vec<LinRow> = v["rows"].as_array().unwrap().iter().map(|r| {
        let coeffs: Vec<(usize, f64)> = r["coeffs"].as_array().unwrap().iter()
            .map(|c| (c[0].as_u64().unwrap() as usize, c[1].as_f64().unwrap()))
            .collect();
        let op = match r["op"].as_str().unwrap() {
            "Le" => RowOp::Le,
            "Ge" => RowOp::Ge,
            _ => RowOp::Eq,
        };
        LinRow::new(coeffs, op, r["rhs"].as_f64().unwrap())
    }).collect();
    println!("{} vars, {} rows", bounds.len(), rows.len());

    let objective: Vec<f64> = v["objective"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // Objective: maximize nothing (feasibility), then the real question.
    let problem = LpProblem {
        bounds: bounds.clone(),
        rows: rows.clone(),
        objective: vec![0.0; bounds.len()],
        maximize: true,
    };
    let t = std::time::Instant::now();
    println!("feasibility solve: {:?} in {:?}", tag(&lp::solve(&problem)), t.elapsed());
    let problem = LpProblem {
        bounds: bounds.clone(),
        rows: rows.clone(),
        objective,
        maximize: true,
    };
    let t = std::time::Instant::now();
    println!("objective solve: {:?} in {:?}", tag(&lp::solve(&problem)), t.elapsed());

    // Check xref inside boxes.
    let mut worst: f64 = 0.0;
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        worst = worst.max(lo - xref[i]).max(xref[i] - hi);
    }
    println!("xref max box violation: {worst:.3e}");
    let mut worst_row: f64 = 0.0;
    for row in &rows {
        worst_row = worst_row.max(row.violation(&xref));
    }
    println!("xref max row violation: {worst_row:.3e}");
}

fn tag(o: &lp::LpOutcome) -> String {
    match o {
        lp::LpOutcome::Optimal { value, .. } => format!("optimal {value:.6}"),
        lp::LpOutcome::Infeasible => "infeasible".into(),
        lp::LpOutcome::Unbounded => "unbounded".into(),
        lp::LpOutcome::NumericalFailure(m) => format!("numfail {m}"),
    }
}
