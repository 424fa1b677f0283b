//! Scratch driver for benchmark reconstruction experiments.

use gridreconf::model::{build_model, Objective, Variant};
use gridreconf::netcase::{parse_case, CaseFormat, DgRating, NetworkCase};
use gridreconf::sbb::{self, SolveParams};

/// Matpower 1-indexed pairs of the bottleneck segment (paper buses 5..28).
const SEGMENT: [(usize, usize); 4] = [(6, 26), (26, 27), (27, 28), (28, 29)];

fn amps_to_sq(case: &NetworkCase, amps: f64) -> f64 {
    let pu = amps / case.i_base_amps();
    pu * pu
}

fn prepare(case: &NetworkCase, dg_mp: &[usize], other_amps: f64, segment_amps: f64) -> NetworkCase {
    let mut out = case.clone();
    let seg = amps_to_sq(case, segment_amps);
    let other = amps_to_sq(case, other_amps);
    for line in &mut out.lines {
        line.i_max_sq = other;
        line.switchable = true;
        line.alpha_lb = 0;
        line.alpha_ub = 1;
    }
    for &(a, b) in &SEGMENT {
        let idx = out.line_between(a - 1, b - 1).unwrap();
        out.lines[idx].i_max_sq = seg;
    }
    for &mp in dg_mp {
        out.buses[mp - 1].dg = Some(DgRating {
            p_min: 0.0,
            p_max: 1.0,
            q_min: -1.0,
            q_max: 1.0,
            capacity: 1.0,
            pf_min: 0.9,
        });
    }
    out
}

fn main() {
    let base = parse_case(include_str!("../data/case33bw.m"), CaseFormat::MCase).unwrap();
    let args: Vec<String> = std::env::args().collect();
    let dg: Vec<usize> = args[1].split(',').map(|s| s.parse().unwrap()).collect();
    let other: f64 = args[2].parse().unwrap();
    let segment: f64 = args[3].parse().unwrap();
    let k: u32 = args[4].parse().unwrap();
    let time: f64 = args.get(5).map_or(120.0, |s| s.parse().unwrap());
    let gap: f64 = args.get(6).map_or(0.01, |s| s.parse().unwrap());

    let case = prepare(&base, &dg, other, segment);
    let model = build_model(&case, k, Variant::Exact, Objective::DgMax).unwrap();
    let params = SolveParams {
        gap_target: gap,
        time_limit: Some(time),
        threads: 2,
        ..Default::default()
    };
    let t = std::time::Instant::now();
    let result = sbb::solve(&model, &params).unwrap();
    let mw = result.incumbent.as_ref().map(|i| i.point.total_dg() * case.s_base_mva);
    println!(
        "dg={dg:?} other={other}A seg={segment}A K={k}: obj_mw={mw:?} bound={:?} gap={:?} nodes={} [{:?}] in {:.1?}",
        result.bound.map(|b| b * case.s_base_mva),
        result.gap,
        result.nodes,
        result.termination,
        t.elapsed()
    );
    if let Some(inc) = &result.incumbent {
        let opens: Vec<(usize, usize)> = inc
            .topology
            .open_lines(&case)
            .iter()
            .map(|&(a, b)| (a + 1, b + 1))
            .collect();
        println!("  open lines (MP): {opens:?}");
    }
}
