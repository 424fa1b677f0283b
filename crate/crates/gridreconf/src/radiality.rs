//! Radial operation: single-commodity-flow encoding, switch-change budget and
//! independent spanning-tree oracles.
//!
//! The linear encoding ships one unit of fictitious flow from the slack to
//! every other bus over parent-oriented arcs and fixes the number of oriented
//! lines to `N`; it admits a feasible flow exactly for the radial
//! configurations. [`is_radial`] and [`enumerate_radial_configs`] are
//! graph-based oracles kept independent of that encoding.

use crate::lp::{self, LinRow, LpOutcome, LpProblem, RowOp};
use crate::netcase::{NetworkCase, UnionFind, SLACK};
use serde::Serialize;
use thiserror::Error;

/// A switch configuration with its parent orientation.
///
/// `closed[l]` is the status of line `l` (`α`); `parent[b]` is the parent bus
/// of `b` in the rooted tree (`π`), `None` for the slack and for buses of
/// non-radial configurations where orientation is meaningless.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct SwitchTopology {
    pub closed: Vec<bool>,
    pub parent: Vec<Option<usize>>,
}

impl SwitchTopology {
    /// Derive the parent orientation for a closed-line pattern by BFS from the
    /// slack. Returns `None` when the pattern is not a spanning tree.
    pub fn orient(case: &NetworkCase, closed: &[bool]) -> Option<SwitchTopology> {
        let n_buses = case.n_buses();
        if closed.iter().filter(|&&c| c).count() != case.n() {
            return None;
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_buses];
        for (l, line) in case.lines.iter().enumerate() {
            if closed[l] {
                adj[line.from].push((line.to, l));
                adj[line.to].push((line.from, l));
            }
        }
        let mut parent = vec![None; n_buses];
        let mut seen = vec![false; n_buses];
        let mut queue = std::collections::VecDeque::from([SLACK]);
        seen[SLACK] = true;
        let mut reached = 1;
        while let Some(bus) = queue.pop_front() {
            for &(next, _) in &adj[bus] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some(bus);
                    reached += 1;
                    queue.push_back(next);
                }
            }
        }
        if reached != n_buses {
            return None;
        }
        Some(SwitchTopology { closed: closed.to_vec(), parent })
    }

    /// Number of lines whose status differs from the initial configuration.
    pub fn changes_from_initial(&self, case: &NetworkCase) -> usize {
        self.closed
            .iter()
            .zip(case.lines.iter())
            .filter(|(c, l)| **c != (l.alpha0 == 1))
            .count()
    }

    /// Open lines as `(from, to)` pairs, for reports.
    pub fn open_lines(&self, case: &NetworkCase) -> Vec<(usize, usize)> {
        self.closed
            .iter()
            .zip(case.lines.iter())
            .filter(|(c, _)| !**c)
            .map(|(_, l)| (l.from, l.to))
            .collect()
    }
}

/// True iff the closed lines form a connected spanning subgraph with exactly
/// `N` edges. Union-find based; independent of the flow encoding.
pub fn is_radial(case: &NetworkCase, topology: &SwitchTopology) -> bool {
    let n_buses = case.n_buses();
    if topology.closed.len() != case.lines.len() {
        return false;
    }
    let closed_count = topology.closed.iter().filter(|&&c| c).count();
    if closed_count != case.n() {
        return false;
    }
    let mut uf = UnionFind::new(n_buses);
    for (l, line) in case.lines.iter().enumerate() {
        if topology.closed[l] {
            uf.union(line.from, line.to);
        }
    }
    uf.component_count() == 1
}

/// The single-commodity-flow radiality block.
///
/// Variables are ordered `[π over arcs..., f over arcs...]`; `arcs` lists both
/// orientations of every line with `alpha_ub = 1`. Arcs into the slack carry a
/// fixed-zero parent variable.
#[derive(Debug, Clone)]
pub struct RadialityBlock {
    pub n_buses: usize,
    /// Directed arcs `(parent, child)`.
    pub arcs: Vec<(usize, usize)>,
    /// Line index behind each arc.
    pub line_of_arc: Vec<usize>,
    /// Rows over the local variable space.
    pub rows: Vec<LinRow>,
    /// Per-variable bounds (π then f).
    pub bounds: Vec<(f64, f64)>,
}

impl RadialityBlock {
    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn pi_var(&self, arc: usize) -> usize {
        arc
    }

    pub fn flow_var(&self, arc: usize) -> usize {
        self.arcs.len() + arc
    }

    pub fn arc_index(&self, parent: usize, child: usize) -> Option<usize> {
        self.arcs.iter().position(|&(a, b)| a == parent && b == child)
    }

    /// Conservation rows (3a); capacity rows (3b); cardinality row (3c).
    pub fn row_counts(&self) -> (usize, usize, usize) {
        let mut conservation = 0;
        let mut capacity = 0;
        let mut cardinality = 0;
        for row in &self.rows {
            match row.op {
                RowOp::Eq if row.rhs == -1.0 => conservation += 1,
                RowOp::Le => capacity += 1,
                RowOp::Eq => cardinality += 1,
                _ => {}
            }
        }
        (conservation, capacity, cardinality)
    }
}

/// Build the flow-based radiality rows for a validated case.
pub fn build_radiality_block(case: &NetworkCase) -> RadialityBlock {
    let n_buses = case.n_buses();
    let n = case.n() as f64;
    let mut arcs = Vec::new();
    let mut line_of_arc = Vec::new();
    for (l, line) in case.lines.iter().enumerate() {
        if line.alpha_ub != 1 {
            continue;
        }
        arcs.push((line.from, line.to));
        line_of_arc.push(l);
        arcs.push((line.to, line.from));
        line_of_arc.push(l);
    }
    let num_arcs = arcs.len();
    let mut bounds = Vec::with_capacity(2 * num_arcs);
    for &(_, child) in &arcs {
        // π fixed to zero when it would make the slack a child.
        if child == SLACK {
            bounds.push((0.0, 0.0));
        } else {
            bounds.push((0.0, 1.0));
        }
    }
    for _ in &arcs {
        bounds.push((0.0, n));
    }

    let mut rows = Vec::new();
    // (3a): net outflow of fictitious flow is −1 at every non-slack bus.
    for bus in 1..n_buses {
        let mut coeffs = Vec::new();
        for (a, &(from, to)) in arcs.iter().enumerate() {
            if from == bus {
                coeffs.push((num_arcs + a, 1.0));
            } else if to == bus {
                coeffs.push((num_arcs + a, -1.0));
            }
        }
        rows.push(LinRow::new(coeffs, RowOp::Eq, -1.0));
    }
    // (3b): f ≤ N·π per arc (f ≥ 0 is a variable bound).
    for a in 0..num_arcs {
        rows.push(LinRow::new(vec![(num_arcs + a, 1.0), (a, -n)], RowOp::Le, 0.0));
    }
    // (3c): Σπ = N.
    rows.push(LinRow::new((0..num_arcs).map(|a| (a, 1.0)).collect(), RowOp::Eq, n));

    RadialityBlock { n_buses, arcs, line_of_arc, rows, bounds }
}

/// Switch-change budget row (over the block's π variables):
/// `Σ (α⁰(1−α) + α(1−α⁰)) ≤ 2·k_max` summed over ordered pairs.
pub fn build_switch_budget(case: &NetworkCase, block: &RadialityBlock, k_max: u32) -> LinRow {
    let mut coeffs = Vec::new();
    let mut constant = 0.0;
    for (a, &l) in block.line_of_arc.iter().enumerate() {
        let alpha0 = f64::from(case.lines[l].alpha0);
        // Both ordered pairs of a line carry its full status π_ab + π_ba, so
        // every arc's π picks up 2·(1 − 2α⁰); the constant 2α⁰ per line
        // accumulates as α⁰ per arc.
        coeffs.push((block.pi_var(a), 2.0 * (1.0 - 2.0 * alpha0)));
        constant += alpha0;
    }
    LinRow::new(coeffs, RowOp::Le, 2.0 * f64::from(k_max) - constant)
}

/// LP feasibility of the flow block for a fixed π assignment.
pub fn scf_feasible(block: &RadialityBlock, pi: &[f64]) -> bool {
    assert_eq!(pi.len(), block.num_arcs());
    let mut bounds = block.bounds.clone();
    for (a, &v) in pi.iter().enumerate() {
        if v < bounds[a].0 - 1e-9 || v > bounds[a].1 + 1e-9 {
            return false;
        }
        bounds[a] = (v, v);
    }
    let problem = LpProblem {
        objective: vec![0.0; bounds.len()],
        bounds,
        rows: block.rows.clone(),
        maximize: false,
    };
    matches!(lp::solve(&problem), LpOutcome::Optimal { .. })
}

#[derive(Debug, Error)]
#[error("enumeration limit {limit} exceeded ({found} configurations found)")]
pub struct EnumerateLimit {
    pub limit: usize,
    pub found: usize,
    /// Configurations discovered before the limit was hit.
    pub partial: Vec<SwitchTopology>,
}

/// Enumerate every radial configuration respecting the per-line α bounds,
/// each oriented by BFS from the slack. Intended for small cases.
pub fn enumerate_radial_configs(
    case: &NetworkCase,
    limit: usize,
) -> Result<Vec<SwitchTopology>, EnumerateLimit> {
    let n_lines = case.lines.len();
    let n = case.n();
    let mut closed = vec![false; n_lines];
    let mut forced_closed = 0usize;
    let mut free = Vec::new();
    for (l, line) in case.lines.iter().enumerate() {
        if line.alpha_lb == 1 {
            closed[l] = true;
            forced_closed += 1;
        } else if line.alpha_ub == 1 {
            free.push(l);
        }
    }
    if forced_closed > n {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut overflow = false;
    enumerate_rec(case, &free, 0, n - forced_closed, &mut closed, limit, &mut out, &mut overflow);
    if overflow {
        let found = out.len();
        return Err(EnumerateLimit { limit, found, partial: out });
    }
    Ok(out)
}

fn enumerate_rec(
    case: &NetworkCase,
    free: &[usize],
    at: usize,
    need: usize,
    closed: &mut Vec<bool>,
    limit: usize,
    out: &mut Vec<SwitchTopology>,
    overflow: &mut bool,
) {
    if *overflow {
        return;
    }
    if need == 0 {
        if let Some(topo) = SwitchTopology::orient(case, closed) {
            if out.len() >= limit {
                *overflow = true;
                return;
            }
            out.push(topo);
        }
        return;
    }
    if at >= free.len() || free.len() - at < need {
        return;
    }
    let line = free[at];
    closed[line] = true;
    enumerate_rec(case, free, at + 1, need - 1, closed, limit, out, overflow);
    closed[line] = false;
    enumerate_rec(case, free, at + 1, need, closed, limit, out, overflow);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::{BusData, LineData, PhaseMode, Units};

    fn line(from: usize, to: usize, switchable: bool, alpha0: u8) -> LineData {
        LineData {
            from,
            to,
            r: 0.01,
            x: 0.01,
            i_max_sq: 4.0,
            switchable,
            alpha_lb: if switchable { 0 } else { alpha0 },
            alpha_ub: if switchable { 1 } else { alpha0 },
            alpha0,
        }
    }

    fn bus(id: usize) -> BusData {
        BusData { id, p_load: 0.05, q_load: 0.02, v_min_sq: 0.9025, v_max_sq: 1.1025, dg: None }
    }

    /// Slack plus two buses, three switchable lines forming a triangle.
    pub(crate) fn triangle() -> NetworkCase {
        NetworkCase {
            buses: vec![bus(0), bus(1), bus(2)],
            lines: vec![line(0, 1, true, 1), line(1, 2, true, 1), line(0, 2, true, 0)],
            s_base_mva: 1.0,
            v_base_kv: 10.0,
            phase_mode: PhaseMode::ThreePhaseAggregate,
            units: Units::PerUnit,
        }
    }

    #[test]
    fn triangle_row_counts() {
        let block = build_radiality_block(&triangle());
        assert_eq!(block.num_arcs(), 6);
        let (conservation, capacity, cardinality) = block.row_counts();
        assert_eq!(conservation, 2);
        assert_eq!(capacity, 6);
        assert_eq!(cardinality, 1);
    }

    #[test]
    fn triangle_has_three_spanning_trees() {
        let configs = enumerate_radial_configs(&triangle(), 100).unwrap();
        assert_eq!(configs.len(), 3);
        for topo in &configs {
            assert!(is_radial(&triangle(), topo));
            // Parent pointers reach the slack within N steps.
            for start in 1..3 {
                let mut bus = start;
                let mut steps = 0;
                while let Some(p) = topo.parent[bus] {
                    bus = p;
                    steps += 1;
                    assert!(steps <= 2);
                }
                assert_eq!(bus, SLACK);
            }
        }
    }

    #[test]
    fn fixed_open_line_restricts_enumeration() {
        let mut case = triangle();
        case.lines[2].switchable = false;
        case.lines[2].alpha_lb = 0;
        case.lines[2].alpha_ub = 0;
        let configs = enumerate_radial_configs(&case, 100).unwrap();
        assert_eq!(configs.len(), 1);
        assert!(configs[0].closed[0] && configs[0].closed[1]);
    }

    #[test]
    fn four_cycle_has_four_trees() {
        let case = NetworkCase {
            buses: vec![bus(0), bus(1), bus(2), bus(3)],
            lines: vec![line(0, 1, true, 1), line(1, 2, true, 1), line(2, 3, true, 1), line(0, 3, true, 0)],
            s_base_mva: 1.0,
            v_base_kv: 10.0,
            phase_mode: PhaseMode::ThreePhaseAggregate,
            units: Units::PerUnit,
        };
        assert_eq!(enumerate_radial_configs(&case, 100).unwrap().len(), 4);
    }

    #[test]
    fn enumeration_limit_reports_partial() {
        let err = enumerate_radial_configs(&triangle(), 2).unwrap_err();
        assert_eq!(err.limit, 2);
        assert_eq!(err.partial.len(), 2);
    }

    #[test]
    fn cycle_is_not_radial() {
        let case = triangle();
        let topo = SwitchTopology { closed: vec![true, true, true], parent: vec![None; 3] };
        assert!(!is_radial(&case, &topo));
    }

    #[test]
    fn disconnected_forest_is_not_radial() {
        // Slack-1 doubled (parallel not allowed in real cases, fine for the check),
        // bus 2 isolated: two closed edges but not spanning.
        let case = NetworkCase {
            buses: vec![bus(0), bus(1), bus(2), bus(3)],
            lines: vec![line(0, 1, true, 1), line(2, 3, true, 1), line(1, 2, true, 0)],
            s_base_mva: 1.0,
            v_base_kv: 10.0,
            phase_mode: PhaseMode::ThreePhaseAggregate,
            units: Units::PerUnit,
        };
        let topo = SwitchTopology { closed: vec![true, true, false], parent: vec![None; 4] };
        assert!(!is_radial(&case, &topo));
    }

    #[test]
    fn budget_row_counts_status_changes() {
        let case = triangle();
        let block = build_radiality_block(&case);
        let row = build_switch_budget(&case, &block, 2);
        // α = α⁰ (lines 0,1 closed via arc orientation 0→1→2, line 2 open).
        let mut pi = vec![0.0; block.num_arcs()];
        pi[block.arc_index(0, 1).unwrap()] = 1.0;
        pi[block.arc_index(1, 2).unwrap()] = 1.0;
        let mut x = vec![0.0; block.bounds.len()];
        x[..pi.len()].copy_from_slice(&pi);
        // LHS − RHS = Σ(1−2α⁰)π + Σα⁰ − 2K ⇒ activity ≤ rhs means within budget.
        assert!(row.activity(&x) <= row.rhs + 1e-12);

        // One open + one close vs α⁰ is feasible with K = 2 but not K = 1.
        let mut pi = vec![0.0; block.num_arcs()];
        pi[block.arc_index(0, 1).unwrap()] = 1.0;
        pi[block.arc_index(0, 2).unwrap()] = 1.0;
        let mut x = vec![0.0; block.bounds.len()];
        x[..pi.len()].copy_from_slice(&pi);
        let row2 = build_switch_budget(&case, &block, 2);
        assert!(row2.activity(&x) <= row2.rhs + 1e-12);
        let row1 = build_switch_budget(&case, &block, 1);
        assert!(row1.activity(&x) > row1.rhs + 1e-12);
    }

    #[test]
    fn scf_matches_radial_oracle_on_triangle() {
        let case = triangle();
        let block = build_radiality_block(&case);
        let configs = enumerate_radial_configs(&case, 100).unwrap();
        let mut feasible = 0;
        // Exhaust all π assignments with π_ab + π_ba ≤ 1.
        let arcs = block.num_arcs();
        for mask in 0..(1u32 << arcs) {
            let pi: Vec<f64> = (0..arcs).map(|a| f64::from((mask >> a) & 1)).collect();
            let mut ok = true;
            for a in 0..arcs {
                let (from, to) = block.arcs[a];
                if let Some(rev) = block.arc_index(to, from) {
                    if pi[a] + pi[rev] > 1.0 {
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
            if scf_feasible(&block, &pi) {
                feasible += 1;
                // A feasible π must project onto a radial α.
                let mut closed = vec![false; case.lines.len()];
                for (a, &l) in block.line_of_arc.iter().enumerate() {
                    if pi[a] > 0.5 {
                        closed[l] = true;
                    }
                }
                let topo = SwitchTopology::orient(&case, &closed).expect("spanning tree");
                assert!(is_radial(&case, &topo));
            }
        }
        // Each spanning tree admits exactly one rooted orientation.
        assert_eq!(feasible, configs.len());
    }
}
